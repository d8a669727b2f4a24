//! Binary field snapshots.
//!
//! Layout (little endian): magic `FYHF`, version `u32`, `n` `u32`, `N` `u32`,
//! kind `u8` (0 real scalar, 1 complex scalar, 2 Hermitian), then row-major
//! `f64` data. Complex values are `(re, im)` pairs; Hermitian fields store the
//! full `n × n` complex matrix per point.

use super::{ComplexField, HermitianField, ScalarField, TorusGrid};
use crate::error::GeometryError;
use crate::linalg::{Mat, C64};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const MAGIC: &[u8; 4] = b"FYHF";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    Real = 0,
    Complex = 1,
    Hermitian = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub n: u32,
    pub resolution: u32,
    pub kind: SnapshotKind,
}

#[derive(Clone, Debug)]
pub enum Snapshot {
    Real(ScalarField),
    Complex(ComplexField),
    Hermitian(HermitianField),
}

fn header_bytes(grid: &TorusGrid, kind: SnapshotKind) -> Vec<u8> {
    let mut out = Vec::with_capacity(17);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.resolution() as u32).to_le_bytes());
    out.push(kind as u8);
    out
}

fn push_f64s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_real(f: &ScalarField) -> Vec<u8> {
    let mut out = header_bytes(f.grid(), SnapshotKind::Real);
    push_f64s(&mut out, f.values().iter().copied());
    out
}

pub fn encode_complex(f: &ComplexField) -> Vec<u8> {
    let mut out = header_bytes(f.grid(), SnapshotKind::Complex);
    push_f64s(&mut out, f.values().iter().flat_map(|c| [c.re, c.im]));
    out
}

pub fn encode_hermitian(f: &HermitianField) -> Vec<u8> {
    let n = f.grid().dim();
    let mut out = header_bytes(f.grid(), SnapshotKind::Hermitian);
    push_f64s(
        &mut out,
        f.values().iter().flat_map(|m| {
            (0..n * n).flat_map(move |e| {
                let c = m[(e / n, e % n)];
                [c.re, c.im]
            })
        }),
    );
    out
}

pub fn write_real(path: &Path, f: &ScalarField) -> Result<(), GeometryError> {
    write_bytes(path, &encode_real(f))
}

pub fn write_complex(path: &Path, f: &ComplexField) -> Result<(), GeometryError> {
    write_bytes(path, &encode_complex(f))
}

pub fn write_hermitian(path: &Path, f: &HermitianField) -> Result<(), GeometryError> {
    write_bytes(path, &encode_hermitian(f))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), GeometryError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

pub fn read_header(bytes: &[u8]) -> Result<SnapshotHeader, GeometryError> {
    if bytes.len() < 17 || &bytes[0..4] != MAGIC {
        return Err(GeometryError::Snapshot("missing FYHF magic".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(GeometryError::Snapshot(format!(
            "unsupported version {version}"
        )));
    }
    let kind = match bytes[16] {
        0 => SnapshotKind::Real,
        1 => SnapshotKind::Complex,
        2 => SnapshotKind::Hermitian,
        k => return Err(GeometryError::Snapshot(format!("unknown field kind {k}"))),
    };
    Ok(SnapshotHeader {
        n: word(8),
        resolution: word(12),
        kind,
    })
}

/// Decode a snapshot onto `grid`, which must match the stored dimensions.
pub fn decode(bytes: &[u8], grid: &Arc<TorusGrid>) -> Result<Snapshot, GeometryError> {
    let h = read_header(bytes)?;
    if h.n as usize != grid.dim() || h.resolution as usize != grid.resolution() {
        return Err(GeometryError::GridMismatch);
    }
    let n = grid.dim();
    let per_point = match h.kind {
        SnapshotKind::Real => 1,
        SnapshotKind::Complex => 2,
        SnapshotKind::Hermitian => 2 * n * n,
    };
    let body = &bytes[17..];
    let expected = grid.len() * per_point * 8;
    if body.len() != expected {
        return Err(GeometryError::Snapshot(format!(
            "payload has {} bytes, expected {expected}",
            body.len()
        )));
    }
    let doubles: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(match h.kind {
        SnapshotKind::Real => Snapshot::Real(ScalarField::new(grid.clone(), doubles)),
        SnapshotKind::Complex => Snapshot::Complex(ComplexField::new(
            grid.clone(),
            doubles
                .chunks_exact(2)
                .map(|c| C64::new(c[0], c[1]))
                .collect(),
        )),
        SnapshotKind::Hermitian => Snapshot::Hermitian(HermitianField::new(
            grid.clone(),
            doubles
                .chunks_exact(2 * n * n)
                .map(|c| {
                    Mat::from_fn(n, |i, j| {
                        C64::new(c[2 * (i * n + j)], c[2 * (i * n + j) + 1])
                    })
                })
                .collect(),
        )),
    })
}

pub fn read(path: &Path, grid: &Arc<TorusGrid>) -> Result<Snapshot, GeometryError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, grid)
}
