//! Flat complex tori `Cⁿ/(Z+iZ)ⁿ` with the unit-volume flat Kähler metric,
//! Fourier pseudospectral complex derivatives, and wedge densities of
//! (1,1)-forms.
//!
//! Coordinates are `z^j = x^j + i y^j` with `x, y ∈ [0, 1)`. Real axes are
//! ordered `x¹, y¹, …, xⁿ, yⁿ` and flattened row-major (last axis fastest).
//! The background metric is `ĝ_{k̄j} = s δ_{kj}` with `s` fixed by
//! `∫ ω̂ⁿ = n! (2s)ⁿ = 1`.
//!
//! Matrix fields store `H[j][k]` as the coefficient of `i dz^j ∧ dz̄^k`; for a
//! complex Hessian this is `∂_j ∂_{k̄} u`.

mod fft;
pub mod snapshot;
pub mod wedge;

use crate::error::GeometryError;
use crate::linalg::{factorial, Mat, C64, MAX_DIM, ONE, ZERO};
use fft::MultiFft;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use wedge::{mixed_discriminant, wedge_density, wedge_density_at};

/// Maximum number of real axes (`2n` with `n ≤ 3`).
pub const MAX_AXES: usize = 2 * MAX_DIM;

pub struct TorusGrid {
    n: usize,
    resolution: usize,
    total: usize,
    scale: f64,
    freqs: Vec<i64>,
    fft: MultiFft,
    dz: Vec<Vec<C64>>,
    dzbar: Vec<Vec<C64>>,
    // Spectral index of `-κ` for each `κ`.
    neg: Vec<usize>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("resolution", &self.resolution)
            .field("scale", &self.scale)
            .finish()
    }
}

/// Metric factor `s` with `n! (2s)ⁿ = 1`.
pub fn unit_volume_scale(n: usize) -> f64 {
    0.5 * factorial(n).powf(-1.0 / n as f64)
}

/// Build the grid for complex dimension `n` with `resolution` points per real axis.
pub fn build_grid(n: usize, resolution: usize) -> Result<Arc<TorusGrid>, GeometryError> {
    TorusGrid::new(n, resolution)
}

impl TorusGrid {
    pub fn new(n: usize, resolution: usize) -> Result<Arc<Self>, GeometryError> {
        if !(2..=3).contains(&n) {
            return Err(GeometryError::UnsupportedDimension(n));
        }
        if resolution < 4 || !resolution.is_multiple_of(2) {
            return Err(GeometryError::InvalidResolution(resolution));
        }
        let axes = 2 * n;
        let total = resolution.pow(axes as u32);
        let half = resolution as i64 / 2;
        let freqs: Vec<i64> = (0..resolution as i64)
            .map(|i| if i < half { i } else { i - resolution as i64 })
            .collect();
        // First-derivative wavenumber; the Nyquist mode is dropped so the symbol is odd.
        let kd: Vec<f64> = freqs
            .iter()
            .map(|&k| if k.abs() == half { 0.0 } else { k as f64 })
            .collect();
        let mut dz = vec![vec![ZERO; total]; n];
        let mut dzbar = vec![vec![ZERO; total]; n];
        let mut neg = vec![0; total];
        for idx in 0..total {
            let mi = multi_index(idx, resolution, axes);
            neg[idx] = mi[..axes].iter().fold(0, |acc, &i| {
                acc * resolution + (resolution - i) % resolution
            });
            for p in 0..n {
                let kx = kd[mi[2 * p]];
                let ky = kd[mi[2 * p + 1]];
                dz[p][idx] = C64::new(PI * ky, PI * kx);
                dzbar[p][idx] = C64::new(-PI * ky, PI * kx);
            }
        }
        Ok(Arc::new(TorusGrid {
            n,
            resolution,
            total,
            scale: unit_volume_scale(n),
            freqs,
            fft: MultiFft::new(resolution, axes),
            dz,
            dzbar,
            neg,
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of grid points, `N^{2n}`.
    #[inline]
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Conformal factor `s` of `ĝ = s·δ`.
    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `∫ ω̂ⁿ` from the closed form `n! (2s)ⁿ`.
    pub fn analytic_volume(&self) -> f64 {
        factorial(self.n) * (2.0 * self.scale).powi(self.n as i32)
    }

    pub fn real_axes(&self) -> usize {
        2 * self.n
    }

    /// Signed integer frequencies along one axis in FFT order.
    pub fn frequencies(&self) -> &[i64] {
        &self.freqs
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_AXES] {
        multi_index(idx, self.resolution, self.real_axes())
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }

    /// Real coordinates `(x¹, y¹, …)` of grid point `idx`.
    pub fn coords(&self, idx: usize) -> [f64; MAX_AXES] {
        let mi = self.multi_index(idx);
        let mut c = [0.0; MAX_AXES];
        for a in 0..self.real_axes() {
            c[a] = mi[a] as f64 / self.resolution as f64;
        }
        c
    }

    /// Integer wavevector of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; MAX_AXES] {
        let mi = self.multi_index(idx);
        let mut k = [0; MAX_AXES];
        for a in 0..self.real_axes() {
            k[a] = self.freqs[mi[a]];
        }
        k
    }

    /// Symbol of `∂/∂z^p` at spectral index `idx`.
    #[inline]
    pub fn dz_symbol(&self, p: usize) -> &[C64] {
        &self.dz[p]
    }

    /// Symbol of `∂/∂z̄^p`.
    #[inline]
    pub fn dzbar_symbol(&self, p: usize) -> &[C64] {
        &self.dzbar[p]
    }

    /// Symbol of `Δ̂ = ĝ^{jk̄} ∂_j ∂_{k̄}` (real, nonpositive).
    pub fn laplacian_symbol(&self, idx: usize) -> f64 {
        let mut s = ZERO;
        for p in 0..self.n {
            s += self.dz[p][idx] * self.dzbar[p][idx];
        }
        s.re / self.scale
    }

    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut v = values.to_vec();
        self.fft.forward(&mut v);
        v
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<C64> {
        let mut v: Vec<C64> = values.par_iter().map(|&x| C64::new(x, 0.0)).collect();
        self.fft.forward(&mut v);
        v
    }

    /// Spectra of two real fields from one complex transform.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let mut v: Vec<C64> = a
            .par_iter()
            .zip(b.par_iter())
            .map(|(&x, &y)| C64::new(x, y))
            .collect();
        self.fft.forward(&mut v);
        let half = C64::new(0.5, 0.0);
        let mhalf_i = C64::new(0.0, -0.5);
        (0..self.total)
            .into_par_iter()
            .map(|i| {
                let z = v[i];
                let w = v[self.neg[i]].conj();
                ((z + w) * half, (z - w) * mhalf_i)
            })
            .unzip()
    }

    /// Inverse transforms of two Hermitian spectra `(A_i, B_i) = f(i)`, returned as real fields.
    pub fn inverse_real_pair<F>(&self, f: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(usize) -> (C64, C64) + Sync,
    {
        let mut v: Vec<C64> = (0..self.total)
            .into_par_iter()
            .map(|i| {
                let (a, b) = f(i);
                a + C64::new(-b.im, b.re)
            })
            .collect();
        self.fft.inverse(&mut v);
        v.into_par_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// Spectral index of `-κ`.
    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    pub fn inverse(&self, mut spectrum: Vec<C64>) -> Vec<C64> {
        self.fft.inverse(&mut spectrum);
        spectrum
    }

    /// Whether no axis of mode `idx` sits at the Nyquist frequency `N/2`.
    pub fn is_resolved(&self, idx: usize) -> bool {
        let half = self.resolution / 2;
        self.multi_index(idx)[..self.real_axes()]
            .iter()
            .all(|&m| m != half)
    }

    /// Remove every mode with a Nyquist component from a real field.
    pub fn project_resolved(&self, values: &[f64]) -> Vec<f64> {
        let spec = self.forward_real(values);
        self.apply_symbol(&spec, |i| if self.is_resolved(i) { ONE } else { ZERO })
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Inverse transform of `spectrum · symbol`.
    pub fn apply_symbol<F>(&self, spectrum: &[C64], symbol: F) -> Vec<C64>
    where
        F: Fn(usize) -> C64 + Sync,
    {
        let v: Vec<C64> = spectrum
            .par_iter()
            .enumerate()
            .map(|(i, &c)| c * symbol(i))
            .collect();
        self.inverse(v)
    }

    fn spectral_index(&self, wavevector: &[i64]) -> Result<usize, GeometryError> {
        if wavevector.len() != self.real_axes() {
            return Err(GeometryError::BadWavevector {
                expected: self.real_axes(),
                got: wavevector.len(),
            });
        }
        let half = self.resolution as i64 / 2;
        let mut mi = [0usize; MAX_AXES];
        for (a, &k) in wavevector.iter().enumerate() {
            if k.abs() >= half {
                return Err(GeometryError::UnresolvedMode {
                    wavevector: wavevector.to_vec(),
                    resolution: self.resolution,
                });
            }
            mi[a] = k.rem_euclid(self.resolution as i64) as usize;
        }
        Ok(self.flat_index(&mi[..self.real_axes()]))
    }

    /// Evaluate `Σ c_κ e^{2πi κ·x}` on the grid.
    pub fn synthesize(
        self: &Arc<Self>,
        terms: &[ScalarTerm],
    ) -> Result<ComplexField, GeometryError> {
        let mut spec = vec![ZERO; self.total];
        for t in terms {
            let idx = self.spectral_index(&t.wavevector)?;
            spec[idx] += t.coefficient.to_c64() * self.total as f64;
        }
        Ok(ComplexField::new(self.clone(), self.inverse(spec)))
    }

    /// Evaluate a matrix-valued trigonometric series on the grid.
    pub fn synthesize_matrix(
        self: &Arc<Self>,
        terms: &[MatrixTerm],
    ) -> Result<Vec<Mat>, GeometryError> {
        let n = self.n;
        let mut out = vec![Mat::zeros(n); self.total];
        for j in 0..n {
            for k in 0..n {
                let scalar: Vec<ScalarTerm> = terms
                    .iter()
                    .map(|t| {
                        t.entry(n, j, k).map(|c| ScalarTerm {
                            wavevector: t.wavevector.clone(),
                            coefficient: c,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let f = self.synthesize(&scalar)?;
                for (m, v) in out.iter_mut().zip(f.values) {
                    m[(j, k)] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Random real trigonometric polynomial over the modes `0 < max_a |κ_a| ≤ max_mode`.
///
/// Coefficients are uniform in the unit square scaled by `amplitude/(1+|κ|²)`;
/// the constant mode is left out so the field has zero mean.
pub fn random_field<R: Rng + ?Sized>(
    grid: &Arc<TorusGrid>,
    max_mode: i64,
    amplitude: f64,
    rng: &mut R,
) -> ScalarField {
    let axes = grid.real_axes();
    assert!(
        2 * max_mode < grid.resolution() as i64,
        "mode {max_mode} not resolved"
    );
    let width = (2 * max_mode + 1) as usize;
    let count = width.pow(axes as u32);
    let mut spec = vec![ZERO; grid.len()];
    let total = grid.len() as f64;
    let mut kv = vec![0i64; axes];
    let mut neg = vec![0i64; axes];
    for code in 0..count {
        let mut c = code;
        for a in (0..axes).rev() {
            kv[a] = (c % width) as i64 - max_mode;
            c /= width;
        }
        // One representative per ±κ pair: the first nonzero entry is positive.
        match kv.iter().find(|&&x| x != 0) {
            Some(&x) if x > 0 => {}
            _ => continue,
        }
        let r2: i64 = kv.iter().map(|x| x * x).sum();
        let w = amplitude / (1.0 + r2 as f64);
        let coef = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (w * total);
        for a in 0..axes {
            neg[a] = -kv[a];
        }
        let i = grid.spectral_index(&kv).expect("mode resolved");
        let j = grid.spectral_index(&neg).expect("mode resolved");
        spec[i] += coef;
        spec[j] += coef.conj();
    }
    let values = grid.inverse(spec).into_iter().map(|c| c.re).collect();
    ScalarField::new(grid.clone(), values)
}

fn multi_index(mut idx: usize, resolution: usize, axes: usize) -> [usize; MAX_AXES] {
    let mut mi = [0usize; MAX_AXES];
    for a in (0..axes).rev() {
        mi[a] = idx % resolution;
        idx /= resolution;
    }
    mi
}

/// Complex number as it appears in config documents: `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex(pub f64, pub f64);

impl Complex {
    pub fn to_c64(self) -> C64 {
        C64::new(self.0, self.1)
    }
}

/// One Fourier mode `c e^{2πi κ·x}` of a scalar field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarTerm {
    pub wavevector: Vec<i64>,
    pub coefficient: Complex,
}

/// One Fourier mode of a matrix field; `coefficient[j][k]` multiplies `i dz^j ∧ dz̄^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixTerm {
    pub wavevector: Vec<i64>,
    pub coefficient: Vec<Vec<Complex>>,
}

impl MatrixTerm {
    fn entry(&self, n: usize, j: usize, k: usize) -> Result<Complex, GeometryError> {
        if self.coefficient.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: self.coefficient.len(),
            });
        }
        let row = &self.coefficient[j];
        if row.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        Ok(row[k])
    }
}

/// Real-valued function on the grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<TorusGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        ScalarField { grid, values }
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: f64) -> Self {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample `f(coords)` at every grid point.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let axes = grid.real_axes();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.coords(i)[..axes]))
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self::new(
            self.grid.clone(),
            self.values.par_iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn add_scaled(&self, other: &ScalarField, c: f64) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫_X f ω̂ⁿ`; the grid mean since the volume is one.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn spectrum(&self) -> Vec<C64> {
        self.grid.forward_real(&self.values)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::new(
            self.grid.clone(),
            self.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    pub fn partial_z(&self, p: usize) -> ComplexField {
        let spec = self.spectrum();
        let sym = self.grid.dz_symbol(p);
        ComplexField::new(self.grid.clone(), self.grid.apply_symbol(&spec, |i| sym[i]))
    }

    pub fn partial_zbar(&self, p: usize) -> ComplexField {
        let spec = self.spectrum();
        let sym = self.grid.dzbar_symbol(p);
        ComplexField::new(self.grid.clone(), self.grid.apply_symbol(&spec, |i| sym[i]))
    }

    /// `(∂_1 u, …, ∂_n u)` from a single forward transform.
    pub fn gradient(&self) -> Vec<ComplexField> {
        let spec = self.spectrum();
        (0..self.grid.dim())
            .map(|p| {
                let sym = self.grid.dz_symbol(p);
                ComplexField::new(self.grid.clone(), self.grid.apply_symbol(&spec, |i| sym[i]))
            })
            .collect()
    }

    /// `Δ̂ f = ĝ^{jk̄} ∂_j ∂_{k̄} f`.
    pub fn laplacian(&self) -> ScalarField {
        let spec = self.spectrum();
        let g = &self.grid;
        let out = g.apply_symbol(&spec, |i| C64::new(g.laplacian_symbol(i), 0.0));
        Self::new(self.grid.clone(), out.into_iter().map(|c| c.re).collect())
    }

    /// `H[p][q] = ∂_p ∂_{q̄} u`, exactly Hermitian for real `u`.
    pub fn complex_hessian(&self) -> HermitianField {
        let spec = self.spectrum();
        hessian_from_spectrum(&self.grid, &spec)
    }

    /// `|∇u|²_ĝ = ĝ^{jk̄} u_j u_{k̄}`.
    pub fn gradient_norm_sqr(&self) -> ScalarField {
        let grad = self.gradient();
        let s = self.grid.scale();
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| grad.iter().map(|g| g.values[i].norm_sqr()).sum::<f64>() / s)
            .collect();
        Self::new(self.grid.clone(), values)
    }

    /// Sample onto a coarser grid whose resolution divides this one.
    pub fn restrict(&self, coarse: &Arc<TorusGrid>) -> Result<ScalarField, GeometryError> {
        let fine = &self.grid;
        if coarse.dim() != fine.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: fine.dim(),
                got: coarse.dim(),
            });
        }
        if !fine.resolution().is_multiple_of(coarse.resolution()) {
            return Err(GeometryError::InvalidResolution(coarse.resolution()));
        }
        let ratio = fine.resolution() / coarse.resolution();
        let axes = fine.real_axes();
        let values = (0..coarse.len())
            .map(|i| {
                let mut mi = coarse.multi_index(i);
                for v in mi.iter_mut().take(axes) {
                    *v *= ratio;
                }
                self.values[fine.flat_index(&mi[..axes])]
            })
            .collect();
        Ok(ScalarField::new(coarse.clone(), values))
    }
}

pub(crate) fn hessian_from_spectrum(grid: &Arc<TorusGrid>, spec: &[C64]) -> HermitianField {
    let n = grid.dim();
    let mut out = vec![Mat::zeros(n); grid.len()];
    let diag = |p: usize, i: usize| spec[i] * grid.dz_symbol(p)[i] * grid.dzbar_symbol(p)[i];
    for p in (0..n).step_by(2) {
        let r = p + 1;
        let (first, second) =
            grid.inverse_real_pair(|i| (diag(p, i), if r < n { diag(r, i) } else { ZERO }));
        out.par_iter_mut().enumerate().for_each(|(i, m)| {
            m[(p, p)] = C64::new(first[i], 0.0);
            if r < n {
                m[(r, r)] = C64::new(second[i], 0.0);
            }
        });
    }
    for p in 0..n {
        for q in p + 1..n {
            let a = grid.dz_symbol(p);
            let b = grid.dzbar_symbol(q);
            let entry = grid.apply_symbol(spec, |i| a[i] * b[i]);
            out.par_iter_mut()
                .zip(entry.par_iter())
                .for_each(|(m, &v)| {
                    m[(p, q)] = v;
                    m[(q, p)] = v.conj();
                });
        }
    }
    HermitianField::new(grid.clone(), out)
}

/// Complex-valued function on the grid.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<TorusGrid>,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: Arc<TorusGrid>, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        ComplexField { grid, values }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn integrate(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |Im f| / max |f|`.
    pub fn imaginary_residue(&self) -> f64 {
        let im = self.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        let norm = self.sup_norm();
        if norm == 0.0 {
            0.0
        } else {
            im / norm
        }
    }

    pub fn real_part(&self) -> ScalarField {
        ScalarField::new(
            self.grid.clone(),
            self.values.iter().map(|v| v.re).collect(),
        )
    }

    /// Real part, rejecting fields whose imaginary residue exceeds `tol`.
    pub fn into_real(self, tol: f64) -> Result<ScalarField, GeometryError> {
        let residue = self.imaginary_residue();
        if residue > tol {
            return Err(GeometryError::NotReal { residue });
        }
        Ok(self.real_part())
    }

    pub fn partial_z(&self, p: usize) -> ComplexField {
        let spec = self.grid.forward(&self.values);
        let sym = self.grid.dz_symbol(p);
        ComplexField::new(self.grid.clone(), self.grid.apply_symbol(&spec, |i| sym[i]))
    }

    pub fn partial_zbar(&self, p: usize) -> ComplexField {
        let spec = self.grid.forward(&self.values);
        let sym = self.grid.dzbar_symbol(p);
        ComplexField::new(self.grid.clone(), self.grid.apply_symbol(&spec, |i| sym[i]))
    }
}

/// Field of `n × n` complex matrices (Hermitian for real (1,1)-forms).
#[derive(Clone, Debug)]
pub struct HermitianField {
    grid: Arc<TorusGrid>,
    values: Arc<Vec<Mat>>,
}

impl HermitianField {
    pub fn new(grid: Arc<TorusGrid>, values: Vec<Mat>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        HermitianField {
            grid,
            values: Arc::new(values),
        }
    }

    pub fn constant(grid: &Arc<TorusGrid>, m: Mat) -> Self {
        Self::new(grid.clone(), vec![m; grid.len()])
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, Mat::zeros(grid.dim()))
    }

    /// The matrix of `ω̂` itself, `s·I`.
    pub fn background(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, Mat::scalar(grid.dim(), grid.scale()))
    }

    pub fn from_series(grid: &Arc<TorusGrid>, terms: &[MatrixTerm]) -> Result<Self, GeometryError> {
        let values = grid.synthesize_matrix(terms)?;
        let field = Self::new(grid.clone(), values);
        let defect = field.max_hermitian_defect();
        if defect > 1e-12 * field.sup_norm().max(1.0) {
            return Err(GeometryError::NotHermitian { defect });
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> &Mat {
        &self.values[idx]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, v| m.max(v.frobenius_norm()))
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, v| m.max(v.hermitian_defect()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|m| m.max_abs() == 0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|m| m.scale(c)).collect(),
        )
    }

    /// Entrywise spectral derivative `∂_{q̄}` of every matrix component.
    pub fn partial_zbar(&self, q: usize) -> Vec<Mat> {
        self.entrywise(|f| f.partial_zbar(q))
    }

    /// Entrywise `∂_p ∂_{q̄}`.
    pub fn partial_z_zbar(&self, p: usize, q: usize) -> Vec<Mat> {
        let a = self.grid.dz_symbol(p);
        let b = self.grid.dzbar_symbol(q);
        self.entrywise(|f| {
            let spec = self.grid.forward(f.values());
            ComplexField::new(
                self.grid.clone(),
                self.grid.apply_symbol(&spec, |i| a[i] * b[i]),
            )
        })
    }

    fn entrywise(&self, op: impl Fn(&ComplexField) -> ComplexField) -> Vec<Mat> {
        let n = self.grid.dim();
        let mut out = vec![Mat::zeros(n); self.grid.len()];
        for j in 0..n {
            for k in 0..n {
                let comp = ComplexField::new(
                    self.grid.clone(),
                    self.values.iter().map(|m| m[(j, k)]).collect(),
                );
                let d = op(&comp);
                for (m, v) in out.iter_mut().zip(d.values) {
                    m[(j, k)] = v;
                }
            }
        }
        out
    }
}

pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}

pub fn partial_z(f: &ScalarField, p: usize) -> ComplexField {
    f.partial_z(p)
}

pub fn partial_zbar(f: &ScalarField, p: usize) -> ComplexField {
    f.partial_zbar(p)
}

pub fn complex_hessian(u: &ScalarField) -> HermitianField {
    u.complex_hessian()
}
