//! Wedge products of (1,1)-forms against powers of `ω̂`, as mixed discriminants.
//!
//! For forms `α_i = A_i[j][k] i dz^j ∧ dz̄^k`,
//! `α_1 ∧ … ∧ α_ℓ ∧ ω̂^{n−ℓ} = D(A_1/s, …, A_ℓ/s, I, …, I) ω̂ⁿ`
//! where `D` is the mixed discriminant normalized by `D(I, …, I) = 1`.

use super::{HermitianField, ScalarField};
use crate::error::GeometryError;
use crate::linalg::{factorial, Mat, C64, ZERO};
use rayon::prelude::*;

/// `D(A_1, …, A_n) = (1/n!) Σ_τ det[row i of A_{τ(i)}]`.
pub fn mixed_discriminant(mats: &[Mat]) -> C64 {
    let n = mats.len();
    debug_assert!(mats.iter().all(|m| m.dim() == n));
    let mut total = ZERO;
    for_each_permutation(n, |tau| {
        let rows = Mat::from_fn(n, |i, j| mats[tau[i]][(i, j)]);
        total += rows.det();
    });
    total / factorial(n)
}

fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(k: usize, perm: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, f);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rec(0, &mut perm, &mut f);
}

/// Pointwise coefficient of `A_1 ∧ … ∧ A_ℓ ∧ ω̂^m / ω̂ⁿ` for metric factor `s`.
pub fn wedge_density_at(mats: &[Mat], m: usize, s: f64) -> C64 {
    let n = mats.len() + m;
    let mut args: Vec<Mat> = mats.iter().map(|a| a.scale(1.0 / s)).collect();
    args.extend(std::iter::repeat_n(Mat::identity(n), m));
    mixed_discriminant(&args)
}

/// Field version of [`wedge_density_at`]; the result is real for Hermitian inputs.
pub fn wedge_density(fields: &[&HermitianField], m: usize) -> Result<ScalarField, GeometryError> {
    let first = fields.first().ok_or(GeometryError::DimensionMismatch {
        expected: 1,
        got: 0,
    })?;
    let grid = first.grid().clone();
    let n = grid.dim();
    if fields.len() + m != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: fields.len() + m,
        });
    }
    if fields
        .iter()
        .any(|f| !std::sync::Arc::ptr_eq(f.grid(), &grid))
    {
        return Err(GeometryError::GridMismatch);
    }
    let s = grid.scale();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mats: Vec<Mat> = fields.iter().map(|f| *f.at(i)).collect();
            wedge_density_at(&mats, m, s).re
        })
        .collect();
    Ok(ScalarField::new(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_volume_scale;

    #[test]
    fn determinant_on_the_diagonal() {
        let a = Mat::from_fn(3, |i, j| {
            C64::new((i + 2 * j) as f64, (i as f64 - j as f64) * 0.3)
        });
        let d = mixed_discriminant(&[a, a, a]);
        assert!((d - a.det()).norm() < 1e-12);
    }

    #[test]
    fn background_has_unit_density() {
        for n in 2..=3 {
            let s = unit_volume_scale(n);
            let w = Mat::scalar(n, s);
            let d = wedge_density_at(&vec![w; n], 0, s);
            assert!((d.re - 1.0).abs() < 1e-14 && d.im.abs() < 1e-14);
        }
    }

    #[test]
    fn two_argument_trace_formula() {
        // n·D(A, B, I^{n−2}) = (trA trB − tr AB)/(n−1)
        let n = 3;
        let a = Mat::from_fn(n, |i, j| C64::new(1.0 + (i * j) as f64, 0.2 * i as f64));
        let b = Mat::from_fn(n, |i, j| C64::new((i + j) as f64 - 1.0, -0.1 * j as f64));
        let d = mixed_discriminant(&[a, b, Mat::identity(n)]) * n as f64;
        let expect = (a.trace() * b.trace() - (a * b).trace()) / (n as f64 - 1.0);
        assert!((d - expect).norm() < 1e-12);
    }
}
