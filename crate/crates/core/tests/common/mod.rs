//! Shared fixtures for integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use fuyau_core::geometry::{random_field, HermitianField, ScalarField, TorusGrid};
use fuyau_core::linalg::{Mat, C64};
use fuyau_core::operator::ProblemSpec;
use fuyau_core::verify::reference_rho;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `μ = 0`, `α' = 1`, `γ = k + 1`, and the reference `ρ` of size `rho_amp`.
pub fn problem_with_rho(grid: &Arc<TorusGrid>, k: usize, scale: f64, rho_amp: f64) -> ProblemSpec {
    let rho = reference_rho(grid, rho_amp);
    ProblemSpec::new(k, k as f64 + 1.0, 1.0, rho, ScalarField::zeros(grid), scale).unwrap()
}

/// Random Hermitian matrix with entries in the unit square.
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let a = Mat::from_fn(n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (a + a.adjoint()).scale(0.5)
}

/// `Σ a cos(2πκ·x) + b sin(2πκ·x)`, evaluable anywhere and differentiable exactly.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    pub terms: Vec<(Vec<i64>, f64, f64)>,
}

impl TrigPoly {
    pub fn random<R: Rng>(axes: usize, max_mode: i64, terms: usize, rng: &mut R) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let k: Vec<i64> = (0..axes)
                    .map(|_| rng.gen_range(-max_mode..=max_mode))
                    .collect();
                (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        TrigPoly { terms }
    }

    fn phase(k: &[i64], x: &[f64]) -> f64 {
        2.0 * std::f64::consts::PI * k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, a, b)| {
                let t = Self::phase(k, x);
                a * t.cos() + b * t.sin()
            })
            .sum()
    }

    /// Exact `∂_a ∂_b f` in real coordinates.
    pub fn second(&self, x: &[f64], a: usize, b: usize) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        self.terms
            .iter()
            .map(|(k, c, d)| {
                let t = Self::phase(k, x);
                -(tau * k[a] as f64) * (tau * k[b] as f64) * (c * t.cos() + d * t.sin())
            })
            .sum()
    }

    pub fn field(&self, grid: &Arc<TorusGrid>) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }
}

/// Band-limited Hermitian field with entries built from `random_field` over modes `≤ max_mode`.
pub fn random_rho<R: Rng>(
    grid: &Arc<TorusGrid>,
    max_mode: i64,
    amplitude: f64,
    rng: &mut R,
) -> HermitianField {
    let n = grid.dim();
    let mut entries = vec![vec![Vec::new(); n]; n];
    for j in 0..n {
        let d = random_field(grid, max_mode, amplitude, rng).map(|v| v + amplitude);
        entries[j][j] = d
            .values()
            .iter()
            .map(|&v| C64::new(v, 0.0))
            .collect::<Vec<_>>();
        for k in j + 1..n {
            let re = random_field(grid, max_mode, amplitude, rng);
            let im = random_field(grid, max_mode, amplitude, rng);
            let z: Vec<C64> = re
                .values()
                .iter()
                .zip(im.values())
                .map(|(&a, &b)| C64::new(a, b))
                .collect();
            entries[k][j] = z.iter().map(|c| c.conj()).collect();
            entries[j][k] = z;
        }
    }
    let values = (0..grid.len())
        .map(|i| Mat::from_fn(n, |j, k| entries[j][k][i]))
        .collect();
    HermitianField::new(grid.clone(), values)
}

pub fn to_na(m: &Mat) -> DMatrix<C64> {
    DMatrix::from_fn(m.dim(), m.dim(), |i, j| m[(i, j)])
}

pub fn eigenvalues(m: &Mat) -> Vec<f64> {
    to_na(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// `e_l(λ)` by direct subset enumeration.
pub fn elementary(l: usize, lam: &[f64]) -> f64 {
    (0u32..1 << lam.len())
        .filter(|mask| mask.count_ones() as usize == l)
        .map(|mask| {
            (0..lam.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| lam[i])
                .product::<f64>()
        })
        .sum()
}

/// `σ_l` from the characteristic polynomial by Faddeev–LeVerrier.
pub fn sigma_charpoly(l: usize, a: &Mat) -> f64 {
    let n = a.dim();
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    let mut m = Mat::zeros(n);
    for k in 1..=n {
        let prev = *coeffs.last().unwrap();
        m = *a * m + Mat::identity(n).scale_c(prev);
        let c = -(*a * m).trace() / k as f64;
        coeffs.push(c);
    }
    // det(λ − A) = Σ c_k λ^{n−k} with c_k = (−1)^k σ_k.
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    (coeffs[l] * sign).re
}

/// Eigenvalues of a Hermitian 2×2 or 3×3 matrix in ascending order, from the closed-form
/// roots of its characteristic polynomial.
pub fn closed_form_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.dim();
    // Shifting by the mean eigenvalue avoids cancellation for nearly scalar matrices.
    let mean = m.trace().re / n as f64;
    let b = *m - Mat::identity(n).scale(mean);
    let c2 = sigma_charpoly(2, &b);
    let mut ev = match n {
        2 => {
            let disc = (-c2).max(0.0).sqrt();
            vec![mean - disc, mean + disc]
        }
        3 => {
            // Roots of the depressed cubic t³ − p t − q are 2√(p/3) cos(φ − 2πj/3).
            let p = -c2;
            let q = sigma_charpoly(3, &b);
            if p <= 0.0 {
                vec![mean; 3]
            } else {
                let r = (p / 3.0).sqrt();
                let phi = (q / (2.0 * r.powi(3))).clamp(-1.0, 1.0).acos() / 3.0;
                (0..3)
                    .map(|j| {
                        mean + 2.0 * r * (phi - 2.0 * std::f64::consts::PI * j as f64 / 3.0).cos()
                    })
                    .collect()
            }
        }
        _ => panic!("closed-form eigenvalues need n = 2 or 3"),
    };
    ev.sort_by(f64::total_cmp);
    ev
}
