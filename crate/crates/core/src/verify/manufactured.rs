//! Manufactured solutions: pick `u*`, define `μ` as the equation applied to it.

use crate::error::ProblemError;
use crate::geometry::{HermitianField, ScalarField, TorusGrid};
use crate::hessian::{upsilon_margin, UpsilonMargins};
use crate::linalg::{Mat, C64};
use crate::operator::{
    compute_constants, extract_lrho, residual, AdmissibilityConstants, LrhoCoefficients,
    ProblemSpec,
};
use std::f64::consts::PI;
use std::sync::Arc;

/// Bound on `|∫ μ|` accepted for a manufactured forcing, relative to `1 + ‖μ‖∞`.
pub const MANUFACTURED_MEAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub u_star: ScalarField,
    pub problem: ProblemSpec,
    pub coeffs: LrhoCoefficients,
    pub constants: AdmissibilityConstants,
    /// Margins of `u*` for `problem`'s constants.
    pub margins: UpsilonMargins,
    /// Measured `∫ μ`.
    pub mu_mean: f64,
}

/// Build the problem solved exactly by `u_star` at `t = 1`, with `M = ∫e^{u*}`.
pub fn manufacture(
    u_star: &ScalarField,
    k: usize,
    gamma: f64,
    alpha: f64,
    rho: HermitianField,
) -> Result<ManufacturedCase, ProblemError> {
    let grid = u_star.grid();
    let scale = u_star.map(f64::exp).integrate();
    let zero = ScalarField::zeros(grid);
    let template = ProblemSpec::new(k, gamma, alpha, rho.clone(), zero, scale)?;
    let coeffs = extract_lrho(&template.rho);
    let mu = residual(u_star, 1.0, &template, &coeffs);
    let mu_mean = mu.integrate();
    let tol = MANUFACTURED_MEAN_TOL * (1.0 + mu.sup_norm());
    if mu_mean.abs() > tol {
        return Err(ProblemError::MuNotZeroMean { mean: mu_mean });
    }
    let problem = ProblemSpec::with_mu_tolerance(k, gamma, alpha, rho, mu, scale, tol)?;
    let constants = compute_constants(&problem, &coeffs);
    let margins = upsilon_margin(u_star, &u_star.complex_hessian(), &problem, &constants);
    if !margins.admissible() {
        return Err(ProblemError::InadmissibleState {
            m1: margins.m1,
            m2: margins.m2,
        });
    }
    Ok(ManufacturedCase {
        u_star: u_star.clone(),
        problem,
        coeffs,
        constants,
        margins,
        mu_mean,
    })
}

/// Fixed zero-mean profile built from modes with all `|κ_a| ≤ 1`.
///
/// Products of up to six such fields stay alias-free at `N ≥ 8`, so the
/// discrete `∫ σ̂_{k+1}(i∂∂̄φ)` vanishes to rounding for `k ≤ 2`.
pub fn reference_profile(grid: &Arc<TorusGrid>) -> ScalarField {
    let n = grid.dim();
    let tau = 2.0 * PI;
    ScalarField::from_fn(grid, |x| {
        let mut v = (tau * x[0]).cos() + 0.5 * (tau * (x[1] - x[2])).sin();
        if n == 3 {
            v += 0.4 * (tau * (x[3] + x[4])).cos() - 0.3 * (tau * x[5]).sin();
        }
        v
    })
}

/// `u* = log M + amplitude · φ` with `φ` from [`reference_profile`].
pub fn reference_state(grid: &Arc<TorusGrid>, scale: f64, amplitude: f64) -> ScalarField {
    reference_profile(grid).map(|v| scale.ln() + amplitude * v)
}

/// Smooth non-flat Hermitian `ρ` of size about `amplitude`, with nonzero `b` and `c`.
pub fn reference_rho(grid: &Arc<TorusGrid>, amplitude: f64) -> HermitianField {
    let n = grid.dim();
    let tau = 2.0 * PI;
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            let mut m = Mat::zeros(n);
            for p in 0..n {
                let d = 1.0 + 0.5 * (tau * (x[2 * p] + x[1])).cos();
                m[(p, p)] = C64::new(amplitude * d, 0.0);
            }
            let w = C64::from_polar(0.3 * amplitude, tau * x[3]);
            m[(0, 1)] = w;
            m[(1, 0)] = w.conj();
            m
        })
        .collect();
    HermitianField::new(grid.clone(), values)
}
