//! Newton–Krylov solves of the residual and the continuity march.

mod continuation;
mod krylov;
mod newton;

pub use continuation::{
    continuity_march, continuity_march_with, estimate_diagnostics, find_min_scale,
    uniqueness_probe, ContinuationStep, ContinuationTrace, EstimateDiagnostics, MarchConfig,
    MarchHooks, MinScaleReport, Perturbation, ScaleAttempt, UniquenessReport, NON_UNIQUE_TOL,
    UNIQUENESS_TOL,
};
pub use krylov::{krylov_bordered, KrylovSolution};
pub use newton::{
    effective_tolerance, newton_solve, normalization_error, renormalize, NewtonReport,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Sup-norm residual tolerance.
    pub tol_residual: f64,
    /// Scale the tolerance by `max(1, M^k)`, the size of the leading term.
    pub relative_tolerance: bool,
    pub max_iters: usize,
    /// Step reduction factor in the backtracking line search.
    pub damping: f64,
    pub max_halvings: usize,
    pub krylov_tol: f64,
    /// Largest relative Krylov residual accepted when GMRES stagnates first.
    pub krylov_accept: f64,
    pub krylov_max: usize,
    pub krylov_restart: usize,
    /// Allowed `|∫ rhs| / (1 + ‖rhs‖∞)` for the bordered solve.
    pub compat_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_residual: 1e-10,
            relative_tolerance: true,
            max_iters: 30,
            damping: 0.5,
            max_halvings: 8,
            krylov_tol: 1e-10,
            krylov_accept: 1e-6,
            krylov_max: 500,
            krylov_restart: 40,
            compat_tol: 1e-10,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("tol_residual", self.tol_residual),
            ("krylov_tol", self.krylov_tol),
            ("krylov_accept", self.krylov_accept),
            ("compat_tol", self.compat_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(format!("damping must lie in (0, 1), got {}", self.damping));
        }
        if self.max_iters == 0 || self.krylov_max == 0 || self.krylov_restart == 0 {
            return Err("iteration limits must be positive".into());
        }
        Ok(())
    }
}
