//! Damped Newton iteration on the normalized manifold `∫ e^u ω̂ⁿ = M`.

use super::krylov::krylov_bordered;
use super::NewtonConfig;
use crate::error::SolverError;
use crate::geometry::ScalarField;
use crate::hessian::{upsilon_margin, UpsilonMargins};
use crate::operator::residual::residual_with_hessian;
use crate::operator::{AdmissibilityConstants, Linearization, LrhoCoefficients, ProblemSpec};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub krylov_iterations: usize,
    /// Sup norm of the resolved part of the residual before each iteration and at exit.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    /// Sup norm of the residual content on Nyquist modes at exit, which no step can remove.
    pub unresolved_residual: f64,
    /// Tolerance actually applied, `tol · max(1, M^k)` when relative.
    pub tolerance: f64,
    pub margins: UpsilonMargins,
    /// Largest bordered multiplier seen; zero up to discretization error.
    pub max_multiplier: f64,
    /// `|∫e^u − M| / M` at exit.
    pub normalization_error: f64,
}

/// Shift `u` by a constant so that `∫ e^u = M`.
pub fn renormalize(u: &mut ScalarField, scale: f64) {
    let mass = u.map(f64::exp).integrate();
    let shift = (scale / mass).ln();
    u.values_mut().iter_mut().for_each(|v| *v += shift);
}

pub fn normalization_error(u: &ScalarField, scale: f64) -> f64 {
    (u.map(f64::exp).integrate() - scale).abs() / scale
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn effective_tolerance(problem: &ProblemSpec, cfg: &NewtonConfig) -> f64 {
    if cfg.relative_tolerance {
        cfg.tol_residual * problem.scale.powi(problem.k as i32).max(1.0)
    } else {
        cfg.tol_residual
    }
}

pub fn newton_solve(
    u_init: &ScalarField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    cfg: &NewtonConfig,
) -> Result<(ScalarField, NewtonReport), SolverError> {
    let mut u = u_init.clone();
    renormalize(&mut u, problem.scale);
    let mut hess = u.complex_hessian();
    let mut margins = upsilon_margin(&u, &hess, problem, constants);
    if !margins.admissible() {
        return Err(SolverError::InadmissibleStart {
            m1: margins.m1,
            m2: margins.m2,
        });
    }
    let tol = effective_tolerance(problem, cfg);
    let grid = problem.grid.clone();
    let resolved = |r: &ScalarField| grid.project_resolved(r.values());
    let mut full = residual_with_hessian(&u, &hess, t, problem, coeffs);
    let mut r = resolved(&full);
    let mut res = sup(&r);
    let mut history = vec![res];
    let mut krylov_total = 0;
    let mut max_multiplier = 0.0f64;
    let mut iterations = 0;
    while res > tol {
        if iterations == cfg.max_iters {
            return Err(SolverError::MaxItersExceeded {
                iters: iterations,
                residual: res,
            });
        }
        iterations += 1;
        let lin = Linearization::with_hessian(&u, &hess, t, problem, coeffs);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = krylov_bordered(&lin, &rhs, cfg)?;
        krylov_total += step.iterations;
        max_multiplier = max_multiplier.max(step.lambda.abs());

        let mut factor = 1.0;
        let mut accepted = None;
        let mut last_margins = margins;
        for _ in 0..=cfg.max_halvings {
            let mut trial = u.clone();
            trial
                .values_mut()
                .iter_mut()
                .zip(&step.h)
                .for_each(|(v, d)| *v += factor * d);
            renormalize(&mut trial, problem.scale);
            let th = trial.complex_hessian();
            let tm = upsilon_margin(&trial, &th, problem, constants);
            last_margins = tm;
            if tm.admissible() {
                let tfull = residual_with_hessian(&trial, &th, t, problem, coeffs);
                let tr = resolved(&tfull);
                let tres = sup(&tr);
                if tres < res {
                    accepted = Some((trial, th, tm, tfull, tr, tres));
                    break;
                }
            }
            factor *= cfg.damping;
        }
        match accepted {
            Some((nu, nh, nm, nfull, nr, nres)) => {
                u = nu;
                hess = nh;
                margins = nm;
                full = nfull;
                r = nr;
                res = nres;
                history.push(res);
            }
            None if !last_margins.admissible() => {
                return Err(SolverError::LeftAdmissibleSet {
                    m1: last_margins.m1,
                    m2: last_margins.m2,
                })
            }
            None => return Err(SolverError::LineSearchFailed { residual: res }),
        }
    }
    let report = NewtonReport {
        iterations,
        krylov_iterations: krylov_total,
        residual_history: history,
        final_residual: res,
        unresolved_residual: full
            .values()
            .iter()
            .zip(&r)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        tolerance: tol,
        margins,
        max_multiplier,
        normalization_error: normalization_error(&u, problem.scale),
    };
    Ok((u, report))
}
