//! Continuity march `t: 0 → 1`, scale search and the uniqueness probe.

use super::newton::{newton_solve, renormalize, NewtonReport};
use super::NewtonConfig;
use crate::error::{Margin, SolverError};
use crate::geometry::{random_field, HermitianField, ScalarField};
use crate::hessian::{upsilon_margin, UpsilonMargins};
use crate::operator::{
    f_tensor_from_hessian, sandwich_check, AdmissibilityConstants, LrhoCoefficients, ProblemSpec,
    SandwichReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Step-size policy of the march.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarchConfig {
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub newton: NewtonConfig,
}

impl Default for MarchConfig {
    fn default() -> Self {
        MarchConfig {
            dt_initial: 0.1,
            dt_max: 0.1,
            dt_min: 1e-3,
            newton: NewtonConfig::default(),
        }
    }
}

/// Scaled quantities bounded by the a priori estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateDiagnostics {
    pub sup_eu_over_m: f64,
    pub m_over_inf_eu: f64,
    /// `max |∇u|²_ĝ`.
    pub c1_diag: f64,
    /// `√M · max e^{−u} |i∂∂̄u|_ω̂`.
    pub c2_diag: f64,
    /// `max e^{−3u} |∇∇̄∇u|²_ω̂` with the Chern connection of `g = e^u ĝ`.
    pub c3_diag: f64,
}

pub fn estimate_diagnostics(
    u: &ScalarField,
    hess: &HermitianField,
    scale: f64,
) -> EstimateDiagnostics {
    let grid = u.grid();
    let n = grid.dim();
    let s = grid.scale();
    let spec = u.spectrum();
    let grad: Vec<Vec<_>> = (0..n)
        .map(|p| {
            let d = grid.dz_symbol(p);
            grid.apply_symbol(&spec, |i| d[i])
        })
        .collect();
    // Σ_{j,p,q} |∂_j u_{pq̄} − u_j u_{pq̄}|²
    let mut third = vec![0.0; grid.len()];
    for j in 0..n {
        for p in 0..n {
            for q in 0..n {
                let (a, b, c) = (grid.dz_symbol(j), grid.dz_symbol(p), grid.dzbar_symbol(q));
                let d3 = grid.apply_symbol(&spec, |i| a[i] * b[i] * c[i]);
                third.par_iter_mut().enumerate().for_each(|(i, acc)| {
                    let h = hess.at(i)[(p, q)];
                    *acc += (d3[i] - grad[j][i] * h).norm_sqr();
                });
            }
        }
    }
    let mut d = EstimateDiagnostics {
        sup_eu_over_m: 0.0,
        m_over_inf_eu: 0.0,
        c1_diag: 0.0,
        c2_diag: 0.0,
        c3_diag: 0.0,
    };
    let mut inf_eu = f64::INFINITY;
    for i in 0..grid.len() {
        let v = u.values()[i];
        let ev = v.exp();
        d.sup_eu_over_m = d.sup_eu_over_m.max(ev / scale);
        inf_eu = inf_eu.min(ev);
        let g2: f64 = grad.iter().map(|g| g[i].norm_sqr()).sum::<f64>() / s;
        d.c1_diag = d.c1_diag.max(g2);
        d.c2_diag = d.c2_diag.max(hess.at(i).frobenius_norm() / (s * ev));
        d.c3_diag = d.c3_diag.max(third[i] / (s * s * s * ev * ev * ev));
    }
    d.m_over_inf_eu = scale / inf_eu;
    d.c2_diag *= scale.sqrt();
    d
}

/// One attempted step of the march.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuationStep {
    pub t: f64,
    pub dt: f64,
    pub step_accepted: bool,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub final_residual: f64,
    pub upsilon_margins: Option<UpsilonMargins>,
    pub sandwich: Option<SandwichReport>,
    pub estimate_diagnostics: Option<EstimateDiagnostics>,
    pub normalization_error: Option<f64>,
    pub cause: Option<String>,
    pub violated: Option<Margin>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ContinuationTrace {
    pub steps: Vec<ContinuationStep>,
    /// Perturbed warm starts that fell outside the admissible set.
    pub rejected_starts: usize,
}

impl ContinuationTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &ContinuationStep> {
        self.steps.iter().filter(|s| s.step_accepted)
    }

    pub fn newton_total(&self) -> usize {
        self.steps.iter().map(|s| s.newton_iters).sum()
    }

    pub fn last_accepted_t(&self) -> Option<f64> {
        self.accepted().last().map(|s| s.t)
    }

    pub fn sandwich_violations(&self) -> usize {
        self.accepted()
            .map(|s| s.sandwich.map_or(0, |r| r.violations))
            .sum()
    }
}

/// Random warm-start perturbation used by the uniqueness probe.
pub struct Perturbation {
    pub amplitude: f64,
    pub max_mode: i64,
    pub rng: ChaCha8Rng,
}

/// Called with `(t, u)` after each accepted step.
pub type AcceptHook<'a> = &'a mut dyn FnMut(f64, &ScalarField);

/// Optional behaviour attached to a march.
#[derive(Default)]
pub struct MarchHooks<'a> {
    pub perturbation: Option<Perturbation>,
    pub on_accept: Option<AcceptHook<'a>>,
}

fn violated_margin(err: &SolverError) -> Option<Margin> {
    let (m1, m2) = match err {
        SolverError::InadmissibleStart { m1, m2 } | SolverError::LeftAdmissibleSet { m1, m2 } => {
            (*m1, *m2)
        }
        _ => return None,
    };
    if m1 <= 0.0 {
        Some(Margin::Exponential)
    } else if m2 <= 0.0 {
        Some(Margin::Hessian)
    } else {
        None
    }
}

fn accepted_step(
    t: f64,
    dt: f64,
    u: &ScalarField,
    report: &NewtonReport,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ContinuationStep {
    let hess = u.complex_hessian();
    let f = f_tensor_from_hessian(u, &hess, t, problem, coeffs);
    ContinuationStep {
        t,
        dt,
        step_accepted: true,
        newton_iters: report.iterations,
        krylov_iters: report.krylov_iterations,
        final_residual: report.final_residual,
        upsilon_margins: Some(report.margins),
        sandwich: Some(sandwich_check(u, &f)),
        estimate_diagnostics: Some(estimate_diagnostics(u, &hess, problem.scale)),
        normalization_error: Some(report.normalization_error),
        cause: None,
        violated: None,
    }
}

pub fn continuity_march(
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    cfg: &MarchConfig,
) -> Result<(ScalarField, ContinuationTrace), (SolverError, ContinuationTrace)> {
    continuity_march_with(problem, coeffs, constants, cfg, &mut MarchHooks::default())
}

/// The march with hooks; on failure the partial trace is returned with the error.
pub fn continuity_march_with(
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    cfg: &MarchConfig,
    hooks: &mut MarchHooks,
) -> Result<(ScalarField, ContinuationTrace), (SolverError, ContinuationTrace)> {
    let mut trace = ContinuationTrace::default();
    let u0 = problem.initial_guess();
    let (mut u, report) = match newton_solve(&u0, 0.0, problem, coeffs, constants, &cfg.newton) {
        Ok(x) => x,
        Err(e) => {
            let violated = violated_margin(&e);
            let cause = format!("initial state: {e}");
            trace.steps.push(rejected_step(0.0, 0.0, &e, violated));
            return Err((
                SolverError::StepFloorReached {
                    last_t: 0.0,
                    cause,
                    violated,
                },
                trace,
            ));
        }
    };
    trace
        .steps
        .push(accepted_step(0.0, 0.0, &u, &report, problem, coeffs));
    if let Some(cb) = hooks.on_accept.as_mut() {
        cb(0.0, &u);
    }
    let mut t = 0.0;
    let mut prev: Option<(f64, ScalarField)> = None;
    let mut dt = cfg.dt_initial;
    while t < 1.0 {
        let t_try = (t + dt).min(1.0);
        let step = t_try - t;
        let mut start = predictor(&u, t, prev.as_ref(), t_try, problem, constants);
        if let Some(pert) = hooks.perturbation.as_mut() {
            let mut cand = start.add_scaled(
                &random_field(&problem.grid, pert.max_mode, pert.amplitude, &mut pert.rng),
                1.0,
            );
            renormalize(&mut cand, problem.scale);
            let h = cand.complex_hessian();
            if upsilon_margin(&cand, &h, problem, constants).admissible() {
                start = cand;
            } else {
                trace.rejected_starts += 1;
            }
        }
        match newton_solve(&start, t_try, problem, coeffs, constants, &cfg.newton) {
            Ok((nu, rep)) => {
                trace
                    .steps
                    .push(accepted_step(t_try, step, &nu, &rep, problem, coeffs));
                if let Some(cb) = hooks.on_accept.as_mut() {
                    cb(t_try, &nu);
                }
                prev = Some((t, std::mem::replace(&mut u, nu)));
                t = t_try;
                dt = (2.0 * dt).min(cfg.dt_max);
            }
            Err(e) => {
                let violated = violated_margin(&e);
                trace.steps.push(rejected_step(t_try, step, &e, violated));
                dt *= 0.5;
                if dt < cfg.dt_min {
                    return Err((
                        SolverError::StepFloorReached {
                            last_t: t,
                            cause: e.to_string(),
                            violated,
                        },
                        trace,
                    ));
                }
            }
        }
    }
    Ok((u, trace))
}

fn rejected_step(t: f64, dt: f64, e: &SolverError, violated: Option<Margin>) -> ContinuationStep {
    let (newton_iters, final_residual) = match e {
        SolverError::MaxItersExceeded { iters, residual } => (*iters, *residual),
        SolverError::LineSearchFailed { residual } => (0, *residual),
        _ => (0, f64::NAN),
    };
    ContinuationStep {
        t,
        dt,
        step_accepted: false,
        newton_iters,
        krylov_iters: 0,
        final_residual,
        upsilon_margins: None,
        sandwich: None,
        estimate_diagnostics: None,
        normalization_error: None,
        cause: Some(e.to_string()),
        violated,
    }
}

/// Secant extrapolation in `t`, falling back to the last solution when the
/// extrapolated state is not admissible.
fn predictor(
    u: &ScalarField,
    t: f64,
    prev: Option<&(f64, ScalarField)>,
    t_next: f64,
    problem: &ProblemSpec,
    constants: &AdmissibilityConstants,
) -> ScalarField {
    let Some((tp, up)) = prev else {
        return u.clone();
    };
    let w = (t_next - t) / (t - tp);
    let mut cand = u.zip_map(up, |a, b| a + w * (a - b));
    renormalize(&mut cand, problem.scale);
    let h = cand.complex_hessian();
    if upsilon_margin(&cand, &h, problem, constants).admissible() {
        cand
    } else {
        u.clone()
    }
}

/// Outcome of the doubling search for the smallest workable normalization.
#[derive(Clone, Debug, Serialize)]
pub struct MinScaleReport {
    /// Smallest tested `M` for which the march succeeded.
    pub m_lo: Option<f64>,
    /// Largest tested failing `M` below `m_lo`.
    pub m_fail: Option<f64>,
    pub tested: Vec<ScaleAttempt>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleAttempt {
    pub scale: f64,
    pub success: bool,
    pub last_t: Option<f64>,
    pub violated: Option<Margin>,
}

pub fn find_min_scale(
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    cfg: &MarchConfig,
    start: f64,
    cap: f64,
) -> MinScaleReport {
    let mut tested = Vec::new();
    let mut m_fail = None;
    let mut m = start.max(1.0);
    while m <= cap {
        let attempt = problem.with_scale(m).map_err(|e| e.to_string());
        let outcome = attempt.map(|p| continuity_march(&p, coeffs, constants, cfg));
        match outcome {
            Ok(Ok(_)) => {
                tested.push(ScaleAttempt {
                    scale: m,
                    success: true,
                    last_t: Some(1.0),
                    violated: None,
                });
                return MinScaleReport {
                    m_lo: Some(m),
                    m_fail,
                    tested,
                };
            }
            Ok(Err((e, trace))) => {
                let violated = match &e {
                    SolverError::StepFloorReached { violated, .. } => *violated,
                    _ => None,
                };
                tested.push(ScaleAttempt {
                    scale: m,
                    success: false,
                    last_t: trace.last_accepted_t(),
                    violated,
                });
            }
            Err(_) => tested.push(ScaleAttempt {
                scale: m,
                success: false,
                last_t: None,
                violated: None,
            }),
        }
        m_fail = Some(m);
        m *= 2.0;
    }
    MinScaleReport {
        m_lo: None,
        m_fail,
        tested,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub runs: usize,
    pub rejected_starts: usize,
    /// Largest sup distance between any two final states, reference included.
    pub max_pairwise: f64,
    pub pass: bool,
}

/// Threshold below which two runs are considered the same solution.
pub const UNIQUENESS_TOL: f64 = 1e-7;
/// Distance beyond which runs are flagged as distinct candidates.
pub const NON_UNIQUE_TOL: f64 = 1e-5;

/// Re-run the march with randomly perturbed warm starts and compare the end states.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    cfg: &MarchConfig,
    reference: &ScalarField,
    perturbations: usize,
    amplitude: f64,
    seed: u64,
) -> Result<UniquenessReport, SolverError> {
    let mut finals = vec![reference.clone()];
    let mut rejected = 0;
    for r in 0..perturbations {
        let mut hooks = MarchHooks {
            perturbation: Some(Perturbation {
                amplitude,
                max_mode: 1,
                rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64)),
            }),
            on_accept: None,
        };
        let (u, trace) = continuity_march_with(problem, coeffs, constants, cfg, &mut hooks)
            .map_err(|(e, _)| e)?;
        rejected += trace.rejected_starts;
        finals.push(u);
    }
    let mut max_pairwise = 0.0f64;
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            let d = finals[i].zip_map(&finals[j], |a, b| a - b).sup_norm();
            max_pairwise = max_pairwise.max(d);
        }
    }
    if max_pairwise > NON_UNIQUE_TOL {
        return Err(SolverError::NonUniqueCandidate {
            distance: max_pairwise,
        });
    }
    Ok(UniquenessReport {
        runs: perturbations,
        rejected_starts: rejected,
        max_pairwise,
        pass: max_pairwise <= UNIQUENESS_TOL,
    })
}
