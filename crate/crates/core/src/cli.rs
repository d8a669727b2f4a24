//! Batch front end: run one configured mode and write its artifacts.
//!
//! Every mode writes `config.json` (the normalized configuration) and
//! `summary.json` into the output directory. Marching modes add
//! `trace.jsonl`, `diagnostics.csv` and `solution.fyhf`; sweeps add
//! `sweep.csv` and `sweep.json`.

use crate::config::{ConfigError, Mode, RunConfig, SweepKind};
use crate::error::{Error, Margin, ProblemError, SolverError};
use crate::geometry::{random_field, snapshot, ScalarField};
use crate::hessian::UpsilonMargins;
use crate::operator::{
    compute_constants, extract_lrho, residual, AdmissibilityConstants, LrhoCoefficients,
    ProblemSpec,
};
use crate::solver::{
    continuity_march_with, find_min_scale, uniqueness_probe, ContinuationTrace, MarchHooks,
    UNIQUENESS_TOL,
};
use crate::verify::{
    ibp_identity, ibp_mismatch, maclaurin_field_check, manufacture, reference_profile,
    reference_state, scale_sweep, sigma2_rewrite_check, third_order_contraction_check,
    torsion_curvature_check, SweepFamily, SweepTable,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// `|∫ R| ≤ STOKES_TOL · (1 + ‖R‖∞)`.
pub const STOKES_TOL: f64 = 1e-10;
pub const IBP_TOL: f64 = 1e-8;
pub const REWRITE_TOL: f64 = 1e-7;
/// A non-solution must miss the rewrite by more than this.
pub const REWRITE_CONTROL: f64 = 1e-3;
pub const TORSION_TOL: f64 = 1e-9;
/// Sup-norm distance to `u*` accepted for a manufactured run.
pub const RECOVERY_TOL: f64 = 1e-7;
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    SolverFailure,
    InvariantViolation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PassCount {
    pub pass: usize,
    pub fail: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub status: Status,
    pub exit_code: i32,
    pub final_residual: Option<f64>,
    pub upsilon_margins: Option<UpsilonMargins>,
    pub invariant_pass_counts: BTreeMap<&'static str, PassCount>,
    /// Last `t` reached by an accepted step.
    pub last_good_t: Option<f64>,
    pub violated_margin: Option<String>,
    pub error: Option<String>,
    /// Mean subtracted from `μ` under `--allow-mu-projection`.
    pub mu_projected_mean: Option<f64>,
    /// Mode-specific scalars, e.g. `recovery_error`.
    pub metrics: BTreeMap<String, f64>,
}

impl RunSummary {
    fn new(mode: Mode) -> Self {
        RunSummary {
            mode,
            status: Status::Ok,
            exit_code: EXIT_OK,
            final_residual: None,
            upsilon_margins: None,
            invariant_pass_counts: BTreeMap::new(),
            last_good_t: None,
            violated_margin: None,
            error: None,
            mu_projected_mean: None,
            metrics: BTreeMap::new(),
        }
    }

    fn check(&mut self, name: &'static str, ok: bool) {
        let c = self.invariant_pass_counts.entry(name).or_default();
        if ok {
            c.pass += 1;
        } else {
            c.fail += 1;
        }
    }

    fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn fail_solver(&mut self, e: &Error) {
        self.status = Status::SolverFailure;
        self.exit_code = EXIT_SOLVER;
        self.error = Some(e.to_string());
        let margin = match e {
            Error::Solver(SolverError::StepFloorReached {
                last_t, violated, ..
            }) => {
                self.last_good_t = Some(*last_t);
                *violated
            }
            Error::Solver(
                SolverError::InadmissibleStart { m1, m2 }
                | SolverError::LeftAdmissibleSet { m1, m2 },
            )
            | Error::Problem(ProblemError::InadmissibleState { m1, m2 }) => margin_of(*m1, *m2),
            _ => None,
        };
        self.violated_margin = margin.map(|m| m.to_string());
    }

    /// Downgrade an otherwise successful run if any invariant failed.
    fn finish(&mut self) {
        if self.status == Status::Ok && self.invariant_pass_counts.values().any(|c| c.fail > 0) {
            self.status = Status::InvariantViolation;
            self.exit_code = EXIT_INVARIANT;
        }
    }
}

fn margin_of(m1: f64, m2: f64) -> Option<Margin> {
    if m1 <= 0.0 {
        Some(Margin::Exponential)
    } else if m2 <= 0.0 {
        Some(Margin::Hessian)
    } else {
        None
    }
}

/// Errors that stop a run before any result exists.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<crate::error::GeometryError> for RunError {
    fn from(e: crate::error::GeometryError) -> Self {
        match e {
            crate::error::GeometryError::Io(io) => RunError::Io(io),
            other => RunError::Io(io::Error::other(other.to_string())),
        }
    }
}

/// Run and return the exit code; config and output errors map to `EXIT_CONFIG`.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(summary) => summary.exit_code,
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(config: &RunConfig) -> Result<RunSummary, RunError> {
    let out = config.output_dir.as_path();
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), config)?;
    let mut summary = RunSummary::new(config.mode);
    match config.mode {
        Mode::Solve => solve_mode(config, &mut summary)?,
        Mode::Manufactured => manufactured_mode(config, &mut summary, false)?,
        Mode::VerifyAll => manufactured_mode(config, &mut summary, true)?,
        Mode::Sweep => sweep_mode(config, &mut summary)?,
        Mode::MinScale => min_scale_mode(config, &mut summary)?,
    }
    summary.finish();
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn constants_for(problem: &ProblemSpec) -> (LrhoCoefficients, AdmissibilityConstants) {
    let coeffs = extract_lrho(&problem.rho);
    let constants = compute_constants(problem, &coeffs);
    (coeffs, constants)
}

fn note_projection(summary: &mut RunSummary, projected: Option<f64>) {
    if let Some(mean) = projected {
        eprintln!("warning: mu had mean {mean:.6e}; it was subtracted because --allow-mu-projection is set");
        summary.mu_projected_mean = Some(mean);
    }
}

fn solve_mode(config: &RunConfig, summary: &mut RunSummary) -> Result<(), RunError> {
    let (problem, projected) = config.problem_spec()?;
    note_projection(summary, projected);
    let (coeffs, constants) = constants_for(&problem);
    if let Some(u) = march_recorded(config, &problem, &coeffs, &constants, summary)? {
        snapshot::write_real(&config.output_dir.join("solution.fyhf"), &u)?;
    }
    Ok(())
}

fn manufactured_mode(
    config: &RunConfig,
    summary: &mut RunSummary,
    full: bool,
) -> Result<(), RunError> {
    let loaded = config.load()?;
    let grid = loaded.grid;
    let p = &config.problem;
    let amplitude = config.manufactured.as_ref().map_or(0.0, |m| m.amplitude);
    let star = reference_state(&grid, p.scale, amplitude);
    let case = match manufacture(&star, p.k, p.gamma, p.alpha, loaded.rho) {
        Ok(c) => c,
        Err(e) => {
            summary.fail_solver(&e.into());
            return Ok(());
        }
    };
    summary.metric("manufactured_mu_mean", case.mu_mean);
    let Some(u) = march_recorded(
        config,
        &case.problem,
        &case.coeffs,
        &case.constants,
        summary,
    )?
    else {
        return Ok(());
    };
    snapshot::write_real(&config.output_dir.join("solution.fyhf"), &u)?;
    let recovery = u.zip_map(&case.u_star, |a, b| a - b).sup_norm();
    summary.metric("recovery_error", recovery);
    summary.check("recovery", recovery <= RECOVERY_TOL);
    if full {
        verify_all(
            config,
            &case.problem,
            &case.coeffs,
            &case.constants,
            &u,
            summary,
        );
    }
    Ok(())
}

/// Identities, inequalities and the uniqueness probe around a converged solution.
fn verify_all(
    config: &RunConfig,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    u: &ScalarField,
    summary: &mut RunSummary,
) {
    let grid = &problem.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let max_mode = (grid.resolution() as i64 / 2 - 1).max(1);
    let mut worst = 0.0f64;
    for _ in 0..config.verify.random_fields {
        let f = random_field(grid, max_mode, 1.0, &mut rng).map(|v| v + problem.scale.ln());
        let r = residual(&f, 1.0, problem, coeffs);
        let rel = r.integrate().abs() / (1.0 + r.sup_norm());
        worst = worst.max(rel);
        summary.check("stokes_random", rel <= STOKES_TOL);
    }
    summary.metric("stokes_random_max", worst);

    let k = problem.k as f64;
    let control = u.add_scaled(&reference_profile(grid).map(|v| v * v), 0.05);
    for (label, p) in [
        ("k+gamma+1", k + problem.gamma + 1.0),
        ("k+gamma+2", k + problem.gamma + 2.0),
        ("2(k+gamma)", 2.0 * (k + problem.gamma)),
    ] {
        let m = ibp_identity(u, p, problem, coeffs).map_or(f64::NAN, |(l, r)| ibp_mismatch(l, r));
        summary.metric(format!("ibp_mismatch[p={label}]"), m);
        summary.check("ibp_identity", m <= IBP_TOL);
    }
    let m = ibp_identity(&control, k + problem.gamma + 1.0, problem, coeffs)
        .map_or(f64::NAN, |(l, r)| ibp_mismatch(l, r));
    summary.metric("ibp_negative_control", m);
    summary.check("ibp_negative_control", m > IBP_TOL);
    if problem.k == 1 && problem.gamma == 2.0 {
        let sol = sigma2_rewrite_check(u, problem, coeffs).unwrap_or(f64::NAN);
        let neg = sigma2_rewrite_check(&control, problem, coeffs).unwrap_or(f64::NAN);
        summary.metric("sigma2_rewrite", sol);
        summary.metric("sigma2_rewrite_negative_control", neg);
        summary.check("sigma2_rewrite", sol <= REWRITE_TOL);
        summary.check("sigma2_rewrite_negative_control", neg > REWRITE_CONTROL);
    }
    let torsion = torsion_curvature_check(u);
    summary.metric("torsion_curvature", torsion);
    summary.check("torsion_curvature", torsion <= TORSION_TOL);

    let third = third_order_contraction_check(u);
    summary.metric("third_order_max_ratio", third.max_ratio);
    summary.check("third_order_contraction", third.violations == 0);
    let maclaurin = maclaurin_field_check(u);
    summary.metric("maclaurin_max_ratio", maclaurin.max_ratio);
    summary.check("maclaurin", maclaurin.violations == 0);

    match uniqueness_probe(
        problem,
        coeffs,
        constants,
        &config.march,
        u,
        config.verify.perturbations,
        config.verify.perturbation_amplitude,
        config.seed,
    ) {
        Ok(rep) => {
            summary.metric("uniqueness_max_pairwise", rep.max_pairwise);
            summary.check("uniqueness", rep.max_pairwise <= UNIQUENESS_TOL);
        }
        Err(e) => {
            summary.error = Some(format!("uniqueness probe: {e}"));
            summary.check("uniqueness", false);
        }
    }
}

fn sweep_mode(config: &RunConfig, summary: &mut RunSummary) -> Result<(), RunError> {
    let sweep = config.sweep.as_ref().ok_or_else(|| ConfigError {
        line: None,
        message: "mode `sweep` needs a [sweep] section".into(),
    })?;
    let family = match sweep.family {
        SweepKind::Fixed => {
            let (problem, projected) = config.problem_spec()?;
            note_projection(summary, projected);
            SweepFamily::Fixed(problem)
        }
        SweepKind::Manufactured => {
            let loaded = config.load()?;
            let p = &config.problem;
            SweepFamily::Manufactured {
                profile: reference_profile(&loaded.grid),
                amplitude: config.manufactured.as_ref().map_or(0.0, |m| m.amplitude),
                k: p.k,
                gamma: p.gamma,
                alpha: p.alpha,
                rho: loaded.rho,
            }
        }
    };
    let table: SweepTable = match scale_sweep(&family, &sweep.scales, &config.march, sweep.timing) {
        Ok(t) => t,
        Err(e) => {
            summary.fail_solver(&e);
            return Ok(());
        }
    };
    fs::write(config.output_dir.join("sweep.csv"), table.to_csv())?;
    let stats = table.summary();
    #[derive(Serialize)]
    struct SweepJson<'a> {
        rows: &'a SweepTable,
        summary: &'a crate::verify::SweepSummary,
    }
    write_json(
        &config.output_dir.join("sweep.json"),
        &SweepJson {
            rows: &table,
            summary: &stats,
        },
    )?;
    for c in &stats.columns {
        summary.metric(format!("ratio[{}]", c.name), c.ratio);
        summary.check("sweep_columns", c.pass);
    }
    for row in &table.rows {
        summary.check("sandwich", row.sandwich_violations == 0);
        if let Some(e) = row.recovery_error {
            summary.check("recovery", e <= RECOVERY_TOL);
        }
    }
    Ok(())
}

fn min_scale_mode(config: &RunConfig, summary: &mut RunSummary) -> Result<(), RunError> {
    let (problem, projected) = config.problem_spec()?;
    note_projection(summary, projected);
    let (coeffs, constants) = constants_for(&problem);
    let report = find_min_scale(
        &problem,
        &coeffs,
        &constants,
        &config.march,
        config.min_scale.start,
        config.min_scale.cap,
    );
    write_json(&config.output_dir.join("min_scale.json"), &report)?;
    match report.m_lo {
        Some(m) => summary.metric("m_lo", m),
        None => {
            summary.status = Status::SolverFailure;
            summary.exit_code = EXIT_SOLVER;
            summary.error = Some(format!(
                "no scale up to {} completed the march",
                config.min_scale.cap
            ));
            if let Some(last) = report.tested.last() {
                summary.last_good_t = last.last_t;
                summary.violated_margin = last.violated.map(|m| m.to_string());
            }
        }
    }
    if let Some(m) = report.m_fail {
        summary.metric("m_fail", m);
    }
    Ok(())
}

/// March with per-step invariant checks, checkpoint snapshots and trace output.
/// Returns `None` after recording a solver failure in `summary`.
fn march_recorded(
    config: &RunConfig,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
    constants: &AdmissibilityConstants,
    summary: &mut RunSummary,
) -> Result<Option<ScalarField>, RunError> {
    let out = &config.output_dir;
    let mut stokes: Vec<f64> = Vec::new();
    let mut write_errors: Vec<crate::error::GeometryError> = Vec::new();
    let mut on_accept = |t: f64, u: &ScalarField| {
        let r = residual(u, t, problem, coeffs);
        stokes.push(r.integrate().abs() / (1.0 + r.sup_norm()));
        if config
            .output
            .checkpoints
            .iter()
            .any(|c| (c - t).abs() < 1e-12)
        {
            let path = out.join(format!("u_t{t:.4}.fyhf"));
            if let Err(e) = snapshot::write_real(&path, u) {
                write_errors.push(e);
            }
        }
    };
    let mut hooks = MarchHooks {
        perturbation: None,
        on_accept: Some(&mut on_accept),
    };
    let result = continuity_march_with(problem, coeffs, constants, &config.march, &mut hooks);
    if let Some(e) = write_errors.pop() {
        return Err(e.into());
    }
    let (solution, trace) = match result {
        Ok((u, trace)) => (Some(u), trace),
        Err((e, trace)) => {
            summary.fail_solver(&Error::Solver(e));
            (None, trace)
        }
    };
    write_trace(out, &trace)?;
    for s in &stokes {
        summary.check("stokes", *s <= STOKES_TOL);
    }
    for step in trace.accepted() {
        summary.check("sandwich", step.sandwich.is_some_and(|r| r.holds()));
        summary.check(
            "admissible",
            step.upsilon_margins.is_some_and(|m| m.admissible()),
        );
        summary.check(
            "normalization",
            step.normalization_error
                .is_some_and(|e| e <= NORMALIZATION_TOL),
        );
    }
    if let Some(last) = trace.accepted().last() {
        summary.final_residual = Some(last.final_residual);
        summary.upsilon_margins = last.upsilon_margins;
        if solution.is_some() {
            summary.last_good_t = Some(last.t);
        }
    }
    summary.metric("newton_total", trace.newton_total() as f64);
    Ok(solution)
}

const DIAGNOSTICS_HEADER: &str = "t,dt,newton_iters,krylov_iters,final_residual,m1,m2,m1_full_delta,sandwich_min,sandwich_max,sup_eu_over_M,M_over_inf_eu,c1_diag,c2_diag,c3_diag,normalization_error";

fn write_trace(out: &Path, trace: &ContinuationTrace) -> Result<(), RunError> {
    let mut jsonl = io::BufWriter::new(fs::File::create(out.join("trace.jsonl"))?);
    for step in &trace.steps {
        serde_json::to_writer(&mut jsonl, step).map_err(io::Error::other)?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;
    let mut csv = String::from(DIAGNOSTICS_HEADER);
    csv.push('\n');
    for s in trace.accepted() {
        let (Some(m), Some(sw), Some(d)) = (s.upsilon_margins, s.sandwich, s.estimate_diagnostics)
        else {
            continue;
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t,
            s.dt,
            s.newton_iters,
            s.krylov_iters,
            s.final_residual,
            m.m1,
            m.m2,
            m.m1_full_delta,
            sw.min_ratio,
            sw.max_ratio,
            d.sup_eu_over_m,
            d.m_over_inf_eu,
            d.c1_diag,
            d.c2_diag,
            d.c3_diag,
            s.normalization_error.unwrap_or(f64::NAN),
        );
    }
    fs::write(out.join("diagnostics.csv"), csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_failed_invariant_turns_success_into_exit_four() {
        let mut s = RunSummary::new(Mode::Solve);
        s.check("stokes", true);
        s.finish();
        assert_eq!(s.exit_code, EXIT_OK);
        s.check("stokes", false);
        s.finish();
        assert_eq!(
            (s.status, s.exit_code),
            (Status::InvariantViolation, EXIT_INVARIANT)
        );
        assert_eq!(
            s.invariant_pass_counts["stokes"],
            PassCount { pass: 1, fail: 1 }
        );
    }

    #[test]
    fn solver_failures_keep_exit_three_and_name_the_margin() {
        let mut s = RunSummary::new(Mode::Sweep);
        s.fail_solver(&Error::Solver(SolverError::StepFloorReached {
            last_t: 0.375,
            cause: "stalled".into(),
            violated: Some(Margin::Hessian),
        }));
        s.check("sandwich", false);
        s.finish();
        assert_eq!(s.exit_code, EXIT_SOLVER);
        assert_eq!(s.last_good_t, Some(0.375));
        assert!(s.violated_margin.unwrap().starts_with("m2"));

        let mut s = RunSummary::new(Mode::Manufactured);
        s.fail_solver(&Error::Problem(ProblemError::InadmissibleState {
            m1: -1.0,
            m2: 0.5,
        }));
        assert!(s.violated_margin.unwrap().starts_with("m1"));
    }
}
