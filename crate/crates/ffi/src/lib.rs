//! C ABI for `fuyau-core`.
//!
//! Objects cross the boundary as opaque heap handles created by `fy_*_new`
//! or `fy_*_parse` and released by the matching `fy_*_free`. Every call
//! returns an [`FyStatus`]; on failure the message is kept per thread and
//! read back with [`fy_last_error`]. Panics never unwind into the caller.
//!
//! Field values use the grid's linear order: `N^{2n}` doubles, last axis
//! fastest.

#![allow(clippy::missing_safety_doc)]

use fuyau_core::cli::{execute, RunError, EXIT_OK};
use fuyau_core::config::{validate_config, Overrides, RunConfig};
use fuyau_core::geometry::{build_grid, HermitianField, ScalarField};
use fuyau_core::hessian::upsilon_margin;
use fuyau_core::operator::{
    compute_constants, extract_lrho, residual, LrhoCoefficients, ProblemSpec,
};
use fuyau_core::solver::{continuity_march, MarchConfig};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

/// Major version in the upper 16 bits, minor in the lower 16.
pub const FY_ABI_VERSION: u32 = 1 << 16;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    SolverFailure = 4,
    InvariantViolation = 5,
    IoError = 6,
    Panic = 7,
}

/// A validated run configuration.
pub struct FyConfig(RunConfig);

/// A problem with its operator coefficients and admissibility constants.
pub struct FyProblem {
    problem: ProblemSpec,
    coeffs: LrhoCoefficients,
    constants: fuyau_core::operator::AdmissibilityConstants,
}

/// The converged state at `t = 1`.
pub struct FySolution {
    values: Vec<f64>,
    final_residual: f64,
    m1: f64,
    m2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn fail(status: FyStatus, message: impl Into<String>) -> FyStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> FyStatus) -> FyStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(FyStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, FyStatus> {
    if s.is_null() {
        return Err(fail(FyStatus::NullPointer, "string argument is null"));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| fail(FyStatus::InvalidArgument, "string argument is not UTF-8"))
}

fn boxed<T>(out: *mut *mut T, value: T) -> FyStatus {
    // SAFETY: callers check `out` for null before building `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    FyStatus::Ok
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(FyStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

#[no_mangle]
pub extern "C" fn fy_abi_version() -> u32 {
    FY_ABI_VERSION
}

/// Copy the calling thread's last error into `buf` (NUL-terminated,
/// truncated to `cap - 1` bytes) and return its full length in bytes.
/// A null `buf` only reports the length.
#[no_mangle]
pub unsafe extern "C" fn fy_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            // SAFETY: the caller provides `cap` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Parse and validate a TOML run configuration.
#[no_mangle]
pub unsafe extern "C" fn fy_config_parse(toml: *const c_char, out: *mut *mut FyConfig) -> FyStatus {
    guard(|| {
        non_null!(out);
        let source = match unsafe { c_str(toml) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match validate_config(source, &Overrides::default()) {
            Ok(cfg) => boxed(out, FyConfig(cfg)),
            Err(e) => fail(FyStatus::ConfigError, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fy_config_set_output_dir(
    config: *mut FyConfig,
    path: *const c_char,
) -> FyStatus {
    guard(|| {
        non_null!(config);
        match unsafe { c_str(path) } {
            Ok(p) => {
                // SAFETY: non-null handles come from `fy_config_parse`.
                unsafe { (*config).0.output_dir = PathBuf::from(p) };
                FyStatus::Ok
            }
            Err(status) => status,
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fy_config_free(config: *mut FyConfig) {
    if !config.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Run the configured mode, writing its artifacts. `exit_code` receives the
/// command-line exit code (0, 2, 3 or 4).
#[no_mangle]
pub unsafe extern "C" fn fy_run(config: *const FyConfig, exit_code: *mut i32) -> FyStatus {
    guard(|| {
        non_null!(config, exit_code);
        // SAFETY: both pointers were checked and the handle is live.
        let cfg = unsafe { &(*config).0 };
        let summary = match execute(cfg) {
            Ok(s) => s,
            Err(RunError::Config(e)) => return fail(FyStatus::ConfigError, e.to_string()),
            Err(e @ RunError::Io(_)) => return fail(FyStatus::IoError, e.to_string()),
        };
        unsafe { *exit_code = summary.exit_code };
        match summary.exit_code {
            EXIT_OK => FyStatus::Ok,
            fuyau_core::cli::EXIT_SOLVER => fail(
                FyStatus::SolverFailure,
                summary.error.unwrap_or_else(|| "solver failure".into()),
            ),
            _ => fail(
                FyStatus::InvariantViolation,
                "an invariant check failed; see summary.json",
            ),
        }
    })
}

fn problem_handle(problem: ProblemSpec) -> FyProblem {
    let coeffs = extract_lrho(&problem.rho);
    let constants = compute_constants(&problem, &coeffs);
    FyProblem {
        problem,
        coeffs,
        constants,
    }
}

/// Build the problem described by a configuration's `[grid]` and `[problem]`.
#[no_mangle]
pub unsafe extern "C" fn fy_problem_from_config(
    config: *const FyConfig,
    out: *mut *mut FyProblem,
) -> FyStatus {
    guard(|| {
        non_null!(config, out);
        // SAFETY: checked non-null; the handle is live.
        match unsafe { &(*config).0 }.problem_spec() {
            Ok((p, _)) => boxed(out, problem_handle(p)),
            Err(e) => fail(FyStatus::ConfigError, e.to_string()),
        }
    })
}

/// A problem with `ρ = 0`. `mu` holds `fy_grid_points(n, N)` values in grid
/// order and must have zero mean; a null `mu` means `μ = 0`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fy_problem_new(
    n: u32,
    resolution: u32,
    k: u32,
    gamma: f64,
    alpha: f64,
    scale: f64,
    mu: *const f64,
    mu_len: usize,
    out: *mut *mut FyProblem,
) -> FyStatus {
    guard(|| {
        non_null!(out);
        let grid = match build_grid(n as usize, resolution as usize) {
            Ok(g) => g,
            Err(e) => return fail(FyStatus::InvalidArgument, e.to_string()),
        };
        let mu = if mu.is_null() {
            ScalarField::zeros(&grid)
        } else {
            if mu_len != grid.len() {
                return fail(
                    FyStatus::InvalidArgument,
                    format!("mu has {mu_len} values, the grid has {}", grid.len()),
                );
            }
            // SAFETY: the caller provides `mu_len` readable doubles.
            ScalarField::new(
                grid.clone(),
                unsafe { std::slice::from_raw_parts(mu, mu_len) }.to_vec(),
            )
        };
        match ProblemSpec::new(
            k as usize,
            gamma,
            alpha,
            HermitianField::zeros(&grid),
            mu,
            scale,
        ) {
            Ok(p) => boxed(out, problem_handle(p)),
            Err(e) => fail(FyStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Number of grid points `N^{2n}`, or 0 for an invalid grid.
#[no_mangle]
pub extern "C" fn fy_grid_points(n: u32, resolution: u32) -> usize {
    build_grid(n as usize, resolution as usize).map_or(0, |g| g.len())
}

#[no_mangle]
pub unsafe extern "C" fn fy_problem_points(problem: *const FyProblem) -> usize {
    if problem.is_null() {
        return 0;
    }
    // SAFETY: checked non-null; the handle is live.
    unsafe { (*problem).problem.grid.len() }
}

#[no_mangle]
pub unsafe extern "C" fn fy_problem_free(problem: *mut FyProblem) {
    if !problem.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Evaluate the continuity-family residual at `t` for the state `u`,
/// writing `len` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn fy_residual(
    problem: *const FyProblem,
    u: *const f64,
    len: usize,
    t: f64,
    out: *mut f64,
) -> FyStatus {
    guard(|| {
        non_null!(problem, u, out);
        // SAFETY: checked non-null; the handle is live.
        let p = unsafe { &*problem };
        if len != p.problem.grid.len() {
            return fail(
                FyStatus::InvalidArgument,
                format!(
                    "state has {len} values, the grid has {}",
                    p.problem.grid.len()
                ),
            );
        }
        // SAFETY: the caller provides `len` readable doubles at `u` and `len` writable at `out`.
        let state = ScalarField::new(
            p.problem.grid.clone(),
            unsafe { std::slice::from_raw_parts(u, len) }.to_vec(),
        );
        let r = residual(&state, t, &p.problem, &p.coeffs);
        unsafe { ptr::copy_nonoverlapping(r.values().as_ptr(), out, len) };
        FyStatus::Ok
    })
}

/// March from `t = 0` to `t = 1` with the default continuation settings.
#[no_mangle]
pub unsafe extern "C" fn fy_solve(
    problem: *const FyProblem,
    out: *mut *mut FySolution,
) -> FyStatus {
    guard(|| {
        non_null!(problem, out);
        // SAFETY: checked non-null; the handle is live.
        let p = unsafe { &*problem };
        match continuity_march(&p.problem, &p.coeffs, &p.constants, &MarchConfig::default()) {
            Ok((u, trace)) => {
                let margins = upsilon_margin(&u, &u.complex_hessian(), &p.problem, &p.constants);
                let final_residual = trace
                    .accepted()
                    .last()
                    .map_or(f64::NAN, |s| s.final_residual);
                boxed(
                    out,
                    FySolution {
                        values: u.values().to_vec(),
                        final_residual,
                        m1: margins.m1,
                        m2: margins.m2,
                    },
                )
            }
            Err((e, trace)) => fail(
                FyStatus::SolverFailure,
                format!("{e} (last accepted t = {:?})", trace.last_accepted_t()),
            ),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fy_solution_len(solution: *const FySolution) -> usize {
    if solution.is_null() {
        return 0;
    }
    // SAFETY: checked non-null; the handle is live.
    unsafe { (*solution).values.len() }
}

/// Borrowed pointer to the solution values, valid until `fy_solution_free`.
#[no_mangle]
pub unsafe extern "C" fn fy_solution_values(solution: *const FySolution) -> *const f64 {
    if solution.is_null() {
        return ptr::null();
    }
    // SAFETY: checked non-null; the handle is live.
    unsafe { (*solution).values.as_ptr() }
}

#[no_mangle]
pub unsafe extern "C" fn fy_solution_final_residual(solution: *const FySolution) -> f64 {
    if solution.is_null() {
        return f64::NAN;
    }
    // SAFETY: checked non-null; the handle is live.
    unsafe { (*solution).final_residual }
}

/// Admissibility margins of the solution; both are positive inside the set.
#[no_mangle]
pub unsafe extern "C" fn fy_solution_margins(
    solution: *const FySolution,
    m1: *mut f64,
    m2: *mut f64,
) -> FyStatus {
    non_null!(solution, m1, m2);
    // SAFETY: all pointers were checked and the handle is live.
    unsafe {
        *m1 = (*solution).m1;
        *m2 = (*solution).m2;
    }
    FyStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn fy_solution_free(solution: *mut FySolution) {
    if !solution.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(solution) });
    }
}
