//! Scale sweeps: solve one family at several `M` and tabulate the scaled estimates.

use super::manufactured::manufacture;
use crate::error::Error;
use crate::geometry::{HermitianField, ScalarField};
use crate::operator::{compute_constants, extract_lrho, ProblemSpec};
use crate::solver::{continuity_march, estimate_diagnostics, EstimateDiagnostics, MarchConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::Instant;

/// Allowed `max/min` of every diagnostic column across a sweep.
pub const SWEEP_FACTOR: f64 = 4.0;

/// A family of problems indexed by `M`.
#[derive(Clone, Debug)]
pub enum SweepFamily {
    /// Fixed `ρ, μ`; only the normalization changes.
    Fixed(ProblemSpec),
    /// `u*_M = log M + amplitude · profile`, with `μ` manufactured at each `M`.
    Manufactured {
        profile: ScalarField,
        amplitude: f64,
        k: usize,
        gamma: f64,
        alpha: f64,
        rho: HermitianField,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub scale: f64,
    pub sup_eu_over_m: f64,
    pub m_over_inf_eu: f64,
    pub c1_diag: f64,
    pub c2_diag: f64,
    pub c3_diag: f64,
    pub newton_total: usize,
    /// Zero when timing is disabled.
    pub wall_ms: u64,
    /// `‖u − u*‖∞` for manufactured families.
    pub recovery_error: Option<f64>,
    pub sandwich_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// How a sweep column is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRule {
    /// `max/min ≤ SWEEP_FACTOR`: the quantity is comparable to a fixed constant.
    Stable,
    /// `max / (value at the smallest M) ≤ SWEEP_FACTOR`: only an upper bound is claimed.
    Bounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub name: &'static str,
    pub rule: ColumnRule,
    pub min: f64,
    pub max: f64,
    /// `max/min` for stable columns, `max/first` for bounded ones; one for an identically zero column.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub columns: Vec<ColumnSummary>,
    pub sandwich_violations: usize,
    pub pass: bool,
}

impl SweepFamily {
    fn instance(&self, scale: f64) -> Result<(ProblemSpec, Option<ScalarField>), Error> {
        match self {
            SweepFamily::Fixed(p) => Ok((p.with_scale(scale)?, None)),
            SweepFamily::Manufactured {
                profile,
                amplitude,
                k,
                gamma,
                alpha,
                rho,
            } => {
                let mut star = profile.map(|v| amplitude * v);
                crate::solver::renormalize(&mut star, scale);
                let case = manufacture(&star, *k, *gamma, *alpha, rho.clone())?;
                Ok((case.problem, Some(star)))
            }
        }
    }
}

/// Solve the family at each `M` in parallel; rows come back in the order of `scales`.
pub fn scale_sweep(
    family: &SweepFamily,
    scales: &[f64],
    cfg: &MarchConfig,
    timing: bool,
) -> Result<SweepTable, Error> {
    let rows = scales
        .par_iter()
        .map(|&m| {
            let start = Instant::now();
            let (problem, star) = family.instance(m)?;
            let coeffs = extract_lrho(&problem.rho);
            let constants = compute_constants(&problem, &coeffs);
            let (u, trace) =
                continuity_march(&problem, &coeffs, &constants, cfg).map_err(|(e, _)| e)?;
            let d: EstimateDiagnostics =
                estimate_diagnostics(&u, &u.complex_hessian(), problem.scale);
            let wall_ms = if timing {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            Ok(SweepRow {
                scale: m,
                sup_eu_over_m: d.sup_eu_over_m,
                m_over_inf_eu: d.m_over_inf_eu,
                c1_diag: d.c1_diag,
                c2_diag: d.c2_diag,
                c3_diag: d.c3_diag,
                newton_total: trace.newton_total(),
                wall_ms,
                recovery_error: star.map(|s| u.zip_map(&s, |a, b| a - b).sup_norm()),
                sandwich_violations: trace.sandwich_violations(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(SweepTable { rows })
}

fn column_summary(name: &'static str, rule: ColumnRule, values: Vec<f64>) -> ColumnSummary {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let base = match rule {
        ColumnRule::Stable => min,
        ColumnRule::Bounded => values.first().copied().unwrap_or(0.0),
    };
    let ratio = if max == 0.0 {
        1.0
    } else if base > 0.0 {
        max / base
    } else {
        f64::INFINITY
    };
    ColumnSummary {
        name,
        rule,
        min,
        max,
        ratio,
        pass: ratio.is_finite() && ratio <= SWEEP_FACTOR,
    }
}

impl SweepTable {
    pub const CSV_HEADER: &'static str =
        "M,sup_eu_over_M,M_over_inf_eu,c1_diag,c2_diag,c3_diag,newton_total,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                r.scale,
                r.sup_eu_over_m,
                r.m_over_inf_eu,
                r.c1_diag,
                r.c2_diag,
                r.c3_diag,
                r.newton_total,
                r.wall_ms
            );
        }
        out
    }

    pub fn summary(&self) -> SweepSummary {
        let mut rows: Vec<&SweepRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.scale.total_cmp(&b.scale));
        let col = |f: fn(&SweepRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
        let columns = vec![
            column_summary(
                "sup_eu_over_M",
                ColumnRule::Stable,
                col(|r| r.sup_eu_over_m),
            ),
            column_summary(
                "M_over_inf_eu",
                ColumnRule::Stable,
                col(|r| r.m_over_inf_eu),
            ),
            column_summary("c1_diag", ColumnRule::Stable, col(|r| r.c1_diag)),
            column_summary("c2_diag", ColumnRule::Stable, col(|r| r.c2_diag)),
            column_summary("c3_diag", ColumnRule::Bounded, col(|r| r.c3_diag)),
        ];
        let sandwich_violations = rows.iter().map(|r| r.sandwich_violations).sum();
        let pass = columns.iter().all(|c| c.pass) && sandwich_violations == 0;
        SweepSummary {
            columns,
            sandwich_violations,
            pass,
        }
    }
}
