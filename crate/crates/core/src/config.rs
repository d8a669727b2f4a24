//! Run configuration documents (TOML) and their validation.
//!
//! ```toml
//! mode = "manufactured"   # solve | manufactured | sweep | verify-all | min-scale
//! seed = 7
//!
//! [grid]
//! n = 2
//! N = 12
//!
//! [problem]
//! k = 1
//! gamma = 2.0
//! alpha = 1.0
//! M = 100.0
//! rho = [{ wavevector = [0, 0, 0, 0], coefficient = [[[0.002, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.002, 0.0]]] }]
//! mu = [{ wavevector = [1, 0, 0, 0], coefficient = [0.5, 0.0] }, { wavevector = [-1, 0, 0, 0], coefficient = [0.5, 0.0] }]
//!
//! [manufactured]
//! amplitude = 0.01
//! ```
//!
//! `rho_snapshot` / `mu_snapshot` may replace the series. Omitted fields are zero.

use crate::error::ProblemError;
use crate::geometry::{
    build_grid, snapshot, HermitianField, MatrixTerm, ScalarField, ScalarTerm, TorusGrid,
};
use crate::operator::ProblemSpec;
use crate::solver::MarchConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use toml::Spanned;

/// Bound on `|∫ μ|` accepted at load time.
pub const MU_MEAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Manufactured,
    Sweep,
    VerifyAll,
    MinScale,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Manufactured => "manufactured",
            Mode::Sweep => "sweep",
            Mode::VerifyAll => "verify-all",
            Mode::MinScale => "min-scale",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            Mode::Solve,
            Mode::Manufactured,
            Mode::Sweep,
            Mode::VerifyAll,
            Mode::MinScale,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// A config error, anchored to a line of the document when one applies.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ScalarSource {
    Zero,
    Series(Vec<ScalarTerm>),
    Snapshot(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum MatrixSource {
    Zero,
    Series(Vec<MatrixTerm>),
    Snapshot(PathBuf),
    /// The built-in smooth non-flat `ρ`, scaled by the given amplitude.
    Reference(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub scale: f64,
    pub rho: MatrixSource,
    pub mu: ScalarSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    /// `u* = log M + amplitude · φ` with the reference profile `φ`.
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Fixed `ρ, μ` from `[problem]`.
    Fixed,
    /// Manufactured `μ` at each `M` from `[manufactured]`.
    Manufactured,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub family: SweepKind,
    pub scales: Vec<f64>,
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinScaleConfig {
    pub start: f64,
    pub cap: f64,
}

impl Default for MinScaleConfig {
    fn default() -> Self {
        MinScaleConfig {
            start: 1.0,
            cap: 1e8,
        }
    }
}

/// Settings of the randomized and solution-borne checks in `verify-all`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random fields for the Stokes invariant.
    pub random_fields: usize,
    /// Perturbed warm starts for the uniqueness probe.
    pub perturbations: usize,
    pub perturbation_amplitude: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            random_fields: 100,
            perturbations: 5,
            perturbation_amplitude: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Values of `t` at which accepted states are written as snapshots.
    pub checkpoints: Vec<f64>,
}

/// Validated, normalized run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub problem: ProblemConfig,
    pub manufactured: Option<ManufacturedConfig>,
    pub sweep: Option<SweepConfig>,
    pub min_scale: MinScaleConfig,
    pub verify: VerifyConfig,
    pub march: MarchConfig,
    pub output: OutputConfig,
    pub allow_mu_projection: bool,
}

/// Command-line values that take precedence over the document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub resolution: Option<usize>,
    pub allow_mu_projection: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Spanned<String>>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    allow_mu_projection: Option<bool>,
    grid: Option<Spanned<RawGrid>>,
    problem: Option<Spanned<RawProblem>>,
    manufactured: Option<Spanned<ManufacturedConfig>>,
    sweep: Option<Spanned<RawSweep>>,
    min_scale: Option<Spanned<MinScaleConfig>>,
    verify: Option<VerifyConfig>,
    march: Option<Spanned<MarchConfig>>,
    output: Option<Spanned<OutputConfig>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<Spanned<usize>>,
    #[serde(rename = "N")]
    resolution: Option<Spanned<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    k: Spanned<usize>,
    gamma: Spanned<f64>,
    alpha: Spanned<f64>,
    #[serde(rename = "M")]
    scale: Spanned<f64>,
    rho: Option<Spanned<Vec<MatrixTerm>>>,
    rho_snapshot: Option<Spanned<PathBuf>>,
    rho_reference: Option<Spanned<f64>>,
    mu: Option<Spanned<Vec<ScalarTerm>>>,
    mu_snapshot: Option<Spanned<PathBuf>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    family: Option<SweepKind>,
    scales: Spanned<Vec<f64>>,
    #[serde(default)]
    timing: bool,
}

/// Maps byte offsets of the source document to 1-based line numbers.
struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn at(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.0.len());
        self.0[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(self.at(span)),
            message: message.into(),
        })
    }
}

fn plain<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line: None,
        message: message.into(),
    })
}

/// Parse and check a document. Every constraint of the problem is checked
/// here, including `∫ μ = 0` for explicit `μ`.
pub fn validate_config(source: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let lines = Lines(source);
    let raw: RawConfig = toml::from_str(source).map_err(|e| ConfigError {
        line: e.span().map(|s| lines.at(s)),
        message: e.message().to_string(),
    })?;

    let mode = match (overrides.mode, &raw.mode) {
        (Some(m), _) => m,
        (None, Some(m)) => match m.get_ref().parse::<Mode>() {
            Ok(mode) => mode,
            Err(e) => return lines.err(m.span(), e),
        },
        (None, None) => return plain("missing `mode`"),
    };

    let (grid_line, raw_n, raw_res) = match &raw.grid {
        Some(g) => {
            let r = g.get_ref();
            (
                Some(lines.at(g.span())),
                r.n.as_ref().map(|v| *v.get_ref()),
                r.resolution.as_ref().map(|v| *v.get_ref()),
            )
        }
        None => (None, None, None),
    };
    let n = overrides.n.or(raw_n);
    let resolution = overrides.resolution.or(raw_res);
    let (Some(n), Some(resolution)) = (n, resolution) else {
        return Err(ConfigError {
            line: grid_line,
            message: "grid needs both `n` and `N` (in [grid] or on the command line)".into(),
        });
    };
    let grid = build_grid(n, resolution).map_err(|e| ConfigError {
        line: grid_line,
        message: e.to_string(),
    })?;

    let Some(problem_raw) = &raw.problem else {
        return plain("missing [problem] section");
    };
    let p = problem_raw.get_ref();
    let k = *p.k.get_ref();
    if k < 1 || k >= n {
        return lines.err(
            p.k.span(),
            format!("k = {k} must satisfy 1 <= k <= n-1 = {}", n - 1),
        );
    }
    let gamma = *p.gamma.get_ref();
    if !(gamma > 0.0 && gamma.is_finite()) {
        return lines.err(p.gamma.span(), format!("gamma = {gamma} must be positive"));
    }
    let alpha = *p.alpha.get_ref();
    if alpha == 0.0 || !alpha.is_finite() {
        return lines.err(p.alpha.span(), "alpha must be finite and nonzero");
    }
    let scale = *p.scale.get_ref();
    if !(scale >= 1.0 && scale.is_finite()) {
        return lines.err(
            p.scale.span(),
            format!("M = {scale} must be finite and at least 1"),
        );
    }

    let rho_sources = [
        p.rho.is_some(),
        p.rho_snapshot.is_some(),
        p.rho_reference.is_some(),
    ];
    if rho_sources.iter().filter(|&&b| b).count() > 1 {
        return lines.err(
            problem_raw.span(),
            "give at most one of `rho`, `rho_snapshot`, `rho_reference`",
        );
    }
    let rho = if let Some(r) = &p.rho {
        let field = HermitianField::from_series(&grid, r.get_ref());
        if let Err(e) = field {
            return lines.err(r.span(), format!("rho: {e}"));
        }
        MatrixSource::Series(r.get_ref().clone())
    } else if let Some(path) = &p.rho_snapshot {
        if let Err(e) = load_rho_snapshot(path.get_ref(), &grid) {
            return lines.err(path.span(), format!("rho_snapshot: {e}"));
        }
        MatrixSource::Snapshot(path.get_ref().clone())
    } else if let Some(a) = &p.rho_reference {
        if !a.get_ref().is_finite() {
            return lines.err(a.span(), "rho_reference must be finite");
        }
        MatrixSource::Reference(*a.get_ref())
    } else {
        MatrixSource::Zero
    };

    let allow_mu_projection =
        overrides.allow_mu_projection || raw.allow_mu_projection.unwrap_or(false);
    if p.mu.is_some() && p.mu_snapshot.is_some() {
        return lines.err(
            problem_raw.span(),
            "give at most one of `mu`, `mu_snapshot`",
        );
    }
    let mu_span =
        p.mu.as_ref()
            .map(|m| m.span())
            .or_else(|| p.mu_snapshot.as_ref().map(|m| m.span()));
    let mu = if let Some(m) = &p.mu {
        ScalarSource::Series(m.get_ref().clone())
    } else if let Some(path) = &p.mu_snapshot {
        ScalarSource::Snapshot(path.get_ref().clone())
    } else {
        ScalarSource::Zero
    };
    let problem = ProblemConfig {
        k,
        gamma,
        alpha,
        scale,
        rho,
        mu,
    };
    if let Some(span) = mu_span.clone() {
        match load_mu(&problem.mu, &grid) {
            Err(e) => return lines.err(span, format!("mu: {e}")),
            Ok(field) => {
                let mean = field.integrate();
                if mean.abs() > MU_MEAN_TOL && !allow_mu_projection {
                    return lines.err(
                        span,
                        format!("mu must integrate to zero: measured mean {mean:.6e} (pass --allow-mu-projection to subtract it)"),
                    );
                }
            }
        }
    }

    let manufactured = raw
        .manufactured
        .as_ref()
        .map(|m| (m.span(), m.get_ref().clone()));
    if let Some((span, m)) = &manufactured {
        if !(m.amplitude.is_finite() && m.amplitude >= 0.0) {
            return lines.err(
                span.clone(),
                "manufactured.amplitude must be finite and nonnegative",
            );
        }
    }
    let needs_manufactured = matches!(mode, Mode::Manufactured | Mode::VerifyAll);
    if needs_manufactured && manufactured.is_none() {
        return plain(format!(
            "mode `{}` needs a [manufactured] section",
            mode.name()
        ));
    }
    if needs_manufactured && mu_span.is_some() {
        return lines.err(
            mu_span.clone().unwrap(),
            format!(
                "mode `{}` defines mu from the manufactured state; remove `mu`",
                mode.name()
            ),
        );
    }

    let sweep = match &raw.sweep {
        Some(s) => {
            let r = s.get_ref();
            let scales = r.scales.get_ref().clone();
            if scales.is_empty() {
                return lines.err(r.scales.span(), "sweep.scales must not be empty");
            }
            if let Some(bad) = scales.iter().find(|m| !(**m >= 1.0 && m.is_finite())) {
                return lines.err(
                    r.scales.span(),
                    format!("sweep scale {bad} must be finite and at least 1"),
                );
            }
            let family = r.family.unwrap_or(if manufactured.is_some() {
                SweepKind::Manufactured
            } else {
                SweepKind::Fixed
            });
            if family == SweepKind::Manufactured && manufactured.is_none() {
                return lines.err(
                    s.span(),
                    "a manufactured sweep needs a [manufactured] section",
                );
            }
            Some(SweepConfig {
                family,
                scales,
                timing: r.timing,
            })
        }
        None if mode == Mode::Sweep => return plain("mode `sweep` needs a [sweep] section"),
        None => None,
    };

    let min_scale = match &raw.min_scale {
        Some(m) => {
            let c = m.get_ref().clone();
            if !(c.start >= 1.0 && c.cap >= c.start && c.cap.is_finite()) {
                return lines.err(m.span(), "min_scale needs 1 <= start <= cap < infinity");
            }
            c
        }
        None => MinScaleConfig::default(),
    };

    let march = match &raw.march {
        Some(m) => {
            let c = m.get_ref().clone();
            if let Err(e) = c.newton.validate() {
                return lines.err(m.span(), format!("march.newton: {e}"));
            }
            if !(c.dt_min > 0.0
                && c.dt_min <= c.dt_initial
                && c.dt_initial <= c.dt_max
                && c.dt_max <= 1.0)
            {
                return lines.err(
                    m.span(),
                    "march needs 0 < dt_min <= dt_initial <= dt_max <= 1",
                );
            }
            c
        }
        None => MarchConfig::default(),
    };

    let output = match &raw.output {
        Some(o) => {
            let c = o.get_ref().clone();
            if c.checkpoints.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return lines.err(o.span(), "output.checkpoints must lie in [0, 1]");
            }
            c
        }
        None => OutputConfig::default(),
    };

    Ok(RunConfig {
        mode,
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        output_dir: overrides
            .output_dir
            .clone()
            .or(raw.output_dir)
            .unwrap_or_else(|| PathBuf::from("fuyau-out")),
        grid: GridConfig { n, resolution },
        problem,
        manufactured: manufactured.map(|(_, m)| m),
        sweep,
        min_scale,
        verify: raw.verify.unwrap_or_default(),
        march,
        output,
        allow_mu_projection,
    })
}

fn load_rho_snapshot(path: &Path, grid: &Arc<TorusGrid>) -> Result<HermitianField, String> {
    match snapshot::read(path, grid).map_err(|e| e.to_string())? {
        snapshot::Snapshot::Hermitian(f) => {
            let defect = f.max_hermitian_defect();
            if defect > 1e-12 * f.sup_norm().max(1.0) {
                return Err(format!("not Hermitian (defect {defect:.3e})"));
            }
            Ok(f)
        }
        _ => Err("expected a Hermitian snapshot".into()),
    }
}

fn load_mu(source: &ScalarSource, grid: &Arc<TorusGrid>) -> Result<ScalarField, String> {
    match source {
        ScalarSource::Zero => Ok(ScalarField::zeros(grid)),
        ScalarSource::Series(terms) => grid
            .synthesize(terms)
            .map_err(|e| e.to_string())?
            .into_real(1e-12)
            .map_err(|e| e.to_string()),
        ScalarSource::Snapshot(path) => {
            match snapshot::read(path, grid).map_err(|e| e.to_string())? {
                snapshot::Snapshot::Real(f) => Ok(f),
                _ => Err("expected a real scalar snapshot".into()),
            }
        }
    }
}

/// Fields of a loaded problem, before the `μ` mean check of [`ProblemSpec`].
pub struct LoadedProblem {
    pub grid: Arc<TorusGrid>,
    pub rho: HermitianField,
    pub mu: ScalarField,
    /// Mean removed from `μ` under `allow_mu_projection`.
    pub projected_mean: Option<f64>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<TorusGrid>, ConfigError> {
        build_grid(self.grid.n, self.grid.resolution).map_err(|e| ConfigError {
            line: None,
            message: e.to_string(),
        })
    }

    /// Materialize `ρ` and `μ`; projection of `μ` happens only when allowed.
    pub fn load(&self) -> Result<LoadedProblem, ConfigError> {
        let grid = self.grid()?;
        let rho = match &self.problem.rho {
            MatrixSource::Zero => HermitianField::zeros(&grid),
            MatrixSource::Series(terms) => {
                HermitianField::from_series(&grid, terms).map_err(|e| ConfigError {
                    line: None,
                    message: format!("rho: {e}"),
                })?
            }
            MatrixSource::Snapshot(path) => {
                load_rho_snapshot(path, &grid).map_err(|e| ConfigError {
                    line: None,
                    message: format!("rho_snapshot: {e}"),
                })?
            }
            MatrixSource::Reference(a) => crate::verify::reference_rho(&grid, *a),
        };
        let mut mu = load_mu(&self.problem.mu, &grid).map_err(|e| ConfigError {
            line: None,
            message: format!("mu: {e}"),
        })?;
        let mean = mu.integrate();
        let projected_mean = if mean.abs() > MU_MEAN_TOL {
            if !self.allow_mu_projection {
                return plain(format!(
                    "mu must integrate to zero: measured mean {mean:.6e}"
                ));
            }
            mu = mu.map(|v| v - mean);
            Some(mean)
        } else {
            None
        };
        Ok(LoadedProblem {
            grid,
            rho,
            mu,
            projected_mean,
        })
    }

    /// The fixed-data problem of `[problem]`.
    pub fn problem_spec(&self) -> Result<(ProblemSpec, Option<f64>), ConfigError> {
        let loaded = self.load()?;
        let p = &self.problem;
        let spec = ProblemSpec::new(p.k, p.gamma, p.alpha, loaded.rho, loaded.mu, p.scale)
            .map_err(problem_error)?;
        Ok((spec, loaded.projected_mean))
    }
}

fn problem_error(e: ProblemError) -> ConfigError {
    ConfigError {
        line: None,
        message: e.to_string(),
    }
}
