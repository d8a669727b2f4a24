//! The Fu–Yau Hessian residual, its constants and its linearization.
//!
//! The canonical equation is the scalar continuity family
//!
//! `R(u, t) = (1/k) Δ̂ e^{ku} + α' { t L_ρ e^{(k−γ)u} + σ̂_{k+1}(i∂∂̄u) } − t μ`,
//!
//! whose zero at `t = 1` is the target equation.

mod lrho;
pub(crate) mod residual;

pub use lrho::{extract_lrho, LrhoCoefficients};
pub use residual::{adjoint_apply, linearize_apply, residual, Linearization};

use crate::error::ProblemError;
use crate::geometry::{wedge_density_at, HermitianField, ScalarField, TorusGrid};
use crate::hessian::{newton_tensor, sigma, sigma_c, Endomorphism};
use crate::linalg::{binomial, Mat};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// One instance of the equation on a fixed grid.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub grid: Arc<TorusGrid>,
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub rho: HermitianField,
    pub mu: ScalarField,
    /// Normalization `∫ e^u ω̂ⁿ = M`.
    pub scale: f64,
}

/// Tolerance on `|∫ μ|`.
pub const MU_MEAN_TOL: f64 = 1e-12;

impl ProblemSpec {
    pub fn new(
        k: usize,
        gamma: f64,
        alpha: f64,
        rho: HermitianField,
        mu: ScalarField,
        scale: f64,
    ) -> Result<Self, ProblemError> {
        Self::with_mu_tolerance(k, gamma, alpha, rho, mu, scale, MU_MEAN_TOL)
    }

    /// As [`ProblemSpec::new`] with a caller-chosen bound on `|∫ μ|`.
    pub(crate) fn with_mu_tolerance(
        k: usize,
        gamma: f64,
        alpha: f64,
        rho: HermitianField,
        mu: ScalarField,
        scale: f64,
        mu_tol: f64,
    ) -> Result<Self, ProblemError> {
        let grid = rho.grid().clone();
        let n = grid.dim();
        if !Arc::ptr_eq(&grid, mu.grid()) {
            return Err(crate::error::GeometryError::GridMismatch.into());
        }
        if k < 1 || k > n - 1 {
            return Err(ProblemError::InvalidK { k, n });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ProblemError::InvalidGamma(gamma));
        }
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(ProblemError::ZeroAlpha);
        }
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(ProblemError::InvalidScale(scale));
        }
        let mean = mu.integrate();
        if mean.abs() > mu_tol {
            return Err(ProblemError::MuNotZeroMean { mean });
        }
        let defect = rho.max_hermitian_defect();
        if defect > 1e-12 * rho.sup_norm().max(1.0) {
            return Err(crate::error::GeometryError::NotHermitian { defect }.into());
        }
        Ok(ProblemSpec {
            grid,
            k,
            gamma,
            alpha,
            rho,
            mu,
            scale,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.dim()
    }

    /// Same data at a different normalization `M`.
    pub fn with_scale(&self, scale: f64) -> Result<Self, ProblemError> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(ProblemError::InvalidScale(scale));
        }
        let mut p = self.clone();
        p.scale = scale;
        Ok(p)
    }

    /// The `t = 0` solution `u₀ = log M`.
    pub fn initial_guess(&self) -> ScalarField {
        ScalarField::constant(&self.grid, self.scale.ln())
    }
}

/// Constants governing the admissible set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityConstants {
    /// `−Λ ĝ^{jk̄} ≤ a^{jk̄} ≤ Λ ĝ^{jk̄}`.
    pub lambda: f64,
    /// Three-term minimum from the a priori estimates.
    pub delta: f64,
    /// `min{1, 2^{−13}/(|α'|(k+γ)³Λ)}`, the part of `δ` the ellipticity bound uses.
    pub delta_gate: f64,
    pub tau: f64,
    pub theta: f64,
    pub gamma_prime: f64,
    pub c1: f64,
    pub c_x: f64,
    pub c_poincare: f64,
    pub c_sobolev: f64,
}

/// Best constant `K(d)²` in `‖f‖²_{L^{2d/(d−2)}} ≤ K² ‖∇f‖²` on `R^d`.
fn aubin_talenti_sqr(d: usize) -> f64 {
    // Volume of the unit sphere S^d.
    let sphere = match d {
        4 => 8.0 * PI * PI / 3.0,
        6 => 16.0 * PI.powi(3) / 15.0,
        _ => unreachable!("only real dimensions 4 and 6 occur"),
    };
    let df = d as f64;
    4.0 / (df * (df - 2.0) * sphere.powf(2.0 / df))
}

/// Poincaré constant `C_P` with `∫f² − (∫f)² ≤ C_P ∫|∇f|²_ω̂`.
///
/// The first nonzero eigenvalue of `−Σ ∂²` on `R^{2n}/Z^{2n}` is `4π²`, and
/// `|∇f|²_ω̂ = |∇f|²_{eucl} / (4s)`, giving `C_P = s/π²`.
pub fn poincare_constant(grid: &TorusGrid) -> f64 {
    grid.scale() / (PI * PI)
}

/// Estimate of the Sobolev constant `C_S` with
/// `(∫ f^{2β})^{1/β} ≤ C_S (∫|∇f|²_ω̂ + ∫f²)`, `β = n/(n−1)`.
///
/// Uses the sharp Euclidean constant for the gradient term plus one for the
/// `L²` term (forced by constants on a unit-volume torus); not a proven bound.
pub fn sobolev_constant(grid: &TorusGrid) -> f64 {
    1.0 + 4.0 * grid.scale() * aubin_talenti_sqr(grid.real_axes())
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn compute_constants(
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> AdmissibilityConstants {
    let grid = &problem.grid;
    let n = grid.dim();
    let k = problem.k as f64;
    let gamma = problem.gamma;
    let s = grid.scale();
    let lambda = s * coeffs
        .a
        .values()
        .par_iter()
        .map(|m| {
            m.hermitian_eigenvalues()
                .iter()
                .fold(0.0f64, |x, e| x.max(e.abs()))
        })
        .reduce(|| 0.0, f64::max);
    let c_poincare = poincare_constant(grid);
    let c_sobolev = sobolev_constant(grid);
    let c_x = c_poincare.max(c_sobolev);
    let gamma_prime = k.min(gamma);
    let nf = n as f64;
    let c1 =
        (2.0 * (c_x + 1.0) * (gamma + k)).powi(n as i32) * (nf / (nf - 1.0)).powi((n * n) as i32);
    let theta = 1.0 / (2.0 * c1 - 1.0);
    let tau = 2f64.powi(-7) / binomial(n - 1, problem.k);
    let gate = safe_ratio(
        2f64.powi(-13),
        problem.alpha.abs() * (k + gamma).powi(3) * lambda,
    );
    let forcing = problem.mu.sup_norm() + problem.alpha.abs() * coeffs.c.sup_norm();
    let third = safe_ratio(theta, 2.0 * c_x * forcing).powf(gamma / gamma_prime);
    AdmissibilityConstants {
        lambda,
        delta: 1f64.min(gate).min(third),
        delta_gate: 1f64.min(gate),
        tau,
        theta,
        gamma_prime,
        c1,
        c_x,
        c_poincare,
        c_sobolev,
    }
}

/// `F^{pq̄} = g^{pq̄} + α'(k−γ) t e^{−(1+γ)u} a^{pq̄} + α' σ_{k+1}^{pq̄}` with
/// `σ`-derivatives taken against `g = e^u ĝ`.
pub fn f_tensor(
    u: &ScalarField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> HermitianField {
    let hess = u.complex_hessian();
    f_tensor_from_hessian(u, &hess, t, problem, coeffs)
}

pub fn f_tensor_from_hessian(
    u: &ScalarField,
    hess: &HermitianField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> HermitianField {
    let n = problem.n();
    let s = problem.grid.scale();
    let k = problem.k;
    let lin = problem.alpha * (k as f64 - problem.gamma) * t;
    let values = (0..u.values().len())
        .into_par_iter()
        .map(|i| {
            let v = u.values()[i];
            let c = 1.0 / (v.exp() * s);
            let h = Endomorphism::conformal(hess.at(i), v, s);
            let mut f = Mat::scalar(n, c) + newton_tensor(k, &h.matrix).scale(problem.alpha * c);
            if !coeffs.is_zero() {
                f += coeffs
                    .a
                    .at(i)
                    .scale(lin * (-(1.0 + problem.gamma) * v).exp());
            }
            f
        })
        .collect();
    HermitianField::new(problem.grid.clone(), values)
}

/// Extreme eigenvalues of `F` relative to `g`, with the ellipticity window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub violations: usize,
}

impl SandwichReport {
    pub const LOWER: f64 = 1.0 - 1.0 / 64.0;
    pub const UPPER: f64 = 1.0 + 1.0 / 64.0;

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Check `(1 − 2⁻⁶) g ≤ F ≤ (1 + 2⁻⁶) g` at every grid point.
pub fn sandwich_check(u: &ScalarField, f: &HermitianField) -> SandwichReport {
    let s = u.grid().scale();
    let (lo, hi, bad) = u
        .values()
        .par_iter()
        .zip(f.values().par_iter())
        .map(|(&v, m)| {
            let ev = m.scale(v.exp() * s).hermitian_eigenvalues();
            let lo = ev[0];
            let hi = *ev.last().unwrap();
            let bad = (lo < SandwichReport::LOWER || hi > SandwichReport::UPPER) as usize;
            (lo, hi, bad)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY, 0),
            |a, b| (a.0.min(b.0), a.1.max(b.1), a.2 + b.2),
        );
    SandwichReport {
        min_ratio: lo,
        max_ratio: hi,
        violations: bad,
    }
}

/// Pointwise matrix `Q[j][k]` of the (n−1,n−1)-form `ω̂^{n−k−1} ∧ χ_{(t,u)}`,
/// so that `i ξ ∧ ξ̄ ∧ ω̂^{n−k−1} ∧ χ = Σ ξ_j ξ̄_k Q[j][k] ω̂ⁿ`.
pub fn chi_matrix(
    v: f64,
    hess: &Mat,
    rho: &Mat,
    t: f64,
    problem: &ProblemSpec,
    chi_weight: f64,
) -> Mat {
    let n = problem.n();
    let k = problem.k;
    let s = problem.grid.scale();
    let lin = problem.alpha * (k as f64 - problem.gamma) * t * (-problem.gamma * v).exp();
    let top = problem.alpha * chi_weight * (-(k as f64) * v).exp();
    Mat::from_fn(n, |j, l| {
        let e = Mat::unit(n, j, l);
        let mut q = wedge_density_at(&[e], n - 1, s);
        if lin != 0.0 {
            q += wedge_density_at(&[e, *rho], n - 2, s) * lin;
        }
        let mut args = vec![e];
        args.extend(std::iter::repeat_n(*hess, k));
        q + wedge_density_at(&args, n - k - 1, s) * top
    })
}

/// Positivity report for `χ_{(t,u)}` tested against `i∂f ∧ ∂̄f ∧ ω̂^{n−k−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiReport {
    /// `min_x min_ξ n·(ξ Q ξ̄)/|ξ|²_ĝ`; one for `χ = ω̂^k`.
    pub margin: f64,
}

pub fn chi_form(
    u: &ScalarField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ChiReport {
    let hess = u.complex_hessian();
    let n = problem.n();
    let s = problem.grid.scale();
    let weight = binomial(n - 1, problem.k);
    let margin = (0..u.values().len())
        .into_par_iter()
        .map(|i| {
            let q = chi_matrix(
                u.values()[i],
                hess.at(i),
                coeffs.rho().at(i),
                t,
                problem,
                weight,
            );
            n as f64 * s * q.hermitian_eigenvalues()[0]
        })
        .reduce(|| f64::INFINITY, f64::min);
    ChiReport { margin }
}

/// Sup-norm distance between the residual and its `g`-metric rewriting
/// `e^{(k+1)u}[Δ_g u + k|Du|²_g + α'e^{−(k+1)u}L_ρe^{(k−γ)u} + α'σ_{k+1}(h) − e^{−(k+1)u}μ]`,
/// relative to the size of the individual terms.
pub fn scalar_g_form_check(
    u: &ScalarField,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> f64 {
    let n = problem.n();
    let k = problem.k;
    let kf = k as f64;
    let s = problem.grid.scale();
    let grad = u.gradient();
    let hess = u.complex_hessian();
    let r = residual(u, 1.0, problem, coeffs);
    // L_ρ e^{(k−γ)u} by the product rule on the coefficient form.
    let q = kf - problem.gamma;
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for i in 0..u.values().len() {
        let v = u.values()[i];
        let ev = v.exp();
        let g_inv = 1.0 / (ev * s);
        let h = hess.at(i);
        let lap_g = g_inv * h.trace().re;
        let du2_g = g_inv * grad.iter().map(|d| d.values()[i].norm_sqr()).sum::<f64>();
        let w = (q * v).exp();
        let mut lw = 0.0;
        if !coeffs.is_zero() {
            let uu = Mat::from_fn(n, |j, l| grad[j].values()[i] * grad[l].values()[i].conj());
            let second = (*h + uu.scale(q)).scale(q * w);
            lw = coeffs.a.at(i).pair(&second).re + coeffs.c.values()[i] * w;
            for p in 0..n {
                lw += 2.0 * (coeffs.b[p].values()[i] * grad[p].values()[i]).re * q * w;
            }
        }
        let sig = sigma(k + 1, &Endomorphism::conformal(h, v, s));
        let lift = ((kf + 1.0) * v).exp();
        let terms = [
            lap_g,
            kf * du2_g,
            problem.alpha * lw / lift,
            problem.alpha * sig,
            problem.mu.values()[i] / lift,
        ];
        let g_form = lift * (terms[0] + terms[1] + terms[2] + terms[3] - terms[4]);
        scale = scale.max(lift * terms.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        diff = diff.max((g_form - r.values()[i]).abs());
    }
    diff / scale.max(f64::MIN_POSITIVE)
}

/// `σ̂_{k+1}(i∂∂̄u)` at one point.
pub(crate) fn sigma_hat(l: usize, h: &Mat, s: f64) -> f64 {
    sigma_c(l, &h.scale(1.0 / s)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;

    fn flat_problem(n: usize, k: usize, gamma: f64, scale: f64) -> (ProblemSpec, LrhoCoefficients) {
        let g = build_grid(n, 4).unwrap();
        let p = ProblemSpec::new(
            k,
            gamma,
            1.0,
            HermitianField::zeros(&g),
            ScalarField::zeros(&g),
            scale,
        )
        .unwrap();
        let c = extract_lrho(&p.rho);
        (p, c)
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let g = build_grid(2, 4).unwrap();
        let rho = HermitianField::zeros(&g);
        let mu = ScalarField::zeros(&g);
        assert!(matches!(
            ProblemSpec::new(2, 2.0, 1.0, rho.clone(), mu.clone(), 10.0),
            Err(ProblemError::InvalidK { k: 2, n: 2 })
        ));
        assert!(matches!(
            ProblemSpec::new(1, 0.0, 1.0, rho.clone(), mu.clone(), 10.0),
            Err(ProblemError::InvalidGamma(_))
        ));
        assert!(matches!(
            ProblemSpec::new(1, 2.0, 0.0, rho.clone(), mu.clone(), 10.0),
            Err(ProblemError::ZeroAlpha)
        ));
        let shifted = ScalarField::constant(&g, 0.1);
        match ProblemSpec::new(1, 2.0, 1.0, rho, shifted, 10.0) {
            Err(ProblemError::MuNotZeroMean { mean }) => assert!((mean - 0.1).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_constants() {
        let (p, c) = flat_problem(3, 1, 2.0, 100.0);
        let k = compute_constants(&p, &c);
        assert_eq!(k.tau, 0.00390625);
        assert_eq!(k.gamma_prime, 1.0);
        assert_eq!(k.lambda, 0.0);
        // ρ = 0 and μ = 0: both the Λ term and the forcing term are infinite.
        assert_eq!(k.delta, 1.0);
        assert_eq!(k.delta_gate, 1.0);
        assert!((k.theta - 1.0 / (2.0 * k.c1 - 1.0)).abs() < 1e-18);
        assert!(k.c_x >= 1.0);
    }

    #[test]
    fn f_tensor_reduces_to_metric_at_constants() {
        let (p, c) = flat_problem(2, 1, 2.0, 1e3);
        let u = p.initial_guess();
        let f = f_tensor(&u, 1.0, &p, &c);
        let g = 1.0 / (1e3 * p.grid.scale());
        for m in f.values() {
            assert!((*m - Mat::scalar(2, g)).frobenius_norm() < 1e-15 * g.max(1.0));
        }
        let rep = sandwich_check(&u, &f);
        assert!(rep.holds() && (rep.min_ratio - 1.0).abs() < 1e-12);
        assert!((chi_form(&u, 1.0, &p, &c).margin - 1.0).abs() < 1e-12);
    }
}
