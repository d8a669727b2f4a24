//! Integral and pointwise identities used as numerical invariants.

use crate::error::ProblemError;
use crate::geometry::{ComplexField, HermitianField, ScalarField};
use crate::hessian::{maclaurin_bound, sigma_second_contract_c};
use crate::linalg::{binomial, Mat, C64};
use crate::operator::{chi_matrix, residual, LrhoCoefficients, ProblemSpec};
use rayon::prelude::*;
use serde::Serialize;

/// `|∫ R(u, t)|`. Zero for every `u` up to rounding and aliasing.
pub fn stokes_invariant(
    u: &ScalarField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> f64 {
    residual(u, t, problem, coeffs).integrate().abs()
}

/// Both sides of the weighted integration-by-parts identity at `t = 1`:
///
/// `(p−k) ∫ e^{pu} i∂u ∧ ∂̄u ∧ ω̂^{n−k−1} ∧ χ`
/// `= −∫ e^{(p−k)u} μ/n + (p−k)/(p−γ) α' ∫ e^{(p−γ)u} i∂∂̄ρ ∧ ω̂^{n−2}`,
///
/// with `χ = ω̂^k + α'(k−γ)e^{−γu} ρ ∧ ω̂^{k−1} + α' C^k_{n−1}/(k+1) (e^{−u} i∂∂̄u)^k`.
pub fn ibp_identity(
    u: &ScalarField,
    p: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> Result<(f64, f64), ProblemError> {
    if p <= problem.gamma {
        return Err(ProblemError::ExponentTooSmall {
            p,
            gamma: problem.gamma,
        });
    }
    let n = problem.n();
    let nf = n as f64;
    let k = problem.k as f64;
    let q = p - k;
    let weight = binomial(n - 1, problem.k) / (k + 1.0);
    let hess = u.complex_hessian();
    let grad = u.gradient();
    let rho = coeffs.rho();
    let npts = u.values().len();
    let terms: Vec<(f64, f64)> = (0..npts)
        .into_par_iter()
        .map(|i| {
            let v = u.values()[i];
            let chi = chi_matrix(v, hess.at(i), rho.at(i), 1.0, problem, weight);
            let uu = Mat::from_fn(n, |j, l| grad[j].values()[i] * grad[l].values()[i].conj());
            let l = (p * v).exp() * chi.pair(&uu).re;
            let r = -(q * v).exp() * problem.mu.values()[i] / nf
                + q / (p - problem.gamma)
                    * problem.alpha
                    * ((p - problem.gamma) * v).exp()
                    * coeffs.c.values()[i]
                    / nf;
            (l, r)
        })
        .collect();
    // Sequential sums keep the result independent of the thread count.
    let (lhs, rhs) = terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let npts = npts as f64;
    Ok((q * lhs / npts, rhs / npts))
}

/// `|lhs − rhs| / (|lhs| + |rhs| + 1)`.
pub fn ibp_mismatch(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1.0)
}

/// Data of the original `k = 1` equation
/// `i∂∂̄(e^u ω̂ − α' e^{−u} ρ) ∧ ω̂^{n−2} + α'(i∂∂̄u)² ∧ ω̂^{n−2} + μ ω̂ⁿ = 0`
/// equivalent to a scalar-form problem with `k = 1`, `γ = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OriginalConvention {
    pub alpha: f64,
    /// Factor taking the scalar-form `ρ` to the original one.
    pub rho_factor: f64,
    /// Factor taking the scalar-form `μ` to the original one.
    pub mu_factor: f64,
}

impl OriginalConvention {
    /// Matching the two forms term by term gives `α'₀ = (n−1)α'/2`,
    /// `ρ₀ = −2ρ/(n−1)` and `μ₀ = −μ/n`.
    pub fn from_scalar(problem: &ProblemSpec) -> Self {
        let n = problem.n() as f64;
        OriginalConvention {
            alpha: (n - 1.0) * problem.alpha / 2.0,
            rho_factor: -2.0 / (n - 1.0),
            mu_factor: -1.0 / n,
        }
    }
}

/// Sup-norm relative mismatch between `σ̂₂(e^u ω̂ + α' e^{−u} ρ + 2α' i∂∂̄u)` and
/// its expansion at a solution of the original `k = 1` equation,
///
/// `n(n−1)/2 e^{2u} − 2(n−1)α' e^u |Du|² − 2n(n−1)α' μ`
/// `+ 2(n−1)α'² e^{−u}(a^{jk̄}u_j u_k̄ − b^i u_i − b^ī u_ī + c)`
/// `+ (n−1) σ̂₁(α'ρ) + e^{−2u} σ̂₂(α'ρ)`,
///
/// with `α', ρ, μ` and `a, b, c` in the original convention.
pub fn sigma2_rewrite_check(
    u: &ScalarField,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> Result<f64, ProblemError> {
    if problem.k != 1 || problem.gamma != 2.0 {
        return Err(ProblemError::RequiresStandardCase {
            k: problem.k,
            gamma: problem.gamma,
        });
    }
    let n = problem.n();
    let nf = n as f64;
    let s = problem.grid.scale();
    let conv = OriginalConvention::from_scalar(problem);
    let alpha = conv.alpha;
    let rf = conv.rho_factor;
    let hess = u.complex_hessian();
    let grad = u.gradient();
    let rho = coeffs.rho();
    let (num, den) = (0..u.values().len())
        .into_par_iter()
        .map(|i| {
            let v = u.values()[i];
            let ev = v.exp();
            let h = hess.at(i);
            let r0 = rho.at(i).scale(rf);
            let form = Mat::scalar(n, ev * s) + r0.scale(alpha / ev) + h.scale(2.0 * alpha);
            let lhs = sigma_hat2(&form, s);
            let du: Vec<C64> = grad.iter().map(|d| d.values()[i]).collect();
            let du2 = du.iter().map(|z| z.norm_sqr()).sum::<f64>() / s;
            let uu = Mat::from_fn(n, |j, l| du[j] * du[l].conj());
            let mut drift = coeffs.a.at(i).pair(&uu).re + coeffs.c.values()[i];
            for (p, z) in du.iter().enumerate() {
                drift -= 2.0 * (coeffs.b[p].values()[i] * z).re;
            }
            drift *= rf;
            let mu0 = conv.mu_factor * problem.mu.values()[i];
            let ar = r0.scale(alpha);
            let rhs = nf * (nf - 1.0) / 2.0 * ev * ev
                - 2.0 * (nf - 1.0) * alpha * ev * du2
                - 2.0 * nf * (nf - 1.0) * alpha * mu0
                + 2.0 * (nf - 1.0) * alpha * alpha / ev * drift
                + (nf - 1.0) * ar.trace().re / s
                + sigma_hat2(&ar, s) / (ev * ev);
            ((lhs - rhs).abs(), lhs.abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(num / den.max(f64::MIN_POSITIVE))
}

fn sigma_hat2(m: &Mat, s: f64) -> f64 {
    let a = m.scale(1.0 / s);
    let tr = a.trace();
    ((tr * tr - (a * a).trace()) * 0.5).re
}

/// Largest deviation of the Chern torsion and curvature of `g = e^u ĝ`, computed
/// from their definitions, from the closed forms
/// `T^λ_{kj} = u_k δ^λ_j − u_j δ^λ_k` and `R_{k̄j}{}^p{}_i = −u_{k̄j} δ^p_i`.
///
/// The definitions are evaluated with a general pointwise inverse of `g` and
/// spectral derivatives of `e^u`, so they share no code path with the closed forms.
pub fn torsion_curvature_check(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let n = grid.dim();
    let s = grid.scale();
    let npts = grid.len();
    let eu = u.map(f64::exp);
    // ∂_p g_{m̄q} = ∂_p(e^u) s δ_{mq}; store the full tensor to keep the definition generic.
    let deu: Vec<ComplexField> = (0..n).map(|p| eu.partial_z(p)).collect();
    let metric: Vec<Mat> = eu.values().iter().map(|&e| Mat::scalar(n, e * s)).collect();
    let inverse: Vec<Mat> = metric
        .iter()
        .map(|g| g.inverse().expect("metric is positive"))
        .collect();
    let dg = |p: usize, i: usize| -> Mat { Mat::scalar(n, 1.0).scale_c(deu[p].values()[i] * s) };
    let grad = u.gradient();
    let hess = u.complex_hessian();

    let mut worst = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            for j in 0..n {
                for i in 0..npts {
                    // T^j_{pq} = g^{j m̄}(∂_p g_{m̄q} − ∂_q g_{m̄p}); matrices are indexed [m][·].
                    let gi = &inverse[i];
                    let (a, b) = (dg(p, i), dg(q, i));
                    let t: C64 = (0..n).map(|m| gi[(j, m)] * (a[(m, q)] - b[(m, p)])).sum();
                    let want =
                        grad[p].values()[i] * delta(j, q) - grad[q].values()[i] * delta(j, p);
                    worst = worst.max((t - want).norm());
                }
            }
        }
    }

    // Γ^j_{qp} = g^{j m̄} ∂_q g_{m̄p}, then R_{k̄q}{}^j{}_p = −∂_k̄ Γ^j_{qp}.
    for q in 0..n {
        for p in 0..n {
            for j in 0..n {
                let gamma = ComplexField::new(
                    grid.clone(),
                    (0..npts)
                        .map(|i| {
                            let d = dg(q, i);
                            (0..n).map(|m| inverse[i][(j, m)] * d[(m, p)]).sum()
                        })
                        .collect(),
                );
                for kb in 0..n {
                    let r = gamma.partial_zbar(kb);
                    for i in 0..npts {
                        let want = -hess.at(i)[(q, kb)] * delta(j, p);
                        worst = worst.max((-r.values()[i] - want).norm());
                    }
                }
            }
        }
    }
    worst
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Counts of a pointwise inequality check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub evaluations: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over points with `rhs > 0`.
    pub max_ratio: f64,
}

/// Third-order contraction bound
/// `|g^{jī} σ_ℓ^{pq̄,rs̄} ∇_j u_{q̄p} ∇_ī u_{s̄r}| ≤ C^{ℓ−2}_{n−2} |∇∇̄u|_g^{ℓ−2} |∇∇̄∇u|²_g`
/// at every point for `ℓ = 2..=n`, with `∇` the Chern connection of `g = e^u ĝ`.
pub fn third_order_contraction_check(u: &ScalarField) -> InequalityReport {
    let grid = u.grid();
    let n = grid.dim();
    let s = grid.scale();
    let hess = u.complex_hessian();
    let grad = u.gradient();
    let dh: Vec<Vec<Mat>> = (0..n).map(|j| partial_z_matrix(&hess, j)).collect();
    let results: Vec<(usize, usize, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let lam = u.values()[i].exp() * s;
            let h = hess.at(i);
            // ∇_j u_{q̄p} = ∂_j u_{q̄p} − u_j u_{q̄p}, stored as B_j[p][q].
            let b: Vec<Mat> = (0..n)
                .map(|j| dh[j][i] - h.scale_c(grad[j].values()[i]))
                .collect();
            let third = b.iter().map(Mat::frobenius_norm_sqr).sum::<f64>() / lam.powi(3);
            let second = h.frobenius_norm() / lam;
            let x = h.scale(1.0 / lam);
            let mut evals = 0;
            let mut bad = 0;
            let mut worst = 0.0f64;
            for l in 2..=n {
                let lhs = b
                    .iter()
                    .map(|bj| sigma_second_contract_c(l, &x, bj, &bj.adjoint()))
                    .sum::<C64>()
                    .norm()
                    / lam.powi(3);
                let rhs = binomial(n - 2, l - 2) * second.powi(l as i32 - 2) * third;
                evals += 1;
                if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    bad += 1;
                }
                if rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                }
            }
            (evals, bad, worst)
        })
        .collect();
    fold_reports(results)
}

/// Newton–Maclaurin bound `|σ_ℓ(λ)| ≤ C^ℓ_n n^{−ℓ/2} |λ|^ℓ` at every point, for the
/// eigenvalues `λ` of `e^{−u} ĝ^{-1} i∂∂̄u` and `ℓ = 1..=n`.
pub fn maclaurin_field_check(u: &ScalarField) -> InequalityReport {
    let grid = u.grid();
    let n = grid.dim();
    let s = grid.scale();
    let hess = u.complex_hessian();
    let results: Vec<(usize, usize, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let lam: Vec<f64> = hess
                .at(i)
                .scale((-u.values()[i]).exp() / s)
                .hermitian_eigenvalues();
            let mut bad = 0;
            let mut worst = 0.0f64;
            for l in 1..=n {
                let (lhs, rhs) = maclaurin_bound(l, n, &lam);
                if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    bad += 1;
                }
                if rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                }
            }
            (n, bad, worst)
        })
        .collect();
    fold_reports(results)
}

fn fold_reports(results: Vec<(usize, usize, f64)>) -> InequalityReport {
    results.into_iter().fold(
        InequalityReport {
            evaluations: 0,
            violations: 0,
            max_ratio: 0.0,
        },
        |acc, (e, b, w)| InequalityReport {
            evaluations: acc.evaluations + e,
            violations: acc.violations + b,
            max_ratio: acc.max_ratio.max(w),
        },
    )
}

/// `∂_j` of every entry of a Hermitian field.
fn partial_z_matrix(field: &HermitianField, j: usize) -> Vec<Mat> {
    let grid = field.grid();
    let n = grid.dim();
    let npts = grid.len();
    let mut out = vec![Mat::zeros(n); npts];
    for p in 0..n {
        for q in 0..n {
            let entry = ComplexField::new(
                grid.clone(),
                field.values().iter().map(|m| m[(p, q)]).collect(),
            );
            let d = entry.partial_z(j);
            for (o, v) in out.iter_mut().zip(d.values()) {
                o[(p, q)] = *v;
            }
        }
    }
    out
}
