//! Residual of the continuity family and its linearization.

use super::lrho::lrho_laplacian_spectrum;
use super::{chi_matrix, sigma_hat, LrhoCoefficients, ProblemSpec};
use crate::geometry::{hessian_from_spectrum, HermitianField, ScalarField, TorusGrid};
use crate::hessian::newton_tensor;
use crate::linalg::{binomial, Mat, ZERO};
use rayon::prelude::*;
use std::sync::Arc;

/// `R(u, t) = (1/k)Δ̂e^{ku} + α'{t L_ρ e^{(k−γ)u} + σ̂_{k+1}(i∂∂̄u)} − tμ`.
pub fn residual(
    u: &ScalarField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ScalarField {
    let hess = u.complex_hessian();
    residual_with_hessian(u, &hess, t, problem, coeffs)
}

pub(crate) fn residual_with_hessian(
    u: &ScalarField,
    hess: &HermitianField,
    t: f64,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ScalarField {
    let grid = &problem.grid;
    let k = problem.k as f64;
    let s = grid.scale();
    let alpha = problem.alpha;
    let e_ku: Vec<f64> = u.values().par_iter().map(|&v| (k * v).exp()).collect();
    let spec = if t != 0.0 && !coeffs.is_zero() {
        let q = k - problem.gamma;
        let w: Vec<f64> = u.values().par_iter().map(|&v| (q * v).exp()).collect();
        lrho_laplacian_spectrum(coeffs.rho(), &w, alpha * t, Some((&e_ku, 1.0 / k)))
    } else {
        let spec_e = grid.forward_real(&e_ku);
        spec_e
            .par_iter()
            .enumerate()
            .map(|(i, &c)| c * (grid.laplacian_symbol(i) / k))
            .collect()
    };
    let linear = grid.inverse(spec);
    let order = problem.k + 1;
    let values = (0..u.values().len())
        .into_par_iter()
        .map(|i| {
            linear[i].re + alpha * sigma_hat(order, hess.at(i), s) - t * problem.mu.values()[i]
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// Frozen-coefficient linearization of the residual at `(u₀, t₀)`.
///
/// `apply` returns the density `L(h)` of
/// `i∂∂̄{e^{ku₀}h ω̂ + α'(k−γ)t₀e^{(k−γ)u₀}h ρ} ∧ ω̂^{n−2} + α'C^k_{n−1} i∂∂̄h ∧ (i∂∂̄u₀)^k ∧ ω̂^{n−k−1}`,
/// and `jacobian` the derivative of the residual itself, `D_u R[h] = n·L(h)`.
pub struct Linearization<'a> {
    grid: Arc<TorusGrid>,
    coeffs: &'a LrhoCoefficients,
    e_ku: Vec<f64>,
    rho_weight: Option<Vec<f64>>,
    /// `α' T_k(ĥ)/s`, paired entrywise with `i∂∂̄h`.
    sigma_weight: Vec<Mat>,
    mean_e_ku: f64,
    e_u: Vec<f64>,
}

impl<'a> Linearization<'a> {
    pub fn new(
        u0: &ScalarField,
        t0: f64,
        problem: &ProblemSpec,
        coeffs: &'a LrhoCoefficients,
    ) -> Self {
        let hess = u0.complex_hessian();
        Self::with_hessian(u0, &hess, t0, problem, coeffs)
    }

    pub(crate) fn with_hessian(
        u0: &ScalarField,
        hess: &HermitianField,
        t0: f64,
        problem: &ProblemSpec,
        coeffs: &'a LrhoCoefficients,
    ) -> Self {
        let k = problem.k as f64;
        let s = problem.grid.scale();
        let e_ku: Vec<f64> = u0.values().par_iter().map(|&v| (k * v).exp()).collect();
        let lin = problem.alpha * (k - problem.gamma) * t0;
        let rho_weight = (lin != 0.0 && !coeffs.is_zero()).then(|| {
            let q = k - problem.gamma;
            u0.values()
                .par_iter()
                .map(|&v| lin * (q * v).exp())
                .collect()
        });
        let sigma_weight = hess
            .values()
            .par_iter()
            .map(|h| {
                newton_tensor(problem.k, &h.transpose().scale(1.0 / s)).scale(problem.alpha / s)
            })
            .collect();
        let mean_e_ku = e_ku.iter().sum::<f64>() / e_ku.len() as f64;
        Linearization {
            grid: problem.grid.clone(),
            coeffs,
            e_ku,
            rho_weight,
            sigma_weight,
            mean_e_ku,
            e_u: u0.values().iter().map(|v| v.exp()).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    /// `mean(e^{ku₀})`, the coefficient of the frozen Laplacian.
    pub fn mean_e_ku(&self) -> f64 {
        self.mean_e_ku
    }

    /// `e^{u₀}` pointwise.
    pub fn e_u(&self) -> &[f64] {
        &self.e_u
    }

    /// `D_u R[h]`.
    pub fn jacobian(&self, h: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        let n = grid.dim();
        let prod: Vec<f64> = h
            .par_iter()
            .zip(self.e_ku.par_iter())
            .map(|(a, b)| a * b)
            .collect();
        let linear_spec = match &self.rho_weight {
            Some(w) => {
                let wh: Vec<f64> = h.par_iter().zip(w.par_iter()).map(|(a, b)| a * b).collect();
                lrho_laplacian_spectrum(self.coeffs.rho(), &wh, 1.0, Some((&prod, 1.0)))
            }
            None => {
                let spec_e = grid.forward_real(&prod);
                spec_e
                    .par_iter()
                    .enumerate()
                    .map(|(i, &c)| c * grid.laplacian_symbol(i))
                    .collect()
            }
        };
        let spec_h = grid.forward_real(h);
        let diag = |p: usize, i: usize| spec_h[i] * grid.dz_symbol(p)[i] * grid.dzbar_symbol(p)[i];
        // The linear part shares a transform with the first diagonal Hessian entry.
        let (mut out, first) = grid.inverse_real_pair(|i| (linear_spec[i], diag(0, i)));
        let weights = &self.sigma_weight;
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o += weights[i][(0, 0)].re * first[i]);
        for p in (1..n).step_by(2) {
            let r = p + 1;
            let (a, b) =
                grid.inverse_real_pair(|i| (diag(p, i), if r < n { diag(r, i) } else { ZERO }));
            out.par_iter_mut().enumerate().for_each(|(i, o)| {
                *o += weights[i][(p, p)].re * a[i];
                if r < n {
                    *o += weights[i][(r, r)].re * b[i];
                }
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let a = grid.dz_symbol(p);
                let b = grid.dzbar_symbol(q);
                let entry = grid.apply_symbol(&spec_h, |i| a[i] * b[i]);
                out.par_iter_mut()
                    .zip(entry.par_iter())
                    .zip(weights.par_iter())
                    .for_each(|((o, &e), w)| *o += 2.0 * (w[(p, q)] * e).re);
            }
        }
        out
    }

    /// `L(h) = D_u R[h] / n`.
    pub fn apply(&self, h: &ScalarField) -> ScalarField {
        let n = self.grid.dim() as f64;
        let v = self
            .jacobian(h.values())
            .into_iter()
            .map(|x| x / n)
            .collect();
        ScalarField::new(self.grid.clone(), v)
    }
}

pub fn linearize_apply(
    u0: &ScalarField,
    t0: f64,
    h: &ScalarField,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ScalarField {
    Linearization::new(u0, t0, problem, coeffs).apply(h)
}

/// `L*(ψ) ω̂ⁿ = e^{ku₀} χ_{(t₀,u₀)} ∧ ω̂^{n−k−1} ∧ i∂∂̄ψ`.
pub fn adjoint_apply(
    u0: &ScalarField,
    t0: f64,
    psi: &ScalarField,
    problem: &ProblemSpec,
    coeffs: &LrhoCoefficients,
) -> ScalarField {
    let hess_u = u0.complex_hessian();
    let hess_psi = hessian_from_spectrum(&problem.grid, &psi.spectrum());
    let k = problem.k as f64;
    let weight = binomial(problem.n() - 1, problem.k);
    let values = (0..u0.values().len())
        .into_par_iter()
        .map(|i| {
            let v = u0.values()[i];
            let q = chi_matrix(v, hess_u.at(i), coeffs.rho().at(i), t0, problem, weight);
            (k * v).exp() * q.pair(hess_psi.at(i)).re
        })
        .collect();
    ScalarField::new(problem.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::operator::extract_lrho;
    use std::f64::consts::PI;

    #[test]
    fn constant_state_solves_t0() {
        let g = build_grid(2, 4).unwrap();
        let p = ProblemSpec::new(
            1,
            2.0,
            1.0,
            HermitianField::zeros(&g),
            ScalarField::zeros(&g),
            50.0,
        )
        .unwrap();
        let c = extract_lrho(&p.rho);
        let r = residual(&p.initial_guess(), 0.0, &p, &c);
        assert!(r.sup_norm() < 1e-12);
    }

    #[test]
    fn constant_state_linearization_is_scaled_laplacian() {
        let g = build_grid(2, 8).unwrap();
        let p = ProblemSpec::new(
            1,
            2.0,
            0.5,
            HermitianField::zeros(&g),
            ScalarField::zeros(&g),
            20.0,
        )
        .unwrap();
        let c = extract_lrho(&p.rho);
        let u = p.initial_guess();
        let h = ScalarField::from_fn(&g, |x| (2.0 * PI * (x[0] + 2.0 * x[3])).cos());
        let lh = linearize_apply(&u, 1.0, &h, &p, &c);
        // e^{u₀} Δ̂ h / n with Δ̂ cos(2πκ·x) = −π²|κ|²/s · cos
        let factor = -20.0 * PI * PI * 5.0 / g.scale() / 2.0;
        for (a, b) in lh.values().iter().zip(h.values()) {
            assert!((a - factor * b).abs() < 1e-9 * factor.abs());
        }
        assert!(linearize_apply(&u, 1.0, &ScalarField::zeros(&g), &p, &c).sup_norm() == 0.0);
    }
}
