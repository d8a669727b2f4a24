//! Elementary symmetric polynomials of Hermitian endomorphisms and their
//! derivatives.
//!
//! An endomorphism `h^i_j = g^{ik̄} H_{k̄j}` is built from a matrix field entry
//! `H[j][k] = H_{k̄j}`; for `g = c·δ` this is `h = Hᵀ / c`.

use crate::error::Margin;
use crate::geometry::{HermitianField, ScalarField};
use crate::linalg::{binomial, Mat, C64, ONE, ZERO};
use crate::operator::{AdmissibilityConstants, ProblemSpec};
use rayon::prelude::*;
use serde::Serialize;

/// Which metric raised the index of `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MetricTag {
    /// Background metric `ĝ = s·δ`.
    Background,
    /// Conformal metric `g = e^u ĝ`.
    Conformal,
}

#[derive(Clone, Copy, Debug)]
pub struct Endomorphism {
    pub matrix: Mat,
    pub metric: MetricTag,
}

impl Endomorphism {
    /// `ĥ = Hᵀ/s`.
    pub fn background(h: &Mat, s: f64) -> Self {
        Endomorphism {
            matrix: h.transpose().scale(1.0 / s),
            metric: MetricTag::Background,
        }
    }

    /// `h = Hᵀ/(e^u s)`.
    pub fn conformal(h: &Mat, u: f64, s: f64) -> Self {
        Endomorphism {
            matrix: h.transpose().scale(1.0 / (u.exp() * s)),
            metric: MetricTag::Conformal,
        }
    }

    pub fn from_matrix(matrix: Mat, metric: MetricTag) -> Self {
        Endomorphism { matrix, metric }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `σ_ℓ` together with its derivative tensor `T_{ℓ−1}`.
#[derive(Clone, Copy, Debug)]
pub struct SigmaJet {
    pub value: f64,
    pub first: Mat,
    pub metric_used: MetricTag,
}

pub fn sigma_jet(l: usize, h: &Endomorphism) -> SigmaJet {
    SigmaJet {
        value: sigma(l, h),
        first: sigma_first(l, h),
        metric_used: h.metric,
    }
}

/// `σ_ℓ(h)` as the sum of principal `ℓ × ℓ` minors; real for Hermitian-similar `h`.
pub fn sigma(l: usize, h: &Endomorphism) -> f64 {
    sigma_c(l, &h.matrix).re
}

/// Complex-valued `σ_ℓ` of an arbitrary matrix.
pub fn sigma_c(l: usize, m: &Mat) -> C64 {
    let n = m.dim();
    assert!(l <= n, "sigma order {l} exceeds dimension {n}");
    match l {
        0 => ONE,
        1 => m.trace(),
        _ if l == n => m.det(),
        _ => {
            let mut total = ZERO;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != l {
                    continue;
                }
                let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                total += Mat::from_fn(l, |i, j| m[(idx[i], idx[j])]).det();
            }
            total
        }
    }
}

/// `σ_ℓ` of a real vector.
pub fn sigma_vec(l: usize, lam: &[f64]) -> f64 {
    let mut e = vec![0.0; l + 1];
    e[0] = 1.0;
    for &x in lam {
        for j in (1..=l.min(lam.len())).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e[l]
}

/// Newton transformation `T_m(h) = Σ_{i=0}^{m} (−1)^i σ_{m−i}(h) h^i`.
pub fn newton_tensor(m: usize, h: &Mat) -> Mat {
    let n = h.dim();
    let mut out = Mat::zeros(n);
    let mut power = Mat::identity(n);
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out += power.scale_c(sigma_c(m - i, h) * sign);
        power = power * *h;
    }
    out
}

/// `∂σ_ℓ/∂h = T_{ℓ−1}(h)`, so `δσ_ℓ = tr(T_{ℓ−1} δh)`.
pub fn sigma_first(l: usize, h: &Endomorphism) -> Mat {
    assert!(l >= 1 && l <= h.dim(), "sigma_first needs 1 <= l <= n");
    newton_tensor(l - 1, &h.matrix)
}

/// Second variation `d²σ_ℓ(h)[B, C]`, symmetric bilinear in `(B, C)`.
///
/// Differentiates `tr(T_{ℓ−1}(h + tC) B)` at `t = 0` term by term, which stays
/// regular at repeated eigenvalues.
pub fn sigma_second_contract(l: usize, h: &Endomorphism, b: &Mat, c: &Mat) -> f64 {
    sigma_second_contract_c(l, &h.matrix, b, c).re
}

pub fn sigma_second_contract_c(l: usize, h: &Mat, b: &Mat, c: &Mat) -> C64 {
    let n = h.dim();
    assert!(l >= 2 && l <= n, "sigma_second_contract needs 2 <= l <= n");
    let m = l - 1;
    let mut powers = vec![Mat::identity(n)];
    for i in 1..=m {
        powers.push(powers[i - 1] * *h);
    }
    let mut d = Mat::zeros(n);
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let order = m - i;
        if order >= 1 {
            let dsig = (newton_tensor(order - 1, h) * *c).trace();
            d += powers[i].scale_c(dsig * sign);
        }
        if i >= 1 {
            let sig = sigma_c(order, h);
            let mut sum = Mat::zeros(n);
            for a in 0..i {
                sum += powers[a] * *c * powers[i - 1 - a];
            }
            d += sum.scale_c(sig * sign);
        }
    }
    (d * *b).trace()
}

/// Newton–Maclaurin bound `|σ_ℓ(λ)| ≤ C^ℓ_m m^{−ℓ/2} |λ|^ℓ`; returns `(lhs, rhs)`.
pub fn maclaurin_bound(l: usize, m: usize, lam: &[f64]) -> (f64, f64) {
    assert!(l >= 1 && l <= m && m == lam.len());
    let norm = lam.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lhs = sigma_vec(l, lam).abs();
    let rhs = binomial(m, l) / (m as f64).powf(l as f64 / 2.0) * norm.powi(l as i32);
    (lhs, rhs)
}

/// Signed distances to the boundary of the admissible set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UpsilonMargins {
    /// `δ_gate − max e^{−γu}`, the exponential margin used for admissibility.
    pub m1: f64,
    /// `τ − max |α'| |e^{−u} i∂∂̄u|^k_ω̂`.
    pub m2: f64,
    /// `δ − max e^{−γu}` with the full three-term `δ`.
    pub m1_full_delta: f64,
}

impl UpsilonMargins {
    pub fn admissible(&self) -> bool {
        self.m1 > 0.0 && self.m2 > 0.0
    }

    /// First violated margin, if any.
    pub fn violated(&self) -> Option<Margin> {
        if self.m1 <= 0.0 {
            Some(Margin::Exponential)
        } else if self.m2 <= 0.0 {
            Some(Margin::Hessian)
        } else {
            None
        }
    }
}

/// Margins of `u` relative to the admissible set; `hess` must be `i∂∂̄u`.
pub fn upsilon_margin(
    u: &ScalarField,
    hess: &HermitianField,
    problem: &ProblemSpec,
    constants: &AdmissibilityConstants,
) -> UpsilonMargins {
    let s = u.grid().scale();
    let gamma = problem.gamma;
    let k = problem.k as i32;
    let alpha = problem.alpha.abs();
    let (max_exp, max_hess) = u
        .values()
        .par_iter()
        .zip(hess.values().par_iter())
        .map(|(&v, h)| {
            let e = (-gamma * v).exp();
            let q = alpha * ((-v).exp() * h.frobenius_norm() / s).powi(k);
            (e, q)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    UpsilonMargins {
        m1: constants.delta_gate - max_exp,
        m2: constants.tau - max_hess,
        m1_full_delta: constants.delta - max_exp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn endo(m: Mat) -> Endomorphism {
        Endomorphism::from_matrix(m, MetricTag::Background)
    }

    #[test]
    fn sigma_of_diagonal() {
        let h = endo(Mat::from_real_diag(&[1.0, 2.0, 3.0]));
        assert_eq!(sigma(0, &h), 1.0);
        assert_eq!(sigma(1, &h), 6.0);
        assert_eq!(sigma(2, &h), 11.0);
        assert_eq!(sigma(3, &h), 6.0);
        assert_eq!(sigma(3, &endo(Mat::identity(3))), 1.0);
        assert_eq!(sigma_vec(2, &[1.0, 2.0, 3.0]), 11.0);
    }

    #[test]
    fn first_derivative_at_diagonal() {
        let h = endo(Mat::from_real_diag(&[1.0, 2.0, 3.0]));
        let t = sigma_first(2, &h);
        // σ₁(λ|p): 2+3, 1+3, 1+2
        let expect = Mat::from_real_diag(&[5.0, 4.0, 3.0]);
        assert!((t - expect).frobenius_norm() < 1e-14);
        assert!((sigma_first(1, &h) - Mat::identity(3)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn second_derivative_of_sigma2_along_identity() {
        for n in 2..=3 {
            let h = endo(Mat::from_fn(n, |i, j| C64::new((i + j) as f64, 0.0)));
            let id = Mat::identity(n);
            let v = sigma_second_contract(2, &h, &id, &id);
            assert!((v - (n * (n - 1)) as f64).abs() < 1e-12);
            assert_eq!(sigma_second_contract(2, &h, &Mat::zeros(n), &id), 0.0);
        }
    }

    #[test]
    fn maclaurin_example() {
        let (lhs, rhs) = maclaurin_bound(2, 3, &[1.0, 2.0, 3.0]);
        assert_eq!(lhs, 11.0);
        assert!((rhs - 14.0).abs() < 1e-12);
        let (lhs, rhs) = maclaurin_bound(2, 3, &[0.7, 0.7, 0.7]);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn newton_tensor_top_order_is_adjugate() {
        // T_{n−1}(h) = adj(h), the derivative of det.
        let m = Mat::from_fn(3, |i, j| C64::new(1.0 + (i * 2 + j) as f64, 0.1 * j as f64))
            + Mat::scalar(3, 2.0);
        let adj = m.inverse().unwrap().scale_c(m.det());
        assert!((newton_tensor(2, &m) - adj).frobenius_norm() < 1e-10);
    }
}
