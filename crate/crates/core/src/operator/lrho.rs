//! The second-order operator `L_ρ f ω̂ⁿ = n i∂∂̄(fρ) ∧ ω̂^{n−2}`.
//!
//! Two evaluations are provided. The coefficient form
//! `L_ρ f = a^{jk̄} f_{jk̄} + b^i f_i + b^{ī} f_{ī} + c f` extracts `(a, b, c)`
//! pointwise from wedge densities. The divergence form applies the constant
//! kernel `n·D(E_ml/s, E_jk/s, I, …)` to `∂_m ∂_{l̄}(f ρ_jk)` in Fourier space;
//! it is exactly mean-zero on the grid and is what the residual uses.

use crate::geometry::{wedge_density_at, ComplexField, HermitianField, ScalarField, TorusGrid};
use crate::linalg::{Mat, C64, ZERO};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct LrhoCoefficients {
    /// `a[j][k] = a^{jk̄}`.
    pub a: HermitianField,
    /// `b[i] = b^i`.
    pub b: Vec<ComplexField>,
    pub c: ScalarField,
    rho: HermitianField,
    zero: bool,
}

impl LrhoCoefficients {
    pub fn rho(&self) -> &HermitianField {
        &self.rho
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.rho.grid()
    }

    /// True when `ρ ≡ 0`, so that `L_ρ` vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// `L_ρ f` from the coefficients and spectral derivatives of `f`.
    pub fn apply_coefficients(&self, f: &ScalarField) -> ScalarField {
        let n = self.grid().dim();
        let grad = f.gradient();
        let hess = f.complex_hessian();
        let values = (0..f.values().len())
            .into_par_iter()
            .map(|i| {
                let mut v = self.a.at(i).pair(hess.at(i)).re + self.c.values()[i] * f.values()[i];
                for p in 0..n {
                    v += 2.0 * (self.b[p].values()[i] * grad[p].values()[i]).re;
                }
                v
            })
            .collect();
        ScalarField::new(self.grid().clone(), values)
    }

    /// `L_ρ f` in divergence form.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        if self.zero {
            return ScalarField::zeros(self.grid());
        }
        let spec = lrho_spectrum(&self.rho, f.values());
        let out = self.grid().inverse(spec);
        ScalarField::new(self.grid().clone(), out.into_iter().map(|c| c.re).collect())
    }
}

/// Spectrum of `L_ρ f` (divergence form) for pointwise values `f`.
pub(crate) fn lrho_spectrum(rho: &HermitianField, f: &[f64]) -> Vec<C64> {
    lrho_laplacian_spectrum(rho, f, 1.0, None)
}

/// Spectrum of `scale·L_ρ f + c·Δ̂g` for `extra = Some((g, c))`.
///
/// Off-diagonal products come in conjugate pairs and the real diagonal ones
/// share transforms two at a time.
pub(crate) fn lrho_laplacian_spectrum(
    rho: &HermitianField,
    f: &[f64],
    scale: f64,
    extra: Option<(&[f64], f64)>,
) -> Vec<C64> {
    let grid = rho.grid();
    let n = grid.dim();
    let s = grid.scale();
    let norm = scale / (s * s * (n as f64 - 1.0));
    let vals = rho.values();

    let mut reals: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            vals.par_iter()
                .zip(f.par_iter())
                .map(|(m, &v)| m[(p, p)].re * v)
                .collect()
        })
        .collect();
    if let Some((g, _)) = extra {
        reals.push(g.to_vec());
    }
    let mut real_specs = Vec::with_capacity(reals.len());
    for pair in reals.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = grid.forward_real_pair(&pair[0], &pair[1]);
            real_specs.push(a);
            real_specs.push(b);
        } else {
            real_specs.push(grid.forward_real(&pair[0]));
        }
    }
    let offdiag: Vec<(usize, usize, Vec<C64>)> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .map(|(j, k)| {
            let prod: Vec<C64> = vals
                .par_iter()
                .zip(f.par_iter())
                .map(|(m, &v)| m[(j, k)] * v)
                .collect();
            (j, k, grid.forward(&prod))
        })
        .collect();

    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let lap = grid.laplacian_symbol(i);
            let mut acc = ZERO;
            for p in 0..n {
                let sym = -grid.dz_symbol(p)[i] * grid.dzbar_symbol(p)[i] + lap * s;
                acc += real_specs[p][i] * sym;
            }
            let ni = grid.negated_index(i);
            for (j, k, spec) in &offdiag {
                let (j, k) = (*j, *k);
                acc -= grid.dz_symbol(k)[i] * grid.dzbar_symbol(j)[i] * spec[i];
                acc -= grid.dz_symbol(j)[i] * grid.dzbar_symbol(k)[i] * spec[ni].conj();
            }
            acc *= norm;
            if let Some((_, c)) = extra {
                acc += real_specs[n][i] * (lap * c);
            }
            acc
        })
        .collect()
}

/// Coefficient extraction by wedge densities against elementary matrices.
///
/// Every coefficient is linear in `ρ` through the constant kernel
/// `K[jk][pq] = n·D(E_jk/s, E_pq/s, I, …)`, so `b` and `c` are single
/// Fourier multipliers per entry of `ρ`.
pub fn extract_lrho(rho: &HermitianField) -> LrhoCoefficients {
    let grid = rho.grid().clone();
    let n = grid.dim();
    let s = grid.scale();
    let nf = n as f64;
    let zero = rho.is_zero();
    let units: Vec<Mat> = (0..n * n).map(|e| Mat::unit(n, e / n, e % n)).collect();
    let kernel: Vec<Vec<C64>> = units
        .iter()
        .map(|x| {
            units
                .iter()
                .map(|y| wedge_density_at(&[*x, *y], n - 2, s) * nf)
                .collect()
        })
        .collect();

    let a: Vec<Mat> = rho
        .values()
        .par_iter()
        .map(|r| {
            Mat::from_fn(n, |j, k| {
                (0..n * n)
                    .map(|e| kernel[j * n + k][e] * r[(e / n, e % n)])
                    .sum()
            })
        })
        .collect();

    let spectra: Vec<Vec<C64>> = (0..n * n)
        .map(|e| {
            let comp: Vec<C64> = rho.values().par_iter().map(|m| m[(e / n, e % n)]).collect();
            grid.forward(&comp)
        })
        .collect();
    // b^m = Σ_l K[ml][pq] ∂_l̄ ρ_pq
    let b: Vec<ComplexField> = (0..n)
        .map(|m| {
            let mut acc = vec![ZERO; grid.len()];
            for (e, spec) in spectra.iter().enumerate() {
                let part = grid.apply_symbol(spec, |i| {
                    (0..n)
                        .map(|l| kernel[m * n + l][e] * grid.dzbar_symbol(l)[i])
                        .sum()
                });
                acc.par_iter_mut()
                    .zip(part.par_iter())
                    .for_each(|(x, y)| *x += y);
            }
            ComplexField::new(grid.clone(), acc)
        })
        .collect();
    // c = Σ_{ml} K[ml][pq] ∂_m ∂_l̄ ρ_pq
    let mut c = vec![0.0; grid.len()];
    for (e, spec) in spectra.iter().enumerate() {
        let part = grid.apply_symbol(spec, |i| {
            let mut sym = ZERO;
            for m in 0..n {
                for l in 0..n {
                    sym += kernel[m * n + l][e] * grid.dz_symbol(m)[i] * grid.dzbar_symbol(l)[i];
                }
            }
            sym
        });
        c.par_iter_mut()
            .zip(part.par_iter())
            .for_each(|(x, y)| *x += y.re);
    }

    LrhoCoefficients {
        a: HermitianField::new(grid.clone(), a),
        b,
        c: ScalarField::new(grid, c),
        rho: rho.clone(),
        zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Complex, MatrixTerm};

    fn sample_rho(grid: &Arc<TorusGrid>) -> HermitianField {
        let n = grid.dim();
        let mut c = vec![vec![Complex(0.0, 0.0); n]; n];
        c[0][0] = Complex(0.2, 0.0);
        c[0][1] = Complex(0.05, 0.1);
        c[1][0] = Complex(0.05, -0.1);
        let mut wv = vec![0; 2 * n];
        wv[1] = 1;
        let mut neg = wv.clone();
        neg[1] = -1;
        let conj: Vec<Vec<Complex>> = (0..n)
            .map(|j| (0..n).map(|k| Complex(c[k][j].0, -c[k][j].1)).collect())
            .collect();
        HermitianField::from_series(
            grid,
            &[
                MatrixTerm {
                    wavevector: vec![0; 2 * n],
                    coefficient: c.clone(),
                },
                MatrixTerm {
                    wavevector: wv,
                    coefficient: c,
                },
                MatrixTerm {
                    wavevector: neg,
                    coefficient: conj,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_rho_has_zero_coefficients() {
        let g = build_grid(2, 4).unwrap();
        let co = extract_lrho(&HermitianField::zeros(&g));
        assert!(co.is_zero());
        assert_eq!(co.a.sup_norm(), 0.0);
        assert_eq!(co.c.sup_norm(), 0.0);
        assert!(co.b.iter().all(|b| b.sup_norm() == 0.0));
    }

    #[test]
    fn constant_rho_has_only_second_order_part() {
        let g = build_grid(3, 4).unwrap();
        let r = Mat::from_fn(3, |i, j| {
            if i == j {
                C64::new(1.0 + i as f64, 0.0)
            } else {
                C64::new(0.1, 0.2 * (j as f64 - i as f64))
            }
        });
        let co = extract_lrho(&HermitianField::constant(&g, r.hermitian_part()));
        assert!(co.c.sup_norm() < 1e-12);
        assert!(co.b.iter().all(|b| b.sup_norm() < 1e-12));
        assert!(co.a.max_hermitian_defect() < 1e-12);
    }

    #[test]
    fn coefficient_and_divergence_forms_agree() {
        let g = build_grid(2, 12).unwrap();
        let rho = sample_rho(&g);
        let co = extract_lrho(&rho);
        let f = ScalarField::from_fn(&g, |x| {
            (2.0 * std::f64::consts::PI * (x[0] + x[3])).cos()
                + 0.3 * (2.0 * std::f64::consts::PI * x[2]).sin()
        });
        let div = co.apply(&f);
        let coef = co.apply_coefficients(&f);
        let err = div.zip_map(&coef, |a, b| a - b).sup_norm();
        assert!(err < 1e-9 * (1.0 + div.sup_norm()), "err {err}");
        assert!(div.integrate().abs() < 1e-13);
    }
}
