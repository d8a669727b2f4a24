//! Right-preconditioned restarted GMRES for the bordered Newton system
//!
//! ```text
//! [ J   ê ] [h]   [r]
//! [ cᵀ  0 ] [λ] = [0]
//! ```
//!
//! with `ê = e^{u₀}/∫e^{u₀}` and `cᵀh = ∫h e^{u₀} / ∫e^{u₀}`. Since `∫J h = 0`
//! and `∫ê = 1`, the multiplier is `λ = ∫r` and it vanishes for compatible `r`.
//!
//! The system is posed on the resolved modes (no axis at the Nyquist frequency):
//! `r`, `ê` and `J h` are projected there and the preconditioner never produces
//! unresolved content. Off-diagonal symbols `∂_p∂_q̄` are not Hermitian-symmetric
//! at Nyquist frequencies, and keeping those modes makes GMRES stagnate.

use super::NewtonConfig;
use crate::error::SolverError;
use crate::operator::Linearization;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct KrylovSolution {
    pub h: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` recomputed from scratch after the solve.
    pub rel_residual: f64,
    /// `|∫ h e^{u₀}| / ∫ e^{u₀}`.
    pub constraint: f64,
}

struct Bordered<'a, 'b> {
    lin: &'a Linearization<'b>,
    e_hat: Vec<f64>,
    c_row: Vec<f64>,
    sym_inv: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

impl<'a, 'b> Bordered<'a, 'b> {
    fn new(lin: &'a Linearization<'b>) -> Self {
        let e_u = lin.e_u();
        let npts = e_u.len() as f64;
        let mass = mean(e_u);
        let grid = lin.grid();
        let e_hat = grid.project_resolved(&e_u.iter().map(|v| v / mass).collect::<Vec<_>>());
        let c_row = e_u.iter().map(|v| v / (mass * npts)).collect();
        let scale = lin.mean_e_ku();
        let sym_inv = (0..grid.len())
            .map(|i| {
                let s = grid.laplacian_symbol(i);
                if s == 0.0 || !grid.is_resolved(i) {
                    0.0
                } else {
                    1.0 / (scale * s)
                }
            })
            .collect();
        Bordered {
            lin,
            e_hat,
            c_row,
            sym_inv,
        }
    }

    fn len(&self) -> usize {
        self.e_hat.len() + 1
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let npts = self.e_hat.len();
        let (h, lam) = (&x[..npts], x[npts]);
        let mut out = self.lin.grid().project_resolved(&self.lin.jacobian(h));
        out.par_iter_mut()
            .zip(self.e_hat.par_iter())
            .for_each(|(o, e)| *o += lam * e);
        out.push(dot(&self.c_row, h));
        out
    }

    /// Exact inverse of the bordered operator with `J` replaced by `mean(e^{ku₀}) Δ̂`.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let npts = self.e_hat.len();
        let (res, target) = (&r[..npts], r[npts]);
        let lam = mean(res);
        let centered: Vec<f64> = res
            .iter()
            .zip(&self.e_hat)
            .map(|(a, e)| a - lam * e)
            .collect();
        let grid = self.lin.grid();
        let spec = grid.forward_real(&centered);
        let solved = grid.apply_symbol(&spec, |i| self.sym_inv[i].into());
        let mut h: Vec<f64> = solved.into_iter().map(|c| c.re).collect();
        let shift = target - dot(&self.c_row, &h);
        h.iter_mut().for_each(|v| *v += shift);
        h.push(lam);
        h
    }
}

/// Solve `J h + λ ê = rhs`, `∫ h e^{u₀} = 0`.
pub fn krylov_bordered(
    lin: &Linearization,
    rhs: &[f64],
    cfg: &NewtonConfig,
) -> Result<KrylovSolution, SolverError> {
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let compat = mean(rhs);
    if compat.abs() > cfg.compat_tol * (1.0 + scale) {
        return Err(SolverError::IncompatibleRhs { mean: compat });
    }
    let op = Bordered::new(lin);
    let mut b = lin.grid().project_resolved(rhs);
    b.push(0.0);
    let (x, iterations) = gmres(&op, &b, cfg);
    let ax = op.apply(&x);
    let bnorm = norm(&b).max(f64::MIN_POSITIVE);
    let diff: Vec<f64> = ax.iter().zip(&b).map(|(a, c)| a - c).collect();
    let rel_residual = norm(&diff) / bnorm;
    if rel_residual > cfg.krylov_accept.max(10.0 * cfg.krylov_tol) {
        return Err(SolverError::KrylovStall {
            iters: iterations,
            rel_residual,
        });
    }
    let npts = rhs.len();
    let constraint = (dot(&op.c_row, &x[..npts])).abs();
    let lambda = x[npts];
    let mut h = x;
    h.truncate(npts);
    Ok(KrylovSolution {
        h,
        lambda,
        iterations,
        rel_residual,
        constraint,
    })
}

/// Returns the iterate and the number of Arnoldi steps. Stops early when a
/// restart cycle fails to halve the true residual, which happens once the
/// right-hand side is at the rounding floor of the operator.
fn gmres(op: &Bordered, b: &[f64], cfg: &NewtonConfig) -> (Vec<f64>, usize) {
    let dim = op.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; dim];
    if bnorm == 0.0 {
        return (x, 0);
    }
    let m = cfg.krylov_restart.max(1);
    let mut total = 0usize;
    let mut previous = f64::INFINITY;
    while total < cfg.krylov_max {
        let ax = op.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= cfg.krylov_tol || rel > 0.5 * previous {
            break;
        }
        previous = rel;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            if total >= cfg.krylov_max {
                break;
            }
            total += 1;
            let z = op.precondition(&basis[j]);
            let mut w = op.apply(&z);
            // Modified Gram–Schmidt, applied twice for stability.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    hess[i][j] += hij;
                    w.iter_mut().zip(v).for_each(|(a, c)| *a -= hij * c);
                }
            }
            let hn = norm(&w);
            hess[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            if g[j + 1].abs() / bnorm <= cfg.krylov_tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for l in i + 1..used {
                acc -= hess[i][l] * y[l];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![0.0; dim];
        for (coef, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(a, c)| *a += coef * c);
        }
        let dz = op.precondition(&update);
        x.iter_mut().zip(&dz).for_each(|(a, c)| *a += c);
    }
    (x, total)
}
