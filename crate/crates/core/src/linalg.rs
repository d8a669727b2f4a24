//! Small dense complex matrices (n ≤ 3) used pointwise on the grid.
//!
//! Everything here is stack allocated; fields of matrices are `Vec<Mat>`.

use nalgebra::{DMatrix, Matrix2, Matrix3};
use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

pub type C64 = Complex64;

/// Largest complex dimension supported by the pointwise kernels.
pub const MAX_DIM: usize = 3;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// An `n × n` complex matrix with `n ≤ 3`, stored in a fixed 3×3 block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    n: usize,
    a: [[C64; MAX_DIM]; MAX_DIM],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&n),
            "matrix dimension {n} unsupported"
        );
        Mat {
            n,
            a: [[ZERO; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = C64::new(s, 0.0);
        }
        m
    }

    /// Elementary matrix with a single one at `(i, j)`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n);
        m.a[i][j] = ONE;
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = C64::new(x, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[j][i])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[j][i].conj())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    /// Entrywise pairing `Σ_{pq} A[p][q] B[p][q]` (no conjugation).
    pub fn pair(&self, other: &Mat) -> C64 {
        let mut s = ZERO;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j].norm_sqr();
            }
        }
        s
    }

    /// `‖A − A†‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).frobenius_norm()
    }

    /// Symmetrize to `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale(0.5)
    }

    pub fn det(&self) -> C64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        let a = &self.a;
        let inv = match self.n {
            1 => Self::from_fn(1, |_, _| ONE / d),
            2 => Self::from_fn(2, |i, j| {
                let v = match (i, j) {
                    (0, 0) => a[1][1],
                    (0, 1) => -a[0][1],
                    (1, 0) => -a[1][0],
                    _ => a[0][0],
                };
                v / d
            }),
            _ => Self::from_fn(3, |i, j| {
                // adjugate: cofactor of (j, i)
                let r: Vec<usize> = (0..3).filter(|&x| x != j).collect();
                let c: Vec<usize> = (0..3).filter(|&x| x != i).collect();
                let minor = a[r[0]][c[0]] * a[r[1]][c[1]] - a[r[0]][c[1]] * a[r[1]][c[0]];
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                minor * sign / d
            }),
        };
        Some(inv)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = match self.n {
            2 => {
                let m = Matrix2::from_fn(|i, j| h.a[i][j]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
            3 => {
                let m = Matrix3::from_fn(|i, j| h.a[i][j]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
            _ => vec![h.a[0][0].re],
        };
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    /// Eigenvalues of a general complex matrix via a complex Schur form.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let m = self.to_dmatrix();
        match m.clone().schur().eigenvalues() {
            Some(ev) => ev.iter().copied().collect(),
            None => Vec::new(),
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.a[i][j])
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s = s.max(self.a[i][j].norm());
            }
        }
        s
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i][j]
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(self, rhs: Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.a[i][j] + rhs.a[i][j])
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, rhs: Mat) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] += rhs.a[i][j];
            }
        }
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(self, rhs: Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.a[i][j] - rhs.a[i][j])
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i][k];
                for j in 0..n {
                    out.a[i][j] += aik * rhs.a[k][j];
                }
            }
        }
        out
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(self, s: f64) -> Mat {
        self.scale(s)
    }
}

/// Binomial coefficient `C^k_n` as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_fn(3, |i, j| {
            C64::new((i * 3 + j) as f64 + 1.0, (i as f64) - (j as f64) * 0.5)
        }) + Mat::scalar(3, 4.0);
        let p = m * m.inverse().unwrap();
        assert!((p - Mat::identity(3)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_of_diag() {
        let m = Mat::from_real_diag(&[3.0, -1.0, 2.0]);
        let ev = m.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(2, 0), 1.0);
        assert_eq!(binomial(1, 2), 0.0);
        assert_eq!(factorial(3), 6.0);
    }
}
