//! Small dense linear algebra: Cholesky factorization with jitter, triangular
//! solves, a Levinson solver for symmetric Toeplitz systems and Jacobi
//! eigenvalues for small symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Diagonal perturbation applied to near-singular covariance matrices before
/// a second factorization attempt.
pub const JITTER: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Submatrix picking the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`, or `None` if a
/// pivot is not strictly positive.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    assert!(a.is_square());
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let (done, rest) = l.data.split_at_mut(j * n);
        let row_j = &mut rest[..n];
        for i in 0..j {
            let row_i = &done[i * n..i * n + i];
            let s = a[(j, i)] - dot(&row_j[..i], row_i);
            row_j[i] = s / done[i * n + i];
        }
        let d = a[(j, j)] - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        row_j[j] = libm::sqrt(d);
    }
    Some(l)
}

/// Cholesky factorization, retried once with [`JITTER`] added to the
/// diagonal.
pub fn cholesky_with_jitter(a: &Matrix) -> Result<Matrix> {
    if let Some(l) = cholesky(a) {
        return Ok(l);
    }
    let mut b = a.clone();
    for i in 0..b.rows {
        b[(i, i)] += JITTER;
    }
    cholesky(&b).ok_or(Error::NotPositiveDefinite)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &x[..i]);
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `L^T x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        let row = l.row(i);
        for k in 0..i {
            x[k] -= row[k] * xi;
        }
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Solves `T x = b` where `T` is the symmetric positive definite Toeplitz
/// matrix with first column `col` (Levinson recursion, `O(n^2)`).
pub fn levinson_solve(col: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = col.len();
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(col[0] > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    // `f` solves T_k f = e_1 on the leading k x k block; by symmetry the
    // backward vector is f reversed.
    let mut f = vec![1.0 / col[0]];
    let mut x = vec![b[0] / col[0]];
    let mut next_f = Vec::with_capacity(n);
    for k in 1..n {
        // eps = row k of T applied to [f; 0].
        let mut eps = 0.0;
        for (j, fj) in f.iter().enumerate() {
            eps += col[k - j] * fj;
        }
        let denom = 1.0 - eps * eps;
        if !(denom > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        next_f.clear();
        next_f.resize(k + 1, 0.0);
        for j in 0..=k {
            let fwd = if j < k { f[j] } else { 0.0 };
            let bwd = if j > 0 { f[k - j] } else { 0.0 };
            next_f[j] = (fwd - eps * bwd) / denom;
        }
        core::mem::swap(&mut f, &mut next_f);
        // Residual of [x; 0] in row k, corrected along the backward vector.
        let mut err = 0.0;
        for (j, xj) in x.iter().enumerate() {
            err += col[k - j] * xj;
        }
        let coef = b[k] - err;
        x.push(0.0);
        for j in 0..=k {
            x[j] += coef * f[k - j];
        }
    }
    Ok(x)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.rows;
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
        }
        let scale: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<f64>() + off;
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta)
                    / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix {
        // Kac-Murdock-Szego matrix: Toeplitz, SPD for |rho| < 1.
        Matrix::from_fn(n, n, |i, j| libm::pow(0.6, (i as f64 - j as f64).abs()))
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(7);
        let l = cholesky(&a).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let s: f64 = (0..7).map(|k| l[(i, k)] * l[(j, k)]).sum();
                assert!((s - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(cholesky(&a).is_none());
        assert_eq!(cholesky_with_jitter(&a), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn jitter_rescues_singular_psd() {
        let a = Matrix::from_fn(2, 2, |_, _| 1.0);
        assert!(cholesky_with_jitter(&a).is_ok());
    }

    #[test]
    fn levinson_matches_cholesky() {
        let n = 40;
        let a = spd(n);
        let col: Vec<f64> = (0..n).map(|i| a[(i, 0)]).collect();
        let b: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let x1 = levinson_solve(&col, &b).unwrap();
        let x2 = cholesky_solve(&cholesky(&a).unwrap(), &b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
