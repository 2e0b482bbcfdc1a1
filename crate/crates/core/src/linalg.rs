//! Small dense and sparse linear algebra used by the PSD check and the
//! kriging solver: cyclic Jacobi eigenvalues for symmetric matrices, dense
//! Cholesky factorization, and Jacobi-preconditioned conjugate gradients on
//! CSR matrices. Everything is deterministic.

use crate::error::{Error, Result};

/// Eigenvalues of a dense symmetric matrix (row-major, `n x n`), sorted
/// ascending. Cyclic Jacobi; converges unconditionally for symmetric input.
pub fn jacobi_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), n * n, "matrix storage mismatch");
    let mut a = matrix.to_vec();
    let idx = |i: usize, j: usize| i * n + j;

    let frobenius: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-15 * frobenius.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let apq = a[idx(i, j)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[idx(i, i)];
                let aqq = a[idx(j, j)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns i and j.
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let aki = a[idx(k, i)];
                    let akj = a[idx(k, j)];
                    let new_ki = c * aki - s * akj;
                    let new_kj = s * aki + c * akj;
                    a[idx(k, i)] = new_ki;
                    a[idx(i, k)] = new_ki;
                    a[idx(k, j)] = new_kj;
                    a[idx(j, k)] = new_kj;
                }
                a[idx(i, i)] = app - t * apq;
                a[idx(j, j)] = aqq + t * apq;
                a[idx(i, j)] = 0.0;
                a[idx(j, i)] = 0.0;
            }
        }
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigenvalues
}

/// Dense Cholesky factor `L` (lower triangular) of an SPD matrix.
#[derive(Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix (row-major). A
    /// non-positive pivot reports the offending row.
    pub fn factor(matrix: &[f64], n: usize) -> Result<Self> {
        assert_eq!(matrix.len(), n * n, "matrix storage mismatch");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = matrix[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::Singular(format!(
                            "non-positive Cholesky pivot {sum:e} at row {i} of {n}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `A x = b` from the stored factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Compressed sparse row matrix (symmetric content stored in full).
pub struct CsrMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let n = rows.len();
        let nnz = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for &(c, v) in row {
                debug_assert!(c < n);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *slot = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        for (i, slot) in diag.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    *slot = self.values[k];
                }
            }
        }
        diag
    }
}

/// Jacobi-preconditioned conjugate gradients for SPD systems. Errors if the
/// relative residual does not reach `tol` within `max_iter` iterations.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::Singular(
            "non-positive diagonal in conjugate-gradient system".into(),
        ));
    }
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Singular(format!(
                "conjugate gradient met non-SPD curvature {pap:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return Ok(x);
        }
        precondition(&r, &mut z);
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Singular(format!(
        "conjugate gradient did not converge in {max_iter} iterations"
    )))
}

/// Compensated (Neumaier) accumulator for long mixed-sign sums.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    compensation: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
