//! Small dense linear algebra: symmetric eigendecomposition via Jacobi
//! rotations and a Cholesky solver for ridge systems.
//!
//! Everything here targets matrices of dimension up to a few hundred, stored
//! row-major in plain `Vec<f64>`. No BLAS, no SIMD; determinism over speed.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("Jacobi sweep limit reached before convergence (dim {dim})")]
    NoConvergence { dim: usize },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Eigendecomposition of a symmetric matrix, `a = V diag(values) V^T`.
///
/// `vectors` is row-major `n x n`; column `k` is the eigenvector for
/// `values[k]`. Eigenvalues are sorted in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub dim: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEig {
    /// Component `k` of `V^T phi`.
    pub fn project(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.vectors[i * n + k] * phi[i];
            }
            *o = acc;
        }
        out
    }

    /// Reassembles `V diag(d) V^T` for a given diagonal, row-major.
    pub fn recompose(&self, diag: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[i * n + k] * diag[k] * self.vectors[j * n + k];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }
}

fn check_symmetric(a: &[f64], n: usize, tol: f64) -> Result<(), LinalgError> {
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[i * n + j] - a[j * n + i]).abs();
            if diff > tol {
                return Err(LinalgError::NotSymmetric { i, j, diff });
            }
        }
    }
    Ok(())
}

/// Jacobi eigendecomposition of a symmetric matrix.
///
/// Cyclic Jacobi rotations, iterated until the off-diagonal Frobenius norm
/// drops below `1e-10` relative to the matrix scale. Requires symmetry
/// within `1e-8`.
pub fn jacobi_eigh(a: &[f64], n: usize) -> Result<SymEig, LinalgError> {
    if a.len() != n * n {
        return Err(LinalgError::DimensionMismatch { expected: n * n, got: a.len() });
    }
    check_symmetric(a, n, 1e-8)?;

    let mut m = a.to_vec();
    // symmetrize exactly so rotations act on a clean input
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let target = 1e-10 * scale;
    const MAX_SWEEPS: usize = 60;

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += 2.0 * m[i * n + j] * m[i * n + j];
                }
            }
            acc.sqrt()
        };
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= target / (n as f64 * n as f64) {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = m[i * n + p];
                        let aiq = m[i * n + q];
                        let new_ip = aip - s * (aiq + tau * aip);
                        let new_iq = aiq + s * (aip - tau * aiq);
                        m[i * n + p] = new_ip;
                        m[p * n + i] = new_ip;
                        m[i * n + q] = new_iq;
                        m[q * n + i] = new_iq;
                    }
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = vip - s * (viq + tau * vip);
                    v[i * n + q] = viq + s * (vip - tau * viq);
                }
            }
        }
    }
    if !converged {
        // final check; quadratic convergence normally lands well before this
        let off: f64 = {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += 2.0 * m[i * n + j] * m[i * n + j];
                }
            }
            acc.sqrt()
        };
        if off > target {
            return Err(LinalgError::NoConvergence { dim: n });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + new_k] = v[i * n + old_k];
        }
    }
    Ok(SymEig { dim: n, values, vectors })
}

/// Cholesky factor of a symmetric positive definite matrix, kept around to
/// solve many right-hand sides against the same system.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
    // transpose kept so the back-substitution also streams rows
    upper: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(a: &[f64], n: usize) -> Result<Self, LinalgError> {
        if a.len() != n * n {
            return Err(LinalgError::DimensionMismatch { expected: n * n, got: a.len() });
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        let mut u = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                u[j * n + i] = l[i * n + j];
            }
        }
        Ok(Self { dim: n, lower: l, upper: u })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let mut sum = b[i];
            for (lik, yk) in row.iter().zip(&y[..i]) {
                sum -= lik * yk;
            }
            y[i] = sum / self.lower[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let row = &self.upper[i * n + i + 1..(i + 1) * n];
            let mut sum = y[i];
            for (uik, xk) in row.iter().zip(&x[i + 1..]) {
                sum -= uik * xk;
            }
            x[i] = sum / self.upper[i * n + i];
        }
        x
    }
}

/// `out = a * x` for a row-major `n x n` matrix.
pub fn mat_vec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[i * n + j] * x[j];
        }
        out[i] = acc;
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
