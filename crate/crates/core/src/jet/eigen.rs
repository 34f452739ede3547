//! Cyclic Jacobi eigensolver for symmetric matrices.

use serde::Serialize;

use super::matrix::SymMatrix;
use crate::tolerances::{JACOBI_REL, JACOBI_SWEEPS};
use crate::{Error, Result};

/// Ascending eigenvalues with the orthogonal matrix of eigenvectors (columns).
#[derive(Debug, Clone, Serialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major `n x n`; column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = (0..n).map(|k| q[i][k] * self.eigenvalues[k] * q[j][k]).sum();
            }
        }
        out
    }
}

pub(crate) struct JacobiOutput {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
    pub converged: bool,
}

fn off_diagonal_mass(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

pub(crate) fn jacobi(m: &SymMatrix, want_vectors: bool) -> JacobiOutput {
    let n = m.dim();
    let mut a: Vec<f64> = m.rows().concat();
    if n == 1 {
        return JacobiOutput {
            values: vec![a[0]],
            vectors: want_vectors.then(|| vec![1.0]),
            converged: true,
        };
    }
    let mut v = if want_vectors {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Some(v)
    } else {
        None
    };
    let threshold = JACOBI_REL * m.frobenius();
    let mut converged = off_diagonal_mass(&a, n) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_SWEEPS {
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    a[r * n + p] = np;
                    a[p * n + r] = np;
                    a[r * n + q] = nq;
                    a[q * n + r] = nq;
                }
                if let Some(v) = v.as_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        sweeps += 1;
        converged = off_diagonal_mass(&a, n) <= threshold;
    }
    JacobiOutput {
        values: (0..n).map(|i| a[i * n + i]).collect(),
        vectors: v,
        converged,
    }
}

/// Ascending eigenvalues; the diagonal after the sweep budget is used even
/// if the off-diagonal threshold was not reached.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let mut vals = jacobi(m, false).values;
    vals.sort_by(f64::total_cmp);
    vals
}

/// Smallest eigenvalue.
pub fn lambda_min(m: &SymMatrix) -> f64 {
    eigenvalues(m)[0]
}

/// Largest eigenvalue.
pub fn lambda_max(m: &SymMatrix) -> f64 {
    *eigenvalues(m).last().expect("dimension at least one")
}

pub fn eigen_decompose(m: &SymMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("matrix {:?}", m.rows())));
    }
    let n = m.dim();
    let out = jacobi(m, true);
    if !out.converged {
        return Err(Error::EigenNonConvergence {
            sweeps: JACOBI_SWEEPS,
            matrix: format!("{:?}", m.rows()),
        });
    }
    let v = out.vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| out.values[i].total_cmp(&out.values[j]));
    let eigenvalues = order.iter().map(|&k| out.values[k]).collect();
    let eigenvectors = (0..n)
        .map(|r| order.iter().map(|&k| v[r * n + k]).collect())
        .collect();
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}
