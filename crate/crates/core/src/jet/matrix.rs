//! Dense symmetric matrices of small order.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::tolerances::check_dim;
use crate::{Error, Result};

/// Symmetric `n x n` matrix stored densely; every write updates both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { n, data: vec![0.0; n * n] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::scalar(n, 1.0)
    }

    pub fn scalar(n: usize, s: f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        Ok(m)
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(d.len())?;
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        Ok(m)
    }

    /// Builds from rows; the upper triangle is authoritative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for j in i..n {
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    /// Builds from rows and rejects asymmetric input.
    pub fn from_rows_strict(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Self::from_rows(rows)?;
        for i in 0..m.n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        Ok(m)
    }

    /// Outer product `v v^T`.
    pub fn outer(v: &[f64]) -> Result<Self> {
        let n = v.len();
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, v[i] * v[j]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// `self + s I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += s;
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `v^T A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Leading principal `k x k` block.
    pub fn leading_block(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidParameter(format!(
                "block size {k} not in 1..={}",
                self.n
            )));
        }
        let mut m = Self::zeros(k)?;
        for i in 0..k {
            for j in i..k {
                m.set(i, j, self.get(i, j));
            }
        }
        Ok(m)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        match n {
            1 => return self.data[0],
            2 => return self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => {}
        }
        let mut a = self.data.clone();
        let mut det = 1.0;
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[r * n + c].abs() > a[piv * n + c].abs() {
                    piv = r;
                }
            }
            if a[piv * n + c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                for k in 0..n {
                    a.swap(c * n + k, piv * n + k);
                }
                det = -det;
            }
            let d = a[c * n + c];
            det *= d;
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                if f != 0.0 {
                    for k in c..n {
                        a[r * n + k] -= f * a[c * n + k];
                    }
                }
            }
        }
        det
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows_strict(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_is_symmetric() {
        let mut m = SymMatrix::zeros(3).unwrap();
        m.set(0, 2, 4.0);
        assert_eq!(m.get(2, 0), 4.0);
    }

    #[test]
    fn from_rows_uses_upper_triangle() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![9.0, 3.0]]).unwrap();
        assert_eq!(m.get(1, 0), 2.0);
        assert!(SymMatrix::from_rows_strict(&[vec![1.0, 2.0], vec![9.0, 3.0]]).is_err());
    }

    #[test]
    fn dimension_bounds() {
        assert!(SymMatrix::zeros(0).is_err());
        assert!(SymMatrix::zeros(17).is_err());
        assert!(SymMatrix::zeros(16).is_ok());
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let m = SymMatrix::from_rows(&[
            vec![2.0, 1.0, 0.5],
            vec![1.0, 3.0, -1.0],
            vec![0.5, -1.0, 4.0],
        ])
        .unwrap();
        let cof = 2.0 * (3.0 * 4.0 - 1.0) - 1.0 * (1.0 * 4.0 + 0.5) + 0.5 * (-1.0 - 1.5);
        assert!((m.det() - cof).abs() < 1e-12);
    }

    #[test]
    fn serde_roundtrip() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: SymMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
