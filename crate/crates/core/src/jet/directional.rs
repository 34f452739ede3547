//! Closed convex cones in the gradient slot, stored as finite halfspace
//! intersections `D = { p : <nu_i, p> >= 0 }`.

use serde::{Deserialize, Serialize};

use super::{dot, vnorm, vscale, vsub, Classification};
use crate::tolerances::{check_dim, tau_mem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCone")]
pub struct DirectionalCone {
    n: usize,
    normals: Vec<Vec<f64>>,
    witness: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generators: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct RawCone {
    n: usize,
    normals: Vec<Vec<f64>>,
    #[serde(default)]
    generators: Option<Vec<Vec<f64>>>,
}

impl TryFrom<RawCone> for DirectionalCone {
    type Error = Error;
    fn try_from(raw: RawCone) -> Result<Self> {
        let mut cone = DirectionalCone::from_normals(raw.n, raw.normals)?;
        if let Some(g) = raw.generators {
            cone = cone.with_generators(g)?;
        }
        Ok(cone)
    }
}

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let l = vnorm(v);
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidParameter(format!("degenerate normal {v:?}")));
    }
    Ok(vscale(v, 1.0 / l))
}

/// Inverse of a square matrix given by rows, by Gauss-Jordan elimination.
pub(crate) fn invert(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Orthonormal basis of the complement of a unit vector.
fn complement_basis(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut v = super::unit(n, i);
        let c = dot(&v, nu);
        v = vsub(&v, &vscale(nu, c));
        for b in &basis {
            let c = dot(&v, b);
            v = vsub(&v, &vscale(b, c));
        }
        let l = vnorm(&v);
        if l > 1e-8 {
            basis.push(vscale(&v, 1.0 / l));
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

impl DirectionalCone {
    /// `D = R^n`, encoded by an empty normal list.
    pub fn full(n: usize) -> Result<Self> {
        check_dim(n)?;
        let mut gens = Vec::with_capacity(2 * n);
        for i in 0..n {
            gens.push(super::unit(n, i));
            gens.push(vscale(&super::unit(n, i), -1.0));
        }
        Ok(Self { n, normals: vec![], witness: vec![0.0; n], generators: Some(gens) })
    }

    /// Nonnegative orthant.
    pub fn orthant(n: usize) -> Result<Self> {
        check_dim(n)?;
        let normals: Vec<Vec<f64>> = (0..n).map(|i| super::unit(n, i)).collect();
        Ok(Self { n, generators: Some(normals.clone()), normals, witness: vec![1.0; n] })
    }

    /// Halfspace `{ <nu, p> >= 0 }`.
    pub fn halfspace(nu: &[f64]) -> Result<Self> {
        check_dim(nu.len())?;
        let nu = normalize(nu)?;
        let mut gens = vec![nu.clone()];
        for b in complement_basis(&nu) {
            gens.push(vscale(&b, -1.0));
            gens.push(b);
        }
        Ok(Self { n: nu.len(), normals: vec![nu.clone()], witness: nu, generators: Some(gens) })
    }

    /// Cone with `n` linearly independent normals; generators are the columns
    /// of the inverse normal matrix.
    pub fn simplicial(normals: Vec<Vec<f64>>) -> Result<Self> {
        let n = normals.len();
        check_dim(n)?;
        let normals = normals.iter().map(|v| {
            if v.len() != n {
                Err(Error::DimensionMismatch { expected: n, got: v.len() })
            } else {
                normalize(v)
            }
        }).collect::<Result<Vec<_>>>()?;
        let inv = invert(&normals)
            .ok_or_else(|| Error::InvalidParameter("normals are linearly dependent".into()))?;
        let gens: Vec<Vec<f64>> = (0..n)
            .map(|j| normalize(&(0..n).map(|i| inv[i][j]).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        let mut witness = vec![0.0; n];
        for g in &gens {
            witness = super::vadd(&witness, g);
        }
        Ok(Self { n, normals, witness, generators: Some(gens) })
    }

    /// Cone from an arbitrary normal list. A witness of nonempty interior is
    /// searched by perceptron updates; generators are synthesized only for
    /// the halfspace and simplicial shapes.
    pub fn from_normals(n: usize, normals: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(n)?;
        if normals.is_empty() {
            return Self::full(n);
        }
        for v in &normals {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let normals = normals.iter().map(|v| normalize(v)).collect::<Result<Vec<_>>>()?;
        if normals.len() == 1 {
            return Self::halfspace(&normals[0]);
        }
        if normals.len() == n {
            if let Ok(c) = Self::simplicial(normals.clone()) {
                return Ok(c);
            }
        }
        let witness = perceptron_witness(&normals).ok_or_else(|| {
            Error::NoInteriorWitness(format!("no p with <nu_i, p> > 0 for all {} normals", normals.len()))
        })?;
        Ok(Self { n, normals, witness, generators: None })
    }

    /// Attaches an explicit generator list after validating membership.
    pub fn with_generators(mut self, gens: Vec<Vec<f64>>) -> Result<Self> {
        for g in &gens {
            if g.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: g.len() });
            }
            if !self.contains(g) {
                return Err(Error::InvalidParameter(format!("generator {g:?} lies outside the cone")));
            }
        }
        self.generators = Some(gens);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    pub fn generators(&self) -> Option<&[Vec<f64>]> {
        self.generators.as_deref()
    }

    pub fn is_full(&self) -> bool {
        self.normals.is_empty()
    }

    /// `min_i <nu_i, p>`, or `+inf` for `R^n`.
    pub fn margin(&self, p: &[f64]) -> f64 {
        self.normals.iter().map(|nu| dot(nu, p)).fold(f64::INFINITY, f64::min)
    }

    /// Margin of the Dirichlet dual: `max_i <nu_i, p>`, or `-inf` for `R^n`.
    pub fn dual_margin(&self, p: &[f64]) -> f64 {
        self.normals.iter().map(|nu| dot(nu, p)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.margin(p) >= -tau_mem(vnorm(p))
    }

    pub fn classify(&self, p: &[f64]) -> Classification {
        Classification::from_margin(self.margin(p), tau_mem(vnorm(p)))
    }

    /// `<q, g> >= -tau` for every stored generator `g`.
    pub fn polar_contains(&self, q: &[f64]) -> Result<bool> {
        if q.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: q.len() });
        }
        let gens = self.generators.as_ref().ok_or(Error::MissingGenerators)?;
        let tau = tau_mem(vnorm(q));
        Ok(gens.iter().all(|g| dot(q, g) >= -tau))
    }

    /// `-p` not in the interior of `D`. Always false for `D = R^n`, whose
    /// Dirichlet dual is empty.
    pub fn dirichlet_dual_contains(&self, p: &[f64]) -> Result<bool> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
        }
        Ok(self.dual_margin(p) >= -tau_mem(vnorm(p)))
    }

    /// Generators of the polar cone: the normals themselves.
    pub fn polar_generators(&self) -> &[Vec<f64>] {
        &self.normals
    }
}

fn perceptron_witness(normals: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = normals[0].len();
    let mut q = vec![0.0; n];
    for nu in normals {
        q = super::vadd(&q, nu);
    }
    for _ in 0..100_000 {
        let worst = normals
            .iter()
            .min_by(|a, b| dot(a, &q).total_cmp(&dot(b, &q)))
            .expect("nonempty");
        let scale = vnorm(&q).max(1.0);
        if dot(worst, &q) > 1e-9 * scale {
            let l = vnorm(&q);
            return Some(vscale(&q, 1.0 / l));
        }
        q = super::vadd(&q, worst);
    }
    None
}
