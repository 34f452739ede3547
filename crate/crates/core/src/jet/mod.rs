//! Jets `(r, p, A)`, symmetric matrices, eigenvalues, the jet norm and
//! directional cones in the gradient slot.

mod directional;
mod eigen;
mod matrix;

pub use directional::DirectionalCone;
pub use eigen::{eigen_decompose, eigenvalues, lambda_max, lambda_min, EigenDecomposition};
pub use matrix::SymMatrix;

use serde::{Deserialize, Serialize};

use crate::tolerances::{check_dim, tau_mem};
use crate::{Error, Result};

/// Three-way membership verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Inside,
    Boundary,
    Outside,
}

impl Classification {
    /// Verdict for a signed margin against the band `tau`.
    pub fn from_margin(margin: f64, tau: f64) -> Self {
        if margin > tau {
            Classification::Inside
        } else if margin < -tau {
            Classification::Outside
        } else {
            Classification::Boundary
        }
    }

    pub fn is_outside(self) -> bool {
        self == Classification::Outside
    }

    pub fn is_inside(self) -> bool {
        self == Classification::Inside
    }

    /// Member of the closed set (Inside or Boundary).
    pub fn is_member(self) -> bool {
        self != Classification::Outside
    }

    /// Swaps Inside and Outside.
    pub fn flip(self) -> Self {
        match self {
            Classification::Inside => Classification::Outside,
            Classification::Outside => Classification::Inside,
            Classification::Boundary => Classification::Boundary,
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Inside => "Inside",
            Classification::Boundary => "Boundary",
            Classification::Outside => "Outside",
        };
        f.write_str(s)
    }
}

/// A 2-jet `(r, p, A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJet")]
pub struct Jet {
    pub r: f64,
    pub p: Vec<f64>,
    pub a: SymMatrix,
}

#[derive(Deserialize)]
struct RawJet {
    r: f64,
    p: Vec<f64>,
    a: SymMatrix,
}

impl TryFrom<RawJet> for Jet {
    type Error = Error;
    fn try_from(raw: RawJet) -> Result<Self> {
        Jet::new(raw.r, raw.p, raw.a)
    }
}

impl Jet {
    pub fn new(r: f64, p: Vec<f64>, a: SymMatrix) -> Result<Self> {
        if p.len() != a.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: p.len() });
        }
        if !r.is_finite() || p.iter().any(|v| !v.is_finite()) || !a.is_finite() {
            return Err(Error::NonFinite("jet".into()));
        }
        Ok(Self { r, p, a })
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { r: 0.0, p: vec![0.0; n], a: SymMatrix::zeros(n)? })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { r: self.r + o.r, p: vadd(&self.p, &o.p), a: self.a.add(&o.a) }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { r: self.r - o.r, p: vsub(&self.p, &o.p), a: self.a.sub(&o.a) }
    }

    pub fn scale(&self, t: f64) -> Jet {
        Jet { r: self.r * t, p: vscale(&self.p, t), a: self.a.scale(t) }
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    /// `self + t * dir`.
    pub fn axpy(&self, t: f64, dir: &Jet) -> Jet {
        self.add(&dir.scale(t))
    }

    /// Ascending eigenvalues of the matrix slot.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(&self.a)
    }

    /// `max(|r|, |p|, max_k |lambda_k(A)|)`.
    pub fn norm(&self) -> f64 {
        let ev = self.eigenvalues();
        let spec = ev[0].abs().max(ev[ev.len() - 1].abs());
        self.r.abs().max(vnorm(&self.p)).max(spec)
    }

    /// Membership band for this jet.
    pub fn tau(&self) -> f64 {
        tau_mem(self.norm())
    }
}

pub fn jet_norm(j: &Jet) -> f64 {
    j.norm()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn vnorm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(a: &[f64], t: f64) -> Vec<f64> {
    a.iter().map(|x| x * t).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_diagonal_jet() {
        let j = Jet::new(1.0, vec![0.0, 0.0], SymMatrix::diag(&[2.0, -3.0]).unwrap()).unwrap();
        assert_eq!(j.norm(), 3.0);
    }

    #[test]
    fn norm_of_zero_jet() {
        assert_eq!(Jet::zero(3).unwrap().norm(), 0.0);
    }

    #[test]
    fn norm_uses_euclidean_gradient() {
        let j = Jet::new(-5.0, vec![3.0, 4.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(j.norm(), 5.0);
    }

    #[test]
    fn rejects_bad_jets() {
        assert!(Jet::new(0.0, vec![0.0], SymMatrix::identity(2).unwrap()).is_err());
        assert!(Jet::new(f64::INFINITY, vec![0.0], SymMatrix::identity(1).unwrap()).is_err());
    }

    #[test]
    fn margin_classification() {
        assert_eq!(Classification::from_margin(1.0, 1e-9), Classification::Inside);
        assert_eq!(Classification::from_margin(0.0, 1e-9), Classification::Boundary);
        assert_eq!(Classification::from_margin(-1.0, 1e-9), Classification::Outside);
        assert_eq!(Classification::Inside.flip(), Classification::Outside);
    }

    #[test]
    fn jet_json_roundtrip() {
        let j = Jet::new(1.5, vec![1.0, -2.0], SymMatrix::diag(&[1.0, 2.0]).unwrap()).unwrap();
        let s = serde_json::to_string(&j).unwrap();
        let back: Jet = serde_json::from_str(&s).unwrap();
        assert_eq!(j, back);
        assert!(serde_json::from_str::<Jet>(r#"{"r":0,"p":[1],"a":[[1,0],[0,1]]}"#).is_err());
    }
}
