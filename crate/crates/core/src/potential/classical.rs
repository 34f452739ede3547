//! C² functions with exact 2-jets.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::Face;
use crate::jet::{dot, vadd, vsub, Jet, SymMatrix};
use crate::{Error, Result};

/// Function with exact value and 2-jet; `jet` is `None` where the value is
/// `-inf`.
pub trait Classical: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn jet(&self, x: &[f64]) -> Option<Jet>;
    fn blowup_face(&self) -> Option<Face> {
        None
    }
}

/// `phi(x) = r0 + <p0, x - c> + (x - c)^T A0 (x - c) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFunction {
    pub r0: f64,
    pub p0: Vec<f64>,
    pub a0: SymMatrix,
    pub center: Vec<f64>,
}

impl QuadraticFunction {
    pub fn new(r0: f64, p0: Vec<f64>, a0: SymMatrix, center: Vec<f64>) -> Result<Self> {
        let n = a0.dim();
        if p0.len() != n || center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p0.len().min(center.len()) });
        }
        Ok(Self { r0, p0, a0, center })
    }

    /// The quadratic whose jet at `x` is `j`.
    pub fn from_jet(j: &Jet, x: &[f64]) -> Self {
        Self { r0: j.r, p0: j.p.clone(), a0: j.a.clone(), center: x.to_vec() }
    }

    /// Adds a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut q = self.clone();
        q.r0 += c;
        q
    }

    /// Re-expresses the same function around a new center.
    pub fn recentered(&self, c: &[f64]) -> Self {
        let j = self.jet(c).expect("quadratics are finite");
        Self::from_jet(&j, c)
    }

    pub fn add(&self, o: &Self) -> Self {
        let o = o.recentered(&self.center);
        Self {
            r0: self.r0 + o.r0,
            p0: vadd(&self.p0, &o.p0),
            a0: self.a0.add(&o.a0),
            center: self.center.clone(),
        }
    }

    /// `x -> phi(x - y)`.
    pub fn translated(&self, y: &[f64]) -> Self {
        let mut q = self.clone();
        q.center = vadd(&q.center, y);
        q
    }
}

impl Classical for QuadraticFunction {
    fn dim(&self) -> usize {
        self.p0.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = vsub(x, &self.center);
        self.r0 + dot(&self.p0, &d) + 0.5 * self.a0.quad_form(&d)
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let d = vsub(x, &self.center);
        let p = vadd(&self.p0, &self.a0.mul_vec(&d));
        Some(Jet { r: self.value(x), p, a: self.a0.clone() })
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type JetFn = dyn Fn(&[f64]) -> Option<Jet> + Send + Sync;

/// Closure-backed classical function.
#[derive(Clone)]
pub struct ClosureFunction {
    pub n: usize,
    value: Arc<ValueFn>,
    jet: Arc<JetFn>,
}

impl ClosureFunction {
    pub fn new(
        n: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        jet: impl Fn(&[f64]) -> Option<Jet> + Send + Sync + 'static,
    ) -> Self {
        Self { n, value: Arc::new(value), jet: Arc::new(jet) }
    }
}

impl Classical for ClosureFunction {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        (self.jet)(x)
    }
}

/// Pointwise sum of classical functions.
#[derive(Clone)]
pub struct SumFunction(pub Vec<Arc<dyn Classical>>);

impl Classical for SumFunction {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|f| f.value(x)).sum()
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let mut it = self.0.iter();
        let mut acc = it.next()?.jet(x)?;
        for f in it {
            acc = acc.add(&f.jet(x)?);
        }
        Some(acc)
    }
    fn blowup_face(&self) -> Option<Face> {
        self.0.iter().find_map(|f| f.blowup_face())
    }
}

/// `x -> scale * f(x - shift) + offset`.
#[derive(Clone)]
pub struct Affinely {
    pub base: Arc<dyn Classical>,
    pub shift: Vec<f64>,
    pub scale: f64,
    pub offset: f64,
}

impl Classical for Affinely {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.base.value(&vsub(x, &self.shift)) + self.offset
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let mut j = self.base.jet(&vsub(x, &self.shift))?.scale(self.scale);
        j.r += self.offset;
        Some(j)
    }
    fn blowup_face(&self) -> Option<Face> {
        self.base.blowup_face()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_jet_is_exact() {
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let q = QuadraticFunction::new(1.0, vec![0.5, -0.5], a.clone(), vec![0.2, 0.1]).unwrap();
        let x = [0.7, -0.4];
        let j = q.jet(&x).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (q.value(&xp) - q.value(&xm)) / (2.0 * h);
            assert!((fd - j.p[i]).abs() < 1e-8);
        }
        assert_eq!(j.a, a);
    }

    #[test]
    fn recentering_preserves_values() {
        let q = QuadraticFunction::new(1.0, vec![0.5], SymMatrix::diag(&[3.0]).unwrap(), vec![0.0]).unwrap();
        let r = q.recentered(&[2.0]);
        for x in [-1.0, 0.3, 4.0] {
            assert!((q.value(&[x]) - r.value(&[x])).abs() < 1e-12);
        }
        let s = q.add(&r);
        assert!((s.value(&[1.5]) - 2.0 * q.value(&[1.5])).abs() < 1e-12);
    }
}
