//! Hyperbolic polynomials, Gårding eigenvalues and Gårding cones.
//!
//! The eigenvalues of `p` are the negatives of the roots of
//! `t -> g(t a + p)`, sorted ascending. Degree one and two use closed forms;
//! degrees three and four use Aberth iteration.

pub mod roots;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::MonotonicityCone;
use crate::jet::{dot, eigen_decompose, vnorm, vscale, DirectionalCone, SymMatrix};
use crate::report::Report;
use crate::tolerances::{check_dim, tau_mem};
use crate::{Classification, Error, Result};
use roots::{real_roots, RealRoots};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// JSON form `{monomials: [{coeff, exponents}], direction}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialDescriptor {
    pub monomials: Vec<Monomial>,
    pub direction: Vec<f64>,
}

/// Homogeneous polynomial of degree at most four, hyperbolic in `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialDescriptor", into = "PolynomialDescriptor")]
pub struct HyperbolicPolynomial {
    n: usize,
    degree: u32,
    monomials: Vec<Monomial>,
    direction: Vec<f64>,
    g_at_a: f64,
    /// Symmetric form with `g(p) = p^T Q p` when the degree is two.
    quadratic: Option<SymMatrix>,
}

impl TryFrom<PolynomialDescriptor> for HyperbolicPolynomial {
    type Error = Error;
    fn try_from(d: PolynomialDescriptor) -> Result<Self> {
        HyperbolicPolynomial::new(d.monomials, d.direction)
    }
}

impl From<HyperbolicPolynomial> for PolynomialDescriptor {
    fn from(g: HyperbolicPolynomial) -> Self {
        PolynomialDescriptor { monomials: g.monomials, direction: g.direction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GardingEigenvalues {
    pub values: Vec<f64>,
}

impl HyperbolicPolynomial {
    pub fn new(monomials: Vec<Monomial>, direction: Vec<f64>) -> Result<Self> {
        let n = direction.len();
        check_dim(n)?;
        let mut monomials: Vec<Monomial> = monomials.into_iter().filter(|m| m.coeff != 0.0).collect();
        if monomials.is_empty() {
            return Err(Error::InvalidPolynomial("zero polynomial".into()));
        }
        monomials.sort_by(|a, b| b.exponents.cmp(&a.exponents));
        let degree: u32 = monomials[0].exponents.iter().sum();
        for m in &monomials {
            if m.exponents.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.exponents.len() });
            }
            if !m.coeff.is_finite() {
                return Err(Error::InvalidPolynomial("non-finite coefficient".into()));
            }
            if m.exponents.iter().sum::<u32>() != degree {
                return Err(Error::InvalidPolynomial(format!("monomial {:?} breaks homogeneity of degree {degree}", m.exponents)));
            }
        }
        if !(1..=4).contains(&degree) {
            return Err(Error::InvalidPolynomial(format!("degree {degree} outside 1..=4")));
        }
        let mut g = Self { n, degree, monomials, direction, g_at_a: 0.0, quadratic: None };
        g.g_at_a = g.evaluate(&g.direction);
        if !(g.g_at_a > 0.0) {
            return Err(Error::InvalidPolynomial(format!("g(a) = {} must be positive", g.g_at_a)));
        }
        if degree == 2 {
            let mut q = SymMatrix::zeros(n)?;
            for m in &g.monomials {
                let idx: Vec<usize> = (0..n).filter(|&i| m.exponents[i] > 0).collect();
                match idx.as_slice() {
                    [i] => q.set(*i, *i, q.get(*i, *i) + m.coeff),
                    [i, j] => q.set(*i, *j, q.get(*i, *j) + 0.5 * m.coeff),
                    _ => unreachable!("degree two monomials have one or two variables"),
                }
            }
            g.quadratic = Some(q);
        }
        Ok(g)
    }

    /// `p_1^2 - p_2^2` with direction `(1, 0)`.
    pub fn lorentz_2d() -> Self {
        Self::new(
            vec![
                Monomial { coeff: 1.0, exponents: vec![2, 0] },
                Monomial { coeff: -1.0, exponents: vec![0, 2] },
            ],
            vec![1.0, 0.0],
        )
        .expect("valid polynomial")
    }

    /// `det` on `S(2)` in the variables `(a11, a12, a22)`, direction `I`.
    pub fn determinant_2x2() -> Self {
        Self::new(
            vec![
                Monomial { coeff: 1.0, exponents: vec![1, 0, 1] },
                Monomial { coeff: -1.0, exponents: vec![0, 2, 0] },
            ],
            vec![1.0, 0.0, 1.0],
        )
        .expect("valid polynomial")
    }

    /// Elementary symmetric polynomial `sigma_k` on `R^n`, direction `(1,...,1)`.
    pub fn elementary_symmetric(n: usize, k: u32) -> Result<Self> {
        let mut monomials = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() == k {
                monomials.push(Monomial { coeff: 1.0, exponents: (0..n).map(|i| mask >> i & 1).collect() });
            }
        }
        Self::new(monomials, vec![1.0; n])
    }

    pub fn from_descriptor(d: &PolynomialDescriptor) -> Result<Self> {
        Self::try_from(d.clone())
    }

    pub fn descriptor(&self) -> PolynomialDescriptor {
        self.clone().into()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn g_at_direction(&self) -> f64 {
        self.g_at_a
    }

    pub fn is_normalized(&self) -> bool {
        (self.g_at_a - 1.0).abs() <= 1e-12
    }

    /// Rescaled so that `g(a) = 1`.
    pub fn normalized(&self) -> Self {
        let s = self.g_at_a;
        let monomials = self.monomials.iter().map(|m| Monomial { coeff: m.coeff / s, exponents: m.exponents.clone() }).collect();
        Self::new(monomials, self.direction.clone()).expect("rescaling keeps validity")
    }

    pub fn evaluate(&self, p: &[f64]) -> f64 {
        self.monomials
            .iter()
            .map(|m| m.coeff * m.exponents.iter().zip(p).map(|(e, v)| v.powi(*e as i32)).product::<f64>())
            .sum()
    }

    /// Coefficients (ascending) of `t -> g(t a + p)`.
    pub fn restriction(&self, p: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.degree as usize + 1];
        for m in &self.monomials {
            let mut poly = vec![m.coeff];
            for (i, e) in m.exponents.iter().enumerate() {
                for _ in 0..*e {
                    poly = roots::mul(&poly, &[p[i], self.direction[i]]);
                }
            }
            for (k, v) in poly.iter().enumerate() {
                total[k] += v;
            }
        }
        total
    }

    fn violation(&self, p: &[f64], detail: String) -> Error {
        Error::HyperbolicityViolation { witness: p.to_vec(), detail }
    }

    pub fn eigenvalues(&self, p: &[f64]) -> Result<GardingEigenvalues> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
        }
        let mut values = match self.degree {
            1 => vec![self.evaluate(p) / self.g_at_a],
            2 => {
                let q = self.quadratic.as_ref().expect("degree two form");
                let qa = q.mul_vec(&self.direction);
                let aqa = dot(&self.direction, &qa);
                let b = dot(&qa, p);
                let disc = b * b - aqa * q.quad_form(p);
                let (re, im) = (b / aqa, (-disc).max(0.0).sqrt() / aqa);
                if disc < 0.0 && im > 1e-8 * (1.0 + re.abs()) {
                    return Err(self.violation(p, format!("complex pair {re} ± {im}i")));
                }
                let s = disc.max(0.0).sqrt() / aqa;
                vec![re - s, re + s]
            }
            _ => match real_roots(&self.restriction(p)) {
                RealRoots::Real(r) => r.iter().map(|t| -t).collect(),
                RealRoots::Complex(z) => return Err(self.violation(p, format!("complex root {z}"))),
            },
        };
        values.sort_by(f64::total_cmp);
        Ok(GardingEigenvalues { values })
    }

    /// Sign of the smallest eigenvalue within the membership band.
    pub fn cone_contains(&self, p: &[f64]) -> Result<Classification> {
        let ev = self.eigenvalues(p)?;
        Ok(Classification::from_margin(ev.values[0], tau_mem(vnorm(p))))
    }

    /// Samples real-rootedness of the restriction in random directions.
    pub fn certify(&self, samples: usize, seed: u64) -> Report {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = Report::new("hyperbolicity");
        for _ in 0..samples {
            let p: Vec<f64> = (0..self.n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            rep.samples += 1;
            if let Err(e) = self.eigenvalues(&p) {
                rep.fail(&p, None, e.to_string());
            }
        }
        rep
    }
}

pub fn garding_eigenvalues(g: &HyperbolicPolynomial, p: &[f64]) -> Result<GardingEigenvalues> {
    g.eigenvalues(p)
}

pub fn garding_cone_contains(g: &HyperbolicPolynomial, p: &[f64]) -> Result<Classification> {
    g.cone_contains(p)
}

/// Monotonicity cone `R x closure(Gamma) x S(n)` when the Gårding cone is
/// polyhedral: a halfspace in degree one, a sector for degree two in two
/// variables.
pub fn garding_monotonicity_cone(g: &HyperbolicPolynomial) -> Result<MonotonicityCone> {
    let d = garding_directional_cone(g)?;
    MonotonicityCone::directional(d)
}

/// Halfspace description of the closed Gårding cone.
pub fn garding_directional_cone(g: &HyperbolicPolynomial) -> Result<DirectionalCone> {
    match (g.degree, g.n) {
        (1, _) => {
            let c: Vec<f64> = (0..g.n).map(|i| g.evaluate(&crate::jet::unit(g.n, i))).collect();
            DirectionalCone::halfspace(&c)
        }
        (2, 2) => {
            let q = g.quadratic.as_ref().expect("degree two form");
            let e = eigen_decompose(q)?;
            let (l1, l2) = (e.eigenvalues[0], e.eigenvalues[1]);
            if !(l1 < 0.0 && l2 > 0.0) {
                return Err(Error::UnsupportedCone("degree two form must have signature (1, 1)".into()));
            }
            let u1 = [e.eigenvectors[0][0], e.eigenvectors[1][0]];
            let u2 = [e.eigenvectors[0][1], e.eigenvectors[1][1]];
            let a = &g.direction;
            let mut edges = Vec::new();
            for s in [1.0, -1.0] {
                let v: Vec<f64> = (0..2).map(|i| (-l1).sqrt() * u2[i] + s * l2.sqrt() * u1[i]).collect();
                let v = if dot(&v, &q.mul_vec(a)) >= 0.0 { v } else { vscale(&v, -1.0) };
                edges.push(v);
            }
            let mut normals = Vec::new();
            for (k, v) in edges.iter().enumerate() {
                let other = &edges[1 - k];
                let nu = vec![-v[1], v[0]];
                normals.push(if dot(&nu, other) >= 0.0 { nu } else { vscale(&nu, -1.0) });
            }
            DirectionalCone::simplicial(normals)
        }
        _ => Err(Error::UnsupportedCone(format!(
            "Gårding cone of degree {} in {} variables has no halfspace description; pass the normals explicitly",
            g.degree, g.n
        ))),
    }
}

/// Monotonicity cone from caller-supplied normals, checked against the
/// spectral membership on seeded samples.
pub fn garding_monotonicity_cone_from_normals(
    g: &HyperbolicPolynomial,
    normals: Vec<Vec<f64>>,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityCone> {
    let d = DirectionalCone::from_normals(g.n, normals)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let p: Vec<f64> = (0..g.n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a = g.cone_contains(&p)?;
        let b = d.classify(&p);
        if a != Classification::Boundary && b != Classification::Boundary && a != b {
            return Err(Error::UnsupportedCone(format!("normals disagree with the spectral cone at {p:?}")));
        }
    }
    MonotonicityCone::directional(d)
}
