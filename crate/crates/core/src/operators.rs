//! Operator pairs `(F, G)`, the correspondence subequation `{J in G_x : F(x, J) >= 0}`,
//! the structural checks of the comparison theorem and the built-in operators.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{random_jet, ConeDescriptor, MonotonicityCone};
use crate::duality::{JetSampler, SubequationOracle};
use crate::fibermap::{bisect_delta, boundary_projection, clamp, unit_vector, FiberegCertificate, FiberegOptions, JetWindow};
use crate::garding::{garding_monotonicity_cone, HyperbolicPolynomial};
use crate::jet::{dot, eigenvalues, lambda_min, vadd, vnorm, vscale, vsub, DirectionalCone, SymMatrix};
use crate::potential::{BoxDomain, Classical};
use crate::report::{Report, Violation};
use crate::tolerances::{tau_mem, ETA_GRID};
use crate::{Classification, Error, Jet, Result};

fn two() -> f64 {
    2.0
}

/// Closed-form scalar field on the domain (or on gradients, for `g`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant { value: f64 },
    /// `offset + <slope, x>`
    Affine { offset: f64, slope: Vec<f64> },
    /// `offset + coeff |x - center|^power`
    Radial {
        offset: f64,
        coeff: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "two")]
        power: f64,
    },
    /// `low` where `x[axis] < at`, `high` elsewhere.
    Step { low: f64, high: f64, axis: usize, at: f64 },
}

impl ScalarSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarSpec::Constant { value } => *value,
            ScalarSpec::Affine { offset, slope } => offset + dot(slope, x),
            ScalarSpec::Radial { offset, coeff, center, power } => {
                let d = match center {
                    Some(c) => vnorm(&vsub(x, c)),
                    None => vnorm(x),
                };
                offset + coeff * d.powf(*power)
            }
            ScalarSpec::Step { low, high, axis, at } => {
                if x[*axis] < *at {
                    *low
                } else {
                    *high
                }
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = match self {
            ScalarSpec::Affine { slope, .. } => slope.len() != n,
            ScalarSpec::Radial { center: Some(c), .. } => c.len() != n,
            ScalarSpec::Step { axis, .. } => *axis >= n,
            _ => false,
        };
        if bad {
            return Err(Error::InvalidParameter(format!("field {self:?} does not match dimension {n}")));
        }
        Ok(())
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Scalar field given by a closed form or a callable.
#[derive(Clone)]
pub struct ScalarField {
    pub label: String,
    pub spec: Option<ScalarSpec>,
    f: Arc<ScalarFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarField({})", self.label)
    }
}

impl ScalarField {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), spec: None, f: Arc::new(f) }
    }

    pub fn from_spec(spec: ScalarSpec, n: usize) -> Result<Self> {
        spec.validate(n)?;
        let s = spec.clone();
        Ok(Self { label: format!("{spec:?}"), spec: Some(spec), f: Arc::new(move |x: &[f64]| s.eval(x)) })
    }

    pub fn constant(value: f64) -> Self {
        Self { label: format!("{value}"), spec: Some(ScalarSpec::Constant { value }), f: Arc::new(move |_: &[f64]| value) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Largest value difference between lattice neighbours, per unit length.
    pub fn lattice_lipschitz(&self, domain: &BoxDomain) -> f64 {
        (0..domain.len())
            .into_par_iter()
            .map(|idx| {
                let m = domain.multi_index(idx);
                let x = domain.point_of(&m);
                let v = self.eval(&x);
                (0..domain.dim())
                    .filter(|&a| m[a] + 1 < domain.counts()[a])
                    .map(|a| {
                        let mut m2 = m.clone();
                        m2[a] += 1;
                        (self.eval(&domain.point_of(&m2)) - v).abs() / domain.spacing(a)
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSpec {
    Constant { value: Vec<f64> },
    /// `|x - center|^beta * direction`
    PowerRay { beta: f64, center: Vec<f64>, direction: Vec<f64> },
}

type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct VectorField {
    pub label: String,
    f: Arc<VectorFn>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VectorField({})", self.label)
    }
}

impl VectorField {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn from_spec(spec: VectorSpec, n: usize) -> Result<Self> {
        match spec {
            VectorSpec::Constant { value } => {
                if value.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: value.len() });
                }
                Ok(Self::new(format!("{value:?}"), move |_: &[f64]| value.clone()))
            }
            VectorSpec::PowerRay { beta, center, direction } => {
                if center.len() != n || direction.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: center.len().min(direction.len()) });
                }
                Ok(Self::new(format!("|x - x0|^{beta} e"), move |x: &[f64]| {
                    vscale(&direction, vnorm(&vsub(x, &center)).powf(beta))
                }))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Constant { value: SymMatrix },
}

type MatrixFn = dyn Fn(&[f64]) -> SymMatrix + Send + Sync;

#[derive(Clone)]
pub struct MatrixField {
    pub label: String,
    f: Arc<MatrixFn>,
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MatrixField({})", self.label)
    }
}

impl MatrixField {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn from_spec(spec: MatrixSpec, n: usize) -> Result<Self> {
        let MatrixSpec::Constant { value } = spec;
        if value.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: value.dim() });
        }
        Ok(Self::new("constant", move |_: &[f64]| value.clone()))
    }

    pub fn eval(&self, x: &[f64]) -> SymMatrix {
        (self.f)(x)
    }
}

/// Modulus of continuity `omega(eta) = c * eta^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulus {
    pub c: f64,
    pub s: f64,
}

impl Modulus {
    pub fn eval(&self, eta: f64) -> f64 {
        self.c * eta.powf(self.s)
    }
}

pub type EvalFn = dyn Fn(&[f64], &Jet) -> f64 + Send + Sync;

/// Operator `F` with background constraint `G`, monotonicity cone `M` and
/// an interior direction `J0` of `M`.
#[derive(Clone)]
pub struct OperatorPair {
    name: String,
    n: usize,
    evaluate: Arc<EvalFn>,
    constraint: Option<SubequationOracle>,
    cone: MonotonicityCone,
    j0: Jet,
}

impl std::fmt::Debug for OperatorPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorPair").field("name", &self.name).field("cone", &self.cone.name()).finish()
    }
}

impl OperatorPair {
    pub fn new(
        name: impl Into<String>,
        cone: MonotonicityCone,
        j0: Jet,
        constraint: Option<SubequationOracle>,
        evaluate: impl Fn(&[f64], &Jet) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = cone.dim();
        if j0.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: j0.dim() });
        }
        if !cone.classify(&j0).is_inside() {
            return Err(Error::NoInteriorWitness(format!("J0 not interior to {}", cone.name())));
        }
        if let Some(g) = &constraint {
            if g.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
            }
        }
        Ok(Self { name: name.into(), n, evaluate: Arc::new(evaluate), constraint, cone, j0 })
    }

    /// True when both pairs share the same operator closure.
    pub fn same_operator(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.evaluate, &other.evaluate)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn cone(&self) -> &MonotonicityCone {
        &self.cone
    }

    pub fn j0(&self) -> &Jet {
        &self.j0
    }

    pub fn constraint(&self) -> Option<&SubequationOracle> {
        self.constraint.as_ref()
    }

    pub fn evaluate(&self, x: &[f64], j: &Jet) -> f64 {
        (self.evaluate)(x, j)
    }

    /// Classification in `G_x`; Inside everywhere when unconstrained.
    pub fn constraint_classify(&self, x: &[f64], j: &Jet) -> Classification {
        self.constraint.as_ref().map_or(Classification::Inside, |g| g.classify(x, j))
    }

    /// A jet Inside `G_x` obtained from `J` along `J0`, or `J` itself when
    /// unconstrained. Jets in the boundary band are nudged just past it.
    fn admissible<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64], j: &Jet) -> Option<Jet> {
        let Some(g) = &self.constraint else { return Some(j.clone()) };
        let k = g.push_member(rng, x, j)?;
        let k = if g.classify(x, &k).is_inside() { k } else { k.axpy(1e-6 * (1.0 + k.norm()), &self.j0) };
        g.classify(x, &k).is_inside().then_some(k)
    }

    fn tau(&self, j: &Jet, value: f64) -> f64 {
        tau_mem(j.norm() + value.abs())
    }
}

/// Subequation `{J in G_x : F(x, J) >= 0}` built from an operator pair.
#[derive(Debug, Clone)]
pub struct CorrespondenceSubequation {
    pub base: OperatorPair,
    pub oracle: SubequationOracle,
}

/// Outside if `J` is Outside `G_x` or `F < -tau`; Inside if `J` is Inside
/// `G_x` and `F > tau`; Boundary otherwise.
pub fn build_correspondence(pair: &OperatorPair) -> Result<CorrespondenceSubequation> {
    let p = pair.clone();
    let oracle = SubequationOracle::new(format!("F[{}]", pair.name), pair.cone.clone(), pair.j0.clone(), move |x: &[f64], j: &Jet| {
        correspondence_classify(&p, x, j)
    })?;
    Ok(CorrespondenceSubequation { base: pair.clone(), oracle })
}

fn correspondence_classify(p: &OperatorPair, x: &[f64], j: &Jet) -> Classification {
    let g = p.constraint_classify(x, j);
    if g.is_outside() {
        return Classification::Outside;
    }
    let v = p.evaluate(x, j);
    let tau = p.tau(j, v);
    if v < -tau {
        Classification::Outside
    } else if g.is_inside() && v > tau {
        Classification::Inside
    } else {
        Classification::Boundary
    }
}

fn check_lattice_nonnegative(f: &ScalarField, domain: &BoxDomain, what: &str) -> Result<()> {
    for idx in 0..domain.len() {
        let x = domain.point(idx);
        let v = f.eval(&x);
        if !(v >= 0.0) {
            return Err(Error::Precondition(format!("{what} = {v} < 0 at {x:?}")));
        }
    }
    Ok(())
}

/// Random point of a directional cone, of size up to `scale`.
pub fn sample_directional<R: Rng + ?Sized>(rng: &mut R, d: &DirectionalCone, scale: f64) -> Vec<f64> {
    let n = d.dim();
    if let Some(gens) = d.generators() {
        let mut p = vec![0.0; n];
        for g in gens {
            if rng.gen_bool(0.7) {
                p = vadd(&p, &vscale(g, rng.gen_range(0.0..scale)));
            }
        }
        return p;
    }
    for _ in 0..10_000 {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        if d.contains(&p) {
            return p;
        }
    }
    vscale(d.witness(), rng.gen_range(0.0..scale))
}

const OT_ETAS: [f64; 5] = [1e-3, 1e-2, 0.1, 0.5, 1.0];

/// `F(x, r, p, A) = g(p) det(A) - f(x)` on `G = M(D, P)` with `J0 = (0, qbar, I)`.
/// Monotonicity of `g` along `D` and strict increase along `qbar` are
/// sampled; without a supplied modulus `omega(eta) = c eta` is fitted.
pub fn make_ot_operator(
    g: ScalarField,
    f: ScalarField,
    d: DirectionalCone,
    qbar: Vec<f64>,
    omega: Option<Modulus>,
    domain: &BoxDomain,
) -> Result<OperatorPair> {
    let n = d.dim();
    if qbar.len() != n || domain.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: qbar.len().min(domain.dim()) });
    }
    if !d.classify(&qbar).is_inside() {
        return Err(Error::Precondition(format!("qbar = {qbar:?} not interior to D")));
    }
    check_lattice_nonnegative(&f, domain, "f")?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x07);
    let mut fitted = f64::INFINITY;
    for _ in 0..2000 {
        let p = sample_directional(&mut rng, &d, 5.0);
        let q = sample_directional(&mut rng, &d, 5.0);
        let gp = g.eval(&p);
        let tol = 1e-9 * (1.0 + gp.abs());
        if !(gp >= -tol) {
            return Err(Error::Precondition(format!("g(p) = {gp} < 0 at p = {p:?} in D")));
        }
        let gpq = g.eval(&vadd(&p, &q));
        if gpq < gp - tol {
            return Err(Error::Precondition(format!("g(p + q) < g(p) for p = {p:?}, q = {q:?} in D")));
        }
        for eta in OT_ETAS {
            let gain = g.eval(&vadd(&p, &vscale(&qbar, eta))) - gp;
            match omega {
                Some(w) if gain < w.eval(eta) - tol => {
                    return Err(Error::Precondition(format!(
                        "g(p + {eta} qbar) - g(p) = {gain} < omega({eta}) = {} at p = {p:?}",
                        w.eval(eta)
                    )))
                }
                Some(_) => {}
                None => fitted = fitted.min(gain / eta),
            }
        }
    }
    if omega.is_none() && !(fitted > 1e-12) {
        return Err(Error::Precondition(format!("g is not strictly increasing along qbar (fitted slope {fitted})")));
    }
    let cone = MonotonicityCone::d_p(d)?;
    let j0 = Jet::new(0.0, qbar, SymMatrix::identity(n)?)?;
    let constraint = SubequationOracle::constant(cone.clone())?;
    OperatorPair::new("ot", cone, j0, Some(constraint), move |x: &[f64], j: &Jet| g.eval(&j.p) * j.a.det() - f.eval(x))
}

/// `F((x, t), r, p, A) = -p_{n+1} det(A_n) - f(x, t)` on `G = M(D_n, P_n)`.
pub fn make_krylov_operator(f: ScalarField, n_space: usize, domain: &BoxDomain) -> Result<OperatorPair> {
    if domain.dim() != n_space + 1 {
        return Err(Error::DimensionMismatch { expected: n_space + 1, got: domain.dim() });
    }
    check_lattice_nonnegative(&f, domain, "f")?;
    let cone = MonotonicityCone::parabolic(n_space)?;
    let j0 = cone.interior_direction()?;
    let constraint = SubequationOracle::constant(cone.clone())?;
    OperatorPair::new("krylov", cone, j0, Some(constraint), move |x: &[f64], j: &Jet| {
        let an = j.a.leading_block(n_space).expect("space block");
        -j.p[n_space] * an.det() - f.eval(x)
    })
}

/// `D = ∩ {q : <b(x_i), q> >= 0}` over the lattice; the lattice is then
/// refined once and the membership of seeded samples must not change.
pub fn lattice_directional_cone(b: &VectorField, domain: &BoxDomain) -> Result<DirectionalCone> {
    let build = |dom: &BoxDomain| -> Result<DirectionalCone> {
        let mut normals: Vec<Vec<f64>> = Vec::new();
        for idx in 0..dom.len() {
            let v = b.eval(&dom.point(idx));
            let nv = vnorm(&v);
            if nv <= 1e-300 {
                continue;
            }
            let u = vscale(&v, 1.0 / nv);
            if !normals.iter().any(|w| vnorm(&vsub(w, &u)) <= 1e-12) {
                normals.push(u);
            }
        }
        DirectionalCone::from_normals(dom.dim(), normals)
    };
    let coarse = build(domain)?;
    let fine_counts: Vec<usize> = domain.counts().iter().map(|c| 2 * c - 1).collect();
    let fine = build(&BoxDomain::new(domain.lower().to_vec(), domain.upper().to_vec(), fine_counts)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xD);
    for _ in 0..1000 {
        let p: Vec<f64> = (0..domain.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, c) = (coarse.classify(&p), fine.classify(&p));
        if a != Classification::Boundary && c != Classification::Boundary && a != c {
            return Err(Error::Operator(format!("directional cone of b did not stabilize under refinement at p = {p:?}")));
        }
    }
    Ok(coarse)
}

/// `F(x, r, p, A) = det(A + <b(x), p> P(x)) - f(x)` with
/// `G_x = {A + <b(x), p> P(x) >= 0}` and `M = M(D, P)` for the lattice cone `D`.
pub fn make_pma_operator(
    b: VectorField,
    pfield: MatrixField,
    f: ScalarField,
    nu: Vec<f64>,
    domain: &BoxDomain,
) -> Result<OperatorPair> {
    let n = domain.dim();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    let nu = vscale(&nu, 1.0 / vnorm(&nu));
    check_lattice_nonnegative(&f, domain, "f")?;
    for idx in 0..domain.len() {
        let x = domain.point(idx);
        let bx = b.eval(&x);
        if dot(&bx, &nu) < -1e-12 * (1.0 + vnorm(&bx)) {
            return Err(Error::Precondition(format!("<b(x), nu> < 0 at x = {x:?}")));
        }
        let px = pfield.eval(&x);
        if lambda_min(&px) < -1e-12 * (1.0 + px.max_abs()) {
            return Err(Error::Precondition(format!("P(x) not positive semidefinite at x = {x:?}")));
        }
    }
    let d = lattice_directional_cone(&b, domain)?;
    let cone = MonotonicityCone::d_p(d)?;
    let j0 = cone.interior_direction()?;
    let perturbed = {
        let (b, pf) = (b.clone(), pfield.clone());
        move |x: &[f64], j: &Jet| j.a.add(&pf.eval(x).scale(dot(&b.eval(x), &j.p)))
    };
    let shifted = perturbed.clone();
    let constraint = SubequationOracle::new("pma constraint", cone.clone(), j0.clone(), move |x: &[f64], j: &Jet| {
        let m = shifted(x, j);
        Classification::from_margin(lambda_min(&m), tau_mem(m.max_abs()))
    })?;
    OperatorPair::new("pma", cone, j0, Some(constraint), move |x: &[f64], j: &Jet| perturbed(x, j).det() - f.eval(x))
}

/// `F(x, r, p, A) = g(p) - f(x)` on `G = M_g` with `J0 = (0, a, 0)`.
pub fn make_garding_operator(g: HyperbolicPolynomial, f: ScalarField, domain: &BoxDomain) -> Result<OperatorPair> {
    let n = g.dim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: domain.dim() });
    }
    check_lattice_nonnegative(&f, domain, "f")?;
    let cone = garding_monotonicity_cone(&g)?;
    let j0 = Jet::new(0.0, g.direction().to_vec(), SymMatrix::zeros(n)?)?;
    let constraint = SubequationOracle::constant(cone.clone())?;
    OperatorPair::new("garding", cone, j0, Some(constraint), move |x: &[f64], j: &Jet| g.evaluate(&j.p) - f.eval(x))
}

/// The four built-in pairs with their domains: optimal transport, Krylov,
/// perturbed Monge-Ampère and the Gårding operator, all with data `f > 0`.
pub fn builtin_pairs() -> Result<Vec<(OperatorPair, BoxDomain)>> {
    let unit = BoxDomain::unit_cube(2, 21)?;
    let ot = make_ot_operator(
        ScalarField::from_spec(ScalarSpec::Affine { offset: 1.0, slope: vec![1.0, 1.0] }, 2)?,
        ScalarField::from_spec(ScalarSpec::Radial { offset: 1.0, coeff: 0.25, center: None, power: 2.0 }, 2)?,
        DirectionalCone::orthant(2)?,
        vec![1.0, 1.0],
        Some(Modulus { c: 2.0, s: 1.0 }),
        &unit,
    )?;
    let kdom = BoxDomain::new(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0], vec![11, 11, 11])?;
    let krylov = make_krylov_operator(
        ScalarField::from_spec(ScalarSpec::Radial { offset: 0.5, coeff: 0.25, center: None, power: 2.0 }, 3)?,
        2,
        &kdom,
    )?;
    let pma = make_pma_operator(
        VectorField::from_spec(VectorSpec::Constant { value: vec![1.0, 0.0] }, 2)?,
        MatrixField::from_spec(MatrixSpec::Constant { value: SymMatrix::diag(&[1.0, 0.0])? }, 2)?,
        ScalarField::from_spec(ScalarSpec::Affine { offset: 0.5, slope: vec![0.25, 0.0] }, 2)?,
        vec![1.0, 0.0],
        &unit,
    )?;
    let garding = make_garding_operator(
        HyperbolicPolynomial::lorentz_2d(),
        ScalarField::from_spec(ScalarSpec::Affine { offset: 0.25, slope: vec![0.0, 0.25] }, 2)?,
        &unit,
    )?;
    Ok(vec![(ot, unit.clone()), (krylov, kdom), (pma, unit.clone()), (garding, unit)])
}

fn check_sampler(pair: &OperatorPair, sampler: &JetSampler) -> Result<()> {
    if sampler.n != pair.n {
        return Err(Error::DimensionMismatch { expected: pair.n, got: sampler.n });
    }
    Ok(())
}

/// `F(x, r + s, p, A + P) >= F(x, J)` for `J in G_x`, `s <= 0`, `P >= 0`.
pub fn check_proper_ellipticity(pair: &OperatorPair, sampler: &JetSampler) -> Result<Report> {
    check_sampler(pair, sampler)?;
    let mut rep = Report::new(format!("proper_ellipticity {}", pair.name));
    let mut rng = sampler.rng();
    for _ in 0..sampler.count {
        let x = sampler.point(&mut rng);
        let raw = sampler.jet(&mut rng);
        let Some(j) = pair.admissible(&mut rng, &x, &raw) else { continue };
        let s = -rng.gen_range(0.0..3.0);
        let v = random_jet(&mut rng, pair.n, 1.0).p;
        let w = random_jet(&mut rng, pair.n, 1.0).p;
        let psd = SymMatrix::outer(&v)?.add(&SymMatrix::outer(&w)?).scale(rng.gen_range(0.0..2.0));
        let k = Jet { r: j.r + s, p: j.p.clone(), a: j.a.add(&psd) };
        rep.samples += 1;
        let (a, b) = (pair.evaluate(&x, &j), pair.evaluate(&x, &k));
        if b < a - 1e-9 * (1.0 + a.abs() + b.abs()) {
            rep.fail(&x, Some(&j), format!("F decreased from {a} to {b} under s = {s} and a PSD increment"));
        }
    }
    Ok(rep)
}

/// `F(x, J + J') >= F(x, J)` for `J in G_x` and `J' in M`.
pub fn check_m_monotonicity(pair: &OperatorPair, sampler: &JetSampler) -> Result<Report> {
    check_sampler(pair, sampler)?;
    let mut rep = Report::new(format!("m_monotonicity {}", pair.name));
    let mut rng = sampler.rng();
    for _ in 0..sampler.count {
        let x = sampler.point(&mut rng);
        let raw = sampler.jet(&mut rng);
        let Some(j) = pair.admissible(&mut rng, &x, &raw) else { continue };
        let m = pair.cone.sample_member(&mut rng, 2.0)?;
        rep.samples += 1;
        let (a, b) = (pair.evaluate(&x, &j), pair.evaluate(&x, &j.add(&m)));
        if b < a - 1e-9 * (1.0 + a.abs() + b.abs()) {
            rep.fail(&x, Some(&j), format!("F decreased from {a} to {b} after adding a cone member"));
        }
        if pair.constraint_classify(&x, &j.add(&m)).is_outside() {
            rep.fail(&x, Some(&j), "G_x + M leaves G_x");
        }
    }
    Ok(rep)
}

/// `F(y, J + eta J0) >= F(x, J)` for `J in G_x` and `|x - y| < delta`; the
/// largest such `delta` in `[h, diam]` is found by bisection and stored in
/// the metric `delta`. Failure at the lattice spacing fails the report.
pub fn check_regularity_ucf(pair: &OperatorPair, domain: &BoxDomain, eta: f64, opts: FiberegOptions) -> Result<Report> {
    if domain.dim() != pair.n {
        return Err(Error::DimensionMismatch { expected: pair.n, got: domain.dim() });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = Vec::with_capacity(opts.pairs);
    for _ in 0..opts.pairs {
        let x: Vec<f64> = (0..pair.n).map(|i| rng.gen_range(domain.lower()[i]..=domain.upper()[i])).collect();
        let u = unit_vector(&mut rng, pair.n);
        let s = rng.gen::<f64>();
        let raw = random_jet(&mut rng, pair.n, 2.0);
        if let Some(j) = pair.admissible(&mut rng, &x, &raw) {
            samples.push((x, u, s, j));
        }
    }
    let failures = |delta: f64| -> Vec<Violation> {
        samples
            .par_iter()
            .filter_map(|(x, u, s, j)| {
                let y = clamp(domain, &vadd(x, &vscale(u, s * delta)));
                let shifted = j.axpy(eta, &pair.j0);
                let (a, b) = (pair.evaluate(x, j), pair.evaluate(&y, &shifted));
                let bad = b < a - 1e-9 * (1.0 + a.abs() + b.abs()) || pair.constraint_classify(&y, &shifted).is_outside();
                bad.then(|| Violation {
                    x: x.clone(),
                    y: Some(y),
                    jet: Some(j.clone()),
                    detail: format!("F(y, J + eta J0) = {b} < F(x, J) = {a}"),
                })
            })
            .collect()
    };
    let mut rep = Report::new(format!("regularity_ucf {}", pair.name));
    rep.samples = samples.len();
    rep.metric("eta", eta);
    match bisect_delta(domain.h_min(), domain.diameter(), opts.iterations, |d| failures(d).is_empty()) {
        Some(delta) => {
            rep.metric("delta", delta);
        }
        None => {
            rep.metric("delta", 0.0);
            for v in failures(domain.h_min()) {
                rep.violation(v);
            }
        }
    }
    Ok(rep)
}

fn off_band(c: Classification) -> bool {
    c != Classification::Boundary
}

/// Inside exactly when `J` is Inside `G_x` and `F > tau`, and the oracle's
/// Inside/Outside verdicts agree with the `J0` shift test.
pub fn check_compatibility(c: &CorrespondenceSubequation, sampler: &JetSampler) -> Result<Report> {
    check_sampler(&c.base, sampler)?;
    let p = &c.base;
    let mut rep = Report::new(format!("compatibility {}", p.name));
    for (x, j) in sampler.samples() {
        let o = c.oracle.classify(&x, &j);
        let g = p.constraint_classify(&x, &j);
        let v = p.evaluate(&x, &j);
        rep.samples += 1;
        let formula = g.is_inside() && v > p.tau(&j, v);
        if o.is_inside() != formula {
            rep.fail(&x, Some(&j), format!("oracle {o}, G {g}, F = {v}"));
        }
        if off_band(o) {
            let refined = c.oracle.refined_classify(&x, &j);
            if refined != o {
                rep.fail(&x, Some(&j), format!("oracle {o}, shift test {refined}"));
            }
        }
    }
    Ok(rep)
}

/// For each lattice point some `t J0` lies in `Gamma(x) = {J in int G_x : F(x, J) > 0}`.
pub fn check_nonempty(c: &CorrespondenceSubequation, domain: &BoxDomain) -> Result<Report> {
    let mut rep = Report::new(format!("nonempty {}", c.base.name));
    let j0 = c.base.j0.clone();
    for idx in 0..domain.len() {
        let x = domain.point(idx);
        rep.samples += 1;
        let found = (0..40).map(|k| 2f64.powi(k - 5)).any(|t| c.oracle.classify(&x, &j0.scale(t)).is_inside());
        if !found {
            rep.fail(&x, None, "no witness t J0 in Gamma(x)");
        }
    }
    Ok(rep)
}

/// Classical subsolution test at `x` read directly from the pair:
/// `J^2_x phi` in `G_x` and `F(x, J^2_x phi) >= 0`. `None` inside the band.
pub fn admissible_subsolution_at(pair: &OperatorPair, phi: &dyn Classical, x: &[f64]) -> Option<bool> {
    let j = phi.jet(x)?;
    let g = pair.constraint_classify(x, &j);
    let v = pair.evaluate(x, &j);
    if g == Classification::Boundary || v.abs() <= pair.tau(&j, v) {
        return None;
    }
    Some(g.is_inside() && v > 0.0)
}

/// Direct subsolution test against oracle membership on random quadratics.
pub fn check_avsub_equivalence(c: &CorrespondenceSubequation, domain: &BoxDomain, count: usize, seed: u64) -> Result<Report> {
    let p = &c.base;
    let mut rep = Report::new(format!("avsub_equivalence {}", p.name));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut members, mut non_members) = (0.0, 0.0);
    for _ in 0..count {
        let x = domain.point(rng.gen_range(0..domain.len()));
        let raw = random_jet(&mut rng, p.n, 3.0);
        let j = if rng.gen_bool(0.5) { c.oracle.push_member(&mut rng, &x, &raw).unwrap_or(raw) } else { raw };
        let centre: Vec<f64> = (0..p.n).map(|i| rng.gen_range(domain.lower()[i]..=domain.upper()[i])).collect();
        let phi = crate::potential::QuadraticFunction::from_jet(&j, &x).recentered(&centre);
        let Some(direct) = admissible_subsolution_at(p, &phi, &x) else { continue };
        rep.samples += 1;
        let jx = phi.jet(&x).expect("quadratic");
        let oracle = c.oracle.classify(&x, &jx).is_member();
        if direct {
            members += 1.0;
        } else {
            non_members += 1.0;
        }
        if direct != oracle {
            rep.fail(&x, Some(&jx), format!("direct test {direct}, oracle membership {oracle}"));
        }
    }
    rep.metric("members", members);
    rep.metric("non_members", non_members);
    Ok(rep)
}

/// Every Boundary jet `J` has `J + eta J0` Inside for some `eta` in the grid,
/// and once Inside it stays Inside for the larger grid values.
pub fn check_t2_density(oracle: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    let mut rep = Report::new(format!("t2_density {}", oracle.name()));
    let mut rng = sampler.rng();
    for _ in 0..sampler.count {
        let x = sampler.point(&mut rng);
        let raw = sampler.jet(&mut rng);
        let Some(j) = boundary_projection(oracle, &x, &raw) else { continue };
        if oracle.classify(&x, &j) != Classification::Boundary {
            continue;
        }
        rep.samples += 1;
        let verdicts: Vec<bool> = ETA_GRID.iter().map(|eta| oracle.classify(&x, &j.axpy(*eta, oracle.j0())).is_inside()).collect();
        let first = verdicts.iter().position(|v| *v);
        match first {
            None => rep.fail(&x, Some(&j), "J + eta J0 never Inside on the grid"),
            Some(k) if verdicts[k..].iter().any(|v| !v) => rep.fail(&x, Some(&j), "Inside verdict not monotone in eta"),
            _ => {}
        }
    }
    Ok(rep)
}

/// If `J` is Inside at `x` then `J + eta J0` is Inside at every sampled `y`
/// with `|x - y| < delta`, for the `(eta, delta)` of a certificate.
pub fn check_t3_joint_interior(
    oracle: &SubequationOracle,
    cert: &FiberegCertificate,
    window: &JetWindow,
    samples: usize,
    seed: u64,
) -> Result<Report> {
    let mut rep = Report::new(format!("t3_joint_interior {}", oracle.name()));
    let dom = &cert.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x = dom.point(rng.gen_range(0..dom.len()));
        let raw = &window.points()[rng.gen_range(0..window.len())];
        let Some(j) = oracle.push_member(&mut rng, &x, raw) else { continue };
        if !oracle.classify(&x, &j).is_inside() {
            continue;
        }
        let u = unit_vector(&mut rng, dom.dim());
        let y = clamp(dom, &vadd(&x, &vscale(&u, rng.gen::<f64>() * cert.delta)));
        rep.samples += 1;
        let shifted = j.axpy(cert.eta, oracle.j0());
        let v = oracle.classify(&y, &shifted);
        if !v.is_inside() {
            rep.violation(Violation { x: x.clone(), y: Some(y), jet: Some(j), detail: format!("J + eta J0 is {v} at y") });
        }
    }
    rep.metric("eta", cert.eta);
    rep.metric("delta", cert.delta);
    Ok(rep)
}

/// Limits of members along converging sequences stay members: for a lattice
/// point `xbar` and `x_k = xbar + 2^-k h v`, the fiber-boundary jets `J_k`
/// at `x_k` converge, and the last one enters `F_xbar` within `tau_mem`.
pub fn check_closure_probe(oracle: &SubequationOracle, domain: &BoxDomain, sampler: &JetSampler) -> Result<Report> {
    let mut rep = Report::new(format!("closure_probe {}", oracle.name()));
    let mut rng = sampler.rng();
    let h = domain.h_min();
    for _ in 0..sampler.count {
        let xbar = domain.point(rng.gen_range(0..domain.len()));
        let v = unit_vector(&mut rng, domain.dim());
        let raw = sampler.jet(&mut rng);
        let seq: Option<Vec<Jet>> = (1..=40)
            .map(|k| {
                let xk = clamp(domain, &vadd(&xbar, &vscale(&v, h * 2f64.powi(-k))));
                boundary_projection(oracle, &xk, &raw)
            })
            .collect();
        let Some(seq) = seq else { continue };
        rep.samples += 1;
        let last = seq.last().expect("nonempty");
        let gap = crate::jet::jet_norm(&last.sub(&seq[seq.len() - 2]));
        let entry = oracle.entry_time(&xbar, last);
        let tau = tau_mem(last.norm());
        if entry > tau + gap {
            rep.fail(&xbar, Some(last), format!("limit jet needs a push {entry} > {tau} to enter F_xbar"));
        }
    }
    Ok(rep)
}

/// Union of the structural prechecks of the comparison theorem:
/// (i) proper ellipticity and M-monotonicity, (ii) the regularity inequality,
/// (iii) nonempty `Gamma(x)`, (iv) compatibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prechecks {
    pub monotonicity: Report,
    pub regularity: Report,
    pub nonempty: Report,
    pub compatibility: Report,
}

impl Prechecks {
    pub fn pass(&self) -> bool {
        self.monotonicity.pass && self.regularity.pass && self.nonempty.pass && self.compatibility.pass
    }

    /// First failing condition, labelled (i) to (iv).
    pub fn first_failure(&self) -> Option<(&'static str, &Report)> {
        [
            ("(i) M-monotonicity", &self.monotonicity),
            ("(ii) regularity", &self.regularity),
            ("(iii) nonempty", &self.nonempty),
            ("(iv) compatibility", &self.compatibility),
        ]
        .into_iter()
        .find(|(_, r)| !r.pass)
    }
}

/// Runs the four prechecks with moderate sample sizes.
pub fn run_prechecks(pair: &OperatorPair, domain: &BoxDomain, seed: u64) -> Result<Prechecks> {
    let sampler = JetSampler::new(pair.n, 1000, seed).with_domain(domain.clone());
    let mut mono = check_m_monotonicity(pair, &sampler)?;
    mono.absorb(&check_proper_ellipticity(pair, &sampler)?);
    let regularity = check_regularity_ucf(pair, domain, 0.1, FiberegOptions { pairs: 2000, iterations: 12, seed })?;
    let corr = build_correspondence(pair)?;
    let coarse = BoxDomain::new(domain.lower().to_vec(), domain.upper().to_vec(), domain.counts().iter().map(|c| (*c).min(7)).collect())?;
    let nonempty = check_nonempty(&corr, &coarse)?;
    let compatibility = check_compatibility(&corr, &sampler)?;
    Ok(Prechecks { monotonicity: mono, regularity, nonempty, compatibility })
}

/// Eigenvalues of `A + <b, p> P` at `x`, exposed for diagnostics.
pub fn pma_spectrum(b: &VectorField, pfield: &MatrixField, x: &[f64], j: &Jet) -> Vec<f64> {
    eigenvalues(&j.a.add(&pfield.eval(x).scale(dot(&b.eval(x), &j.p))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Ot,
    Krylov,
    Pma,
    Garding,
}

/// JSON form `{name, fields, cone, domain}` of an operator pair. `fields`
/// depends on `name`; a supplied `cone` must equal the derived one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescriptor {
    pub name: OperatorKind,
    pub fields: serde_json::Value,
    #[serde(default)]
    pub cone: Option<ConeDescriptor>,
    pub domain: BoxDomain,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OtFields {
    g: ScalarSpec,
    f: ScalarSpec,
    #[serde(rename = "D")]
    d: DirectionalCone,
    qbar: Vec<f64>,
    #[serde(default)]
    omega: Option<Modulus>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KrylovFields {
    f: ScalarSpec,
    n_space: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PmaFields {
    b: VectorSpec,
    #[serde(rename = "P")]
    p: MatrixSpec,
    f: ScalarSpec,
    nu: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GardingFields {
    g: HyperbolicPolynomial,
    f: ScalarSpec,
}

impl OperatorDescriptor {
    pub fn build(&self) -> Result<OperatorPair> {
        let dom = &self.domain;
        let n = dom.dim();
        let fields = self.fields.clone();
        let pair = match self.name {
            OperatorKind::Ot => {
                let v: OtFields = serde_json::from_value(fields)?;
                make_ot_operator(ScalarField::from_spec(v.g, n)?, ScalarField::from_spec(v.f, n)?, v.d, v.qbar, v.omega, dom)?
            }
            OperatorKind::Krylov => {
                let v: KrylovFields = serde_json::from_value(fields)?;
                make_krylov_operator(ScalarField::from_spec(v.f, n)?, v.n_space, dom)?
            }
            OperatorKind::Pma => {
                let v: PmaFields = serde_json::from_value(fields)?;
                make_pma_operator(
                    VectorField::from_spec(v.b, n)?,
                    MatrixField::from_spec(v.p, n)?,
                    ScalarField::from_spec(v.f, n)?,
                    v.nu,
                    dom,
                )?
            }
            OperatorKind::Garding => {
                let v: GardingFields = serde_json::from_value(fields)?;
                make_garding_operator(v.g, ScalarField::from_spec(v.f, n)?, dom)?
            }
        };
        if let Some(c) = &self.cone {
            let declared = MonotonicityCone::from_descriptor(c)?.descriptor()?;
            if declared != pair.cone().descriptor()? {
                return Err(Error::InvalidParameter(format!("declared cone {declared:?} differs from the operator's {}", pair.cone().name())));
            }
        }
        Ok(pair)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxDomain {
        BoxDomain::unit_cube(2, 11).unwrap()
    }

    fn ot(f: ScalarField) -> Result<OperatorPair> {
        make_ot_operator(
            ScalarField::from_spec(ScalarSpec::Affine { offset: 1.0, slope: vec![1.0, 1.0] }, 2).unwrap(),
            f,
            DirectionalCone::orthant(2).unwrap(),
            vec![1.0, 1.0],
            Some(Modulus { c: 2.0, s: 1.0 }),
            &unit(),
        )
    }

    #[test]
    fn ot_pair_at_interior_direction() {
        let pair = ot(ScalarField::constant(0.0)).unwrap();
        let c = build_correspondence(&pair).unwrap();
        let j = Jet::new(0.0, vec![1.0, 1.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(pair.evaluate(&[0.5, 0.5], &j), 3.0);
        assert_eq!(c.oracle.classify(&[0.5, 0.5], &j), Classification::Inside);
    }

    #[test]
    fn constant_g_rejected() {
        let r = make_ot_operator(
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            DirectionalCone::orthant(2).unwrap(),
            vec![1.0, 1.0],
            None,
            &unit(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn omega_is_fitted_for_affine_g() {
        assert!(make_ot_operator(
            ScalarField::from_spec(ScalarSpec::Affine { offset: 1.0, slope: vec![1.0, 1.0] }, 2).unwrap(),
            ScalarField::constant(1.0),
            DirectionalCone::orthant(2).unwrap(),
            vec![1.0, 1.0],
            None,
            &unit(),
        )
        .is_ok());
    }

    #[test]
    fn krylov_examples() {
        let dom = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 1.0], vec![5, 5]).unwrap();
        let pair = make_krylov_operator(ScalarField::constant(0.5), 1, &dom).unwrap();
        let c = build_correspondence(&pair).unwrap();
        let x = [0.0, 0.5];
        let j = Jet::new(0.0, vec![0.0, -2.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(pair.evaluate(&x, &j), 1.5);
        let flat = Jet::new(0.0, vec![0.0, 0.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(c.oracle.classify(&x, &flat), Classification::Outside);
        let bad = Jet::new(0.0, vec![0.0, -1.0], SymMatrix::diag(&[-1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(c.oracle.classify(&x, &bad), Classification::Outside);
        let zero = make_krylov_operator(ScalarField::constant(0.0), 1, &dom).unwrap();
        let zc = build_correspondence(&zero).unwrap();
        assert_eq!(zc.oracle.classify(&x, &flat), Classification::Boundary);
    }

    #[test]
    fn pma_example() {
        let pair = make_pma_operator(
            VectorField::from_spec(VectorSpec::Constant { value: vec![1.0, 0.0] }, 2).unwrap(),
            MatrixField::from_spec(MatrixSpec::Constant { value: SymMatrix::diag(&[1.0, 0.0]).unwrap() }, 2).unwrap(),
            ScalarField::constant(0.0),
            vec![1.0, 0.0],
            &unit(),
        )
        .unwrap();
        let j = Jet::new(0.0, vec![1.0, 0.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(pair.evaluate(&[0.3, 0.3], &j), 2.0);
        let k = Jet::new(0.0, vec![0.0, 4.0], SymMatrix::diag(&[2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(pair.evaluate(&[0.3, 0.3], &k), 6.0);
    }

    #[test]
    fn pma_rejects_bad_nu() {
        let r = make_pma_operator(
            VectorField::from_spec(VectorSpec::Constant { value: vec![1.0, 0.0] }, 2).unwrap(),
            MatrixField::from_spec(MatrixSpec::Constant { value: SymMatrix::diag(&[1.0, 0.0]).unwrap() }, 2).unwrap(),
            ScalarField::constant(0.0),
            vec![-1.0, 0.0],
            &unit(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_locus_is_boundary() {
        let pair = ot(ScalarField::constant(3.0)).unwrap();
        let c = build_correspondence(&pair).unwrap();
        let j = Jet::new(0.0, vec![1.0, 1.0], SymMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(c.oracle.classify(&[0.2, 0.2], &j), Classification::Boundary);
    }

    #[test]
    fn descriptor_specs_parse() {
        let s: ScalarSpec = serde_json::from_str(r#"{"kind":"radial","offset":1,"coeff":0.25}"#).unwrap();
        assert_eq!(s.eval(&[2.0, 0.0]), 2.0);
        assert!(serde_json::from_str::<ScalarSpec>(r#"{"kind":"radial","offset":1,"coeff":0.25,"bogus":1}"#).is_err());
    }
    #[test]
    fn descriptor_builds_ot_pair() {
        let json = r#"{
            "name": "ot",
            "fields": {
                "g": {"kind": "affine", "offset": 1, "slope": [1, 1]},
                "f": {"kind": "radial", "offset": 1, "coeff": 0.25},
                "D": {"n": 2, "normals": [[1, 0], [0, 1]]},
                "qbar": [1, 1],
                "omega": {"c": 2, "s": 1}
            },
            "domain": {"lower": [0, 0], "upper": [1, 1], "counts": [11, 11]}
        }"#;
        let d: OperatorDescriptor = serde_json::from_str(json).unwrap();
        let pair = d.build().unwrap();
        assert_eq!(pair.name(), "ot");
        let mut bad: serde_json::Value = serde_json::from_str(json).unwrap();
        bad["fields"]["extra"] = serde_json::json!(1);
        let bad: OperatorDescriptor = serde_json::from_value(bad).unwrap();
        assert!(bad.build().is_err());
    }
}
