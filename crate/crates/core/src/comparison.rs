//! Comparison and zero-maximum-principle harnesses, the definitional
//! comparison probe and the standard-condition failure driver.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cones::{strict_approximator, ApproximatorMode, MonotonicityCone, StrictApproximator};
use crate::duality::SubequationOracle;
use crate::garding::HyperbolicPolynomial;
use crate::jet::{dot, lambda_min, vnorm, vscale, vsub, DirectionalCone, Jet, SymMatrix};
use crate::operators::{
    build_correspondence, make_garding_operator, make_krylov_operator, make_ot_operator, run_prechecks, Modulus,
    OperatorPair, Prechecks, ScalarField, ScalarSpec,
};
use crate::potential::{
    classical_subharmonic_check, find_bad_test_jet, Affinely, BoundaryMode, BoxDomain, Classical, ClosureFunction, Face,
    GridFunction, QuadraticFunction, Side,
};
use crate::report::{Report, Violation, MAX_LISTED};
use crate::tolerances::{tau_mem, tol_fd};
use crate::{Error, Result};

/// `eps_probe = PROBE_FACTOR * tol_fd`.
pub const PROBE_FACTOR: f64 = 10.0;
/// `LHS_n` threshold for the failure signal.
pub const LHS_THRESHOLD: f64 = 0.9;
/// Modulus-argument threshold for the failure signal.
pub const MODULUS_THRESHOLD: f64 = 1e-3;
/// Largest admissible normalized violation of the block inequality.
pub const CAB_TOLERANCE: f64 = 1e-10;

/// Sub- or supersolution given in closed form or as lattice values.
#[derive(Clone)]
pub enum TestFunction {
    Classical(Arc<dyn Classical>),
    Grid(GridFunction),
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::Classical(c) => write!(f, "Classical(dim {})", c.dim()),
            TestFunction::Grid(g) => write!(f, "Grid({:?})", g.domain.counts()),
        }
    }
}

fn same_lattice(a: &BoxDomain, b: &BoxDomain) -> bool {
    a.lower() == b.lower() && a.upper() == b.upper() && a.counts() == b.counts()
}

impl TestFunction {
    pub fn values(&self, dom: &BoxDomain) -> Result<Vec<f64>> {
        match self {
            TestFunction::Classical(c) => {
                if c.dim() != dom.dim() {
                    return Err(Error::DimensionMismatch { expected: dom.dim(), got: c.dim() });
                }
                Ok((0..dom.len()).into_par_iter().map(|i| c.value(&dom.point(i))).collect())
            }
            TestFunction::Grid(g) => {
                if !same_lattice(&g.domain, dom) {
                    return Err(Error::Precondition("grid function lives on a different lattice".into()));
                }
                Ok(g.values.clone())
            }
        }
    }

    pub fn sample(&self, dom: &BoxDomain) -> Result<GridFunction> {
        match self {
            TestFunction::Grid(g) => Ok(g.clone()),
            TestFunction::Classical(c) => GridFunction::from_classical(dom, c.as_ref()),
        }
    }
}

/// Screens `f` against `oracle` on interior lattice points: exact jets for
/// classical input, the bad-test-jet search for grid input.
fn screen(f: &TestFunction, oracle: &SubequationOracle, dom: &BoxDomain, what: &str) -> Result<()> {
    match f {
        TestFunction::Classical(c) => {
            let r = classical_subharmonic_check(c.as_ref(), oracle, dom, false)?;
            if !r.pass {
                let v = &r.violations[0];
                return Err(Error::Screening(format!("{what} fails the {} check at {:?}: {}", oracle.name(), v.x, v.detail)));
            }
        }
        TestFunction::Grid(g) => {
            if !same_lattice(&g.domain, dom) {
                return Err(Error::Precondition(format!("{what} lives on a different lattice")));
            }
            let bad = dom
                .interior_indices()
                .into_par_iter()
                .find_map_first(|i| find_bad_test_jet(g, oracle, i).map(|(j, eps)| (i, j, eps)));
            if let Some((i, j, eps)) = bad {
                return Err(Error::Screening(format!(
                    "{what} admits a bad test jet {j:?} (eps = {eps}) for {} at {:?}",
                    oracle.name(),
                    dom.point(i)
                )));
            }
        }
    }
    Ok(())
}

fn negated(f: &TestFunction) -> TestFunction {
    match f {
        TestFunction::Classical(c) => {
            let n = c.dim();
            TestFunction::Classical(Arc::new(Affinely { base: c.clone(), shift: vec![0.0; n], scale: -1.0, offset: 0.0 }))
        }
        TestFunction::Grid(g) => TestFunction::Grid(GridFunction {
            domain: g.domain.clone(),
            values: g.values.iter().map(|v| -v).collect(),
            blowup: None,
        }),
    }
}

/// Strict approximator matching the boundary mode: elliptic for `Full`,
/// blowing down on an excluded face for `Reduced`.
pub fn approximator_for(cone: &MonotonicityCone, dom: &BoxDomain, mode: BoundaryMode) -> Result<StrictApproximator> {
    match mode {
        BoundaryMode::Full => strict_approximator(cone, dom, ApproximatorMode::Elliptic),
        BoundaryMode::Reduced if dom.excluded_faces().is_empty() => strict_approximator(cone, dom, ApproximatorMode::Elliptic),
        BoundaryMode::Reduced => {
            let psi = strict_approximator(cone, dom, ApproximatorMode::Parabolic)?;
            match psi.blowup {
                Some(face) if dom.excluded_faces().contains(&face) => Ok(psi),
                other => Err(Error::NoApproximator(format!(
                    "the approximator for {} blows down on {other:?}, which is not an excluded face ({:?})",
                    cone.name(),
                    dom.excluded_faces()
                ))),
            }
        }
    }
}

/// Admissible sub/supersolution pair for an operator on a box.
#[derive(Debug, Clone)]
pub struct ComparisonExperiment {
    pub name: String,
    pub operator: OperatorPair,
    pub domain: BoxDomain,
    pub sub: TestFunction,
    pub sup: TestFunction,
    pub mode: BoundaryMode,
    pub params: Value,
}

/// Contrapositive probe: after lifting `u` so that `max (u - w) = eps_probe`,
/// some designated boundary cell has `u - w > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub eps_probe: f64,
    pub shift: f64,
    pub touch: Option<Vec<f64>>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment: String,
    pub params: Value,
    pub prechecks: Prechecks,
    pub boundary_max: f64,
    pub interior_max: f64,
    pub witnesses: Vec<Violation>,
    pub pass: bool,
    pub probe: ProbeOutcome,
    pub report: Report,
}

/// Checks the structural conditions, then compares `u` and `w`.
pub fn run_comparison(e: &ComparisonExperiment, seed: u64) -> Result<ComparisonReport> {
    let pre = run_prechecks(&e.operator, &e.domain, seed)?;
    run_comparison_with(e, &pre)
}

fn require_prechecks(pre: &Prechecks) -> Result<()> {
    match pre.first_failure() {
        None => Ok(()),
        Some((condition, r)) => Err(Error::Precheck {
            condition: condition.to_string(),
            detail: r.violations.first().map_or_else(|| r.notes.join("; "), |v| format!("{} at {:?}", v.detail, v.x)),
        }),
    }
}

/// [`run_comparison`] with precomputed structural prechecks.
pub fn run_comparison_with(e: &ComparisonExperiment, pre: &Prechecks) -> Result<ComparisonReport> {
    let dom = &e.domain;
    if dom.dim() != e.operator.dim() {
        return Err(Error::DimensionMismatch { expected: e.operator.dim(), got: dom.dim() });
    }
    require_prechecks(pre)?;
    let psi = approximator_for(e.operator.cone(), dom, e.mode)?;
    let corr = build_correspondence(&e.operator)?;
    screen(&e.sub, &corr.oracle, dom, "subsolution")?;
    screen(&negated(&e.sup), &corr.oracle.dual(), dom, "negated supersolution")?;

    let u = e.sub.values(dom)?;
    let w = e.sup.values(dom)?;
    let h = dom.h_max();
    let mut report = Report::new(format!("comparison {}", e.name));
    report.note(format!("strict approximator {:?}", psi.kind));
    let mut boundary_max = f64::NEG_INFINITY;
    let mut interior_max = f64::NEG_INFINITY;
    let mut top = (f64::NEG_INFINITY, 0usize);
    let mut scale: f64 = 0.0;
    for i in 0..dom.len() {
        let designated = dom.is_designated_boundary(i, e.mode);
        let inside = !dom.is_boundary(i);
        if !(designated || inside) {
            continue;
        }
        let d = u[i] - w[i];
        let s = u[i].abs().max(w[i].abs());
        scale = scale.max(s);
        if d > top.0 {
            top = (d, i);
        }
        if designated {
            boundary_max = boundary_max.max(d);
            report.samples += 1;
            if d > tau_mem(s) {
                report.fail(&dom.point(i), None, format!("boundary condition violated: u - w = {d}"));
            }
        } else {
            interior_max = interior_max.max(d);
            report.samples += 1;
            if d > tol_fd(h, s) {
                report.fail(&dom.point(i), None, format!("u - w = {d} in the interior"));
            }
        }
    }
    let eps_probe = PROBE_FACTOR * tol_fd(h, scale);
    let shift = eps_probe - top.0;
    let touch = (0..dom.len())
        .filter(|&i| dom.is_designated_boundary(i, e.mode) && u[i] + shift - w[i] > 0.0)
        .max_by(|&a, &b| (u[a] - w[a]).total_cmp(&(u[b] - w[b])))
        .map(|i| dom.point(i));
    let probe = ProbeOutcome { eps_probe, shift, pass: touch.is_some(), touch };
    if !probe.pass {
        report.fail(&dom.point(top.1), None, format!("lifting u by {shift} leaves u <= w on the boundary"));
    }
    report.metric("boundary_max", boundary_max);
    report.metric("interior_max", interior_max);
    report.metric("eps_probe", eps_probe);
    Ok(ComparisonReport {
        experiment: e.name.clone(),
        params: e.params.clone(),
        prechecks: pre.clone(),
        boundary_max,
        interior_max,
        witnesses: report.violations.clone(),
        pass: report.pass,
        probe,
        report,
    })
}

/// Runs experiments in parallel; prechecks are computed once per distinct
/// operator and domain.
pub fn run_comparisons(exps: &[ComparisonExperiment], seed: u64) -> Result<Vec<ComparisonReport>> {
    let mut keys: Vec<usize> = Vec::new();
    let mut owner = Vec::with_capacity(exps.len());
    for (i, e) in exps.iter().enumerate() {
        let found = keys.iter().position(|&k| exps[k].operator.same_operator(&e.operator) && exps[k].domain == e.domain);
        owner.push(match found {
            Some(p) => p,
            None => {
                keys.push(i);
                keys.len() - 1
            }
        });
    }
    let pres: Vec<Prechecks> =
        keys.par_iter().map(|&k| run_prechecks(&exps[k].operator, &exps[k].domain, seed)).collect::<Result<_>>()?;
    exps.par_iter().zip(owner).map(|(e, o)| run_comparison_with(e, &pres[o])).collect()
}

/// Input of the zero maximum principle harness.
#[derive(Clone)]
pub enum ZmpSubject {
    /// `z` is the sum of the pieces; its exact jets are screened.
    Pieces(Vec<Arc<dyn Classical>>),
    /// Lattice values screened by the bad-test-jet search.
    Grid(GridFunction),
}

/// Zero maximum principle for the dual of `cone`: with `z <= 0` on the
/// designated boundary, the interior maximum must be at most `tol_fd`.
pub fn run_zmp(cone: &MonotonicityCone, dom: &BoxDomain, z: &ZmpSubject, mode: BoundaryMode) -> Result<Report> {
    if cone.dim() != dom.dim() {
        return Err(Error::DimensionMismatch { expected: cone.dim(), got: dom.dim() });
    }
    let dual = SubequationOracle::constant(cone.clone())?.dual();
    let values = match z {
        ZmpSubject::Pieces(pieces) => {
            if pieces.is_empty() {
                return Err(Error::InvalidParameter("no pieces".into()));
            }
            let sum: Arc<dyn Classical> = Arc::new(crate::potential::SumFunction(pieces.clone()));
            screen(&TestFunction::Classical(sum.clone()), &dual, dom, "z")?;
            TestFunction::Classical(sum).values(dom)?
        }
        ZmpSubject::Grid(g) => {
            screen(&TestFunction::Grid(g.clone()), &dual, dom, "z")?;
            g.values.clone()
        }
    };
    let psi = approximator_for(cone, dom, mode)?;
    let mut rep = Report::new(format!("zmp {}", cone.name()));
    rep.note(format!("strict approximator {:?}", psi.kind));
    let h = dom.h_max();
    let mut boundary_max = f64::NEG_INFINITY;
    let mut interior = (f64::NEG_INFINITY, 0usize);
    for (i, v) in values.iter().enumerate() {
        if dom.is_designated_boundary(i, mode) {
            boundary_max = boundary_max.max(*v);
        } else if !dom.is_boundary(i) && *v > interior.0 {
            interior = (*v, i);
        }
    }
    rep.samples = values.len();
    rep.metric("boundary_max", boundary_max);
    rep.metric("interior_max", interior.0);
    rep.note(format!("interior max at {:?}", dom.point(interior.1)));
    let scale = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    if boundary_max > tau_mem(scale) {
        rep.mark_inconclusive(format!("boundary max {boundary_max} > 0; nothing to assert"));
    } else if interior.0 > tol_fd(h, scale) {
        rep.fail(&dom.point(interior.1), None, format!("interior max {} with boundary max {boundary_max}", interior.0));
    }
    Ok(rep)
}

fn random_quadratic(rng: &mut ChaCha8Rng, n: usize, scale: f64, center: &[f64]) -> QuadraticFunction {
    let mut a = SymMatrix::zeros(n).expect("dimension checked");
    for i in 0..n {
        for j in i..n {
            a.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    let p0 = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    QuadraticFunction { r0: rng.gen_range(-scale..scale), p0, a0: a, center: center.to_vec() }
}

fn strictly_in(v: &dyn Classical, f: &SubequationOracle, dom: &BoxDomain) -> bool {
    (0..dom.len()).into_par_iter().all(|i| {
        let x = dom.point(i);
        v.jet(&x).is_some_and(|j| f.classify(&x, &j).is_inside())
    })
}

/// Samples strictly dual-subharmonic quadratics `v`, anchors them so that
/// `u + v <= 0` on the boundary and requires `u + v <= tol_fd` inside.
/// An empty battery is inconclusive.
pub fn definitional_comparison_probe(
    u: &dyn Classical,
    f: &SubequationOracle,
    dom: &BoxDomain,
    count: usize,
    seed: u64,
) -> Result<Report> {
    let n = dom.dim();
    if u.dim() != n || f.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.dim().min(f.dim()) });
    }
    let dual = f.dual();
    let mut rep = Report::new(format!("definitional_comparison {}", f.name()));
    let uc = classical_subharmonic_check(u, f, dom, false)?;
    rep.note(format!("u passes the classical check: {}", uc.pass));
    let uv: Vec<f64> = (0..dom.len()).map(|i| u.value(&dom.point(i))).collect();
    let usup = uv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = dom.center();
    let h = dom.h_max();
    let mut accepted = 0;
    for _ in 0..count {
        let v = random_quadratic(&mut rng, n, 2.0, &center);
        let slack = rng.gen_range(0.0..0.1) * (1.0 + usup);
        let vv: Vec<f64> = (0..dom.len()).map(|i| v.value(&dom.point(i))).collect();
        let bmax = (0..dom.len()).filter(|&i| dom.is_boundary(i)).map(|i| uv[i] + vv[i]).fold(f64::NEG_INFINITY, f64::max);
        let shift = bmax + slack;
        let v = v.shifted(-shift);
        if !strictly_in(&v, &dual, dom) {
            continue;
        }
        accepted += 1;
        let worst = dom
            .interior_indices()
            .into_iter()
            .map(|i| (uv[i] + vv[i] - shift, i))
            .fold((f64::NEG_INFINITY, 0), |b, c| if c.0 > b.0 { c } else { b });
        if worst.0 > tol_fd(h, uv[worst.1].abs().max((vv[worst.1] - shift).abs())) {
            let x = dom.point(worst.1);
            rep.fail(&x, v.jet(&x).as_ref(), format!("u + v = {} inside with u + v <= 0 on the boundary", worst.0));
        }
    }
    rep.samples = accepted;
    rep.metric("battery", accepted as f64);
    if accepted == 0 {
        rep.mark_inconclusive("no strictly dual-subharmonic quadratic was found");
    }
    Ok(rep)
}

/// Parameters of the standard-condition counterexample in the plane:
/// `b(x) = |x - x0|^beta e`, `g(x) = |x - x0|^gamma_z`,
/// `P = diag(h, 0)` with `h = 6 g^2 / (|<b, x0 - x>| + g^2)`, and
/// `y_n = x0 + 2^-n d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleRun {
    pub beta: f64,
    pub gamma_z: f64,
    pub x0: Vec<f64>,
    pub direction: Vec<f64>,
    pub b_direction: Vec<f64>,
    pub f: ScalarSpec,
}

impl CounterexampleRun {
    /// `e = -d / |d|`, `f = 1`; rejects parameters outside
    /// `beta in (0, 3)`, `gamma_z in ((beta + 1) / 2, 2)`.
    pub fn new(beta: f64, gamma_z: f64, x0: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        let run = Self::unchecked(beta, gamma_z, x0, direction)?;
        run.validate()?;
        Ok(run)
    }

    /// Same construction without the range check on `beta` and `gamma_z`.
    pub fn unchecked(beta: f64, gamma_z: f64, x0: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if x0.len() != 2 || direction.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x0.len().max(direction.len()) });
        }
        let len = vnorm(&direction);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParameter("direction must be a nonzero vector".into()));
        }
        let direction = vscale(&direction, 1.0 / len);
        let b_direction = vscale(&direction, -1.0);
        Ok(Self { beta, gamma_z, x0, direction, b_direction, f: ScalarSpec::Constant { value: 1.0 } })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 3.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must lie in (0, 3)", self.beta)));
        }
        let lo = (self.beta + 1.0) / 2.0;
        if !(self.gamma_z > lo && self.gamma_z < 2.0) {
            return Err(Error::InvalidParameter(format!("gamma_z = {} must lie in ({lo}, 2)", self.gamma_z)));
        }
        Ok(())
    }

    pub fn b(&self, x: &[f64]) -> Vec<f64> {
        vscale(&self.b_direction, vnorm(&vsub(x, &self.x0)).powf(self.beta))
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        vnorm(&vsub(x, &self.x0)).powf(self.gamma_z)
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        let g2 = self.g(x).powi(2);
        let s = dot(&self.b(x), &vsub(&self.x0, x)).abs();
        if s + g2 == 0.0 {
            0.0
        } else {
            6.0 * g2 / (s + g2)
        }
    }

    /// `F(x, p, A) = det(A + <b(x), p> P(x)) - f(x)`.
    pub fn operator(&self, x: &[f64], p: &[f64], a: &SymMatrix) -> Result<f64> {
        let f = ScalarField::from_spec(self.f.clone(), 2)?;
        let perturb = SymMatrix::diag(&[dot(&self.b(x), p) * self.h(x), 0.0])?;
        Ok(a.add(&perturb).det() - f.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleStep {
    pub n: usize,
    pub y: Vec<f64>,
    pub alpha: f64,
    #[serde(rename = "A")]
    pub a: SymMatrix,
    #[serde(rename = "B")]
    pub b: SymMatrix,
    pub lhs: f64,
    pub m: f64,
    pub cab_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleTrace {
    pub run: CounterexampleRun,
    pub steps: Vec<CounterexampleStep>,
    pub n_star: Option<usize>,
    pub report: Report,
}

/// Largest violation of `-3 alpha I <= diag(A, -B) <= 3 alpha [[I, -I], [-I, I]]`,
/// measured on both sides after dividing by `3 alpha`.
pub fn cab_violation(a: &SymMatrix, b: &SymMatrix, alpha: f64) -> Result<f64> {
    let n = a.dim();
    let mut block = SymMatrix::zeros(2 * n)?;
    let mut coupling = SymMatrix::zeros(2 * n)?;
    for i in 0..n {
        for j in 0..n {
            block.set(i, j, a.get(i, j));
            block.set(n + i, n + j, -b.get(i, j));
        }
        coupling.set(i, i, 1.0);
        coupling.set(n + i, n + i, 1.0);
        coupling.set(i, n + i, -1.0);
    }
    let scaled = block.scale(1.0 / (3.0 * alpha));
    let lower = lambda_min(&scaled.shift(1.0));
    let upper = lambda_min(&coupling.sub(&scaled));
    Ok((-lower).max(-upper).max(0.0))
}

/// For `n = 1..=n_max`, with `r = 2^-n`, `y_n = x0 + r d`,
/// `2 A_n = B_n = diag(0, 1 / g(y_n))`, `alpha_n = 1 / (3 g(y_n))` and
/// `p = alpha_n (x0 - y_n)`, records
/// `LHS_n = F(y_n, p, A_n) - F(x0, p, B_n)` and
/// `m_n = alpha_n |y_n - x0|^2 + |y_n - x0|`. `N*` is the first `n` from
/// which `LHS_n >= 0.9` and `m_n <= 1e-3` hold through `n_max`.
pub fn run_standard_condition_failure(c: &CounterexampleRun, n_max: usize) -> Result<CounterexampleTrace> {
    if c.x0.len() != 2 || c.direction.len() != 2 || c.b_direction.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: c.x0.len() });
    }
    if n_max == 0 || n_max > 60 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} must lie in 1..=60")));
    }
    ScalarField::from_spec(c.f.clone(), 2)?;
    let mut rep = Report::new(format!("standard_condition_failure beta={} gamma_z={}", c.beta, c.gamma_z));
    let mut steps = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let r = 0.5f64.powi(n as i32);
        let y: Vec<f64> = (0..2).map(|i| c.x0[i] + r * c.direction[i]).collect();
        let gy = c.g(&y);
        let alpha = 1.0 / (3.0 * gy);
        let b = SymMatrix::diag(&[0.0, 1.0 / gy])?;
        let a = b.scale(0.5);
        let p = vscale(&vsub(&c.x0, &y), alpha);
        let lhs = c.operator(&y, &p, &a)? - c.operator(&c.x0, &p, &b)?;
        let dist = vnorm(&vsub(&y, &c.x0));
        let m = alpha * dist * dist + dist;
        let cab = cab_violation(&a, &b, alpha)?;
        rep.samples += 1;
        if dot(&c.b(&y), &vsub(&c.x0, &y)) <= 0.0 {
            rep.fail(&y, None, format!("<b(y_n), x0 - y_n> <= 0 at n = {n}"));
        }
        if cab > CAB_TOLERANCE {
            rep.fail(&y, None, format!("block inequality violated by {cab} at n = {n}"));
        }
        steps.push(CounterexampleStep { n, y, alpha, a, b, lhs, m, cab_violation: cab });
    }
    let mut n_star = None;
    for s in steps.iter().rev() {
        if s.lhs >= LHS_THRESHOLD && s.m <= MODULUS_THRESHOLD {
            n_star = Some(s.n);
        } else {
            break;
        }
    }
    let last = steps.last().expect("n_max >= 1");
    rep.metric("lhs_last", last.lhs);
    rep.metric("m_last", last.m);
    match n_star {
        Some(k) => rep.metric("n_star", k as f64),
        None => rep.fail(&last.y, None, format!("no failure signal: LHS = {} and m = {} at n = {}", last.lhs, last.m, last.n)),
    }
    Ok(CounterexampleTrace { run: c.clone(), steps, n_star, report: rep })
}

/// CSV trace with columns `n, lhs, m, alpha, cab_violation`.
pub fn write_trace_csv<W: Write>(trace: &CounterexampleTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "lhs", "m", "alpha", "cab_violation"])?;
    for s in &trace.steps {
        out.write_record([s.n.to_string(), s.lhs.to_string(), s.m.to_string(), s.alpha.to_string(), s.cab_violation.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Optimal transport pair `g(p) = 1 + p_1 + p_2`, `f = 1 + shift + |x|^2 / 4`
/// on the orthant, `qbar = (1, 1)`, `omega = 2 eta`.
pub fn ot_pair(dom: &BoxDomain, f_shift: f64) -> Result<OperatorPair> {
    make_ot_operator(
        ScalarField::from_spec(ScalarSpec::Affine { offset: 1.0, slope: vec![1.0, 1.0] }, 2)?,
        ScalarField::from_spec(ScalarSpec::Radial { offset: 1.0 + f_shift, coeff: 0.25, center: None, power: 2.0 }, 2)?,
        DirectionalCone::orthant(2)?,
        vec![1.0, 1.0],
        Some(Modulus { c: 2.0, s: 1.0 }),
        dom,
    )
}

/// Seeded OT candidates: `u = c0 + a <q, x> + x^T S x / 2` and affine `w`
/// with slope in the orthant, lifted to dominate `u` on the boundary.
pub fn ot_candidates(dom: &BoxDomain, count: usize, seed: u64) -> Result<Vec<(QuadraticFunction, QuadraticFunction)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = vec![0.0; 2];
    let boundary: Vec<Vec<f64>> = (0..dom.len()).filter(|&i| dom.is_boundary(i)).map(|i| dom.point(i)).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let a = rng.gen_range(0.1..1.0);
        let q = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let off = rng.gen_range(0.0..0.3);
        let s = SymMatrix::from_rows(&[vec![rng.gen_range(0.8..2.5), off], vec![off, rng.gen_range(0.8..2.5)]])?;
        let u = QuadraticFunction { r0: rng.gen_range(-1.0..1.0), p0: vec![a * q[0], a * q[1]], a0: s, center: origin.clone() };
        let m = vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
        let lin = QuadraticFunction { r0: 0.0, p0: m, a0: SymMatrix::zeros(2)?, center: origin.clone() };
        let k = boundary.iter().map(|x| u.value(x) - lin.value(x)).fold(f64::NEG_INFINITY, f64::max) + rng.gen_range(0.0..0.2);
        out.push((u, lin.shifted(k)));
    }
    Ok(out)
}

/// True when `u` is an admissible subsolution and `w` an admissible
/// supersolution of the pair at every interior lattice point.
pub fn is_admissible_pair(pair: &OperatorPair, dom: &BoxDomain, u: &TestFunction, w: &TestFunction) -> Result<bool> {
    let corr = build_correspondence(pair)?;
    let sub = screen(u, &corr.oracle, dom, "subsolution");
    let sup = screen(&negated(w), &corr.oracle.dual(), dom, "negated supersolution");
    match (sub, sup) {
        (Ok(()), Ok(())) => Ok(true),
        (Err(Error::Screening(_)), _) | (_, Err(Error::Screening(_))) => Ok(false),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn classical(q: QuadraticFunction) -> TestFunction {
    TestFunction::Classical(Arc::new(q))
}

/// Admissible OT experiments on the `grid x grid` lattice of `[0, 1]^2`,
/// drawn from seeded candidates until `count` pass the screening.
pub fn ot_battery(count: usize, grid: usize, seed: u64) -> Result<Vec<ComparisonExperiment>> {
    let dom = BoxDomain::unit_cube(2, grid)?;
    let pair = ot_pair(&dom, 0.0)?;
    let cands = ot_candidates(&dom, 8 * count, seed)?;
    let admissible: Vec<bool> = cands
        .par_iter()
        .map(|(u, w)| is_admissible_pair(&pair, &dom, &classical(u.clone()), &classical(w.clone())))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(count);
    for (k, ((u, w), ok)) in cands.into_iter().zip(admissible).enumerate() {
        if !ok {
            continue;
        }
        out.push(ComparisonExperiment {
            name: format!("ot-{k}"),
            operator: pair.clone(),
            domain: dom.clone(),
            params: json!({ "seed": seed, "candidate": k, "u": u, "w": w }),
            sub: classical(u),
            sup: classical(w),
            mode: BoundaryMode::Full,
        });
        if out.len() == count {
            return Ok(out);
        }
    }
    Err(Error::Precondition(format!("only {} admissible OT pairs among {} candidates", out.len(), 8 * count)))
}

/// Copy of `e` whose subsolution is sampled on the lattice and raised at the
/// designated boundary cell where `u - w` is largest, so that it exceeds `w`
/// there by `excess`.
pub fn corrupt_boundary(e: &ComparisonExperiment, excess: f64) -> Result<ComparisonExperiment> {
    let dom = &e.domain;
    let mut g = e.sub.sample(dom)?;
    let w = e.sup.values(dom)?;
    let (gap, i) = (0..dom.len())
        .filter(|i| dom.is_designated_boundary(*i, e.mode) && g.values[*i].is_finite())
        .map(|i| (g.values[i] - w[i], i))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InvalidParameter("no designated boundary cell".into()))?;
    g.values[i] += excess - gap;
    let mut out = e.clone();
    out.name = format!("{}-corrupted", e.name);
    out.sub = TestFunction::Grid(g);
    out.params = json!({ "base": e.params, "corrupted_cell": dom.point(i), "excess": excess });
    Ok(out)
}

/// Krylov constant of the experiments: `c = sup f = 1/2 + 3/4`.
pub const KRYLOV_C: f64 = 1.25;
/// Supersolution level: `u <= 1` on the parabolic boundary.
pub const KRYLOV_K: f64 = 1.0;
/// Value of `w` on the top slice, below `max u(., T) = 1/2 + 1/2 - c`.
pub const KRYLOV_K_TOP: f64 = -0.5;

/// Krylov experiments on `[-1, 1]^2 x [0, 1]` with the top face excluded:
/// `u = |x|^2 / 2 - c t` and `w = K` on `t < T`, `w = K_top` on the top
/// slice. Returns the `Reduced` and `Full` runs on the same data.
pub fn krylov_experiments(counts: [usize; 3]) -> Result<(ComparisonExperiment, ComparisonExperiment)> {
    let dom = BoxDomain::new(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0], counts.to_vec())?
        .with_excluded_faces(vec![Face { axis: 2, side: Side::Upper }])?;
    let pair = make_krylov_operator(
        ScalarField::from_spec(ScalarSpec::Radial { offset: 0.5, coeff: 0.25, center: None, power: 2.0 }, 3)?,
        2,
        &dom,
    )?;
    let u = QuadraticFunction {
        r0: 0.0,
        p0: vec![0.0, 0.0, -KRYLOV_C],
        a0: SymMatrix::diag(&[1.0, 1.0, 0.0])?,
        center: vec![0.0; 3],
    };
    let t_end = dom.upper()[2];
    let h_t = dom.spacing(2);
    let w = ClosureFunction::new(
        3,
        move |x: &[f64]| if x[2] > t_end - 0.5 * h_t { KRYLOV_K_TOP } else { KRYLOV_K },
        |_: &[f64]| Jet::zero(3).ok(),
    );
    let params = json!({ "c": KRYLOV_C, "K": KRYLOV_K, "K_top": KRYLOV_K_TOP, "counts": counts });
    let base = ComparisonExperiment {
        name: "krylov-reduced".into(),
        operator: pair,
        domain: dom,
        sub: classical(u),
        sup: TestFunction::Classical(Arc::new(w)),
        mode: BoundaryMode::Reduced,
        params,
    };
    let mut full = base.clone();
    full.name = "krylov-full".into();
    full.mode = BoundaryMode::Full;
    Ok((base, full))
}

/// Gårding experiments for `g = p_1^2 - p_2^2`, `f = 1/4 + x_2 / 4` on
/// `[0, 1]^2` with `{x_1 = 0}` excluded. Subsolutions have `Du` in the
/// forward cone with `g(Du) >= f`; supersolutions have `Dw` off its
/// interior.
pub fn garding_battery(count: usize, grid: usize, seed: u64) -> Result<Vec<ComparisonExperiment>> {
    let dom = BoxDomain::unit_cube(2, grid)?.with_excluded_faces(vec![Face { axis: 0, side: Side::Lower }])?;
    let pair = make_garding_operator(
        HyperbolicPolynomial::lorentz_2d(),
        ScalarField::from_spec(ScalarSpec::Affine { offset: 0.25, slope: vec![0.0, 0.25] }, 2)?,
        &dom,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = vec![0.0; 2];
    let reduced: Vec<Vec<f64>> = (0..dom.len())
        .filter(|&i| dom.is_designated_boundary(i, BoundaryMode::Reduced))
        .map(|i| dom.point(i))
        .collect();
    let small = |rng: &mut ChaCha8Rng| -> Result<SymMatrix> {
        let o = rng.gen_range(-0.1..0.1);
        SymMatrix::from_rows(&[vec![rng.gen_range(-0.2..0.2), o], vec![o, rng.gen_range(-0.2..0.2)]])
    };
    let mut cands = Vec::new();
    for _ in 0..8 * count {
        let a = rng.gen_range(0.9..2.0);
        let b = rng.gen_range(-0.5..0.5) * a;
        let u = QuadraticFunction { r0: rng.gen_range(-1.0..1.0), p0: vec![a, b], a0: small(&mut rng)?, center: origin.clone() };
        let d: f64 = rng.gen_range(-2.0..2.0);
        let c = rng.gen_range(-2.0..1.0) * d.abs();
        let hw = if rng.gen_bool(0.5) { small(&mut rng)? } else { SymMatrix::zeros(2)? };
        let shape = QuadraticFunction { r0: 0.0, p0: vec![c, d], a0: hw, center: origin.clone() };
        let k = reduced.iter().map(|x| u.value(x) - shape.value(x)).fold(f64::NEG_INFINITY, f64::max) + rng.gen_range(0.0..0.2);
        cands.push((u, shape.shifted(k)));
    }
    let admissible: Vec<bool> = cands
        .par_iter()
        .map(|(u, w)| is_admissible_pair(&pair, &dom, &classical(u.clone()), &classical(w.clone())))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(count);
    for (k, ((u, w), ok)) in cands.into_iter().zip(admissible).enumerate() {
        if !ok {
            continue;
        }
        out.push(ComparisonExperiment {
            name: format!("garding-{k}"),
            operator: pair.clone(),
            domain: dom.clone(),
            params: json!({ "seed": seed, "candidate": k, "u": u, "w": w }),
            sub: classical(u),
            sup: classical(w),
            mode: BoundaryMode::Reduced,
        });
        if out.len() == count {
            return Ok(out);
        }
    }
    Err(Error::Precondition(format!("only {} admissible Gårding pairs among {} candidates", out.len(), 8 * count)))
}

/// Seeded pairs `(phi, chi)` of quadratics with `phi` in `M(D, P)` and
/// `chi` in its dual at every lattice point (`D` the orthant), with `chi`
/// shifted so that `phi + chi <= 0` on the boundary.
pub fn zmp_pairs(dom: &BoxDomain, count: usize, seed: u64) -> Result<Vec<(QuadraticFunction, QuadraticFunction)>> {
    let cone = MonotonicityCone::d_p(DirectionalCone::orthant(dom.dim())?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = dom.center();
    let pts: Vec<Vec<f64>> = (0..dom.len()).map(|i| dom.point(i)).collect();
    let everywhere = |q: &QuadraticFunction, dual: bool| {
        pts.par_iter().all(|x| {
            let j = q.jet(x).expect("quadratics are finite");
            if dual {
                cone.dual_classify(&j).is_ok_and(|c| c.is_member())
            } else {
                cone.classify(&j).is_member()
            }
        })
    };
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count {
            return Err(Error::Precondition(format!("only {} ZMP pairs sampled", out.len())));
        }
        let phi = random_quadratic(&mut rng, dom.dim(), 2.0, &center);
        if !everywhere(&phi, false) {
            continue;
        }
        let chi = random_quadratic(&mut rng, dom.dim(), 2.0, &center);
        if !everywhere(&chi, true) {
            continue;
        }
        let bmax = (0..dom.len())
            .filter(|&i| dom.is_boundary(i))
            .map(|i| phi.value(&pts[i]) + chi.value(&pts[i]))
            .fold(f64::NEG_INFINITY, f64::max);
        let slack = rng.gen_range(0.0..0.5);
        out.push((phi, chi.shifted(-bmax - slack)));
    }
    Ok(out)
}

/// Listed witnesses across a batch, capped at [`MAX_LISTED`].
pub fn collect_witnesses(reports: &[ComparisonReport]) -> Vec<Violation> {
    reports.iter().flat_map(|r| r.witnesses.iter().cloned()).take(MAX_LISTED).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_inequality_holds_for_the_construction() {
        for g in [1.0, 1e-3, 1e-9] {
            let b = SymMatrix::diag(&[0.0, 1.0 / g]).unwrap();
            let a = b.scale(0.5);
            assert!(cab_violation(&a, &b, 1.0 / (3.0 * g)).unwrap() <= CAB_TOLERANCE);
            assert!(cab_violation(&a, &b, 1.0 / (3.5 * g)).unwrap() > 1e-3);
        }
    }

    #[test]
    fn counterexample_rejects_out_of_range() {
        assert!(CounterexampleRun::new(1.0, 3.0, vec![0.0, 0.0], vec![-1.0, 0.0]).is_err());
        assert!(CounterexampleRun::new(1.0, 0.9, vec![0.0, 0.0], vec![-1.0, 0.0]).is_err());
        assert!(CounterexampleRun::new(3.5, 1.9, vec![0.0, 0.0], vec![-1.0, 0.0]).is_err());
        assert!(CounterexampleRun::new(1.0, 1.25, vec![0.0, 0.0], vec![-1.0, 0.0]).is_ok());
    }

    #[test]
    fn h_extends_by_zero() {
        let c = CounterexampleRun::new(1.0, 1.25, vec![0.2, 0.3], vec![-1.0, 0.0]).unwrap();
        assert_eq!(c.h(&[0.2, 0.3]), 0.0);
        assert!(c.h(&[0.2 - 1e-12, 0.3]) < 1e-5);
    }

    #[test]
    fn zmp_rejects_positive_constant_for_negativity() {
        let d = BoxDomain::unit_cube(2, 11).unwrap();
        let cone = MonotonicityCone::negativity(2).unwrap();
        let z = GridFunction::from_fn(&d, |_| 2.0).unwrap();
        assert!(matches!(run_zmp(&cone, &d, &ZmpSubject::Grid(z), BoundaryMode::Full), Err(Error::Screening(_))));
    }
}
