//! Excess and Hausdorff distances between sampled fibers, fiberegularity
//! certificates and the no-finite-enlargement check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::SubequationOracle;
use crate::jet::{jet_norm, vnorm, SymMatrix};
use crate::potential::BoxDomain;
use crate::report::{Report, Violation, MAX_LISTED};
use crate::tolerances::check_dim;
use crate::{Error, Jet, Result};

/// Minimum number of window jets accepted by the certifier.
pub const MIN_WINDOW: usize = 100;
/// Sampled `(x, u, s, J)` triples per certificate.
pub const DEFAULT_PAIRS: usize = 10_000;
/// Bisection steps of the `delta` search.
pub const DELTA_ITERATIONS: usize = 20;

/// `sup_a inf_b |||a - b|||`, with `excess(∅, B) = 0` and `excess(A, ∅) = +inf`.
pub fn excess(a: &[Jet], b: &[Jet]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    a.par_iter()
        .map(|x| b.iter().map(|y| jet_norm(&x.sub(y))).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// `max(excess(A, B), excess(B, A))`.
pub fn hausdorff(a: &[Jet], b: &[Jet]) -> f64 {
    excess(a, b).max(excess(b, a))
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= k).all(|p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic low-discrepancy jets in the jet-norm ball of radius `rho`.
/// A Halton sequence, rotated by a seeded shift, is mapped componentwise:
/// `r` into `[-rho, rho]`, `p` into the cube of half-side `rho / sqrt(n)`
/// and each entry of `A` into `[-rho/n, rho/n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowSpec", into = "WindowSpec")]
pub struct JetWindow {
    pub n: usize,
    pub radius: f64,
    pub sample_count: usize,
    pub seed: u64,
    points: Vec<Jet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub n: usize,
    pub radius: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl TryFrom<WindowSpec> for JetWindow {
    type Error = Error;
    fn try_from(s: WindowSpec) -> Result<Self> {
        JetWindow::new(s.n, s.radius, s.sample_count, s.seed)
    }
}

impl From<JetWindow> for WindowSpec {
    fn from(w: JetWindow) -> Self {
        WindowSpec { n: w.n, radius: w.radius, sample_count: w.sample_count, seed: w.seed }
    }
}

impl JetWindow {
    pub fn new(n: usize, radius: f64, sample_count: usize, seed: u64) -> Result<Self> {
        check_dim(n)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!("window radius {radius} must be positive")));
        }
        let dims = 1 + n + n * (n + 1) / 2;
        let bases = primes(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let side = radius / (n as f64).sqrt();
        let entry = radius / n as f64;
        let points = (0..sample_count)
            .map(|i| {
                let u: Vec<f64> = (0..dims)
                    .map(|d| (radical_inverse(i as u64 + 1, bases[d]) + shift[d]).fract() * 2.0 - 1.0)
                    .collect();
                let r = radius * u[0];
                let p: Vec<f64> = (0..n).map(|k| side * u[1 + k]).collect();
                let mut a = SymMatrix::zeros(n).expect("dimension checked");
                let mut d = 1 + n;
                for row in 0..n {
                    for col in row..n {
                        a.set(row, col, entry * u[d]);
                        d += 1;
                    }
                }
                Jet { r, p, a }
            })
            .collect();
        Ok(Self { n, radius, sample_count, seed, points })
    }

    pub fn points(&self) -> &[Jet] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Window jets that are members of `F_x`.
pub fn fiber_sample(f: &SubequationOracle, x: &[f64], window: &JetWindow) -> Vec<Jet> {
    window.points.par_iter().filter(|j| f.classify(x, j).is_member()).cloned().collect()
}

/// Hausdorff distance between the window-clipped fibers at `x` and `y`.
pub fn windowed_hausdorff(f: &SubequationOracle, x: &[f64], y: &[f64], window: &JetWindow) -> f64 {
    hausdorff(&fiber_sample(f, x, window), &fiber_sample(f, y, window))
}

/// Tail diameters `d_k = max_{j, l >= k} d_H(S_j, S_l)` of the window-clipped
/// fibers along a sequence of points.
pub fn tail_diameters(f: &SubequationOracle, points: &[Vec<f64>], window: &JetWindow) -> Vec<f64> {
    let sets: Vec<Vec<Jet>> = points.iter().map(|x| fiber_sample(f, x, window)).collect();
    let k = sets.len();
    let mut pair = vec![vec![0.0; k]; k];
    for j in 0..k {
        for l in j + 1..k {
            let d = hausdorff(&sets[j], &sets[l]);
            pair[j][l] = d;
            pair[l][j] = d;
        }
    }
    (0..k)
        .map(|s| (s..k).flat_map(|j| (s..k).map(move |l| (j, l))).map(|(j, l)| pair[j][l]).fold(0.0, f64::max))
        .collect()
}

/// Point of the fiber boundary of `F_x` on the line `J + t J0`.
pub fn boundary_projection(f: &SubequationOracle, x: &[f64], j: &Jet) -> Option<Jet> {
    let j0 = f.j0();
    if f.classify(x, j).is_member() {
        let mut k = 1.0;
        while f.classify(x, &j.axpy(-k, j0)).is_member() {
            k *= 2.0;
            if k > 1e9 {
                return None;
            }
        }
        let base = j.axpy(-k, j0);
        let t = f.entry_time(x, &base);
        t.is_finite().then(|| base.axpy(t, j0))
    } else {
        let t = f.entry_time(x, j);
        t.is_finite().then(|| j.axpy(t, j0))
    }
}

/// Sampled configuration `(x, u, s, J)`; the pair is `(x, clamp(x + s delta u))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub s: f64,
    pub jet: Jet,
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = vnorm(&v);
        if nv > 1e-3 && nv <= 1.0 {
            return v.iter().map(|c| c / nv).collect();
        }
    }
}

/// Deterministic triples; the jet is a window point.
pub fn sample_triples(domain: &BoxDomain, window: &JetWindow, count: usize, seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.dim();
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|i| rng.gen_range(domain.lower()[i]..=domain.upper()[i])).collect();
            let u = unit_vector(&mut rng, n);
            let s = rng.gen::<f64>();
            let jet = window.points[rng.gen_range(0..window.len())].clone();
            Triple { x, u, s, jet }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberegCertificate {
    pub eta: f64,
    pub delta: f64,
    #[serde(rename = "J0")]
    pub j0: Jet,
    pub domain: BoxDomain,
    pub pair_count: usize,
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    pub pass: bool,
}

/// Fiber-boundary jets of the triples for a given oracle.
pub struct ProjectedTriples {
    triples: Vec<Triple>,
    boundary: Vec<Option<Jet>>,
}

impl ProjectedTriples {
    pub fn new(f: &SubequationOracle, triples: Vec<Triple>) -> Self {
        let boundary = triples.par_iter().map(|t| boundary_projection(f, &t.x, &t.jet)).collect();
        Self { triples, boundary }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Violations of `F_x + eta J0 ⊆ F_y` at radius `delta`.
    pub fn violations(&self, f: &SubequationOracle, domain: &BoxDomain, eta: f64, delta: f64) -> (usize, Vec<Violation>) {
        let found: Vec<Violation> = self
            .triples
            .par_iter()
            .zip(self.boundary.par_iter())
            .filter_map(|(t, b)| {
                let j = b.as_ref()?;
                if f.classify(&t.x, j).is_outside() {
                    return None;
                }
                let y = clamp(domain, &t.x.iter().zip(&t.u).map(|(x, u)| x + t.s * delta * u).collect::<Vec<_>>());
                let shifted = j.axpy(eta, f.j0());
                f.classify(&y, &shifted).is_outside().then(|| Violation {
                    x: t.x.clone(),
                    y: Some(y),
                    jet: Some(j.clone()),
                    detail: format!("J + {eta} J0 Outside F_y"),
                })
            })
            .collect();
        let count = found.len();
        (count, found.into_iter().take(MAX_LISTED).collect())
    }

    /// Number of triples with a finite fiber-boundary projection.
    pub fn usable(&self) -> usize {
        self.boundary.iter().filter(|b| b.is_some()).count()
    }
}

pub fn clamp(domain: &BoxDomain, y: &[f64]) -> Vec<f64> {
    y.iter().enumerate().map(|(i, v)| v.clamp(domain.lower()[i], domain.upper()[i])).collect()
}

/// Options of the certifier; `seed` drives the triple sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberegOptions {
    pub pairs: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl FiberegOptions {
    pub fn new(seed: u64) -> Self {
        Self { pairs: DEFAULT_PAIRS, iterations: DELTA_ITERATIONS, seed }
    }
}

/// Largest `delta` in `[h, diam]` found by bisection such that every sampled
/// pair with `|x - y| < delta` satisfies `F_x + eta J0 ⊆ F_y` on the window.
/// Boundary jets of the dual fibers are screened too: the dual inclusion
/// fails at `(x, y)` exactly when the primal one fails at `(y, x)`.
pub fn certify_fiberegularity(
    f: &SubequationOracle,
    domain: &BoxDomain,
    eta: f64,
    window: &JetWindow,
) -> Result<FiberegCertificate> {
    certify_with(f, domain, eta, window, FiberegOptions::new(window.seed))
}

pub fn certify_with(
    f: &SubequationOracle,
    domain: &BoxDomain,
    eta: f64,
    window: &JetWindow,
    opts: FiberegOptions,
) -> Result<FiberegCertificate> {
    if window.len() < MIN_WINDOW {
        return Err(Error::WindowTooSmall(window.len()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be positive")));
    }
    if window.n != f.dim() || domain.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: window.n.min(domain.dim()) });
    }
    let triples = sample_triples(domain, window, opts.pairs, opts.seed);
    let dual = f.dual();
    let projected = ProjectedTriples::new(f, triples.clone());
    let projected_dual = ProjectedTriples::new(&dual, triples);
    let check = |d: f64| {
        let (c1, mut v1) = projected.violations(f, domain, eta, d);
        let (c2, v2) = projected_dual.violations(&dual, domain, eta, d);
        v1.extend(v2);
        v1.truncate(MAX_LISTED);
        (c1 + c2, v1)
    };
    let cert = |delta: f64, (count, violations): (usize, Vec<Violation>)| FiberegCertificate {
        eta,
        delta,
        j0: f.j0().clone(),
        domain: domain.clone(),
        pair_count: projected.usable(),
        pass: count == 0,
        violation_count: count,
        violations,
    };
    let delta = bisect_delta(domain.h_min(), domain.diameter(), opts.iterations, |d| check(d).0 == 0).unwrap_or(domain.h_min());
    Ok(cert(delta, check(delta)))
}

/// Largest `delta` in `[lo, hi]` with `ok(delta)`, assuming `ok` is monotone:
/// `hi` itself when it passes, `None` when `lo` fails, else bisection.
pub fn bisect_delta(lo: f64, hi: f64, iterations: usize, ok: impl Fn(f64) -> bool) -> Option<f64> {
    if ok(hi) {
        return Some(hi);
    }
    if !ok(lo) {
        return None;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Re-checks a certificate for another oracle with the same `(eta, delta)`
/// and the same sampled triples.
pub fn verify_certificate(
    f: &SubequationOracle,
    cert: &FiberegCertificate,
    window: &JetWindow,
    opts: FiberegOptions,
) -> Result<FiberegCertificate> {
    if window.n != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: window.n });
    }
    let projected = ProjectedTriples::new(f, sample_triples(&cert.domain, window, opts.pairs, opts.seed));
    let (count, violations) = projected.violations(f, &cert.domain, cert.eta, cert.delta);
    Ok(FiberegCertificate {
        eta: cert.eta,
        delta: cert.delta,
        j0: f.j0().clone(),
        domain: cert.domain.clone(),
        pair_count: projected.usable(),
        violations,
        violation_count: count,
        pass: count == 0,
    })
}

/// The complement of `F_x` contains jet-norm balls of radius `t rho0` around
/// `J1 - t J0` for an Outside jet `J1`, where `rho0` is the interior radius
/// of `J0` in the monotonicity cone. Balls are probed for `t` up to `t_max`.
pub fn check_no_finite_enlargement(f: &SubequationOracle, x: &[f64], t_max: f64, seed: u64) -> Result<Report> {
    let mut rep = Report::new("no_finite_enlargement");
    let j0 = f.j0().clone();
    let mut shift = Jet::zero(f.dim())?;
    let mut k = 0.0;
    while !f.classify(x, &shift).is_outside() {
        k = if k == 0.0 { 1.0 } else { 2.0 * k };
        if k > 1e9 {
            rep.fail(x, None, "no Outside jet found along -J0: the fiber is the whole jet space");
            return Ok(rep);
        }
        shift = j0.scale(-k);
    }
    let rho0 = f.cone().interior_radius(&j0);
    rep.metric("rho0", rho0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = 40;
    for s in 1..=steps {
        let t = t_max * s as f64 / steps as f64;
        let centre = shift.axpy(-t, &j0);
        let radius = 0.99 * t * rho0;
        for probe in 0..25 {
            let dir = crate::cones::random_jet(&mut rng, f.dim(), 1.0);
            let nd = jet_norm(&dir);
            let b = if probe == 0 || nd == 0.0 { Jet::zero(f.dim())? } else { dir.scale(radius * rng.gen::<f64>() / nd) };
            let jet = centre.add(&b);
            rep.samples += 1;
            if !f.classify(x, &jet).is_outside() {
                rep.fail(x, Some(&jet), format!("not Outside at distance {} from the centre at t = {t}", jet_norm(&b)));
            }
        }
    }
    rep.metric("certified_radius", t_max * rho0);
    Ok(rep)
}
