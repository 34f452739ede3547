//! Monotonicity cones built from the generators `P`, `N`, `M(D)`,
//! `M(gamma)`, `M(R)` and partial convexity, their closed-form Dirichlet
//! duals, and strict approximators on box domains.
//!
//! A cone is stored as a list of generators and means their intersection.
//! Each generator contributes a signed margin; the cone margin is the
//! minimum, and the dual margin is the maximum of the generator dual margins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::jet::{dot, lambda_max, lambda_min, unit, vnorm, DirectionalCone, Jet, SymMatrix};
use crate::potential::{BoxDomain, Classical, Face, Side};
use crate::tolerances::check_dim;
use crate::{Classification, Error, Result};

/// Radius parameter of the fundamental family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Serialize for Radius {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Radius::Finite(r) => s.serialize_f64(*r),
            Radius::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) if r > 0.0 && r.is_finite() => Ok(Radius::Finite(r)),
            Raw::Num(r) => Err(serde::de::Error::custom(format!("radius {r} must be positive"))),
            Raw::Str(s) if s == "inf" => Ok(Radius::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("radius {s:?} is not \"inf\""))),
        }
    }
}

/// One factor of an intersection cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `A >= 0`.
    Convexity,
    /// `r <= 0`.
    Negativity,
    /// `p in D`.
    Directional { cone: DirectionalCone },
    /// `r <= -gamma |p|`.
    Gamma { gamma: f64 },
    /// `A >= (|p| / R) I`.
    Radius { radius: f64 },
    /// Leading `k x k` block of `A` is positive semidefinite.
    PartialConvexity { k: usize },
}

impl Generator {
    fn label(&self) -> String {
        match self {
            Generator::Convexity => "P".into(),
            Generator::Negativity => "N".into(),
            Generator::Directional { .. } => "D".into(),
            Generator::Gamma { gamma } => format!("gamma={gamma}"),
            Generator::Radius { radius } => format!("R={radius}"),
            Generator::PartialConvexity { k } => format!("P{k}"),
        }
    }

    /// Signed margin; nonnegative iff the jet satisfies the constraint.
    pub fn margin(&self, j: &Jet) -> f64 {
        match self {
            Generator::Convexity => lambda_min(&j.a),
            Generator::Negativity => -j.r,
            Generator::Directional { cone } => cone.margin(&j.p),
            Generator::Gamma { gamma } => -gamma * vnorm(&j.p) - j.r,
            Generator::Radius { radius } => lambda_min(&j.a) - vnorm(&j.p) / radius,
            Generator::PartialConvexity { k } => {
                lambda_min(&j.a.leading_block(*k).expect("validated block size"))
            }
        }
    }

    /// Margin of the Dirichlet dual, `-margin(-J)`.
    pub fn dual_margin(&self, j: &Jet) -> f64 {
        match self {
            Generator::Convexity => lambda_max(&j.a),
            Generator::Negativity => -j.r,
            Generator::Directional { cone } => cone.dual_margin(&j.p),
            Generator::Gamma { gamma } => gamma * vnorm(&j.p) - j.r,
            Generator::Radius { radius } => lambda_max(&j.a) + vnorm(&j.p) / radius,
            Generator::PartialConvexity { k } => {
                lambda_max(&j.a.leading_block(*k).expect("validated block size"))
            }
        }
    }

    /// Lipschitz constant of the margin in the jet norm.
    fn lipschitz(&self) -> f64 {
        match self {
            Generator::Gamma { gamma } => 1.0 + gamma,
            Generator::Radius { radius } => 1.0 + 1.0 / radius,
            _ => 1.0,
        }
    }

    fn constrains_r(&self) -> bool {
        matches!(self, Generator::Negativity | Generator::Gamma { .. })
    }
}

/// Intersection of generators; the empty list is the whole jet space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCone {
    n: usize,
    generators: Vec<Generator>,
}

/// Serializable form `{gamma, R, normals, generators?, partial_convexity?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeDescriptor {
    pub n: usize,
    /// `null` leaves `r` unconstrained; a number imposes `r <= -gamma |p|`.
    pub gamma: Option<f64>,
    #[serde(rename = "R")]
    pub radius: Radius,
    #[serde(default)]
    pub normals: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_convexity: Option<usize>,
}

impl MonotonicityCone {
    pub fn from_generators(n: usize, generators: Vec<Generator>) -> Result<Self> {
        check_dim(n)?;
        for g in &generators {
            match g {
                Generator::Directional { cone } if cone.dim() != n => {
                    return Err(Error::DimensionMismatch { expected: n, got: cone.dim() })
                }
                Generator::Gamma { gamma } if !(gamma.is_finite() && *gamma >= 0.0) => {
                    return Err(Error::InvalidParameter(format!("gamma {gamma} must be in [0, inf)")))
                }
                Generator::Radius { radius } if !(radius.is_finite() && *radius > 0.0) => {
                    return Err(Error::InvalidParameter(format!("radius {radius} must be in (0, inf)")))
                }
                Generator::PartialConvexity { k } if *k == 0 || *k > n => {
                    return Err(Error::InvalidParameter(format!("partial block {k} not in 1..={n}")))
                }
                _ => {}
            }
        }
        Ok(Self { n, generators })
    }

    /// `M(P)`: `r` and `p` free, `A >= 0`.
    pub fn convexity(n: usize) -> Result<Self> {
        Self::from_generators(n, vec![Generator::Convexity])
    }

    /// `M(N)`: `r <= 0`.
    pub fn negativity(n: usize) -> Result<Self> {
        Self::from_generators(n, vec![Generator::Negativity])
    }

    /// `M(D)`: `p in D`.
    pub fn directional(d: DirectionalCone) -> Result<Self> {
        Self::from_generators(d.dim(), vec![Generator::Directional { cone: d }])
    }

    /// `M(gamma)`: `r <= -gamma |p|`.
    pub fn gamma(n: usize, gamma: f64) -> Result<Self> {
        Self::from_generators(n, vec![Generator::Gamma { gamma }])
    }

    /// `M(R)`: `A >= (|p|/R) I`.
    pub fn radius(n: usize, radius: f64) -> Result<Self> {
        Self::from_generators(n, vec![Generator::Radius { radius }])
    }

    /// `Q = M(N, P)`.
    pub fn q_cone(n: usize) -> Result<Self> {
        Self::from_generators(n, vec![Generator::Negativity, Generator::Convexity])
    }

    /// `M(D, P)`.
    pub fn d_p(d: DirectionalCone) -> Result<Self> {
        Self::from_generators(d.dim(), vec![Generator::Directional { cone: d }, Generator::Convexity])
    }

    /// `M(N, D, P)`.
    pub fn n_d_p(d: DirectionalCone) -> Result<Self> {
        Self::from_generators(
            d.dim(),
            vec![Generator::Negativity, Generator::Directional { cone: d }, Generator::Convexity],
        )
    }

    /// Fundamental family element `{r <= -gamma|p|, p in D, A >= (|p|/R) I}`.
    /// With `gamma = 0` the first constraint reads `r <= 0`.
    pub fn fundamental(gamma: f64, d: DirectionalCone, radius: Radius) -> Result<Self> {
        let n = d.dim();
        let mut gens = vec![if gamma == 0.0 { Generator::Negativity } else { Generator::Gamma { gamma } }];
        if !d.is_full() {
            gens.push(Generator::Directional { cone: d });
        }
        gens.push(match radius {
            Radius::Finite(radius) => Generator::Radius { radius },
            Radius::Infinite => Generator::Convexity,
        });
        Self::from_generators(n, gens)
    }

    /// Space-time cone `{p_{n+1} <= 0, A_n >= 0}` on `R^{n+1}`.
    pub fn parabolic(n_space: usize) -> Result<Self> {
        let n = n_space + 1;
        let d = DirectionalCone::halfspace(&crate::jet::vscale(&unit(n, n_space), -1.0))?;
        Self::from_generators(
            n,
            vec![Generator::Directional { cone: d }, Generator::PartialConvexity { k: n_space }],
        )
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let mut gens = self.generators.clone();
        gens.extend(other.generators.iter().cloned());
        Self::from_generators(self.n, gens)
    }

    pub fn from_descriptor(desc: &ConeDescriptor) -> Result<Self> {
        let n = desc.n;
        check_dim(n)?;
        let mut gens = Vec::new();
        if let Some(gamma) = desc.gamma {
            gens.push(if gamma == 0.0 { Generator::Negativity } else { Generator::Gamma { gamma } });
        }
        if !desc.normals.is_empty() {
            let mut d = DirectionalCone::from_normals(n, desc.normals.clone())?;
            if let Some(g) = &desc.generators {
                d = d.with_generators(g.clone())?;
            }
            gens.push(Generator::Directional { cone: d });
        }
        match (desc.radius, desc.partial_convexity) {
            (Radius::Finite(radius), _) => gens.push(Generator::Radius { radius }),
            (Radius::Infinite, Some(k)) => gens.push(Generator::PartialConvexity { k }),
            (Radius::Infinite, None) => gens.push(Generator::Convexity),
        }
        Self::from_generators(n, gens)
    }

    /// Descriptor of cones expressible as `{gamma, D, R}` plus an optional
    /// partial-convexity block.
    pub fn descriptor(&self) -> Result<ConeDescriptor> {
        let mut desc = ConeDescriptor {
            n: self.n,
            gamma: None,
            radius: Radius::Infinite,
            normals: vec![],
            generators: None,
            partial_convexity: None,
        };
        let mut matrix_seen = false;
        for g in &self.generators {
            match g {
                Generator::Negativity if desc.gamma.is_none() => desc.gamma = Some(0.0),
                Generator::Gamma { gamma } if desc.gamma.is_none() => desc.gamma = Some(*gamma),
                Generator::Directional { cone } if desc.normals.is_empty() => {
                    desc.normals = cone.normals().to_vec();
                    desc.generators = cone.generators().map(|g| g.to_vec());
                }
                Generator::Convexity if !matrix_seen => matrix_seen = true,
                Generator::Radius { radius } if !matrix_seen => {
                    matrix_seen = true;
                    desc.radius = Radius::Finite(*radius);
                }
                Generator::PartialConvexity { k } if !matrix_seen => {
                    matrix_seen = true;
                    desc.partial_convexity = Some(*k);
                }
                _ => {
                    return Err(Error::UnsupportedCone(format!(
                        "{} has no single-factor descriptor",
                        self.name()
                    )))
                }
            }
        }
        if !matrix_seen {
            return Err(Error::UnsupportedCone(format!("{} has no matrix constraint", self.name())));
        }
        Ok(desc)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn name(&self) -> String {
        let labels: Vec<String> = self.generators.iter().map(Generator::label).collect();
        format!("M({})", labels.join(","))
    }

    fn check_jet(&self, j: &Jet) -> Result<()> {
        if j.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: j.dim() });
        }
        Ok(())
    }

    /// Minimum generator margin (`+inf` for the whole space).
    pub fn margin(&self, j: &Jet) -> f64 {
        self.generators.iter().map(|g| g.margin(j)).fold(f64::INFINITY, f64::min)
    }

    /// Maximum generator dual margin (`-inf` for the whole space).
    pub fn dual_margin(&self, j: &Jet) -> f64 {
        self.generators.iter().map(|g| g.dual_margin(j)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, j: &Jet) -> bool {
        self.classify(j).is_member()
    }

    pub fn classify(&self, j: &Jet) -> Classification {
        debug_assert_eq!(j.dim(), self.n);
        Classification::from_margin(self.margin(j), j.tau())
    }

    pub fn try_classify(&self, j: &Jet) -> Result<Classification> {
        self.check_jet(j)?;
        Ok(self.classify(j))
    }

    /// Classification under the closed-form Dirichlet dual (union of the
    /// generator duals).
    pub fn dual_classify(&self, j: &Jet) -> Result<Classification> {
        self.check_jet(j)?;
        if self.generators.is_empty() {
            return Err(Error::UnsupportedCone(
                "the whole jet space has an empty dual; supported generators are P, N, D, gamma, R and partial convexity".into(),
            ));
        }
        Ok(Classification::from_margin(self.dual_margin(j), j.tau()))
    }

    /// Lower bound on the radius of a jet-norm ball around `j` inside the
    /// cone; negative when `j` is outside.
    pub fn interior_radius(&self, j: &Jet) -> f64 {
        self.generators
            .iter()
            .map(|g| g.margin(j) / g.lipschitz())
            .fold(f64::INFINITY, f64::min)
    }

    /// Combined directional cone of all `Directional` factors, if any.
    fn combined_directional(&self) -> Result<Option<DirectionalCone>> {
        let cones: Vec<&DirectionalCone> = self
            .generators
            .iter()
            .filter_map(|g| match g {
                Generator::Directional { cone } => Some(cone),
                _ => None,
            })
            .collect();
        match cones.len() {
            0 => Ok(None),
            1 => Ok(Some(cones[0].clone())),
            _ => {
                let normals = cones.iter().flat_map(|c| c.normals().iter().cloned()).collect();
                Ok(Some(DirectionalCone::from_normals(self.n, normals)?))
            }
        }
    }

    /// Gradient witness `q` in the interior of every directional factor.
    pub fn gradient_witness(&self) -> Result<Vec<f64>> {
        Ok(match self.combined_directional()? {
            Some(d) => d.witness().to_vec(),
            None => vec![0.0; self.n],
        })
    }

    /// Interior direction `J0 = (r0, q, (1 + |q|/R) I)` with `r0 = -1 - gamma|q|`
    /// when `r` is constrained and `0` otherwise.
    pub fn interior_direction(&self) -> Result<Jet> {
        let q = self.gradient_witness()?;
        let qn = vnorm(&q);
        let mut diag = 1.0;
        let mut r0 = 0.0;
        for g in &self.generators {
            match g {
                Generator::Radius { radius } => diag = f64::max(diag, 1.0 + qn / radius),
                Generator::Gamma { gamma } => r0 = f64::min(r0, -1.0 - gamma * qn),
                Generator::Negativity => r0 = f64::min(r0, -1.0),
                _ => {}
            }
        }
        let j0 = Jet::new(r0, q, SymMatrix::scalar(self.n, diag)?)?;
        if self.interior_radius(&j0) <= 0.0 {
            return Err(Error::NoInteriorWitness(format!("{} has no interior direction", self.name())));
        }
        Ok(j0)
    }

    /// Smallest `t >= 0` (to bisection accuracy) with `j + t J0` in the cone.
    pub fn entry_time(&self, j: &Jet, j0: &Jet) -> f64 {
        if self.margin(j) >= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.margin(&j.axpy(hi, j0)) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.margin(&j.axpy(mid, j0)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Random cone member: a random jet pushed along `J0` into the cone,
    /// plus a random extra push (zero with probability one quarter).
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Result<Jet> {
        let j0 = self.interior_direction()?;
        let j = random_jet(rng, self.n, scale);
        let t = self.entry_time(&j, &j0);
        let extra = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..scale) };
        Ok(j.axpy(t + extra, &j0))
    }
}

/// Jet with `r`, `p` and the entries of `A` uniform in `[-scale, scale]`.
pub fn random_jet<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Jet {
    let r = rng.gen_range(-scale..=scale);
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
    let mut a = SymMatrix::zeros(n).expect("dimension validated by caller");
    for i in 0..n {
        for k in i..n {
            a.set(i, k, rng.gen_range(-scale..=scale));
        }
    }
    Jet { r, p, a }
}

/// Template used by a strict approximator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApproximatorKind {
    /// `offset + <q, x> + alpha |x|^2`.
    Quadratic { offset: f64, qbar: Vec<f64>, alpha: f64 },
    /// `offset + alpha |x - center|^2`.
    Radial { offset: f64, center: Vec<f64>, alpha: f64 },
    /// `offset + |x'|^2 - 1/(T - t)` with `t` the last coordinate.
    Parabolic { offset: f64, t_end: f64 },
    /// `offset + 1/(a - x_k)` (lower face `x_k = a`) or
    /// `offset + 1/(x_k - a)` (upper face `x_k = a`).
    Directional { offset: f64, axis: usize, anchor: f64, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximatorMode {
    Elliptic,
    Parabolic,
}

/// C² function strictly subharmonic for a monotonicity cone on a box,
/// possibly equal to `-inf` on one face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictApproximator {
    pub n: usize,
    #[serde(flatten)]
    pub kind: ApproximatorKind,
    pub blowup: Option<Face>,
}

impl StrictApproximator {
    fn with_offset(&self, new_offset: f64) -> Self {
        let mut s = self.clone();
        match &mut s.kind {
            ApproximatorKind::Quadratic { offset, .. }
            | ApproximatorKind::Radial { offset, .. }
            | ApproximatorKind::Parabolic { offset, .. }
            | ApproximatorKind::Directional { offset, .. } => *offset = new_offset,
        }
        s
    }

    fn offset(&self) -> f64 {
        match &self.kind {
            ApproximatorKind::Quadratic { offset, .. }
            | ApproximatorKind::Radial { offset, .. }
            | ApproximatorKind::Parabolic { offset, .. }
            | ApproximatorKind::Directional { offset, .. } => *offset,
        }
    }

    /// Lattice points where the jet is checked (off the blowup face).
    fn check_points(&self, dom: &BoxDomain) -> Vec<Vec<f64>> {
        (0..dom.len())
            .filter(|&i| match self.blowup {
                Some(face) => !dom.on_face(i, face),
                None => true,
            })
            .map(|i| dom.point(i))
            .collect()
    }

    /// True when every checked lattice jet is Inside the cone.
    pub fn verify(&self, cone: &MonotonicityCone, dom: &BoxDomain) -> bool {
        self.check_points(dom).iter().all(|x| match self.jet(x) {
            Some(j) => cone.classify(&j).is_inside(),
            None => false,
        })
    }

    /// Lowers the constant so the `r`-constraints hold with unit slack.
    fn fit_offset(&self, cone: &MonotonicityCone, dom: &BoxDomain) -> Self {
        if !cone.generators.iter().any(Generator::constrains_r) {
            return self.clone();
        }
        let base = self.with_offset(0.0);
        let mut worst = f64::NEG_INFINITY;
        for x in base.check_points(dom) {
            if let Some(j) = base.jet(&x) {
                let need = cone
                    .generators
                    .iter()
                    .filter(|g| g.constrains_r())
                    .map(|g| -g.margin(&j))
                    .fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max(need);
            }
        }
        base.with_offset(-worst - 1.0)
    }
}

impl Classical for StrictApproximator {
    fn dim(&self) -> usize {
        self.n
    }

    fn blowup_face(&self) -> Option<Face> {
        self.blowup
    }

    fn value(&self, x: &[f64]) -> f64 {
        let c = self.offset();
        match &self.kind {
            ApproximatorKind::Quadratic { qbar, alpha, .. } => c + dot(qbar, x) + alpha * dot(x, x),
            ApproximatorKind::Radial { center, alpha, .. } => {
                let d = crate::jet::vsub(x, center);
                c + alpha * dot(&d, &d)
            }
            ApproximatorKind::Parabolic { t_end, .. } => {
                let (xs, t) = x.split_at(self.n - 1);
                let gap = t_end - t[0];
                if gap <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c + dot(xs, xs) - 1.0 / gap
                }
            }
            ApproximatorKind::Directional { axis, anchor, side, .. } => {
                let gap = match side {
                    Side::Lower => x[*axis] - anchor,
                    Side::Upper => anchor - x[*axis],
                };
                if gap <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c - 1.0 / gap
                }
            }
        }
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let n = self.n;
        let v = self.value(x);
        if !v.is_finite() {
            return None;
        }
        let mut a = SymMatrix::zeros(n).ok()?;
        let p: Vec<f64> = match &self.kind {
            ApproximatorKind::Quadratic { qbar, alpha, .. } => {
                for i in 0..n {
                    a.set(i, i, 2.0 * alpha);
                }
                (0..n).map(|i| qbar[i] + 2.0 * alpha * x[i]).collect()
            }
            ApproximatorKind::Radial { center, alpha, .. } => {
                for i in 0..n {
                    a.set(i, i, 2.0 * alpha);
                }
                (0..n).map(|i| 2.0 * alpha * (x[i] - center[i])).collect()
            }
            ApproximatorKind::Parabolic { t_end, .. } => {
                let gap = t_end - x[n - 1];
                let mut p: Vec<f64> = x[..n - 1].iter().map(|v| 2.0 * v).collect();
                p.push(-1.0 / (gap * gap));
                for i in 0..n - 1 {
                    a.set(i, i, 2.0);
                }
                a.set(n - 1, n - 1, -2.0 / (gap * gap * gap));
                p
            }
            ApproximatorKind::Directional { axis, anchor, side, .. } => {
                let mut p = vec![0.0; n];
                match side {
                    Side::Lower => {
                        let gap = x[*axis] - anchor;
                        p[*axis] = 1.0 / (gap * gap);
                        a.set(*axis, *axis, -2.0 / (gap * gap * gap));
                    }
                    Side::Upper => {
                        let gap = anchor - x[*axis];
                        p[*axis] = -1.0 / (gap * gap);
                        a.set(*axis, *axis, -2.0 / (gap * gap * gap));
                    }
                }
                p
            }
        };
        Jet::new(v, p, a).ok()
    }
}

/// Strict approximator for `cone` on `dom`.
///
/// Elliptic mode uses `<q, x> + alpha|x|^2` (infinite radius) or
/// `alpha|x - c|^2` (finite radius, requiring the box to sit inside a
/// translate of `D ∩ B_R`). Parabolic mode tries `|x'|^2 - 1/(T - t)` and
/// then `1/(a - x_k)`, each blowing down on one face.
pub fn strict_approximator(
    cone: &MonotonicityCone,
    dom: &BoxDomain,
    mode: ApproximatorMode,
) -> Result<StrictApproximator> {
    if cone.dim() != dom.dim() {
        return Err(Error::DimensionMismatch { expected: cone.dim(), got: dom.dim() });
    }
    match mode {
        ApproximatorMode::Elliptic => elliptic_approximator(cone, dom),
        ApproximatorMode::Parabolic => parabolic_approximator(cone, dom),
    }
}

fn finite_radius(cone: &MonotonicityCone) -> Option<f64> {
    cone.generators
        .iter()
        .filter_map(|g| match g {
            Generator::Radius { radius } => Some(*radius),
            _ => None,
        })
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))))
}

fn elliptic_approximator(cone: &MonotonicityCone, dom: &BoxDomain) -> Result<StrictApproximator> {
    let n = cone.dim();
    if let Some(radius) = finite_radius(cone) {
        return radial_approximator(cone, dom, radius);
    }
    let qbar = cone.gradient_witness()?;
    let sup_x = dom.corners().iter().map(|c| vnorm(c)).fold(0.0, f64::max).max(1e-12);
    let qmargin = match cone.combined_directional()? {
        Some(d) => d.margin(&qbar),
        None => f64::INFINITY,
    };
    let mut alpha = if qmargin.is_finite() { qmargin / (4.0 * sup_x) } else { 1.0 };
    for _ in 0..60 {
        let cand = StrictApproximator {
            n,
            kind: ApproximatorKind::Quadratic { offset: 0.0, qbar: qbar.clone(), alpha },
            blowup: None,
        }
        .fit_offset(cone, dom);
        if cand.verify(cone, dom) {
            return Ok(cand);
        }
        alpha *= 0.5;
    }
    Err(Error::NoApproximator(format!("no quadratic template is strict for {} on the box", cone.name())))
}

fn radial_approximator(cone: &MonotonicityCone, dom: &BoxDomain, radius: f64) -> Result<StrictApproximator> {
    let n = cone.dim();
    let corners = dom.corners();
    let mid = dom.center();
    let center = match cone.combined_directional()? {
        None => mid.clone(),
        Some(d) => {
            let w = crate::jet::vscale(d.witness(), 1.0 / vnorm(d.witness()));
            let mut s: f64 = 0.0;
            for nu in d.normals() {
                let lowest = corners.iter().map(|c| dot(nu, c)).fold(f64::INFINITY, f64::min);
                s = s.max((dot(nu, &mid) - lowest) / dot(nu, &w));
            }
            let s = s * 1.01 + 1e-6 * (1.0 + dom.diameter());
            (0..n).map(|i| mid[i] - s * w[i]).collect()
        }
    };
    let reach = corners.iter().map(|c| vnorm(&crate::jet::vsub(c, &center))).fold(0.0, f64::max);
    if reach >= radius {
        return Err(Error::RadiusDichotomy(format!(
            "the box needs radius {reach:.6} from the best center but R = {radius}; with finite R only boxes inside a translate of D ∩ B_R admit a strict approximator"
        )));
    }
    let cand = StrictApproximator {
        n,
        kind: ApproximatorKind::Radial { offset: 0.0, center, alpha: 1.0 },
        blowup: None,
    }
    .fit_offset(cone, dom);
    if cand.verify(cone, dom) {
        Ok(cand)
    } else {
        Err(Error::NoApproximator(format!("radial template is not strict for {} on the box", cone.name())))
    }
}

fn parabolic_approximator(cone: &MonotonicityCone, dom: &BoxDomain) -> Result<StrictApproximator> {
    let n = cone.dim();
    let mut tried = Vec::new();
    if n >= 2 {
        let cand = StrictApproximator {
            n,
            kind: ApproximatorKind::Parabolic { offset: 0.0, t_end: dom.upper()[n - 1] },
            blowup: Some(Face { axis: n - 1, side: Side::Upper }),
        }
        .fit_offset(cone, dom);
        if cand.verify(cone, dom) {
            return Ok(cand);
        }
        tried.push("parabolic |x'|^2 - 1/(T - t)");
    }
    if let Some(d) = cone.combined_directional()? {
        let mut axes: Vec<(usize, Side, f64)> = (0..n)
            .flat_map(|k| {
                let e = unit(n, k);
                let m_plus = d.margin(&e);
                let m_minus = d.margin(&crate::jet::vscale(&e, -1.0));
                [(k, Side::Lower, m_plus), (k, Side::Upper, m_minus)]
            })
            .filter(|(_, _, m)| *m > 0.0)
            .collect();
        axes.sort_by(|a, b| b.2.total_cmp(&a.2));
        for (axis, side, _) in axes {
            let anchor = match side {
                Side::Lower => dom.lower()[axis],
                Side::Upper => dom.upper()[axis],
            };
            let cand = StrictApproximator {
                n,
                kind: ApproximatorKind::Directional { offset: 0.0, axis, anchor, side },
                blowup: Some(Face { axis, side }),
            }
            .fit_offset(cone, dom);
            if cand.verify(cone, dom) {
                return Ok(cand);
            }
        }
        tried.push("directional 1/(a - x_k)");
    }
    Err(Error::NoApproximator(format!(
        "no parabolic template is strict for {} (tried: {})",
        cone.name(),
        if tried.is_empty() { "none applicable".to_string() } else { tried.join(", ") }
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(r: f64, p: &[f64], a: SymMatrix) -> Jet {
        Jet::new(r, p.to_vec(), a).unwrap()
    }

    #[test]
    fn convexity_cone_ignores_r_and_p() {
        let m = MonotonicityCone::convexity(2).unwrap();
        let j = jet(5.0, &[-3.0, 8.0], SymMatrix::identity(2).unwrap());
        assert_eq!(m.classify(&j), Classification::Inside);
    }

    #[test]
    fn gamma_cone_strict_inequality() {
        let m = MonotonicityCone::gamma(2, 1.0).unwrap();
        let j = jet(-2.0, &[1.0, 0.0], SymMatrix::identity(2).unwrap());
        assert_eq!(m.classify(&j), Classification::Inside);
    }

    #[test]
    fn zero_jet_is_boundary() {
        let d = DirectionalCone::orthant(2).unwrap();
        for m in [
            MonotonicityCone::convexity(2).unwrap(),
            MonotonicityCone::q_cone(2).unwrap(),
            MonotonicityCone::n_d_p(d.clone()).unwrap(),
            MonotonicityCone::fundamental(0.5, d, Radius::Finite(2.0)).unwrap(),
        ] {
            assert_eq!(m.classify(&Jet::zero(2).unwrap()), Classification::Boundary);
        }
    }

    #[test]
    fn fundamental_with_zero_gamma_constrains_r() {
        let m = MonotonicityCone::fundamental(0.0, DirectionalCone::full(2).unwrap(), Radius::Infinite).unwrap();
        let j = jet(5.0, &[0.0, 0.0], SymMatrix::identity(2).unwrap());
        assert_eq!(m.classify(&j), Classification::Outside);
    }

    #[test]
    fn dual_closed_forms() {
        let p = MonotonicityCone::convexity(2).unwrap();
        let j = jet(9.0, &[0.0, 0.0], SymMatrix::diag(&[-1.0, 3.0]).unwrap());
        assert_eq!(p.dual_classify(&j).unwrap(), Classification::Inside);

        let g = MonotonicityCone::gamma(2, 2.0).unwrap();
        let j = jet(1.0, &[1.0, 0.0], SymMatrix::zeros(2).unwrap());
        assert_eq!(g.dual_classify(&j).unwrap(), Classification::Inside);

        let q = MonotonicityCone::q_cone(2).unwrap();
        let j = jet(-1.0, &[0.3, 0.0], SymMatrix::diag(&[-5.0, -5.0]).unwrap());
        assert_eq!(q.dual_classify(&j).unwrap(), Classification::Inside);
    }

    #[test]
    fn empty_cone_dual_is_unsupported() {
        let m = MonotonicityCone::from_generators(2, vec![]).unwrap();
        assert!(m.dual_classify(&Jet::zero(2).unwrap()).is_err());
    }

    #[test]
    fn interior_direction_is_interior() {
        let d = DirectionalCone::orthant(3).unwrap();
        for m in [
            MonotonicityCone::fundamental(1.5, d.clone(), Radius::Finite(0.7)).unwrap(),
            MonotonicityCone::d_p(d).unwrap(),
            MonotonicityCone::parabolic(2).unwrap(),
        ] {
            let j0 = m.interior_direction().unwrap();
            assert_eq!(m.classify(&j0), Classification::Inside);
            assert!(m.interior_radius(&j0) > 0.0);
        }
    }

    #[test]
    fn descriptor_roundtrip() {
        let m = MonotonicityCone::fundamental(1.0, DirectionalCone::orthant(2).unwrap(), Radius::Finite(3.0)).unwrap();
        let desc = m.descriptor().unwrap();
        let s = serde_json::to_string(&desc).unwrap();
        assert!(s.contains("\"R\":3.0"));
        let back = MonotonicityCone::from_descriptor(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back.name(), m.name());
        let inf = r#"{"n":2,"gamma":null,"R":"inf","normals":[[1,0],[0,1]]}"#;
        let m = MonotonicityCone::from_descriptor(&serde_json::from_str(inf).unwrap()).unwrap();
        assert_eq!(m.name(), "M(D,P)");
    }

    #[test]
    fn samples_are_members() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = MonotonicityCone::fundamental(0.5, DirectionalCone::orthant(2).unwrap(), Radius::Finite(2.0)).unwrap();
        for _ in 0..200 {
            let j = m.sample_member(&mut rng, 3.0).unwrap();
            assert!(m.contains(&j));
        }
    }
}
