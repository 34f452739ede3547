//! Subequation oracles, the Dirichlet dual as an oracle transformer, and
//! sampled checks of the duality algebra.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{random_jet, MonotonicityCone};
use crate::potential::BoxDomain;
use crate::report::Report;
use crate::tolerances::ETA_GRID;
use crate::{Classification, Error, Jet, Result};

pub type ClassifyFn = dyn Fn(&[f64], &Jet) -> Classification + Send + Sync;

/// Fiber map `x -> F_x` exposed as a three-way jet classifier, together with
/// its monotonicity cone and an interior direction `J0` of that cone.
#[derive(Clone)]
pub struct SubequationOracle {
    name: String,
    cone: MonotonicityCone,
    j0: Jet,
    classify: Arc<ClassifyFn>,
    constant: bool,
}

impl std::fmt::Debug for SubequationOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubequationOracle")
            .field("name", &self.name)
            .field("cone", &self.cone.name())
            .field("j0", &self.j0)
            .finish()
    }
}

impl SubequationOracle {
    pub fn new(
        name: impl Into<String>,
        cone: MonotonicityCone,
        j0: Jet,
        classify: impl Fn(&[f64], &Jet) -> Classification + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::from_arc(name, cone, j0, Arc::new(classify), false)
    }

    fn from_arc(
        name: impl Into<String>,
        cone: MonotonicityCone,
        j0: Jet,
        classify: Arc<ClassifyFn>,
        constant: bool,
    ) -> Result<Self> {
        if j0.dim() != cone.dim() {
            return Err(Error::DimensionMismatch { expected: cone.dim(), got: j0.dim() });
        }
        if !cone.classify(&j0).is_inside() {
            return Err(Error::NoInteriorWitness(format!(
                "J0 is not interior to {}",
                cone.name()
            )));
        }
        Ok(Self { name: name.into(), cone, j0, classify, constant })
    }

    /// Constant-coefficient oracle of a monotonicity cone.
    pub fn constant(cone: MonotonicityCone) -> Result<Self> {
        let j0 = cone.interior_direction()?;
        let c = cone.clone();
        Self::from_arc(cone.name(), cone, j0, Arc::new(move |_x: &[f64], j: &Jet| c.classify(j)), true)
    }

    /// Constant oracle of a cone, declaring a different monotonicity cone.
    pub fn constant_with_declared(set: MonotonicityCone, declared: MonotonicityCone) -> Result<Self> {
        let j0 = declared.interior_direction()?;
        Self::from_arc(
            format!("{} declared {}", set.name(), declared.name()),
            declared,
            j0,
            Arc::new(move |_x: &[f64], j: &Jet| set.classify(j)),
            true,
        )
    }

    /// The whole jet space (every jet Inside).
    pub fn full_space(cone: MonotonicityCone) -> Result<Self> {
        let j0 = cone.interior_direction()?;
        Self::from_arc("J2", cone, j0, Arc::new(|_x: &[f64], _j: &Jet| Classification::Inside), true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.cone.dim()
    }

    pub fn cone(&self) -> &MonotonicityCone {
        &self.cone
    }

    pub fn j0(&self) -> &Jet {
        &self.j0
    }

    /// True when the fibers do not depend on `x`.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn classify(&self, x: &[f64], j: &Jet) -> Classification {
        (self.classify)(x, j)
    }

    /// Interiorhood decided by the shift test: a member is Inside when
    /// `J - eta J0` stays a member for some `eta` in the grid.
    pub fn refined_classify(&self, x: &[f64], j: &Jet) -> Classification {
        match self.classify(x, j) {
            Classification::Outside => Classification::Outside,
            _ => {
                if ETA_GRID.iter().any(|eta| self.classify(x, &j.axpy(-eta, &self.j0)).is_member()) {
                    Classification::Inside
                } else {
                    Classification::Boundary
                }
            }
        }
    }

    /// Dirichlet dual: Inside iff `-J` is Outside, Outside iff `-J` is Inside.
    pub fn dual(&self) -> Self {
        let inner = self.classify.clone();
        Self {
            name: format!("dual({})", self.name),
            cone: self.cone.clone(),
            j0: self.j0.clone(),
            classify: Arc::new(move |x: &[f64], j: &Jet| inner(x, &j.neg()).flip()),
            constant: self.constant,
        }
    }

    /// Fiberwise intersection, monotone for the intersection of the cones.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        let cone = self.cone.intersect(&other.cone)?;
        let j0 = cone.interior_direction()?;
        let (a, b) = (self.classify.clone(), other.classify.clone());
        Self::from_arc(
            format!("{} ∩ {}", self.name, other.name),
            cone,
            j0,
            Arc::new(move |x: &[f64], j: &Jet| meet(a(x, j), b(x, j))),
            self.constant && other.constant,
        )
    }

    /// Fiberwise union, monotone for the intersection of the cones.
    pub fn union(&self, other: &Self) -> Result<Self> {
        let cone = self.cone.intersect(&other.cone)?;
        let j0 = cone.interior_direction()?;
        let (a, b) = (self.classify.clone(), other.classify.clone());
        Self::from_arc(
            format!("{} ∪ {}", self.name, other.name),
            cone,
            j0,
            Arc::new(move |x: &[f64], j: &Jet| join(a(x, j), b(x, j))),
            self.constant && other.constant,
        )
    }

    /// Smallest `t >= 0` (bisection) with `J + t J0` a member at `x`.
    pub fn entry_time(&self, x: &[f64], j: &Jet) -> f64 {
        if self.classify(x, j).is_member() {
            return 0.0;
        }
        let mut hi = 1.0;
        while !self.classify(x, &j.axpy(hi, &self.j0)).is_member() {
            hi *= 2.0;
            if hi > 1e9 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.classify(x, &j.axpy(mid, &self.j0)).is_member() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Member of `F_x` obtained by pushing `J` along `J0`, with a random
    /// extra push that is zero a quarter of the time.
    pub fn push_member<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64], j: &Jet) -> Option<Jet> {
        let t = self.entry_time(x, j);
        if !t.is_finite() {
            return None;
        }
        let extra = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..2.0) };
        Some(j.axpy(t + extra, &self.j0))
    }
}

/// Classification of an intersection.
pub fn meet(a: Classification, b: Classification) -> Classification {
    use Classification::*;
    match (a, b) {
        (Outside, _) | (_, Outside) => Outside,
        (Inside, Inside) => Inside,
        _ => Boundary,
    }
}

/// Classification of a union.
pub fn join(a: Classification, b: Classification) -> Classification {
    meet(a.flip(), b.flip()).flip()
}

/// Deterministic source of `(x, J)` samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JetSampler {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// Jets are rescaled into the jet-norm ball of this radius.
    pub max_norm: f64,
    #[serde(default)]
    pub domain: Option<BoxDomain>,
}

impl JetSampler {
    pub fn new(n: usize, count: usize, seed: u64) -> Self {
        Self { n, count, seed, max_norm: 10.0, domain: None }
    }

    pub fn with_domain(mut self, d: BoxDomain) -> Self {
        self.domain = Some(d);
        self
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.domain {
            Some(d) => (0..d.dim()).map(|i| rng.gen_range(d.lower()[i]..=d.upper()[i])).collect(),
            None => vec![0.0; self.n],
        }
    }

    pub fn jet<R: Rng + ?Sized>(&self, rng: &mut R) -> Jet {
        let j = random_jet(rng, self.n, self.max_norm);
        let nrm = j.norm();
        if nrm > self.max_norm {
            j.scale(self.max_norm / nrm * rng.gen_range(0.05..1.0))
        } else {
            j
        }
    }

    /// `count` samples `(x, J)`.
    pub fn samples(&self) -> Vec<(Vec<f64>, Jet)> {
        let mut rng = self.rng();
        (0..self.count)
            .map(|_| {
                let x = self.point(&mut rng);
                let j = self.jet(&mut rng);
                (x, j)
            })
            .collect()
    }

    fn check_dim(&self, oracle: &SubequationOracle) -> Result<()> {
        if self.n != oracle.dim() {
            return Err(Error::DimensionMismatch { expected: oracle.dim(), got: self.n });
        }
        Ok(())
    }
}

fn off_band(c: &[Classification]) -> bool {
    c.iter().all(|c| *c != Classification::Boundary)
}

/// `F_x + F~_x ⊂ M~`: sums of members of `F` and of its dual must not be
/// Outside the closed-form dual of the declared cone, with the band of the
/// sum taken as the sum of the two summand bands.
pub fn check_sum_law(f: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let dual = f.dual();
    let mut rep = Report::new("sum_law");
    let mut rng = sampler.rng();
    for _ in 0..sampler.count {
        let x = sampler.point(&mut rng);
        let (ja, jb) = (sampler.jet(&mut rng), sampler.jet(&mut rng));
        let (Some(j), Some(jd)) = (f.push_member(&mut rng, &x, &ja), dual.push_member(&mut rng, &x, &jb)) else {
            continue;
        };
        rep.samples += 1;
        let s = j.add(&jd);
        f.cone().dual_classify(&s)?;
        if f.cone().dual_margin(&s) < -(j.tau() + jd.tau()) {
            rep.fail(&x, Some(&s), format!("J = {:?} in F, J' = {:?} in dual, sum outside dual cone", j, jd));
        }
    }
    Ok(rep)
}

/// `dual(dual(F)) = F` off the boundary band.
pub fn check_involution(f: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let dd = f.dual().dual();
    let mut rep = Report::new("involution");
    for (x, j) in sampler.samples() {
        let (a, b) = (f.classify(&x, &j), dd.classify(&x, &j));
        if !off_band(&[a, b]) {
            continue;
        }
        rep.samples += 1;
        if a != b {
            rep.fail(&x, Some(&j), format!("F: {a}, dual(dual(F)): {b}"));
        }
    }
    Ok(rep)
}

/// For `F1 ⊆ F2`: Inside for `dual(F2)` implies a member of `dual(F1)`.
/// The inclusion itself is also checked on the samples.
pub fn check_inclusion_reversal(
    smaller: &SubequationOracle,
    larger: &SubequationOracle,
    sampler: &JetSampler,
) -> Result<Report> {
    sampler.check_dim(smaller)?;
    let (d1, d2) = (smaller.dual(), larger.dual());
    let mut rep = Report::new("inclusion_reversal");
    for (x, j) in sampler.samples() {
        rep.samples += 1;
        if smaller.classify(&x, &j).is_inside() && larger.classify(&x, &j).is_outside() {
            rep.fail(&x, Some(&j), "declared inclusion fails on this sample");
        }
        if d2.classify(&x, &j).is_inside() && d1.classify(&x, &j).is_outside() {
            rep.fail(&x, Some(&j), "Inside dual of the larger set but Outside dual of the smaller");
        }
    }
    Ok(rep)
}

/// `dual(F ∩ G) = dual(F) ∪ dual(G)` off the boundary band.
pub fn check_intersection_law(f: &SubequationOracle, g: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let lhs = f.intersect(g)?.dual();
    let (df, dg) = (f.dual(), g.dual());
    let mut rep = Report::new("intersection_law");
    for (x, j) in sampler.samples() {
        let a = lhs.classify(&x, &j);
        let (b1, b2) = (df.classify(&x, &j), dg.classify(&x, &j));
        if !off_band(&[a, b1, b2]) {
            continue;
        }
        rep.samples += 1;
        if a.is_member() != (b1.is_member() || b2.is_member()) {
            rep.fail(&x, Some(&j), format!("dual(F∩G): {a}, dual F: {b1}, dual G: {b2}"));
        }
    }
    Ok(rep)
}

/// If `F_x + J ⊆ F_x` on the samples then `F~_x + J ⊆ F~_x` on the samples.
pub fn check_translation_law(f: &SubequationOracle, shift: &Jet, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let d = f.dual();
    let mut rep = Report::new("translation_law");
    let samples = sampler.samples();
    let hypothesis = samples
        .iter()
        .all(|(x, j)| !f.classify(x, j).is_inside() || f.classify(x, &j.add(shift)).is_member());
    rep.metric("hypothesis_holds", if hypothesis { 1.0 } else { 0.0 });
    if !hypothesis {
        rep.note("F + J ⊆ F fails on the samples; the law is vacuous");
        return Ok(rep);
    }
    for (x, j) in samples {
        let (a, b) = (d.classify(&x, &j), d.classify(&x, &j.add(shift)));
        rep.samples += 1;
        if a.is_inside() && b.is_outside() {
            rep.fail(&x, Some(&j), "dual member leaves the dual after the shift");
        }
    }
    Ok(rep)
}

/// `F_x + M ⊆ F_x` on the sampled Inside members.
pub fn check_monotonicity(f: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let mut rep = Report::new("monotonicity");
    let mut rng = sampler.rng();
    for _ in 0..sampler.count {
        let x = sampler.point(&mut rng);
        let ja = sampler.jet(&mut rng);
        let Some(j) = f.push_member(&mut rng, &x, &ja) else { continue };
        let m = f.cone().sample_member(&mut rng, 3.0)?;
        if !f.classify(&x, &j).is_inside() {
            continue;
        }
        rep.samples += 1;
        if f.classify(&x, &j.add(&m)).is_outside() {
            rep.fail(&x, Some(&j), format!("adding cone member {m:?} leaves the fiber"));
        }
    }
    Ok(rep)
}

/// The shift test agrees with the oracle's own Inside/Outside verdicts.
pub fn check_interior_characterization(f: &SubequationOracle, sampler: &JetSampler) -> Result<Report> {
    sampler.check_dim(f)?;
    let mut rep = Report::new("interior_characterization");
    for (x, j) in sampler.samples() {
        let a = f.classify(&x, &j);
        if a == Classification::Boundary {
            continue;
        }
        rep.samples += 1;
        let b = f.refined_classify(&x, &j);
        if a != b {
            rep.fail(&x, Some(&j), format!("oracle {a}, shift test {b}"));
        }
    }
    Ok(rep)
}

/// Closed-form dual of the cone against the abstract dual of its oracle.
pub fn check_dual_closed_form(cone: &MonotonicityCone, sampler: &JetSampler) -> Result<Report> {
    let oracle = SubequationOracle::constant(cone.clone())?;
    sampler.check_dim(&oracle)?;
    let dual = oracle.dual();
    let mut rep = Report::new(format!("dual_closed_form {}", cone.name()));
    for (x, j) in sampler.samples() {
        let a = cone.dual_classify(&j)?;
        let b = dual.classify(&x, &j);
        if !off_band(&[a, b]) {
            continue;
        }
        rep.samples += 1;
        if a != b {
            rep.fail(&x, Some(&j), format!("closed form {a}, abstract dual {b}"));
        }
    }
    Ok(rep)
}
