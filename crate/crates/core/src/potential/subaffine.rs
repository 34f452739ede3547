//! Comparison with quadratic classes: `u <= a` on the boundary forces
//! `u <= a` inside, for seeded members `a` of a class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classical::{Classical, QuadraticFunction};
use super::grid::{BoxDomain, GridFunction};
use crate::jet::{lambda_max, vnorm, vsub, DirectionalCone, SymMatrix};
use crate::operators::sample_directional;
use crate::report::Report;
use crate::tolerances::tol_fd;
use crate::{Error, Result};

/// Members sampled per class.
pub const CLASS_SAMPLES: usize = 200;

/// Radius of the gradient ball the members are drawn from.
pub const GRADIENT_RADIUS: f64 = 5.0;

/// Quadratic test classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadraticClass {
    /// Affine functions.
    Aff,
    /// Affine functions `a >= 0` on the closed domain.
    AffPlus,
    /// Quadratics `a >= 0` on the closed domain.
    Plus,
    /// Quadratics with `Da in -D` on the domain.
    AD { cone: DirectionalCone },
    /// Quadratics with `a >= gamma |Da|` on the domain.
    AGamma { gamma: f64 },
    /// Quadratics with `D^2 a <= -(|Da| / R) I` on the domain.
    AR { radius: f64 },
    /// Quadratics with `D^2 a = -(max |Da| / R) I`.
    ARMin { radius: f64 },
    /// Affine functions with `a >= 0` and `Da in -int D`.
    AffPlusD { cone: DirectionalCone },
}

impl QuadraticClass {
    pub fn name(&self) -> &'static str {
        match self {
            QuadraticClass::Aff => "Aff",
            QuadraticClass::AffPlus => "Aff+",
            QuadraticClass::Plus => "Plus",
            QuadraticClass::AD { .. } => "A_D",
            QuadraticClass::AGamma { .. } => "A_gamma",
            QuadraticClass::AR { .. } => "A_R",
            QuadraticClass::ARMin { .. } => "A_R,min",
            QuadraticClass::AffPlusD { .. } => "Aff+_D",
        }
    }

    fn validate(&self, dom: &BoxDomain) -> Result<()> {
        let n = dom.dim();
        match self {
            QuadraticClass::AD { cone } | QuadraticClass::AffPlusD { cone } if cone.dim() != n => {
                Err(Error::DimensionMismatch { expected: n, got: cone.dim() })
            }
            QuadraticClass::AGamma { gamma } if !(*gamma >= 0.0) => {
                Err(Error::InvalidParameter(format!("gamma = {gamma} must be nonnegative")))
            }
            QuadraticClass::AR { radius } | QuadraticClass::ARMin { radius } => {
                let reach = 0.5 * dom.diameter();
                if *radius > reach {
                    Ok(())
                } else {
                    Err(Error::UnsupportedCone(format!(
                        "the domain does not fit in a ball of radius {radius} around its centre"
                    )))
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether `a` satisfies the class constraints on the lattice and corners.
    pub fn contains(&self, a: &QuadraticFunction, dom: &BoxDomain) -> bool {
        let pts = lattice_and_corners(dom);
        let affine = a.a0.max_abs() == 0.0;
        let tol = 1e-9 * (1.0 + a.r0.abs() + vnorm(&a.p0));
        match self {
            QuadraticClass::Aff => affine,
            QuadraticClass::AffPlus => affine && pts.iter().all(|x| a.value(x) >= -tol),
            QuadraticClass::Plus => pts.iter().all(|x| a.value(x) >= -tol),
            QuadraticClass::AD { cone } => pts.iter().all(|x| cone.margin(&neg_grad(a, x)) >= -tol),
            QuadraticClass::AGamma { gamma } => pts.iter().all(|x| a.value(x) >= gamma * vnorm(&grad(a, x)) - tol),
            QuadraticClass::AR { radius } => {
                let top = lambda_max(&a.a0);
                pts.iter().all(|x| top <= -vnorm(&grad(a, x)) / radius + tol)
            }
            QuadraticClass::ARMin { radius } => {
                let m = pts.iter().map(|x| vnorm(&grad(a, x))).fold(0.0, f64::max);
                a.a0.sub(&SymMatrix::scalar(dom.dim(), -m / radius).expect("dimension")).max_abs() <= tol
            }
            QuadraticClass::AffPlusD { cone } => {
                affine && pts.iter().all(|x| a.value(x) >= -tol && cone.margin(&neg_grad(a, x)) > 0.0)
            }
        }
    }
}

fn grad(a: &QuadraticFunction, x: &[f64]) -> Vec<f64> {
    a.jet(x).expect("quadratic").p
}

fn neg_grad(a: &QuadraticFunction, x: &[f64]) -> Vec<f64> {
    grad(a, x).iter().map(|v| -v).collect()
}

fn lattice_and_corners(dom: &BoxDomain) -> Vec<Vec<f64>> {
    let mut pts = dom.corners();
    let stride = (dom.len() / 4000).max(1);
    pts.extend((0..dom.len()).step_by(stride).map(|i| dom.point(i)));
    pts
}

fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = vnorm(&v).max(1e-12);
    let r = radius * rng.gen::<f64>();
    v.iter().map(|c| c * r / nv).collect()
}

fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SymMatrix {
    let mut m = SymMatrix::zeros(n).expect("dimension");
    for i in 0..n {
        for j in i..n {
            m.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    m
}

/// Shape (gradient at the centre and Hessian) of a class member, before the
/// constant is fixed.
fn sample_shape<R: Rng + ?Sized>(rng: &mut R, class: &QuadraticClass, dom: &BoxDomain) -> Option<(Vec<f64>, SymMatrix)> {
    let n = dom.dim();
    let c = dom.center();
    let zero = SymMatrix::zeros(n).expect("dimension");
    let corners = dom.corners();
    let reach = corners.iter().map(|x| vnorm(&vsub(x, &c))).fold(0.0, f64::max);
    match class {
        QuadraticClass::Aff | QuadraticClass::AffPlus => Some((random_vector(rng, n, GRADIENT_RADIUS), zero)),
        QuadraticClass::Plus | QuadraticClass::AGamma { .. } => {
            Some((random_vector(rng, n, GRADIENT_RADIUS), random_symmetric(rng, n, GRADIENT_RADIUS)))
        }
        QuadraticClass::AD { cone } => {
            let g = sample_directional(rng, cone, GRADIENT_RADIUS);
            let g: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut h = random_symmetric(rng, n, 2.0);
            for _ in 0..60 {
                let ok = corners.iter().all(|x| cone.margin(&h.mul_vec(&vsub(x, &c)).iter().zip(&g).map(|(a, b)| -(a + b)).collect::<Vec<_>>()) >= 0.0);
                if ok {
                    return Some((g, h));
                }
                h = h.scale(0.5);
            }
            Some((g, zero))
        }
        QuadraticClass::AR { radius } => {
            let g = random_vector(rng, n, GRADIENT_RADIUS);
            let kappa = (vnorm(&g) + reach) / (radius - reach) * (1.0 + rng.gen::<f64>());
            let v = random_vector(rng, n, 1.0);
            let extra = SymMatrix::outer(&v).expect("dimension").scale(rng.gen::<f64>());
            Some((g, SymMatrix::scalar(n, -kappa).expect("dimension").sub(&extra)))
        }
        QuadraticClass::ARMin { radius } => {
            let g = random_vector(rng, n, GRADIENT_RADIUS);
            let mut kappa = 0.0;
            for _ in 0..200 {
                let next = corners
                    .iter()
                    .map(|x| vnorm(&g.iter().zip(vsub(x, &c)).map(|(a, d)| a - kappa * d).collect::<Vec<_>>()))
                    .fold(0.0, f64::max)
                    / radius;
                if (next - kappa).abs() <= 1e-15 * (1.0 + kappa) {
                    kappa = next;
                    break;
                }
                kappa = next;
            }
            Some((g, SymMatrix::scalar(n, -kappa).expect("dimension")))
        }
        QuadraticClass::AffPlusD { cone } => {
            for _ in 0..1000 {
                let p = sample_directional(rng, cone, GRADIENT_RADIUS);
                if cone.margin(&p) > 1e-3 * (1.0 + vnorm(&p)) {
                    return Some((p.iter().map(|v| -v).collect(), zero));
                }
            }
            None
        }
    }
}

/// For `CLASS_SAMPLES` seeded members `a` whose constant is anchored so that
/// `max over boundary cells of (u - a) = -s <= 0`, requires
/// `max over interior cells of (u - a) <= tol_fd`.
pub fn sub_a_check(u: &GridFunction, class: &QuadraticClass, seed: u64) -> Result<Report> {
    sub_a_check_with(u, class, CLASS_SAMPLES, seed)
}

pub fn sub_a_check_with(u: &GridFunction, class: &QuadraticClass, count: usize, seed: u64) -> Result<Report> {
    let dom = &u.domain;
    class.validate(dom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = Report::new(format!("sub_A {}", class.name()));
    let h = dom.h_max();
    let c = dom.center();
    let boundary: Vec<usize> = (0..dom.len()).filter(|&i| dom.is_boundary(i)).collect();
    let interior = dom.interior_indices();
    let mut attempts = 0;
    while rep.samples < count {
        attempts += 1;
        if attempts > 20 * count {
            rep.mark_inconclusive(format!("only {} class members were sampled", rep.samples));
            break;
        }
        let Some((g, hess)) = sample_shape(&mut rng, class, dom) else { continue };
        let shape = QuadraticFunction { r0: 0.0, p0: g, a0: hess, center: c.clone() };
        let slack = rng.gen_range(0.0..0.1) * (1.0 + u.sup_abs());
        let anchor = boundary
            .iter()
            .map(|&i| u.values[i] - shape.value(&dom.point(i)))
            .fold(f64::NEG_INFINITY, f64::max)
            + slack;
        let mut a = shape.shifted(if anchor.is_finite() { anchor } else { 0.0 });
        let pts = lattice_and_corners(dom);
        let lift = match class {
            QuadraticClass::AffPlus | QuadraticClass::Plus | QuadraticClass::AffPlusD { .. } => {
                pts.iter().map(|x| -a.value(x)).fold(0.0, f64::max)
            }
            QuadraticClass::AGamma { gamma } => pts.iter().map(|x| gamma * vnorm(&grad(&a, x)) - a.value(x)).fold(0.0, f64::max),
            _ => 0.0,
        };
        a = a.shifted(lift);
        if !class.contains(&a, dom) {
            continue;
        }
        rep.samples += 1;
        let (worst, at) = interior
            .iter()
            .map(|&i| (u.values[i] - a.value(&dom.point(i)), i))
            .fold((f64::NEG_INFINITY, 0), |b, v| if v.0 > b.0 { v } else { b });
        if worst.is_finite() {
            let scale = u.values[at].abs().max(a.value(&dom.point(at)).abs());
            if worst > tol_fd(h, scale) {
                let x = dom.point(at);
                let jet = a.jet(&x);
                rep.fail(&x, jet.as_ref(), format!("u - a = {worst} inside while u <= a on the boundary; a = {a:?}"));
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_sample_is_subaffine() {
        let d = BoxDomain::unit_cube(2, 21).unwrap();
        let u = GridFunction::from_fn(&d, |x| (x[0] - 0.3).powi(2) + x[1] * x[1]).unwrap();
        let r = sub_a_check(&u, &QuadraticClass::Aff, 1).unwrap();
        assert!(r.pass && r.samples == CLASS_SAMPLES);
    }

    #[test]
    fn bump_is_not_subaffine() {
        let d = BoxDomain::unit_cube(2, 21).unwrap();
        let u = GridFunction::from_fn(&d, |x| (-20.0 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))).exp()).unwrap();
        let r = sub_a_check(&u, &QuadraticClass::Aff, 2).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn members_respect_their_class() {
        let d = BoxDomain::unit_cube(2, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let classes = [
            QuadraticClass::AD { cone: DirectionalCone::orthant(2).unwrap() },
            QuadraticClass::AR { radius: 2.0 },
            QuadraticClass::ARMin { radius: 2.0 },
        ];
        for class in classes {
            for _ in 0..50 {
                let (g, h) = sample_shape(&mut rng, &class, &d).unwrap();
                let a = QuadraticFunction { r0: 0.0, p0: g, a0: h, center: d.center() };
                assert!(class.contains(&a, &d), "{class:?}: {a:?}");
            }
        }
    }

    #[test]
    fn radius_class_needs_enclosing_ball() {
        let d = BoxDomain::unit_cube(2, 11).unwrap();
        let u = GridFunction::from_fn(&d, |_| 0.0).unwrap();
        assert!(sub_a_check(&u, &QuadraticClass::AR { radius: 0.5 }, 1).is_err());
    }
}
