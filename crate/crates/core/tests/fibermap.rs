use jetcone::cones::{random_jet, MonotonicityCone, Radius};
use jetcone::duality::SubequationOracle;
use jetcone::fibermap::{
    certify_with, check_no_finite_enlargement, excess, hausdorff, verify_certificate, FiberegOptions, JetWindow,
};
use jetcone::jet::jet_norm;
use jetcone::potential::BoxDomain;
use jetcone::{Classification, DirectionalCone, Jet, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trace_oracle(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> SubequationOracle {
    let cone = MonotonicityCone::convexity(2).unwrap();
    let j0 = cone.interior_direction().unwrap();
    SubequationOracle::new("trace", cone, j0, move |x: &[f64], j: &Jet| {
        Classification::from_margin(j.a.trace() - f(x), 1e-9 * (1.0 + j.norm()))
    })
    .unwrap()
}

fn opts() -> FiberegOptions {
    FiberegOptions { pairs: 4000, iterations: 20, seed: 21 }
}

#[test]
fn jump_in_data_is_reported() {
    let f = trace_oracle(|x| if x[0] < 0.5 { 0.0 } else { 1.0 });
    let w = JetWindow::new(2, 2.0, 300, 3).unwrap();
    let d = BoxDomain::unit_cube(2, 21).unwrap();
    let c = certify_with(&f, &d, 0.05, &w, opts()).unwrap();
    assert!(!c.pass);
    assert!(c.violation_count > 0);
    assert_eq!(c.delta, d.h_min());
}

#[test]
fn lipschitz_data_certifies_and_dual_follows() {
    // |f(x) - f(y)| <= 2 |x - y| and J0 adds trace 2, so delta ~ eta
    let f = trace_oracle(|x| 1.0 + x[0] + x[1]);
    let w = JetWindow::new(2, 2.0, 300, 3).unwrap();
    let d = BoxDomain::unit_cube(2, 21).unwrap();
    let c = certify_with(&f, &d, 0.2, &w, opts()).unwrap();
    assert!(c.pass, "{:?}", c.violations.first());
    assert!(c.delta > 0.1 && c.delta < d.diameter());
    let dual = verify_certificate(&f.dual(), &c, &w, opts()).unwrap();
    assert!(dual.pass, "{:?}", dual.violations.first());
}

#[test]
fn certificate_json_fields() {
    let f = trace_oracle(|x| x[0]);
    let w = JetWindow::new(2, 2.0, 150, 3).unwrap();
    let d = BoxDomain::unit_cube(2, 11).unwrap();
    let c = certify_with(&f, &d, 0.5, &w, FiberegOptions { pairs: 500, iterations: 10, seed: 1 }).unwrap();
    let v = serde_json::to_value(&c).unwrap();
    for key in ["eta", "delta", "J0", "domain", "pair_count", "violations", "pass"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn positive_cone_complement_balls() {
    let f = SubequationOracle::constant(MonotonicityCone::convexity(3).unwrap()).unwrap();
    let rep = check_no_finite_enlargement(&f, &[0.0; 3], 20.0, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.violations.first());
}

#[test]
fn gamma_cone_complement_balls() {
    let cone = MonotonicityCone::fundamental(1.0, DirectionalCone::full(2).unwrap(), Radius::Infinite).unwrap();
    let f = SubequationOracle::constant(cone).unwrap();
    let rep = check_no_finite_enlargement(&f, &[0.0; 2], 20.0, 5).unwrap();
    assert!(rep.pass, "{:?}", rep.violations.first());
    assert!(rep.metrics["certified_radius"] > 0.0);
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let set = |rng: &mut ChaCha8Rng| -> Vec<Jet> {
        let k = rng.gen_range(1..6);
        (0..k).map(|_| random_jet(rng, 2, 3.0)).collect()
    };
    for _ in 0..500 {
        let (a, b, c) = (set(&mut rng), set(&mut rng), set(&mut rng));
        let (ab, bc, ac) = (hausdorff(&a, &b), hausdorff(&b, &c), hausdorff(&a, &c));
        assert!(ac <= ab + bc + 1e-12);
        assert_eq!(ab, hausdorff(&b, &a));
    }
}

#[test]
fn subset_with_extra_point_at_distance_d() {
    let z = |r: f64| Jet::new(r, vec![0.0, 0.0], SymMatrix::zeros(2).unwrap()).unwrap();
    let a = vec![z(0.0), z(1.0)];
    let mut b = a.clone();
    b.push(z(3.5));
    assert_eq!(hausdorff(&a, &b), 2.5);
    assert_eq!(excess(&a, &b), 0.0);
}

proptest! {
    #[test]
    fn hausdorff_zero_iff_equal_sets(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Jet> = (0..4).map(|_| random_jet(&mut rng, 2, 2.0)).collect();
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert_eq!(hausdorff(&a, &shuffled), 0.0);
        let mut other = a.clone();
        other[0].r += 0.5;
        prop_assert!(hausdorff(&a, &other) > 0.0);
    }

    #[test]
    fn singletons_distance_is_jet_norm(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (random_jet(&mut rng, 3, 2.0), random_jet(&mut rng, 3, 2.0));
        prop_assert_eq!(hausdorff(&[x.clone()], &[y.clone()]), jet_norm(&x.sub(&y)));
    }
}
