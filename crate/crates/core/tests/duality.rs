use jetcone::cones::{MonotonicityCone, Radius};
use jetcone::duality::{
    check_dual_closed_form, check_inclusion_reversal, check_interior_characterization, check_intersection_law,
    check_involution, check_monotonicity, check_sum_law, check_translation_law, JetSampler, SubequationOracle,
};
use jetcone::{Classification, DirectionalCone, Jet, SymMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cones(n: usize) -> Vec<MonotonicityCone> {
    let d = DirectionalCone::orthant(n).unwrap();
    vec![
        MonotonicityCone::convexity(n).unwrap(),
        MonotonicityCone::negativity(n).unwrap(),
        MonotonicityCone::directional(d.clone()).unwrap(),
        MonotonicityCone::gamma(n, 1.5).unwrap(),
        MonotonicityCone::radius(n, 2.0).unwrap(),
        MonotonicityCone::q_cone(n).unwrap(),
        MonotonicityCone::d_p(d.clone()).unwrap(),
        MonotonicityCone::n_d_p(d.clone()).unwrap(),
        MonotonicityCone::fundamental(0.5, d, Radius::Finite(3.0)).unwrap(),
    ]
}

fn oracle(c: &MonotonicityCone) -> SubequationOracle {
    SubequationOracle::constant(c.clone()).unwrap()
}

#[test]
fn involution_and_sum_laws() {
    for n in [2, 3] {
        for c in cones(n) {
            let f = oracle(&c);
            let s = JetSampler::new(n, 1000, 31);
            let inv = check_involution(&f, &s).unwrap();
            assert!(inv.pass && inv.samples > 900, "{}: {:?}", c.name(), inv.violations.first());
            let sum = check_sum_law(&f, &s).unwrap();
            assert!(sum.pass, "{}: {:?}", c.name(), sum.violations.first());
            let mono = check_monotonicity(&f, &s).unwrap();
            assert!(mono.pass, "{}: {:?}", c.name(), mono.violations.first());
            let ic = check_interior_characterization(&f, &s).unwrap();
            assert!(ic.pass, "{}: {:?}", c.name(), ic.violations.first());
        }
    }
}

#[test]
fn inclusion_intersection_and_translation_laws() {
    let n = 3;
    let all = cones(n);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for a in &all {
        let fa = oracle(a);
        let s = JetSampler::new(n, 1000, 32);
        let smaller = oracle(&a.intersect(&MonotonicityCone::convexity(n).unwrap()).unwrap());
        let inc = check_inclusion_reversal(&smaller, &fa, &s).unwrap();
        assert!(inc.pass, "{}: {:?}", a.name(), inc.violations.first());
        let shift = a.sample_member(&mut rng, 2.0).unwrap();
        let tr = check_translation_law(&fa, &shift, &s).unwrap();
        assert_eq!(tr.metrics["hypothesis_holds"], 1.0);
        assert!(tr.pass, "{}: {:?}", a.name(), tr.violations.first());
        for b in &all {
            let rep = check_intersection_law(&fa, &oracle(b), &s).unwrap();
            assert!(rep.pass, "{} / {}: {:?}", a.name(), b.name(), rep.violations.first());
        }
    }
}

#[test]
fn closed_form_duals_match_abstract_duals() {
    for n in [2, 3, 4] {
        for c in cones(n) {
            let rep = check_dual_closed_form(&c, &JetSampler::new(n, 1000, 33)).unwrap();
            assert!(rep.pass && rep.samples > 900, "{}: {:?}", c.name(), rep.violations.first());
        }
    }
}

fn lmax2(a: &SymMatrix) -> f64 {
    let (x, y, z) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    0.5 * (x + z + ((x - z).powi(2) + 4.0 * y * y).sqrt())
}

fn expected_dual_margin(kind: usize, j: &Jet) -> f64 {
    let pn = (j.p[0] * j.p[0] + j.p[1] * j.p[1]).sqrt();
    match kind {
        0 => lmax2(&j.a),
        1 => -j.r,
        2 => j.p[0].max(j.p[1]),
        3 => 1.5 * pn - j.r,
        _ => lmax2(&j.a) + pn / 2.0,
    }
}

proptest! {
    #[test]
    fn generator_duals_against_hand_formulas(
        r in -5.0f64..5.0, p0 in -5.0f64..5.0, p1 in -5.0f64..5.0,
        a00 in -5.0f64..5.0, a01 in -5.0f64..5.0, a11 in -5.0f64..5.0,
    ) {
        let a = SymMatrix::from_rows(&[vec![a00, a01], vec![a01, a11]]).unwrap();
        let j = Jet::new(r, vec![p0, p1], a).unwrap();
        for (kind, c) in cones(2).into_iter().take(5).enumerate() {
            let m = expected_dual_margin(kind, &j);
            let got = c.dual_classify(&j).unwrap();
            if m > 1e-6 {
                prop_assert_eq!(got, Classification::Inside, "{}", c.name());
            } else if m < -1e-6 {
                prop_assert_eq!(got, Classification::Outside, "{}", c.name());
            }
        }
    }

    #[test]
    fn dual_is_flip_of_negated_membership(seed in 0u64..500) {
        let s = JetSampler::new(2, 20, seed);
        for c in cones(2) {
            for (_, j) in s.samples() {
                let d = c.dual_classify(&j).unwrap();
                let m = c.classify(&j.neg());
                if d != Classification::Boundary && m != Classification::Boundary {
                    prop_assert_eq!(d, m.flip());
                }
            }
        }
    }
}
