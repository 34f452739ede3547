use jetcone::duality::JetSampler;
use jetcone::fibermap::{certify_with, verify_certificate, FiberegOptions, JetWindow};
use jetcone::operators::{
    build_correspondence, builtin_pairs, check_avsub_equivalence, check_closure_probe, check_compatibility,
    check_m_monotonicity, check_nonempty, check_proper_ellipticity, check_regularity_ucf, check_t2_density,
    check_t3_joint_interior, make_ot_operator, make_pma_operator, MatrixField, MatrixSpec, Modulus, ScalarField,
    ScalarSpec, VectorField, VectorSpec,
};
use jetcone::potential::BoxDomain;
use jetcone::{DirectionalCone, SymMatrix};

fn ot_with(f: ScalarSpec, domain: &BoxDomain) -> jetcone::operators::OperatorPair {
    make_ot_operator(
        ScalarField::from_spec(ScalarSpec::Affine { offset: 1.0, slope: vec![1.0, 1.0] }, 2).unwrap(),
        ScalarField::from_spec(f, 2).unwrap(),
        DirectionalCone::orthant(2).unwrap(),
        vec![1.0, 1.0],
        Some(Modulus { c: 2.0, s: 1.0 }),
        domain,
    )
    .unwrap()
}

#[test]
fn builtin_pairs_are_proper_elliptic_and_monotone() {
    for (pair, dom) in builtin_pairs().unwrap() {
        let s = JetSampler::new(pair.dim(), 10_000, 11).with_domain(dom);
        let pe = check_proper_ellipticity(&pair, &s).unwrap();
        assert!(pe.pass, "{}: {:?}", pair.name(), pe.violations.first());
        assert!(pe.samples > 1000, "{}: only {} admissible samples", pair.name(), pe.samples);
        let mm = check_m_monotonicity(&pair, &s).unwrap();
        assert!(mm.pass, "{}: {:?}", pair.name(), mm.violations.first());
    }
}

#[test]
fn builtin_correspondences_are_compatible_and_nonempty() {
    for (pair, dom) in builtin_pairs().unwrap() {
        let c = build_correspondence(&pair).unwrap();
        let s = JetSampler::new(pair.dim(), 5000, 12).with_domain(dom.clone());
        let comp = check_compatibility(&c, &s).unwrap();
        assert!(comp.pass, "{}: {:?}", pair.name(), comp.violations.first());
        let ne = check_nonempty(&c, &dom).unwrap();
        assert!(ne.pass, "{}: {:?}", pair.name(), ne.violations.first());
    }
}

#[test]
fn classical_subsolution_test_matches_oracle() {
    for (pair, dom) in builtin_pairs().unwrap() {
        let c = build_correspondence(&pair).unwrap();
        let rep = check_avsub_equivalence(&c, &dom, 1000, 13).unwrap();
        assert!(rep.pass, "{}: {:?}", pair.name(), rep.violations.first());
        assert!(rep.metrics["members"] > 0.0 && rep.metrics["non_members"] > 0.0, "{}: {:?}", pair.name(), rep.metrics);
    }
}

#[test]
fn ot_regularity_records_delta() {
    let dom = BoxDomain::unit_cube(2, 101).unwrap();
    let pair = ot_with(ScalarSpec::Radial { offset: 1.0, coeff: 0.25, center: None, power: 2.0 }, &dom);
    let rep = check_regularity_ucf(&pair, &dom, 0.1, FiberegOptions { pairs: 4000, iterations: 20, seed: 3 }).unwrap();
    assert!(rep.pass, "{:?}", rep.violations.first());
    let delta = rep.metrics["delta"];
    assert!(delta >= dom.h_min() && delta < dom.diameter(), "delta = {delta}");
}

#[test]
fn constant_coefficient_pair_has_full_delta() {
    let dom = BoxDomain::unit_cube(2, 21).unwrap();
    let pair = make_pma_operator(
        VectorField::from_spec(VectorSpec::Constant { value: vec![1.0, 0.0] }, 2).unwrap(),
        MatrixField::from_spec(MatrixSpec::Constant { value: SymMatrix::diag(&[1.0, 0.0]).unwrap() }, 2).unwrap(),
        ScalarField::constant(1.0),
        vec![1.0, 0.0],
        &dom,
    )
    .unwrap();
    let rep = check_regularity_ucf(&pair, &dom, 0.1, FiberegOptions { pairs: 2000, iterations: 20, seed: 4 }).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.metrics["delta"], dom.diameter());
}

#[test]
fn step_data_fails_regularity_near_the_jump() {
    let dom = BoxDomain::unit_cube(2, 101).unwrap();
    let pair = ot_with(ScalarSpec::Step { low: 1.0, high: 3.0, axis: 0, at: 0.5 }, &dom);
    let rep = check_regularity_ucf(&pair, &dom, 0.1, FiberegOptions { pairs: 4000, iterations: 20, seed: 5 }).unwrap();
    assert!(!rep.pass);
    for v in &rep.violations {
        let y = v.y.as_ref().unwrap();
        assert!(v.x[0] < 0.5 && y[0] >= 0.5, "witness {:?} -> {:?} does not straddle the jump", v.x, y);
    }
}

#[test]
fn builtin_correspondences_are_fiberegular() {
    for (pair, _) in builtin_pairs().unwrap() {
        let c = build_correspondence(&pair).unwrap();
        let n = pair.dim();
        let dom = BoxDomain::new(
            if pair.name() == "krylov" { vec![-1.0, -1.0, 0.0] } else { vec![0.0; n] },
            vec![1.0; n],
            vec![if n == 3 { 41 } else { 101 }; n],
        )
        .unwrap();
        let w = JetWindow::new(n, 2.0, 200, 7).unwrap();
        let opts = FiberegOptions { pairs: 3000, iterations: 16, seed: 8 };
        let cert = certify_with(&c.oracle, &dom, 0.1, &w, opts).unwrap();
        assert!(cert.pass, "{}: {:?}", pair.name(), cert.violations.first());
        let dual = verify_certificate(&c.oracle.dual(), &cert, &w, opts).unwrap();
        assert!(dual.pass, "{} dual: {:?}", pair.name(), dual.violations.first());
    }
}

#[test]
fn appendix_invariants_on_builtin_oracles() {
    for (pair, dom) in builtin_pairs().unwrap() {
        let c = build_correspondence(&pair).unwrap();
        let n = pair.dim();
        let s = JetSampler::new(n, 1000, 14).with_domain(dom.clone());
        let t2 = check_t2_density(&c.oracle, &s).unwrap();
        assert!(t2.pass && t2.samples > 100, "{}: {} {:?}", pair.name(), t2.samples, t2.violations.first());
        let fine = BoxDomain::new(dom.lower().to_vec(), dom.upper().to_vec(), vec![if n == 3 { 41 } else { 101 }; n]).unwrap();
        let w = JetWindow::new(n, 2.0, 200, 15).unwrap();
        let cert = certify_with(&c.oracle, &fine, 0.1, &w, FiberegOptions { pairs: 3000, iterations: 16, seed: 16 }).unwrap();
        let t3 = check_t3_joint_interior(&c.oracle, &cert, &w, 3000, 17).unwrap();
        assert!(t3.pass && t3.samples > 100, "{}: {} {:?}", pair.name(), t3.samples, t3.violations.first());
        let cl = check_closure_probe(&c.oracle, &dom, &JetSampler::new(n, 300, 18)).unwrap();
        assert!(cl.pass && cl.samples > 50, "{}: {} {:?}", pair.name(), cl.samples, cl.violations.first());
    }
}
