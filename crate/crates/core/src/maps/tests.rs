use std::sync::Arc;

use super::*;
use crate::carnot::decompose;
use crate::catalog::{fixture, FixtureName};
use crate::sampling::{quotient_grid, Sampler};
use crate::scalar::{q, qi};
use crate::shear::{build_shear, BuildOptions, ShearComponent};

fn dec(name: FixtureName) -> Arc<CbCDecomposition> {
    Arc::new(decompose(&fixture(name)).unwrap())
}

fn shear(d: &Arc<CbCDecomposition>, layer: usize, src: &str) -> FiberMap {
    let c = ShearComponent::expression(d, layer, &[src]).unwrap();
    FiberMap::from_shear(build_shear(d, vec![c], &BuildOptions::default()).unwrap())
}

fn sigma(d: &CbCDecomposition) -> ShearComponent {
    ShearComponent::expression(d, 1, &["sign(q1)*sqrt(abs(q1))"]).unwrap()
}

fn ladder_gamma(d: &Arc<CbCDecomposition>) -> FiberMap {
    let s = build_shear(d, vec![sigma(d)], &BuildOptions::default()).unwrap();
    FiberMap::new(
        d.clone(),
        vec![
            Factor::Translate(Vector(vec![0.0, 0.0, 0.0, 0.0, 1.5, 0.0])),
            Factor::Dilate(qi(2)),
            Factor::Shear(Arc::new(s)),
        ],
    )
    .unwrap()
}

#[test]
fn heisprod_kappa_matrix() {
    let d = dec(FixtureName::Heisprod4);
    let f = shear(&d, 2, "0.7*q1");
    let p = [0.3, -0.2, 1.0, 0.4];
    for mode in [DalphaMode::ClosedForm, DalphaMode::FiniteDifference] {
        let m = d_alpha_matrix(&f, &p, mode).unwrap();
        assert_eq!(m.indices, vec![2, 3]);
        let expect = [[1.0, 0.7], [0.0, 1.0]];
        for (r, row) in expect.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                assert!((m.matrix[(r, c)] - x).abs() < 1e-9, "{mode:?} {r} {c}");
            }
        }
    }
    assert!(d_alpha_agreement(&f, &p).unwrap() < 1e-6);
}

#[test]
fn composed_shears_add() {
    let d = dec(FixtureName::Heisprod4);
    let f = shear(&d, 2, "0.7*q1");
    let g = shear(&d, 2, "-1.9*q1");
    let p = [0.1, 0.5, -0.3, 2.0];
    let m = d_alpha_matrix(&f.after(&g), &p, DalphaMode::ClosedForm).unwrap();
    assert!((m.matrix[(0, 1)] + 1.2).abs() < 1e-12);
    assert!(chain_rule_check(&f, &g, &p, DalphaMode::ClosedForm).unwrap() <= 1e-9);
    let id = FiberMap::identity(d.clone());
    assert_eq!(chain_rule_check(&id, &id, &p, DalphaMode::ClosedForm).unwrap(), 0.0);
    let dil = FiberMap::new(d.clone(), vec![Factor::Dilate(q(3, 2))]).unwrap();
    assert!(chain_rule_check(&dil, &f, &p, DalphaMode::FiniteDifference).unwrap() <= 1e-6);
}

#[test]
fn dilation_differential_is_scalar() {
    let d = dec(FixtureName::Ladder5);
    let f = FiberMap::new(d.clone(), vec![Factor::Dilate(q(3, 2))]).unwrap();
    let m = d_alpha_matrix(&f, &[0.2; 6], DalphaMode::Auto).unwrap();
    assert_eq!(m.mode, DalphaMode::ClosedForm);
    for r in 0..m.indices.len() {
        for c in 0..m.indices.len() {
            let e = if r == c { 2.25 } else { 0.0 };
            assert!((m.matrix[(r, c)] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn differential_ignores_w_translation() {
    let d = dec(FixtureName::Heisprod4);
    let f = shear(&d, 2, "q1^2");
    let p = [0.4, -1.0, 0.3, 1.2];
    let pw = d.algebra().mul(&p, &[0.7, 0.2, -0.5, 0.0]);
    let a = d_alpha_matrix(&f, &p, DalphaMode::ClosedForm).unwrap();
    let b = d_alpha_matrix(&f, &pw, DalphaMode::ClosedForm).unwrap();
    assert!(a.matrix.sub(&b.matrix).max_abs() < 1e-9);
    assert!((a.matrix[(0, 1)] - 2.4).abs() < 1e-12);
}

#[test]
fn pure_shear_and_dilation_extract_trivially() {
    let d = dec(FixtureName::Ladder5);
    let sampler = Sampler::new(5, 30, 2.0);
    let f = FiberMap::from_shear(build_shear(&d, vec![sigma(&d)], &BuildOptions::default()).unwrap());
    let e = extract_compatible(&f).unwrap();
    assert!(e.a().is_identity());
    assert_eq!(e.base().max_abs(), 0.0);
    let s = e.s(&[2.0]).unwrap();
    assert!((s[2] - 2f64.sqrt()).abs() < 1e-15);
    assert!(verify_compatible(&f, &e, &sampler).unwrap().passed());

    let dil = FiberMap::new(d.clone(), vec![Factor::Dilate(qi(3))]).unwrap();
    let e = extract_compatible(&dil).unwrap();
    assert!(e.s_is_zero());
    assert!(verify_compatible(&dil, &e, &sampler).unwrap().passed());
    let id = FiberMap::identity(d.clone());
    let e = extract_compatible(&id).unwrap();
    assert!(e.s_is_zero() && e.a().is_identity());
    assert!(verify_compatible(&id, &e, &sampler).unwrap().passed());
}

#[test]
fn translated_shear_shifts_its_argument() {
    let d = dec(FixtureName::Ladder5);
    let s0 = build_shear(&d, vec![sigma(&d)], &BuildOptions::default()).unwrap();
    let f = FiberMap::new(
        d.clone(),
        vec![
            Factor::Translate(Vector(vec![0.0, 0.0, 0.0, 0.0, 1.5, 0.0])),
            Factor::Shear(Arc::new(s0)),
        ],
    )
    .unwrap();
    let e = extract_compatible(&f).unwrap();
    let s1 = e.s_layer(1);
    let c = sigma(&d);
    for t in [-3.0, -0.5, 0.0, 0.25, 2.0] {
        let expect = c.eval(&[1.5 + t]).unwrap()[2] - c.eval(&[1.5]).unwrap()[2];
        assert!((s1.eval(&[t]).unwrap()[2] - expect).abs() < 1e-12);
    }
    assert!(verify_compatible(&f, &e, &Sampler::new(9, 30, 2.0)).unwrap().passed());
}

#[test]
fn tampered_a_breaks_brackets() {
    let d = dec(FixtureName::Ladder5);
    let f = ladder_gamma(&d);
    let e = extract_compatible(&f).unwrap();
    assert_eq!(cc_identity_check(&e), None);
    let mut a = e.a().clone();
    let k = a.nrows() - 1;
    a[(k, k)] = a[(k, k)].clone() * qi(2);
    let bad = e.with_a(a);
    let report = verify_compatible(&f, &bad, &Sampler::new(1, 10, 1.0)).unwrap();
    assert!(report.bracket_failure.is_some());
    assert!(!report.passed());
    assert!(cc_identity_check(&bad).is_some());
}

#[test]
fn cocycle_of_inverse() {
    let d = dec(FixtureName::Ladder5);
    let g = ladder_gamma(&d);
    let gi = g.inverse().unwrap();
    let grid = quotient_grid(&d, 40, 5.0, 3);
    assert!(cocycle_identity_check(&gi, &g, &grid).unwrap() < 1e-10);
    let b = cocycle_of(&g).unwrap();
    let bi = cocycle_of(&gi).unwrap();
    let moved = cocycle_action(&SimilarityPair::from_map(&gi).unwrap(), &b[&1]).unwrap();
    for p in &grid {
        let gap = (&bi[&1].eval(p).unwrap() + &moved.eval(p).unwrap()).max_abs();
        assert!(gap < 1e-10, "{gap}");
    }
    let id = FiberMap::identity(d.clone());
    assert_eq!(cocycle_identity_check(&id, &id, &grid).unwrap(), 0.0);
}

#[test]
fn action_is_an_anti_homomorphism() {
    let d = dec(FixtureName::Ladder5);
    let p1 = SimilarityPair::from_map(&ladder_gamma(&d)).unwrap();
    let g2 = FiberMap::new(
        d.clone(),
        vec![Factor::Dilate(q(1, 3)), Factor::Translate(Vector(vec![0.0, 0.0, 0.0, 0.0, -0.8, 0.0]))],
    )
    .unwrap();
    let p2 = SimilarityPair::from_map(&g2).unwrap();
    let c = sigma(&d);
    let lhs = cocycle_action(&p2.compose(&p1), &c).unwrap();
    let rhs = cocycle_action(&p1, &cocycle_action(&p2, &c).unwrap()).unwrap();
    for p in quotient_grid(&d, 30, 4.0, 8) {
        assert!((&lhs.eval(&p).unwrap() - &rhs.eval(&p).unwrap()).max_abs() < 1e-12);
    }
    let id = SimilarityPair::identity(d.clone());
    let same = cocycle_action(&id, &c).unwrap();
    assert_eq!(same.eval(&[2.0]).unwrap(), c.eval(&[2.0]).unwrap());
}

#[test]
fn dilation_action_closed_form() {
    let d = dec(FixtureName::Ladder5);
    let f = FiberMap::new(d.clone(), vec![Factor::Dilate(qi(2))]).unwrap();
    let psi = SimilarityPair::from_map(&f).unwrap();
    assert!((psi.lambda_b() - 4.0).abs() < 1e-15);
    let c = ShearComponent::expression(&d, 1, &["q1^2 - q1"]).unwrap();
    let moved = cocycle_action(&psi, &c).unwrap();
    for t in [-1.0, 0.3, 2.0] {
        let expect = 0.5 * ((4.0 * t) * (4.0 * t) - 4.0 * t);
        assert!((moved.eval(&[t]).unwrap()[2] - expect).abs() < 1e-12);
    }
}

#[test]
fn fixed_point_and_conjugation() {
    let d = dec(FixtureName::Ladder5);
    let c0 = ShearComponent::expression(&d, 1, &["q1"]).unwrap();
    let s = build_shear(&d, vec![c0], &BuildOptions::default()).unwrap();
    let gamma = FiberMap::new(d.clone(), vec![Factor::Shear(Arc::new(s)), Factor::Dilate(q(1, 2))]).unwrap();
    let grid = quotient_grid(&d, 50, 6.0, 11);
    let fp = solve_single_generator_fixed_point(&gamma, 1, 200, 1e-13, &grid).unwrap();
    assert_eq!(fp.mode, FixedPointMode::Forward);
    assert!((fp.factor - 0.5).abs() < 1e-12);
    assert!(fp.residual < 1e-12);
    for p in &grid {
        assert!((fp.component.eval(p).unwrap()[2] - 2.0 * p[0]).abs() < 1e-11);
    }
    let f0 = build_shear(&d, vec![fp.component.clone()], &BuildOptions::default()).unwrap();
    let (_, report) = conjugate_by_shear(&f0, &gamma, &grid).unwrap();
    assert!(report.formula_defect < 1e-9);
    assert!(report.sup_residual < 1e-9, "{}", report.sup_residual);

    let flat = FiberMap::new(
        d.clone(),
        vec![
            Factor::Shear(Arc::new(build_shear(&d, vec![sigma(&d)], &BuildOptions::default()).unwrap())),
            Factor::Dilate(q(1, 2)),
        ],
    )
    .unwrap();
    assert!(matches!(
        solve_single_generator_fixed_point(&flat, 1, 200, 1e-13, &grid),
        Err(Error::NonContraction(_))
    ));
    let zero = solve_single_generator_fixed_point(&FiberMap::identity(d.clone()), 1, 10, 1e-13, &grid).unwrap();
    assert!(zero.component.is_zero());
}

#[test]
fn conjugating_a_shear_by_itself() {
    let d = dec(FixtureName::Ladder5);
    let f0 = build_shear(&d, vec![sigma(&d)], &BuildOptions::default()).unwrap();
    let gamma = FiberMap::from_shear(f0.clone());
    let grid = quotient_grid(&d, 30, 4.0, 2);
    let (tilde, report) = conjugate_by_shear(&f0, &gamma, &grid).unwrap();
    assert!(report.formula_defect < 1e-12);
    let st = extract_compatible(&tilde).unwrap().s_layer(1);
    let c = sigma(&d);
    for p in &grid {
        assert!((&st.eval(p).unwrap() - &c.eval(p).unwrap()).max_abs() < 1e-12);
    }
}

#[test]
fn automorphism_verdicts() {
    let d = dec(FixtureName::Heisprod4);
    let sampler = Sampler::new(4, 200, 3.0);
    let linear = automorphism_check(&shear(&d, 2, "0.7*q1"), &sampler).unwrap();
    assert!(linear.passed(), "{}", linear.defect);
    let square = automorphism_check(&shear(&d, 2, "q1^2"), &sampler).unwrap();
    assert!(!square.passed());
    assert!(square.defect > 1e-3);
}

#[test]
fn exponent_defect_vanishes_for_dilations() {
    let d = dec(FixtureName::Ladder5);
    let flip = MatQ::diagonal(&[qi(-1), qi(-1), qi(-1), qi(1), qi(1), qi(-1)]);
    let g = FiberMap::new(d.clone(), vec![Factor::Automorphism(flip), Factor::Dilate(q(5, 2))]).unwrap();
    let r = similarity_exponent_check(&g).unwrap();
    assert_eq!(r.defect, 0.0);
    assert_eq!(r.exact, Some(true));
    assert!((r.lambda_a - 2.5).abs() < 1e-15);
}
