use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::group::{bch, conjugate, dilate, quasi_dist, quasi_norm};
use nilcarnot::scalar::q;
use nilcarnot::{GradedAlgebra, Subspace, VecF, VecQ, Vector};
use proptest::prelude::*;

const SMALL: [FixtureName; 6] = [
    FixtureName::Heisenberg3,
    FixtureName::Engel4,
    FixtureName::EngelHeis7,
    FixtureName::Heisprod4,
    FixtureName::Ladder5,
    FixtureName::Ladder8,
];

fn rational_vec(n: usize) -> impl Strategy<Value = VecQ> {
    prop::collection::vec((-12i64..=12, 1i64..=5), n)
        .prop_map(|v| Vector(v.into_iter().map(|(a, b)| q(a, b)).collect()))
}

fn float_vec(n: usize) -> impl Strategy<Value = VecF> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(Vector)
}

fn with_fixture<T: std::fmt::Debug>(
    count: usize,
    make: impl Fn(usize) -> BoxedStrategy<T> + Clone + 'static,
) -> impl Strategy<Value = (FixtureName, Vec<T>)> {
    prop::sample::select(SMALL.to_vec()).prop_flat_map(move |name| {
        let n = fixture(name).dim();
        (Just(name), prop::collection::vec(make(n), count))
    })
}

fn rationals(n: usize) -> BoxedStrategy<VecQ> {
    rational_vec(n).boxed()
}

fn floats(n: usize) -> BoxedStrategy<VecF> {
    float_vec(n).boxed()
}

fn single_layer(alg: &GradedAlgebra, x: &VecQ, layer: usize) -> VecQ {
    alg.layer_project(x, &alg.layers()[layer].weight)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_is_exact((name, v) in with_fixture(3, rationals)) {
        let alg = fixture(name);
        let br = |a: &VecQ, b: &VecQ| alg.bracket(a, b).unwrap();
        let (x, y, z) = (&v[0], &v[1], &v[2]);
        let sum = &(&br(x, &br(y, z)) + &br(y, &br(z, x))) + &br(z, &br(x, y));
        prop_assert!(sum.is_zero());
    }

    #[test]
    fn brackets_respect_the_grading((name, v) in with_fixture(2, rationals), i in 0usize..4, j in 0usize..4) {
        let alg = fixture(name);
        let layers = alg.layers().len();
        let (i, j) = (i % layers, j % layers);
        let x = single_layer(&alg, &v[0], i);
        let y = single_layer(&alg, &v[1], j);
        let target = alg.layers()[i].weight.clone() + alg.layers()[j].weight.clone();
        let b = alg.bracket(&x, &y).unwrap();
        prop_assert_eq!(alg.layer_project(&b, &target), b);
    }

    #[test]
    fn bch_is_associative((name, v) in with_fixture(3, rationals)) {
        let alg = fixture(name);
        let (x, y, z) = (&v[0], &v[1], &v[2]);
        let left = bch(&alg, &bch(&alg, x, y).unwrap(), z).unwrap();
        let right = bch(&alg, x, &bch(&alg, y, z).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn identity_inverse_and_conjugation((name, v) in with_fixture(2, rationals)) {
        let alg = fixture(name);
        let (x, y) = (&v[0], &v[1]);
        let zero = VecQ::zeros(alg.dim());
        prop_assert_eq!(&bch(&alg, x, &zero).unwrap(), x);
        prop_assert!(bch(&alg, x, &-x).unwrap().is_zero());
        let expected = bch(&alg, &bch(&alg, y, x).unwrap(), &-y).unwrap();
        prop_assert_eq!(conjugate(&alg, y, x), expected);
    }

    #[test]
    fn dilations_compose((name, v) in with_fixture(1, rationals), r in (1i64..7, 1i64..7), s in (1i64..7, 1i64..7)) {
        let alg = fixture(name);
        let (r, s) = (q(r.0, r.1), q(s.0, s.1));
        let once = dilate(&alg, &(r.clone() * s.clone()), &v[0]).unwrap();
        let twice = dilate(&alg, &r, &dilate(&alg, &s, &v[0]).unwrap()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn dilations_are_automorphisms((name, v) in with_fixture(2, floats), r in 0.1f64..5.0) {
        let alg = fixture(name);
        let d = |x: &VecF| dilate(&alg, &r, x).unwrap();
        let lhs = d(&bch(&alg, &v[0], &v[1]).unwrap());
        let rhs = bch(&alg, &d(&v[0]), &d(&v[1])).unwrap();
        let scale = lhs.max_abs().max(1.0);
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn quasi_distance_is_left_invariant((name, v) in with_fixture(3, floats)) {
        let alg = fixture(name);
        let (a, x, y) = (&v[0], &v[1], &v[2]);
        let d = quasi_dist(&alg, x, y);
        prop_assert!((d - quasi_norm(&alg, &bch(&alg, &-x, y).unwrap())).abs() <= 1e-12 * d.max(1.0));
        prop_assert_eq!(quasi_dist(&alg, &VecF::zeros(alg.dim()), &-x), quasi_norm(&alg, &-x));
        let moved = quasi_dist(&alg, &bch(&alg, a, x).unwrap(), &bch(&alg, a, y).unwrap());
        prop_assert!((moved - d).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn generated_subalgebras_are_idempotent_and_monotone((name, v) in with_fixture(3, rationals)) {
        let alg = fixture(name);
        let small = alg.subalgebra_generated(&v[..1]);
        let large = alg.subalgebra_generated(&v);
        let again = alg.subalgebra_generated(small.basis());
        prop_assert_eq!(&again, &small);
        prop_assert!(large.contains_subspace(&small));
        prop_assert!(alg.is_subalgebra(&large));
    }
}

#[test]
fn heisenberg_dilation_by_two() {
    let alg = fixture(FixtureName::Heisenberg3);
    let x = Vector(vec![q(1, 1), q(0, 1), q(1, 1)]);
    assert_eq!(dilate(&alg, &q(2, 1), &x).unwrap(), Vector(vec![q(2, 1), q(0, 1), q(4, 1)]));
}

#[test]
fn quotients_project_homomorphically() {
    for name in SMALL {
        let alg = fixture(name);
        let Ok(dec) = nilcarnot::carnot::decompose(&alg) else { continue };
        let quot = dec.quotient();
        for i in 0..alg.dim() {
            for j in 0..alg.dim() {
                let (x, y): (VecQ, VecQ) = (alg.basis_vector(i), alg.basis_vector(j));
                let lhs = quot.project(&alg.bracket(&x, &y).unwrap());
                let rhs = quot.algebra.bracket(&quot.project(&x), &quot.project(&y)).unwrap();
                assert_eq!(lhs, rhs, "{name} ({i}, {j})");
            }
        }
        let z = &dec.center().space;
        for a in z.basis() {
            for b in dec.w().basis() {
                assert!(alg.bracket(a, b).unwrap().is_zero());
            }
        }
        assert!(Subspace::full(alg.dim()).contains_subspace(dec.w()));
    }
}
