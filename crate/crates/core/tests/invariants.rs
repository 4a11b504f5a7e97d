use proptest::prelude::*;
use yf_core::graphs::{truncated_wightman, GraphContext};
use yf_core::lattice::{HProfile, KgMode, LatticeParams, LatticeSpacetime, ProfileShape, Site};
use yf_core::propagators::PropagatorSet;
use yf_core::scalar::C64;
use yf_core::star_calc::{Functional, Tensor};
use yf_core::trees::FieldType;

fn bumped(nt: usize, nx: usize, epsilon: f64) -> LatticeSpacetime {
    let dt = 0.3;
    let mid = 0.5 * (nt - 1) as f64;
    let mut params = LatticeParams::flat(nt, nx, dt, 0.5, 1.0);
    params.epsilon = epsilon;
    params.profile = HProfile::Bump(ProfileShape {
        amplitude: 2.0,
        center: mid * dt,
        width: (mid - 1.5).max(0.5) * dt,
        center_x: None,
        width_x: None,
    });
    LatticeSpacetime::new(params).unwrap()
}

fn field_strategy(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn field_type() -> impl Strategy<Value = FieldType> {
    prop_oneof![Just(FieldType::In), Just(FieldType::Loc), Just(FieldType::Out)]
}

fn random_functional(cap: usize, dim: usize, seed: &[f64]) -> Functional<C64> {
    let weights = (0..dim).map(|i| C64::new(0.4 + 0.2 * i as f64, 0.0)).collect();
    let mut w = Functional::zero(cap, weights);
    let mut it = seed.iter().cycle();
    for n in 1..=cap {
        let t = Tensor::from_fn(dim, n, |_| C64::new(*it.next().unwrap(), *it.next().unwrap()));
        w.set_component(n, t.symmetrize());
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kg_operator_is_linear(
        a in field_strategy(24),
        b in field_strategy(24),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let l = bumped(6, 4, 0.2);
        for mode in [KgMode::Full, KgMode::Flat, KgMode::Perturbation] {
            let combo: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * alpha + y * beta).collect();
            let lhs = l.kg_apply(&combo, mode);
            let ka = l.kg_apply(&a, mode);
            let kb = l.kg_apply(&b, mode);
            for i in 0..lhs.len() {
                let rhs = ka[i] * alpha + kb[i] * beta;
                prop_assert!((lhs[i] - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn flat_retarded_green_is_translation_invariant(
        t in 0usize..7, x in 0usize..4, s in 0usize..7, y in 0usize..4, shift_x in 0usize..4,
    ) {
        let l = LatticeSpacetime::new(LatticeParams::flat(8, 4, 0.3, 0.5, 1.0)).unwrap();
        let props = PropagatorSet::build(&l).unwrap();
        let a = l.site(t, x).0;
        let b = l.site(s, y).0;
        let a2 = l.site(t + 1, (x + shift_x) % 4).0;
        let b2 = l.site(s + 1, (y + shift_x) % 4).0;
        prop_assert!((props.gr[[a, b]] - props.gr[[a2, b2]]).abs() < 1e-10);
        prop_assert_eq!(props.gr[[a, b]], props.ga[[b, a]]);
    }

    #[test]
    fn commutator_vanishes_at_spacelike_separation(epsilon in 0.0f64..0.3) {
        let l = bumped(6, 6, epsilon);
        let props = PropagatorSet::build(&l).unwrap();
        for a in l.sites() {
            for b in l.sites() {
                if l.is_spacelike(a, b) {
                    prop_assert_eq!(props.d[[a.0, b.0]], 0.0);
                }
            }
        }
    }

    #[test]
    fn truncated_wightman_is_hermitian(
        types in prop::collection::vec(field_type(), 2..4),
        raw in prop::collection::vec(0usize..15, 3),
        order in 0usize..3,
        p in 3usize..5,
    ) {
        let l = bumped(5, 3, 0.1);
        let props = PropagatorSet::build(&l).unwrap();
        let ctx = GraphContext::new(&props, l.volume_weights(), p);
        let points: Vec<Site> = raw[..types.len()].iter().map(|&s| Site(s)).collect();
        let forward = truncated_wightman(&types, &points, order, &ctx, false).unwrap();
        let rev_types: Vec<FieldType> = types.iter().rev().copied().collect();
        let rev_points: Vec<Site> = points.iter().rev().copied().collect();
        let backward = truncated_wightman(&rev_types, &rev_points, order, &ctx, false).unwrap();
        let scale = 1.0 + forward.abs_sum;
        prop_assert!((forward.value.conj() - backward.value).norm() <= 1e-10 * scale);
    }

    #[test]
    fn quartic_odd_point_functions_vanish(
        types in prop::collection::vec(field_type(), 3),
        raw in prop::collection::vec(0usize..15, 3),
        order in 0usize..3,
    ) {
        let l = bumped(5, 3, 0.1);
        let props = PropagatorSet::build(&l).unwrap();
        let ctx = GraphContext::new(&props, l.volume_weights(), 4);
        let points: Vec<Site> = raw.iter().map(|&s| Site(s)).collect();
        let sum = truncated_wightman(&types, &points, order, &ctx, false).unwrap();
        prop_assert_eq!(sum.graphs, 0);
        prop_assert_eq!(sum.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn star_product_is_associative(seed in prop::collection::vec(-1.0f64..1.0, 7..30)) {
        let a = random_functional(3, 2, &seed);
        let b = random_functional(3, 2, &seed[1..]);
        let c = random_functional(3, 2, &seed[2..]);
        let lhs = a.star(&b).unwrap().star(&c).unwrap();
        let rhs = a.star(&b.star(&c).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_modulus() <= 1e-12 * (1.0 + lhs.max_modulus()));
    }

    #[test]
    fn exponential_turns_sums_into_star_products(seed in prop::collection::vec(-1.0f64..1.0, 5..20)) {
        let a = random_functional(4, 2, &seed);
        let b = random_functional(4, 2, &seed[2..]);
        let lhs = a.add(&b).unwrap().exp().unwrap();
        let rhs = a.exp().unwrap().star(&b.exp().unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_modulus() <= 1e-11 * (1.0 + lhs.max_modulus()));
    }
}
