use kappa_nbody::potentials::Potential;
use kappa_nbody_cli::scenario::{Body, IntegratorBlock, ManifoldBlock, MethodName, Position, Scenario};
use proptest::prelude::*;

fn body(dim: usize, chordal: bool) -> impl Strategy<Value = Body> {
    (
        prop::option::of("[a-z]{1,6}"),
        1e-3..1e3f64,
        0.0..3.0f64,
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -10.0..10.0f64,
        prop::collection::vec(-5.0..5.0f64, dim),
    )
        .prop_map(move |(name, mass, r, phi, theta, velocity)| {
            let theta = (dim == 3).then_some(theta);
            let position = if chordal { Position::Chordal { tau: r, phi, theta } } else { Position::Chart { s: r, phi, theta } };
            Body { name, mass, position, velocity }
        })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (prop_oneof![Just(2usize), Just(3usize)], any::<bool>(), -5.0..5.0f64).prop_flat_map(|(dim, chordal, kappa)| {
        (
            prop::collection::vec(body(dim, chordal), 1..5),
            prop_oneof![Just(Potential::Cotangent), Just(Potential::None)],
            1e-6..1e-1f64,
            1.0..100.0f64,
            1usize..20,
        )
            .prop_map(move |(bodies, potential, dt, t_end, sample_stride)| Scenario {
                manifold: ManifoldBlock { dim, kappa },
                bodies,
                potential,
                integrator: Some(IntegratorBlock {
                    method: MethodName::Rk4,
                    t_end,
                    dt: Some(dt),
                    tol_abs: None,
                    tol_rel: None,
                    dt_min: None,
                    dt_max: None,
                    sample_stride,
                }),
                experiment: None,
            })
    })
}

proptest! {
    #[test]
    fn canonical_form_round_trips(s in scenario()) {
        let text = s.canonical();
        let back = Scenario::from_json(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.canonical(), text);
    }
}
