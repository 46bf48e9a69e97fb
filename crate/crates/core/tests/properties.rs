mod common;

use actuopt_core::beam::BeamParams;
use actuopt_core::optimize::ProjectionSpec;
use actuopt_core::{ActuatorDesign, ControlSignal, Nonlinearity, StateVec, TimeGrid};
use common::*;
use proptest::prelude::*;

fn state(n: usize) -> impl Strategy<Value = StateVec> {
    (
        prop::collection::vec(-10.0..10.0f64, n),
        prop::collection::vec(-10.0..10.0f64, n),
    )
        .prop_map(|(w, v)| StateVec::new(w, v).unwrap())
}

fn nonlinearity() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::None),
        Just(Nonlinearity::Sine),
        (-50.0..50.0f64).prop_map(|c| Nonlinearity::Cubic { coefficient: c }),
        (1u32..5).prop_map(|k| Nonlinearity::Power { exponent: k }),
    ]
}

proptest! {
    #[test]
    fn gram_is_symmetric_and_positive(a in state(15), b in state(15)) {
        let d = beam(BeamParams { n_cells: 16, ..BeamParams::default() });
        let g = d.gram();
        let (ab, ba) = (g.inner(&a, &b), g.inner(&b, &a));
        prop_assert!((ab - ba).abs() <= 1e-12 * g.norm(&a) * g.norm(&b));
        prop_assert!(g.inner(&a, &a) >= 0.0);
        prop_assert!(ab.abs() <= g.norm(&a) * g.norm(&b) * (1.0 + 1e-12));
    }

    #[test]
    fn control_projection_is_idempotent(
        samples in prop::collection::vec(-100.0..100.0f64, 21),
        r_ad in 0.01..50.0f64,
    ) {
        let grid = TimeGrid::new(2.0, 20).unwrap();
        let spec = ProjectionSpec::new(r_ad, vec![0.0], vec![1.0]).unwrap();
        let u = ControlSignal::new(samples).unwrap();
        let p = spec.project_u(&u, &grid);
        prop_assert!(p.norm(&grid) <= r_ad * (1.0 + 1e-12));
        prop_assert_eq!(spec.project_u(&p, &grid), p);
    }

    #[test]
    fn design_projection_is_idempotent(
        r in prop::collection::vec(-5.0..5.0f64, 2),
        lo in prop::collection::vec(-2.0..0.0f64, 2),
        width in prop::collection::vec(0.0..3.0f64, 2),
    ) {
        let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
        let spec = ProjectionSpec::new(1.0, lo.clone(), hi.clone()).unwrap();
        let p = spec.project_r(&ActuatorDesign::new(r));
        for (i, &x) in p.as_slice().iter().enumerate() {
            prop_assert!(lo[i] <= x && x <= hi[i]);
        }
        prop_assert_eq!(spec.project_r(&p), p);
    }

    #[test]
    fn nonlinearity_vanishes_at_rest_and_is_odd(f in nonlinearity(), w in -3.0..3.0f64) {
        prop_assert_eq!(f.value(0.0), 0.0);
        prop_assert!((f.value(-w) + f.value(w)).abs() <= 1e-12 * (1.0 + f.value(w).abs()));
        prop_assert!((f.derivative(-w) - f.derivative(w)).abs() <= 1e-12 * (1.0 + f.derivative(w).abs()));
    }

    #[test]
    fn discrete_nonlinearity_vanishes_at_rest(f in nonlinearity()) {
        let d = beam(BeamParams { n_cells: 12, ..BeamParams::default() }).with_nonlinearity(f);
        prop_assert!(d.nonlinear(&StateVec::zeros(d.n_dof())).is_zero());
    }
}
