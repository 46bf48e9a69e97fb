mod common;

use actuopt_core::beam::BeamParams;
use actuopt_core::system::{
    cost_eval, energy_inner, imex_step, picard_mild_solve, solve_forward, solve_forward_partial,
};
use actuopt_core::wave::{WaveNonlinearity, WaveParams};
use actuopt_core::{ActuatorDesign, ControlSignal, CostSpec, Error, StateVec, TimeGrid, Trajectory};
use common::*;
use std::f64::consts::PI;

#[test]
fn energy_inner_of_zero_vanishes() {
    let d = beam(BeamParams::default());
    let mut r = rng(1);
    let a = random_state(&mut r, d.n_dof(), 1.0);
    let z = StateVec::zeros(d.n_dof());
    assert_eq!(energy_inner(&d, &z, &a).unwrap(), 0.0);
}

#[test]
fn energy_inner_is_symmetric() {
    let mut r = rng(2);
    for d in [
        beam(BeamParams::default()),
        wave(WaveParams {
            nx: 12,
            ny: 10,
            ..WaveParams::default()
        }),
    ] {
        for _ in 0..10 {
            let a = random_state(&mut r, d.n_dof(), 1.0);
            let b = random_state(&mut r, d.n_dof(), 1.0);
            let ab = energy_inner(&d, &a, &b).unwrap();
            let ba = energy_inner(&d, &b, &a).unwrap();
            let scale = energy_inner(&d, &a, &a).unwrap() + energy_inner(&d, &b, &b).unwrap();
            assert!((ab - ba).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn energy_inner_rejects_wrong_length() {
    let d = beam(BeamParams::default());
    let a = StateVec::zeros(d.n_dof());
    let b = StateVec::zeros(d.n_dof() + 1);
    assert!(matches!(energy_inner(&d, &a, &b), Err(Error::Usage(_))));
}

#[test]
fn beam_mode_energy_matches_integral() {
    // ∫ EI w''² + k w² for w = sin(πξ/ℓ) is (EI (π/ℓ)⁴ + k) ℓ/2
    let mut errors = Vec::new();
    for n_cells in [32, 64, 128] {
        let p = BeamParams {
            n_cells,
            length: 1.5,
            ei: 2.0,
            k: 3.0,
            ..BeamParams::default()
        };
        let d = beam(p);
        let x = beam_mode(&p, 1, 1.0);
        let exact = (p.ei * (PI / p.length).powi(4) + p.k) * p.length / 2.0;
        let got = energy_inner(&d, &x, &x).unwrap();
        errors.push(rel(got, exact));
    }
    assert!(errors[1] < 1e-3, "{errors:?}");
    assert!(
        errors[0] / errors[1] > 3.5 && errors[1] / errors[2] > 3.5,
        "{errors:?}"
    );
}

#[test]
fn zero_step_stays_zero() {
    let d = beam(BeamParams::default());
    let z = StateVec::zeros(d.n_dof());
    let next = imex_step(&d, &z, None, 0.0, &ActuatorDesign::scalar(0.5), 0.01).unwrap();
    assert!(next.is_zero());
    let next = imex_step(&d, &z, Some(&z), 0.0, &ActuatorDesign::scalar(0.5), 0.01).unwrap();
    assert!(next.is_zero());
}

#[test]
fn zero_data_give_zero_trajectory() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    for d in [
        beam(BeamParams::default()),
        wave(WaveParams {
            nx: 12,
            ny: 12,
            ..WaveParams::default()
        }),
    ] {
        let x0 = StateVec::zeros(d.n_dof());
        let traj = solve_forward(&d, &x0, &ControlSignal::zeros(&grid), &centre(&d), &grid).unwrap();
        assert_eq!(traj.len(), grid.n_nodes());
        assert!(traj.iter().all(|x| x.is_zero()));
    }
}

#[test]
fn first_step_uses_euler_extrapolation() {
    // with F(x0) alone the first step solves (I − θA)x1 = (I + θA)x0 + dt F(x0) + dt b ū0
    let p = BeamParams::default();
    let d = beam(p);
    let grid = TimeGrid::new(0.1, 10).unwrap();
    let x0 = beam_mode(&p, 1, 0.8);
    let u = ControlSignal::from_fn(&grid, |t| 1.0 + t);
    let design = ActuatorDesign::scalar(0.4);
    let traj = solve_forward(&d, &x0, &u, &design, &grid).unwrap();
    let direct = imex_step(&d, &x0, None, u.midpoint(0), &design, grid.dt()).unwrap();
    assert_eq!(traj[1], direct);
    let second = imex_step(&d, &traj[1], Some(&x0), u.midpoint(1), &design, grid.dt()).unwrap();
    assert_eq!(traj[2], second);
}

#[test]
fn forward_solve_is_deterministic() {
    let p = BeamParams::default();
    let d = beam(p);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let mut r = rng(3);
    let u = random_control(&mut r, &grid, 1.0);
    let x0 = beam_mode(&p, 1, 1.0);
    let a = solve_forward(&d, &x0, &u, &ActuatorDesign::scalar(0.3), &grid).unwrap();
    let b = solve_forward(&d, &x0, &u, &ActuatorDesign::scalar(0.3), &grid).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert!(x.w.iter().zip(&y.w).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(x.v.iter().zip(&y.v).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn grid_mismatch_is_rejected() {
    let d = beam(BeamParams::default());
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let other = TimeGrid::new(1.0, 11).unwrap();
    let x0 = StateVec::zeros(d.n_dof());
    let res = solve_forward(&d, &x0, &ControlSignal::zeros(&other), &centre(&d), &grid);
    assert!(matches!(res, Err(Error::Usage(_))));
}

#[test]
fn supercritical_klein_gordon_blows_up_with_step_index() {
    let m = wave_model(WaveParams {
        nx: 12,
        ny: 12,
        nonlinearity: WaveNonlinearity::KleinGordon { exponent: 2 },
        ..WaveParams::default()
    });
    let d = m.assemble().unwrap();
    let x0 = wave_bump(&m, 20.0, 0.2);
    let grid = TimeGrid::new(2.0, 200).unwrap();
    let u = ControlSignal::zeros(&grid);
    let design = centre(&d);
    match solve_forward(&d, &x0, &u, &design, &grid) {
        Err(Error::BlowUp { step }) => {
            assert!(step >= 1 && step <= grid.n_steps());
            let (partial, err) = solve_forward_partial(&d, &x0, &u, &design, &grid).unwrap();
            assert_eq!(err, Some(Error::BlowUp { step }));
            assert_eq!(partial.len(), step);
            assert!(partial.iter().all(|x| x.is_finite()));
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn cost_of_zero_is_zero() {
    let d = beam(BeamParams::default());
    let grid = TimeGrid::new(1.0, 20).unwrap();
    let traj = Trajectory::from_states(vec![StateVec::zeros(d.n_dof()); grid.n_nodes()]);
    let cost = uniform_cost(&d, 1.0, 1.0);
    assert_eq!(
        cost_eval(&d, &cost, &traj, &ControlSignal::zeros(&grid), &grid).unwrap(),
        0.0
    );
}

#[test]
fn control_only_cost_is_r_c2_tau() {
    let p = BeamParams::default();
    let d = beam(p);
    let grid = TimeGrid::new(1.7, 40).unwrap();
    let cost = CostSpec::uniform(d.n_dof(), 0.0, 2.5).unwrap();
    let traj = Trajectory::from_states(vec![beam_mode(&p, 2, 1.0); grid.n_nodes()]);
    let u = ControlSignal::from_fn(&grid, |_| 0.3);
    let j = cost_eval(&d, &cost, &traj, &u, &grid).unwrap();
    assert!(rel(j, 2.5 * 0.09 * 1.7) < 1e-14);
}

#[test]
fn cost_is_non_negative() {
    let mut r = rng(4);
    let d = beam(BeamParams {
        n_cells: 16,
        ..BeamParams::default()
    });
    let grid = TimeGrid::new(1.0, 10).unwrap();
    for _ in 0..20 {
        let traj = Trajectory::from_states(
            (0..grid.n_nodes())
                .map(|_| random_state(&mut r, d.n_dof(), 1.0))
                .collect(),
        );
        let q1: Vec<f64> = (0..d.n_dof())
            .map(|_| rand::Rng::gen_range(&mut r, 0.0..2.0))
            .collect();
        let q2: Vec<f64> = (0..d.n_dof())
            .map(|_| rand::Rng::gen_range(&mut r, 0.0..2.0))
            .collect();
        let cost = CostSpec::new(q1, q2, 0.1).unwrap();
        let u = random_control(&mut r, &grid, 1.0);
        assert!(cost_eval(&d, &cost, &traj, &u, &grid).unwrap() >= 0.0);
    }
}

#[test]
fn cost_spec_validation() {
    assert!(CostSpec::new(vec![1.0, -1.0], vec![0.0, 0.0], 1.0).is_err());
    assert!(CostSpec::new(vec![1.0], vec![0.0], 0.0).is_err());
    assert!(CostSpec::new(vec![1.0], vec![0.0, 1.0], 1.0).is_err());
}

#[test]
fn undamped_linear_beam_conserves_energy() {
    let p = BeamParams {
        alpha: 0.0,
        mu: 0.0,
        cd: 0.0,
        ..BeamParams::default()
    };
    let d = beam(p);
    let grid = TimeGrid::new(2.0, 400).unwrap();
    let mut r = rng(5);
    let x0 = random_state(&mut r, d.n_dof(), 1.0);
    let traj = solve_forward(&d, &x0, &ControlSignal::zeros(&grid), &centre(&d), &grid).unwrap();
    let e0 = energy_inner(&d, &x0, &x0).unwrap();
    let drift = traj
        .iter()
        .map(|x| rel(energy_inner(&d, x, x).unwrap(), e0))
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "drift {drift:e}");
}

#[test]
fn picard_on_zero_data_stops_after_one_iteration() {
    let d = beam(BeamParams::default());
    let grid = TimeGrid::new(0.5, 20).unwrap();
    let x0 = StateVec::zeros(d.n_dof());
    let sol = picard_mild_solve(
        &d,
        &x0,
        &ControlSignal::zeros(&grid),
        &centre(&d),
        &grid,
        10,
        1e-12,
    )
    .unwrap();
    assert!(sol.converged);
    assert_eq!(sol.iterations, 1);
    assert!(sol.trajectory.iter().all(|x| x.is_zero()));
}

#[test]
fn picard_matches_stepper_for_linear_problem() {
    // without F both schemes are the same Crank–Nicolson recursion
    let p = BeamParams {
        alpha: 0.0,
        n_cells: 16,
        ..BeamParams::default()
    };
    let d = beam(p);
    let grid = TimeGrid::new(0.5, 50).unwrap();
    let x0 = beam_mode(&p, 1, 1.0);
    let u = ControlSignal::from_fn(&grid, |t| t.sin());
    let design = ActuatorDesign::scalar(0.3);
    let sol = picard_mild_solve(&d, &x0, &u, &design, &grid, 10, 1e-13).unwrap();
    let fw = solve_forward(&d, &x0, &u, &design, &grid).unwrap();
    assert!(sol.converged && sol.iterations <= 2);
    for (a, b) in sol.trajectory.iter().zip(fw.iter()) {
        assert!(d.gram().norm(&a.sub(b)) <= 1e-12 * d.gram().norm(b).max(1.0));
    }
}

#[test]
fn picard_reports_contraction_failure() {
    let m = wave_model(WaveParams {
        nx: 12,
        ny: 12,
        nonlinearity: WaveNonlinearity::KleinGordon { exponent: 2 },
        ..WaveParams::default()
    });
    let d = m.assemble().unwrap();
    let x0 = wave_bump(&m, 6.0, 0.2);
    let grid = TimeGrid::new(3.0, 150).unwrap();
    let res = picard_mild_solve(
        &d,
        &x0,
        &ControlSignal::zeros(&grid),
        &centre(&d),
        &grid,
        60,
        1e-12,
    );
    assert!(
        matches!(
            res,
            Err(Error::ContractionFailure { .. }) | Err(Error::BlowUp { .. })
        ),
        "{res:?}"
    );
}
