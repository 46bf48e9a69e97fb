#![allow(dead_code)]

use actuopt_core::beam::{Beam, BeamParams};
use actuopt_core::wave::{Wave, WaveParams};
use actuopt_core::{ActuatorDesign, ControlSignal, CostSpec, Discretization, StateVec, TimeGrid};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn beam(params: BeamParams) -> Discretization {
    let width = 0.05 * params.length;
    Beam::new(params, width).unwrap().assemble().unwrap()
}

pub fn wave_model(params: WaveParams) -> Wave {
    let width = 0.15 * params.lx.min(params.ly);
    Wave::new(params, width).unwrap()
}

pub fn wave(params: WaveParams) -> Discretization {
    wave_model(params).assemble().unwrap()
}

/// `(A sin(mπξ/ℓ), 0)` on the beam's interior nodes.
pub fn beam_mode(params: &BeamParams, m: u32, amplitude: f64) -> StateVec {
    let w: Vec<f64> = params
        .nodes()
        .iter()
        .map(|&x| amplitude * (m as f64 * std::f64::consts::PI * x / params.length).sin())
        .collect();
    let n = w.len();
    StateVec::new(w, vec![0.0; n]).unwrap()
}

/// Gaussian displacement centred in the rectangle, zero velocity.
pub fn wave_bump(model: &Wave, amplitude: f64, sigma: f64) -> StateVec {
    let p = model.params();
    let (cx, cy) = (0.5 * p.lx, 0.5 * p.ly);
    let w: Vec<f64> = model
        .nodes()
        .iter()
        .map(|&(x, y)| amplitude * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let n = w.len();
    StateVec::new(w, vec![0.0; n]).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> StateVec {
    let w = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let v = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    StateVec::new(w, v).unwrap()
}

pub fn random_control(rng: &mut ChaCha8Rng, grid: &TimeGrid, scale: f64) -> ControlSignal {
    ControlSignal::new(
        (0..grid.n_nodes())
            .map(|_| scale * rng.gen_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Smooth random control: a few random sinusoids.
pub fn smooth_control(rng: &mut ChaCha8Rng, grid: &TimeGrid, scale: f64) -> ControlSignal {
    let coeffs: Vec<(f64, f64)> = (1..=4)
        .map(|k| {
            (
                scale * rng.gen_range(-1.0..1.0) / k as f64,
                rng.gen_range(0.0..6.3),
            )
        })
        .collect();
    let tau = grid.t_final();
    ControlSignal::from_fn(grid, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, phi))| a * ((k + 1) as f64 * std::f64::consts::PI * t / tau + phi).sin())
            .sum()
    })
}

pub fn uniform_cost(disc: &Discretization, q: f64, r_weight: f64) -> CostSpec {
    CostSpec::uniform(disc.n_dof(), q, r_weight).unwrap()
}

pub fn centre(disc: &Discretization) -> ActuatorDesign {
    let (lo, hi) = disc.model().design_bounds();
    ActuatorDesign::new(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect())
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
