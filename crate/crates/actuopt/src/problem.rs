//! Turns a configuration into discretized operators and data.

use std::f64::consts::PI;
use std::sync::Arc;

use actuopt_core::beam::Beam;
use actuopt_core::linalg::SymBand;
use actuopt_core::optimize::ProjectionSpec;
use actuopt_core::wave::Wave;
use actuopt_core::{ActuatorDesign, ControlSignal, CostSpec, Discretization, StateVec, TimeGrid};

use crate::config::{ControlSection, ExperimentConfig, InitialCondition, ModelKind, Profile};
use crate::error::AppError;

#[derive(Debug, Clone)]
pub enum Geometry {
    Beam(Beam),
    Wave(Wave),
}

impl Geometry {
    /// Node coordinates of the unknowns, one vector per node.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        match self {
            Geometry::Beam(b) => b.nodes().into_iter().map(|x| vec![x]).collect(),
            Geometry::Wave(w) => w.nodes().into_iter().map(|(x, y)| vec![x, y]).collect(),
        }
    }

    pub fn centre(&self) -> Vec<f64> {
        match self {
            Geometry::Beam(b) => vec![0.5 * b.params().length],
            Geometry::Wave(w) => vec![0.5 * w.params().lx, 0.5 * w.params().ly],
        }
    }

    /// Displacement at an arbitrary point, interpolated linearly (beam) or
    /// bilinearly (wave); boundary values are zero where clamped.
    pub fn sample(&self, w: &[f64], point: &[f64]) -> f64 {
        match self {
            Geometry::Beam(b) => {
                let p = b.params();
                let h = p.spacing();
                let f = (point[0] / h).clamp(0.0, p.n_cells as f64);
                let i = (f.floor() as usize).min(p.n_cells - 1);
                let t = f - i as f64;
                let at = |k: usize| if k == 0 || k == p.n_cells { 0.0 } else { w[k - 1] };
                (1.0 - t) * at(i) + t * at(i + 1)
            }
            Geometry::Wave(m) => m.sample(w, point[0], point[1]),
        }
    }
}

/// Everything a command needs, built once from the configuration.
#[derive(Debug)]
pub struct Problem {
    pub geometry: Geometry,
    pub disc: Discretization,
    pub grid: TimeGrid,
    pub x0: StateVec,
    pub cost: CostSpec,
    pub spec: ProjectionSpec,
    pub design: ActuatorDesign,
    pub control: ControlSignal,
    pub probes: Vec<Vec<f64>>,
}

impl Problem {
    pub fn build(config: &ExperimentConfig) -> Result<Self, AppError> {
        let (geometry, disc) = match config.model {
            ModelKind::Beam => {
                let params = config.beam.params();
                let width = config.actuator.width.unwrap_or(0.05 * params.length);
                let beam = Beam::new(params, width)?;
                let disc = beam.assemble()?;
                (Geometry::Beam(beam), disc)
            }
            ModelKind::Wave => {
                let params = config.wave.params();
                let width = config.actuator.width.unwrap_or(0.15 * params.lx.min(params.ly));
                let wave = Wave::new(params, width)?;
                let mut disc = wave.assemble()?;
                if config.wave.damping > 0.0 {
                    let c: Vec<f64> = disc.mass().iter().map(|m| config.wave.damping * m).collect();
                    disc = Discretization::new(
                        Arc::new(wave.clone()),
                        disc.mass().to_vec(),
                        disc.stiffness().clone(),
                        Some(SymBand::diagonal(&c)),
                        disc.nonlinearity(),
                    )?;
                }
                (Geometry::Wave(wave), disc)
            }
        };
        let grid = TimeGrid::new(config.time.t_final, config.time.n_steps)?;
        let coords = geometry.coordinates();
        let x0 = initial_state(&geometry, &coords, &config.initial);
        let q1 = profile_values(&coords, &config.cost.q1);
        let q2 = profile_values(&coords, &config.cost.q2);
        let cost = CostSpec::new(q1, q2, config.cost.r_weight)?;
        let requested = config
            .admissible
            .r_lower
            .clone()
            .zip(config.admissible.r_upper.clone());
        let spec = ProjectionSpec::for_model(&disc, config.admissible.r_ad, requested)?;
        let design = match &config.actuator.position {
            Some(p) => ActuatorDesign::new(p.clone()),
            None => ActuatorDesign::new(
                spec.lower
                    .iter()
                    .zip(&spec.upper)
                    .map(|(l, u)| l + 0.3 * (u - l))
                    .collect(),
            ),
        };
        let control = match config.control {
            ControlSection::Zero => ControlSignal::zeros(&grid),
            ControlSection::Constant { value } => ControlSignal::from_fn(&grid, |_| value),
            ControlSection::Sine {
                amplitude,
                omega,
                phase,
            } => ControlSignal::from_fn(&grid, |t| amplitude * (omega * t + phase).sin()),
        };
        let probes = config
            .probes
            .points
            .clone()
            .unwrap_or_else(|| vec![geometry.centre()]);
        Ok(Problem {
            geometry,
            disc,
            grid,
            x0,
            cost,
            spec,
            design,
            control,
            probes,
        })
    }

    pub fn probe_label(point: &[f64]) -> String {
        let parts: Vec<String> = point.iter().map(|v| v.to_string()).collect();
        format!("w[{}]", parts.join(" "))
    }
}

fn profile_values(coords: &[Vec<f64>], profile: &Profile) -> Vec<f64> {
    coords
        .iter()
        .map(|x| match profile {
            Profile::Uniform { value } => *value,
            Profile::Gaussian { center, width, peak } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                peak * (-d2 / (2.0 * width * width)).exp()
            }
        })
        .collect()
}

/// Initial displacement as a function of position; velocity starts at rest.
pub fn displacement_profile(geometry: &Geometry, ic: &InitialCondition) -> impl Fn(&[f64]) -> f64 {
    let (lengths, centre) = match geometry {
        Geometry::Beam(b) => (vec![b.params().length], geometry.centre()),
        Geometry::Wave(w) => (vec![w.params().lx, w.params().ly], geometry.centre()),
    };
    let ic = ic.clone();
    move |x: &[f64]| match &ic {
        InitialCondition::Zero => 0.0,
        InitialCondition::Mode { mode, amplitude } => {
            amplitude
                * x.iter()
                    .zip(&lengths)
                    .map(|(xi, l)| (*mode as f64 * PI * xi / l).sin())
                    .product::<f64>()
        }
        InitialCondition::Gaussian {
            center,
            width,
            amplitude,
        } => {
            let c = center.as_ref().unwrap_or(&centre);
            let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
            amplitude * (-d2 / (2.0 * width * width)).exp()
        }
    }
}

fn initial_state(geometry: &Geometry, coords: &[Vec<f64>], ic: &InitialCondition) -> StateVec {
    let f = displacement_profile(geometry, ic);
    let w: Vec<f64> = coords.iter().map(|x| f(x)).collect();
    let n = w.len();
    StateVec::new(w, vec![0.0; n]).expect("matching block lengths")
}
