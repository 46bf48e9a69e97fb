//! Experiment configuration.
//!
//! Configurations are TOML documents. Every section is optional and falls
//! back to the defaults below; unknown keys anywhere are rejected. See the
//! README for the full grammar.

use std::path::Path;

use actuopt_core::beam::BeamParams;
use actuopt_core::optimize::OptimizerConfig;
use actuopt_core::wave::{NeumannEdges, WaveNonlinearity, WaveParams};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Beam,
    Wave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub beam: BeamSection,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub actuator: ActuatorSection,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub admissible: AdmissibleSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
    #[serde(default)]
    pub gridsearch: GridsearchSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

fn default_output() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub ei: f64,
    pub rho_a: f64,
    pub length: f64,
    pub k: f64,
    pub alpha: f64,
    pub mu: f64,
    pub cd: f64,
    pub n_cells: usize,
}

impl Default for BeamSection {
    fn default() -> Self {
        let p = BeamParams::default();
        BeamSection {
            ei: p.ei,
            rho_a: p.rho_a,
            length: p.length,
            k: p.k,
            alpha: p.alpha,
            mu: p.mu,
            cd: p.cd,
            n_cells: p.n_cells,
        }
    }
}

impl BeamSection {
    pub fn params(&self) -> BeamParams {
        BeamParams {
            ei: self.ei,
            rho_a: self.rho_a,
            length: self.length,
            k: self.k,
            alpha: self.alpha,
            mu: self.mu,
            cd: self.cd,
            n_cells: self.n_cells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveNonlinearityKind {
    None,
    SineGordon,
    KleinGordon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Edges carrying a Neumann condition; the rest are Dirichlet.
    pub neumann: Vec<Edge>,
    pub nonlinearity: WaveNonlinearityKind,
    /// Klein–Gordon exponent.
    pub exponent: u32,
    /// Viscous damping coefficient `μ` in `w_tt + μ w_t = …`.
    pub damping: f64,
}

impl Default for WaveSection {
    fn default() -> Self {
        let p = WaveParams::default();
        WaveSection {
            lx: p.lx,
            ly: p.ly,
            nx: p.nx,
            ny: p.ny,
            neumann: Vec::new(),
            nonlinearity: WaveNonlinearityKind::SineGordon,
            exponent: 2,
            damping: 0.0,
        }
    }
}

impl WaveSection {
    pub fn params(&self) -> WaveParams {
        let has = |e| self.neumann.contains(&e);
        WaveParams {
            lx: self.lx,
            ly: self.ly,
            nx: self.nx,
            ny: self.ny,
            neumann: NeumannEdges {
                left: has(Edge::Left),
                right: has(Edge::Right),
                bottom: has(Edge::Bottom),
                top: has(Edge::Top),
            },
            nonlinearity: match self.nonlinearity {
                WaveNonlinearityKind::None => WaveNonlinearity::None,
                WaveNonlinearityKind::SineGordon => WaveNonlinearity::SineGordon,
                WaveNonlinearityKind::KleinGordon => WaveNonlinearity::KleinGordon {
                    exponent: self.exponent,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorSection {
    /// Support half-width; defaults to `0.05ℓ` (beam) or `0.15·min(Lx, Ly)`
    /// (wave).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Design used by `simulate` and `gradcheck` and as the optimizer's
    /// starting point; defaults to 30% of the way across the design box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// `A sin(mπξ/ℓ)` on the beam, `A sin(mπx/Lx) sin(mπy/Ly)` on the wave.
    Mode {
        #[serde(default = "one_u32")]
        mode: u32,
        #[serde(default = "one_f64")]
        amplitude: f64,
    },
    /// Gaussian displacement; centred in the domain when `center` is absent.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        width: f64,
        amplitude: f64,
    },
    Zero,
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Mode {
            mode: 1,
            amplitude: 1.0,
        }
    }
}

/// Control signal for `simulate`, and the optimizer's starting control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControlSection {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `A sin(ωt + φ)`
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Profile {
    Uniform {
        value: f64,
    },
    /// `peak·exp(−|x − center|²/(2 width²))`
    Gaussian {
        center: Vec<f64>,
        width: f64,
        peak: f64,
    },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Uniform { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    /// Weight on displacement.
    pub q1: Profile,
    /// Weight on velocity.
    pub q2: Profile,
    pub r_weight: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection {
            q1: Profile::default(),
            q2: Profile::default(),
            r_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    pub n_steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t_final: 2.0,
            n_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibleSection {
    pub r_ad: f64,
    /// Optional design box, intersected with the region where the actuator
    /// fits inside the domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_upper: Option<Vec<f64>>,
}

impl Default for AdmissibleSection {
    fn default() -> Self {
        AdmissibleSection {
            r_ad: 10.0,
            r_lower: None,
            r_upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iters: usize,
    pub tol_grad: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_step_u: Option<f64>,
    pub initial_design_fraction: f64,
    pub noise_floor: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSection {
            max_iters: c.max_iters,
            tol_grad: c.tol_grad,
            armijo_c: c.armijo_c,
            backtrack: c.backtrack,
            max_backtracks: c.max_backtracks,
            initial_step_u: c.initial_step_u,
            initial_design_fraction: c.initial_design_fraction,
            noise_floor: c.noise_floor,
        }
    }
}

impl OptimizerSection {
    pub fn to_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.max_iters,
            tol_grad: self.tol_grad,
            armijo_c: self.armijo_c,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
            initial_step_u: self.initial_step_u,
            initial_design_fraction: self.initial_design_fraction,
            noise_floor: self.noise_floor,
        }
    }
}

/// Points where `simulate` records the displacement; the domain centre
/// when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub n_directions: usize,
    pub duality_tol: f64,
    pub fd_tol: f64,
    /// Central-difference steps; each direction reports its best one.
    pub steps: Vec<f64>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection {
            n_directions: 10,
            duality_tol: 1e-10,
            fd_tol: 1e-5,
            steps: vec![1e-3, 3e-4, 1e-4, 3e-5, 1e-5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridsearchSection {
    /// Points per design axis.
    pub n_grid: usize,
}

impl Default for GridsearchSection {
    fn default() -> Self {
        GridsearchSection { n_grid: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Time-step refinement factor applied before comparing.
    pub refine: usize,
    pub tolerance: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            refine: 1,
            tolerance: 1e-2,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, AppError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {}", path.display(), e.detail())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Checks that need more than the type system; each message names the
    /// offending field.
    pub fn validate(&self) -> Result<(), AppError> {
        let fail = |field: &str, msg: &str| Err(AppError::Config(format!("{field}: {msg}")));
        if !(self.time.t_final > 0.0) || !self.time.t_final.is_finite() {
            return fail("time.t_final", "must be positive and finite");
        }
        if self.time.n_steps == 0 {
            return fail("time.n_steps", "must be at least 1");
        }
        if !(self.cost.r_weight > 0.0) {
            return fail("cost.r_weight", "must be positive");
        }
        let dim = match self.model {
            ModelKind::Beam => 1,
            ModelKind::Wave => 2,
        };
        for (name, p) in [("cost.q1", &self.cost.q1), ("cost.q2", &self.cost.q2)] {
            match p {
                Profile::Uniform { value } if !(*value >= 0.0) => {
                    return fail(name, "weight must be non-negative")
                }
                Profile::Gaussian { center, width, peak } => {
                    if center.len() != dim {
                        return fail(name, &format!("center must have {dim} component(s)"));
                    }
                    if !(*width > 0.0) || !(*peak >= 0.0) {
                        return fail(name, "width must be positive and peak non-negative");
                    }
                }
                _ => {}
            }
        }
        if let InitialCondition::Gaussian { center, width, .. } = &self.initial {
            if center.as_ref().is_some_and(|c| c.len() != dim) {
                return fail("initial.center", &format!("must have {dim} component(s)"));
            }
            if !(*width > 0.0) {
                return fail("initial.width", "must be positive");
            }
        }
        if let InitialCondition::Mode { mode: 0, .. } = self.initial {
            return fail("initial.mode", "must be at least 1");
        }
        if let Some(p) = &self.actuator.position {
            if p.len() != dim {
                return fail("actuator.position", &format!("must have {dim} component(s)"));
            }
        }
        if let Some(points) = &self.probes.points {
            if points.iter().any(|p| p.len() != dim) {
                return fail(
                    "probes.points",
                    &format!("each point must have {dim} component(s)"),
                );
            }
        }
        match (&self.admissible.r_lower, &self.admissible.r_upper) {
            (Some(l), Some(u)) if l.len() != dim || u.len() != dim => {
                return fail(
                    "admissible",
                    &format!("r_lower and r_upper must have {dim} component(s)"),
                )
            }
            (Some(_), None) | (None, Some(_)) => {
                return fail("admissible", "r_lower and r_upper must be given together")
            }
            _ => {}
        }
        if self.gradcheck.steps.is_empty() || self.gradcheck.steps.iter().any(|&h| !(h > 0.0)) {
            return fail("gradcheck.steps", "must be a non-empty list of positive steps");
        }
        if self.gradcheck.n_directions == 0 {
            return fail("gradcheck.n_directions", "must be at least 1");
        }
        if self.oracle.refine == 0 {
            return fail("oracle.refine", "must be at least 1");
        }
        if !(self.wave.damping >= 0.0) {
            return fail("wave.damping", "must be non-negative");
        }
        self.optimizer
            .to_config()
            .validate()
            .map_err(|e| AppError::Config(format!("optimizer: {e}")))
    }
}
