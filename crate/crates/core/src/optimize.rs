//! Projected gradient descent over the control ball and the design box.
//!
//! Controls live in the trapezoid L²(0,τ) ball of radius `R_ad`; designs in a
//! closed box. Each iteration takes a projected step in both blocks with its
//! own Barzilai–Borwein step length and accepts it by backtracking until the
//! Armijo condition holds on the true discrete cost, so the recorded cost
//! history never increases.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::adjoint::{evaluate, residual_from_gradient, AdjointState, Evaluation, OptimalityResidual};
use crate::error::{invalid, usage, Error, Result};
use crate::grid::{ControlSignal, TimeGrid};
use crate::system::{ActuatorDesign, CostSpec, Discretization, StateVec, Trajectory};

/// Admissible sets: `‖u‖ ≤ r_ad` and `lower ≤ r ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    pub r_ad: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ProjectionSpec {
    pub fn new(r_ad: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if !(r_ad > 0.0) || !r_ad.is_finite() {
            return Err(invalid(format!("control radius must be positive, got {r_ad}")));
        }
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("design box bounds must have equal, nonzero length"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite())
        {
            return Err(invalid("design box is empty"));
        }
        Ok(ProjectionSpec { r_ad, lower, upper })
    }

    /// Design box taken from the model, intersected with `requested` when
    /// given.
    pub fn for_model(
        disc: &Discretization,
        r_ad: f64,
        requested: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let (lo, hi) = disc.model().design_bounds();
        let (lo, hi) = match requested {
            None => (lo, hi),
            Some((rl, rh)) => {
                if rl.len() != lo.len() || rh.len() != hi.len() {
                    return Err(usage(format!("design box must have {} components", lo.len())));
                }
                (
                    lo.iter().zip(&rl).map(|(a, b)| a.max(*b)).collect(),
                    hi.iter().zip(&rh).map(|(a, b)| a.min(*b)).collect(),
                )
            }
        };
        Self::new(r_ad, lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> ActuatorDesign {
        ActuatorDesign::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
        )
    }

    /// Radial projection onto the L² ball. Signals already inside (up to a
    /// few ulps) are returned unchanged, which makes the map idempotent.
    pub fn project_u(&self, u: &ControlSignal, grid: &TimeGrid) -> ControlSignal {
        let norm = u.norm(grid);
        if norm <= self.r_ad * (1.0 + 8.0 * f64::EPSILON) {
            u.clone()
        } else {
            u.scaled(self.r_ad / norm)
        }
    }

    pub fn project_r(&self, design: &ActuatorDesign) -> ActuatorDesign {
        ActuatorDesign::new(
            design
                .as_slice()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(r, (l, h))| r.clamp(*l, *h))
                .collect(),
        )
    }

    pub fn contains(&self, u: &ControlSignal, design: &ActuatorDesign, grid: &TimeGrid) -> bool {
        u.norm(grid) <= self.r_ad * (1.0 + 8.0 * f64::EPSILON)
            && design
                .as_slice()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(r, (l, h))| l <= r && r <= h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop when the projected control residual is below
    /// `tol_grad·max(1, ‖u‖)` and the projected design residual below `tol_grad`.
    pub tol_grad: f64,
    pub armijo_c: f64,
    /// Step reduction factor during backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// First control step; defaults to `1/(2R)`.
    pub initial_step_u: Option<f64>,
    /// First design step, as a fraction of the smallest box side moved by
    /// the first gradient step.
    pub initial_design_fraction: f64,
    /// Relative rounding level of the evaluated cost. Once the Armijo
    /// decrease asked for drops below `noise_floor·|J|`, any step that does
    /// not increase `J` is accepted.
    pub noise_floor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 500,
            tol_grad: 1e-6,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            initial_step_u: None,
            initial_design_fraction: 0.05,
            noise_floor: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid("armijo_c must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack factor must lie in (0, 1)"));
        }
        if !(self.tol_grad > 0.0) {
            return Err(invalid("tol_grad must be positive"));
        }
        if let Some(s) = self.initial_step_u {
            if !(s > 0.0) {
                return Err(invalid("initial_step_u must be positive"));
            }
        }
        if !(self.initial_design_fraction > 0.0) {
            return Err(invalid("initial_design_fraction must be positive"));
        }
        if !(self.noise_floor >= 0.0) {
            return Err(invalid("noise_floor must be non-negative"));
        }
        Ok(())
    }
}

/// One row of the optimizer history; `step_*` are the accepted step
/// lengths leading to the next row (zero on the last row).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub residual: OptimalityResidual,
    pub design: Vec<f64>,
    pub control_norm: f64,
    pub step_u: f64,
    pub step_r: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct OptimRun {
    pub history: Vec<IterationRecord>,
    pub control: ControlSignal,
    pub design: ActuatorDesign,
    pub trajectory: Trajectory,
    pub adjoint: AdjointState,
    pub grad_u: ControlSignal,
    pub grad_r: Vec<f64>,
    pub stop: StopReason,
}

/// Why an optimizer run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Projected residuals below tolerance.
    Converged,
    MaxIterations,
    /// No further decrease can be resolved: the Armijo decrease asked for
    /// is below the rounding level of `J` and trial steps stopped lowering
    /// the evaluated cost. The final iterate is still the best one seen.
    NoiseFloor,
    /// Backtracking exhausted without an acceptable step.
    LineSearchFailed,
    /// Every trial step of the last line search blew up.
    BlowUp,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::NoiseFloor => "noise_floor",
            StopReason::LineSearchFailed => "line_search_failed",
            StopReason::BlowUp => "blow_up",
        }
    }
}

impl core::fmt::Display for StopReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl OptimRun {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    /// Line-search failure or persistent blow-up.
    pub fn failed(&self) -> bool {
        matches!(self.stop, StopReason::LineSearchFailed | StopReason::BlowUp)
    }

    pub fn final_cost(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn final_residual(&self) -> Option<&OptimalityResidual> {
        self.history.last().map(|r| &r.residual)
    }
}

/// Step multipliers tried, in order, once the predicted decrease is below
/// the rounding level of J. Shrinking the step there only makes the true
/// decrease harder to see; varying it resamples the rounding instead.
const NOISE_RETRIES: [f64; 8] = [1.5, 0.75, 1.25, 0.9, 2.0, 0.6, 1.1, 1.75];

fn control_tolerance(config: &OptimizerConfig, u: &ControlSignal, grid: &TimeGrid) -> f64 {
    config.tol_grad * u.norm(grid).max(1.0)
}

struct Problem<'a> {
    disc: &'a Discretization,
    cost: &'a CostSpec,
    x0: &'a StateVec,
    grid: &'a TimeGrid,
    spec: &'a ProjectionSpec,
    config: &'a OptimizerConfig,
    freeze_design: bool,
}

impl Problem<'_> {
    fn evaluate(&self, u: &ControlSignal, r: &ActuatorDesign) -> Result<Evaluation> {
        evaluate(self.disc, self.cost, self.x0, u, r, self.grid)
    }

    fn residual(&self, u: &ControlSignal, r: &ActuatorDesign, e: &Evaluation) -> OptimalityResidual {
        let mut res = residual_from_gradient(
            u,
            r,
            self.grid,
            self.cost.r_weight,
            &e.report.grad_u,
            &e.report.grad_r,
            Some(self.spec),
        );
        if self.freeze_design {
            res.projected_r = 0.0;
        }
        res
    }

    fn run(&self, u_init: &ControlSignal, r_init: &ActuatorDesign) -> Result<OptimRun> {
        self.config.validate()?;
        u_init.check_grid(self.grid)?;
        if r_init.dim() != self.spec.dim() {
            return Err(usage(format!(
                "design has {} parameters, admissible box has {}",
                r_init.dim(),
                self.spec.dim()
            )));
        }
        let grid = self.grid;
        let mut u = self.spec.project_u(u_init, grid);
        let mut r = if self.freeze_design {
            r_init.clone()
        } else {
            self.spec.project_r(r_init)
        };
        let mut eval = self.evaluate(&u, &r)?;
        let mut history = Vec::new();

        let box_side = self
            .spec
            .lower
            .iter()
            .zip(&self.spec.upper)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min);
        let mut alpha_u = self.config.initial_step_u.unwrap_or(0.5 / self.cost.r_weight);
        let g_r_max = eval.report.grad_r.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut alpha_r = if g_r_max > 0.0 && box_side > 0.0 {
            self.config.initial_design_fraction * box_side / g_r_max
        } else {
            1.0
        };

        let mut stop = StopReason::MaxIterations;
        for iter in 0..=self.config.max_iters {
            let residual = self.residual(&u, &r, &eval);
            let done = residual.projected_u <= control_tolerance(self.config, &u, grid)
                && residual.projected_r <= self.config.tol_grad;
            history.push(IterationRecord {
                iter,
                cost: eval.report.cost,
                residual,
                design: r.as_slice().to_vec(),
                control_norm: u.norm(grid),
                step_u: 0.0,
                step_r: 0.0,
                backtracks: 0,
            });
            if done {
                stop = StopReason::Converged;
                break;
            }
            if iter == self.config.max_iters {
                break;
            }

            // projected Armijo backtracking on both blocks
            let j0 = eval.report.cost;
            let mut backtracks = 0;
            let mut noise_misses = 0;
            let mut noise_base = None;
            let mut blown_up;
            let accepted = loop {
                let mut u_trial = u.clone();
                u_trial.axpy(-alpha_u, &eval.report.grad_u);
                let u_trial = self.spec.project_u(&u_trial, grid);
                let r_trial = if self.freeze_design {
                    r.clone()
                } else {
                    let stepped = r
                        .as_slice()
                        .iter()
                        .zip(&eval.report.grad_r)
                        .map(|(x, g)| x - alpha_r * g)
                        .collect();
                    self.spec.project_r(&ActuatorDesign::new(stepped))
                };
                let mut du = u_trial.clone();
                du.axpy(-1.0, &u);
                let dr2: f64 = r_trial
                    .as_slice()
                    .iter()
                    .zip(r.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let du2 = du.inner(&du, grid);
                if du2 == 0.0 && dr2 == 0.0 {
                    break Err(StopReason::NoiseFloor);
                }
                match self.evaluate(&u_trial, &r_trial) {
                    Ok(trial) => {
                        blown_up = false;
                        let decrease = self.config.armijo_c * (du2 / alpha_u + dr2 / alpha_r);
                        let below_noise = decrease <= self.config.noise_floor * j0.abs();
                        if trial.report.cost <= j0 - decrease || (below_noise && trial.report.cost <= j0) {
                            break Ok((u_trial, r_trial, trial));
                        }
                        if below_noise {
                            let Some(&factor) = NOISE_RETRIES.get(noise_misses) else {
                                break Err(StopReason::NoiseFloor);
                            };
                            let (base_u, base_r) = *noise_base.get_or_insert((alpha_u, alpha_r));
                            noise_misses += 1;
                            backtracks += 1;
                            alpha_u = base_u * factor;
                            alpha_r = base_r * factor;
                            continue;
                        }
                    }
                    Err(Error::BlowUp { .. }) => blown_up = true,
                    Err(e) => return Err(e),
                }
                backtracks += 1;
                if backtracks > self.config.max_backtracks {
                    break Err(if blown_up {
                        StopReason::BlowUp
                    } else {
                        StopReason::LineSearchFailed
                    });
                }
                alpha_u *= self.config.backtrack;
                alpha_r *= self.config.backtrack;
            };
            let (u_new, r_new, eval_new) = match accepted {
                Ok(step) => step,
                Err(reason) => {
                    if let Some(last) = history.last_mut() {
                        last.backtracks = backtracks;
                    }
                    stop = reason;
                    break;
                }
            };
            if let Some(last) = history.last_mut() {
                last.step_u = alpha_u;
                last.step_r = if self.freeze_design { 0.0 } else { alpha_r };
                last.backtracks = backtracks;
            }

            // Barzilai–Borwein step lengths per block
            let mut s_u = u_new.clone();
            s_u.axpy(-1.0, &u);
            let mut y_u = eval_new.report.grad_u.clone();
            y_u.axpy(-1.0, &eval.report.grad_u);
            let sy = s_u.inner(&y_u, grid);
            if sy > 0.0 {
                alpha_u = s_u.inner(&s_u, grid) / sy;
            }
            if !self.freeze_design {
                let (mut ss, mut sy) = (0.0, 0.0);
                for ((a, b), (ga, gb)) in r_new
                    .as_slice()
                    .iter()
                    .zip(r.as_slice())
                    .zip(eval_new.report.grad_r.iter().zip(&eval.report.grad_r))
                {
                    ss += (a - b) * (a - b);
                    sy += (a - b) * (ga - gb);
                }
                if ss > 0.0 && sy > 0.0 {
                    alpha_r = ss / sy;
                }
            }
            u = u_new;
            r = r_new;
            eval = eval_new;
        }

        Ok(OptimRun {
            history,
            control: u,
            design: r,
            trajectory: eval.trajectory,
            adjoint: eval.adjoint,
            grad_u: eval.report.grad_u,
            grad_r: eval.report.grad_r,
            stop,
        })
    }
}

/// Jointly optimizes control and actuator design.
pub fn optimize(
    disc: &Discretization,
    cost: &CostSpec,
    x0: &StateVec,
    grid: &TimeGrid,
    u_init: &ControlSignal,
    r_init: &ActuatorDesign,
    spec: &ProjectionSpec,
    config: &OptimizerConfig,
) -> Result<OptimRun> {
    Problem {
        disc,
        cost,
        x0,
        grid,
        spec,
        config,
        freeze_design: false,
    }
    .run(u_init, r_init)
}

/// Optimizes the control alone for a fixed design.
pub fn optimize_control(
    disc: &Discretization,
    cost: &CostSpec,
    x0: &StateVec,
    grid: &TimeGrid,
    u_init: &ControlSignal,
    design: &ActuatorDesign,
    spec: &ProjectionSpec,
    config: &OptimizerConfig,
) -> Result<OptimRun> {
    Problem {
        disc,
        cost,
        x0,
        grid,
        spec,
        config,
        freeze_design: true,
    }
    .run(u_init, design)
}

/// Outcome of the control subproblem at one design.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub design: Vec<f64>,
    pub cost: f64,
    pub converged: bool,
    /// Absent when the subproblem could not be set up or evaluated.
    pub stop: Option<StopReason>,
    /// Failures are excluded from the argmin.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub points: Vec<GridPoint>,
    /// Index of the lowest-cost point that did not fail.
    pub best: Option<usize>,
}

impl GridSearch {
    pub fn from_points(points: Vec<GridPoint>) -> Self {
        let best = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.error.is_none() && p.cost.is_finite())
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
            .map(|(i, _)| i);
        GridSearch { points, best }
    }

    pub fn best_point(&self) -> Option<&GridPoint> {
        self.best.map(|i| &self.points[i])
    }
}

/// Uniform tensor grid with `n_grid` points per design axis over the box,
/// first component varying slowest.
pub fn grid_designs(spec: &ProjectionSpec, n_grid: usize) -> Result<Vec<ActuatorDesign>> {
    if n_grid < 8 {
        return Err(invalid(format!("n_grid must be >= 8, got {n_grid}")));
    }
    let axes: Vec<Vec<f64>> = spec
        .lower
        .iter()
        .zip(&spec.upper)
        .map(|(l, h)| {
            (0..n_grid)
                .map(|i| l + (h - l) * i as f64 / (n_grid - 1) as f64)
                .collect()
        })
        .collect();
    let total = n_grid.pow(axes.len() as u32);
    Ok((0..total)
        .map(|mut flat| {
            let mut coords = alloc::vec![0.0; axes.len()];
            for d in (0..axes.len()).rev() {
                coords[d] = axes[d][flat % n_grid];
                flat /= n_grid;
            }
            ActuatorDesign::new(coords)
        })
        .collect())
}

/// Solves the control subproblem at one design, starting from `u = 0`.
pub fn grid_point(
    disc: &Discretization,
    cost: &CostSpec,
    x0: &StateVec,
    grid: &TimeGrid,
    design: &ActuatorDesign,
    spec: &ProjectionSpec,
    config: &OptimizerConfig,
) -> GridPoint {
    let u0 = ControlSignal::zeros(grid);
    match optimize_control(disc, cost, x0, grid, &u0, design, spec, config) {
        Ok(run) => GridPoint {
            design: design.as_slice().to_vec(),
            cost: run.final_cost(),
            converged: run.converged(),
            stop: Some(run.stop),
            error: run.failed().then(|| run.stop.to_string()),
        },
        Err(e) => GridPoint {
            design: design.as_slice().to_vec(),
            cost: f64::NAN,
            converged: false,
            stop: None,
            error: Some(e.to_string()),
        },
    }
}

/// Brute-force search over a uniform design grid.
pub fn grid_search_r(
    disc: &Discretization,
    cost: &CostSpec,
    x0: &StateVec,
    grid: &TimeGrid,
    spec: &ProjectionSpec,
    n_grid: usize,
    config: &OptimizerConfig,
) -> Result<GridSearch> {
    let points = grid_designs(spec, n_grid)?
        .iter()
        .map(|d| grid_point(disc, cost, x0, grid, d, spec, config))
        .collect();
    Ok(GridSearch::from_points(points))
}
