//! Model-agnostic machinery for first-order systems
//!
//! ```text
//! ẇ = v
//! M v̇ = −K w − C v + M f(w) + M b(r) u
//! ```
//!
//! with a diagonal positive mass `M`, symmetric positive definite stiffness
//! `K` and symmetric positive semi-definite damping `C`. Written as
//! `ẋ = A x + F(x) + B(r) u` on `x = (w, v)`, the state space carries the
//! energy inner product `⟨x, y⟩ = w_xᵀ K w_y + v_xᵀ M v_y`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

use crate::error::{invalid, usage, Error, Result};
use crate::grid::{ControlSignal, TimeGrid};
use crate::linalg::{self, BandCholesky, SparseSym, SymBand};

/// Displacement/velocity pair sampled at the free nodes of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateVec {
    pub fn new(w: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if w.len() != v.len() {
            return Err(usage(format!(
                "displacement has {} entries but velocity has {}",
                w.len(),
                v.len()
            )));
        }
        Ok(StateVec { w, v })
    }

    pub fn zeros(n: usize) -> Self {
        StateVec {
            w: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().chain(&self.v).all(|&x| x == 0.0)
    }

    pub fn axpy(&mut self, alpha: f64, other: &StateVec) {
        linalg::axpy(alpha, &other.w, &mut self.w);
        linalg::axpy(alpha, &other.v, &mut self.v);
    }

    pub fn scale(&mut self, alpha: f64) {
        linalg::scale(alpha, &mut self.w);
        linalg::scale(alpha, &mut self.v);
    }

    pub fn sub(&self, other: &StateVec) -> StateVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.w).max(linalg::max_abs(&self.v))
    }

    /// Plain Euclidean pairing of the stacked vectors.
    pub fn euclidean_dot(&self, other: &StateVec) -> f64 {
        linalg::dot(&self.w, &other.w) + linalg::dot(&self.v, &other.v)
    }
}

/// States at every node of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<StateVec>,
}

impl Trajectory {
    pub fn from_states(states: Vec<StateVec>) -> Self {
        Trajectory { states }
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &StateVec {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn iter(&self) -> core::slice::Iter<'_, StateVec> {
        self.states.iter()
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.states.len() != grid.n_nodes() {
            return Err(usage(format!(
                "trajectory has {} states but the grid has {} nodes",
                self.states.len(),
                grid.n_nodes()
            )));
        }
        Ok(())
    }
}

impl Index<usize> for Trajectory {
    type Output = StateVec;

    fn index(&self, k: usize) -> &StateVec {
        &self.states[k]
    }
}

/// Actuator design parameters (centre location(s) of the actuator).
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorDesign(Vec<f64>);

impl ActuatorDesign {
    pub fn new(params: Vec<f64>) -> Self {
        ActuatorDesign(params)
    }

    pub fn scalar(r: f64) -> Self {
        ActuatorDesign(vec![r])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Pointwise nonlinearity `f(w)` entering the velocity equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    None,
    /// `f(w) = c·w³`
    Cubic {
        coefficient: f64,
    },
    /// `f(w) = sin(w)`
    Sine,
    /// `f(w) = |w|ᵏ·w`
    Power {
        exponent: u32,
    },
}

impl Nonlinearity {
    pub fn value(&self, w: f64) -> f64 {
        match *self {
            Nonlinearity::None => 0.0,
            Nonlinearity::Cubic { coefficient } => coefficient * w * w * w,
            Nonlinearity::Sine => libm::sin(w),
            Nonlinearity::Power { exponent } => libm::pow(w.abs(), exponent as f64) * w,
        }
    }

    pub fn derivative(&self, w: f64) -> f64 {
        match *self {
            Nonlinearity::None => 0.0,
            Nonlinearity::Cubic { coefficient } => 3.0 * coefficient * w * w,
            Nonlinearity::Sine => libm::cos(w),
            Nonlinearity::Power { exponent } => (exponent as f64 + 1.0) * libm::pow(w.abs(), exponent as f64),
        }
    }

    pub fn is_none(&self) -> bool {
        match *self {
            Nonlinearity::None => true,
            Nonlinearity::Cubic { coefficient } => coefficient == 0.0,
            _ => false,
        }
    }
}

/// Spatial information a model supplies beyond the assembled matrices.
pub trait SpatialModel: Send + Sync + fmt::Debug {
    /// Number of free displacement nodes.
    fn n_nodes(&self) -> usize;

    /// Number of actuator design parameters.
    fn design_dim(&self) -> usize;

    /// Closed box of admissible designs.
    fn design_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// Velocity-equation forcing produced by a unit control.
    fn influence(&self, design: &ActuatorDesign) -> Result<Vec<f64>>;

    /// Derivative of [`SpatialModel::influence`] with respect to each
    /// design parameter.
    fn influence_gradient(&self, design: &ActuatorDesign) -> Result<Vec<Vec<f64>>>;

    /// Displacement part of the energy form with a pointwise weight field.
    /// Unit weights reproduce the stiffness block of the Gram operator.
    fn weighted_stiffness(&self, weights: &[f64]) -> SymBand;

    /// Adjoint of the linear generator in the energy inner product,
    /// evaluated from the model's closed-form expression.
    fn adjoint_generator(&self, p: &StateVec) -> StateVec;

    /// `h` such that the energy adjoint of the linearized nonlinearity at
    /// displacement `w_ref` maps `(f, g)` to `(h, 0)`, obtained by solving
    /// the model's elliptic adjoint problem.
    fn nonlinear_adjoint(&self, w_ref: &[f64], g: &[f64]) -> Result<Vec<f64>>;
}

/// Symmetric positive definite block-diagonal operator `diag(K, M)`
/// encoding the discrete energy inner product.
#[derive(Debug, Clone)]
pub struct GramOperator {
    stiffness: SymBand,
    stiffness_rows: SparseSym,
    mass: Vec<f64>,
    factor: BandCholesky,
}

impl GramOperator {
    pub fn new(stiffness: SymBand, mass: Vec<f64>) -> Result<Self> {
        if stiffness.dim() != mass.len() {
            return Err(usage("stiffness and mass dimensions differ"));
        }
        if mass.iter().any(|&m| !(m > 0.0)) {
            return Err(invalid("mass entries must be positive"));
        }
        let factor = stiffness
            .cholesky()
            .map_err(|_| invalid("energy form is not positive definite"))?;
        Ok(GramOperator {
            stiffness_rows: stiffness.compress(),
            stiffness,
            mass,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn stiffness(&self) -> &SymBand {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply(&self, x: &StateVec) -> StateVec {
        StateVec {
            w: self.stiffness.mul_vec(&x.w),
            v: x.v.iter().zip(&self.mass).map(|(v, m)| v * m).collect(),
        }
    }

    pub fn inner(&self, a: &StateVec, b: &StateVec) -> f64 {
        let kb = self.stiffness.mul_vec(&b.w);
        let wv: f64 =
            a.v.iter()
                .zip(&b.v)
                .zip(&self.mass)
                .map(|((x, y), m)| x * y * m)
                .sum();
        linalg::dot(&a.w, &kb) + wv
    }

    pub fn norm(&self, a: &StateVec) -> f64 {
        libm::sqrt(self.inner(a, a).max(0.0))
    }

    /// Riesz map: the state `y` with `⟨y, z⟩ = λ·z` for all `z`.
    pub fn riesz(&self, dual: &StateVec) -> StateVec {
        StateVec {
            w: self.factor.solve(&dual.w),
            v: dual.v.iter().zip(&self.mass).map(|(l, m)| l / m).collect(),
        }
    }
}

/// State-cost and control-cost weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub r_weight: f64,
}

impl CostSpec {
    pub fn new(q1: Vec<f64>, q2: Vec<f64>, r_weight: f64) -> Result<Self> {
        if q1.len() != q2.len() {
            return Err(usage("q1 and q2 must have the same length"));
        }
        if q1.iter().chain(&q2).any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(invalid("state weights must be finite and non-negative"));
        }
        if !(r_weight > 0.0) || !r_weight.is_finite() {
            return Err(invalid("control weight must be positive"));
        }
        Ok(CostSpec { q1, q2, r_weight })
    }

    pub fn uniform(n: usize, q: f64, r_weight: f64) -> Result<Self> {
        Self::new(vec![q; n], vec![q; n], r_weight)
    }

    pub fn is_state_free(&self) -> bool {
        self.q1.iter().chain(&self.q2).all(|&q| q == 0.0)
    }
}

/// The quadratic form `⟨Qx, x⟩ = xᵀ W x` of a [`CostSpec`] together with the
/// control weight, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CostForm {
    stiffness: SparseSym,
    mass: Vec<f64>,
    r_weight: f64,
}

impl CostForm {
    pub fn r_weight(&self) -> f64 {
        self.r_weight
    }

    /// `W x` (Euclidean representation of the state weight).
    pub fn apply(&self, x: &StateVec) -> StateVec {
        StateVec {
            w: self.stiffness.mul_vec_accurate(&x.w),
            v: x.v.iter().zip(&self.mass).map(|(v, m)| v * m).collect(),
        }
    }

    pub fn state_term(&self, x: &StateVec) -> f64 {
        let wx = self.apply(x);
        x.euclidean_dot(&wx)
    }

    /// Trapezoid-in-time cost `Σ ω_k (⟨Qx_k, x_k⟩ + R u_k²)`.
    pub fn evaluate(&self, traj: &Trajectory, u: &ControlSignal, grid: &TimeGrid) -> Result<f64> {
        traj.check_grid(grid)?;
        u.check_grid(grid)?;
        Ok(traj
            .iter()
            .zip(u.samples())
            .enumerate()
            .map(|(k, (x, &uk))| grid.weight(k) * (self.state_term(x) + self.r_weight * uk * uk))
            .sum())
    }
}

/// Assembled operators of a spatially discretized model.
#[derive(Debug, Clone)]
pub struct Discretization {
    model: Arc<dyn SpatialModel>,
    damping: Option<SymBand>,
    damping_rows: Option<SparseSym>,
    nonlinearity: Nonlinearity,
    gram: GramOperator,
}

impl Discretization {
    pub fn new(
        model: Arc<dyn SpatialModel>,
        mass: Vec<f64>,
        stiffness: SymBand,
        damping: Option<SymBand>,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let n = model.n_nodes();
        if mass.len() != n || stiffness.dim() != n {
            return Err(usage("operator dimensions do not match the model"));
        }
        if let Some(c) = &damping {
            if c.dim() != n {
                return Err(usage("damping dimension does not match the model"));
            }
        }
        let gram = GramOperator::new(stiffness, mass)?;
        Ok(Discretization {
            model,
            damping_rows: damping.as_ref().map(SymBand::compress),
            damping,
            nonlinearity,
            gram,
        })
    }

    /// Degrees of freedom per block (`w` and `v` each have this length).
    pub fn n_dof(&self) -> usize {
        self.gram.dim()
    }

    pub fn model(&self) -> &dyn SpatialModel {
        &*self.model
    }

    pub fn gram(&self) -> &GramOperator {
        &self.gram
    }

    pub fn mass(&self) -> &[f64] {
        self.gram.mass()
    }

    pub fn stiffness(&self) -> &SymBand {
        self.gram.stiffness()
    }

    pub fn damping(&self) -> Option<&SymBand> {
        self.damping.as_ref()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    /// Copy of this discretization with a different nonlinearity.
    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Self {
        Discretization {
            nonlinearity,
            ..self.clone()
        }
    }

    pub fn check_state(&self, x: &StateVec) -> Result<()> {
        if x.w.len() != self.n_dof() || x.v.len() != self.n_dof() {
            return Err(usage(format!(
                "state has {}/{} entries, discretization expects {}",
                x.w.len(),
                x.v.len(),
                self.n_dof()
            )));
        }
        Ok(())
    }

    /// `A x = (v, −M⁻¹(K w + C v))`.
    pub fn apply_linear(&self, x: &StateVec) -> StateVec {
        let mut force = self.gram.stiffness_rows.mul_vec_accurate(&x.w);
        if let Some(c) = &self.damping_rows {
            linalg::axpy(1.0, &c.mul_vec_accurate(&x.v), &mut force);
        }
        StateVec {
            w: x.v.clone(),
            v: force.iter().zip(self.mass()).map(|(f, m)| -f / m).collect(),
        }
    }

    /// `Aᵀ λ` (Euclidean transpose).
    pub fn apply_linear_transpose(&self, lambda: &StateVec) -> StateVec {
        let scaled: Vec<f64> = lambda.v.iter().zip(self.mass()).map(|(l, m)| l / m).collect();
        let mut w = self.gram.stiffness().mul_vec(&scaled);
        linalg::scale(-1.0, &mut w);
        let mut v = lambda.w.clone();
        if let Some(c) = &self.damping {
            linalg::axpy(-1.0, &c.mul_vec(&scaled), &mut v);
        }
        StateVec { w, v }
    }

    /// `F(x) = (0, f(w))`.
    pub fn nonlinear(&self, x: &StateVec) -> StateVec {
        StateVec {
            w: vec![0.0; x.len()],
            v: x.w.iter().map(|&w| self.nonlinearity.value(w)).collect(),
        }
    }

    /// Diagonal of the `v`-from-`w` block of the Jacobian `F′(x)`.
    pub fn nonlinear_slope(&self, x: &StateVec) -> Vec<f64> {
        x.w.iter().map(|&w| self.nonlinearity.derivative(w)).collect()
    }

    /// `F′(x) y = (0, f′(w)·y_w)`.
    pub fn nonlinear_jacobian_apply(&self, x: &StateVec, y: &StateVec) -> StateVec {
        StateVec {
            w: vec![0.0; x.len()],
            v: x.w
                .iter()
                .zip(&y.w)
                .map(|(&w, &yw)| self.nonlinearity.derivative(w) * yw)
                .collect(),
        }
    }

    /// Control influence `B(r)` as a state vector `(0, b)`.
    pub fn input_vector(&self, design: &ActuatorDesign) -> Result<StateVec> {
        let b = self.model.influence(design)?;
        Ok(StateVec {
            w: vec![0.0; b.len()],
            v: b,
        })
    }

    pub fn cost_form(&self, cost: &CostSpec) -> Result<CostForm> {
        if cost.q1.len() != self.n_dof() {
            return Err(usage(format!(
                "cost weights have {} entries, discretization has {} nodes",
                cost.q1.len(),
                self.n_dof()
            )));
        }
        Ok(CostForm {
            stiffness: self.model.weighted_stiffness(&cost.q1).compress(),
            mass: cost.q2.iter().zip(self.mass()).map(|(q, m)| q * m).collect(),
            r_weight: cost.r_weight,
        })
    }

    /// Factorizes the implicit Crank–Nicolson system for step size `dt`.
    pub fn stepper(&self, dt: f64) -> Result<Stepper<'_>> {
        Stepper::new(self, dt)
    }
}

/// Crank–Nicolson half-step operators `I ± (dt/2) A` for a fixed `dt`.
///
/// The implicit system is reduced to the symmetric positive definite
/// velocity system `(M + θC + θ²K) v = …` with `θ = dt/2`.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    dt: f64,
    schur_rows: SparseSym,
    schur: BandCholesky,
}

impl fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper").field("dt", &self.dt).finish()
    }
}

impl<'a> Stepper<'a> {
    fn new(disc: &'a Discretization, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(usage(format!("time step must be positive, got {dt}")));
        }
        let theta = 0.5 * dt;
        let mut s = SymBand::diagonal(disc.mass()).add_scaled(theta * theta, disc.stiffness());
        if let Some(c) = disc.damping() {
            s = s.add_scaled(theta, c);
        }
        let schur = s.cholesky().map_err(|_| Error::SingularStep {
            dt,
            hint: format!(
                "M + (dt/2)C + (dt/2)²K is not positive definite; check that mass, damping and \
                 stiffness are non-negative ({} dof)",
                disc.n_dof()
            ),
        })?;
        Ok(Stepper {
            disc,
            dt,
            schur_rows: s.compress(),
            schur,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn discretization(&self) -> &'a Discretization {
        self.disc
    }

    /// `(I + θA) x`
    pub fn explicit_half(&self, x: &StateVec) -> StateVec {
        let mut out = x.clone();
        out.axpy(0.5 * self.dt, &self.disc.apply_linear(x));
        out
    }

    /// `(I + θA)ᵀ λ`
    pub fn explicit_half_transpose(&self, lambda: &StateVec) -> StateVec {
        let mut out = lambda.clone();
        out.axpy(0.5 * self.dt, &self.disc.apply_linear_transpose(lambda));
        out
    }

    /// Solves `(I − θA) x = rhs`.
    pub fn implicit_solve(&self, rhs: &StateVec) -> StateVec {
        let theta = 0.5 * self.dt;
        let disc = self.disc;
        // v-system: (M + θC + θ²K) v = M r_v − θ K r_w
        let k_rw = disc.gram.stiffness_rows.mul_vec_accurate(&rhs.w);
        let b: Vec<f64> = rhs
            .v
            .iter()
            .zip(disc.mass())
            .zip(&k_rw)
            .map(|((r, m), kr)| m * r - theta * kr)
            .collect();
        let mut v = self.schur.solve(&b);
        // one refinement pass brings the rounding in the forward state down
        // to roughly unit level, which keeps J smooth enough for line search
        let mut correction = self.schur_rows.residual_accurate(&b, &v);
        self.schur.solve_in_place(&mut correction);
        linalg::axpy(1.0, &correction, &mut v);
        let w = rhs.w.iter().zip(&v).map(|(r, vv)| r + theta * vv).collect();
        StateVec { w, v }
    }

    /// Solves `(I − θA)ᵀ λ = rhs`.
    pub fn implicit_solve_transpose(&self, rhs: &StateVec) -> StateVec {
        let theta = 0.5 * self.dt;
        let disc = self.disc;
        // (M + θC + θ²K) β = r_v + θ r_w ; λ_v = M β ; λ_w = r_w − θ K β
        let mut beta: Vec<f64> = rhs.v.iter().zip(&rhs.w).map(|(a, b)| a + theta * b).collect();
        self.schur.solve_in_place(&mut beta);
        let k_beta = disc.stiffness().mul_vec(&beta);
        let w = rhs.w.iter().zip(&k_beta).map(|(r, kb)| r - theta * kb).collect();
        let v = beta.iter().zip(disc.mass()).map(|(b, m)| b * m).collect();
        StateVec { w, v }
    }

    /// Solves `(I − θA*) p = rhs` where `A*(f, g) = (−g, M⁻¹(K f − C g))` is
    /// the energy adjoint of `A`.
    pub fn implicit_solve_adjoint(&self, rhs: &StateVec) -> StateVec {
        let theta = 0.5 * self.dt;
        let disc = self.disc;
        // f = r_f − θ g ;  (M + θC + θ²K) g = M r_g + θ K r_f
        let k_rf = disc.stiffness().mul_vec(&rhs.w);
        let mut g: Vec<f64> = rhs
            .v
            .iter()
            .zip(disc.mass())
            .zip(&k_rf)
            .map(|((r, m), kr)| m * r + theta * kr)
            .collect();
        self.schur.solve_in_place(&mut g);
        let f = rhs.w.iter().zip(&g).map(|(r, gg)| r - theta * gg).collect();
        StateVec { w: f, v: g }
    }

    /// One IMEX step: CN on `A`, Adams–Bashforth-2 on `F` (forward Euler on
    /// the first step when `f_prev` is absent), midpoint control sample.
    pub fn step(
        &self,
        x_n: &StateVec,
        f_n: &StateVec,
        f_prev: Option<&StateVec>,
        b: &StateVec,
        u_mid: f64,
    ) -> StateVec {
        let mut rhs = self.explicit_half(x_n);
        match f_prev {
            Some(fp) => {
                rhs.axpy(1.5 * self.dt, f_n);
                rhs.axpy(-0.5 * self.dt, fp);
            }
            None => rhs.axpy(self.dt, f_n),
        }
        rhs.axpy(self.dt * u_mid, b);
        self.implicit_solve(&rhs)
    }
}

/// One IMEX step from `x_n` (with `x_prev` supplying the AB2 history).
pub fn imex_step(
    disc: &Discretization,
    x_n: &StateVec,
    x_prev: Option<&StateVec>,
    u_mid: f64,
    design: &ActuatorDesign,
    dt: f64,
) -> Result<StateVec> {
    disc.check_state(x_n)?;
    if let Some(p) = x_prev {
        disc.check_state(p)?;
    }
    let stepper = disc.stepper(dt)?;
    let b = disc.input_vector(design)?;
    let f_n = disc.nonlinear(x_n);
    let f_prev = x_prev.map(|p| disc.nonlinear(p));
    Ok(stepper.step(x_n, &f_n, f_prev.as_ref(), &b, u_mid))
}

/// Forward integration that keeps whatever was computed before a blow-up.
///
/// Returns the states up to (excluding) the first non-finite one, plus the
/// blow-up error if one occurred.
pub fn solve_forward_partial(
    disc: &Discretization,
    x0: &StateVec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    grid: &TimeGrid,
) -> Result<(Trajectory, Option<Error>)> {
    disc.check_state(x0)?;
    u.check_grid(grid)?;
    if !x0.is_finite() {
        return Err(usage("initial state must be finite"));
    }
    let stepper = disc.stepper(grid.dt())?;
    let b = disc.input_vector(design)?;
    let mut states = Vec::with_capacity(grid.n_nodes());
    states.push(x0.clone());
    let mut f_prev: Option<StateVec> = None;
    let mut f_n = disc.nonlinear(x0);
    for n in 0..grid.n_steps() {
        let next = stepper.step(&states[n], &f_n, f_prev.as_ref(), &b, u.midpoint(n));
        if !next.is_finite() {
            return Ok((
                Trajectory::from_states(states),
                Some(Error::BlowUp { step: n + 1 }),
            ));
        }
        let f_next = disc.nonlinear(&next);
        f_prev = Some(core::mem::replace(&mut f_n, f_next));
        states.push(next);
    }
    Ok((Trajectory::from_states(states), None))
}

/// Integrates `ẋ = A x + F(x) + B(r) u` over the grid.
pub fn solve_forward(
    disc: &Discretization,
    x0: &StateVec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    match solve_forward_partial(disc, x0, u, design, grid)? {
        (traj, None) => Ok(traj),
        (_, Some(err)) => Err(err),
    }
}

/// Outcome of [`picard_mild_solve`].
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub trajectory: Trajectory,
    /// `max_t ‖x^{j+1}(t) − x^j(t)‖` for each iteration `j`.
    pub distances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardSolution {
    /// Ratios of successive iterate distances.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Fixed-point iteration on the variation-of-constants formula
///
/// ```text
/// x = T(t) x0 + ∫ T(t−s) F(x(s)) ds + ∫ T(t−s) B(r) u(s) ds
/// ```
///
/// where `T` is realized by the Crank–Nicolson propagator and the Duhamel
/// integrals by trapezoid sums with the previous iterate frozen inside `F`.
/// Starts from the zero trajectory, so the first iterate is the linear
/// response. Convergence: iterate distance `≤ tol · max(1, max_t ‖x(t)‖)`.
pub fn picard_mild_solve(
    disc: &Discretization,
    x0: &StateVec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    grid: &TimeGrid,
    max_iters: usize,
    tol: f64,
) -> Result<PicardSolution> {
    disc.check_state(x0)?;
    u.check_grid(grid)?;
    let stepper = disc.stepper(grid.dt())?;
    let b = disc.input_vector(design)?;
    let dt = grid.dt();
    let n = disc.n_dof();

    let mut current = Trajectory::from_states(vec![StateVec::zeros(n); grid.n_nodes()]);
    let mut distances = Vec::new();
    let mut rising = 0;
    for iter in 1..=max_iters {
        let frozen: Vec<StateVec> = current.iter().map(|x| disc.nonlinear(x)).collect();
        let mut states = Vec::with_capacity(grid.n_nodes());
        states.push(x0.clone());
        for k in 0..grid.n_steps() {
            let mut rhs = stepper.explicit_half(&states[k]);
            rhs.axpy(0.5 * dt, &frozen[k]);
            rhs.axpy(0.5 * dt, &frozen[k + 1]);
            rhs.axpy(dt * u.midpoint(k), &b);
            let next = stepper.implicit_solve(&rhs);
            if !next.is_finite() {
                return Err(Error::BlowUp { step: k + 1 });
            }
            states.push(next);
        }
        let next = Trajectory::from_states(states);
        let mut dist: f64 = 0.0;
        let mut size: f64 = 1.0;
        for (a, c) in next.iter().zip(current.iter()) {
            dist = dist.max(disc.gram().norm(&a.sub(c)));
            size = size.max(disc.gram().norm(a));
        }
        if let Some(&prev) = distances.last() {
            if prev > 0.0 && dist / prev >= 1.0 {
                rising += 1;
                if rising >= 3 {
                    return Err(Error::ContractionFailure {
                        iteration: iter,
                        ratio: dist / prev,
                    });
                }
            } else {
                rising = 0;
            }
        }
        distances.push(dist);
        current = next;
        if dist <= tol * size {
            return Ok(PicardSolution {
                trajectory: current,
                distances,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(PicardSolution {
        trajectory: current,
        distances,
        iterations: max_iters,
        converged: false,
    })
}

/// `⟨a, b⟩` in the discrete energy inner product.
pub fn energy_inner(disc: &Discretization, a: &StateVec, b: &StateVec) -> Result<f64> {
    disc.check_state(a)?;
    disc.check_state(b)?;
    Ok(disc.gram().inner(a, b))
}

/// Trapezoid-in-time quadratic cost of a trajectory and control.
pub fn cost_eval(
    disc: &Discretization,
    cost: &CostSpec,
    traj: &Trajectory,
    u: &ControlSignal,
    grid: &TimeGrid,
) -> Result<f64> {
    disc.cost_form(cost)?.evaluate(traj, u, grid)
}
