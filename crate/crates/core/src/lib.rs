//! Joint optimal control and actuator design for semi-linear evolution
//! equations of second-order (displacement/velocity) type.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`system`]: model-agnostic state vectors, energy inner products, the
//!   Crank–Nicolson / Adams–Bashforth IMEX integrator, a Picard fixed-point
//!   oracle for the mild (variation-of-constants) form, and cost evaluation.
//! * [`beam`]: a simply supported Kelvin–Voigt beam on a nonlinear elastic
//!   foundation, with a raised-cosine actuator whose centre is the design.
//! * [`wave`]: a 2D semi-linear wave equation on a rectangle with mixed
//!   Dirichlet/Neumann edges and a radial bump actuator.
//! * [`adjoint`]: linearized and adjoint sweeps that are exact transposes of
//!   the discrete forward scheme, gradients of the discrete cost, duality
//!   checks, optimality residuals and the continuous-adjoint oracle.
//! * [`optimize`]: projected gradient descent over the control ball and the
//!   design box, plus a brute-force grid search over designs.
//!
//! Everything operates on plain `Vec<f64>` data; no global state.
#![no_std]
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::excessive_precision
)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adjoint;
pub mod beam;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod optimize;
pub mod system;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{ControlSignal, TimeGrid};
pub use system::{
    ActuatorDesign, CostSpec, Discretization, GramOperator, Nonlinearity, SpatialModel, StateVec, Trajectory,
};
