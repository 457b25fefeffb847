//! Forward optimal control used to synthesize the controllers under study.
//!
//! Every horizon here is counted in samples `H`: a schedule over `H` samples
//! has decision inputs `u(0..H-2)`, stage costs `x'Qx + u'Ru` over
//! `k = 0..H-2`, and no terminal weight on `x(H-1)`. [`MpcHorizon`] maps an
//! MPC prediction horizon onto this count.

mod mpc;
mod nmpc;
pub(crate) mod riccati;
mod weights;

use thiserror::Error;

use crate::systems::{PendulumParams, SystemError};

pub use mpc::{mpc_policy_lti, HorizonConvention, LinearFeedback, MpcHorizon};
pub use nmpc::{nmpc_step, NmpcController, NmpcOptions, ReferenceSignal};
pub use riccati::{lqr_closed_loop, riccati_solve, trajectory_cost, GainSchedule, TimeVaryingFeedback};
pub use weights::CostWeights;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("horizon must be >= 2 samples, got {0}")]
    InvalidHorizon(usize),
    #[error("R + B'PB is numerically singular at step {step}")]
    Conditioning { step: usize },
    #[error("NMPC did not converge in {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Torque that holds the pendulum still at `theta_r`: `-m g l sin(theta_r)`.
pub fn equilibrium_input(p: &PendulumParams, theta_r: f64) -> f64 {
    -p.m * p.g * p.l * theta_r.sin()
}
