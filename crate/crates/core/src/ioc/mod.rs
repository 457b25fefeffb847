//! Inverse LQ problem: recover the cost weights a closed-loop controller
//! implicitly optimizes from its trajectories.
//!
//! For fixed `(Q, R)` the optimality conditions of the finite-horizon LQ
//! problem have a unique solution per trajectory, computed by a Riccati
//! sweep ([`reconstruct_pmp_trajectory`]). The inverse problem is therefore an
//! unconstrained fit over `(Q, R)` of the reconstructed states to the
//! measured ones ([`ioc_objective`], [`solve_ioc`]).

mod bfgs;
mod objective;
pub mod oracle;
mod param;
mod pmp;
mod solve;

use thiserror::Error;

use crate::control::ControlError;

pub use bfgs::{minimize, BfgsOptions, BfgsOutcome};
pub use objective::{ioc_gradient, ioc_objective, squared_errors};
pub use param::{Parameterization, R_FLOOR};
pub use pmp::{pmp_residuals, reconstruct_pmp_trajectory, AdjointSequence, PmpResiduals};
pub use solve::{normalize_weights, solve_ioc, GradientMode, IocConfig, IocResult, Normalization, Structure};

#[derive(Debug, Error)]
pub enum IocError {
    #[error("dataset contains no trajectories")]
    EmptyDataset,
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid IOC configuration: {0}")]
    InvalidConfig(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("all {restarts} restarts diverged")]
    AllRestartsDiverged { restarts: usize },
    #[error("boundary-value system is singular")]
    SingularBoundarySystem,
    #[error(transparent)]
    Control(#[from] ControlError),
}
