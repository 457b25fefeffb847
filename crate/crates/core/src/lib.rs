//! Explaining black-box feedback controllers through inverse linear-quadratic
//! optimal control.
//!
//! Closed-loop trajectories of an unknown controller are fitted by the state
//! sequences a finite-horizon LQR would produce, and the best-fitting cost
//! weights `(Q, R)` are reported as the explanation of the controller's local
//! trade-off between regulation error and control effort.
//!
//! Module map:
//!
//! - [`systems`]: plant models, closed-loop simulation, least-squares
//!   linearization.
//! - [`control`]: Riccati sweeps, receding-horizon MPC and iterative
//!   linearization NMPC used to synthesize the controllers under study.
//! - [`ioc`]: reconstruction of optimal trajectories from the optimality
//!   conditions and the inverse problem itself.
//! - [`data_io`]: datasets, experiment configs, sampling and persistence.
//!
//! Time indices are 0-based everywhere: a trajectory of `N` samples holds
//! states `x(0..N-1)` and inputs `u(0..N-2)`.

pub mod control;
pub mod data_io;
pub mod ioc;
pub mod linalg;
pub mod rng;
pub mod systems;

pub use control::{CostWeights, GainSchedule, HorizonConvention};
pub use data_io::{Dataset, DatasetMeta, ExperimentConfig};
pub use ioc::{IocConfig, IocResult, Normalization, Structure};
pub use systems::{LinearSystem, OperatingPoint, PendulumParams, Trajectory};
