//! Discrete-time plant models, closed-loop simulation and least-squares
//! linearization from data.

mod pendulum;
mod simulate;
mod sysid;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

pub use pendulum::{pendulum_linearize, pendulum_step, PendulumParams};
pub use simulate::{simulate_closed_loop, FnPolicy, Policy, PolicyError, ZeroPolicy};
pub use sysid::estimate_linear_system;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },
    #[error("policy failed at step {step}: {source}")]
    Policy {
        step: usize,
        #[source]
        source: PolicyError,
    },
    #[error("regressor is rank deficient: rank {rank} < required {required}")]
    Identifiability { rank: usize, required: usize },
    #[error("dataset contains no trajectories")]
    EmptyDataset,
}

/// A discrete-time plant `x(k+1) = f(x(k), u(k))`.
pub trait Plant: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Jacobians `(df/dx, df/du)` at `(x, u)`. The default uses central
    /// differences.
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, m);
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            a.set_column(j, &((self.step(&xp, u) - self.step(&xm, u)) / (2.0 * h)));
        }
        for j in 0..m {
            let h = 1e-6 * u[j].abs().max(1.0);
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            b.set_column(j, &((self.step(x, &up) - self.step(x, &um)) / (2.0 * h)));
        }
        (a, b)
    }
}

/// Discrete-time LTI plant `x(k+1) = A x(k) + B u(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinearSystem", into = "RawLinearSystem")]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, SystemError> {
        let n = a.nrows();
        if n == 0 {
            return Err(SystemError::InvalidParameter("state dimension must be >= 1".into()));
        }
        if a.ncols() != n {
            return Err(SystemError::DimensionMismatch {
                what: "A columns",
                expected: n,
                found: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(SystemError::DimensionMismatch {
                what: "B rows",
                expected: n,
                found: b.nrows(),
            });
        }
        if b.ncols() == 0 {
            return Err(SystemError::InvalidParameter("input dimension must be >= 1".into()));
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return Err(SystemError::InvalidParameter("non-finite entry in A or B".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `A x + B u`, checking dimensions.
    pub fn lti_step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, SystemError> {
        check_len("state", self.n(), x.len())?;
        check_len("input", self.m(), u.len())?;
        Ok(&self.a * x + &self.b * u)
    }
}

impl Plant for LinearSystem {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn input_dim(&self) -> usize {
        self.m()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }
}

#[derive(Serialize, Deserialize)]
struct RawLinearSystem {
    #[serde(with = "linalg::rows")]
    a: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    b: DMatrix<f64>,
}

impl TryFrom<RawLinearSystem> for LinearSystem {
    type Error = SystemError;

    fn try_from(raw: RawLinearSystem) -> Result<Self, Self::Error> {
        LinearSystem::new(raw.a, raw.b)
    }
}

impl From<LinearSystem> for RawLinearSystem {
    fn from(sys: LinearSystem) -> Self {
        RawLinearSystem { a: sys.a, b: sys.b }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), SystemError> {
    if expected != found {
        return Err(SystemError::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

/// One closed-loop run: `N >= 2` states and `N - 1` inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory", into = "RawTrajectory")]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self, SystemError> {
        if states.len() < 2 {
            return Err(SystemError::InvalidTrajectory(format!(
                "need at least 2 states, got {}",
                states.len()
            )));
        }
        if inputs.len() + 1 != states.len() {
            return Err(SystemError::InvalidTrajectory(format!(
                "{} states require {} inputs, got {}",
                states.len(),
                states.len() - 1,
                inputs.len()
            )));
        }
        let n = states[0].len();
        let m = inputs[0].len();
        if n == 0 || m == 0 {
            return Err(SystemError::InvalidTrajectory("empty state or input vector".into()));
        }
        if let Some(k) = states.iter().position(|x| x.len() != n) {
            return Err(SystemError::InvalidTrajectory(format!(
                "state {k} has dimension {}, expected {n}",
                states[k].len()
            )));
        }
        if let Some(k) = inputs.iter().position(|u| u.len() != m) {
            return Err(SystemError::InvalidTrajectory(format!(
                "input {k} has dimension {}, expected {m}",
                inputs[k].len()
            )));
        }
        Ok(Self { states, inputs })
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().chain(&self.inputs).all(linalg::vec_all_finite)
    }

    /// Shifts every state by `dx` and every input by `du`.
    pub fn offset(&self, dx: &DVector<f64>, du: &DVector<f64>) -> Self {
        Self {
            states: self.states.iter().map(|x| x + dx).collect(),
            inputs: self.inputs.iter().map(|u| u + du).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawTrajectory {
    #[serde(with = "linalg::vectors")]
    states: Vec<DVector<f64>>,
    #[serde(with = "linalg::vectors")]
    inputs: Vec<DVector<f64>>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = SystemError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        Trajectory::new(raw.states, raw.inputs)
    }
}

impl From<Trajectory> for RawTrajectory {
    fn from(t: Trajectory) -> Self {
        RawTrajectory {
            states: t.states,
            inputs: t.inputs,
        }
    }
}

/// State and input around which a nonlinear plant is explained locally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    #[serde(with = "linalg::vector")]
    pub x_bar: DVector<f64>,
    #[serde(with = "linalg::vector")]
    pub u_bar: DVector<f64>,
}

impl OperatingPoint {
    pub fn new(x_bar: DVector<f64>, u_bar: DVector<f64>) -> Self {
        Self { x_bar, u_bar }
    }

    pub fn negated(&self) -> Self {
        Self {
            x_bar: -&self.x_bar,
            u_bar: -&self.u_bar,
        }
    }
}
