use nalgebra::{DMatrix, DVector};

use super::{ControlError, CostWeights};
use crate::linalg::symmetrize;
use crate::systems::{LinearSystem, Policy, PolicyError, Trajectory};

/// Finite-horizon LQR solution over `H` samples.
///
/// `gains[k]` (k = 0..H-2) is the optimal feedback `u(k) = -K(k) x(k)`;
/// `value_matrices[k]` (k = 0..H-1) is the cost-to-go `P(k)`, with
/// `P(H-1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSchedule {
    pub gains: Vec<DMatrix<f64>>,
    pub value_matrices: Vec<DMatrix<f64>>,
}

impl GainSchedule {
    pub fn horizon(&self) -> usize {
        self.value_matrices.len()
    }
}

/// Backward Riccati sweep with zero terminal weight:
///
/// ```text
/// K(k) = (R + B'P(k+1)B)^-1 B'P(k+1)A
/// P(k) = Q + A'P(k+1)A - A'P(k+1)B K(k)
/// ```
pub fn riccati_solve(sys: &LinearSystem, w: &CostWeights, horizon: usize) -> Result<GainSchedule, ControlError> {
    if horizon < 2 {
        return Err(ControlError::InvalidHorizon(horizon));
    }
    w.check_dims(sys.n(), sys.m())?;
    let (a, b) = (sys.a(), sys.b());
    let (n, m) = (sys.n(), sys.m());
    let at = a.transpose();
    let bt = b.transpose();

    let mut gains = vec![DMatrix::zeros(m, n); horizon - 1];
    let mut values = vec![DMatrix::zeros(n, n); horizon];
    for k in (0..horizon - 1).rev() {
        let p_next = &values[k + 1];
        let pb = p_next * b;
        let s = symmetrize(&(w.r() + &bt * &pb));
        let chol = s.cholesky().ok_or(ControlError::Conditioning { step: k })?;
        let gain = chol.solve(&(pb.transpose() * a));
        if !gain.iter().all(|v| v.is_finite()) {
            return Err(ControlError::Conditioning { step: k });
        }
        let p = w.q() + &at * p_next * a - &at * &pb * &gain;
        values[k] = symmetrize(&p);
        gains[k] = gain;
    }
    Ok(GainSchedule {
        gains,
        value_matrices: values,
    })
}

/// Noiseless closed loop under the full-horizon LQR schedule of `n` samples.
pub fn lqr_closed_loop(
    sys: &LinearSystem,
    w: &CostWeights,
    x0: &DVector<f64>,
    n: usize,
) -> Result<Trajectory, ControlError> {
    let schedule = riccati_solve(sys, w, n)?;
    Ok(rollout_schedule(sys, &schedule.gains, x0)?)
}

pub(crate) fn rollout_schedule(
    sys: &LinearSystem,
    gains: &[DMatrix<f64>],
    x0: &DVector<f64>,
) -> Result<Trajectory, crate::systems::SystemError> {
    crate::systems::check_len("initial state", sys.n(), x0.len())?;
    let mut states = Vec::with_capacity(gains.len() + 1);
    let mut inputs = Vec::with_capacity(gains.len());
    let mut x = x0.clone();
    for k in gains {
        let u = -(k * &x);
        let next = sys.a() * &x + sys.b() * &u;
        states.push(x);
        inputs.push(u);
        x = next;
    }
    states.push(x);
    Trajectory::new(states, inputs)
}

/// `sum_{k=0}^{N-2} x(k)'Q x(k) + u(k)'R u(k)`, the zero-terminal LQ cost of
/// a trajectory.
pub fn trajectory_cost(w: &CostWeights, traj: &Trajectory) -> f64 {
    traj.states()
        .iter()
        .zip(traj.inputs())
        .map(|(x, u)| x.dot(&(w.q() * x)) + u.dot(&(w.r() * u)))
        .sum()
}

/// Applies `u(k) = -K(k) y(k)` from a precomputed schedule.
#[derive(Clone, Debug)]
pub struct TimeVaryingFeedback {
    gains: Vec<DMatrix<f64>>,
}

impl TimeVaryingFeedback {
    pub fn new(schedule: GainSchedule) -> Self {
        Self { gains: schedule.gains }
    }
}

impl Policy for TimeVaryingFeedback {
    fn control(&mut self, k: usize, y: &DVector<f64>) -> Result<DVector<f64>, PolicyError> {
        let gain = self
            .gains
            .get(k)
            .ok_or_else(|| format!("gain schedule has no entry for step {k}"))?;
        Ok(-(gain * y))
    }
}
