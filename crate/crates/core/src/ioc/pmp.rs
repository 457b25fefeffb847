use nalgebra::{DMatrix, DVector};

use super::IocError;
use crate::control::{riccati_solve, CostWeights};
use crate::systems::{LinearSystem, Trajectory};

/// Costate sequence `lambda(0..N-1)` with `lambda(N-1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointSequence {
    pub lambdas: Vec<DVector<f64>>,
}

/// Unique solution of the LQ optimality conditions from `x(0) = x_bar`:
///
/// ```text
/// lambda(k)  = A' lambda(k+1) + Q x(k)
/// u(k)       = -R^-1 B' lambda(k+1)
/// x(k+1)     = A x(k) - B R^-1 B' lambda(k+1)
/// lambda(N-1) = 0
/// ```
///
/// computed through the Riccati sweep, `lambda(k) = P(k) x(k)`.
pub fn reconstruct_pmp_trajectory(
    sys: &LinearSystem,
    w: &CostWeights,
    x_bar: &DVector<f64>,
    n: usize,
) -> Result<(Trajectory, AdjointSequence), IocError> {
    if x_bar.len() != sys.n() {
        return Err(IocError::DimensionMismatch {
            what: "initial state",
            expected: sys.n(),
            found: x_bar.len(),
        });
    }
    let schedule = riccati_solve(sys, w, n)?;
    let traj = crate::control::riccati::rollout_schedule(sys, &schedule.gains, x_bar)
        .map_err(crate::control::ControlError::from)?;
    let lambdas = traj
        .states()
        .iter()
        .zip(&schedule.value_matrices)
        .map(|(x, p)| p * x)
        .collect();
    Ok((traj, AdjointSequence { lambdas }))
}

/// Largest residual norms of the optimality conditions over all steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmpResiduals {
    /// `lambda(k) - A' lambda(k+1) - Q x(k)`, k = 0..N-2.
    pub adjoint: f64,
    /// `u(k) + R^-1 B' lambda(k+1)`, k = 0..N-2.
    pub input: f64,
    /// `x(k+1) - A x(k) + B R^-1 B' lambda(k+1)`, k = 0..N-2.
    pub state: f64,
    /// `|lambda(N-1)|`.
    pub terminal: f64,
}

impl PmpResiduals {
    pub fn max(&self) -> f64 {
        self.adjoint.max(self.input).max(self.state).max(self.terminal)
    }
}

pub fn pmp_residuals(
    sys: &LinearSystem,
    w: &CostWeights,
    traj: &Trajectory,
    adjoint: &AdjointSequence,
) -> PmpResiduals {
    let (a, b) = (sys.a(), sys.b());
    let r_inv: DMatrix<f64> = w
        .r()
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::from_element(w.m(), w.m(), f64::NAN));
    let xs = traj.states();
    let us = traj.inputs();
    let ls = &adjoint.lambdas;
    let mut res = PmpResiduals {
        adjoint: 0.0,
        input: 0.0,
        state: 0.0,
        terminal: ls.last().map_or(f64::NAN, |l| l.norm()),
    };
    for k in 0..us.len() {
        let push = &r_inv * b.transpose() * &ls[k + 1];
        res.adjoint = res
            .adjoint
            .max((&ls[k] - a.transpose() * &ls[k + 1] - w.q() * &xs[k]).norm());
        res.input = res.input.max((&us[k] + &push).norm());
        res.state = res.state.max((&xs[k + 1] - a * &xs[k] + b * &push).norm());
    }
    res
}
