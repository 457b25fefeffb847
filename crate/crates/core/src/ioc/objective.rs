use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::IocError;
use crate::control::{riccati_solve, ControlError, CostWeights, GainSchedule};
use crate::linalg::symmetrize;
use crate::systems::{LinearSystem, Trajectory};

fn check_data(sys: &LinearSystem, w: &CostWeights, data: &[Trajectory]) -> Result<(), IocError> {
    if data.is_empty() {
        return Err(IocError::EmptyDataset);
    }
    for (what, expected, found) in [("Q", sys.n(), w.n()), ("R", sys.m(), w.m())] {
        if expected != found {
            return Err(IocError::DimensionMismatch { what, expected, found });
        }
    }
    for t in data {
        if t.state_dim() != sys.n() {
            return Err(IocError::DimensionMismatch {
                what: "trajectory state",
                expected: sys.n(),
                found: t.state_dim(),
            });
        }
        if t.input_dim() != sys.m() {
            return Err(IocError::DimensionMismatch {
                what: "trajectory input",
                expected: sys.m(),
                found: t.input_dim(),
            });
        }
    }
    Ok(())
}

/// One Riccati sweep per distinct trajectory length.
fn schedules(
    sys: &LinearSystem,
    w: &CostWeights,
    data: &[Trajectory],
) -> Result<BTreeMap<usize, GainSchedule>, ControlError> {
    let mut out = BTreeMap::new();
    for t in data {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(t.len()) {
            e.insert(riccati_solve(sys, w, t.len())?);
        }
    }
    Ok(out)
}

/// Noiseless closed loop from `x0` under `gains`, returned as states.
fn reconstruct(sys: &LinearSystem, gains: &[DMatrix<f64>], x0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut xs = Vec::with_capacity(gains.len() + 1);
    xs.push(x0.clone());
    for k in gains {
        let x = xs.last().unwrap();
        let next = sys.a() * x - sys.b() * (k * x);
        xs.push(next);
    }
    xs
}

/// Per-trajectory `sum_{k>=1} |x_d(k) - x(k)|²`, where `x` is the optimal
/// trajectory for `w` started from the measured `x_d(0)`. Accumulated in
/// trajectory order.
pub fn squared_errors(sys: &LinearSystem, w: &CostWeights, data: &[Trajectory]) -> Result<Vec<f64>, IocError> {
    check_data(sys, w, data)?;
    let sweeps = schedules(sys, w, data)?;
    Ok(data
        .iter()
        .map(|t| {
            let xs = reconstruct(sys, &sweeps[&t.len()].gains, &t.states()[0]);
            t.states()[1..]
                .iter()
                .zip(&xs[1..])
                .map(|(xd, x)| (xd - x).norm_squared())
                .sum()
        })
        .collect())
}

/// Mean over trajectories of the state reconstruction error.
pub fn ioc_objective(sys: &LinearSystem, w: &CostWeights, data: &[Trajectory]) -> Result<f64, IocError> {
    let errors = squared_errors(sys, w, data)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Directional derivatives of [`ioc_objective`] along each `(dQ, dR)`, by
/// forward sensitivities of the Riccati sweep and the closed-loop rollout.
pub fn ioc_gradient(
    sys: &LinearSystem,
    w: &CostWeights,
    data: &[Trajectory],
    directions: &[(DMatrix<f64>, DMatrix<f64>)],
) -> Result<Vec<f64>, IocError> {
    check_data(sys, w, data)?;
    let sweeps = schedules(sys, w, data)?;
    let mut sens = BTreeMap::new();
    for (&len, schedule) in &sweeps {
        sens.insert(len, gain_sensitivities(sys, w, schedule, directions)?);
    }

    let (a, b) = (sys.a(), sys.b());
    let mut grad = vec![0.0; directions.len()];
    for t in data {
        let gains = &sweeps[&t.len()].gains;
        let dgains = &sens[&t.len()];
        let xs = reconstruct(sys, gains, &t.states()[0]);
        for (d, g) in grad.iter_mut().enumerate() {
            let mut dx = DVector::zeros(sys.n());
            let mut acc = 0.0;
            for k in 0..gains.len() {
                dx = (a - b * &gains[k]) * &dx - b * (&dgains[d][k] * &xs[k]);
                acc += -2.0 * (&t.states()[k + 1] - &xs[k + 1]).dot(&dx);
            }
            *g += acc;
        }
    }
    let m = data.len() as f64;
    Ok(grad.into_iter().map(|g| g / m).collect())
}

/// `dK(k)` for every direction, indexed `[direction][k]`.
fn gain_sensitivities(
    sys: &LinearSystem,
    w: &CostWeights,
    schedule: &GainSchedule,
    directions: &[(DMatrix<f64>, DMatrix<f64>)],
) -> Result<Vec<Vec<DMatrix<f64>>>, ControlError> {
    let (a, b) = (sys.a(), sys.b());
    let (n, m) = (sys.n(), sys.m());
    let steps = schedule.gains.len();
    let mut dk = vec![vec![DMatrix::zeros(m, n); steps]; directions.len()];
    let mut dp: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); directions.len()];
    for k in (0..steps).rev() {
        let p_next = &schedule.value_matrices[k + 1];
        let gain = &schedule.gains[k];
        let s = symmetrize(&(w.r() + b.transpose() * p_next * b));
        let chol = s.cholesky().ok_or(ControlError::Conditioning { step: k })?;
        for (d, (dq, dr)) in directions.iter().enumerate() {
            let dp_next = &dp[d];
            let ds = dr + b.transpose() * dp_next * b;
            let dgain = chol.solve(&(b.transpose() * dp_next * a - ds * gain));
            let dp_k = dq + a.transpose() * dp_next * a
                - a.transpose() * dp_next * b * gain
                - a.transpose() * p_next * b * &dgain;
            dp[d] = symmetrize(&dp_k);
            dk[d][k] = dgain;
        }
    }
    Ok(dk)
}
