use nalgebra::DMatrix;

use super::{LinearSystem, SystemError, Trajectory};

/// Relative singular-value threshold below which the regressor is deemed
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least-squares fit of `x(k+1) ≈ A x(k) + B u(k)` over every
/// consecutive pair of every trajectory.
pub fn estimate_linear_system(trajectories: &[Trajectory]) -> Result<LinearSystem, SystemError> {
    let first = trajectories.first().ok_or(SystemError::EmptyDataset)?;
    let (n, m) = (first.state_dim(), first.input_dim());
    for t in trajectories {
        if t.state_dim() != n || t.input_dim() != m {
            return Err(SystemError::InvalidTrajectory(
                "trajectories have inconsistent dimensions".into(),
            ));
        }
    }

    let rows: usize = trajectories.iter().map(|t| t.len() - 1).sum();
    let mut phi = DMatrix::zeros(rows, n + m);
    let mut next = DMatrix::zeros(rows, n);
    let mut r = 0;
    for t in trajectories {
        for k in 0..t.len() - 1 {
            let (x, u) = (&t.states()[k], &t.inputs()[k]);
            for j in 0..n {
                phi[(r, j)] = x[j];
                next[(r, j)] = t.states()[k + 1][j];
            }
            for j in 0..m {
                phi[(r, n + j)] = u[j];
            }
            r += 1;
        }
    }

    let svd = phi.svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.max();
    let threshold = RANK_TOL * largest;
    let rank = sv.iter().filter(|&&s| largest > 0.0 && s >= threshold).count();
    if rank < n + m {
        return Err(SystemError::Identifiability { rank, required: n + m });
    }
    let theta = svd
        .solve(&next, threshold)
        .map_err(|e| SystemError::InvalidParameter(e.to_string()))?;
    let ab = theta.transpose();
    LinearSystem::new(ab.columns(0, n).into_owned(), ab.columns(n, m).into_owned())
}
