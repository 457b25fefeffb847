//! Direct solve of the stacked two-point boundary-value system.
//!
//! Independent of the Riccati sweep: every `x(1..N-1)` and `lambda(1..N-1)` is
//! an unknown of one dense linear system of size `2n(N-1)`, assembled from
//! the state equation, the costate recursion and `lambda(N-1) = 0`, and solved
//! by LU. Used to cross-check [`super::reconstruct_pmp_trajectory`].

use nalgebra::{DMatrix, DVector};

use super::IocError;
use crate::control::CostWeights;
use crate::rng::Stream;
use crate::systems::LinearSystem;

/// Random LQ problem for cross-checks: `n` in 1..=4, `m` in 1..=2, horizon
/// in 2..=40 samples. `A` is Gaussian rescaled to a spectral norm in
/// `[0.5, 1.1]` so the boundary-value system stays well conditioned; `Q` and
/// `R` are Gram matrices shifted by `0.1 I`; `x_bar` is uniform on `[-2, 2]^n`.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub system: LinearSystem,
    pub weights: CostWeights,
    pub x_bar: DVector<f64>,
    pub samples: usize,
}

pub fn random_instance(s: &mut Stream) -> RandomInstance {
    let pick = |s: &mut Stream, lo: usize, hi: usize| lo + (s.next_u64() % (hi - lo + 1) as u64) as usize;
    let n = pick(s, 1, 4);
    let m = pick(s, 1, 2);
    let samples = pick(s, 2, 40);
    let mut gauss = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| s.standard_normal());
    let a = gauss(n, n);
    let b = gauss(n, m);
    let lq = gauss(n, n);
    let lr = gauss(m, m);
    let norm = a.clone().svd(false, false).singular_values.max();
    let rho = s.uniform_in(0.5, 1.1);
    let a = if norm > 0.0 { a * (rho / norm) } else { a };
    let q = &lq * lq.transpose() + DMatrix::identity(n, n) * 0.1;
    let r = &lr * lr.transpose() + DMatrix::identity(m, m) * 0.1;
    RandomInstance {
        system: LinearSystem::new(a, b).expect("finite matrices"),
        weights: CostWeights::new(q, r).expect("positive definite weights"),
        x_bar: DVector::from_fn(n, |_, _| s.uniform_in(-2.0, 2.0)),
        samples,
    }
}

/// Solution of the boundary-value system: states, costates and inputs, all
/// 0-based. `lambdas[0]` is completed from the costate recursion at `k = 0`.
#[derive(Clone, Debug)]
pub struct BoundarySolution {
    pub states: Vec<DVector<f64>>,
    pub lambdas: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

pub fn solve_boundary_value(
    sys: &LinearSystem,
    w: &CostWeights,
    x_bar: &DVector<f64>,
    samples: usize,
) -> Result<BoundarySolution, IocError> {
    let n = sys.n();
    if samples < 2 {
        return Err(IocError::InvalidConfig(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let (a, b) = (sys.a(), sys.b());
    let r_inv = w.r().clone().try_inverse().ok_or(IocError::SingularBoundarySystem)?;
    let g = b * &r_inv * b.transpose();
    let steps = samples - 1;
    let dim = 2 * n * steps;
    let x_col = |k: usize| (k - 1) * n;
    let l_col = |k: usize| n * steps + (k - 1) * n;

    let mut lhs = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut row = 0;

    // x(k+1) - A x(k) + G lambda(k+1) = 0, k = 0..N-2
    for k in 0..steps {
        for i in 0..n {
            lhs[(row + i, x_col(k + 1) + i)] += 1.0;
            for j in 0..n {
                lhs[(row + i, l_col(k + 1) + j)] += g[(i, j)];
                if k == 0 {
                    rhs[row + i] += a[(i, j)] * x_bar[j];
                } else {
                    lhs[(row + i, x_col(k) + j)] -= a[(i, j)];
                }
            }
        }
        row += n;
    }
    // lambda(k) - A' lambda(k+1) - Q x(k) = 0, k = 1..N-2
    for k in 1..steps {
        for i in 0..n {
            lhs[(row + i, l_col(k) + i)] += 1.0;
            for j in 0..n {
                lhs[(row + i, l_col(k + 1) + j)] -= a[(j, i)];
                lhs[(row + i, x_col(k) + j)] -= w.q()[(i, j)];
            }
        }
        row += n;
    }
    // lambda(N-1) = 0
    for i in 0..n {
        lhs[(row + i, l_col(steps) + i)] = 1.0;
    }
    row += n;
    debug_assert_eq!(row, dim);

    let z = lhs.lu().solve(&rhs).ok_or(IocError::SingularBoundarySystem)?;
    let mut states = vec![x_bar.clone()];
    let mut lambdas = vec![DVector::zeros(n)];
    for k in 1..samples {
        states.push(z.rows(x_col(k), n).into_owned());
        lambdas.push(z.rows(l_col(k), n).into_owned());
    }
    lambdas[0] = a.transpose() * &lambdas[1] + w.q() * x_bar;
    let inputs = (0..steps)
        .map(|k| -(&r_inv * b.transpose() * &lambdas[k + 1]))
        .collect();
    Ok(BoundarySolution {
        states,
        lambdas,
        inputs,
    })
}
