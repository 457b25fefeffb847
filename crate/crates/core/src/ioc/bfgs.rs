use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step decreases the objective by less than this
    /// fraction of its previous value.
    pub objective_tolerance: f64,
    pub gradient_tolerance: f64,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            objective_tolerance: 1e-12,
            gradient_tolerance: 1e-9,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Last relative decrease was below the objective tolerance, or the
    /// gradient vanished.
    pub converged: bool,
}

/// Quasi-Newton minimization with an inverse-Hessian BFGS update and
/// backtracking Armijo line search.
///
/// `eval` returns the value and gradient, or `None` where the objective is
/// undefined; the line search treats such points as infinitely bad.
/// Returns `None` if the starting point itself is undefined.
pub fn minimize<F>(mut eval: F, x0: DVector<f64>, opts: &BfgsOptions) -> Option<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let dim = x0.len();
    let (mut f, mut g) = eval(&x0).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite()))?;
    let mut x = x0;
    let mut h_inv = DMatrix::<f64>::identity(dim, dim);
    let mut fresh = true;

    for iteration in 0..opts.max_iterations {
        let gnorm = g.norm();
        if gnorm < opts.gradient_tolerance {
            return Some(BfgsOutcome {
                x,
                value: f,
                gradient_norm: gnorm,
                iterations: iteration,
                converged: true,
            });
        }

        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h_inv = DMatrix::identity(dim, dim);
            fresh = true;
            dir = -g.clone();
            slope = -g.norm_squared();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = &x + step * &dir;
            if let Some((ft, gt)) = eval(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + opts.armijo_slope * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= opts.backtrack_factor;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if !fresh {
                // Retry once from steepest descent before giving up.
                h_inv = DMatrix::identity(dim, dim);
                fresh = true;
                continue;
            }
            return Some(BfgsOutcome {
                x,
                value: f,
                gradient_norm: gnorm,
                iterations: iteration + 1,
                converged: true,
            });
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let decrease = f - f_new;
        let reference = f.abs();
        x = x_new;
        f = f_new;
        g = g_new;

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h_inv *= sy / y.norm_squared();
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(dim, dim);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
            fresh = false;
        }

        if decrease < opts.objective_tolerance * reference {
            return Some(BfgsOutcome {
                x,
                value: f,
                gradient_norm: g.norm(),
                iterations: iteration + 1,
                converged: true,
            });
        }
    }
    Some(BfgsOutcome {
        gradient_norm: g.norm(),
        x,
        value: f,
        iterations: opts.max_iterations,
        converged: false,
    })
}
