use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bfgs::{minimize, BfgsOptions};
use super::objective::{ioc_gradient, ioc_objective, squared_errors};
use super::param::Parameterization;
use super::IocError;
use crate::control::CostWeights;
use crate::linalg;
use crate::rng::{Stream, StreamId};
use crate::systems::{LinearSystem, Trajectory};

/// Sparsity imposed on the recovered `Q` and `R`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    #[default]
    Full,
    Diagonal,
}

/// How the scale ambiguity `(Q, R) ~ (alpha Q, alpha R)` is resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `trace(R) = m`.
    #[default]
    TraceR,
    /// `R = 1`; scalar inputs only.
    FixRScalar,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    FiniteDifference,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IocConfig {
    pub structure: Structure,
    pub normalization: Normalization,
    pub restarts: usize,
    pub max_iterations: usize,
    pub objective_tolerance: f64,
    pub gradient_tolerance: f64,
    pub gradient_mode: GradientMode,
    pub seed: u64,
}

impl Default for IocConfig {
    fn default() -> Self {
        Self {
            structure: Structure::Full,
            normalization: Normalization::TraceR,
            restarts: 4,
            max_iterations: 500,
            objective_tolerance: 1e-12,
            gradient_tolerance: 1e-9,
            gradient_mode: GradientMode::FiniteDifference,
            seed: 0,
        }
    }
}

impl IocConfig {
    pub fn validate(&self, input_dim: usize) -> Result<(), IocError> {
        if self.restarts == 0 {
            return Err(IocError::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(IocError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("objective_tolerance", self.objective_tolerance),
            ("gradient_tolerance", self.gradient_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(IocError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.normalization == Normalization::FixRScalar && input_dim != 1 {
            return Err(IocError::Normalization(format!(
                "fix_r_scalar requires a scalar input, plant has {input_dim}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IocResult {
    #[serde(with = "linalg::rows")]
    pub q_hat: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub r_hat: DMatrix<f64>,
    /// Mean squared state reconstruction error at `(q_hat, r_hat)`.
    pub objective: f64,
    /// `sqrt(sum_{k>=1} |x_d(k) - x(k)|² / ((N - 1) n))` per trajectory.
    pub per_trajectory_rmse: Vec<f64>,
    /// BFGS iterations of the returned restart.
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

impl IocResult {
    pub fn weights(&self) -> CostWeights {
        CostWeights::new(self.q_hat.clone(), self.r_hat.clone()).expect("IOC result weights are valid")
    }

    /// RMS state error over every trajectory, sample and component.
    pub fn fit_rmse(&self) -> f64 {
        let n = self.per_trajectory_rmse.len() as f64;
        (self.per_trajectory_rmse.iter().map(|r| r * r).sum::<f64>() / n).sqrt()
    }
}

/// Rescales `(Q, R)` so the normalization constraint holds.
pub fn normalize_weights(w: &CostWeights, mode: Normalization) -> Result<CostWeights, IocError> {
    let alpha = match mode {
        Normalization::TraceR => w.r().trace() / w.m() as f64,
        Normalization::FixRScalar => {
            if w.m() != 1 {
                return Err(IocError::Normalization(format!(
                    "fix_r_scalar requires a scalar input, got {}x{} R",
                    w.m(),
                    w.m()
                )));
            }
            w.r()[(0, 0)]
        }
    };
    let q = w.q() / alpha;
    let mut r = w.r() / alpha;
    if mode == Normalization::FixRScalar {
        r[(0, 0)] = 1.0;
    }
    Ok(CostWeights::new(q, r)?)
}

struct Candidate {
    theta: DVector<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Fits `(Q, R)` to the measured trajectories; see the module docs.
///
/// Runs `cfg.restarts` quasi-Newton descents over the Cholesky factors
/// (the first from identity factors, the rest from seeded Gaussian
/// perturbations of identity with standard deviation 0.3), keeps the lowest
/// objective, and normalizes it.
pub fn solve_ioc(sys: &LinearSystem, data: &[Trajectory], cfg: &IocConfig) -> Result<IocResult, IocError> {
    if data.is_empty() {
        return Err(IocError::EmptyDataset);
    }
    cfg.validate(sys.m())?;
    let param = Parameterization::new(sys.n(), sys.m(), cfg.structure);
    // Surface dimension errors before optimizing.
    {
        let (q, r) = param.weights(&param.identity());
        ioc_objective(sys, &CostWeights::new(q, r)?, data)?;
    }

    let value_at = |theta: &DVector<f64>| -> Option<f64> {
        let (q, r) = param.weights(theta);
        let w = CostWeights::new(q, r).ok()?;
        ioc_objective(sys, &w, data).ok().filter(|v| v.is_finite())
    };
    let eval = |theta: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let value = value_at(theta)?;
        let grad = match cfg.gradient_mode {
            GradientMode::Analytic => {
                let (q, r) = param.weights(theta);
                let w = CostWeights::new(q, r).ok()?;
                DVector::from_vec(ioc_gradient(sys, &w, data, &param.directions(theta)).ok()?)
            }
            GradientMode::FiniteDifference => {
                let mut g = DVector::zeros(theta.len());
                for i in 0..theta.len() {
                    let h = 1e-6 * theta[i].abs().max(1.0);
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[i] += h;
                    tm[i] -= h;
                    g[i] = (value_at(&tp)? - value_at(&tm)?) / (2.0 * h);
                }
                g
            }
        };
        Some((value, grad))
    };

    let opts = BfgsOptions {
        max_iterations: cfg.max_iterations,
        objective_tolerance: cfg.objective_tolerance,
        gradient_tolerance: cfg.gradient_tolerance,
        ..Default::default()
    };
    let mut restarts = Stream::new(cfg.seed, StreamId::Restarts);
    let mut best: Option<Candidate> = None;
    for restart in 0..cfg.restarts {
        let mut theta0 = param.identity();
        if restart > 0 {
            for v in theta0.iter_mut() {
                *v += 0.3 * restarts.standard_normal();
            }
        }
        let Some(out) = minimize(eval, theta0, &opts) else {
            continue;
        };
        let better = best.as_ref().is_none_or(|b| out.value < b.value);
        if better {
            best = Some(Candidate {
                theta: out.x,
                value: out.value,
                iterations: out.iterations,
                converged: out.converged,
            });
        }
    }
    let best = best.ok_or(IocError::AllRestartsDiverged { restarts: cfg.restarts })?;

    let (q, r) = param.weights(&best.theta);
    let raw = CostWeights::new(linalg::symmetrize(&q), linalg::symmetrize(&r))?;
    let w = normalize_weights(&raw, cfg.normalization)?;
    let errors = squared_errors(sys, &w, data)?;
    let objective = errors.iter().sum::<f64>() / errors.len() as f64;
    let per_trajectory_rmse = errors
        .iter()
        .zip(data)
        .map(|(e, t)| (e / ((t.len() - 1) * sys.n()) as f64).sqrt())
        .collect();
    let constraints_ok = linalg::min_eigenvalue(w.q()) >= -1e-10
        && linalg::min_eigenvalue(w.r()) > 0.0
        && normalization_residual(&w, cfg.normalization) < 1e-9;

    Ok(IocResult {
        q_hat: w.q().clone(),
        r_hat: w.r().clone(),
        objective,
        per_trajectory_rmse,
        iterations: best.iterations,
        restarts_used: cfg.restarts,
        converged: best.converged && constraints_ok,
    })
}

fn normalization_residual(w: &CostWeights, mode: Normalization) -> f64 {
    match mode {
        Normalization::TraceR => (w.r().trace() - w.m() as f64).abs(),
        Normalization::FixRScalar => (w.r()[(0, 0)] - 1.0).abs(),
    }
}
