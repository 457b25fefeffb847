use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{riccati_solve, ControlError, CostWeights};
use crate::systems::{LinearSystem, Policy, PolicyError};

/// How an MPC prediction horizon `T` is turned into a sample count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonConvention {
    /// `T` decision inputs `u(0..T-1)` and `T` penalized predicted states
    /// `x(1..T)`: a schedule over `T + 2` samples.
    #[default]
    PredictedStates,
    /// `T` samples including the current state: stage costs over
    /// `k = 0..T-2`, so only `T - 2` inputs influence a penalized state.
    Samples,
}

/// MPC prediction horizon together with its counting convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcHorizon {
    pub length: usize,
    #[serde(default)]
    pub convention: HorizonConvention,
}

impl MpcHorizon {
    pub fn new(length: usize) -> Self {
        Self {
            length,
            convention: HorizonConvention::PredictedStates,
        }
    }

    pub fn samples(length: usize) -> Self {
        Self {
            length,
            convention: HorizonConvention::Samples,
        }
    }

    /// Number of samples `H` of the underlying finite-horizon problem.
    pub fn sample_count(&self) -> usize {
        match self.convention {
            HorizonConvention::PredictedStates => self.length + 2,
            HorizonConvention::Samples => self.length,
        }
    }

    pub(crate) fn validate(&self) -> Result<usize, ControlError> {
        let min = match self.convention {
            HorizonConvention::PredictedStates => 1,
            HorizonConvention::Samples => 2,
        };
        if self.length < min {
            return Err(ControlError::InvalidHorizon(self.length));
        }
        Ok(self.sample_count())
    }
}

/// Static feedback `u = -K y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFeedback {
    pub gain: DMatrix<f64>,
}

impl LinearFeedback {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.gain * x)
    }
}

impl Policy for LinearFeedback {
    fn control(&mut self, _k: usize, y: &DVector<f64>) -> Result<DVector<f64>, PolicyError> {
        Ok(self.apply(y))
    }
}

/// Unconstrained receding-horizon MPC regulating an LTI plant to zero.
///
/// Re-solving the same LQ problem at every step and applying its first input
/// is the static gain `K(0)` of the finite-horizon schedule.
pub fn mpc_policy_lti(
    sys: &LinearSystem,
    w: &CostWeights,
    horizon: MpcHorizon,
) -> Result<LinearFeedback, ControlError> {
    let samples = horizon.validate()?;
    let schedule = riccati_solve(sys, w, samples)?;
    Ok(LinearFeedback {
        gain: schedule.gains[0].clone(),
    })
}
