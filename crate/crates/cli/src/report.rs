use std::path::Path;

use lqexplain::linalg;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{io_error, CliError};

/// Weights of the controller that generated the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    #[serde(with = "linalg::rows")]
    pub q_mpc: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub r_mpc: DMatrix<f64>,
}

/// RMS distance, over every trajectory, step `k >= 1` and state component,
/// between the measured states and the LQR closed loop started from the same
/// measured initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRmse {
    pub lqr_with_hat: f64,
    pub lqr_with_mpc_weights: f64,
}

/// Result of explaining one dataset. Matrices are row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment_id: String,
    #[serde(with = "linalg::rows")]
    pub q_hat: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub r_hat: DMatrix<f64>,
    pub baselines: Option<Baselines>,
    pub fit_rmse_vs_data: f64,
    pub comparison_rmse: ComparisonRmse,
    pub runtime_s: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| io_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Ok(lqexplain::data_io::parse_json_strict(
            &text,
            &path.display().to_string(),
        )?)
    }

    /// JSON with `runtime_s` removed, for run-to-run comparisons.
    pub fn without_runtime(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("runtime_s");
        v
    }
}
