//! Datasets, experiment configs, deterministic sampling and persistence.
//!
//! File formats:
//!
//! - Dataset JSON bundle: `{"meta": {...}, "trajectories": [{"states":
//!   [[...]], "inputs": [[...]]}]}`. Floats are written in their shortest
//!   round-trip form, so save followed by load is exact.
//! - Trajectory CSV: header `traj_id,k,x0..x{n-1},u0..u{m-1}`, one row per
//!   sample, `k` 0-based, input cells of the final sample of each trajectory
//!   empty, values with 17 significant digits. The metadata lives in a
//!   sidecar `<file>.meta.json`.
//! - Experiment config JSON: top-level keys `plant`, `controller`,
//!   `sampling`, `ioc`. Unknown keys anywhere are rejected, all listed.

mod config;
mod dataset;
mod generate;
mod persist;

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::control::ControlError;
use crate::systems::SystemError;

pub use config::{ControllerSpec, ExperimentConfig, PlantSpec, SamplingConfig};
pub use dataset::{to_deviation_coordinates, Dataset, DatasetMeta};
pub use generate::{generate_dataset, sample_initial_conditions};
pub use persist::{load_dataset, save_dataset, DatasetFormat};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{context}: unknown keys: {}", keys.join(", "))]
    UnknownKeys { context: String, keys: Vec<String> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("trajectory {trajectory}: {source}")]
    Simulation {
        trajectory: usize,
        #[source]
        source: SystemError,
    },
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Parses JSON, rejecting any key the target type does not know.
///
/// `context` names the input in error messages (usually the file path).
pub fn parse_json_strict<T: DeserializeOwned>(text: &str, context: &str) -> Result<T, DataError> {
    let parse_error = |e: serde_json::Error| DataError::Parse {
        context: context.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let mut unknown = Vec::new();
    let value = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string())).map_err(parse_error)?;
    de.end().map_err(parse_error)?;
    if !unknown.is_empty() {
        return Err(DataError::UnknownKeys {
            context: context.to_string(),
            keys: unknown,
        });
    }
    Ok(value)
}
