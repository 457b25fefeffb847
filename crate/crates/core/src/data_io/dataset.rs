use serde::{Deserialize, Serialize};

use super::{ControllerSpec, DataError, PlantSpec};
use crate::systems::{OperatingPoint, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub plant_id: String,
    pub controller_id: String,
    pub seed: u64,
    pub noise_std: f64,
    /// `Some(op)` when the samples are deviations `x - op.x_bar`,
    /// `u - op.u_bar` from the operating point.
    pub operating_point: Option<OperatingPoint>,
    /// Creation time (RFC 3339); `None` for datasets built in memory.
    pub created: Option<String>,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub state_dim: usize,
    pub input_dim: usize,
}

impl DatasetMeta {
    /// Equilibrium the generating controller regulates to, in absolute
    /// coordinates.
    pub fn nominal_operating_point(&self) -> Option<OperatingPoint> {
        self.controller.operating_point(&self.plant)
    }
}

/// `M >= 1` trajectories sharing state and input dimensions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    meta: DatasetMeta,
    trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, trajectories: Vec<Trajectory>) -> Result<Self, DataError> {
        if trajectories.is_empty() {
            return Err(DataError::Validation("dataset has no trajectories".into()));
        }
        if meta.state_dim != meta.plant.state_dim() || meta.input_dim != meta.plant.input_dim() {
            return Err(DataError::Validation(format!(
                "meta declares {} states and {} inputs, plant {} has {} and {}",
                meta.state_dim,
                meta.input_dim,
                meta.plant_id,
                meta.plant.state_dim(),
                meta.plant.input_dim()
            )));
        }
        for (i, t) in trajectories.iter().enumerate() {
            if t.state_dim() != meta.state_dim || t.input_dim() != meta.input_dim {
                return Err(DataError::Validation(format!(
                    "traj_id {i}: {} states and {} inputs per sample, meta declares {} and {}",
                    t.state_dim(),
                    t.input_dim(),
                    meta.state_dim,
                    meta.input_dim
                )));
            }
        }
        if let Some(op) = &meta.operating_point {
            if op.x_bar.len() != meta.state_dim || op.u_bar.len() != meta.input_dim {
                return Err(DataError::Validation(
                    "operating point dimensions do not match meta".into(),
                ));
            }
        }
        Ok(Self { meta, trajectories })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut DatasetMeta {
        &mut self.meta
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn into_parts(self) -> (DatasetMeta, Vec<Trajectory>) {
        (self.meta, self.trajectories)
    }

    /// Same dataset expressed as deviations from its nominal operating
    /// point; unchanged if it is already in deviation coordinates or the
    /// controller has no operating point.
    pub fn in_deviation_coordinates(&self) -> Result<Dataset, DataError> {
        match (&self.meta.operating_point, self.meta.nominal_operating_point()) {
            (None, Some(op)) => to_deviation_coordinates(self, &op),
            _ => Ok(self.clone()),
        }
    }
}

/// Subtracts `(op.x_bar, op.u_bar)` from every sample.
///
/// Transforms compose: the recorded operating point becomes the sum of the
/// previous one (if any) and `op`, so applying `op.negated()` afterwards
/// restores the samples.
pub fn to_deviation_coordinates(data: &Dataset, op: &OperatingPoint) -> Result<Dataset, DataError> {
    let (n, m) = (data.meta.state_dim, data.meta.input_dim);
    if op.x_bar.len() != n || op.u_bar.len() != m {
        return Err(DataError::Validation(format!(
            "operating point has {} states and {} inputs, dataset has {n} and {m}",
            op.x_bar.len(),
            op.u_bar.len()
        )));
    }
    let (dx, du) = (-&op.x_bar, -&op.u_bar);
    let trajectories = data.trajectories.iter().map(|t| t.offset(&dx, &du)).collect();
    let mut meta = data.meta.clone();
    meta.operating_point = Some(match &data.meta.operating_point {
        Some(prev) => OperatingPoint::new(&prev.x_bar + &op.x_bar, &prev.u_bar + &op.u_bar),
        None => op.clone(),
    });
    Ok(Dataset { meta, trajectories })
}

#[derive(Deserialize)]
pub(crate) struct RawDataset {
    pub meta: DatasetMeta,
    pub trajectories: Vec<Trajectory>,
}
