use nalgebra::{dmatrix, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::control::{equilibrium_input, CostWeights, HorizonConvention, MpcHorizon, NmpcOptions};
use crate::ioc::IocConfig;
use crate::linalg;
use crate::systems::{LinearSystem, OperatingPoint, PendulumParams, Plant};

/// Plant under study, tagged by kind: `{"lti": {"a": .., "b": ..}}` or
/// `{"pendulum": {"m": .., ...}}` (missing pendulum fields take the
/// reference values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSpec {
    Lti(LinearSystem),
    Pendulum(PendulumParams),
}

impl PlantSpec {
    pub fn id(&self) -> &'static str {
        match self {
            PlantSpec::Lti(_) => "lti",
            PlantSpec::Pendulum(_) => "pendulum",
        }
    }

    pub fn plant(&self) -> &dyn Plant {
        match self {
            PlantSpec::Lti(sys) => sys,
            PlantSpec::Pendulum(p) => p,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.plant().state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.plant().input_dim()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        match self {
            PlantSpec::Lti(_) => Ok(()),
            PlantSpec::Pendulum(p) => p.validate().map_err(|e| DataError::Config(e.to_string())),
        }
    }
}

/// Controller that generates the closed-loop data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    /// Finite-horizon LQR over the whole trajectory length; its data is
    /// exactly explained by the inverse problem.
    Lqr {
        #[serde(with = "linalg::rows")]
        q: DMatrix<f64>,
        #[serde(with = "linalg::rows")]
        r: DMatrix<f64>,
    },
    /// Unconstrained receding-horizon MPC regulating an LTI plant to zero.
    Mpc {
        horizon: usize,
        #[serde(default)]
        convention: HorizonConvention,
        #[serde(with = "linalg::rows")]
        q: DMatrix<f64>,
        #[serde(with = "linalg::rows")]
        r: DMatrix<f64>,
    },
    /// NMPC tracking a perturbed equilibrium of the pendulum around
    /// `theta_bar`.
    Nmpc {
        horizon: usize,
        #[serde(default)]
        convention: HorizonConvention,
        #[serde(with = "linalg::rows")]
        q: DMatrix<f64>,
        #[serde(with = "linalg::rows")]
        r: DMatrix<f64>,
        #[serde(default)]
        theta_bar: f64,
        #[serde(default)]
        options: NmpcOptions,
    },
}

impl ControllerSpec {
    pub fn id(&self) -> String {
        match self {
            ControllerSpec::Lqr { .. } => "lqr".into(),
            ControllerSpec::Mpc { horizon, .. } => format!("mpc_t{horizon}"),
            ControllerSpec::Nmpc { horizon, .. } => format!("nmpc_t{horizon}"),
        }
    }

    pub fn weights(&self) -> Result<CostWeights, DataError> {
        let (q, r) = match self {
            ControllerSpec::Lqr { q, r } | ControllerSpec::Mpc { q, r, .. } | ControllerSpec::Nmpc { q, r, .. } => {
                (q, r)
            }
        };
        CostWeights::new(q.clone(), r.clone()).map_err(|e| DataError::Config(format!("controller weights: {e}")))
    }

    pub fn horizon(&self) -> Option<MpcHorizon> {
        match self {
            ControllerSpec::Lqr { .. } => None,
            ControllerSpec::Mpc {
                horizon, convention, ..
            }
            | ControllerSpec::Nmpc {
                horizon, convention, ..
            } => Some(MpcHorizon {
                length: *horizon,
                convention: *convention,
            }),
        }
    }

    /// Equilibrium the controller regulates to, for controllers that track a
    /// nonzero reference.
    pub fn operating_point(&self, plant: &PlantSpec) -> Option<OperatingPoint> {
        match (self, plant) {
            (ControllerSpec::Nmpc { theta_bar, .. }, PlantSpec::Pendulum(p)) => Some(OperatingPoint::new(
                DVector::from_vec(vec![*theta_bar, 0.0]),
                DVector::from_element(1, equilibrium_input(p, *theta_bar)),
            )),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of trajectories `M`.
    pub trajectories: usize,
    /// Samples per trajectory `N`.
    pub samples: usize,
    /// `[lower, upper]` per state dimension for the uniform initial states.
    pub initial_bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub noise_std: f64,
    /// Standard deviation of the per-step reference angle perturbation (NMPC
    /// only).
    #[serde(default)]
    pub reference_std: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub ioc: IocConfig,
}

impl ExperimentConfig {
    /// Parses a config, rejecting unknown keys.
    pub fn from_json(text: &str, context: &str) -> Result<Self, DataError> {
        let cfg: Self = super::parse_json_strict(text, context)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), DataError> {
        self.plant.validate()?;
        let (n, m) = (self.plant.state_dim(), self.plant.input_dim());
        let w = self.controller.weights()?;
        if w.n() != n || w.m() != m {
            return Err(DataError::Config(format!(
                "controller weights are {}x{} / {}x{}, plant has {n} states and {m} inputs",
                w.n(),
                w.n(),
                w.m(),
                w.m()
            )));
        }
        match (&self.plant, &self.controller) {
            (PlantSpec::Lti(_), ControllerSpec::Lqr { .. } | ControllerSpec::Mpc { .. }) => {}
            (PlantSpec::Pendulum(_), ControllerSpec::Nmpc { theta_bar, .. }) => {
                if !theta_bar.is_finite() {
                    return Err(DataError::Config("theta_bar must be finite".into()));
                }
            }
            (plant, controller) => {
                return Err(DataError::Config(format!(
                    "controller {} is not supported for plant {}",
                    controller.id(),
                    plant.id()
                )))
            }
        }
        if let Some(h) = self.controller.horizon() {
            let min = match h.convention {
                HorizonConvention::PredictedStates => 1,
                HorizonConvention::Samples => 2,
            };
            if h.length < min {
                return Err(DataError::Config(format!("horizon must be >= {min}, got {}", h.length)));
            }
        }
        let s = &self.sampling;
        if s.trajectories == 0 {
            return Err(DataError::Config("sampling.trajectories must be >= 1".into()));
        }
        if s.samples < 2 {
            return Err(DataError::Config(format!(
                "sampling.samples must be >= 2, got {}",
                s.samples
            )));
        }
        check_bounds(&s.initial_bounds, n)?;
        for (name, v) in [("noise_std", s.noise_std), ("reference_std", s.reference_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DataError::Config(format!(
                    "sampling.{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        self.ioc.validate(m).map_err(|e| DataError::Config(e.to_string()))?;
        Ok(())
    }

    /// Second-order LTI plant `A = [[1, 1], [-0.5, 1]]`, `B = 0.5 I` under MPC
    /// with `Q = diag(0.3, 0.1)`, `R = I`; 30 trajectories of 30 samples from
    /// `[-2, 2]²` with measurement noise 0.01.
    pub fn lti_mpc(horizon: usize, seed: u64) -> Self {
        Self {
            plant: PlantSpec::Lti(
                LinearSystem::new(dmatrix![1.0, 1.0; -0.5, 1.0], dmatrix![0.5, 0.0; 0.0, 0.5]).expect("valid system"),
            ),
            controller: ControllerSpec::Mpc {
                horizon,
                convention: HorizonConvention::PredictedStates,
                q: dmatrix![0.3, 0.0; 0.0, 0.1],
                r: DMatrix::identity(2, 2),
            },
            sampling: SamplingConfig {
                trajectories: 30,
                samples: 30,
                initial_bounds: vec![[-2.0, 2.0]; 2],
                noise_std: 0.01,
                reference_std: 0.0,
                seed,
            },
            ioc: IocConfig {
                seed,
                ..Default::default()
            },
        }
    }

    /// Reference pendulum under NMPC with horizon 5, `Q = diag(1000, 100)`,
    /// `R = 1`, tracking `theta_bar` perturbed by N(0, 0.05²) each step; 30
    /// trajectories of 50 noiseless samples from
    /// `[theta_bar - 0.3, theta_bar + 0.3] x [-0.3, 0.3]`. The explanation is
    /// normalized to `R = 1`.
    pub fn pendulum_nmpc(theta_bar: f64, seed: u64) -> Self {
        Self {
            plant: PlantSpec::Pendulum(PendulumParams::default()),
            controller: ControllerSpec::Nmpc {
                horizon: 5,
                convention: HorizonConvention::PredictedStates,
                q: dmatrix![1000.0, 0.0; 0.0, 100.0],
                r: dmatrix![1.0],
                theta_bar,
                options: NmpcOptions::default(),
            },
            sampling: SamplingConfig {
                trajectories: 30,
                samples: 50,
                initial_bounds: vec![[theta_bar - 0.3, theta_bar + 0.3], [-0.3, 0.3]],
                noise_std: 0.0,
                reference_std: 0.05,
                seed,
            },
            ioc: IocConfig {
                normalization: crate::ioc::Normalization::FixRScalar,
                seed,
                ..Default::default()
            },
        }
    }
}

pub(crate) fn check_bounds(bounds: &[[f64; 2]], n: usize) -> Result<(), DataError> {
    if bounds.len() != n {
        return Err(DataError::Config(format!(
            "initial_bounds has {} intervals, plant has {n} states",
            bounds.len()
        )));
    }
    for (i, [lo, hi]) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(DataError::Config(format!(
                "initial_bounds[{i}] = [{lo}, {hi}] is not a finite interval"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for cfg in [
            ExperimentConfig::lti_mpc(10, 3),
            ExperimentConfig::lti_mpc(5, 3),
            ExperimentConfig::pendulum_nmpc(0.0, 1),
            ExperimentConfig::pendulum_nmpc(std::f64::consts::FRAC_PI_2, 1),
        ] {
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json(), "preset").unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = r#"{
            "plant": {"pendulum": {}},
            "controller": {"nmpc": {"horizon": 5, "q": [[1000, 0], [0, 100]], "r": [[1]]}},
            "sampling": {"trajectories": 2, "samples": 5, "initial_bounds": [[-0.1, 0.1], [0, 0]]}
        }"#;
        let cfg = ExperimentConfig::from_json(text, "cfg").unwrap();
        assert_eq!(cfg.plant, PlantSpec::Pendulum(PendulumParams::default()));
        assert_eq!(cfg.ioc, IocConfig::default());
        assert_eq!(cfg.controller.id(), "nmpc_t5");
    }

    #[test]
    fn rejects_unknown_keys_and_inconsistent_values() {
        let mut v = serde_json::to_value(ExperimentConfig::lti_mpc(10, 0)).unwrap();
        v["sampling"]["bogus"] = 1.into();
        v["extra"] = true.into();
        let err = ExperimentConfig::from_json(&v.to_string(), "cfg").unwrap_err();
        let DataError::UnknownKeys { keys, .. } = err else {
            panic!("expected unknown keys, got {err:?}")
        };
        assert!(keys.contains(&"sampling.bogus".to_string()) && keys.contains(&"extra".to_string()));

        let mut cfg = ExperimentConfig::lti_mpc(10, 0);
        cfg.sampling.trajectories = 0;
        assert!(matches!(cfg.validate(), Err(DataError::Config(_))));
        let mut cfg = ExperimentConfig::lti_mpc(10, 0);
        cfg.sampling.initial_bounds = vec![[1.0, -1.0], [0.0, 1.0]];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::lti_mpc(10, 0);
        cfg.sampling.initial_bounds.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::pendulum_nmpc(0.0, 0);
        cfg.plant = ExperimentConfig::lti_mpc(10, 0).plant;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::lti_mpc(10, 0);
        cfg.ioc.normalization = crate::ioc::Normalization::FixRScalar;
        assert!(cfg.validate().is_err());
    }
}
