use nalgebra::DVector;

use super::config::check_bounds;
use super::{ControllerSpec, DataError, Dataset, DatasetMeta, ExperimentConfig, PlantSpec};
use crate::control::{
    equilibrium_input, mpc_policy_lti, riccati_solve, NmpcController, ReferenceSignal, TimeVaryingFeedback,
};
use crate::rng::{Stream, StreamId};
use crate::systems::{simulate_closed_loop, PendulumParams, Policy, PolicyError, SystemError, Trajectory};

/// `count` i.i.d. uniform samples from the box `bounds`.
///
/// Sample `i` is drawn from its own stream keyed by `seed + i`, so a prefix
/// of the sequence does not depend on `count`.
pub fn sample_initial_conditions(bounds: &[[f64; 2]], count: usize, seed: u64) -> Result<Vec<DVector<f64>>, DataError> {
    if count == 0 {
        return Err(DataError::Config("sample count must be >= 1".into()));
    }
    if bounds.is_empty() {
        return Err(DataError::Config("bounds must have at least one dimension".into()));
    }
    check_bounds(bounds, bounds.len())?;
    Ok((0..count)
        .map(|i| {
            let mut s = Stream::for_trajectory(seed, i, StreamId::InitialConditions);
            DVector::from_iterator(bounds.len(), bounds.iter().map(|[lo, hi]| s.uniform_in(*lo, *hi)))
        })
        .collect())
}

/// NMPC on the pendulum with a reference angle redrawn every step.
struct PerturbedNmpc {
    params: PendulumParams,
    controller: NmpcController,
    theta_bar: f64,
    reference_std: f64,
    stream: Stream,
}

impl Policy for PerturbedNmpc {
    fn reset(&mut self) {
        self.controller.reset();
    }

    fn control(&mut self, _k: usize, y: &DVector<f64>) -> Result<DVector<f64>, PolicyError> {
        let theta_r = self.theta_bar + self.reference_std * self.stream.standard_normal();
        let reference = ReferenceSignal::constant(
            DVector::from_vec(vec![theta_r, 0.0]),
            DVector::from_element(1, equilibrium_input(&self.params, theta_r)),
        );
        Ok(self.controller.step(&self.params, y, &reference)?)
    }
}

/// Simulates the configured controller on the configured plant from each
/// sampled initial state.
///
/// Trajectory `i` uses the streams keyed by `seed + i` for its initial
/// state, measurement noise and reference perturbation. The NMPC warm start
/// is reset at the beginning of every trajectory.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let s = &cfg.sampling;
    let x0s = sample_initial_conditions(&s.initial_bounds, s.trajectories, s.seed)?;
    let weights = cfg.controller.weights()?;

    let mut trajectories = Vec::with_capacity(s.trajectories);
    for (i, x0) in x0s.iter().enumerate() {
        let key = s.seed.wrapping_add(i as u64);
        let sim = |policy: &mut dyn Policy| -> Result<Trajectory, SystemError> {
            simulate_closed_loop(cfg.plant.plant(), policy, x0, s.samples, s.noise_std, key)
        };
        let result = match (&cfg.plant, &cfg.controller) {
            (PlantSpec::Lti(sys), ControllerSpec::Lqr { .. }) => {
                let schedule = riccati_solve(sys, &weights, s.samples)?;
                sim(&mut TimeVaryingFeedback::new(schedule))
            }
            (PlantSpec::Lti(sys), ControllerSpec::Mpc { .. }) => {
                let horizon = cfg.controller.horizon().expect("mpc has a horizon");
                sim(&mut mpc_policy_lti(sys, &weights, horizon)?)
            }
            (PlantSpec::Pendulum(p), ControllerSpec::Nmpc { theta_bar, options, .. }) => {
                let horizon = cfg.controller.horizon().expect("nmpc has a horizon");
                sim(&mut PerturbedNmpc {
                    params: *p,
                    controller: NmpcController::new(weights.clone(), horizon, *options)?,
                    theta_bar: *theta_bar,
                    reference_std: s.reference_std,
                    stream: Stream::for_trajectory(s.seed, i, StreamId::ReferencePerturbation),
                })
            }
            _ => unreachable!("rejected by validate"),
        };
        trajectories.push(result.map_err(|source| DataError::Simulation { trajectory: i, source })?);
    }

    let meta = DatasetMeta {
        plant_id: cfg.plant.id().to_string(),
        controller_id: cfg.controller.id(),
        seed: s.seed,
        noise_std: s.noise_std,
        operating_point: None,
        created: None,
        plant: cfg.plant.clone(),
        controller: cfg.controller.clone(),
        state_dim: cfg.plant.state_dim(),
        input_dim: cfg.plant.input_dim(),
    };
    Dataset::new(meta, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{lqr_closed_loop, CostWeights};
    use crate::data_io::to_deviation_coordinates;
    use nalgebra::dmatrix;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn degenerate_bounds_and_determinism() {
        let xs = sample_initial_conditions(&[[1.5, 1.5], [-2.0, -2.0]], 5, 9).unwrap();
        assert!(xs.iter().all(|x| x[0] == 1.5 && x[1] == -2.0));
        let a = sample_initial_conditions(&[[-2.0, 2.0]; 2], 20, 9).unwrap();
        let b = sample_initial_conditions(&[[-2.0, 2.0]; 2], 20, 9).unwrap();
        assert_eq!(a, b);
        let prefix = sample_initial_conditions(&[[-2.0, 2.0]; 2], 5, 9).unwrap();
        assert_eq!(prefix[..], a[..5]);
        assert!(sample_initial_conditions(&[[-2.0, 2.0]], 0, 9).is_err());
        assert!(sample_initial_conditions(&[[2.0, -2.0]], 3, 9).is_err());
    }

    #[test]
    fn uniform_moments() {
        let xs = sample_initial_conditions(&[[-2.0, 2.0]; 2], 10_000, 1).unwrap();
        for d in 0..2 {
            let mean = xs.iter().map(|x| x[d]).sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((var - 4.0 / 3.0).abs() < 0.1, "var {var}");
            assert!(xs.iter().all(|x| (-2.0..2.0).contains(&x[d])));
        }
    }

    #[test]
    fn lti_mpc_shape() {
        let d = generate_dataset(&ExperimentConfig::lti_mpc(10, 7)).unwrap();
        assert_eq!(d.trajectories().len(), 30);
        for t in d.trajectories() {
            assert_eq!(t.states().len(), 30);
            assert_eq!(t.inputs().len(), 29);
        }
        assert_eq!(d.meta().controller_id, "mpc_t10");
        assert_eq!(d.meta().plant_id, "lti");
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = ExperimentConfig::lti_mpc(5, 11);
        let a = serde_json::to_string(&generate_dataset(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_dataset(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.sampling.seed = 12;
        assert_ne!(a, serde_json::to_string(&generate_dataset(&other).unwrap()).unwrap());
    }

    #[test]
    fn noiseless_lqr_matches_forward_problem() {
        let mut cfg = ExperimentConfig::lti_mpc(10, 2);
        cfg.controller = ControllerSpec::Lqr {
            q: dmatrix![0.3, 0.0; 0.0, 0.1],
            r: dmatrix![1.0, 0.0; 0.0, 1.0],
        };
        cfg.sampling.noise_std = 0.0;
        let d = generate_dataset(&cfg).unwrap();
        let PlantSpec::Lti(sys) = &cfg.plant else {
            unreachable!()
        };
        let w = CostWeights::new(dmatrix![0.3, 0.0; 0.0, 0.1], dmatrix![1.0, 0.0; 0.0, 1.0]).unwrap();
        for t in d.trajectories() {
            assert_eq!(&lqr_closed_loop(sys, &w, &t.states()[0], 30).unwrap(), t);
        }
    }

    #[test]
    fn pendulum_equilibrium_persists() {
        for theta_bar in [0.0, FRAC_PI_2] {
            let mut cfg = ExperimentConfig::pendulum_nmpc(theta_bar, 3);
            cfg.sampling.trajectories = 2;
            cfg.sampling.samples = 20;
            cfg.sampling.reference_std = 0.0;
            cfg.sampling.initial_bounds = vec![[theta_bar, theta_bar], [0.0, 0.0]];
            let d = generate_dataset(&cfg).unwrap();
            for x in d.trajectories().iter().flat_map(|t| t.states()) {
                assert!((x[0] - theta_bar).abs() < 1e-9 && x[1].abs() < 1e-9, "{x}");
            }
        }
    }

    #[test]
    fn horizontal_inputs_hover_near_equilibrium_input() {
        let cfg = ExperimentConfig::pendulum_nmpc(FRAC_PI_2, 5);
        let d = generate_dataset(&cfg).unwrap();
        let op = d.meta().nominal_operating_point().unwrap();
        assert!((op.u_bar[0] + 2.984202).abs() < 1e-6);
        let dev = to_deviation_coordinates(&d, &op).unwrap();
        let inputs: Vec<f64> = dev
            .trajectories()
            .iter()
            .flat_map(|t| t.inputs().iter().map(|u| u[0]))
            .collect();
        let mean = inputs.iter().sum::<f64>() / inputs.len() as f64;
        assert!(mean.abs() < 0.3, "mean input deviation {mean}");
    }

    #[test]
    fn divergence_names_trajectory() {
        let mut cfg = ExperimentConfig::lti_mpc(10, 0);
        // Zero state weight leaves the unstable plant uncontrolled.
        cfg.sampling.initial_bounds = vec![[1e300, 1e300], [1e300, 1e300]];
        cfg.controller = ControllerSpec::Mpc {
            horizon: 2,
            convention: Default::default(),
            q: dmatrix![0.0, 0.0; 0.0, 0.0],
            r: dmatrix![1.0, 0.0; 0.0, 1.0],
        };
        cfg.sampling.samples = 200;
        match generate_dataset(&cfg) {
            Err(DataError::Simulation {
                trajectory: 0,
                source: SystemError::Divergence { step },
            }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
