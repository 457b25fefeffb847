use nalgebra::DVector;

use super::{check_len, Plant, SystemError, Trajectory};
use crate::linalg::vec_all_finite;
use crate::rng::{Stream, StreamId};

pub type PolicyError = Box<dyn std::error::Error + Send + Sync>;

/// A state-feedback law fed with measured states.
pub trait Policy {
    /// Called once before each closed-loop run.
    fn reset(&mut self) {}

    fn control(&mut self, k: usize, measurement: &DVector<f64>) -> Result<DVector<f64>, PolicyError>;
}

/// Always applies the zero input.
#[derive(Clone, Debug)]
pub struct ZeroPolicy {
    pub input_dim: usize,
}

impl Policy for ZeroPolicy {
    fn control(&mut self, _k: usize, _y: &DVector<f64>) -> Result<DVector<f64>, PolicyError> {
        Ok(DVector::zeros(self.input_dim))
    }
}

/// Adapts a closure `(k, y) -> u` into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: FnMut(usize, &DVector<f64>) -> DVector<f64>,
{
    fn control(&mut self, k: usize, y: &DVector<f64>) -> Result<DVector<f64>, PolicyError> {
        Ok((self.0)(k, y))
    }
}

/// Rolls `plant` forward `n - 1` steps under `policy`.
///
/// The plant state evolves without noise. Each recorded state is the
/// measurement `y(k) = x(k) + e(k)` with `e(k) ~ N(0, noise_std² I)` drawn
/// from the measurement-noise stream keyed by `seed`, and the policy is fed
/// that same measurement.
pub fn simulate_closed_loop(
    plant: &dyn Plant,
    policy: &mut dyn Policy,
    x0: &DVector<f64>,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Trajectory, SystemError> {
    check_len("initial state", plant.state_dim(), x0.len())?;
    if n < 2 {
        return Err(SystemError::InvalidParameter(format!("horizon must be >= 2, got {n}")));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(SystemError::InvalidParameter(format!(
            "noise_std must be finite and >= 0, got {noise_std}"
        )));
    }
    if !vec_all_finite(x0) {
        return Err(SystemError::Divergence { step: 0 });
    }

    let mut noise = Stream::new(seed, StreamId::MeasurementNoise);
    let mut measure = |x: &DVector<f64>| x.map(|xi| xi + noise_std * noise.standard_normal());

    policy.reset();
    let mut states = Vec::with_capacity(n);
    let mut inputs = Vec::with_capacity(n - 1);
    let mut x = x0.clone();
    let mut y = measure(&x);
    for k in 0..n - 1 {
        let u = policy
            .control(k, &y)
            .map_err(|source| SystemError::Policy { step: k, source })?;
        check_len("policy output", plant.input_dim(), u.len())?;
        x = plant.step(&x, &u);
        if !vec_all_finite(&x) || !vec_all_finite(&u) {
            return Err(SystemError::Divergence { step: k + 1 });
        }
        states.push(y);
        inputs.push(u);
        y = measure(&x);
    }
    states.push(y);
    Trajectory::new(states, inputs)
}
