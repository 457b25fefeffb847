use nalgebra::{dmatrix, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinearSystem, Plant, SystemError};

/// Inverted pendulum in discrete time. State is `(theta, omega)` in rad and
/// rad/s, input is a torque in N·m. `theta = 0` is the upright position.
///
/// Defaults are the reference laboratory pendulum: 0.676 kg, 0.45 m,
/// damping 0.1 N·m·s, sampled at 20 ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    /// Mass, kg.
    pub m: f64,
    /// Gravity, m/s².
    pub g: f64,
    /// Length, m.
    pub l: f64,
    /// Damping, N·m·s.
    pub d: f64,
    /// Sample time, s.
    pub tau: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m: 0.676,
            g: 9.81,
            l: 0.45,
            d: 0.1,
            tau: 0.02,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), SystemError> {
        for (name, v) in [
            ("m", self.m),
            ("g", self.g),
            ("l", self.l),
            ("d", self.d),
            ("tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SystemError::InvalidParameter(format!(
                    "pendulum parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `tau * g / l`, the gravity coupling per step.
    pub fn gravity_gain(&self) -> f64 {
        self.tau * self.g / self.l
    }

    /// `1 - tau * d / (m l²)`, the per-step speed retention.
    pub fn damping_factor(&self) -> f64 {
        1.0 - self.tau * self.d / self.inertia()
    }

    /// `tau / (m l²)`, the torque-to-speed gain.
    pub fn input_gain(&self) -> f64 {
        self.tau / self.inertia()
    }

    fn inertia(&self) -> f64 {
        self.m * self.l * self.l
    }
}

pub fn pendulum_step(p: &PendulumParams, x: [f64; 2], u: f64) -> [f64; 2] {
    let [theta, omega] = x;
    [
        theta + p.tau * omega,
        p.gravity_gain() * theta.sin() + p.damping_factor() * omega + p.input_gain() * u,
    ]
}

/// Analytic Jacobian of the pendulum at `(theta_bar, 0)`.
pub fn pendulum_linearize(p: &PendulumParams, theta_bar: f64) -> LinearSystem {
    let a = dmatrix![
        1.0, p.tau;
        p.gravity_gain() * theta_bar.cos(), p.damping_factor()
    ];
    let b = dmatrix![0.0; p.input_gain()];
    LinearSystem::new(a, b).expect("pendulum Jacobian is 2x2 / 2x1")
}

impl Plant for PendulumParams {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let next = pendulum_step(self, [x[0], x[1]], u[0]);
        DVector::from_column_slice(&next)
    }

    fn jacobians(&self, x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let lin = pendulum_linearize(self, x[0]);
        (lin.a().clone(), lin.b().clone())
    }
}
