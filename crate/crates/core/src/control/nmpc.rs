use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ControlError, CostWeights, MpcHorizon};
use crate::linalg::symmetrize;
use crate::systems::Plant;

/// Tracking targets per stage. Entries past the end of either sequence hold
/// the last value.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSignal {
    pub x_ref: Vec<DVector<f64>>,
    pub u_ref: Vec<DVector<f64>>,
}

impl ReferenceSignal {
    pub fn constant(x_ref: DVector<f64>, u_ref: DVector<f64>) -> Self {
        Self {
            x_ref: vec![x_ref],
            u_ref: vec![u_ref],
        }
    }

    fn state(&self, k: usize) -> &DVector<f64> {
        &self.x_ref[k.min(self.x_ref.len() - 1)]
    }

    fn input(&self, k: usize) -> &DVector<f64> {
        &self.u_ref[k.min(self.u_ref.len() - 1)]
    }

    fn validate(&self, n: usize, m: usize) -> Result<(), ControlError> {
        if self.x_ref.is_empty() || self.u_ref.is_empty() {
            return Err(ControlError::InvalidReference("reference is empty".into()));
        }
        if self.x_ref.iter().any(|x| x.len() != n) || self.u_ref.iter().any(|u| u.len() != m) {
            return Err(ControlError::InvalidReference(format!(
                "reference dimensions do not match plant ({n} states, {m} inputs)"
            )));
        }
        Ok(())
    }
}

/// Inner solver settings for [`NmpcController`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmpcOptions {
    pub max_iterations: usize,
    /// Stop when the gradient of the horizon cost w.r.t. the input sequence
    /// falls below this norm.
    pub tolerance: f64,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for NmpcOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-8,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 40,
        }
    }
}

/// Receding-horizon NMPC solved by iterative linearization.
///
/// Each call to [`step`](Self::step) minimizes
/// `sum_{k=0}^{H-2} |x(k) - x_ref|²_Q + |u(k) - u_ref|²_R` over the input
/// sequence, warm-started from the previous solution shifted by one step.
/// The controller is stateful and must not be shared across threads.
#[derive(Clone, Debug)]
pub struct NmpcController {
    weights: CostWeights,
    horizon: MpcHorizon,
    options: NmpcOptions,
    warm: Option<Vec<DVector<f64>>>,
}

impl NmpcController {
    pub fn new(weights: CostWeights, horizon: MpcHorizon, options: NmpcOptions) -> Result<Self, ControlError> {
        horizon.validate()?;
        Ok(Self {
            weights,
            horizon,
            options,
            warm: None,
        })
    }

    /// Drops the warm start.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn step(
        &mut self,
        plant: &dyn Plant,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
    ) -> Result<DVector<f64>, ControlError> {
        let (n, m) = (plant.state_dim(), plant.input_dim());
        self.weights.check_dims(n, m)?;
        reference.validate(n, m)?;
        if x.len() != n {
            return Err(ControlError::DimensionMismatch {
                what: "state",
                expected: n,
                found: x.len(),
            });
        }
        let samples = self.horizon.sample_count();
        let decisions = samples - 1;
        let initial = match self.warm.take() {
            Some(mut prev) if prev.len() == decisions => {
                prev.remove(0);
                let last = prev
                    .last()
                    .cloned()
                    .unwrap_or_else(|| reference.input(decisions - 1).clone());
                prev.push(last);
                prev
            }
            _ => (0..decisions).map(|k| reference.input(k).clone()).collect(),
        };
        let problem = Problem {
            plant,
            weights: &self.weights,
            reference,
            options: &self.options,
        };
        let solution = problem.solve(x, initial)?;
        let first = solution[0].clone();
        self.warm = Some(solution);
        Ok(first)
    }
}

/// Cold-started single NMPC solve; returns the first optimal input.
pub fn nmpc_step(
    plant: &dyn Plant,
    w: &CostWeights,
    x: &DVector<f64>,
    reference: &ReferenceSignal,
    horizon: MpcHorizon,
    options: &NmpcOptions,
) -> Result<DVector<f64>, ControlError> {
    NmpcController::new(w.clone(), horizon, *options)?.step(plant, x, reference)
}

struct Problem<'a> {
    plant: &'a dyn Plant,
    weights: &'a CostWeights,
    reference: &'a ReferenceSignal,
    options: &'a NmpcOptions,
}

struct Linearization {
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
}

impl Problem<'_> {
    fn rollout(&self, x0: &DVector<f64>, us: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut xs = Vec::with_capacity(us.len() + 1);
        xs.push(x0.clone());
        for u in us {
            let next = self.plant.step(xs.last().unwrap(), u);
            xs.push(next);
        }
        xs
    }

    fn cost(&self, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
        let (q, r) = (self.weights.q(), self.weights.r());
        us.iter()
            .enumerate()
            .map(|(k, u)| {
                let dx = &xs[k] - self.reference.state(k);
                let du = u - self.reference.input(k);
                dx.dot(&(q * &dx)) + du.dot(&(r * &du))
            })
            .sum()
    }

    fn linearize(&self, xs: &[DVector<f64>], us: &[DVector<f64>]) -> Linearization {
        let (a, b) = us
            .iter()
            .enumerate()
            .map(|(k, u)| self.plant.jacobians(&xs[k], u))
            .unzip();
        Linearization { a, b }
    }

    /// Bound on the rounding error of a cost evaluation: the absolute
    /// rounding of each state and input, propagated through the stage-cost
    /// sensitivities, plus the rounding of the sum.
    fn rounding_error(&self, xs: &[DVector<f64>], us: &[DVector<f64>], cost: f64) -> f64 {
        let (q, r) = (self.weights.q(), self.weights.r());
        let propagated: f64 = us
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let dx = &xs[k] - self.reference.state(k);
                let du = u - self.reference.input(k);
                (q * dx).norm() * xs[k].norm() + (r * du).norm() * u.norm()
            })
            .sum();
        8.0 * f64::EPSILON * (cost.abs() + 2.0 * propagated)
    }

    /// Gradient of the horizon cost w.r.t. each input, via the costate.
    fn gradient(&self, xs: &[DVector<f64>], us: &[DVector<f64>], lin: &Linearization) -> Vec<DVector<f64>> {
        let (q, r) = (self.weights.q(), self.weights.r());
        let mut costate = DVector::zeros(xs[0].len());
        let mut grad = vec![DVector::zeros(us[0].len()); us.len()];
        for k in (0..us.len()).rev() {
            grad[k] = 2.0 * r * (&us[k] - self.reference.input(k)) + lin.b[k].transpose() * &costate;
            costate = 2.0 * q * (&xs[k] - self.reference.state(k)) + lin.a[k].transpose() * &costate;
        }
        grad
    }

    fn solve(&self, x0: &DVector<f64>, mut us: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>, ControlError> {
        let (q, r) = (self.weights.q(), self.weights.r());
        let n = x0.len();
        let mut xs = self.rollout(x0, &us);
        let mut cost = self.cost(&xs, &us);
        let mut gradient_norm = f64::INFINITY;

        for iteration in 0..=self.options.max_iterations {
            let lin = self.linearize(&xs, &us);
            gradient_norm = self
                .gradient(&xs, &us, &lin)
                .iter()
                .map(|g| g.norm_squared())
                .sum::<f64>()
                .sqrt();
            if !gradient_norm.is_finite() {
                break;
            }
            if gradient_norm < self.options.tolerance {
                return Ok(us);
            }
            if iteration == self.options.max_iterations {
                break;
            }

            // Time-varying LQ subproblem around the current rollout.
            let horizon = us.len();
            let mut v_x = DVector::zeros(n);
            let mut v_xx = DMatrix::zeros(n, n);
            let mut feedforward = Vec::with_capacity(horizon);
            let mut feedback = Vec::with_capacity(horizon);
            let mut expected = 0.0;
            for k in (0..horizon).rev() {
                let (a, b) = (&lin.a[k], &lin.b[k]);
                let q_x = 2.0 * q * (&xs[k] - self.reference.state(k)) + a.transpose() * &v_x;
                let q_u = 2.0 * r * (&us[k] - self.reference.input(k)) + b.transpose() * &v_x;
                let q_xx = 2.0 * q + a.transpose() * &v_xx * a;
                let q_uu = symmetrize(&(2.0 * r + b.transpose() * &v_xx * b));
                let q_ux = b.transpose() * &v_xx * a;
                let chol = q_uu.clone().cholesky().ok_or(ControlError::Conditioning { step: k })?;
                let kff = -chol.solve(&q_u);
                let kfb = -chol.solve(&q_ux);
                expected += kff.dot(&q_u);
                v_x = q_x + kfb.transpose() * &q_uu * &kff + kfb.transpose() * &q_u + q_ux.transpose() * &kff;
                v_xx = symmetrize(
                    &(q_xx + kfb.transpose() * &q_uu * &kfb + kfb.transpose() * &q_ux + q_ux.transpose() * &kfb),
                );
                feedforward.push(kff);
                feedback.push(kfb);
            }
            feedforward.reverse();
            feedback.reverse();

            // Near the optimum the predicted decrease drops below the rounding
            // error of the cost, where comparing costs is meaningless: allow
            // for the rounding, and take the full step once the model itself
            // predicts no measurable decrease.
            let slack = self.rounding_error(&xs, &us, cost);
            let below_rounding = -expected <= slack;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=self.options.max_backtracks {
                let mut trial_us = Vec::with_capacity(horizon);
                let mut trial_xs = Vec::with_capacity(horizon + 1);
                trial_xs.push(x0.clone());
                for k in 0..horizon {
                    let dx = &trial_xs[k] - &xs[k];
                    let u = &us[k] + step * &feedforward[k] + &feedback[k] * dx;
                    let next = self.plant.step(&trial_xs[k], &u);
                    trial_us.push(u);
                    trial_xs.push(next);
                }
                let trial_cost = self.cost(&trial_xs, &trial_us);
                let sufficient = trial_cost <= cost + self.options.armijo_slope * step * expected + slack;
                if trial_cost.is_finite() && (sufficient || below_rounding) {
                    us = trial_us;
                    xs = trial_xs;
                    cost = trial_cost;
                    accepted = true;
                    break;
                }
                step *= self.options.backtrack_factor;
            }
            if !accepted {
                break;
            }
        }
        Err(ControlError::NoConvergence {
            iterations: self.options.max_iterations,
            gradient_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{equilibrium_input, mpc_policy_lti};
    use crate::systems::tests::reference_lti;
    use crate::systems::PendulumParams;
    use nalgebra::dmatrix;

    fn pendulum_weights() -> CostWeights {
        CostWeights::new(dmatrix![1000.0, 0.0; 0.0, 100.0], dmatrix![1.0]).unwrap()
    }

    fn pendulum_reference(p: &PendulumParams, theta_r: f64) -> ReferenceSignal {
        ReferenceSignal::constant(
            DVector::from_vec(vec![theta_r, 0.0]),
            DVector::from_element(1, equilibrium_input(p, theta_r)),
        )
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = PendulumParams::default();
        for theta_r in [0.0, 0.4, std::f64::consts::FRAC_PI_2] {
            let u = nmpc_step(
                &p,
                &pendulum_weights(),
                &DVector::from_vec(vec![theta_r, 0.0]),
                &pendulum_reference(&p, theta_r),
                MpcHorizon::new(5),
                &NmpcOptions::default(),
            )
            .unwrap();
            assert!((u[0] - equilibrium_input(&p, theta_r)).abs() < 1e-6);
        }
    }

    #[test]
    fn pushes_back_toward_reference() {
        let p = PendulumParams::default();
        let u = nmpc_step(
            &p,
            &pendulum_weights(),
            &DVector::from_vec(vec![0.1, 0.0]),
            &pendulum_reference(&p, 0.0),
            MpcHorizon::new(5),
            &NmpcOptions::default(),
        )
        .unwrap();
        assert!(u[0] < 0.0, "u = {}", u[0]);
    }

    #[test]
    fn reduces_to_linear_mpc_on_lti_plant() {
        let sys = reference_lti();
        let w = CostWeights::new(dmatrix![0.3, 0.0; 0.0, 0.1], DMatrix::identity(2, 2)).unwrap();
        let reference = ReferenceSignal::constant(DVector::zeros(2), DVector::zeros(2));
        for horizon in [MpcHorizon::new(5), MpcHorizon::new(10), MpcHorizon::samples(5)] {
            let linear = mpc_policy_lti(&sys, &w, horizon).unwrap();
            let mut controller = NmpcController::new(w.clone(), horizon, NmpcOptions::default()).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    let x = DVector::from_vec(vec![-2.0 + 0.5 * i as f64, -2.0 + 0.5 * j as f64]);
                    controller.reset();
                    let u = controller.step(&sys, &x, &reference).unwrap();
                    assert!((u - linear.apply(&x)).amax() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn warm_start_tracks_closed_loop() {
        let p = PendulumParams::default();
        let reference = pendulum_reference(&p, 0.0);
        let mut controller =
            NmpcController::new(pendulum_weights(), MpcHorizon::new(5), NmpcOptions::default()).unwrap();
        let mut x = DVector::from_vec(vec![0.3, -0.2]);
        for _ in 0..500 {
            let u = controller.step(&p, &x, &reference).unwrap();
            x = p.step(&x, &u);
        }
        assert!(x.norm() < 1e-3, "final state {x}");
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let p = PendulumParams::default();
        let options = NmpcOptions {
            max_iterations: 0,
            ..Default::default()
        };
        let err = nmpc_step(
            &p,
            &pendulum_weights(),
            &DVector::from_vec(vec![0.2, 0.0]),
            &pendulum_reference(&p, 0.0),
            MpcHorizon::new(5),
            &options,
        )
        .unwrap_err();
        match err {
            ControlError::NoConvergence { gradient_norm, .. } => assert!(gradient_norm > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_mismatched_reference() {
        let p = PendulumParams::default();
        let bad = ReferenceSignal::constant(DVector::zeros(3), DVector::zeros(1));
        assert!(nmpc_step(
            &p,
            &pendulum_weights(),
            &DVector::zeros(2),
            &bad,
            MpcHorizon::new(5),
            &NmpcOptions::default()
        )
        .is_err());
    }
}
