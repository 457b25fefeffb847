//! Dataset to explanation: pick the linear model, solve the inverse problem,
//! compare against the generating controller's weights.

use std::time::Instant;

use lqexplain::control::{lqr_closed_loop, CostWeights};
use lqexplain::data_io::PlantSpec;
use lqexplain::ioc::{solve_ioc, IocConfig, IocResult};
use lqexplain::systems::{estimate_linear_system, LinearSystem, Trajectory};
use lqexplain::Dataset;

use crate::report::{Baselines, ComparisonRmse, Report};
use crate::CliError;

/// An explanation together with the model and data it was computed on.
#[derive(Clone, Debug)]
pub struct Explanation {
    /// Linear model the inverse problem assumed.
    pub system: LinearSystem,
    /// Data in the coordinates the model uses (deviations from the
    /// operating point for plants regulated around an equilibrium).
    pub data: Dataset,
    pub result: IocResult,
    pub runtime_s: f64,
}

/// Linear model for the inverse problem: the true matrices for an LTI plant
/// recorded in its own coordinates, a least-squares fit otherwise.
pub fn linear_model(data: &Dataset) -> Result<LinearSystem, CliError> {
    match (&data.meta().plant, &data.meta().operating_point) {
        (PlantSpec::Lti(sys), None) => Ok(sys.clone()),
        _ => estimate_linear_system(data.trajectories()).map_err(CliError::Identification),
    }
}

pub fn explain_dataset(data: &Dataset, cfg: &IocConfig) -> Result<Explanation, CliError> {
    let start = Instant::now();
    let data = data.in_deviation_coordinates()?;
    let system = linear_model(&data)?;
    let result = solve_ioc(&system, data.trajectories(), cfg)?;
    Ok(Explanation {
        system,
        data,
        result,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// LQR closed loop over the measured trajectory's length from its measured
/// initial state.
pub fn lqr_replay(sys: &LinearSystem, w: &CostWeights, measured: &Trajectory) -> Result<Trajectory, CliError> {
    lqr_closed_loop(sys, w, &measured.states()[0], measured.len()).map_err(|e| CliError::Ioc(e.into()))
}

/// RMS state distance over all trajectories, steps `k >= 1` and components.
pub fn comparison_rmse(sys: &LinearSystem, w: &CostWeights, data: &[Trajectory]) -> Result<f64, CliError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for measured in data {
        let replay = lqr_replay(sys, w, measured)?;
        for (a, b) in replay.states().iter().zip(measured.states()).skip(1) {
            sum += (a - b).norm_squared();
            count += a.len();
        }
    }
    Ok((sum / count as f64).sqrt())
}

impl Explanation {
    pub fn weights(&self) -> CostWeights {
        self.result.weights()
    }

    /// Weights of the controller that generated the data.
    pub fn baseline_weights(&self) -> Result<CostWeights, CliError> {
        Ok(self.data.meta().controller.weights()?)
    }

    pub fn report(&self, experiment_id: &str) -> Result<Report, CliError> {
        let trajectories = self.data.trajectories();
        let baseline = self.baseline_weights()?;
        Ok(Report {
            experiment_id: experiment_id.to_string(),
            q_hat: self.result.q_hat.clone(),
            r_hat: self.result.r_hat.clone(),
            baselines: Some(Baselines {
                q_mpc: baseline.q().clone(),
                r_mpc: baseline.r().clone(),
            }),
            fit_rmse_vs_data: self.result.fit_rmse(),
            comparison_rmse: ComparisonRmse {
                lqr_with_hat: comparison_rmse(&self.system, &self.weights(), trajectories)?,
                lqr_with_mpc_weights: comparison_rmse(&self.system, &baseline, trajectories)?,
            },
            runtime_s: self.runtime_s,
        })
    }
}

/// Plot data for trajectory 0: columns `k,series,x0..x{n-1}`, one block of
/// rows per series. States are shifted back to absolute coordinates when the
/// data are deviations from an operating point.
pub fn plot_csv(explanations: &[(&str, &Explanation)]) -> Result<String, CliError> {
    let Some((_, first)) = explanations.first() else {
        return Err(CliError::Input("no series to plot".into()));
    };
    let measured = &first.data.trajectories()[0];
    let n = measured.state_dim();
    let offset = first
        .data
        .meta()
        .operating_point
        .as_ref()
        .map(|op| op.x_bar.clone())
        .unwrap_or_else(|| nalgebra::DVector::zeros(n));

    let mut series: Vec<(String, Trajectory)> = vec![
        ("measured".into(), measured.clone()),
        (
            "lqr_mpc_weights".into(),
            lqr_replay(&first.system, &first.baseline_weights()?, measured)?,
        ),
    ];
    for (name, e) in explanations {
        series.push((
            format!("lqr_ioc_{name}"),
            lqr_replay(&e.system, &e.weights(), measured)?,
        ));
    }

    let mut out = String::from("k,series");
    for i in 0..n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (name, traj) in &series {
        for (k, x) in traj.states().iter().enumerate() {
            out.push_str(&format!("{k},{name}"));
            for v in (x + &offset).iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    Ok(out)
}
