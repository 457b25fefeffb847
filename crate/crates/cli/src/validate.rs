//! Property checks behind `lqexplain validate`.
//!
//! Each check computes one error metric and compares it against a fixed
//! tolerance. The quick subset uses noiseless data only; the full run adds
//! the statistical checks on noisy data.

use std::f64::consts::FRAC_PI_2;

use lqexplain::control::{lqr_closed_loop, riccati_solve, ControlError, CostWeights, GainSchedule};
use lqexplain::data_io::{
    generate_dataset, load_dataset, save_dataset, to_deviation_coordinates, ControllerSpec, PlantSpec,
};
use lqexplain::ioc::oracle::{random_instance, solve_boundary_value};
use lqexplain::ioc::{ioc_objective, normalize_weights, pmp_residuals, reconstruct_pmp_trajectory, solve_ioc};
use lqexplain::rng::{Stream, StreamId};
use lqexplain::systems::{estimate_linear_system, pendulum_linearize};
use lqexplain::{Dataset, ExperimentConfig, IocConfig, LinearSystem, Normalization, PendulumParams, Trajectory};
use nalgebra::{dmatrix, DMatrix, DVector};
use serde::Serialize;

/// Number of random instances in the boundary-value cross-check.
pub const PMP_INSTANCES: usize = 50;
/// Trajectory counts of the consistency check.
pub const M_VALUES: [usize; 3] = [5, 15, 30];
/// Independent datasets per trajectory count in the consistency check.
pub const M_SEEDS: usize = 5;
/// Seed spacing between those datasets. Trajectory `i` of a dataset uses the
/// key `seed + i`, so seeds closer than the largest trajectory count would
/// share trajectories.
pub const M_SEED_SPACING: u64 = 1000;
/// Allowed relative increase of the mean error from one count to the next.
pub const M_SLACK: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Run only the noiseless checks.
    pub quick: bool,
    /// Perturb every Riccati gain used by the checks, to exercise the
    /// failure path.
    pub perturb_riccati: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured error; `null` when the check could not run.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub quick: bool,
    pub perturb_riccati: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.to_string())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

type Measured = Result<(f64, String), String>;

fn check(name: &'static str, tolerance: f64, measured: Measured) -> Check {
    match measured {
        Ok((value, detail)) => Check {
            name,
            passed: value.is_finite() && value < tolerance,
            value: Some(value),
            tolerance,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            value: None,
            tolerance,
            detail,
        },
    }
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn run_validation(opts: &ValidateOptions) -> Summary {
    let riccati = Riccati {
        perturb: opts.perturb_riccati,
    };
    let mut checks = vec![
        check("riccati_dare", 1e-9, riccati_dare(&riccati)),
        check(
            "pmp_boundary_equivalence",
            1e-8,
            pmp_boundary_equivalence(&riccati, opts.seed),
        ),
        check("pmp_residuals", 1e-10, pmp_residual_check(opts.seed)),
        check("scale_invariance", 1e-10, scale_invariance(opts.seed)),
        check("normalize_idempotence", 1e-14, normalize_idempotence()),
        check("noiseless_round_trip", 1e-3, noiseless_round_trip(opts.seed)),
        check("dataset_round_trip", 0.5, dataset_round_trip(opts.seed)),
        check("deviation_round_trip", 1e-12, deviation_round_trip(opts.seed)),
    ];
    if !opts.quick {
        checks.push(check("m_consistency", 1.0 + M_SLACK, m_consistency(opts.seed)));
        checks.push(check("sysid_fidelity", 5e-2, sysid_fidelity(opts.seed)));
    }
    Summary {
        seed: opts.seed,
        quick: opts.quick,
        perturb_riccati: opts.perturb_riccati,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// Riccati sweep used by the checks, with an optional injected fault.
struct Riccati {
    perturb: bool,
}

impl Riccati {
    fn solve(&self, sys: &LinearSystem, w: &CostWeights, horizon: usize) -> Result<GainSchedule, ControlError> {
        let mut s = riccati_solve(sys, w, horizon)?;
        if self.perturb {
            for k in &mut s.gains {
                k.add_scalar_mut(1e-3);
            }
        }
        Ok(s)
    }
}

fn reference_lti() -> LinearSystem {
    LinearSystem::new(dmatrix![1.0, 1.0; -0.5, 1.0], dmatrix![0.5, 0.0; 0.0, 0.5]).expect("valid system")
}

fn reference_weights() -> CostWeights {
    CostWeights::new(dmatrix![0.3, 0.0; 0.0, 0.1], DMatrix::identity(2, 2)).expect("valid weights")
}

fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Relative recovery error of `(Q, R)` against `(Q*, R*)`: the larger of the
/// two relative Frobenius errors.
pub fn recovery_error(hat: &CostWeights, truth: &CostWeights) -> f64 {
    relative_frobenius(hat.q(), truth.q()).max(relative_frobenius(hat.r(), truth.r()))
}

/// Long-horizon gain and cost-to-go against the algebraic Riccati equation.
fn riccati_dare(riccati: &Riccati) -> Measured {
    let pendulum = pendulum_linearize(&PendulumParams::default(), 0.0);
    let pendulum_w = CostWeights::new(dmatrix![1000.0, 0.0; 0.0, 100.0], dmatrix![1.0]).map_err(text)?;
    let mut worst: f64 = 0.0;
    for (sys, w) in [(reference_lti(), reference_weights()), (pendulum, pendulum_w)] {
        let s = riccati.solve(&sys, &w, 2000).map_err(text)?;
        let (p, k) = (&s.value_matrices[0], &s.gains[0]);
        let (a, b) = (sys.a(), sys.b());
        let gram = w.r() + b.transpose() * p * b;
        let k_dare = gram.lu().solve(&(b.transpose() * p * a)).ok_or("singular R + B'PB")?;
        let p_dare = w.q() + a.transpose() * p * a - a.transpose() * p * b * &k_dare;
        let scale_p = p.amax().max(1.0);
        let scale_k = k_dare.amax().max(1.0);
        worst = worst
            .max((p - p_dare).amax() / scale_p)
            .max((k - k_dare).amax() / scale_k);
    }
    Ok((worst, "max relative residual of P and K at k = 0, horizon 2000".into()))
}

fn rollout(sys: &LinearSystem, gains: &[DMatrix<f64>], x0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut xs = vec![x0.clone()];
    for k in gains {
        let x = xs.last().expect("non-empty");
        xs.push(sys.a() * x - sys.b() * (k * x));
    }
    xs
}

fn pmp_boundary_equivalence(riccati: &Riccati, seed: u64) -> Measured {
    let mut s = Stream::new(seed, StreamId::Validation);
    let mut worst: f64 = 0.0;
    for _ in 0..PMP_INSTANCES {
        let inst = random_instance(&mut s);
        let (sys, w) = (&inst.system, &inst.weights);
        let direct = solve_boundary_value(sys, w, &inst.x_bar, inst.samples).map_err(text)?;
        let schedule = riccati.solve(sys, w, inst.samples).map_err(text)?;
        let xs = rollout(sys, &schedule.gains, &inst.x_bar);
        for (k, x) in xs.iter().enumerate() {
            let lambda = &schedule.value_matrices[k] * x;
            worst = worst
                .max((x - &direct.states[k]).amax())
                .max((lambda - &direct.lambdas[k]).amax());
        }
    }
    Ok((
        worst,
        format!("max elementwise state/costate difference to the direct solve over {PMP_INSTANCES} random instances"),
    ))
}

fn pmp_residual_check(seed: u64) -> Measured {
    let mut s = Stream::new(seed.wrapping_add(1), StreamId::Validation);
    let mut worst: f64 = 0.0;
    for _ in 0..PMP_INSTANCES {
        let inst = random_instance(&mut s);
        let (traj, adj) =
            reconstruct_pmp_trajectory(&inst.system, &inst.weights, &inst.x_bar, inst.samples).map_err(text)?;
        let scale = adj.lambdas.iter().map(|l| l.amax()).fold(1.0, f64::max);
        worst = worst.max(pmp_residuals(&inst.system, &inst.weights, &traj, &adj).max() / scale);
    }
    Ok((
        worst,
        "max optimality-condition residual, relative to the largest costate".into(),
    ))
}

fn lqr_data(
    sys: &LinearSystem,
    w: &CostWeights,
    count: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, String> {
    let bounds = vec![[-2.0, 2.0]; sys.n()];
    lqexplain::data_io::sample_initial_conditions(&bounds, count, seed)
        .map_err(text)?
        .iter()
        .map(|x0| lqr_closed_loop(sys, w, x0, samples).map_err(text))
        .collect()
}

fn scale_invariance(seed: u64) -> Measured {
    let sys = reference_lti();
    let data = lqr_data(&sys, &reference_weights(), 5, 30, seed)?;
    let w = CostWeights::new(dmatrix![0.5, 0.1; 0.1, 0.2], dmatrix![1.2, 0.1; 0.1, 0.8]).map_err(text)?;
    let base = ioc_objective(&sys, &w, &data).map_err(text)?;
    let mut worst: f64 = 0.0;
    for alpha in [1e-2, 1e2] {
        let scaled = ioc_objective(&sys, &w.scaled(alpha).map_err(text)?, &data).map_err(text)?;
        worst = worst.max((scaled - base).abs() / base);
    }
    Ok((
        worst,
        "relative objective change under (Q, R) -> (aQ, aR), a in {1e-2, 1e2}".into(),
    ))
}

fn normalize_idempotence() -> Measured {
    let cases = [
        (
            CostWeights::new(dmatrix![3.0, 0.5; 0.5, 1.0], dmatrix![2.0, 0.3; 0.3, 5.0]).map_err(text)?,
            Normalization::TraceR,
        ),
        (
            CostWeights::new(dmatrix![40.0, 1.0; 1.0, 7.0], dmatrix![0.37]).map_err(text)?,
            Normalization::FixRScalar,
        ),
    ];
    let mut worst: f64 = 0.0;
    for (w, mode) in cases {
        let once = normalize_weights(&w, mode).map_err(text)?;
        let twice = normalize_weights(&once, mode).map_err(text)?;
        worst = worst
            .max(relative_frobenius(twice.q(), once.q()))
            .max(relative_frobenius(twice.r(), once.r()));
    }
    Ok((worst, "relative change from normalizing twice".into()))
}

/// Noiseless LQR data on the reference system recovered after `trace_R`
/// normalization.
fn noiseless_round_trip(seed: u64) -> Measured {
    let sys = reference_lti();
    let truth = reference_weights();
    let data = lqr_data(&sys, &truth, 10, 30, seed)?;
    let result = solve_ioc(&sys, &data, &IocConfig::default()).map_err(text)?;
    Ok((
        recovery_error(&result.weights(), &truth),
        "relative Frobenius error of Q and R, 10 noiseless LQR trajectories".into(),
    ))
}

fn small_config(mut cfg: ExperimentConfig, trajectories: usize, samples: usize) -> ExperimentConfig {
    cfg.sampling.trajectories = trajectories;
    cfg.sampling.samples = samples;
    cfg
}

fn datasets_equal(a: &Dataset, b: &Dataset) -> bool {
    serde_json::to_value(a).ok() == serde_json::to_value(b).ok() && a.trajectories() == b.trajectories()
}

/// Number of JSON and CSV save/load round trips that changed the data.
fn dataset_round_trip(seed: u64) -> Measured {
    let dir = tempfile::tempdir().map_err(text)?;
    let lti = generate_dataset(&small_config(ExperimentConfig::lti_mpc(5, seed), 3, 10)).map_err(text)?;
    let pendulum = generate_dataset(&small_config(ExperimentConfig::pendulum_nmpc(FRAC_PI_2, seed), 2, 10))
        .map_err(text)?
        .in_deviation_coordinates()
        .map_err(text)?;
    let mut mismatches = 0;
    for (i, data) in [lti, pendulum].iter().enumerate() {
        for ext in ["json", "csv"] {
            let path = dir.path().join(format!("data{i}.{ext}"));
            save_dataset(data, &path).map_err(text)?;
            if !datasets_equal(data, &load_dataset(&path).map_err(text)?) {
                mismatches += 1;
            }
        }
    }
    Ok((
        mismatches as f64,
        "datasets changed by a save/load round trip (JSON and CSV)".into(),
    ))
}

fn deviation_round_trip(seed: u64) -> Measured {
    let data =
        generate_dataset(&small_config(ExperimentConfig::pendulum_nmpc(FRAC_PI_2, seed), 2, 10)).map_err(text)?;
    let op = data
        .meta()
        .nominal_operating_point()
        .ok_or("pendulum has an operating point")?;
    let dev = to_deviation_coordinates(&data, &op).map_err(text)?;
    let back = to_deviation_coordinates(&dev, &op.negated()).map_err(text)?;
    let mut worst: f64 = 0.0;
    for (a, b) in data.trajectories().iter().zip(back.trajectories()) {
        for (x, y) in a.states().iter().zip(b.states()) {
            worst = worst.max((x - y).amax());
        }
        for (u, v) in a.inputs().iter().zip(b.inputs()) {
            worst = worst.max((u - v).amax());
        }
    }
    Ok((
        worst,
        "max difference after shifting to the operating point and back".into(),
    ))
}

/// Mean recovery error for each entry of [`M_VALUES`] on noisy (sigma = 0.01)
/// LQR data of the reference system, over [`M_SEEDS`] datasets spaced
/// [`M_SEED_SPACING`] apart from `seed`.
pub fn m_consistency_errors(seed: u64) -> Result<Vec<f64>, String> {
    let truth = reference_weights();
    let sys = reference_lti();
    M_VALUES
        .iter()
        .map(|&m| {
            let mut total = 0.0;
            for j in 0..M_SEEDS {
                let mut cfg = ExperimentConfig::lti_mpc(10, seed.wrapping_add(j as u64 * M_SEED_SPACING));
                cfg.controller = ControllerSpec::Lqr {
                    q: truth.q().clone(),
                    r: truth.r().clone(),
                };
                cfg.sampling.trajectories = m;
                let data = generate_dataset(&cfg).map_err(text)?;
                let result = solve_ioc(&sys, data.trajectories(), &cfg.ioc).map_err(text)?;
                total += recovery_error(&result.weights(), &truth);
            }
            Ok(total / M_SEEDS as f64)
        })
        .collect()
}

/// Largest ratio of consecutive mean errors in [`m_consistency_errors`].
fn m_consistency(seed: u64) -> Measured {
    let errors = m_consistency_errors(seed)?;
    let worst = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok((
        worst,
        format!("largest ratio of consecutive mean errors {errors:?} for M = {M_VALUES:?}"),
    ))
}

/// Least-squares model of upright pendulum deviation data against the
/// analytic Jacobian.
pub fn sysid_fidelity_error(seed: u64) -> Result<f64, String> {
    let cfg = ExperimentConfig::pendulum_nmpc(0.0, seed);
    let PlantSpec::Pendulum(params) = &cfg.plant else {
        return Err("pendulum preset has a pendulum plant".into());
    };
    let data = generate_dataset(&cfg)
        .map_err(text)?
        .in_deviation_coordinates()
        .map_err(text)?;
    let fit = estimate_linear_system(data.trajectories()).map_err(text)?;
    let truth = pendulum_linearize(params, 0.0);
    Ok((fit.a() - truth.a()).amax().max((fit.b() - truth.b()).amax()))
}

fn sysid_fidelity(seed: u64) -> Measured {
    Ok((
        sysid_fidelity_error(seed)?,
        "max-abs error of the fitted (A, B) at theta = 0".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let s = run_validation(&ValidateOptions {
            seed: 1,
            quick: true,
            perturb_riccati: false,
        });
        assert!(s.passed, "{}", s.to_json());
        assert_eq!(s.checks.len(), 8);
    }

    #[test]
    fn perturbed_riccati_is_caught() {
        let s = run_validation(&ValidateOptions {
            seed: 1,
            quick: true,
            perturb_riccati: true,
        });
        assert!(!s.passed);
        let failed = s.failed();
        assert!(failed.contains(&"riccati_dare".to_string()), "{failed:?}");
        assert!(failed.contains(&"pmp_boundary_equivalence".to_string()), "{failed:?}");
    }
}
