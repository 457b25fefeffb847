use std::path::Path;
use std::process::{Command, Output};

use lqexplain::control::{lqr_closed_loop, CostWeights};
use lqexplain::data_io::{save_dataset, ControllerSpec, DatasetMeta, PlantSpec};
use lqexplain::{Dataset, ExperimentConfig, LinearSystem};
use lqexplain_cli::Report;
use nalgebra::{dmatrix, DMatrix};

fn lqexplain(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqexplain"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lti_config(trajectories: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::lti_mpc(10, 7);
    cfg.sampling.trajectories = trajectories;
    cfg
}

#[test]
fn generate_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), lti_config(30).to_json()).unwrap();
    let o = lqexplain(&["generate", "--config", "cfg.json", "--out", "data.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let data = lqexplain::data_io::load_dataset(&dir.path().join("data.json")).unwrap();
    assert_eq!(data.trajectories().len(), 30);
    assert!(data.meta().created.is_some());
}

#[test]
fn generate_rejects_zero_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let text = lti_config(30)
        .to_json()
        .replace("\"trajectories\": 30", "\"trajectories\": 0");
    std::fs::write(dir.path().join("cfg.json"), text).unwrap();
    let o = lqexplain(&["generate", "--config", "cfg.json", "--out", "data.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trajectories"), "{}", stderr(&o));
    assert!(!dir.path().join("data.json").exists());
}

#[test]
fn generate_lists_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let text = lti_config(30).to_json().replacen('{', "{\"colour\": 1,", 1);
    std::fs::write(dir.path().join("cfg.json"), text).unwrap();
    let o = lqexplain(&["generate", "--config", "cfg.json", "--out", "data.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn generate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = lti_config(2);
    cfg.controller = ControllerSpec::Mpc {
        horizon: 2,
        convention: Default::default(),
        q: DMatrix::zeros(2, 2),
        r: DMatrix::identity(2, 2),
    };
    cfg.sampling.initial_bounds = vec![[1e300, 1e300]; 2];
    cfg.sampling.samples = 200;
    std::fs::write(dir.path().join("cfg.json"), cfg.to_json()).unwrap();
    let o = lqexplain(&["generate", "--config", "cfg.json", "--out", "data.json"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

/// Noiseless LQR dataset with known weights, saved as CSV.
fn lqr_dataset(dir: &Path) -> CostWeights {
    let sys = LinearSystem::new(dmatrix![1.0, 1.0; -0.5, 1.0], dmatrix![0.5, 0.0; 0.0, 0.5]).unwrap();
    let truth = CostWeights::new(dmatrix![0.3, 0.0; 0.0, 0.1], DMatrix::identity(2, 2)).unwrap();
    let x0s = lqexplain::data_io::sample_initial_conditions(&[[-2.0, 2.0]; 2], 10, 5).unwrap();
    let trajectories = x0s
        .iter()
        .map(|x| lqr_closed_loop(&sys, &truth, x, 30).unwrap())
        .collect();
    let meta = DatasetMeta {
        plant_id: "lti".into(),
        controller_id: "lqr".into(),
        seed: 5,
        noise_std: 0.0,
        operating_point: None,
        created: None,
        plant: PlantSpec::Lti(sys),
        controller: ControllerSpec::Lqr {
            q: truth.q().clone(),
            r: truth.r().clone(),
        },
        state_dim: 2,
        input_dim: 2,
    };
    save_dataset(&Dataset::new(meta, trajectories).unwrap(), &dir.join("lqr.csv")).unwrap();
    truth
}

#[test]
fn explain_recovers_known_weights() {
    let dir = tempfile::tempdir().unwrap();
    let truth = lqr_dataset(dir.path());
    let o = lqexplain(&["explain", "--dataset", "lqr.csv", "--out", "report.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = Report::load(&dir.path().join("report.json")).unwrap();
    assert!((&r.q_hat - truth.q()).norm() / truth.q().norm() < 1e-3, "{}", r.q_hat);
    assert!((&r.r_hat - truth.r()).norm() / truth.r().norm() < 1e-3, "{}", r.r_hat);
    assert_eq!(r.experiment_id, "lqr");
    assert!(r.comparison_rmse.lqr_with_mpc_weights < 1e-6);
}

#[test]
fn explain_accepts_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    lqr_dataset(dir.path());
    std::fs::write(dir.path().join("ioc.json"), r#"{"structure": "full", "restarts": 1}"#).unwrap();
    let o = lqexplain(
        &[
            "explain",
            "--dataset",
            "lqr.csv",
            "--config",
            "ioc.json",
            "--structure",
            "diagonal",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = Report::load(&dir.path().join("r.json")).unwrap();
    assert_eq!(r.q_hat[(0, 1)], 0.0);

    let o = lqexplain(
        &[
            "explain",
            "--dataset",
            "lqr.csv",
            "--normalization",
            "fix_r_scalar",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "two inputs cannot fix a scalar R");
}

#[test]
fn explain_pendulum_with_scalar_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::pendulum_nmpc(0.0, 11);
    cfg.sampling.trajectories = 8;
    cfg.sampling.samples = 30;
    std::fs::write(dir.path().join("cfg.json"), cfg.to_json()).unwrap();
    let o = lqexplain(&["generate", "--config", "cfg.json", "--out", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = lqexplain(
        &[
            "explain",
            "--dataset",
            "p.json",
            "--normalization",
            "fix_r_scalar",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = Report::load(&dir.path().join("r.json")).unwrap();
    assert_eq!(r.r_hat, dmatrix![1.0]);
}

#[test]
fn explain_rejects_corrupt_dataset() {
    let dir = tempfile::tempdir().unwrap();
    lqr_dataset(dir.path());
    let full = std::fs::read_to_string(dir.path().join("lqr.csv")).unwrap();
    std::fs::write(dir.path().join("lqr.csv"), &full[..full.len() / 2]).unwrap();
    let o = lqexplain(&["explain", "--dataset", "lqr.csv", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), "{\"meta\": ").unwrap();
    let o = lqexplain(&["explain", "--dataset", "bad.json", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = lqexplain(&["explain", "--dataset", "missing.json", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["reproduce", "--case", "lti_t7", "--out", "x"][..],
        &[
            "explain",
            "--dataset",
            "d.json",
            "--out",
            "r.json",
            "--structure",
            "banded",
        ],
        &["frobnicate"],
    ] {
        assert_eq!(lqexplain(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lqexplain(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["checks"].as_array().unwrap().len(), 10);

    let o = lqexplain(&["validate", "--quick"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["checks"].as_array().unwrap().len(), 8);

    let o = lqexplain(&["validate", "--quick", "--perturb-riccati"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("riccati_dare"), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn reproduce_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = lqexplain(
        &["reproduce", "--case", "pendulum_horizontal", "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "dataset.json",
        "report.json",
        "report_diagonal.json",
        "trajectories.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("k,series,x0,x1\n"));
    for series in ["measured", "lqr_mpc_weights", "lqr_ioc_weights", "lqr_ioc_diagonal"] {
        assert_eq!(
            csv.lines().filter(|l| l.split(',').nth(1) == Some(series)).count(),
            50,
            "{series}"
        );
    }
    // Pendulum plot data is in absolute coordinates, near the horizontal.
    let theta0: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((theta0 - std::f64::consts::FRAC_PI_2).abs() <= 0.3);
    let r = Report::load(&out.join("report_diagonal.json")).unwrap();
    assert_eq!(r.experiment_id, "pendulum_horizontal_seed3400_diagonal");
}
