//! The `generate`, `explain` and `reproduce` commands.

use std::path::{Path, PathBuf};

use lqexplain::data_io::{generate_dataset, load_dataset, parse_json_strict, save_dataset};
use lqexplain::{Dataset, ExperimentConfig, IocConfig, Normalization, Structure};

use crate::pipeline::{explain_dataset, plot_csv, Explanation};
use crate::{io_error, Case, CliError, Report};

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Simulates the experiment in `config_path` and saves the dataset to `out`
/// (CSV plus metadata sidecar when `out` ends in `.csv`, JSON otherwise).
pub fn generate(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<Dataset, CliError> {
    let mut cfg = ExperimentConfig::from_json(&read_text(config_path)?, &config_path.display().to_string())?;
    if let Some(seed) = seed {
        cfg.sampling.seed = seed;
    }
    let mut data = generate_dataset(&cfg)?;
    data.meta_mut().created = Some(now_rfc3339());
    save_dataset(&data, out)?;
    Ok(data)
}

/// Reads the inverse-problem settings from either a bare IOC configuration
/// or a full experiment configuration (its `ioc` section).
pub fn load_ioc_config(path: &Path) -> Result<IocConfig, CliError> {
    let text = read_text(path)?;
    let context = path.display().to_string();
    let value: serde_json::Value = parse_json_strict(&text, &context)?;
    if value.get("plant").is_some() {
        Ok(ExperimentConfig::from_json(&text, &context)?.ioc)
    } else {
        Ok(parse_json_strict(&text, &context)?)
    }
}

/// Overrides applied on top of the configured inverse-problem settings.
#[derive(Clone, Copy, Debug, Default)]
pub struct IocOverrides {
    pub structure: Option<Structure>,
    pub normalization: Option<Normalization>,
}

impl IocOverrides {
    fn apply(&self, mut cfg: IocConfig) -> IocConfig {
        if let Some(s) = self.structure {
            cfg.structure = s;
        }
        if let Some(n) = self.normalization {
            cfg.normalization = n;
        }
        cfg
    }
}

/// Fails with [`CliError::NonConvergence`] when the best restart did not
/// meet the convergence criteria. Outputs are written before this check so
/// the partial result can be inspected.
fn require_converged(e: &Explanation, what: &str) -> Result<(), CliError> {
    if e.result.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "{what}: best of {} restarts stopped after {} iterations at objective {:.6e}",
            e.result.restarts_used, e.result.iterations, e.result.objective
        )))
    }
}

/// Explains the dataset at `dataset_path` and writes the report to `out`.
pub fn explain(
    dataset_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
    overrides: IocOverrides,
) -> Result<Report, CliError> {
    let data = load_dataset(dataset_path)?;
    let cfg = overrides.apply(match config_path {
        Some(p) => load_ioc_config(p)?,
        None => IocConfig::default(),
    });
    let experiment_id = dataset_path
        .file_stem()
        .map_or_else(|| "explain".to_string(), |s| s.to_string_lossy().into_owned());
    let e = explain_dataset(&data, &cfg)?;
    let report = e.report(&experiment_id)?;
    report.save(out)?;
    require_converged(&e, &experiment_id)?;
    Ok(report)
}

/// Files written by [`reproduce`].
#[derive(Clone, Debug)]
pub struct Reproduction {
    pub dataset: PathBuf,
    pub report: PathBuf,
    /// Diagonal-structure explanation, pendulum cases only.
    pub report_diagonal: Option<PathBuf>,
    pub plot: PathBuf,
    pub reports: Vec<Report>,
}

/// Runs generate, explain and compare for one reference case, writing
/// `dataset.json`, `report.json`, `trajectories.csv` and, for pendulum
/// cases, `report_diagonal.json` into `out_dir`.
pub fn reproduce(case: Case, seed: u64, out_dir: &Path) -> Result<Reproduction, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let cfg = case.config(seed);
    let mut data = generate_dataset(&cfg)?;
    data.meta_mut().created = Some(now_rfc3339());
    let dataset = out_dir.join("dataset.json");
    save_dataset(&data, &dataset)?;

    let id = format!("{}_seed{seed}", case.name());
    let full = explain_dataset(&data, &cfg.ioc)?;
    let mut explanations = vec![("weights", id.clone(), full)];
    if case.is_pendulum() {
        let diag_cfg = IocConfig {
            structure: Structure::Diagonal,
            ..cfg.ioc.clone()
        };
        explanations.push(("diagonal", format!("{id}_diagonal"), explain_dataset(&data, &diag_cfg)?));
    }

    let report = out_dir.join("report.json");
    let report_diagonal = case.is_pendulum().then(|| out_dir.join("report_diagonal.json"));
    let mut reports = Vec::new();
    for ((_, eid, e), path) in explanations.iter().zip([Some(&report), report_diagonal.as_ref()]) {
        let r = e.report(eid)?;
        r.save(path.expect("one path per explanation"))?;
        reports.push(r);
    }

    let plot = out_dir.join("trajectories.csv");
    let series: Vec<(&str, &Explanation)> = explanations.iter().map(|(name, _, e)| (*name, e)).collect();
    write_text(&plot, &plot_csv(&series)?)?;

    for (_, eid, e) in &explanations {
        require_converged(e, eid)?;
    }
    Ok(Reproduction {
        dataset,
        report,
        report_diagonal,
        plot,
        reports,
    })
}
