use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lqexplain::{Normalization, Structure};
use lqexplain_cli::commands::{self, IocOverrides};
use lqexplain_cli::validate::{run_validation, ValidateOptions};
use lqexplain_cli::{Case, CliError, DEFAULT_SEED};

/// Explain black-box feedback controllers by the LQ cost they implicitly
/// optimize.
#[derive(Parser)]
#[command(name = "lqexplain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment configuration and save the dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output file; `.csv` writes CSV plus a `.meta.json` sidecar, anything else JSON.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover the cost weights that explain a dataset.
    Explain {
        #[arg(long)]
        dataset: PathBuf,
        /// IOC settings, either bare or as the `ioc` section of an experiment configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        structure: Option<StructureArg>,
        #[arg(long)]
        normalization: Option<NormalizationArg>,
    },
    /// Run one reference experiment end to end.
    Reproduce {
        #[arg(long)]
        case: Case,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property checks and print a JSON summary.
    Validate {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Noiseless checks only.
        #[arg(long)]
        quick: bool,
        /// Inject a fault into the Riccati gains (negative test of the checks).
        #[arg(long)]
        perturb_riccati: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureArg {
    Full,
    Diagonal,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum NormalizationArg {
    TraceR,
    FixRScalar,
}

impl From<StructureArg> for Structure {
    fn from(s: StructureArg) -> Self {
        match s {
            StructureArg::Full => Structure::Full,
            StructureArg::Diagonal => Structure::Diagonal,
        }
    }
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::TraceR => Normalization::TraceR,
            NormalizationArg::FixRScalar => Normalization::FixRScalar,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let data = commands::generate(&config, &out, seed)?;
            eprintln!("wrote {} trajectories to {}", data.trajectories().len(), out.display());
        }
        Command::Explain {
            dataset,
            config,
            out,
            structure,
            normalization,
        } => {
            let overrides = IocOverrides {
                structure: structure.map(Into::into),
                normalization: normalization.map(Into::into),
            };
            commands::explain(&dataset, config.as_deref(), &out, overrides)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Reproduce { case, seed, out } => {
            let r = commands::reproduce(case, seed, &out)?;
            let report = &r.reports[0];
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "case": case.name(),
                    "seed": seed,
                    "q_hat_over_r_hat_frobenius": report.q_hat.norm() / report.r_hat.norm(),
                    "trace_q_hat": report.q_hat.trace(),
                    "comparison_rmse": report.comparison_rmse,
                    "files": {
                        "dataset": r.dataset,
                        "report": r.report,
                        "report_diagonal": r.report_diagonal,
                        "plot": r.plot,
                    },
                }))
                .expect("summary serializes")
            );
        }
        Command::Validate {
            seed,
            quick,
            perturb_riccati,
        } => {
            let summary = run_validation(&ValidateOptions {
                seed,
                quick,
                perturb_riccati,
            });
            println!("{}", summary.to_json());
            if !summary.passed {
                return Err(CliError::ValidationFailed {
                    failed: summary.failed(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
