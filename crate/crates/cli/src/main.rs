use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exposlam_cli::commands::{self, evaluate_files, write_method_report, write_summary};
use exposlam_cli::config::{AlignmentMode, ExperimentConfig};
use exposlam_cli::{CliError, Result};
use exposlam_core::enhance::EnhanceMethod;
use exposlam_core::metrics::render_table;

#[derive(Parser)]
#[command(name = "exposlam", version, about = "Simulate, enhance, track and evaluate tube sequences")]
struct Cli {
    /// Experiment config (TOML). Defaults apply to anything left out.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output` from the config.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render and degrade the configured sequences.
    Simulate,
    /// Enhance the simulated frames.
    Enhance {
        /// Repeatable; all configured methods when omitted.
        #[arg(long, short)]
        method: Vec<EnhanceMethod>,
    },
    /// Run odometry on enhanced frames.
    Track {
        #[arg(long, short)]
        method: Vec<EnhanceMethod>,
    },
    /// Score tracks against ground truth, or one `--gt`/`--est` pair.
    Eval {
        #[arg(long, short)]
        method: Vec<EnhanceMethod>,
        #[arg(long, value_enum)]
        alignment: Option<AlignmentMode>,
        #[arg(long, requires = "est")]
        gt: Option<PathBuf>,
        #[arg(long, requires = "gt")]
        est: Option<PathBuf>,
        /// Method name for the `--gt`/`--est` report.
        #[arg(long, default_value = "custom")]
        label: String,
    },
    /// simulate, enhance, track and eval in one go.
    RunAll,
    /// Print the effective config as TOML.
    Config,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn methods_or_all(cfg: &ExperimentConfig, m: &[EnhanceMethod]) -> Vec<EnhanceMethod> {
    if m.is_empty() {
        cfg.methods.clone()
    } else {
        m.to_vec()
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load(cli)?;
    match &cli.command {
        Command::Simulate => {
            let m = commands::simulate(&cfg)?;
            eprintln!("wrote {} files to {}", m.files.len(), cfg.dataset_dir().display());
        }
        Command::Enhance { method } => {
            for m in methods_or_all(&cfg, method) {
                let manifest = commands::enhance_method(&cfg, m)?;
                eprintln!("{m}: {} frames", manifest.files.len());
            }
        }
        Command::Track { method } => {
            let mut lost = Vec::new();
            for m in methods_or_all(&cfg, method) {
                match commands::track_method(&cfg, m) {
                    Ok(diags) => eprintln!("{m}: {} sequences tracked", diags.len()),
                    Err(CliError::TrackingLost(names)) => lost.extend(names),
                    Err(e) => return Err(e),
                }
            }
            if !lost.is_empty() {
                return Err(CliError::TrackingLost(lost));
            }
        }
        Command::Eval {
            method,
            alignment,
            gt,
            est,
            label,
        } => {
            if let Some(a) = alignment {
                cfg.eval.alignment = *a;
            }
            let reports = match (gt, est) {
                (Some(gt), Some(est)) => {
                    let seq = evaluate_files(label, gt, est, &cfg.eval)?;
                    let reports_dir = cfg.output.join("reports");
                    let report = write_method_report(&reports_dir, label, &[seq])?;
                    let reports = vec![report];
                    write_summary(&reports_dir, &reports)?;
                    reports
                }
                _ => commands::eval_methods(&cfg, &methods_or_all(&cfg, method))?,
            };
            print!("{}", render_table(&reports));
        }
        Command::RunAll => {
            let result = commands::run_all(&cfg);
            let lost = match result {
                Ok(reports) => {
                    print!("{}", render_table(&reports));
                    return Ok(());
                }
                Err(CliError::TrackingLost(names)) => names,
                Err(e) => return Err(e),
            };
            if let Ok(text) = std::fs::read_to_string(cfg.output.join("reports/table.txt")) {
                print!("{text}");
            }
            return Err(CliError::TrackingLost(lost));
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exposlam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
