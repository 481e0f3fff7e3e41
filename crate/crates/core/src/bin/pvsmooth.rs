use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use pvsmooth::config::{CaseSelector, RunConfig};
use pvsmooth::pipeline::{self, PipelineError};

/// Battery, diesel and curtailment sizing for PV ramp-rate smoothing.
#[derive(Parser)]
#[command(name = "pvsmooth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides the synthetic weather seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured cases and write dispatch, summaries and the comparison.
    Run(Common),
    /// Rank the configured battery technologies on the ramp-limited case.
    BatterySelect(Common),
    /// Write one case as an MPS file.
    ExportMps {
        #[command(flatten)]
        common: Common,
        /// A, B, C, D or baseline.
        #[arg(long)]
        case: CaseSelector,
        /// Defaults to <output_dir>/case_<X>.mps.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a dispatch CSV against the constraints of a configuration.
    Validate {
        dispatch: PathBuf,
        config: PathBuf,
        /// Summary JSON holding the ratings; otherwise implied from the series.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn load(path: &PathBuf, seed: Option<u64>, output_dir: Option<&PathBuf>) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.weather.seed = s;
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d.clone();
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<bool, PipelineError> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c.config, c.seed, c.output_dir.as_ref())?;
            let outcome = pipeline::run(&cfg)?;
            pipeline::write_outputs(&outcome, &cfg.output_dir)?;
            if let Some(cmp) = &outcome.comparison {
                print!("{}", cmp.to_text());
            }
            if let Some(sel) = &outcome.selection {
                print!("{}", sel.to_text());
            }
            for c in &outcome.cases {
                println!(
                    "case {}: {} ({})",
                    c.label,
                    c.summary.status,
                    if c.ok() { "valid" } else { "INVALID" }
                );
            }
            if let Some(e) = &outcome.comparison_error {
                error!("{e}");
            }
            println!("outputs written to {}", cfg.output_dir.display());
            Ok(outcome.ok())
        }
        Command::BatterySelect(c) => {
            let mut cfg = load(&c.config, c.seed, c.output_dir.as_ref())?;
            cfg.cases = vec![CaseSelector::BatterySelect];
            let outcome = pipeline::run(&cfg)?;
            pipeline::write_outputs(&outcome, &cfg.output_dir)?;
            if let Some(sel) = &outcome.selection {
                print!("{}", sel.to_text());
            }
            Ok(outcome.ok())
        }
        Command::ExportMps {
            common,
            case,
            output,
        } => {
            let cfg = load(&common.config, common.seed, common.output_dir.as_ref())?;
            if case == CaseSelector::BatterySelect {
                return Err(PipelineError::Input(
                    "--case must be A, B, C, D or baseline".into(),
                ));
            }
            let path = output.unwrap_or_else(|| cfg.output_dir.join(format!("case_{case}.mps")));
            pipeline::export_mps(&cfg, case, &path)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Validate {
            dispatch,
            config,
            summary,
            seed,
        } => {
            let cfg = load(&config, seed, None)?;
            let report = pipeline::validate_dispatch_file(&dispatch, &cfg, summary.as_deref())?;
            for c in &report.checks {
                println!(
                    "{:<14} {}  max residual {:.3e}{}",
                    c.name,
                    if c.pass { "ok  " } else { "FAIL" },
                    c.max_residual,
                    c.worst_step
                        .map(|s| format!(" at step {s}"))
                        .unwrap_or_default()
                );
            }
            println!("case {}: {}", report.case_id, if report.pass { "valid" } else { "INVALID" });
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
    }
}
