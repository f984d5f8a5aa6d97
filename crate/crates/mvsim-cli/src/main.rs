use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvsim_cli::config::{parse_config, parse_metrics, MetricsSection};
use mvsim_cli::runner::{analyze_files, run_scenario, RunError};
use mvsim_cli::scenarios;

#[derive(Parser)]
#[command(name = "mvsim", version, about = "Metaverse streaming simulator and trace analyzer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config; writes traces, report and manifest
    Run {
        /// scenario config (TOML), a file path or a bundled scenario name
        config: PathBuf,
        /// override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// output directory (default: out/<scenario>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the metrics suite on trace CSVs; prints a report as JSON
    Analyze {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// optional config providing the [metrics] table
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the bundled scenarios
    Scenarios,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), RunError> {
    match cmd {
        Cmd::Run { config, seed, out } => {
            let text = load_config_text(&config)?;
            let mut cfg = parse_config(&text).map_err(|e| RunError::Config(e.0))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.scenario));
            let artifacts = run_scenario(&cfg, &text, &out_dir)?;
            println!(
                "{}: seed {}, {} output files in {}",
                cfg.scenario,
                cfg.seed,
                artifacts.manifest.outputs.len(),
                out_dir.display()
            );
            Ok(())
        }
        Cmd::Analyze { traces, config } => {
            let metrics = match config {
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    parse_metrics(&text).map_err(|e| RunError::Config(e.0))?
                }
                None => MetricsSection::default(),
            };
            let report = analyze_files(&traces, &metrics)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Cmd::Scenarios => {
            for name in scenarios::NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}

/// A path to a TOML file, or the name of a bundled scenario.
fn load_config_text(config: &PathBuf) -> Result<String, RunError> {
    if config.exists() {
        return Ok(fs::read_to_string(config)?);
    }
    if let Some(name) = config.to_str() {
        if let Some(text) = scenarios::bundled(name) {
            return Ok(text.to_string());
        }
    }
    Err(RunError::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} is neither a file nor a bundled scenario", config.display()),
    )))
}
