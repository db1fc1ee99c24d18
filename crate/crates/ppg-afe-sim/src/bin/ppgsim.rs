//! CLI front end: run one scenario, or sweep one key over a list of values.

use clap::{Parser, Subcommand};
use ppg_afe_sim::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ppgsim", about = "Photoplethysmography front-end simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trace.csv, metrics.txt, events.log.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Output directory (created if absent).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dotted-path overrides, e.g. --set offset.ambient_baseline_a=2e-5.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Overrides the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario once per value, plus a combined summary.csv.
    Sweep {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Dotted-path key to sweep, e.g. offset.ambient_baseline_a.
        #[arg(long)]
        key: String,
        /// Comma-separated values for the swept key.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Output directory (one subdirectory per value).
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        /// Overrides the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, set, seed } => {
            match runner::run(&scenario, &out, &set, seed) {
                Ok(summary) => {
                    print!("{}", summary.metrics.to_key_values());
                    if summary.controller_errors > 0 {
                        eprintln!(
                            "controller logged {} ERROR event(s); see {}",
                            summary.controller_errors,
                            out.join("events.log").display()
                        );
                    }
                    ExitCode::from(summary.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Sweep { scenario, key, values, out, seed } => {
            let values: Vec<String> = values.into_iter().filter(|v| !v.is_empty()).collect();
            match runner::sweep(&scenario, &key, &values, &out, seed) {
                Ok(summaries) => {
                    println!(
                        "{} runs complete; summary in {}",
                        summaries.len(),
                        out.join("summary.csv").display()
                    );
                    if summaries.iter().any(|s| s.controller_errors > 0) {
                        ExitCode::from(3)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
