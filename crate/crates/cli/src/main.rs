//! `nortonq` command line: exact analysis, learner experiments, plots and
//! brute-force oracle checks.
//!
//! Exit codes: 0 on success, 1 for validation problems (invalid spec,
//! config or CSV inputs), 2 for runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nortonq_cli::aggregate::AggregateSeries;
use nortonq_cli::config::{load_spec, ExperimentConfig};
use nortonq_cli::oracle;
use nortonq_cli::report;
use nortonq_cli::run::run_experiment;
use nortonq_cli::svg::{self, PlotSeries};

#[derive(Parser)]
#[command(name = "nortonq", about = "Admission control in capacity-bounded Jackson networks: exact flow-equivalent analysis and online learning experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact analysis of a network spec: traffic rates, equivalent queue,
    /// optimal admission threshold, bias and diagnostics.
    Analyze {
        /// Network spec JSON file.
        spec: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the (s, G, mu) table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Search horizon for the accept-all mixing time.
        #[arg(long, default_value_t = 65_536)]
        mixing_horizon: usize,
    },
    /// Run learner replications from an experiment config and write
    /// per-run JSON records plus aggregate CSVs.
    Learn {
        /// Experiment config JSON file.
        config: PathBuf,
    },
    /// Plot aggregate CSVs as an SVG line chart.
    Plot {
        /// One of: regret, threshold, rescaled.
        mode: String,
        /// Aggregate CSV files.
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Output SVG path.
        #[arg(short, long)]
        output: PathBuf,
        /// Logarithmic x axis.
        #[arg(long)]
        log_x: bool,
        /// Module counts per CSV (required for rescaled mode), e.g. 1,3,6.
        #[arg(long, value_delimiter = ',')]
        tau_mix: Vec<usize>,
    },
    /// Brute-force checks of the flow-equivalent reduction on a small spec.
    Oracle {
        /// Network spec JSON file.
        spec: PathBuf,
        /// Admission threshold for the truncated checks (default: capacity).
        #[arg(long)]
        threshold: Option<usize>,
        /// Hidden-state count limit.
        #[arg(long)]
        limit: Option<usize>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze {
            spec,
            json,
            csv,
            mixing_horizon,
        } => {
            let spec = load_spec(&spec).map_err(Failure::Validation)?;
            let violations = spec.validate();
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(Failure::Validation(format!(
                    "spec has {} violation(s):\n  {}",
                    list.len(),
                    list.join("\n  ")
                )));
            }
            let report = report::analyze(&spec, mixing_horizon).map_err(Failure::Runtime)?;
            print!("{report}");
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
                std::fs::write(&path, text)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            if let Some(path) = csv {
                std::fs::write(&path, report.g_mu_csv())
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            Ok(())
        }
        Command::Learn { config } => {
            let config = ExperimentConfig::load(&config).map_err(Failure::Validation)?;
            let outputs = run_experiment(&config).map_err(Failure::Runtime)?;
            for output in &outputs {
                println!(
                    "{}: {} run(s), final mean regret {:.3}, aggregate at {}",
                    output.label,
                    output.records.len(),
                    output.aggregate.mean_regret.last().copied().unwrap_or(0.0),
                    output.aggregate_path.display()
                );
            }
            Ok(())
        }
        Command::Plot {
            mode,
            csv,
            output,
            log_x,
            tau_mix,
        } => {
            let svg = plot(&mode, &csv, log_x, &tau_mix)?;
            std::fs::write(&output, svg)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", output.display())))?;
            println!("wrote {}", output.display());
            Ok(())
        }
        Command::Oracle {
            spec,
            threshold,
            limit,
        } => {
            let spec = load_spec(&spec).map_err(Failure::Validation)?;
            let violations = spec.validate();
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(Failure::Validation(list.join("; ")));
            }
            let checks =
                oracle::run_checks(&spec, threshold, limit).map_err(Failure::Runtime)?;
            let mut all_passed = true;
            for c in &checks {
                println!(
                    "{}: {} (worst error {:.3e}, tolerance {:.0e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst_error,
                    c.tolerance
                );
                all_passed &= c.passed;
            }
            if all_passed {
                Ok(())
            } else {
                Err(Failure::Runtime("oracle checks failed".to_string()))
            }
        }
    }
}

fn plot(mode: &str, csvs: &[PathBuf], log_x: bool, taus: &[usize]) -> Result<String, Failure> {
    let mut series = Vec::new();
    let label_of = |path: &PathBuf| -> String {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    };
    match mode {
        "regret" | "threshold" => {
            for path in csvs {
                let agg = AggregateSeries::read_csv(path).map_err(Failure::Validation)?;
                let points = agg
                    .t
                    .iter()
                    .zip(if mode == "regret" {
                        agg.mean_regret.iter()
                    } else {
                        agg.mean_threshold.iter()
                    })
                    .map(|(&t, &y)| (t, y))
                    .collect();
                series.push(PlotSeries {
                    label: label_of(path),
                    points,
                });
            }
        }
        "rescaled" => {
            if taus.len() != csvs.len() {
                return Err(Failure::Validation(format!(
                    "rescaled mode needs one --tau-mix value per CSV ({} files, {} values)",
                    csvs.len(),
                    taus.len()
                )));
            }
            for (path, &tau) in csvs.iter().zip(taus) {
                if tau == 0 {
                    return Err(Failure::Validation("tau_mix must be >= 1".to_string()));
                }
                let agg = AggregateSeries::read_csv(path).map_err(Failure::Validation)?;
                let points = agg
                    .t
                    .iter()
                    .zip(agg.mean_regret.iter())
                    .map(|(&t, &r)| (t / tau as f64, r / tau as f64))
                    .collect();
                series.push(PlotSeries {
                    label: format!("{} (tau={tau})", label_of(path)),
                    points,
                });
            }
        }
        other => {
            return Err(Failure::Validation(format!(
                "unknown plot mode \"{other}\" (expected regret, threshold or rescaled)"
            )))
        }
    }
    let (title, ylabel, xlabel) = match mode {
        "regret" => ("Mean regret", "regret", "t"),
        "threshold" => ("Mean admission threshold", "threshold", "t"),
        _ => ("Rescaled mean regret", "regret / tau_mix", "t / tau_mix"),
    };
    svg::render(&series, title, xlabel, ylabel, log_x).map_err(Failure::Validation)
}
