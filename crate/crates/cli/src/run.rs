//! Replication orchestration and persistence.
//!
//! Each network in the sweep runs `replications` learner instances with
//! seeds `seed_base..seed_base+replications`, in parallel. Per-run records
//! land in `run_<label>_seed<seed>.json`; the per-label aggregate in
//! `aggregate_<label>.csv` (plus `aggregate_rescaled_<label>.csv` when the
//! `rescaled` series is requested). Aggregation sorts by seed, so output
//! bytes are independent of completion order.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;

use nortonq_core::learner::{run_ucrlm, RunRecord, UcrlOptions};
use nortonq_core::network::QueueingNetworkSpec;

use crate::aggregate::{aggregate, AggregateSeries};
use crate::config::ExperimentConfig;

#[derive(Debug)]
pub struct ExperimentOutput {
    pub label: String,
    pub records: Vec<RunRecord>,
    pub aggregate: AggregateSeries,
    pub failures: Vec<(u64, String)>,
    pub aggregate_path: PathBuf,
}

/// Runs the whole experiment and writes all artifacts. Returns the
/// in-memory outputs for further inspection.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentOutput>, String> {
    config.validate()?;
    let networks = config.networks()?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| format!("cannot create {}: {e}", config.output_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0)) // 0 = rayon default
        .build()
        .map_err(|e| format!("cannot build worker pool: {e}"))?;

    let mut outputs = Vec::new();
    for (label, spec) in networks {
        let output = run_label(config, &pool, &label, &spec)?;
        outputs.push(output);
    }
    Ok(outputs)
}

fn run_label(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    label: &str,
    spec: &QueueingNetworkSpec,
) -> Result<ExperimentOutput, String> {
    let violations = spec.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(format!("network {label} is invalid: {}", list.join("; ")));
    }
    let seeds: Vec<u64> = (0..config.replications as u64)
        .map(|i| config.seed_base + i)
        .collect();
    let results: Vec<(u64, Result<RunRecord, String>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let options = UcrlOptions {
                    tau_mix: config.tau_mix.clone(),
                    horizon: config.horizon,
                    seed,
                    record_expected_rewards: config.record_expected_rewards,
                    episode_log: config.episode_log,
                    stride: config.stride,
                };
                (seed, run_ucrlm(spec, &options).map_err(|e| e.to_string()))
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(record) => records.push(record),
            Err(message) => failures.push((seed, message)),
        }
    }
    records.sort_by_key(|r| r.seed);

    for record in &records {
        let path = config
            .output_dir
            .join(format!("run_{label}_seed{:05}.json", record.seed));
        let json = serde_json::to_string(record).map_err(|e| e.to_string())?;
        fs::write(&path, json).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    if !failures.is_empty() {
        let path = config.output_dir.join(format!("failures_{label}.txt"));
        let text: String = failures
            .iter()
            .map(|(seed, message)| format!("seed {seed}: {message}\n"))
            .collect();
        fs::write(&path, text).map_err(|e| e.to_string())?;
        eprintln!(
            "warning: {} run(s) of {label} failed; aggregate covers the {} successes",
            failures.len(),
            records.len()
        );
    }
    if records.is_empty() {
        return Err(format!("all runs of {label} failed"));
    }

    let series = aggregate(&records)?;
    let aggregate_path = config.output_dir.join(format!("aggregate_{label}.csv"));
    series.write_csv(&aggregate_path)?;
    if config.series.iter().any(|s| s == "rescaled") {
        let tau_mix = records[0].tau_mix;
        let rescaled = series.rescaled(tau_mix);
        rescaled.write_csv(
            &config
                .output_dir
                .join(format!("aggregate_rescaled_{label}.csv")),
        )?;
    }
    Ok(ExperimentOutput {
        label: label.to_string(),
        records,
        aggregate: series,
        failures,
        aggregate_path,
    })
}
