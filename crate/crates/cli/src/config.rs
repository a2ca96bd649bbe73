//! Experiment configuration.
//!
//! ```json
//! {
//!   "network": {"multi_tier": {"n": [3, 6]}},
//!   "T": 200000,
//!   "tau_mix": 3,
//!   "seed_base": 1,
//!   "replications": 24,
//!   "output_dir": "out",
//!   "series": ["regret", "threshold"]
//! }
//! ```
//!
//! `network` is either a `multi_tier` sweep over queues-per-tier values
//! (benchmark scaling rules, with optional overrides), an inline `spec`,
//! or a `spec_file` path. `tau_mix` accepts a number, `"oblivious"` or
//! `{"rho": x}` exactly like the learner options.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nortonq_core::learner::TauMixPolicy;
use nortonq_core::network::{MultiTierParams, QueueingNetworkSpec, SpecFile};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub tau_mix: TauMixPolicy,
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub output_dir: PathBuf,
    /// Which aggregate series to write: `regret` and `threshold` live in
    /// the main aggregate CSV; adding `rescaled` also writes a CSV with
    /// both the time axis and the regret divided by `tau_mix`.
    #[serde(default = "default_series")]
    pub series: Vec<String>,
    #[serde(default)]
    pub record_expected_rewards: bool,
    #[serde(default)]
    pub episode_log: bool,
    #[serde(default)]
    pub stride: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_seed_base() -> u64 {
    1
}

/// Desk-scale default; heavyweight studies override it upward.
fn default_replications() -> usize {
    24
}

fn default_series() -> Vec<String> {
    vec!["regret".to_string(), "threshold".to_string()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    MultiTier { multi_tier: MultiTierSweep },
    Inline { spec: SpecFile },
    File { spec_file: PathBuf },
}

/// A sweep over tier sizes with the benchmark scaling rules; individual
/// parameters can be overridden while the rest keep scaling with `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiTierSweep {
    pub n: Vec<usize>,
    #[serde(default)]
    pub bypass_prob: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub rejection_cost: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config JSON: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.replications == 0 {
            return Err("replications must be at least 1".to_string());
        }
        if let NetworkSource::MultiTier { multi_tier } = &self.network {
            if multi_tier.n.is_empty() {
                return Err("multi_tier.n must be nonempty".to_string());
            }
        }
        for name in &self.series {
            if !matches!(name.as_str(), "regret" | "threshold" | "rescaled") {
                return Err(format!("unknown series \"{name}\""));
            }
        }
        Ok(())
    }

    /// Resolves the network source into labeled specs, one per sweep entry.
    pub fn networks(&self) -> Result<Vec<(String, QueueingNetworkSpec)>, String> {
        match &self.network {
            NetworkSource::MultiTier { multi_tier } => multi_tier
                .n
                .iter()
                .map(|&n| {
                    let mut params = MultiTierParams::preset(n);
                    if let Some(p) = multi_tier.bypass_prob {
                        params.bypass_prob = p;
                    }
                    if let Some(l) = multi_tier.lambda {
                        params.arrival_rate = l;
                    }
                    if let Some(rc) = multi_tier.rejection_cost {
                        params.rejection_cost = rc;
                    }
                    params
                        .build()
                        .map(|spec| (format!("n{n}"), spec))
                        .map_err(|e| e.to_string())
                })
                .collect(),
            NetworkSource::Inline { spec } => {
                let spec = spec.clone().into_spec().map_err(|e| e.to_string())?;
                Ok(vec![("spec".to_string(), spec)])
            }
            NetworkSource::File { spec_file } => {
                let spec = load_spec(spec_file)?;
                Ok(vec![("spec".to_string(), spec)])
            }
        }
    }
}

/// Reads a network spec from its JSON file format.
pub fn load_spec(path: &Path) -> Result<QueueingNetworkSpec, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read spec {}: {e}", path.display()))?;
    let file: SpecFile =
        serde_json::from_str(&text).map_err(|e| format!("invalid spec JSON: {e}"))?;
    file.into_spec().map_err(|e| e.to_string())
}
