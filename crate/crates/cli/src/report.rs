//! The `analyze` report: flow solution, equivalent queue, optimal policy
//! and diagnostics for one network spec.

use std::fmt;

use serde::Serialize;

use nortonq_core::mdp::{
    bias_variation_bound, diameter_estimate, mixing_profile, optimal_threshold, policy_gain_bias,
    AggregatedMdp, Policy,
};
use nortonq_core::network::QueueingNetworkSpec;
use nortonq_core::productform::{convolution_constants, norton_throughput};

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub stability_warnings: Vec<String>,
    pub lambda_o: Vec<f64>,
    pub visit_ratios: Vec<f64>,
    pub g: Vec<f64>,
    pub mu: Vec<f64>,
    pub threshold: usize,
    pub gain: f64,
    pub bias: Vec<f64>,
    pub delta: Vec<f64>,
    /// Mixing time of the accept-all aggregated chain, when reached within
    /// the search horizon.
    pub t_mix_accept_all: Option<usize>,
    pub diameter: f64,
}

/// Exact analysis of a valid spec. Callers must have validated it first.
pub fn analyze(spec: &QueueingNetworkSpec, mixing_horizon: usize) -> Result<AnalysisReport, String> {
    let err = |e: nortonq_core::Error| e.to_string();
    let lambda_o = spec.traffic_rates().map_err(err)?;
    let visit_ratios = spec.visit_ratios().map_err(err)?;
    let constants = convolution_constants(spec).map_err(err)?;
    let queue = norton_throughput(&constants);
    let mdp = AggregatedMdp::from_network(spec, &queue).map_err(err)?;
    let (threshold, gain) = optimal_threshold(&mdp);
    let solution = policy_gain_bias(&mdp, &Policy::threshold(threshold, spec.capacity))
        .map_err(err)?;
    let delta = bias_variation_bound(&mdp);
    let t_mix = find_t_mix(&mdp, mixing_horizon);
    Ok(AnalysisReport {
        stability_warnings: spec.stability_warnings().map_err(err)?,
        lambda_o,
        visit_ratios,
        g: (0..=spec.capacity).map(|s| constants.g(s)).collect(),
        mu: queue.rates.clone(),
        threshold,
        gain,
        bias: solution.bias,
        delta,
        t_mix_accept_all: t_mix,
        diameter: diameter_estimate(&mdp),
    })
}

/// Doubling search for the accept-all mixing time, capped at `horizon`.
fn find_t_mix(mdp: &AggregatedMdp, horizon: usize) -> Option<usize> {
    let policy = Policy::accept_all(mdp.capacity());
    let mut h = 64.min(horizon.max(1));
    loop {
        let profile = mixing_profile(mdp, &policy, h);
        if let Some(t) = profile.t_mix {
            return Some(t);
        }
        if h >= horizon {
            return None;
        }
        h = (h * 2).min(horizon);
    }
}

impl AnalysisReport {
    /// The `s, G, mu` table as CSV.
    pub fn g_mu_csv(&self) -> String {
        let mut out = String::from("s,G,mu\n");
        for s in 0..self.g.len() {
            out.push_str(&format!("{},{},{}\n", s, self.g[s], self.mu[s]));
        }
        out
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.stability_warnings {
            writeln!(f, "warning: {w}")?;
        }
        writeln!(f, "traffic rates    {}", fmt_vec(&self.lambda_o))?;
        writeln!(f, "visit ratios     {}", fmt_vec(&self.visit_ratios))?;
        writeln!(f, "G(s)             {}", fmt_vec(&self.g))?;
        writeln!(f, "mu(s)            {}", fmt_vec(&self.mu))?;
        writeln!(f, "optimal threshold {}", self.threshold)?;
        writeln!(f, "optimal gain      {:.9}", self.gain)?;
        writeln!(f, "bias             {}", fmt_vec(&self.bias))?;
        writeln!(f, "Delta(s)         {}", fmt_vec(&self.delta))?;
        match self.t_mix_accept_all {
            Some(t) => writeln!(f, "t_mix (accept-all) {t}")?,
            None => writeln!(f, "t_mix (accept-all) not reached within horizon")?,
        }
        writeln!(f, "diameter          {:.6}", self.diameter)
    }
}

fn fmt_vec(values: &[f64]) -> String {
    let strings: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", strings.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nortonq_core::network::single_queue;

    #[test]
    fn single_queue_report_matches_solver_examples() {
        let spec = single_queue(1.0, 2.0, 2, 10.0, 1.0, Some(3.0));
        let report = analyze(&spec, 4096).unwrap();
        assert_eq!(report.mu, vec![0.0, 2.0, 2.0]);
        assert_eq!(report.threshold, 2);
        assert!(report.t_mix_accept_all.is_some());
        assert_eq!(report.bias.len(), 3);
        let json = serde_json::to_string(&report).unwrap();
        for key in ["gain", "threshold", "bias", "mu", "delta"] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let csv = report.g_mu_csv();
        assert!(csv.starts_with("s,G,mu\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
