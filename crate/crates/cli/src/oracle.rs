//! Brute-force validation of the flow-equivalent reduction on one spec:
//! builds the full hidden chain, solves its balance equations and compares
//! every product-form identity against the reduced model.

use nortonq_core::mdp::{threshold_stationary_measure, AggregatedMdp, Policy};
use nortonq_core::network::QueueingNetworkSpec;
use nortonq_core::productform::{
    aggregate_measure, aggregated_kernel_brute_force, brute_force_stationary,
    conditional_departure_throughput, equivalent_queue, DEFAULT_STATE_LIMIT,
};

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub worst_error: f64,
    pub tolerance: f64,
}

/// Runs all checks under the given threshold (defaults to accept-all).
/// Tolerances are absolute 1e-9 except where noted.
pub fn run_checks(
    spec: &QueueingNetworkSpec,
    threshold: Option<usize>,
    limit: Option<usize>,
) -> Result<Vec<OracleCheck>, String> {
    let limit = limit.unwrap_or(DEFAULT_STATE_LIMIT);
    let threshold = threshold.unwrap_or(spec.capacity);
    if threshold > spec.capacity {
        return Err(format!(
            "threshold {threshold} exceeds capacity {}",
            spec.capacity
        ));
    }
    let err = |e: nortonq_core::Error| e.to_string();
    let queue = equivalent_queue(spec).map_err(err)?;
    let mdp = AggregatedMdp::from_network(spec, &queue).map_err(err)?;
    let mut checks = Vec::new();

    // Norton rates against the conditional departure throughput under the
    // accept-all stationary law.
    let full = brute_force_stationary(spec, |_| true, limit).map_err(err)?;
    let throughput = conditional_departure_throughput(spec, &full);
    let mut worst = 0.0f64;
    for s in 1..=spec.capacity {
        worst = worst.max((throughput[s] - queue.rates[s]).abs() / queue.rates[s]);
    }
    checks.push(check("norton rates vs conditional throughput", worst, 1e-9));

    // Monotone concave bounded rates.
    let mu_total: f64 = spec.service_rates.iter().sum();
    let mut shape = 0.0f64;
    for s in 1..=spec.capacity {
        shape = shape.max(queue.rates[s - 1] - queue.rates[s]);
        shape = shape.max(queue.rates[s] - mu_total);
        if s >= 2 {
            shape = shape
                .max((queue.rates[s] - queue.rates[s - 1]) - (queue.rates[s - 1] - queue.rates[s - 2]));
        }
    }
    checks.push(check("rates increasing, concave, bounded", shape, 1e-12));

    // Aggregated stationary measure under the threshold policy.
    let truncated = brute_force_stationary(spec, |s| s < threshold, limit).map_err(err)?;
    let aggregated = aggregate_measure(&truncated);
    let reduced = threshold_stationary_measure(&mdp, threshold);
    let mut measure_err = 0.0f64;
    for s in 0..=spec.capacity {
        measure_err = measure_err.max((aggregated[s] - reduced[s]).abs());
    }
    checks.push(check("aggregated measure vs birth-death", measure_err, 1e-9));

    // Aggregated one-step kernel.
    let kernel = aggregated_kernel_brute_force(spec, |s| s < threshold, limit).map_err(err)?;
    let policy = Policy::threshold(threshold, spec.capacity);
    let mut kernel_err = 0.0f64;
    for s in 0..=threshold {
        for s2 in 0..=spec.capacity {
            let expected = if s2 + 1 == s {
                mdp.death_prob(s)
            } else if s2 == s {
                mdp.self_loop_prob(s, policy.action(s))
            } else if s2 == s + 1 {
                mdp.birth_prob(s, policy.action(s))
            } else {
                0.0
            };
            kernel_err = kernel_err.max((kernel[s][s2] - expected).abs());
        }
    }
    checks.push(check("aggregated kernel vs birth-death", kernel_err, 1e-9));

    Ok(checks)
}

fn check(name: &str, worst_error: f64, tolerance: f64) -> OracleCheck {
    OracleCheck {
        name: name.to_string(),
        passed: worst_error.is_finite() && worst_error <= tolerance,
        worst_error,
        tolerance,
    }
}
