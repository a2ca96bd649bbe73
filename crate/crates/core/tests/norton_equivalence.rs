//! Cross-validation of the product-form analysis against the brute-force
//! CTMC oracle on random small networks: the flow-equivalent reduction must
//! reproduce the aggregated stationary law, the conditional departure
//! throughput and the aggregated one-step kernel.

use nortonq_core::mdp::{threshold_stationary_measure, AggregatedMdp, Policy};
use nortonq_core::productform::{
    aggregate_measure, aggregated_kernel_brute_force, brute_force_stationary,
    conditional_departure_throughput, convolution_constants, enumerate_states, equivalent_queue,
    norton_throughput, DEFAULT_STATE_LIMIT,
};
use nortonq_testkit::{random_spec, random_threshold, rng};

#[test]
fn norton_rates_match_conditional_throughput() {
    let mut rng = rng(0xA11CE);
    for _ in 0..30 {
        let spec = random_spec(&mut rng, 4, 6);
        let queue = equivalent_queue(&spec).unwrap();
        let measure = brute_force_stationary(&spec, |_| true, DEFAULT_STATE_LIMIT).unwrap();
        let throughput = conditional_departure_throughput(&spec, &measure);
        for s in 1..=spec.capacity {
            let rel = (throughput[s] - queue.rates[s]).abs() / queue.rates[s];
            assert!(rel < 1e-9, "level {s}: {} vs {}", throughput[s], queue.rates[s]);
        }
    }
}

#[test]
fn aggregated_measure_matches_birth_death_for_threshold_policies() {
    let mut rng = rng(0xB0B);
    for _ in 0..30 {
        let spec = random_spec(&mut rng, 4, 6);
        let threshold = random_threshold(&mut rng, spec.capacity);
        let queue = equivalent_queue(&spec).unwrap();
        let mdp = AggregatedMdp::from_network(&spec, &queue).unwrap();
        let brute =
            brute_force_stationary(&spec, |s| s < threshold, DEFAULT_STATE_LIMIT).unwrap();
        let aggregated = aggregate_measure(&brute);
        let birth_death = threshold_stationary_measure(&mdp, threshold);
        for s in 0..=spec.capacity {
            assert!(
                (aggregated[s] - birth_death[s]).abs() < 1e-9,
                "threshold {threshold}, level {s}: {} vs {}",
                aggregated[s],
                birth_death[s]
            );
        }
    }
}

#[test]
fn aggregated_kernel_matches_birth_death_rows() {
    let mut rng = rng(0xC0FFEE);
    for _ in 0..20 {
        let spec = random_spec(&mut rng, 4, 6);
        let threshold = random_threshold(&mut rng, spec.capacity);
        let queue = equivalent_queue(&spec).unwrap();
        let mdp = AggregatedMdp::from_network(&spec, &queue).unwrap();
        let policy = Policy::threshold(threshold, spec.capacity);
        let kernel =
            aggregated_kernel_brute_force(&spec, |s| s < threshold, DEFAULT_STATE_LIMIT).unwrap();
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
                assert!(
                    (kernel[s][s2] - expected).abs() < 1e-9,
                    "threshold {threshold}: kernel[{s}][{s2}] = {} vs {expected}",
                    kernel[s][s2]
                );
            }
        }
    }
}

#[test]
fn equivalent_rates_are_increasing_concave_bounded() {
    let mut rng = rng(0xDEED);
    for _ in 0..100 {
        let spec = random_spec(&mut rng, 4, 8);
        let queue = equivalent_queue(&spec).unwrap();
        let mu_total: f64 = spec.service_rates.iter().sum();
        let rates = &queue.rates;
        assert_eq!(rates[0], 0.0);
        for s in 1..rates.len() {
            assert!(rates[s] > 0.0);
            assert!(rates[s] >= rates[s - 1] - 1e-12, "not increasing at {s}");
            assert!(rates[s] <= mu_total + 1e-12, "above sum of rates at {s}");
        }
        for s in 2..rates.len() {
            let newer = rates[s] - rates[s - 1];
            let older = rates[s - 1] - rates[s - 2];
            assert!(newer <= older + 1e-12, "not concave at {s}");
        }
    }
}

#[test]
fn convolution_matches_level_enumeration() {
    let mut rng = rng(0xEE1);
    for _ in 0..20 {
        let spec = random_spec(&mut rng, 3, 5);
        let constants = convolution_constants(&spec).unwrap();
        let visits = spec.visit_ratios().unwrap();
        for s in 0..=spec.capacity {
            let mut total = 0.0;
            for x in enumerate_states(spec.n_queues, s) {
                if x.iter().map(|&c| c as usize).sum::<usize>() == s {
                    let mut term = 1.0;
                    for i in 0..spec.n_queues {
                        term *= (visits[i + 1] / spec.service_rates[i]).powi(x[i] as i32);
                    }
                    total += term;
                }
            }
            let rel = (constants.g(s) - total).abs() / total;
            assert!(rel < 1e-10, "level {s}: {} vs {total}", constants.g(s));
        }
    }
}

#[test]
fn norton_reduction_two_queue_network_sanity() {
    // Norton construction on a fixed asymmetric network: the reduced
    // two-queue system (outside queue at rate lambda plus the equivalent
    // queue) reproduces the aggregated measure exactly.
    let mut rng = rng(7);
    let spec = random_spec(&mut rng, 3, 4);
    let constants = convolution_constants(&spec).unwrap();
    let queue = norton_throughput(&constants);
    let mdp = AggregatedMdp::from_network(&spec, &queue).unwrap();
    let full = brute_force_stationary(&spec, |_| true, DEFAULT_STATE_LIMIT).unwrap();
    let agg = aggregate_measure(&full);
    let reduced = threshold_stationary_measure(&mdp, spec.capacity);
    for (a, b) in agg.iter().zip(&reduced) {
        assert!((a - b).abs() < 1e-9);
    }
    // The reduced chain is action-independent in its death direction.
    for s in 1..=spec.capacity {
        assert_eq!(mdp.death_prob(s), queue.rates[s] / spec.uniformization);
    }
}
