//! Property tests over randomly generated instances.

use proptest::prelude::*;

use nortonq_core::mdp::{
    bias_variation_bound, hitting_times, hitting_times_linear_solve, optimal_threshold,
    policy_gain_bias, relative_value_iteration, threshold_stationary_measure, Policy,
};
use nortonq_testkit::{random_mdp, random_spec, random_threshold, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn routing_rows_sum_to_one(seed in any::<u64>()) {
        let spec = random_spec(&mut rng(seed), 5, 6);
        for row in &spec.routing {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn traffic_rates_are_scaled_visit_ratios(seed in any::<u64>()) {
        let spec = random_spec(&mut rng(seed), 5, 6);
        let rates = spec.traffic_rates().unwrap();
        let visits = spec.visit_ratios().unwrap();
        for i in 0..spec.n_queues {
            let expected = spec.arrival_rate * visits[i + 1];
            let scale = expected.abs().max(1.0);
            prop_assert!((rates[i] - expected).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn threshold_measure_is_a_distribution_with_detailed_balance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, 12);
        let n = random_threshold(&mut r, mdp.capacity());
        let m = threshold_stationary_measure(&mdp, n);
        let total: f64 = m.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for s in 0..mdp.capacity() {
            if s < n {
                prop_assert!(
                    (mdp.arrival_rate * m[s] - mdp.service_rates[s + 1] * m[s + 1]).abs() < 1e-12
                );
            } else {
                prop_assert_eq!(m[s + 1], 0.0);
            }
        }
    }

    #[test]
    fn enumeration_and_value_iteration_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, 12);
        let (n_star, g_star) = optimal_threshold(&mdp);
        let (solution, policy) = relative_value_iteration(&mdp, 1e-12).unwrap();
        prop_assert!((solution.gain - g_star).abs() < 1e-8,
            "gain {} vs {}", solution.gain, g_star);
        // The greedy policy must be a threshold policy; a non-threshold
        // greedy policy would contradict the threshold-optimality
        // assumption and must surface here.
        let threshold = policy.as_threshold();
        prop_assert!(threshold.is_some(), "non-threshold greedy policy {:?}", policy);
        // Thresholds agree except when adjacent thresholds are tied below
        // the gain tolerance (boundary states with negligible mass).
        let n_rvi = threshold.unwrap();
        if n_rvi != n_star {
            let alt = nortonq_core::mdp::threshold_gain(&mdp, n_rvi);
            prop_assert!((alt - g_star).abs() < 1e-8,
                "thresholds {} vs {} with gain gap {:e}", n_rvi, n_star, (alt - g_star).abs());
        }
    }

    #[test]
    fn hitting_time_routes_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, 12);
        let n = random_threshold(&mut r, mdp.capacity());
        let policy = Policy::threshold(n, mdp.capacity());
        let recursion = hitting_times(&mdp, &policy);
        let direct = hitting_times_linear_solve(&mdp, &policy).unwrap();
        prop_assert_eq!(recursion[0], 0.0);
        for (a, b) in recursion.iter().zip(&direct) {
            let scale = a.abs().max(1.0);
            prop_assert!((a - b).abs() / scale < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn bias_variation_is_bounded_by_delta(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, 10);
        let delta = bias_variation_bound(&mdp);
        let n = random_threshold(&mut r, mdp.capacity());
        let policy = Policy::threshold(n, mdp.capacity());
        let solution = policy_gain_bias(&mdp, &policy).unwrap();
        for s in 1..=mdp.capacity() {
            let variation = (solution.bias[s] - solution.bias[s - 1]).abs();
            prop_assert!(
                variation <= delta[s] + 1e-9,
                "state {}: |dh| = {} > Delta = {}", s, variation, delta[s]
            );
        }
    }

    #[test]
    fn norton_rates_scale_invariance(seed in any::<u64>()) {
        // Scaling every rate (and U) by a constant scales mu(s) by it too.
        let spec = random_spec(&mut rng(seed), 3, 5);
        let queue = nortonq_core::productform::equivalent_queue(&spec).unwrap();
        let mut scaled = spec.clone();
        let c = 3.5;
        for m in scaled.service_rates.iter_mut() {
            *m *= c;
        }
        scaled.arrival_rate *= c;
        scaled.uniformization *= c;
        let scaled_queue = nortonq_core::productform::equivalent_queue(&scaled).unwrap();
        for s in 1..=spec.capacity {
            let rel = (scaled_queue.rates[s] - c * queue.rates[s]).abs() / (c * queue.rates[s]);
            prop_assert!(rel < 1e-9);
        }
    }
}
