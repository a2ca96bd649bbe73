//! Exact product-form analysis of the closed encoding.
//!
//! With queue 0 short-circuited, the normalization constants
//! `G(s) = sum_{|x|=s} prod_i (v_i / mu_i)^{x_i}` are computed by the
//! convolution recursion over queues. The flow-equivalent single queue then
//! serves at rate `mu(s) = G(s-1)/G(s)` when it holds `s` jobs: replacing
//! the whole network by that queue leaves the aggregated stationary law of
//! the job count unchanged.
//!
//! The module also carries a brute-force CTMC oracle (`brute_force_*`) used
//! to validate the product-form identities on small instances: it builds the
//! full uniformized chain on `{x : |x| <= S}` and solves the global balance
//! equations directly.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::QueueingNetworkSpec;

/// Default cap on the hidden state count for the brute-force oracle.
pub const DEFAULT_STATE_LIMIT: usize = 20_000;

const BALANCE_TOL: f64 = 1e-10;
/// Rescale by an exact power of two (a half-range shift) so the ratios of
/// the surviving entries stay bit-exact.
const RESCALE_EXP: i32 = 512;

/// Normalization constants `G(0..=S)` of the short-circuited network.
///
/// Stored as `values[s] * exp(log_scale)` so that instances with strongly
/// unbalanced ratios `v_i / mu_i` neither overflow nor underflow; the
/// ratios `G(s-1)/G(s)` are scale-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizingConstants {
    values: Vec<f64>,
    log_scale: f64,
}

impl NormalizingConstants {
    /// `G(s)` as a plain float. May overflow to infinity for extreme
    /// instances even though the ratios stay exact.
    pub fn g(&self, s: usize) -> f64 {
        self.values[s] * self.log_scale.exp()
    }

    /// `G(s-1) / G(s)`, the Norton service rate with `s` jobs present.
    pub fn ratio(&self, s: usize) -> f64 {
        self.values[s - 1] / self.values[s]
    }

    /// Scaled values (common factor `exp(log_scale)` omitted).
    pub fn scaled_values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Load-dependent service rates of the flow-equivalent queue.
///
/// `rates[0] = 0` and, for product-form networks, `rates` is nondecreasing,
/// discrete-concave and bounded by `sum_i mu_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentQueue {
    pub rates: Vec<f64>,
}

impl EquivalentQueue {
    pub fn capacity(&self) -> usize {
        self.rates.len() - 1
    }
}

/// Computes `G(0..=S)` by the convolution recursion
/// `G_k(s) = G_{k-1}(s) + (v_k/mu_k) G_k(s-1)` over queues `k = 1..=N`,
/// rescaling per stage to avoid overflow.
pub fn convolution_constants(spec: &QueueingNetworkSpec) -> Result<NormalizingConstants> {
    if spec.n_queues == 0 || spec.capacity == 0 {
        return Err(Error::InvalidModel(
            "convolution needs at least one queue and positive capacity".to_string(),
        ));
    }
    let visits = spec.visit_ratios()?;
    let capacity = spec.capacity;
    let mut g = vec![0.0; capacity + 1];
    g[0] = 1.0;
    let mut log_scale = 0.0f64;
    let limit = 2.0f64.powi(RESCALE_EXP);
    let shrink = 2.0f64.powi(-RESCALE_EXP);
    for i in 0..spec.n_queues {
        let ratio = visits[i + 1] / spec.service_rates[i];
        for s in 1..=capacity {
            g[s] += ratio * g[s - 1];
            // The recursion is linear, so rescaling the whole array
            // mid-stage is safe.
            if g[s] > limit {
                for v in g.iter_mut() {
                    *v *= shrink;
                }
                log_scale += RESCALE_EXP as f64 * std::f64::consts::LN_2;
            }
        }
    }
    if g.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidModel(
            "normalization constants are not positive and finite".to_string(),
        ));
    }
    Ok(NormalizingConstants {
        values: g,
        log_scale,
    })
}

/// The Norton flow-equivalent rates `mu(0) = 0`, `mu(s) = G(s-1)/G(s)`.
pub fn norton_throughput(constants: &NormalizingConstants) -> EquivalentQueue {
    let mut rates = Vec::with_capacity(constants.len());
    rates.push(0.0);
    for s in 1..constants.len() {
        rates.push(constants.ratio(s));
    }
    EquivalentQueue { rates }
}

/// Convenience: constants and equivalent queue in one call.
pub fn equivalent_queue(spec: &QueueingNetworkSpec) -> Result<EquivalentQueue> {
    Ok(norton_throughput(&convolution_constants(spec)?))
}

/// A probability measure over hidden occupancy vectors.
///
/// States are enumerated lexicographically over `(x_1, ..., x_N)`, which
/// keeps test fixtures stable.
#[derive(Debug, Clone)]
pub struct FullMeasure {
    pub states: Vec<Vec<u32>>,
    pub probs: Vec<f64>,
    /// Capacity `S` of the underlying spec (levels run `0..=S`).
    pub capacity: usize,
}

impl FullMeasure {
    pub fn prob_of(&self, x: &[u32]) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s.as_slice() == x)
            .map(|i| self.probs[i])
    }
}

/// All occupancy vectors with `|x| <= cap`, lexicographic.
pub fn enumerate_states(n_queues: usize, cap: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n_queues];
    fill(&mut out, &mut current, 0, cap);
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, queue: usize, budget: usize) {
    if queue == current.len() {
        out.push(current.clone());
        return;
    }
    for count in 0..=budget {
        current[queue] = count as u32;
        fill(out, current, queue + 1, budget - count);
    }
    current[queue] = 0;
}

fn level(x: &[u32]) -> usize {
    x.iter().map(|&c| c as usize).sum()
}

/// Stationary measure of the closed encoding under a threshold policy,
/// straight from the product form: on `|x| <= threshold`,
/// `m(x)` is proportional to `lambda^{|x|} prod_i (v_i/mu_i)^{x_i}`
/// (the queue-0 factor `(1/lambda)^{S-|x|}` up to a constant).
pub fn product_form_measure(
    spec: &QueueingNetworkSpec,
    threshold: usize,
    limit: usize,
) -> Result<FullMeasure> {
    if threshold > spec.capacity {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} exceeds capacity {}",
            spec.capacity
        )));
    }
    let states = enumerate_states(spec.n_queues, threshold);
    if states.len() > limit {
        return Err(Error::BruteForceLimit {
            states: states.len(),
            limit,
        });
    }
    let visits = spec.visit_ratios()?;
    let log_ratio: Vec<f64> = (0..spec.n_queues)
        .map(|i| (visits[i + 1] / spec.service_rates[i]).ln())
        .collect();
    let log_lambda = spec.arrival_rate.ln();
    let mut logs: Vec<f64> = states
        .iter()
        .map(|x| {
            let mut l = level(x) as f64 * log_lambda;
            for (i, &c) in x.iter().enumerate() {
                l += c as f64 * log_ratio[i];
            }
            l
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for l in logs.iter_mut() {
        *l = (*l - max).exp();
    }
    let total: f64 = logs.iter().sum();
    let probs = logs.into_iter().map(|w| w / total).collect();
    Ok(FullMeasure {
        states,
        probs,
        capacity: spec.capacity,
    })
}

/// Aggregates a full measure by level: `m(s) = sum_{|x|=s} m(x)`.
pub fn aggregate_measure(measure: &FullMeasure) -> Vec<f64> {
    let mut out = vec![0.0; measure.capacity + 1];
    for (x, &p) in measure.states.iter().zip(&measure.probs) {
        out[level(x)] += p;
    }
    out
}

/// The uniformized one-step transition matrix of the hidden chain on
/// `{x : |x| <= S}` under an observation-dependent admission rule.
pub fn original_transition_matrix(
    spec: &QueueingNetworkSpec,
    admit: impl Fn(usize) -> bool,
    limit: usize,
) -> Result<(Vec<Vec<u32>>, DMatrix<f64>)> {
    let states = enumerate_states(spec.n_queues, spec.capacity);
    if states.len() > limit {
        return Err(Error::BruteForceLimit {
            states: states.len(),
            limit,
        });
    }
    let index: HashMap<&[u32], usize> = states
        .iter()
        .enumerate()
        .map(|(i, x)| (x.as_slice(), i))
        .collect();
    let n = states.len();
    let u = spec.uniformization;
    let lambda = spec.arrival_rate;
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut scratch = vec![0u32; spec.n_queues];
    for (row, x) in states.iter().enumerate() {
        let s = level(x);
        // Arrival band: only exists while queue 0 is nonempty.
        if s < spec.capacity && admit(s) {
            for j in 0..spec.n_queues {
                let split = spec.routing[0][j + 1];
                if split > 0.0 {
                    scratch.copy_from_slice(x);
                    scratch[j] += 1;
                    let col = index[scratch.as_slice()];
                    p[(row, col)] += lambda / u * split;
                }
            }
        } else {
            p[(row, row)] += lambda / u;
        }
        // Service bands, one per queue whether busy or not.
        for i in 0..spec.n_queues {
            let rate = spec.service_rates[i] / u;
            if x[i] == 0 {
                p[(row, row)] += rate;
                continue;
            }
            for j in 0..=spec.n_queues {
                let split = spec.routing[i + 1][j];
                if split == 0.0 {
                    continue;
                }
                scratch.copy_from_slice(x);
                scratch[i] -= 1;
                if j > 0 {
                    scratch[j - 1] += 1;
                }
                let col = index[scratch.as_slice()];
                p[(row, col)] += rate * split;
            }
        }
        // Uniformization slack.
        p[(row, row)] += 1.0 - lambda / u - spec.service_rates.iter().sum::<f64>() / u;
    }
    Ok((states, p))
}

/// Stationary measure of the hidden chain under an admission rule, solved
/// exactly from the global balance equations (independent of the
/// product-form path).
pub fn brute_force_stationary(
    spec: &QueueingNetworkSpec,
    admit: impl Fn(usize) -> bool,
    limit: usize,
) -> Result<FullMeasure> {
    let (states, p) = original_transition_matrix(spec, admit, limit)?;
    let probs = linalg::stationary_distribution(&p, BALANCE_TOL)?;
    Ok(FullMeasure {
        states,
        probs,
        capacity: spec.capacity,
    })
}

/// Departure throughput conditioned on the level:
/// `sum_{|x|=s} m(x|level s) * sum_i mu_i L_{i,0} 1{x_i > 0}`.
///
/// For product-form measures this equals the Norton rate `mu(s)`. Levels
/// with zero mass yield `NaN`.
pub fn conditional_departure_throughput(
    spec: &QueueingNetworkSpec,
    measure: &FullMeasure,
) -> Vec<f64> {
    let mut mass = vec![0.0; measure.capacity + 1];
    let mut flow = vec![0.0; measure.capacity + 1];
    for (x, &p) in measure.states.iter().zip(&measure.probs) {
        let s = level(x);
        mass[s] += p;
        let mut rate = 0.0;
        for i in 0..spec.n_queues {
            if x[i] > 0 {
                rate += spec.service_rates[i] * spec.routing[i + 1][0];
            }
        }
        flow[s] += p * rate;
    }
    (0..=measure.capacity)
        .map(|s| if s == 0 { 0.0 } else { flow[s] / mass[s] })
        .collect()
}

/// Aggregated one-step kernel observed through the level, weighting hidden
/// states by their stationary conditional law:
/// `P(s'|s) = sum_{|x|=s} m(x)/m(s) sum_{|y|=s'} P(y|x)`.
///
/// Rows for levels with zero stationary mass are `NaN`.
pub fn aggregated_kernel_brute_force(
    spec: &QueueingNetworkSpec,
    admit: impl Fn(usize) -> bool + Copy,
    limit: usize,
) -> Result<Vec<Vec<f64>>> {
    let measure = brute_force_stationary(spec, admit, limit)?;
    let (states, p) = original_transition_matrix(spec, admit, limit)?;
    let levels: Vec<usize> = states.iter().map(|x| level(x)).collect();
    let s_max = spec.capacity;
    let mut mass = vec![0.0; s_max + 1];
    for (i, &lv) in levels.iter().enumerate() {
        mass[lv] += measure.probs[i];
    }
    let mut kernel = vec![vec![0.0; s_max + 1]; s_max + 1];
    for (i, &lv) in levels.iter().enumerate() {
        let weight = measure.probs[i];
        if weight == 0.0 {
            continue;
        }
        for (j, &lv2) in levels.iter().enumerate() {
            kernel[lv][lv2] += weight * p[(i, j)];
        }
    }
    for s in 0..=s_max {
        if mass[s] > 0.0 {
            for entry in kernel[s].iter_mut() {
                *entry /= mass[s];
            }
        } else {
            for entry in kernel[s].iter_mut() {
                *entry = f64::NAN;
            }
        }
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{single_queue, tandem};
    use approx::assert_abs_diff_eq;

    fn tandem22(capacity: usize) -> QueueingNetworkSpec {
        tandem(1.0, &[2.0, 2.0], capacity, 10.0, 1.0)
    }

    #[test]
    fn single_queue_constants_are_geometric() {
        let spec = single_queue(1.0, 2.0, 4, 10.0, 1.0, None);
        let g = convolution_constants(&spec).unwrap();
        for s in 0..=4 {
            assert_abs_diff_eq!(g.g(s), 0.5f64.powi(s as i32), epsilon = 1e-15);
        }
    }

    #[test]
    fn tandem_constants_by_hand_convolution() {
        // Two geometric sequences with ratio 1/2 convolve to (s+1)/2^s.
        let g = convolution_constants(&tandem22(3)).unwrap();
        for s in 0..=3 {
            assert_abs_diff_eq!(
                g.g(s),
                (s as f64 + 1.0) / 2f64.powi(s as i32),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn g_zero_is_one() {
        let spec = MultiTier::preset_spec();
        let g = convolution_constants(&spec).unwrap();
        assert_abs_diff_eq!(g.g(0), 1.0, epsilon = 1e-12);
    }

    struct MultiTier;
    impl MultiTier {
        fn preset_spec() -> QueueingNetworkSpec {
            crate::network::MultiTierParams::preset(2).build().unwrap()
        }
    }

    #[test]
    fn single_queue_norton_rate_is_constant() {
        let spec = single_queue(1.0, 2.0, 5, 10.0, 1.0, None);
        let eq = equivalent_queue(&spec).unwrap();
        assert_eq!(eq.rates[0], 0.0);
        for s in 1..=5 {
            assert_abs_diff_eq!(eq.rates[s], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tandem_norton_rates_from_constant_ratios() {
        let eq = equivalent_queue(&tandem22(3)).unwrap();
        assert_abs_diff_eq!(eq.rates[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.rates[2], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.rates[3], 3.0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rescaling_keeps_ratios_exact() {
        // Ratio v/mu = 1e4 and S = 100 give G(100) = 1e400, which would
        // overflow without rescaling.
        let spec = single_queue(1.0, 1e-4, 100, 1.0, 1.0, None);
        let g = convolution_constants(&spec).unwrap();
        let eq = norton_throughput(&g);
        for s in 1..=100 {
            assert_abs_diff_eq!(eq.rates[s], 1e-4, epsilon = 1e-16);
        }
        assert!(g.log_scale() > 0.0);
        assert!(g.g(100).is_infinite()); // the plain value genuinely overflows
    }

    #[test]
    fn convolution_matches_explicit_enumeration() {
        let spec = tandem(0.7, &[1.4, 0.9, 2.3], 4, 1.0, 1.0);
        let g = convolution_constants(&spec).unwrap();
        let visits = spec.visit_ratios().unwrap();
        for s in 0..=4 {
            let mut total = 0.0;
            for x in enumerate_states(3, s) {
                if level(&x) == s {
                    let mut term = 1.0;
                    for i in 0..3 {
                        term *= (visits[i + 1] / spec.service_rates[i]).powi(x[i] as i32);
                    }
                    total += term;
                }
            }
            assert_abs_diff_eq!(g.g(s) / total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_queue_measure_is_birth_death_balance() {
        let spec = single_queue(1.0, 2.0, 2, 10.0, 1.0, Some(3.0));
        let m = product_form_measure(&spec, 2, DEFAULT_STATE_LIMIT).unwrap();
        let agg = aggregate_measure(&m);
        assert_abs_diff_eq!(agg[0], 4.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(agg[1], 2.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(agg[2], 1.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_zero_measure_is_a_point_mass() {
        let m = product_form_measure(&tandem22(3), 0, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(m.states.len(), 1);
        assert_abs_diff_eq!(m.probs[0], 1.0, epsilon = 0.0);
        let agg = aggregate_measure(&m);
        assert_eq!(agg.len(), 4);
        assert_abs_diff_eq!(agg[0], 1.0, epsilon = 0.0);
    }

    #[test]
    fn tandem_capacity_one_three_term_product_form() {
        let spec = tandem(1.0, &[2.0, 4.0], 1, 10.0, 1.0);
        let m = product_form_measure(&spec, 1, DEFAULT_STATE_LIMIT).unwrap();
        // Proportional to 1, lambda/mu1, lambda/mu2.
        let z = 1.0 + 0.5 + 0.25;
        assert_abs_diff_eq!(m.prob_of(&[0, 0]).unwrap(), 1.0 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(m.prob_of(&[1, 0]).unwrap(), 0.5 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(m.prob_of(&[0, 1]).unwrap(), 0.25 / z, epsilon = 1e-12);
    }

    #[test]
    fn tandem_aggregate_accept_all() {
        // m(s) proportional to lambda^s G(s) = (1, 1, 3/4) -> (4, 4, 3)/11.
        let m = product_form_measure(&tandem22(2), 2, DEFAULT_STATE_LIMIT).unwrap();
        let agg = aggregate_measure(&m);
        assert_abs_diff_eq!(agg[0], 4.0 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(agg[1], 4.0 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(agg[2], 3.0 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_single_queue_birth_death() {
        let spec = single_queue(1.0, 2.0, 2, 10.0, 1.0, Some(3.0));
        let m = brute_force_stationary(&spec, |_| true, DEFAULT_STATE_LIMIT).unwrap();
        let agg = aggregate_measure(&m);
        assert_abs_diff_eq!(agg[0], 4.0 / 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(agg[1], 2.0 / 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(agg[2], 1.0 / 7.0, epsilon = 1e-10);
    }

    #[test]
    fn brute_force_threshold_zero_unit_mass_on_empty() {
        let m = brute_force_stationary(&tandem22(2), |_| false, DEFAULT_STATE_LIMIT).unwrap();
        assert_abs_diff_eq!(m.prob_of(&[0, 0]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_matches_product_form_on_tandem() {
        let spec = tandem22(2);
        let brute = brute_force_stationary(&spec, |_| true, DEFAULT_STATE_LIMIT).unwrap();
        let exact = product_form_measure(&spec, 2, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(brute.states, exact.states);
        for (b, e) in brute.probs.iter().zip(&exact.probs) {
            assert_abs_diff_eq!(b, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn conditional_throughput_equals_norton_rates() {
        let spec = tandem22(3);
        let m = brute_force_stationary(&spec, |_| true, DEFAULT_STATE_LIMIT).unwrap();
        let throughput = conditional_departure_throughput(&spec, &m);
        let eq = equivalent_queue(&spec).unwrap();
        for s in 1..=3 {
            assert_abs_diff_eq!(throughput[s], eq.rates[s], epsilon = 1e-9);
        }
    }

    #[test]
    fn state_enumeration_is_lexicographic_and_stable() {
        let states = enumerate_states(2, 2);
        assert_eq!(
            states,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![2, 0],
            ]
        );
    }

    #[test]
    fn brute_force_limit_is_enforced() {
        let spec = tandem22(3);
        match brute_force_stationary(&spec, |_| true, 5) {
            Err(Error::BruteForceLimit { states, limit: 5 }) => assert!(states > 5),
            other => panic!("expected limit error, got {other:?}"),
        }
    }
}
