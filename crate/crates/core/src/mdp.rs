//! The aggregated admission MDP and its exact solvers.
//!
//! States are the job counts `0..=S`, actions are reject/admit. Under the
//! flow-equivalent reduction the dynamics are a uniformized birth-death
//! chain: births occur with probability `lambda/U` when a job is admitted
//! below capacity and deaths with probability `mu(s)/U`. Rewards are
//! `r(s, a) = (lambda R_c a + h (S - s)) / U` with admission at capacity
//! treated as the physically forced rejection (a full buffer always
//! rejects, so `r(S, .) = r(S, reject)`).
//!
//! Besides the gain-optimal policy (threshold enumeration cross-checked by
//! relative value iteration) the module computes exact diagnostics:
//! threshold stationary measures, expected hitting times to the empty
//! state, bias-variation bounds, total-variation mixing profiles and the
//! MDP diameter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::QueueingNetworkSpec;
use crate::productform::EquivalentQueue;

const POISSON_TOL: f64 = 1e-9;
/// Damping factor applied to value-iteration updates so that
/// near-deterministic optimistic models cannot oscillate with period 2.
/// The stopping span is always evaluated on the undamped operator.
pub const VALUE_ITERATION_DAMPING: f64 = 0.99;
/// Iteration cap for (extended) value iteration.
pub const VALUE_ITERATION_CAP: usize = 1_000_000;

/// Admission decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Reject = 0,
    Admit = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Reject
        } else {
            Action::Admit
        }
    }
}

/// A deterministic stationary policy on the observed job count.
///
/// Canonical form forces reject at capacity: admission at `s = S` cannot
/// cause a birth, and forcing reject keeps rewards consistent with the
/// simulator where a full buffer always rejects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    actions: Vec<Action>,
}

impl Policy {
    /// Admit exactly when `s < n`. Requires `n <= capacity`.
    pub fn threshold(n: usize, capacity: usize) -> Policy {
        assert!(n <= capacity, "threshold {n} above capacity {capacity}");
        let actions = (0..=capacity)
            .map(|s| if s < n { Action::Admit } else { Action::Reject })
            .collect();
        Policy { actions }
    }

    /// The maximal policy: admit whenever below capacity.
    pub fn accept_all(capacity: usize) -> Policy {
        Policy::threshold(capacity, capacity)
    }

    /// Canonicalizes an arbitrary action vector (forces reject at capacity).
    pub fn from_actions(mut actions: Vec<Action>) -> Policy {
        assert!(!actions.is_empty());
        let last = actions.len() - 1;
        actions[last] = Action::Reject;
        Policy { actions }
    }

    pub fn action(&self, s: usize) -> Action {
        self.actions[s]
    }

    pub fn admits(&self, s: usize) -> bool {
        self.actions[s] == Action::Admit
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn capacity(&self) -> usize {
        self.actions.len() - 1
    }

    /// `Some(n)` if the policy admits exactly below `n`.
    pub fn as_threshold(&self) -> Option<usize> {
        let n = self.effective_threshold();
        if (0..self.actions.len()).all(|s| self.admits(s) == (s < n)) {
            Some(n)
        } else {
            None
        }
    }

    /// The first reject state. The chain never climbs past it, so the
    /// recurrent class and the stationary measure only depend on this value.
    pub fn effective_threshold(&self) -> usize {
        self.actions
            .iter()
            .position(|a| *a == Action::Reject)
            .expect("canonical policies reject at capacity")
    }
}

/// The `S+1`-state, two-action uniformized birth-death admission MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedMdp {
    /// Arrival (birth) rate. May be zero for degenerate diagnostics.
    pub arrival_rate: f64,
    /// Load-dependent service rates, `rates[0] = 0`, indices `0..=S`.
    pub service_rates: Vec<f64>,
    pub uniformization: f64,
    pub rejection_cost: f64,
    pub holding_cost: f64,
}

impl AggregatedMdp {
    pub fn new(
        arrival_rate: f64,
        service_rates: Vec<f64>,
        uniformization: f64,
        rejection_cost: f64,
        holding_cost: f64,
    ) -> Result<AggregatedMdp> {
        if service_rates.is_empty() {
            return Err(Error::InvalidModel("service_rates must cover s = 0".into()));
        }
        if service_rates[0] != 0.0 {
            return Err(Error::InvalidModel("mu(0) must be 0".into()));
        }
        if service_rates.iter().skip(1).any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidModel("mu(s) must be > 0 for s >= 1".into()));
        }
        if arrival_rate < 0.0 || rejection_cost < 0.0 || holding_cost < 0.0 {
            return Err(Error::InvalidModel("rates and costs must be >= 0".into()));
        }
        let max_rate = service_rates.iter().cloned().fold(0.0f64, f64::max);
        if uniformization < arrival_rate + max_rate - 1e-12 {
            return Err(Error::InvalidModel(format!(
                "uniformization {uniformization} below lambda + max mu = {}",
                arrival_rate + max_rate
            )));
        }
        Ok(AggregatedMdp {
            arrival_rate,
            service_rates,
            uniformization,
            rejection_cost,
            holding_cost,
        })
    }

    /// Builds the MDP from a network spec and its equivalent queue.
    pub fn from_network(spec: &QueueingNetworkSpec, queue: &EquivalentQueue) -> Result<Self> {
        if queue.capacity() != spec.capacity {
            return Err(Error::InvalidModel(format!(
                "equivalent queue covers {} jobs, spec capacity is {}",
                queue.capacity(),
                spec.capacity
            )));
        }
        Self::new(
            spec.arrival_rate,
            queue.rates.clone(),
            spec.uniformization,
            spec.rejection_cost,
            spec.holding_cost,
        )
    }

    pub fn capacity(&self) -> usize {
        self.service_rates.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.service_rates.len()
    }

    pub fn r_max(&self) -> f64 {
        (self.arrival_rate * self.rejection_cost + self.holding_cost * self.capacity() as f64)
            / self.uniformization
    }

    /// Bound on the reward difference between neighboring states.
    pub fn delta_max(&self) -> f64 {
        self.rejection_cost + self.holding_cost / self.uniformization
    }

    /// Expected reward, with the forced-reject convention at capacity.
    pub fn reward(&self, s: usize, action: Action) -> f64 {
        let admit = action == Action::Admit && s < self.capacity();
        let admit_term = if admit {
            self.arrival_rate * self.rejection_cost
        } else {
            0.0
        };
        (admit_term + self.holding_cost * (self.capacity() - s) as f64) / self.uniformization
    }

    pub fn birth_prob(&self, s: usize, action: Action) -> f64 {
        if action == Action::Admit && s < self.capacity() {
            self.arrival_rate / self.uniformization
        } else {
            0.0
        }
    }

    pub fn death_prob(&self, s: usize) -> f64 {
        self.service_rates[s] / self.uniformization
    }

    pub fn self_loop_prob(&self, s: usize, action: Action) -> f64 {
        let p = 1.0 - self.birth_prob(s, action) - self.death_prob(s);
        debug_assert!(p >= -1e-12, "kernel row leaves the simplex");
        p.max(0.0)
    }

    /// One-step kernel of a policy as a dense row-stochastic matrix.
    pub fn kernel(&self, policy: &Policy) -> DMatrix<f64> {
        let n = self.n_states();
        let mut p = DMatrix::<f64>::zeros(n, n);
        for s in 0..n {
            let a = policy.action(s);
            if s > 0 {
                p[(s, s - 1)] = self.death_prob(s);
            }
            if s + 1 < n {
                p[(s, s + 1)] = self.birth_prob(s, a);
            }
            p[(s, s)] = self.self_loop_prob(s, a);
        }
        p
    }
}

/// Gain and bias of a policy, bias normalized so that `bias[S] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
}

/// Stationary measure of the threshold-`n` policy: supported on `0..=n`
/// with `m(s)` proportional to `prod_{i<=s} lambda/mu(i)` (detailed
/// balance of the truncated birth-death chain).
pub fn threshold_stationary_measure(mdp: &AggregatedMdp, threshold: usize) -> Vec<f64> {
    assert!(threshold <= mdp.capacity());
    let mut weights = vec![0.0; mdp.n_states()];
    let mut w = 1.0f64;
    weights[0] = w;
    let mut max = w;
    for s in 1..=threshold {
        w *= mdp.arrival_rate / mdp.service_rates[s];
        weights[s] = w;
        max = max.max(w);
    }
    let total: f64 = weights.iter().map(|x| x / max).sum();
    weights.iter().map(|x| (x / max) / total).collect()
}

/// Long-run average reward of the threshold-`n` policy.
pub fn threshold_gain(mdp: &AggregatedMdp, threshold: usize) -> f64 {
    let m = threshold_stationary_measure(mdp, threshold);
    let policy = Policy::threshold(threshold, mdp.capacity());
    m.iter()
        .enumerate()
        .map(|(s, &p)| p * mdp.reward(s, policy.action(s)))
        .sum()
}

/// Gain-optimal threshold by enumeration, ties broken toward the smaller
/// threshold.
pub fn optimal_threshold(mdp: &AggregatedMdp) -> (usize, f64) {
    let mut best = (0usize, threshold_gain(mdp, 0));
    for n in 1..=mdp.capacity() {
        let g = threshold_gain(mdp, n);
        if g > best.1 {
            best = (n, g);
        }
    }
    best
}

/// Stationary measure of an arbitrary canonical policy. The chain never
/// climbs past the first reject state, so this is the threshold measure of
/// [`Policy::effective_threshold`].
pub fn policy_stationary_measure(mdp: &AggregatedMdp, policy: &Policy) -> Vec<f64> {
    threshold_stationary_measure(mdp, policy.effective_threshold())
}

/// Exact gain and bias of a policy via the fundamental-matrix solve
/// `(I - P + 1 m^T) h = r - g`, normalized to `bias[S] = 0`.
pub fn policy_gain_bias(mdp: &AggregatedMdp, policy: &Policy) -> Result<GainBias> {
    let n = mdp.n_states();
    let p = mdp.kernel(policy);
    let m = policy_stationary_measure(mdp, policy);
    let rewards: Vec<f64> = (0..n).map(|s| mdp.reward(s, policy.action(s))).collect();
    let gain: f64 = m.iter().zip(&rewards).map(|(mi, ri)| mi * ri).sum();

    let mut a = DMatrix::<f64>::identity(n, n) - &p;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += m[j];
        }
    }
    let b = DVector::from_iterator(n, rewards.iter().map(|r| r - gain));
    let mut bias = linalg::solve(a, b, 1e-9, "Poisson equation")?;
    let shift = bias[n - 1];
    for h in bias.iter_mut() {
        *h -= shift;
    }

    let mut worst = 0.0f64;
    for s in 0..n {
        let mut expected = 0.0;
        for t in 0..n {
            expected += p[(s, t)] * bias[t];
        }
        worst = worst.max((rewards[s] - gain + expected - bias[s]).abs());
    }
    if worst > POISSON_TOL {
        return Err(Error::ResidualTooLarge {
            context: "Poisson equation".to_string(),
            residual: worst,
            tolerance: POISSON_TOL,
        });
    }
    Ok(GainBias { gain, bias })
}

/// Relative value iteration on the known MDP with span-based stopping
/// (`max_s(w - u) - min_s(w - u) < epsilon`), returning the greedy policy
/// and its exact gain/bias from a final Poisson solve.
///
/// Ties between actions break toward reject. Updates are damped by
/// [`VALUE_ITERATION_DAMPING`]; the span test uses the undamped operator.
pub fn relative_value_iteration(
    mdp: &AggregatedMdp,
    epsilon: f64,
) -> Result<(GainBias, Policy)> {
    assert!(epsilon > 0.0);
    let n = mdp.n_states();
    let mut u = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut greedy = vec![Action::Reject; n];
    for iteration in 0..VALUE_ITERATION_CAP {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_action = Action::Reject;
            for action in [Action::Reject, Action::Admit] {
                let mut value = mdp.reward(s, action) + mdp.self_loop_prob(s, action) * u[s];
                if s > 0 {
                    value += mdp.death_prob(s) * u[s - 1];
                }
                if s + 1 < n {
                    value += mdp.birth_prob(s, action) * u[s + 1];
                }
                if value > best {
                    best = value;
                    best_action = action;
                }
            }
            w[s] = best;
            greedy[s] = best_action;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let d = w[s] - u[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi - lo < epsilon {
            let policy = Policy::from_actions(greedy);
            let solution = policy_gain_bias(mdp, &policy)?;
            let _ = iteration;
            return Ok((solution, policy));
        }
        let gamma = VALUE_ITERATION_DAMPING;
        let mut min_u = f64::INFINITY;
        for s in 0..n {
            u[s] = (1.0 - gamma) * u[s] + gamma * w[s];
            min_u = min_u.min(u[s]);
        }
        for x in u.iter_mut() {
            *x -= min_u;
        }
    }
    let span = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let d = w[s] - u[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi - lo
    };
    Err(Error::IterationCap {
        iterations: VALUE_ITERATION_CAP,
        span,
        target: epsilon,
    })
}

/// Expected number of steps to reach the empty state from each state,
/// by the birth-death ladder recursion
/// `E tau_s = E tau_{s-1} + (U/mu(s)) sum_{s'>=s} prod_{i=s+1..s'} lambda_i/mu(i)`
/// where the product dies at the first state whose action is reject.
pub fn hitting_times(mdp: &AggregatedMdp, policy: &Policy) -> Vec<f64> {
    let capacity = mdp.capacity();
    let birth_active =
        |i: usize| i < capacity && policy.admits(i) && mdp.arrival_rate > 0.0;
    let mut times = vec![0.0; mdp.n_states()];
    for s in 1..=capacity {
        let mut total = 0.0;
        let mut prod = 1.0;
        for upper in s..=capacity {
            if upper > s {
                // Climbing from upper-1 to upper needs a birth there.
                if !birth_active(upper - 1) {
                    break;
                }
                prod *= mdp.arrival_rate / mdp.service_rates[upper];
            }
            total += prod;
        }
        times[s] = times[s - 1] + mdp.uniformization / mdp.service_rates[s] * total;
    }
    times
}

/// Independent check of [`hitting_times`]: solve the first-step linear
/// system `(I - Q) tau = 1` on the states `1..=S` directly.
pub fn hitting_times_linear_solve(mdp: &AggregatedMdp, policy: &Policy) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let p = mdp.kernel(policy);
    let m = n - 1;
    let mut a = DMatrix::<f64>::identity(m, m);
    for s in 1..n {
        for t in 1..n {
            a[(s - 1, t - 1)] -= p[(s, t)];
        }
    }
    let b = DVector::from_element(m, 1.0);
    let inner = linalg::solve(a, b, 1e-9, "hitting times")?;
    let mut times = vec![0.0];
    times.extend(inner);
    Ok(times)
}

/// Bound on the bias variation of any policy:
/// `Delta(s) = 2 delta_max m_max(0)^{-1} sum_{i<=s} U/mu(i)` where
/// `m_max` is the accept-all stationary measure. Returned with
/// `delta[0] = 0` so that `delta[s]` bounds `|h(s) - h(s-1)|`.
pub fn bias_variation_bound(mdp: &AggregatedMdp) -> Vec<f64> {
    let capacity = mdp.capacity();
    let mut inv_m0 = 1.0f64;
    let mut prod = 1.0f64;
    for s in 1..=capacity {
        prod *= mdp.arrival_rate / mdp.service_rates[s];
        inv_m0 += prod;
    }
    let mut delta = vec![0.0; capacity + 1];
    let mut partial = 0.0;
    for s in 1..=capacity {
        partial += mdp.uniformization / mdp.service_rates[s];
        delta[s] = 2.0 * mdp.delta_max() * inv_m0 * partial;
    }
    delta
}

/// Worst-case total-variation distance to stationarity as a function of
/// time, from exact matrix powers of the policy kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingProfile {
    /// `tv[k]` is `d(k+1) = max_s ||P^{k+1}(s, .) - m||_TV`.
    pub tv: Vec<f64>,
    /// Smallest `t` with `d(t) <= 1/4`, if reached within the horizon.
    pub t_mix: Option<usize>,
}

pub fn mixing_profile(mdp: &AggregatedMdp, policy: &Policy, horizon: usize) -> MixingProfile {
    let n = mdp.n_states();
    let p = mdp.kernel(policy);
    let m = policy_stationary_measure(mdp, policy);
    let mut power = p.clone();
    let mut tv = Vec::with_capacity(horizon);
    let mut t_mix = None;
    for t in 1..=horizon {
        let mut worst = 0.0f64;
        for s in 0..n {
            let mut l1 = 0.0;
            for j in 0..n {
                l1 += (power[(s, j)] - m[j]).abs();
            }
            worst = worst.max(0.5 * l1);
        }
        tv.push(worst);
        if t_mix.is_none() && worst <= 0.25 {
            t_mix = Some(t);
        }
        if t < horizon {
            power *= &p;
        }
    }
    MixingProfile { tv, t_mix }
}

/// Diameter of the MDP over threshold policies: for every ordered pair
/// `(s, s')`, the best expected travel time over the `S+1` threshold
/// kernels, maximized over pairs. Targets above the threshold are only
/// reachable from above; infeasible combinations are skipped.
pub fn diameter_estimate(mdp: &AggregatedMdp) -> f64 {
    let n = mdp.n_states();
    if n == 1 {
        return 0.0;
    }
    let mut best = vec![vec![f64::INFINITY; n]; n]; // [from][to]
    for threshold in 0..n {
        let policy = Policy::threshold(threshold, mdp.capacity());
        let p = mdp.kernel(&policy);
        for target in 0..n {
            // States that can reach `target` under this policy.
            let feasible: Vec<usize> = (0..n)
                .filter(|&s| s != target && (target <= threshold || s > target))
                .collect();
            if feasible.is_empty() {
                continue;
            }
            let m = feasible.len();
            let mut a = DMatrix::<f64>::identity(m, m);
            for (i, &s) in feasible.iter().enumerate() {
                for (j, &t) in feasible.iter().enumerate() {
                    a[(i, j)] -= p[(s, t)];
                }
            }
            let b = DVector::from_element(m, 1.0);
            if let Ok(times) = linalg::solve(a, b, 1e-9, "diameter hitting times") {
                for (i, &s) in feasible.iter().enumerate() {
                    if times[i] < best[s][target] {
                        best[s][target] = times[i];
                    }
                }
            }
        }
    }
    let mut diameter = 0.0f64;
    for s in 0..n {
        for t in 0..n {
            if s != t {
                diameter = diameter.max(best[s][t]);
            }
        }
    }
    diameter
}
