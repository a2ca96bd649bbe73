//! Confidence regions and extended value iteration.
//!
//! For each `(s, a)` the region carries the empirical estimates of the
//! most-visited module together with a reward radius
//! `delta_max sqrt(2 log(2 A t_k) / max{1, N})` and a transition L1 radius
//! `sqrt(8 log(2 A t_k) / max{1, N})` capped at 2. EVI iterates the
//! optimistic Bellman operator, maximizing jointly over the action and the
//! in-support distributions inside the L1 ball, and stops when the span of
//! the undamped update drops below the requested accuracy; the midpoint of
//! that update brackets the optimistic gain.

use serde::{Deserialize, Serialize};

use super::counts::{ModuleCounts, DOWN, STAY, UP};
use super::LearnerKnowledge;
use crate::error::{Error, Result};
use crate::mdp::{Action, Policy, VALUE_ITERATION_CAP, VALUE_ITERATION_DAMPING};

/// Admission MDPs have two actions; the radii use `log(2 A t_k)`.
pub const N_ACTIONS: f64 = 2.0;

/// Reward and transition radii for a pair visited `visits` times in its
/// best module, at episode start `t_k`.
pub fn confidence_radii(t_k: u64, visits: u64, delta_max: f64) -> (f64, f64) {
    assert!(t_k >= 1);
    let log_term = (2.0 * N_ACTIONS * t_k as f64).ln();
    let denom = visits.max(1) as f64;
    let reward = delta_max * (2.0 * log_term / denom).sqrt();
    let transition = (8.0 * log_term / denom).sqrt().min(2.0);
    (reward, transition)
}

/// The confidence region of one episode: per `(s, a)`, the chosen module's
/// empirical estimates and the radii around them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub t_k: u64,
    pub capacity: usize,
    /// Flattened `s * 2 + a` indexing for all per-pair vectors.
    pub module: Vec<usize>,
    pub visits: Vec<u64>,
    /// Empirical transition estimates over `{down, stay, up}`.
    pub p_hat: Vec<[f64; 3]>,
    pub r_hat: Vec<f64>,
    pub reward_radius: Vec<f64>,
    pub transition_radius: Vec<f64>,
    /// Structural reward bounds: the learner knows
    /// `r(s, a) = (lambda R_c a 1{s<S} + h (S-s)) / U` up to `lambda`, so
    /// optimistic rewards clip to `[h(S-s)/U, a R_c 1{s<S} + h(S-s)/U]`
    /// (bounding `lambda` by `U`). Reject rewards carry no uncertainty.
    pub reward_lo: Vec<f64>,
    pub reward_hi: Vec<f64>,
}

impl ConfidenceRegion {
    pub fn pair(s: usize, a: Action) -> usize {
        s * 2 + a.index()
    }

    /// Builds the region from the counts per Algorithm 1: for every pair,
    /// pick the most-visited module, take its estimates
    /// (`r_hat = p_hat(up) R_c + h (S - s)/U`), and attach the radii.
    pub fn build(counts: &ModuleCounts, knowledge: &LearnerKnowledge, t_k: u64) -> Self {
        let n_states = counts.n_states();
        let capacity = n_states - 1;
        let pairs = n_states * 2;
        let mut region = ConfidenceRegion {
            t_k,
            capacity,
            module: vec![0; pairs],
            visits: vec![0; pairs],
            p_hat: vec![[0.0; 3]; pairs],
            r_hat: vec![0.0; pairs],
            reward_radius: vec![0.0; pairs],
            transition_radius: vec![0.0; pairs],
            reward_lo: vec![0.0; pairs],
            reward_hi: vec![0.0; pairs],
        };
        for s in 0..n_states {
            for a in [Action::Reject, Action::Admit] {
                let i = Self::pair(s, a);
                let module = counts.best_module(s, a);
                let (p_hat, visits) = counts.estimates(s, a, module);
                let (reward, transition) =
                    confidence_radii(t_k, visits, knowledge.delta_max());
                region.module[i] = module;
                region.visits[i] = visits;
                region.p_hat[i] = p_hat;
                region.r_hat[i] = p_hat[UP] * knowledge.rejection_cost
                    + knowledge.holding_cost * (capacity - s) as f64
                        / knowledge.uniformization;
                region.reward_radius[i] = reward;
                region.transition_radius[i] = transition;
                let known = knowledge.holding_cost * (capacity - s) as f64
                    / knowledge.uniformization;
                region.reward_lo[i] = known;
                region.reward_hi[i] = if a == Action::Admit && s < capacity {
                    knowledge.rejection_cost + known
                } else {
                    known
                };
            }
        }
        region
    }

    /// A region collapsed onto a known MDP: exact kernel and rewards, zero
    /// radii. EVI over it reduces to plain value iteration on that MDP.
    pub fn degenerate(mdp: &crate::mdp::AggregatedMdp) -> Self {
        let n_states = mdp.n_states();
        let capacity = mdp.capacity();
        let pairs = n_states * 2;
        let mut region = ConfidenceRegion {
            t_k: 1,
            capacity,
            module: vec![0; pairs],
            visits: vec![u64::MAX; pairs],
            p_hat: vec![[0.0; 3]; pairs],
            r_hat: vec![0.0; pairs],
            reward_radius: vec![0.0; pairs],
            transition_radius: vec![0.0; pairs],
            reward_lo: vec![0.0; pairs],
            reward_hi: vec![0.0; pairs],
        };
        for s in 0..n_states {
            for a in [Action::Reject, Action::Admit] {
                let i = Self::pair(s, a);
                region.p_hat[i] = [
                    mdp.death_prob(s),
                    mdp.self_loop_prob(s, a),
                    mdp.birth_prob(s, a),
                ];
                region.r_hat[i] = mdp.reward(s, a);
                let known = mdp.holding_cost * (capacity - s) as f64 / mdp.uniformization;
                region.reward_lo[i] = known;
                region.reward_hi[i] = if a == Action::Admit && s < capacity {
                    mdp.rejection_cost + known
                } else {
                    known
                };
            }
        }
        region
    }

    /// Whether a reward/kernel pair lies inside the region (oracle check
    /// used by instrumented runs; the learner itself never sees the truth).
    pub fn contains(&self, s: usize, a: Action, true_p: &[f64; 3], true_r: f64) -> bool {
        let i = Self::pair(s, a);
        let l1: f64 = (0..3).map(|k| (true_p[k] - self.p_hat[i][k]).abs()).sum();
        l1 <= self.transition_radius[i] + 1e-12
            && (true_r - self.r_hat[i]).abs() <= self.reward_radius[i] + 1e-12
    }
}

/// Result of one EVI solve: the greedy policy of the optimistic MDP, the
/// span-midpoint gain estimate and the optimistic model along the policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EviOutcome {
    pub policy: Policy,
    pub gain: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Optimistic kernel `p_tilde(.|s, policy(s))` over `{down, stay, up}`.
    pub kernel: Vec<[f64; 3]>,
    /// Optimistic rewards `r_tilde(s, policy(s))`.
    pub rewards: Vec<f64>,
}

/// Inner maximization of `sum p(s') u(s')` over the in-support L1 ball of
/// radius `radius` around `p_hat`: move up to `radius/2` mass onto the
/// best-valued support state, then strip the excess from the worst-valued
/// states upward. Ties prefer the smaller state index.
fn optimistic_distribution(
    p_hat: &[f64; 3],
    radius: f64,
    values: &[f64; 3],
    valid: &[bool; 3],
) -> [f64; 3] {
    let mut q = *p_hat;
    let mut best = usize::MAX;
    for slot in 0..3 {
        if valid[slot] && (best == usize::MAX || values[slot] > values[best]) {
            best = slot;
        }
    }
    if radius >= 2.0 {
        // The ball covers the whole in-support simplex.
        let mut q = [0.0; 3];
        q[best] = 1.0;
        return q;
    }
    let add = (radius / 2.0).min(1.0 - q[best]);
    q[best] += add;
    let mut excess: f64 = q.iter().sum::<f64>() - 1.0;
    if excess > 0.0 {
        let mut order: Vec<usize> = (0..3).filter(|&k| valid[k] && k != best).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        for slot in order {
            if excess >= q[slot] {
                excess -= q[slot];
                q[slot] = 0.0;
            } else {
                q[slot] -= excess;
                excess = 0.0;
                break;
            }
        }
        // Rounding residue, at most a few ulps.
        if excess > 0.0 {
            q[best] -= excess;
        }
    }
    q
}

/// Extended value iteration over the confidence region.
///
/// Optimistic rewards are `r_hat + radius` clipped to the structural range
/// `[reward_lo, reward_hi]` the learner knows (reject rewards carry no
/// uncertainty at all). Stops when
/// `max_s(w - u) - min_s(w - u) < epsilon`; the returned gain is
/// the midpoint of that bracket, which always straddles the optimal gain
/// of the extended MDP. Updates are damped (see
/// [`VALUE_ITERATION_DAMPING`]) so near-deterministic optimistic kernels
/// cannot cycle.
pub fn extended_value_iteration(
    region: &ConfidenceRegion,
    epsilon: f64,
) -> Result<EviOutcome> {
    assert!(epsilon > 0.0);
    let n = region.capacity + 1;
    let mut u = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut greedy = vec![Action::Reject; n];
    let mut kernel = vec![[0.0f64; 3]; n];
    let mut rewards = vec![0.0f64; n];
    let mut span = f64::INFINITY;

    for iteration in 0..VALUE_ITERATION_CAP {
        for s in 0..n {
            let valid = [s > 0, true, s + 1 < n];
            let values = [
                if s > 0 { u[s - 1] } else { f64::NEG_INFINITY },
                u[s],
                if s + 1 < n { u[s + 1] } else { f64::NEG_INFINITY },
            ];
            // A full buffer always rejects, so capacity has a single real
            // action. Planning over the phantom (S, admit) pair would keep
            // an unplayable, permanently unvisited estimate optimistic
            // forever.
            let actions: &[Action] = if s + 1 < n {
                &[Action::Reject, Action::Admit]
            } else {
                &[Action::Reject]
            };
            let mut best_value = f64::NEG_INFINITY;
            for &a in actions {
                let i = ConfidenceRegion::pair(s, a);
                let r = (region.r_hat[i] + region.reward_radius[i])
                    .clamp(region.reward_lo[i], region.reward_hi[i]);
                let q = optimistic_distribution(
                    &region.p_hat[i],
                    region.transition_radius[i],
                    &values,
                    &valid,
                );
                let mut value = r + q[STAY] * u[s];
                if s > 0 {
                    value += q[DOWN] * u[s - 1];
                }
                if s + 1 < n {
                    value += q[UP] * u[s + 1];
                }
                if value > best_value {
                    best_value = value;
                    w[s] = value;
                    greedy[s] = a;
                    kernel[s] = q;
                    rewards[s] = r;
                }
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let d = w[s] - u[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        span = hi - lo;
        if span < epsilon {
            return Ok(EviOutcome {
                policy: Policy::from_actions(greedy),
                gain: 0.5 * (hi + lo),
                values: w,
                iterations: iteration + 1,
                kernel,
                rewards,
            });
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
    Err(Error::IterationCap {
        iterations: VALUE_ITERATION_CAP,
        span,
        target: epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radii_formula_plugin() {
        let (reward, transition) = confidence_radii(16, 8, 1.0);
        assert_abs_diff_eq!(reward, (2.0 * 64f64.ln() / 8.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(reward, 1.0197, epsilon = 1e-4);
        assert_eq!(transition, 2.0); // sqrt(8 ln 64 / 8) = 2.039 capped
    }

    #[test]
    fn radii_use_max_one_denominator_and_shrink() {
        let (r0, t0) = confidence_radii(16, 0, 1.0);
        let (r1, t1) = confidence_radii(16, 1, 1.0);
        assert_eq!(r0, r1);
        assert_eq!(t0, t1);
        let (r_big, t_big) = confidence_radii(16, 10_000, 1.0);
        assert!(r_big < r1 && t_big < t1);
        // Nondecreasing in t_k at fixed N.
        let (r_later, _) = confidence_radii(1_000, 10_000, 1.0);
        assert!(r_later > r_big);
    }

    #[test]
    fn inner_maximization_hand_example() {
        let q = optimistic_distribution(
            &[0.2, 0.5, 0.3],
            0.2,
            &[0.0, 1.0, 2.0],
            &[true, true, true],
        );
        assert_abs_diff_eq!(q[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q[2], 0.4, epsilon = 1e-15);
        let value = q[0] * 0.0 + q[1] * 1.0 + q[2] * 2.0;
        assert_abs_diff_eq!(value, 1.3, epsilon = 1e-15);
    }

    #[test]
    fn full_radius_concentrates_on_argmax() {
        let q = optimistic_distribution(
            &[0.3, 0.4, 0.3],
            2.0,
            &[5.0, 1.0, 2.0],
            &[true, true, true],
        );
        assert_eq!(q, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn boundary_states_keep_support() {
        // At s = 0 the down slot is invalid and must stay empty.
        let q = optimistic_distribution(
            &[0.0, 0.7, 0.3],
            1.0,
            &[f64::NEG_INFINITY, 0.0, 3.0],
            &[false, true, true],
        );
        assert_eq!(q[0], 0.0);
        assert_abs_diff_eq!(q[1] + q[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[2], 0.8, epsilon = 1e-15);
    }
}
