//! The UCRL-M learner: optimistic model-based reinforcement learning over
//! interleaved time-step modules.
//!
//! Time-step `t` belongs to module `t mod tau_mix`. Each episode starts by
//! picking, per state-action pair, the most-visited module and building a
//! confidence region around its empirical estimates; extended value
//! iteration then returns an optimistic policy whose gain is within
//! `delta_max / sqrt(t_k)` of the best gain in the region. The policy first
//! runs for `tau_mix` discarded ramping steps (so that module subsequences
//! restart near stationarity), then explores until some `(state, module)`
//! pair doubles its count: the episode ends as soon as the in-episode count
//! `V` of the pair about to be visited reaches `max{1, N}`.
//!
//! Rewards of every step, ramping included, count toward the regret
//! `t g* - sum of realized rewards`.

pub mod counts;
pub mod evi;

use serde::{Deserialize, Serialize};

pub use counts::ModuleCounts;
pub use evi::{confidence_radii, extended_value_iteration, ConfidenceRegion, EviOutcome};

use crate::error::{Error, Result};
use crate::mdp::{optimal_threshold, Action, AggregatedMdp};
use crate::network::QueueingNetworkSpec;
use crate::productform;
use crate::simulator::{NetworkSimulator, ObservableSystem};

/// What the learner legitimately knows about the system: the capacity and
/// the cost structure, but not the arrival rate or anything behind the
/// observation boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerKnowledge {
    pub capacity: usize,
    pub rejection_cost: f64,
    pub holding_cost: f64,
    pub uniformization: f64,
}

impl LearnerKnowledge {
    pub fn from_spec(spec: &QueueingNetworkSpec) -> Self {
        LearnerKnowledge {
            capacity: spec.capacity,
            rejection_cost: spec.rejection_cost,
            holding_cost: spec.holding_cost,
            uniformization: spec.uniformization,
        }
    }

    pub fn from_mdp(mdp: &AggregatedMdp) -> Self {
        LearnerKnowledge {
            capacity: mdp.capacity(),
            rejection_cost: mdp.rejection_cost,
            holding_cost: mdp.holding_cost,
            uniformization: mdp.uniformization,
        }
    }

    /// Known bound on the reward difference between neighboring states.
    pub fn delta_max(&self) -> f64 {
        self.rejection_cost + self.holding_cost / self.uniformization
    }
}

/// How to pick the number of modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauMixPolicy {
    /// Explicit module count.
    Fixed(usize),
    /// `{"rho": x}`: `ceil(5 ln T / ln(1/rho))`.
    Rho { rho: f64 },
    /// `"oblivious"`: `ceil(ln(T)^2)`, no mixing knowledge needed.
    Keyword(String),
}

/// Module count from the horizon: `ceil(5 ln T / ln(1/rho))` when the
/// geometric mixing rate `rho` is known, else the oblivious `ceil(ln^2 T)`.
pub fn default_tau_mix(horizon: u64, rho: Option<f64>) -> Result<usize> {
    if horizon < 2 {
        return Err(Error::InvalidParameter(
            "horizon must be at least 2".to_string(),
        ));
    }
    let ln_t = (horizon as f64).ln();
    let raw = match rho {
        Some(r) => {
            if !(0.0 < r && r < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "mixing rate rho = {r} outside (0, 1)"
                )));
            }
            (5.0 * ln_t / (1.0 / r).ln()).ceil()
        }
        None => (ln_t * ln_t).ceil(),
    };
    Ok((raw as usize).max(1))
}

/// The module of time-step `t`: `t mod tau_mix`.
pub fn assign_module(t: u64, tau_mix: usize) -> usize {
    (t % tau_mix as u64) as usize
}

/// Learner options. JSON shape:
/// `{"tau_mix": 3 | "oblivious" | {"rho": 0.9}, "T": 100000, "seed": 1,
///   "record_expected_rewards": false, "episode_log": false}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcrlOptions {
    pub tau_mix: TauMixPolicy,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub seed: u64,
    #[serde(default)]
    pub record_expected_rewards: bool,
    #[serde(default)]
    pub episode_log: bool,
    /// Downsampling stride for the stored series; defaults to `T / 1000`.
    #[serde(default)]
    pub stride: Option<u64>,
}

impl UcrlOptions {
    pub fn new(tau_mix: TauMixPolicy, horizon: u64, seed: u64) -> Self {
        UcrlOptions {
            tau_mix,
            horizon,
            seed,
            record_expected_rewards: false,
            episode_log: false,
            stride: None,
        }
    }

    pub fn resolve_tau_mix(&self) -> Result<usize> {
        match &self.tau_mix {
            TauMixPolicy::Fixed(k) => {
                if *k == 0 {
                    Err(Error::InvalidParameter("tau_mix must be >= 1".to_string()))
                } else {
                    Ok(*k)
                }
            }
            TauMixPolicy::Rho { rho } => default_tau_mix(self.horizon, Some(*rho)),
            TauMixPolicy::Keyword(word) if word == "oblivious" => {
                default_tau_mix(self.horizon, None)
            }
            TauMixPolicy::Keyword(word) => Err(Error::InvalidParameter(format!(
                "unknown tau_mix keyword \"{word}\""
            ))),
        }
    }
}

/// A downsampled sample of the running totals after step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub t: u64,
    pub cum_reward: f64,
    /// `g* t - cum_reward`.
    pub regret: f64,
    /// Threshold of the policy in effect at step `t`.
    pub threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub t_start: u64,
    pub threshold: usize,
    pub optimistic_gain: f64,
    pub epsilon: f64,
    pub exploration_steps: u64,
}

/// Per-episode instrumentation (opt-in via `episode_log`): the confidence
/// region and the optimistic model EVI settled on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSnapshot {
    pub region: ConfidenceRegion,
    pub epsilon: f64,
    pub optimistic_gain: f64,
    pub policy: Vec<Action>,
    pub kernel: Vec<[f64; 3]>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_regret: f64,
    pub final_cum_reward: f64,
    pub episode_count: usize,
    /// Most frequent threshold over the steps in `(3T/4, T]`.
    pub modal_threshold_last_quarter: usize,
    /// Ramping steps whose observations were discarded from the counts.
    pub discarded_steps: u64,
}

/// Everything recorded about one seeded replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub horizon: u64,
    pub tau_mix: usize,
    pub gain_star: f64,
    pub points: Vec<RunPoint>,
    /// Expected-reward regret aligned with `points` (diagnostic series,
    /// smoother than the realized one), when requested.
    pub expected_regret: Option<Vec<f64>>,
    pub episodes: Vec<EpisodeRecord>,
    pub summary: RunSummary,
    pub regions: Option<Vec<RegionSnapshot>>,
}

/// Upper bound on the number of episodes up to the horizon:
/// `S' A tau_mix log2(8T / (S' A tau_mix))`.
pub fn episode_count_bound(n_states: usize, tau_mix: usize, horizon: u64) -> f64 {
    let sa_tau = (n_states * 2 * tau_mix) as f64;
    sa_tau * (8.0 * horizon as f64 / sa_tau).log2()
}

struct Accounting<'a> {
    horizon: u64,
    stride: u64,
    gain_star: f64,
    cum_reward: f64,
    cum_expected: f64,
    points: Vec<RunPoint>,
    expected_regret: Option<Vec<f64>>,
    quarter_start: u64,
    quarter_hist: Vec<u64>,
    expected_fn: Option<&'a dyn Fn(usize, Action) -> f64>,
}

impl<'a> Accounting<'a> {
    fn record_step(&mut self, t: u64, s: usize, a: Action, reward: f64, threshold: usize) {
        self.cum_reward += reward;
        if let Some(f) = self.expected_fn {
            self.cum_expected += f(s, a);
        }
        if t > self.quarter_start {
            self.quarter_hist[threshold] += 1;
        }
        if t % self.stride == 0 || t == self.horizon {
            self.points.push(RunPoint {
                t,
                cum_reward: self.cum_reward,
                regret: self.gain_star * t as f64 - self.cum_reward,
                threshold,
            });
            if let Some(series) = self.expected_regret.as_mut() {
                series.push(self.gain_star * t as f64 - self.cum_expected);
            }
        }
    }
}

/// Runs UCRL-M against the hidden-state network simulator. The optimal
/// gain used for the regret comes from the exact flow-equivalent solver.
pub fn run_ucrlm(spec: &QueueingNetworkSpec, options: &UcrlOptions) -> Result<RunRecord> {
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidModel(format!(
            "spec has {} violation(s); first: {}",
            violations.len(),
            violations[0]
        )));
    }
    let queue = productform::equivalent_queue(spec)?;
    let mdp = AggregatedMdp::from_network(spec, &queue)?;
    let (_, gain_star) = optimal_threshold(&mdp);
    let knowledge = LearnerKnowledge::from_spec(spec);
    let mut sim = NetworkSimulator::new(spec, None, options.seed)?;
    let expected = |s: usize, a: Action| mdp.reward(s, a);
    let expected_fn: Option<&dyn Fn(usize, Action) -> f64> = if options.record_expected_rewards {
        Some(&expected)
    } else {
        None
    };
    run_ucrlm_on(&mut sim, &knowledge, options, gain_star, expected_fn)
}

/// Runs UCRL-M against any observable system. `gain_star` calibrates the
/// regret; `expected_fn` optionally feeds the expected-reward diagnostic
/// series.
pub fn run_ucrlm_on<Sys: ObservableSystem>(
    sys: &mut Sys,
    knowledge: &LearnerKnowledge,
    options: &UcrlOptions,
    gain_star: f64,
    expected_fn: Option<&dyn Fn(usize, Action) -> f64>,
) -> Result<RunRecord> {
    let tau_mix = options.resolve_tau_mix()?;
    let horizon = options.horizon;
    if horizon < tau_mix as u64 + 1 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must exceed tau_mix = {tau_mix}"
        )));
    }
    if sys.capacity() != knowledge.capacity {
        return Err(Error::InvalidModel(
            "knowledge capacity disagrees with the system".to_string(),
        ));
    }
    let n_states = knowledge.capacity + 1;
    let delta_max = knowledge.delta_max();
    let mut counts = ModuleCounts::new(tau_mix, n_states);
    let mut acct = Accounting {
        horizon,
        stride: options.stride.unwrap_or((horizon / 1000).max(1)).max(1),
        gain_star,
        cum_reward: 0.0,
        cum_expected: 0.0,
        points: Vec::new(),
        expected_regret: expected_fn.is_some().then(Vec::new),
        quarter_start: 3 * horizon / 4,
        quarter_hist: vec![0; n_states],
        expected_fn,
    };
    let mut episodes: Vec<EpisodeRecord> = Vec::new();
    let mut regions: Option<Vec<RegionSnapshot>> = options.episode_log.then(Vec::new);
    let mut ramp_steps = 0u64;
    let mut t: u64 = 1;

    while t <= horizon {
        let t_k = t;
        let region = ConfidenceRegion::build(&counts, knowledge, t_k);
        let epsilon = delta_max / (t_k as f64).sqrt();
        let evi = extended_value_iteration(&region, epsilon)?;
        let policy = evi.policy.clone();
        let threshold = policy.effective_threshold();
        if let Some(log) = regions.as_mut() {
            log.push(RegionSnapshot {
                region: region.clone(),
                epsilon,
                optimistic_gain: evi.gain,
                policy: policy.actions().to_vec(),
                kernel: evi.kernel.clone(),
                rewards: evi.rewards.clone(),
            });
        }

        // Ramping phase: run the new policy, discard the observations.
        let mut ramped = 0usize;
        while ramped < tau_mix && t <= horizon {
            let s = sys.observed();
            let a = policy.action(s);
            let step = sys.step(a);
            counts.record(assign_module(t, tau_mix), s, a, step.observed, true)?;
            acct.record_step(t, s, a, step.reward, threshold);
            ramped += 1;
            ramp_steps += 1;
            t += 1;
        }

        // Exploration: stop as soon as the pair about to be visited has
        // doubled its count in this episode.
        let mut exploration_steps = 0u64;
        while t <= horizon {
            let s = sys.observed();
            let a = policy.action(s);
            let module = assign_module(t, tau_mix);
            if counts.in_episode(module, s, a) >= counts.cumulative(module, s, a).max(1) {
                break;
            }
            let step = sys.step(a);
            counts.record(module, s, a, step.observed, false)?;
            acct.record_step(t, s, a, step.reward, threshold);
            exploration_steps += 1;
            t += 1;
        }

        episodes.push(EpisodeRecord {
            index: episodes.len(),
            t_start: t_k,
            threshold,
            optimistic_gain: evi.gain,
            epsilon,
            exploration_steps,
        });

        #[cfg(debug_assertions)]
        {
            // Stopping guarantee and doubling: V <= max{1, N} everywhere,
            // so folding at most doubles max{1, N}.
            for s in 0..n_states {
                for a in [Action::Reject, Action::Admit] {
                    for module in 0..tau_mix {
                        let v = counts.in_episode(module, s, a);
                        let n = counts.cumulative(module, s, a);
                        debug_assert!(v <= n.max(1), "stopping violated at ({s}, {a:?})");
                    }
                }
            }
            debug_assert_eq!(counts.total_recorded() + ramp_steps, t - 1);
        }

        counts.fold_episode();
    }

    let modal = modal_threshold(&acct.quarter_hist)
        .unwrap_or_else(|| episodes.last().map(|e| e.threshold).unwrap_or(0));
    let summary = RunSummary {
        total_regret: gain_star * horizon as f64 - acct.cum_reward,
        final_cum_reward: acct.cum_reward,
        episode_count: episodes.len(),
        modal_threshold_last_quarter: modal,
        discarded_steps: ramp_steps,
    };
    Ok(RunRecord {
        seed: options.seed,
        horizon,
        tau_mix,
        gain_star,
        points: acct.points,
        expected_regret: acct.expected_regret,
        episodes,
        summary,
        regions,
    })
}

fn modal_threshold(hist: &[u64]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let mut best = 0usize;
    for (i, &count) in hist.iter().enumerate() {
        if count > hist[best] {
            best = i;
        }
    }
    Some(best)
}
