//! Uniformized discrete-time simulation of the hidden-state network under
//! admission control.
//!
//! Each step draws one uniform variate and partitions it into the arrival
//! band `[0, lambda/U)`, one service band of width `mu_i/U` per queue (a
//! no-op when the queue is idle) and the self-loop remainder; a second
//! variate picks the routing destination when needed. Draws are keyed by
//! `(seed, step)` through a counter-based ChaCha8 stream (step `t` reads
//! words `8t..8t+8`), so a step's outcome never depends on how many draws
//! earlier steps consumed and parallel replications are reproducible.
//!
//! The learner-facing surface is [`ObservableSystem`]: only the total job
//! count, the action and the realized reward cross it. Hidden occupancies
//! are reachable through [`NetworkSimulator::hidden_occupancy`] for tests
//! and diagnostics, not through the trait.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, Policy};
use crate::network::QueueingNetworkSpec;

/// Words of ChaCha output reserved per step (two `f64` draws plus margin).
const WORDS_PER_STEP: u128 = 8;

/// What happened during one uniformized step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    ArrivalAdmitted { queue: usize },
    ArrivalRejected,
    InternalMove { from: usize, to: usize },
    Departure { queue: usize },
    SelfLoop,
}

/// Full outcome of a step: event, resulting job count, realized reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub event: EventKind,
    pub observed: usize,
    pub reward: f64,
}

/// What the learner sees after acting: the new job count and the reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStep {
    pub observed: usize,
    pub reward: f64,
}

/// The learner-facing interface: observe the total job count, act, collect
/// the realized reward. Nothing else crosses this boundary.
pub trait ObservableSystem {
    fn capacity(&self) -> usize;
    fn observed(&self) -> usize;
    fn step(&mut self, action: Action) -> ObservedStep;
}

/// Uniformized simulator of the closed-network encoding with hidden
/// per-queue occupancies.
#[derive(Debug, Clone)]
pub struct NetworkSimulator {
    spec: QueueingNetworkSpec,
    occupancy: Vec<u32>,
    observed: usize,
    step_index: u64,
    rng: ChaCha8Rng,
    r_max: f64,
}

impl NetworkSimulator {
    /// Deterministic initial state for `(spec, initial, seed)`.
    pub fn new(
        spec: &QueueingNetworkSpec,
        initial: Option<&[u32]>,
        seed: u64,
    ) -> Result<NetworkSimulator> {
        let occupancy = match initial {
            Some(x) => {
                if x.len() != spec.n_queues {
                    return Err(Error::InvalidParameter(format!(
                        "initial occupancy has {} queues, spec has {}",
                        x.len(),
                        spec.n_queues
                    )));
                }
                x.to_vec()
            }
            None => vec![0; spec.n_queues],
        };
        let total: usize = occupancy.iter().map(|&c| c as usize).sum();
        if total > spec.capacity {
            return Err(Error::InitialOverCapacity {
                total,
                capacity: spec.capacity,
            });
        }
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Ok(NetworkSimulator {
            spec: spec.clone(),
            observed: total,
            occupancy,
            step_index: 0,
            rng: ChaCha8Rng::from_seed(key),
            r_max: (spec.arrival_rate * spec.rejection_cost
                + spec.holding_cost * spec.capacity as f64)
                / spec.uniformization,
        })
    }

    pub fn hidden_occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_index
    }

    fn draw_pair(&mut self) -> (f64, f64) {
        self.rng
            .set_word_pos(self.step_index as u128 * WORDS_PER_STEP);
        (self.rng.gen::<f64>(), self.rng.gen::<f64>())
    }

    /// Picks a destination among routing row `from` (0 = outside), skipping
    /// column 0 when `include_exit` is false.
    fn route(&self, from: usize, u: f64, include_exit: bool) -> usize {
        let row = &self.spec.routing[from];
        let mut acc = 0.0;
        let start = if include_exit { 0 } else { 1 };
        for (j, &p) in row.iter().enumerate().skip(start) {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // Guard against accumulated rounding at u close to 1.
        row.len() - 1
    }

    /// Advances one uniformized step under `action`, returning the event,
    /// the new job count and the realized reward
    /// `r_max - h s/U - R_c 1{arrival and (reject or full)}`.
    pub fn step_full(&mut self, action: Action) -> StepOutcome {
        let u = self.spec.uniformization;
        let s_before = self.observed;
        let (u1, u2) = self.draw_pair();
        let spec = &self.spec;
        let mut reward = self.r_max - spec.holding_cost * s_before as f64 / u;

        let event = if u1 < spec.arrival_rate / u {
            if action == Action::Admit && s_before < spec.capacity {
                let dest = self.route(0, u2, false);
                self.occupancy[dest - 1] += 1;
                self.observed += 1;
                EventKind::ArrivalAdmitted { queue: dest }
            } else {
                reward -= spec.rejection_cost;
                EventKind::ArrivalRejected
            }
        } else {
            let mut acc = spec.arrival_rate / u;
            let mut event = EventKind::SelfLoop;
            for i in 0..spec.n_queues {
                acc += spec.service_rates[i] / u;
                if u1 < acc {
                    if self.occupancy[i] == 0 {
                        break; // idle queue: the band is a self-loop
                    }
                    let dest = self.route(i + 1, u2, true);
                    self.occupancy[i] -= 1;
                    event = if dest == 0 {
                        self.observed -= 1;
                        EventKind::Departure { queue: i + 1 }
                    } else {
                        self.occupancy[dest - 1] += 1;
                        EventKind::InternalMove {
                            from: i + 1,
                            to: dest,
                        }
                    };
                    break;
                }
            }
            event
        };

        self.step_index += 1;
        debug_assert_eq!(
            self.observed,
            self.occupancy.iter().map(|&c| c as usize).sum::<usize>()
        );
        StepOutcome {
            event,
            observed: self.observed,
            reward,
        }
    }
}

impl ObservableSystem for NetworkSimulator {
    fn capacity(&self) -> usize {
        self.spec.capacity
    }

    fn observed(&self) -> usize {
        self.observed
    }

    fn step(&mut self, action: Action) -> ObservedStep {
        let outcome = self.step_full(action);
        ObservedStep {
            observed: outcome.observed,
            reward: outcome.reward,
        }
    }
}

/// Exact birth-death simulator of an aggregated MDP, sharing the network
/// simulator's band layout and reward accounting. Useful as a synthetic
/// environment whose kernel is known exactly.
#[derive(Debug, Clone)]
pub struct AggregatedSimulator {
    mdp: crate::mdp::AggregatedMdp,
    observed: usize,
    step_index: u64,
    rng: ChaCha8Rng,
}

impl AggregatedSimulator {
    pub fn new(mdp: crate::mdp::AggregatedMdp, initial: usize, seed: u64) -> Result<Self> {
        if initial > mdp.capacity() {
            return Err(Error::InitialOverCapacity {
                total: initial,
                capacity: mdp.capacity(),
            });
        }
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Ok(AggregatedSimulator {
            mdp,
            observed: initial,
            step_index: 0,
            rng: ChaCha8Rng::from_seed(key),
        })
    }

    pub fn mdp(&self) -> &crate::mdp::AggregatedMdp {
        &self.mdp
    }
}

impl ObservableSystem for AggregatedSimulator {
    fn capacity(&self) -> usize {
        self.mdp.capacity()
    }

    fn observed(&self) -> usize {
        self.observed
    }

    fn step(&mut self, action: Action) -> ObservedStep {
        let u = self.mdp.uniformization;
        let s = self.observed;
        self.rng
            .set_word_pos(self.step_index as u128 * WORDS_PER_STEP);
        let u1 = self.rng.gen::<f64>();
        let mut reward = self.mdp.r_max() - self.mdp.holding_cost * s as f64 / u;
        if u1 < self.mdp.arrival_rate / u {
            if action == Action::Admit && s < self.mdp.capacity() {
                self.observed += 1;
            } else {
                reward -= self.mdp.rejection_cost;
            }
        } else if u1 < (self.mdp.arrival_rate + self.mdp.service_rates[s]) / u {
            self.observed -= 1;
        }
        self.step_index += 1;
        ObservedStep {
            observed: self.observed,
            reward,
        }
    }
}

/// A recorded trajectory of `(s_t, a_t, reward_t)` with optional events.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub observed: Vec<u32>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub events: Option<Vec<EventKind>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
    }

    /// Occupancy histogram of the pre-step job counts, normalized.
    pub fn occupancy_histogram(&self, capacity: usize) -> Vec<f64> {
        let mut counts = vec![0.0; capacity + 1];
        for &s in &self.observed {
            counts[s as usize] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        counts.iter().map(|c| c / total).collect()
    }

    /// CSV export with columns `t,s,a,event,reward`. The event column is
    /// empty if events were not recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,a,event,reward\n");
        for i in 0..self.len() {
            let event = match self.events.as_ref().map(|e| &e[i]) {
                Some(EventKind::ArrivalAdmitted { queue }) => format!("admit>{queue}"),
                Some(EventKind::ArrivalRejected) => "reject".to_string(),
                Some(EventKind::InternalMove { from, to }) => format!("move{from}>{to}"),
                Some(EventKind::Departure { queue }) => format!("depart{queue}"),
                Some(EventKind::SelfLoop) => "self".to_string(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                self.observed[i],
                self.actions[i].index(),
                event,
                self.rewards[i]
            ));
        }
        out
    }
}

/// Runs a fixed observation-dependent policy for `steps` steps. The trace
/// records the pre-step job count, the action taken and the realized
/// reward; `record_events` adds the per-step event kinds.
pub fn run_policy(
    spec: &QueueingNetworkSpec,
    policy: &Policy,
    steps: usize,
    seed: u64,
    record_events: bool,
) -> Result<Trace> {
    assert!(steps >= 1);
    let mut sim = NetworkSimulator::new(spec, None, seed)?;
    let mut trace = Trace {
        observed: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        events: record_events.then(|| Vec::with_capacity(steps)),
    };
    for _ in 0..steps {
        let s = sim.observed();
        let action = policy.action(s);
        let outcome = sim.step_full(action);
        trace.observed.push(s as u32);
        trace.actions.push(action);
        trace.rewards.push(outcome.reward);
        if let Some(events) = trace.events.as_mut() {
            events.push(outcome.event);
        }
    }
    Ok(trace)
}
