//! Admission control in capacity-bounded Jackson queueing networks.
//!
//! The crate has three layers:
//!
//! - **Exact analysis** ([`network`], [`productform`], [`mdp`]): open Jackson
//!   networks with a global capacity, their closed-network encoding, the
//!   flow-equivalent (Norton) single-queue reduction with load-dependent
//!   rates `mu(s) = G(s-1)/G(s)`, and the resulting `S+1`-state birth-death
//!   admission MDP together with exact gain/bias solvers and diagnostics
//!   (threshold measures, hitting times, bias-variation bounds, mixing
//!   profiles, diameter).
//! - **Simulation** ([`simulator`]): uniformized discrete-time simulation of
//!   the hidden-state network under admission control. Only the total job
//!   count, the action and the realized reward are observable.
//! - **Learning** ([`learner`]): the UCRL-M optimistic learner, which splits
//!   time-steps into interleaved modules, keeps per-module counts, builds
//!   confidence regions and runs extended value iteration to pick an
//!   optimistic admission policy each episode.

pub mod error;
pub mod learner;
pub(crate) mod linalg;
pub mod mdp;
pub mod network;
pub mod productform;
pub mod simulator;

pub use error::{Error, Result};
pub use learner::{run_ucrlm, RunRecord, UcrlOptions};
pub use mdp::{Action, AggregatedMdp, GainBias, Policy};
pub use network::{MultiTierParams, QueueingNetworkSpec};
pub use productform::{EquivalentQueue, NormalizingConstants};
pub use simulator::{NetworkSimulator, ObservableSystem};
