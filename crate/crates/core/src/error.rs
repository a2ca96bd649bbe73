use thiserror::Error;

/// Errors surfaced by the analysis, simulation and learning operations.
///
/// Invalid *data* (a malformed network spec) is not an error: spec
/// validation returns violations as values. Errors here signal that an
/// operation was asked to do something it cannot do.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("queue {queue} is not connected to the outside (traffic equations are singular)")]
    UnreachableQueue { queue: usize },

    #[error("linear system is singular or badly conditioned ({context})")]
    SingularSystem { context: String },

    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.3e} in {context}")]
    ResidualTooLarge {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("state space has {states} states, above the brute-force limit {limit}")]
    BruteForceLimit { states: usize, limit: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("initial occupancy {total} exceeds capacity {capacity}")]
    InitialOverCapacity { total: usize, capacity: usize },

    #[error("observed transition {from} -> {to} is outside the birth-death support")]
    TransitionOutOfSupport { from: usize, to: usize },

    #[error("value iteration did not converge within {iterations} iterations (span {span:.3e}, target {target:.3e})")]
    IterationCap {
        iterations: usize,
        span: f64,
        target: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
