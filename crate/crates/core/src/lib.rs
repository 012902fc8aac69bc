//! Social learning over graphs where agents may be chasing different true
//! hypotheses.
//!
//! Each agent runs a private Bayesian filter and a cooperative log-linear
//! filter whose combination weights adapt to how likely each neighbor is to
//! share the agent's own hypothesis. The crate simulates that scheme next to
//! the non-cooperative and static-weight baselines, and computes the
//! steady-state objects (limiting weights, block structure, Perron vectors,
//! sub-network confidences, consistency conditions) in closed form.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod dynamics;
pub mod harness;
pub mod model;
pub mod presets;
pub mod weights;

pub use model::{
    validate_scenario, AgentStreams, AlgorithmFlags, BeliefVector, CombinationMatrix,
    HypothesisSet, LikelihoodModel, NetworkGraph, ScenarioConfig, Violation,
};
