//! Maximum reachability probabilities in MDPs with certified error
//! bounds.
//!
//! The crate provides one model type ([`Mdp`]), a text format for it
//! ([`format`]), end-component analysis ([`mec`]), and a spectrum of
//! solvers that all answer the same query, the maximum probability of
//! reaching the goal state from the initial state:
//!
//! * [`solvers`]: value iteration (estimate only) and interval
//!   iteration (certified `[L, U]` enclosure),
//! * [`brtdp`]: bounded real-time dynamic programming, a simulation
//!   driven solver maintaining the same certified bounds,
//! * [`mcts`]: Monte Carlo tree search and hybrids that combine UCB
//!   exploration with the certified bounds,
//! * [`oracle`]: an exact linear-algebra reference for small models.
//!
//! Certified means: for every reported pair `L <= V <= U` holds at all
//! times, where `V` is the true maximum reachability value.

pub mod benchgen;
pub mod bounds;
pub mod brtdp;
pub mod format;
pub mod mcts;
pub mod mec;
pub mod model;
pub mod oracle;
pub mod solvers;
mod working;

pub use bounds::{Audit, Bounds};
pub use brtdp::{Brtdp, EpisodeEnd, SamplerConfig, SuccessorRule};
pub use mcts::{Mcts, MctsConfig, MctsVariant};
pub use model::{Action, ActionRef, Distribution, Mdp, ModelError, Path, Policy, RawModel, StateId};
pub use oracle::{exact_oracle, policy_value, OracleError};
pub use solvers::{interval_iteration, value_iteration, SolverConfig, SolverResult, Status};
