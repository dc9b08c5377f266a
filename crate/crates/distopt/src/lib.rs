//! Distributed consensus optimization with simultaneous parameter learning.
//!
//! `distopt` simulates a network of agents that jointly minimize a sum of
//! agent-local convex objectives over the intersection of agent-local convex
//! sets, while every objective depends on a parameter vector the agents do
//! not know. Each synchronous round combines three updates per agent:
//!
//! 1. an alignment step that averages the neighbors' decision iterates
//!    through a doubly stochastic mixing matrix on a (possibly time-varying)
//!    connected graph,
//! 2. a projected stochastic gradient step on the agent's own objective,
//!    evaluated at its current parameter belief, and
//! 3. a projected stochastic gradient step on a shared strongly convex
//!    learning metric that drives every belief to the true parameter.
//!
//! The crate is a library first: see the `examples/` directory for one
//! runnable program per capability (topology generation, projections,
//! reference solutions, stepsize rules, the individual run modes, and seed
//! sweeps). A thin `distopt` binary exposes `validate`, `run`, `sweep`, and
//! `oracle` subcommands over the same machinery.

// Validation predicates use negated comparisons (`!(x > 0.0)`) so that NaN
// inputs fail validation instead of slipping through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod output;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod sets;

pub use error::{Error, Result, ValidationReport, Violation};

/// Dense column vector used for decision and parameter iterates.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for problem data and mixing weights.
pub type Matrix = nalgebra::DMatrix<f64>;
