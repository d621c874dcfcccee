//! Conservative primal-dual stochastic optimization.
//!
//! Solves `min_{x in X} E[f(x, theta)]` subject to `E[h_i(x, theta)] <= 0` where
//! both objective and constraints are only reachable through sampled gradients.
//! Two solvers are provided:
//!
//! * [`solvers::csoa_step`]: projected primal-dual updates on a tightened
//!   augmented Lagrangian, for sets with a cheap projection.
//! * [`solvers::fw_csoa_step`]: a projection-free variant that tracks the
//!   primal gradient with a momentum recursion and moves toward the output of a
//!   linear minimization oracle.
//!
//! The tightening parameter `upsilon` makes the constraints conservative so the
//! time-averaged violation of the original constraints is driven to zero rather
//! than merely to `O(T^{-1/2})`.
//!
//! Benchmark problems (fairness-constrained logistic regression, structured
//! matrix completion, and a closed-form desk QP) live in [`problems`] and
//! [`bench`]; [`cli`] drives reproducible experiments from a TOML config.

pub mod bench;
pub mod cli;
pub mod constants;
pub mod error;
pub mod lagrangian;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod sets;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{HyperParams, OracleEval, ProblemConstants, SampleContext, SolverState};
pub use problem::StochasticProblem;
pub use sets::{Capabilities, FeasibleSet};
