//! Stochastic Frank-Wolfe methods with adaptive diagonal metrics.
//!
//! The crate provides linear minimization oracles over norm balls,
//! finite-sum objectives, stochastic gradient estimators, AdaGrad and
//! AMSGrad metrics, the inner quadratic-model solver, outer-loop drivers and
//! a benchmark harness (`bench` binary).

pub mod adaptive_metric;
pub mod bench;
pub mod error;
pub mod estimators;
pub mod feasible_set;
pub mod objectives;
pub mod optimizers;
pub mod subproblem;
pub mod vector;

pub use error::{Error, Result};
pub use feasible_set::{FeasibleRegion, Norm, ProblemConstants, RegionKind};
pub use objectives::{Dataset, FiniteSumObjective, Loss};
pub use optimizers::{Algorithm, OptimizerConfig, OptimizerTrace};
