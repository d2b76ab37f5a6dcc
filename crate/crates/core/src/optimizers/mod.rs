//! Outer loops, schedules and convergence reporting.

pub mod config;
pub mod gap;
pub mod runner;
pub mod schedules;
pub mod trace;

pub use config::{
    Algorithm, BatchSchedule, Budget, ClipBounds, EtaSchedule, Family, GammaSchedule, GapEvery, OptimizerConfig,
    RhoSchedule,
};
pub use gap::duality_gap;
pub use runner::{run, run_ada_fw, run_adamsfw, run_projected_adagrad, run_template_fw};
pub use schedules::{
    estimate_constants, practical_schedule, theoretical_schedule, PracticalRule, Regime, TheoreticalParams,
    TheoreticalSchedule,
};
pub use trace::{read_trace_csv, sample_uniform_iterate, OptimizerTrace, RunDiagnostics, TraceRecord, TRACE_HEADER};
