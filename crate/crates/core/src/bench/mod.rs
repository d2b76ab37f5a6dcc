//! Benchmark harness: dataset I/O, synthetic data and experiment execution.

pub mod data;
pub mod experiment;
pub mod synthetic;

pub use data::{parse_dense_csv, parse_libsvm, write_dense_csv, write_libsvm};
pub use experiment::{run_experiment, sweep_k, tune_learning_rate, DatasetSource, ExperimentSpec, RegionSpec};
pub use synthetic::{generate_synthetic_svm, SyntheticSvmSpec};
