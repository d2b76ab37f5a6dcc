//! Experiment specs, seeded runs, K sweeps and learning-rate tuning.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feasible_set::{FeasibleRegion, RegionKind, MEMBERSHIP_TOL};
use crate::objectives::{FiniteSumObjective, Loss};
use crate::optimizers::config::{Budget, EtaSchedule, Family, GapEvery, OptimizerConfig};
use crate::optimizers::trace::{write_atomic, OptimizerTrace};
use crate::optimizers::{run, Algorithm};

use super::data::{parse_dense_csv, parse_libsvm_reader};
use super::synthetic::{generate_synthetic_svm, SyntheticSvmSpec};

pub const CODE_VERSION: &str = concat!("adafw ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_k.csv";
pub const TUNE_REPORT_FILE: &str = "tune_report.json";
const DEFAULT_TUNE_BUDGET: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    SyntheticSvm(SyntheticSvmSpec),
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        n_features: Option<usize>,
    },
    Csv {
        path: PathBuf,
        label_column: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub radius: f64,
    /// Origin when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSource,
    pub loss: Loss,
    pub region: RegionSpec,
    pub optimizers: Vec<OptimizerConfig>,
    /// Overrides the budget of every optimizer when present.
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    /// Overrides the gap frequency of every optimizer when present.
    #[serde(default)]
    pub gap_every: Option<GapEvery>,
    /// Whether the objective may be treated as `(1/m) Σ f_i(⟨a_i, x⟩)`.
    #[serde(default = "yes")]
    pub separable: bool,
    /// Fill the `seconds` column. Off by default so traces are reproducible
    /// byte for byte.
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default)]
    pub tune_budget: Option<usize>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    /// Optimizer configs with the shared seed, budget and gap frequency applied.
    pub fn effective_configs(&self) -> Vec<OptimizerConfig> {
        self.optimizers
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.seed = self.seed;
                if let Some(b) = self.budget {
                    c.budget = b;
                }
                if let Some(g) = self.gap_every {
                    c.gap_every = g;
                }
                c.record_time = self.wall_clock;
                c
            })
            .collect()
    }
}

/// Objective and region shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Problem {
    pub objective: FiniteSumObjective,
    pub region: FeasibleRegion,
    /// Bytes that identify the dataset for the manifest hash.
    pub dataset_bytes: Vec<u8>,
}

pub fn load_problem(spec: &ExperimentSpec) -> Result<Problem> {
    let (data, dataset_bytes) = match &spec.dataset {
        DatasetSource::SyntheticSvm(s) => (generate_synthetic_svm(s)?, serde_json::to_vec(s)?),
        DatasetSource::Libsvm { path, n_features } => {
            let path = spec.resolve(path);
            let bytes = std::fs::read(&path)?;
            let (data, _) = parse_libsvm_reader(&bytes[..], &path, *n_features)?;
            (data, bytes)
        }
        DatasetSource::Csv { path, label_column } => {
            let path = spec.resolve(path);
            let bytes = std::fs::read(&path)?;
            (parse_dense_csv(&path, *label_column)?, bytes)
        }
    };
    let n = data.n();
    let objective = FiniteSumObjective::new(spec.loss, data)
        .map_err(|e| Error::Spec(format!("loss {} does not fit the dataset: {e}", spec.loss.name())))?
        .with_separable(spec.separable);
    let center = spec.region.center.clone().unwrap_or_else(|| vec![0.0; n]);
    if center.len() != n {
        return Err(Error::Spec(format!(
            "region center has {} entries, dataset has {n} features",
            center.len()
        )));
    }
    let region = FeasibleRegion::new(spec.region.kind, center, spec.region.radius)?;
    Ok(Problem {
        objective,
        region,
        dataset_bytes,
    })
}

/// Rejects configs that cannot run on the problem, before any work starts.
pub fn validate_configs(configs: &[OptimizerConfig], problem: &Problem) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::Spec("at least one optimizer is required".into()));
    }
    let n = problem.objective.n();
    for (i, c) in configs.iter().enumerate() {
        let label = format!("optimizer #{i} ({})", c.algorithm);
        c.validate().map_err(|e| Error::Spec(format!("{label}: {e}")))?;
        let needs_separable = matches!(c.algorithm, Algorithm::Csfw | Algorithm::Adacsfw);
        if needs_separable && !problem.objective.is_separable() {
            return Err(Error::Spec(format!(
                "{label} caches per-sample derivatives and needs a separable objective; set \"separable\": true or choose another algorithm"
            )));
        }
        if c.algorithm.family() == Family::Projected {
            problem
                .region
                .metric_projection(problem.region.center(), &vec![1.0; n])
                .map_err(|e| Error::Spec(format!("{label}: {e}")))?;
        }
        if let Some(x0) = &c.x0 {
            if x0.len() != n || !problem.region.contains(x0, MEMBERSHIP_TOL)? {
                return Err(Error::Spec(format!("{label}: start point is not in the region")));
            }
        }
    }
    Ok(())
}

/// `sha256("blob <len>\0" ‖ bytes)`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub name: String,
    pub sha256: String,
}

/// Combined hash of the spec, the dataset bytes and the code version.
pub fn input_hashes(spec: &ExperimentSpec, dataset_bytes: &[u8]) -> Result<(String, Vec<InputHash>)> {
    let inputs = vec![
        InputHash {
            name: "spec".into(),
            sha256: content_hash(&serde_json::to_vec(spec)?),
        },
        InputHash {
            name: "dataset".into(),
            sha256: content_hash(dataset_bytes),
        },
        InputHash {
            name: "code".into(),
            sha256: content_hash(CODE_VERSION.as_bytes()),
        },
    ];
    let listing: String = inputs.iter().map(|i| format!("{} {}\n", i.sha256, i.name)).collect();
    Ok((content_hash(listing.as_bytes()), inputs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub file: String,
    pub algorithm: Algorithm,
    pub inner_steps: usize,
    pub sha256: String,
    pub records: usize,
    pub final_duality_gap: f64,
    pub invariant_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentNote {
    pub timing: String,
    pub os: String,
    pub arch: String,
    pub worker_threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: Option<String>,
    pub code_version: String,
    pub input_hash: String,
    pub inputs: Vec<InputHash>,
    pub spec: ExperimentSpec,
    pub traces: Vec<TraceEntry>,
    pub environment: EnvironmentNote,
}

fn environment_note(wall_clock: bool) -> EnvironmentNote {
    let timing = if wall_clock {
        "seconds: monotonic clock, optimizer steps only (gap evaluation and I/O excluded)"
    } else {
        "seconds: not recorded (wall_clock = false); traces are reproducible byte for byte"
    };
    EnvironmentNote {
        timing: timing.into(),
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        worker_threads: rayon::current_num_threads(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: OptimizerConfig,
    pub trace: OptimizerTrace,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutput>,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

fn trace_bytes(trace: &OptimizerTrace) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(buf)
}

fn write_runs(
    spec: &ExperimentSpec,
    problem: &Problem,
    runs: Vec<(String, OptimizerConfig, OptimizerTrace)>,
    wall_clock: bool,
) -> Result<ExperimentOutcome> {
    let dir = spec.output_dir();
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::with_capacity(runs.len());
    let mut entries = Vec::with_capacity(runs.len());
    for (file, config, trace) in runs {
        let bytes = trace_bytes(&trace)?;
        let path = dir.join(&file);
        write_atomic(&path, &bytes)?;
        entries.push(TraceEntry {
            file,
            algorithm: config.algorithm,
            inner_steps: config.inner_steps,
            sha256: content_hash(&bytes),
            records: trace.records.len(),
            final_duality_gap: trace.last().map_or(f64::NAN, |r| r.duality_gap),
            invariant_violations: trace.diagnostics.total_violations(),
        });
        outputs.push(RunOutput { config, trace, path });
    }
    let (input_hash, inputs) = input_hashes(spec, &problem.dataset_bytes)?;
    let manifest = Manifest {
        name: spec.name.clone(),
        code_version: CODE_VERSION.into(),
        input_hash,
        inputs,
        spec: spec.clone(),
        traces: entries,
        environment: environment_note(wall_clock),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(ExperimentOutcome {
        runs: outputs,
        manifest,
        manifest_path,
    })
}

fn trace_file_name(index: usize, config: &OptimizerConfig) -> String {
    format!("{index:02}_{}.csv", config.algorithm)
}

/// Runs every optimizer of the spec in parallel on the shared problem and
/// writes one trace per run plus a manifest.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let problem = load_problem(spec)?;
    let configs = spec.effective_configs();
    validate_configs(&configs, &problem)?;
    let traces: Vec<Result<OptimizerTrace>> = configs
        .par_iter()
        .map(|c| run(&problem.objective, &problem.region, c))
        .collect();
    let mut runs = Vec::with_capacity(configs.len());
    for (i, (config, trace)) in configs.into_iter().zip(traces).enumerate() {
        let trace = trace.map_err(|e| Error::Spec(format!("optimizer #{i} ({}) failed: {e}", config.algorithm)))?;
        runs.push((trace_file_name(i, &config), config, trace));
    }
    write_runs(spec, &problem, runs, spec.wall_clock)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub k: usize,
    pub iterations: usize,
    pub final_epoch: f64,
    pub final_duality_gap: f64,
    /// Optimizer time from the trace (steps only).
    pub seconds: f64,
    /// Whole run including gap evaluations.
    pub wall_seconds: f64,
    /// CPU time of the whole run on its thread (wall time where unavailable).
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub experiment: ExperimentOutcome,
    pub summary_path: PathBuf,
}

/// Reruns every adaptive Frank-Wolfe config of the spec for each inner
/// iteration count. Runs are sequential so their timings do not compete, and
/// the `seconds` column is always filled.
pub fn sweep_k(spec: &ExperimentSpec, k_values: &[usize]) -> Result<SweepOutcome> {
    if k_values.is_empty() || k_values.contains(&0) {
        return Err(Error::Spec("K values must be >= 1".into()));
    }
    let problem = load_problem(spec)?;
    let base: Vec<OptimizerConfig> = spec
        .effective_configs()
        .into_iter()
        .filter(|c| matches!(c.algorithm.family(), Family::AdaptiveFw | Family::AdamSfw))
        .collect();
    if base.is_empty() {
        return Err(Error::Spec(
            "sweep-k needs at least one adaptive Frank-Wolfe optimizer".into(),
        ));
    }
    validate_configs(&base, &problem)?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for (i, config) in base.iter().enumerate() {
        for &k in k_values {
            let config = OptimizerConfig {
                inner_steps: k,
                record_time: true,
                ..config.clone()
            };
            let start = Instant::now();
            let cpu_start = thread_cpu_seconds();
            let trace = run(&problem.objective, &problem.region, &config)?;
            let wall_seconds = start.elapsed().as_secs_f64();
            let cpu_seconds = match (cpu_start, thread_cpu_seconds()) {
                (Some(a), Some(b)) => b - a,
                _ => wall_seconds,
            };
            let last = *trace.last().ok_or(Error::InvariantViolation("empty trace".into()))?;
            rows.push(SweepRow {
                algorithm: config.algorithm,
                k,
                iterations: last.t,
                final_epoch: last.epoch,
                final_duality_gap: last.duality_gap,
                seconds: last.seconds,
                wall_seconds,
                cpu_seconds,
            });
            runs.push((format!("k{k}_{i:02}_{}.csv", config.algorithm), config, trace));
        }
    }
    let experiment = write_runs(spec, &problem, runs, true)?;
    let summary_path = spec.output_dir().join(SWEEP_SUMMARY_FILE);
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer.serialize(row).map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&summary_path, &bytes)?;
    Ok(SweepOutcome {
        rows,
        experiment,
        summary_path,
    })
}

/// CPU time consumed so far by the calling thread.
#[cfg(unix)]
pub fn thread_cpu_seconds() -> Option<f64> {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then_some(ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9)
}

#[cfg(not(unix))]
pub fn thread_cpu_seconds() -> Option<f64> {
    None
}

/// Outcome of the narrowing grid over exponents `i` of `10^(i/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_exponent: i32,
    /// `(i, score)` in evaluation order; `None` marks a divergent run.
    pub evaluated: Vec<(i32, Option<f64>)>,
    pub warning: Option<String>,
}

/// Evaluates `{−2, 0, 2}`, then keeps evaluating the unvisited neighbours of
/// the best exponent until both neighbours are known (which also extends the
/// grid past an endpoint). Lower scores win; ties go to the smaller exponent.
/// When every run diverges the smallest exponent tried is returned.
pub fn narrowing_grid<F>(budget: usize, mut score: F) -> Result<GridSearch>
where
    F: FnMut(i32) -> Result<Option<f64>>,
{
    if budget < 3 {
        return Err(Error::InvalidParameter(format!(
            "tuning needs a budget of at least 3 runs, got {budget}"
        )));
    }
    let mut evaluated: Vec<(i32, Option<f64>)> = Vec::new();
    for i in [-2, 0, 2] {
        evaluated.push((i, score(i)?));
    }
    let best_of = |evaluated: &[(i32, Option<f64>)]| {
        evaluated
            .iter()
            .filter_map(|&(i, s)| s.map(|s| (i, s)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    };
    loop {
        let Some(best) = best_of(&evaluated) else {
            let smallest = evaluated.iter().map(|e| e.0).min().unwrap_or(-2);
            log::warn!("every learning rate diverged; falling back to the smallest one tried");
            return Ok(GridSearch {
                best_exponent: smallest,
                evaluated,
                warning: Some("all candidates diverged; using the smallest learning rate tried".into()),
            });
        };
        let mut pending: Vec<i32> = [best - 1, best + 1]
            .into_iter()
            .filter(|i| !evaluated.iter().any(|e| e.0 == *i))
            .collect();
        // extend past an endpoint before filling in between
        let lo = evaluated.iter().map(|e| e.0).min().unwrap_or(best);
        let hi = evaluated.iter().map(|e| e.0).max().unwrap_or(best);
        pending.sort_by_key(|&i| (lo <= i && i <= hi, i));
        if pending.is_empty() {
            return Ok(GridSearch {
                best_exponent: best,
                evaluated,
                warning: None,
            });
        }
        for i in pending {
            if evaluated.len() >= budget {
                let best = best_of(&evaluated).unwrap_or(best);
                log::warn!("tuning budget of {budget} runs exhausted before the grid settled");
                return Ok(GridSearch {
                    best_exponent: best,
                    evaluated,
                    warning: Some(format!("budget of {budget} runs exhausted; returning the best so far")),
                });
            }
            evaluated.push((i, score(i)?));
        }
    }
}

pub fn exponent_to_eta(i: i32) -> f64 {
    10f64.powf(i as f64 / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneEvaluation {
    pub exponent: i32,
    pub eta: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub algorithm: Algorithm,
    /// `final_duality_gap` for convex losses, `final_objective` otherwise.
    pub criterion: String,
    pub best_exponent: i32,
    pub best_eta: f64,
    pub evaluations: Vec<TuneEvaluation>,
    pub warning: Option<String>,
}

/// Score of one run: the final gap (convex) or objective (nonconvex), or
/// `None` when it diverged.
fn tuning_score(trace: &OptimizerTrace, convex: bool) -> Option<f64> {
    let (first, last) = (trace.records.first()?, trace.records.last()?);
    let (start, end) = if convex {
        (first.duality_gap, last.duality_gap)
    } else {
        (first.objective, last.objective)
    };
    (end.is_finite() && end <= start).then_some(end)
}

/// Tunes the constant learning rate of every optimizer in the spec.
pub fn tune_learning_rate(spec: &ExperimentSpec, budget: Option<usize>) -> Result<Vec<TuneReport>> {
    let budget = budget.or(spec.tune_budget).unwrap_or(DEFAULT_TUNE_BUDGET);
    let problem = load_problem(spec)?;
    let configs = spec.effective_configs();
    validate_configs(&configs, &problem)?;
    let convex = spec.loss.is_convex();
    let mut reports = Vec::with_capacity(configs.len());
    for config in &configs {
        let search = narrowing_grid(budget, |i| {
            let c = OptimizerConfig {
                eta: EtaSchedule::Constant {
                    value: exponent_to_eta(i),
                },
                ..config.clone()
            };
            match run(&problem.objective, &problem.region, &c) {
                Ok(trace) => Ok(tuning_score(&trace, convex)),
                Err(Error::NonFinite(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        reports.push(TuneReport {
            algorithm: config.algorithm,
            criterion: if convex { "final_duality_gap" } else { "final_objective" }.into(),
            best_exponent: search.best_exponent,
            best_eta: exponent_to_eta(search.best_exponent),
            evaluations: search
                .evaluated
                .iter()
                .map(|&(exponent, score)| TuneEvaluation {
                    exponent,
                    eta: exponent_to_eta(exponent),
                    score,
                })
                .collect(),
            warning: search.warning,
        });
    }
    let path = spec.output_dir().join(TUNE_REPORT_FILE);
    write_atomic(&path, &serde_json::to_vec_pretty(&reports)?)?;
    Ok(reports)
}
