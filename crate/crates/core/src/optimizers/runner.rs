use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive_metric::{AdaGradAccumulator, AmsGradState, DiagonalMetric, MetricClipper};
use crate::error::{check_dim, Error, Result};
use crate::estimators::{EstimatorKind, EstimatorState, EstimatorStep, SnapshotSchedule};
use crate::feasible_set::{FeasibleRegion, Norm, MEMBERSHIP_TOL};
use crate::objectives::FiniteSumObjective;
use crate::subproblem::QuadraticModel;
use crate::vector;

use super::config::{Algorithm, BatchSchedule, Budget, Family, GapEvery, OptimizerConfig};
use super::gap::gap_for_gradient;
use super::schedules::practical_schedule;
use super::trace::{OptimizerTrace, RunDiagnostics, TraceRecord};

/// Allowed rise of the model value per inner step.
pub const MODEL_INCREASE_TOL: f64 = 1e-12;
/// Slack on the outer displacement bound.
pub const DISPLACEMENT_TOL: f64 = 1e-9;

/// Runs any algorithm of the toolkit.
pub fn run(obj: &FiniteSumObjective, region: &FeasibleRegion, config: &OptimizerConfig) -> Result<OptimizerTrace> {
    Runner::new(obj, region, config)?.run()
}

/// Stochastic Frank-Wolfe template: estimator update, oracle call and a
/// convex-combination step.
pub fn run_template_fw(
    obj: &FiniteSumObjective,
    region: &FeasibleRegion,
    config: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    expect_family(config.algorithm, Family::TemplateFw)?;
    run(obj, region, config)
}

/// AdaGrad-metric variants solving the quadratic model with `K` inner steps.
pub fn run_ada_fw(
    obj: &FiniteSumObjective,
    region: &FeasibleRegion,
    config: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    expect_family(config.algorithm, Family::AdaptiveFw)?;
    run(obj, region, config)
}

pub fn run_adamsfw(
    obj: &FiniteSumObjective,
    region: &FeasibleRegion,
    config: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    expect_family(config.algorithm, Family::AdamSfw)?;
    run(obj, region, config)
}

/// Projected AdaGrad or AMSGrad in the adaptive metric.
pub fn run_projected_adagrad(
    obj: &FiniteSumObjective,
    region: &FeasibleRegion,
    config: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    expect_family(config.algorithm, Family::Projected)?;
    run(obj, region, config)
}

fn expect_family(algorithm: Algorithm, family: Family) -> Result<()> {
    if algorithm.family() != family {
        return Err(Error::InvalidParameter(format!(
            "{algorithm} cannot be run by the {family:?} driver"
        )));
    }
    Ok(())
}

enum Update {
    Template,
    Ada {
        acc: AdaGradAccumulator,
        clipper: MetricClipper,
    },
    Adam {
        ams: AmsGradState,
        clipper: MetricClipper,
    },
    ProjectedAdaGrad {
        acc: AdaGradAccumulator,
        clipper: MetricClipper,
    },
    ProjectedAms {
        ams: AmsGradState,
        clipper: MetricClipper,
    },
}

struct Runner<'a> {
    obj: &'a FiniteSumObjective,
    region: &'a FeasibleRegion,
    config: &'a OptimizerConfig,
    batch: BatchSchedule,
    snapshots: SnapshotSchedule,
    estimator: EstimatorState,
    update: Update,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    diameter: f64,
    elapsed: Duration,
    diagnostics: RunDiagnostics,
    records: Vec<TraceRecord>,
    iterates: Vec<Vec<f64>>,
    last_recorded_epoch: u64,
}

impl<'a> Runner<'a> {
    fn new(obj: &'a FiniteSumObjective, region: &'a FeasibleRegion, config: &'a OptimizerConfig) -> Result<Self> {
        config.validate()?;
        check_dim(obj.n(), region.dim())?;
        let n = obj.n();
        let x = match &config.x0 {
            Some(x0) => {
                check_dim(n, x0.len())?;
                if !region.contains(x0, MEMBERSHIP_TOL)? {
                    return Err(Error::Infeasible);
                }
                x0.clone()
            }
            None => region.center().to_vec(),
        };
        let estimator = EstimatorState::new(config.algorithm.estimator(), obj)?;
        let update = match config.algorithm {
            Algorithm::Adagrad | Algorithm::Amsgrad => {
                // fail early when no metric projection exists
                region.metric_projection(&x, &vec![1.0; n])?;
                if config.algorithm == Algorithm::Adagrad {
                    Update::ProjectedAdaGrad {
                        acc: AdaGradAccumulator::new(n, config.delta)?,
                        clipper: MetricClipper::new(),
                    }
                } else {
                    Update::ProjectedAms {
                        ams: AmsGradState::new(n, config.beta_m, config.beta_s, config.delta)?,
                        clipper: MetricClipper::new(),
                    }
                }
            }
            a => match a.family() {
                Family::TemplateFw => Update::Template,
                Family::AdaptiveFw => Update::Ada {
                    acc: AdaGradAccumulator::new(n, config.delta)?,
                    clipper: MetricClipper::new(),
                },
                _ => Update::Adam {
                    ams: AmsGradState::new(n, config.beta_m, config.beta_s, config.delta)?,
                    clipper: MetricClipper::new(),
                },
            },
        };
        Ok(Self {
            obj,
            region,
            config,
            batch: config.batch_schedule(),
            snapshots: config.snapshot_schedule(),
            estimator,
            update,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            x,
            diameter: region.diameter(Norm::L2),
            elapsed: Duration::ZERO,
            diagnostics: RunDiagnostics::default(),
            records: Vec::new(),
            iterates: Vec::new(),
            last_recorded_epoch: 0,
        })
    }

    fn batch_size(&self, t: usize) -> Result<usize> {
        let m = self.obj.m();
        Ok(match &self.batch {
            BatchSchedule::Full => m,
            BatchSchedule::Constant { size } => (*size).clamp(1, m),
            BatchSchedule::Practical(rule) => practical_schedule(*rule, m, t)?,
            BatchSchedule::Theoretical(params) => params.batch_size(t, m),
        })
    }

    fn draw_batch(&mut self, b: usize) -> Vec<usize> {
        let m = self.obj.m();
        if matches!(self.batch, BatchSchedule::Full) {
            return (0..m).collect();
        }
        (0..b).map(|_| self.rng.random_range(0..m)).collect()
    }

    fn uses_snapshot(&self, t: usize) -> bool {
        matches!(self.estimator.kind(), EstimatorKind::Svrf | EstimatorKind::SpiderFw) && self.snapshots.is_snapshot(t)
    }

    fn epochs(&self) -> f64 {
        self.estimator.evaluations() as f64 / self.obj.m() as f64
    }

    fn budget_left(&self, t: usize) -> bool {
        match self.config.budget {
            Budget::Iterations { count } => t < count,
            Budget::Epochs { count } => self.epochs() < count,
        }
    }

    fn record(&mut self, t: usize, batch_size: usize) {
        let obj = self.obj;
        let mut g = vec![0.0; obj.n()];
        obj.full_gradient_into(&self.x, &mut g);
        let seconds = if self.config.record_time {
            self.elapsed.as_secs_f64()
        } else {
            0.0
        };
        self.records.push(TraceRecord {
            t,
            epoch: self.epochs(),
            objective: obj.value_unchecked(&self.x),
            duality_gap: gap_for_gradient(self.region, &g, &self.x),
            seconds,
            grad_evals: self.estimator.evaluations(),
            batch_size,
        });
        self.last_recorded_epoch = self.estimator.evaluations() / obj.m() as u64;
        if let Some(drift) = self.estimator.csfw_drift(obj) {
            let d = &mut self.diagnostics.max_csfw_drift;
            *d = Some(d.map_or(drift, |v| v.max(drift)));
        }
    }

    fn due(&self, t: usize) -> bool {
        match self.config.gap_every {
            GapEvery::Iterations { every } => t.is_multiple_of(every),
            GapEvery::Epoch => self.estimator.evaluations() / self.obj.m() as u64 > self.last_recorded_epoch,
        }
    }

    fn violation(&mut self, what: String) -> Result<()> {
        if self.config.strict {
            return Err(Error::InvariantViolation(what));
        }
        log::debug!("invariant violated: {what}");
        Ok(())
    }

    fn run(mut self) -> Result<OptimizerTrace> {
        self.record(0, 0);
        if self.config.record_iterates {
            self.iterates.push(self.x.clone());
        }
        let mut t = 0;
        let mut last_batch = 0;
        while self.budget_left(t) {
            let snapshot = self.uses_snapshot(t);
            let b = if snapshot { self.obj.m() } else { self.batch_size(t)? };
            let batch = if snapshot { Vec::new() } else { self.draw_batch(b) };
            let step_start = Instant::now();
            let next = self.step(t, &batch)?;
            self.elapsed += step_start.elapsed();
            self.check_feasible(t, &next)?;
            self.x = next;
            if self.config.record_iterates {
                self.iterates.push(self.x.clone());
            }
            t += 1;
            last_batch = b;
            self.diagnostics.iterations = t;
            if self.due(t) {
                self.record(t, b);
            }
        }
        if self.records.last().map(|r| r.t) != Some(t) {
            self.record(t, last_batch);
        }
        Ok(OptimizerTrace {
            records: self.records,
            final_point: self.x,
            iterates: self.iterates,
            diagnostics: self.diagnostics,
        })
    }

    fn check_feasible(&mut self, t: usize, next: &[f64]) -> Result<()> {
        if !self.region.contains_unchecked(next, MEMBERSHIP_TOL) {
            self.diagnostics.feasibility_violations += 1;
            self.violation(format!("iterate {} left the region", t + 1))?;
        }
        Ok(())
    }

    fn step(&mut self, t: usize, batch: &[usize]) -> Result<Vec<f64>> {
        let cfg = self.config;
        let obj = self.obj;
        let step = EstimatorStep {
            batch,
            snapshots: &self.snapshots,
            rho: cfg.rho.at(t),
        };
        let estimate = self.estimator.update(obj, &self.x, t, &step)?.to_vec();
        let gamma = cfg.gamma_schedule().at(t);
        let clip = cfg.clip_bounds();
        match &mut self.update {
            Update::Template => {
                let v = self.region.lmo(&estimate)?;
                let mut next = self.x.clone();
                vector::convex_step(&mut next, &v, gamma);
                Ok(next)
            }
            Update::Ada { acc, clipper } => {
                let before = acc.sum_of_squares().to_vec();
                let h = clipper.clip(&acc.update(&estimate)?, clip.lower, clip.upper)?;
                let decreased = decreased(&before, acc.sum_of_squares());
                self.metric_check(t, decreased)?;
                let eta = cfg.eta.at(h.min());
                self.inner_solve(t, estimate, h, eta, gamma)
            }
            Update::Adam { ams, clipper } => {
                let before = ams.max_second_moment().to_vec();
                let (momentum, h) = ams.update(&estimate)?;
                let h = clipper.clip(&h, clip.lower, clip.upper)?;
                let decreased = decreased(&before, ams.max_second_moment());
                self.metric_check(t, decreased)?;
                let eta = cfg.eta.at(h.min());
                self.inner_solve(t, momentum, h, eta, gamma)
            }
            Update::ProjectedAdaGrad { acc, clipper } => {
                let before = acc.sum_of_squares().to_vec();
                let h = clipper.clip(&acc.update(&estimate)?, clip.lower, clip.upper)?;
                let decreased = decreased(&before, acc.sum_of_squares());
                self.metric_check(t, decreased)?;
                let eta = cfg.eta.at(h.min());
                self.project(&estimate, h, eta)
            }
            Update::ProjectedAms { ams, clipper } => {
                let before = ams.max_second_moment().to_vec();
                let (momentum, h) = ams.update(&estimate)?;
                let h = clipper.clip(&h, clip.lower, clip.upper)?;
                let decreased = decreased(&before, ams.max_second_moment());
                self.metric_check(t, decreased)?;
                let eta = cfg.eta.at(h.min());
                self.project(&momentum, h, eta)
            }
        }
    }

    fn metric_check(&mut self, t: usize, decreased: bool) -> Result<()> {
        if decreased {
            self.diagnostics.metric_violations += 1;
            self.violation(format!("metric accumulator decreased at iteration {t}"))?;
        }
        Ok(())
    }

    /// `x − η·h⁻¹ ⊙ d`, projected in the metric `h`.
    fn project(&self, direction: &[f64], h: DiagonalMetric, eta: f64) -> Result<Vec<f64>> {
        let z: Vec<f64> = self
            .x
            .iter()
            .zip(direction)
            .zip(h.entries())
            .map(|((xi, di), hi)| xi - eta * di / hi)
            .collect();
        self.region.metric_projection(&z, h.entries())
    }

    fn inner_solve(
        &mut self,
        t: usize,
        gradient: Vec<f64>,
        h: DiagonalMetric,
        eta: f64,
        gamma: f64,
    ) -> Result<Vec<f64>> {
        let k = self.config.inner_steps;
        let model = QuadraticModel::new(self.x.clone(), gradient, h, eta)?;
        let outcome = model.inner_loop_logged(self.region, k, gamma)?;
        let d = &mut self.diagnostics;
        d.inner_loops += 1;
        d.inner_steps += outcome.steps.len();
        let rises = outcome.monotonicity_violations(MODEL_INCREASE_TOL);
        d.max_model_increase = d.max_model_increase.max(outcome.max_increase());
        let moved = vector::distance2(&outcome.point, &self.x);
        let bound = k as f64 * self.diameter * gamma;
        if bound > 0.0 {
            d.max_displacement_ratio = d.max_displacement_ratio.max(moved / bound);
        }
        if rises > 0 {
            d.monotonicity_violations += rises;
            self.violation(format!("model value rose during inner loop {t}"))?;
        }
        if moved > bound + DISPLACEMENT_TOL {
            self.diagnostics.displacement_violations += 1;
            self.violation(format!("step {t} moved {moved} > K·D·γ = {bound}"))?;
        }
        Ok(outcome.point)
    }
}

fn decreased(before: &[f64], after: &[f64]) -> bool {
    before.iter().zip(after).any(|(b, a)| a < b)
}
