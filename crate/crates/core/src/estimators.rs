//! Gradient estimators for stochastic Frank-Wolfe methods.
//!
//! Each estimator is a stateful update called once per outer iteration. The
//! state also counts component-gradient evaluations so drivers can report
//! oracle complexity.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::objectives::FiniteSumObjective;
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sfw,
    Svrf,
    SpiderFw,
    Orgfw,
    Csfw,
}

/// Iterations at which an exact gradient snapshot is taken. Every schedule
/// starts with a snapshot at `t = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSchedule {
    /// `s_k = 2^(k + k0) − 2^k0`
    Doubling { k0: u32 },
    /// Every `period` iterations.
    Periodic { period: usize },
    /// Explicit strictly increasing times starting at 0.
    Explicit(Vec<usize>),
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Doubling { k0: 4 }
    }
}

impl SnapshotSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            SnapshotSchedule::Doubling { k0 } if *k0 > 40 => {
                Err(Error::InvalidParameter(format!("k0 = {k0} is too large")))
            }
            SnapshotSchedule::Periodic { period: 0 } => {
                Err(Error::InvalidParameter("snapshot period must be >= 1".into()))
            }
            SnapshotSchedule::Explicit(times) => {
                if times.first() != Some(&0) {
                    return Err(Error::InvalidParameter("snapshot times must start at 0".into()));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(
                        "snapshot times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_snapshot(&self, t: usize) -> bool {
        match self {
            SnapshotSchedule::Doubling { k0 } => {
                let offset = 1usize << k0;
                (t + offset).is_power_of_two()
            }
            SnapshotSchedule::Periodic { period } => t.is_multiple_of(*period),
            SnapshotSchedule::Explicit(times) => times.binary_search(&t).is_ok(),
        }
    }

    /// Snapshot times up to and including `horizon`.
    pub fn times(&self, horizon: usize) -> Vec<usize> {
        (0..=horizon).filter(|&t| self.is_snapshot(t)).collect()
    }
}

/// Persistent estimator state for one optimizer run.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    kind: EstimatorKind,
    snapshot_point: Option<Vec<f64>>,
    snapshot_gradient: Option<Vec<f64>>,
    previous_estimate: Option<Vec<f64>>,
    previous_point: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    running_estimate: Vec<f64>,
    evaluations: u64,
}

impl EstimatorState {
    pub fn new(kind: EstimatorKind, obj: &FiniteSumObjective) -> Result<Self> {
        if kind == EstimatorKind::Csfw && !obj.is_separable() {
            return Err(Error::NotSeparable("csfw needs f(x) = (1/m) Σ f_i(⟨a_i, x⟩)".into()));
        }
        let n = obj.n();
        Ok(Self {
            kind,
            snapshot_point: None,
            snapshot_gradient: None,
            previous_estimate: None,
            previous_point: None,
            alpha: (kind == EstimatorKind::Csfw).then(|| vec![0.0; obj.m()]),
            running_estimate: vec![0.0; n],
            evaluations: 0,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Current estimate `∇̃f(x_t)`.
    pub fn estimate(&self) -> &[f64] {
        &self.running_estimate
    }

    pub fn alpha(&self) -> Option<&[f64]> {
        self.alpha.as_deref()
    }

    pub fn snapshot_point(&self) -> Option<&[f64]> {
        self.snapshot_point.as_deref()
    }

    /// Component-gradient evaluations performed so far (`m` per full gradient).
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn expect_kind(&self, kind: EstimatorKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidParameter(format!(
                "estimator is {:?}, not {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, obj: &FiniteSumObjective, x: &[f64]) -> Result<()> {
        check_dim(obj.n(), x.len())?;
        check_dim(self.running_estimate.len(), x.len())
    }

    fn take_snapshot(&mut self, obj: &FiniteSumObjective, x: &[f64]) {
        obj.full_gradient_into(x, &mut self.running_estimate);
        self.evaluations += obj.m() as u64;
        self.snapshot_point = Some(x.to_vec());
        self.snapshot_gradient = Some(self.running_estimate.clone());
    }

    /// `(1/b) Σ_{i ∈ batch} (∇f_i(x) − ∇f_i(y))` added into `out`.
    fn add_batch_difference(
        obj: &FiniteSumObjective,
        x: &[f64],
        y: &[f64],
        batch: &[usize],
        scale: f64,
        out: &mut [f64],
    ) {
        let inv_b = scale / batch.len() as f64;
        for &i in batch {
            let d = obj.derivative_at(i, x) - obj.derivative_at(i, y);
            if d != 0.0 {
                obj.data().add_row_scaled(i, d * inv_b, out);
            }
        }
    }

    /// Plain minibatch average.
    pub fn sfw_update(&mut self, obj: &FiniteSumObjective, x: &[f64], batch: &[usize]) -> Result<&[f64]> {
        self.expect_kind(EstimatorKind::Sfw)?;
        self.check_inputs(obj, x)?;
        obj.check_batch(batch)?;
        obj.minibatch_gradient_into(x, batch, &mut self.running_estimate);
        self.evaluations += batch.len() as u64;
        Ok(&self.running_estimate)
    }

    /// Snapshot-anchored variance reduction.
    pub fn svrf_update(
        &mut self,
        obj: &FiniteSumObjective,
        x: &[f64],
        t: usize,
        snapshots: &SnapshotSchedule,
        batch: &[usize],
    ) -> Result<&[f64]> {
        self.expect_kind(EstimatorKind::Svrf)?;
        self.check_inputs(obj, x)?;
        snapshots.validate()?;
        if snapshots.is_snapshot(t) {
            self.take_snapshot(obj, x);
            return Ok(&self.running_estimate);
        }
        obj.check_batch(batch)?;
        let (Some(anchor), Some(anchor_grad)) = (&self.snapshot_point, &self.snapshot_gradient) else {
            return Err(Error::MissingState("svrf snapshot"));
        };
        self.running_estimate.copy_from_slice(anchor_grad);
        Self::add_batch_difference(obj, x, anchor, batch, 1.0, &mut self.running_estimate);
        self.evaluations += 2 * batch.len() as u64;
        Ok(&self.running_estimate)
    }

    /// Recursive path-integrated estimator, restarted at snapshot times.
    pub fn spider_update(
        &mut self,
        obj: &FiniteSumObjective,
        x: &[f64],
        t: usize,
        snapshots: &SnapshotSchedule,
        batch: &[usize],
    ) -> Result<&[f64]> {
        self.expect_kind(EstimatorKind::SpiderFw)?;
        self.check_inputs(obj, x)?;
        snapshots.validate()?;
        if snapshots.is_snapshot(t) {
            self.take_snapshot(obj, x);
        } else {
            obj.check_batch(batch)?;
            let Some(prev) = &self.previous_point else {
                return Err(Error::MissingState("spider previous point"));
            };
            Self::add_batch_difference(obj, x, prev, batch, 1.0, &mut self.running_estimate);
            self.evaluations += 2 * batch.len() as u64;
        }
        self.previous_point = Some(x.to_vec());
        Ok(&self.running_estimate)
    }

    /// Momentum-corrected recursive estimator.
    pub fn orgfw_update(&mut self, obj: &FiniteSumObjective, x: &[f64], rho: f64, batch: &[usize]) -> Result<&[f64]> {
        self.expect_kind(EstimatorKind::Orgfw)?;
        self.check_inputs(obj, x)?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {rho}")));
        }
        obj.check_batch(batch)?;
        match (&self.previous_point, &self.previous_estimate) {
            (Some(prev_x), Some(prev_est)) => {
                // b⁻¹Σ∇f_i(x) + (1−ρ)(prev − b⁻¹Σ∇f_i(prev_x))
                //   = (1−ρ)·prev + b⁻¹Σ[∇f_i(x) − (1−ρ)∇f_i(prev_x)]
                let keep = 1.0 - rho;
                let inv_b = 1.0 / batch.len() as f64;
                for (o, p) in self.running_estimate.iter_mut().zip(prev_est) {
                    *o = keep * p;
                }
                for &i in batch {
                    let d = obj.derivative_at(i, x) - keep * obj.derivative_at(i, prev_x);
                    if d != 0.0 {
                        obj.data().add_row_scaled(i, d * inv_b, &mut self.running_estimate);
                    }
                }
                self.evaluations += 2 * batch.len() as u64;
            }
            _ => {
                obj.minibatch_gradient_into(x, batch, &mut self.running_estimate);
                self.evaluations += batch.len() as u64;
            }
        }
        self.previous_point = Some(x.to_vec());
        self.previous_estimate = Some(self.running_estimate.clone());
        Ok(&self.running_estimate)
    }

    /// Per-sample scalar cache for separable objectives. Repeated indices in
    /// a batch update the cache once.
    pub fn csfw_update(&mut self, obj: &FiniteSumObjective, x: &[f64], batch: &[usize]) -> Result<&[f64]> {
        self.expect_kind(EstimatorKind::Csfw)?;
        self.check_inputs(obj, x)?;
        obj.check_batch(batch)?;
        if !obj.is_separable() {
            return Err(Error::NotSeparable("csfw update on an opaque objective".into()));
        }
        let alpha = self.alpha.as_mut().ok_or(Error::MissingState("csfw alpha"))?;
        let inv_m = 1.0 / obj.m() as f64;
        let mut seen = std::collections::HashSet::with_capacity(batch.len());
        for &i in batch {
            if !seen.insert(i) {
                continue;
            }
            let fresh = obj.derivative_at(i, x) * inv_m;
            let delta = fresh - alpha[i];
            if delta != 0.0 {
                obj.data().add_row_scaled(i, delta, &mut self.running_estimate);
            }
            alpha[i] = fresh;
            self.evaluations += 1;
        }
        Ok(&self.running_estimate)
    }

    /// `max_j |∇̃f_j − (Aᵀα)_j|`, the drift of the CSFW running sum.
    pub fn csfw_drift(&self, obj: &FiniteSumObjective) -> Option<f64> {
        let alpha = self.alpha.as_ref()?;
        let exact = obj.data().mat_t_vec(alpha);
        Some(vector::norm_inf(&vector::sub(&exact, &self.running_estimate)))
    }

    /// Replaces the CSFW running sum by `Aᵀα`.
    pub fn csfw_resync(&mut self, obj: &FiniteSumObjective) {
        if let Some(alpha) = &self.alpha {
            self.running_estimate = obj.data().mat_t_vec(alpha);
        }
    }

    /// Dispatches to the update rule of this estimator.
    pub fn update(
        &mut self,
        obj: &FiniteSumObjective,
        x: &[f64],
        t: usize,
        step: &EstimatorStep<'_>,
    ) -> Result<&[f64]> {
        match self.kind {
            EstimatorKind::Sfw => self.sfw_update(obj, x, step.batch),
            EstimatorKind::Svrf => self.svrf_update(obj, x, t, step.snapshots, step.batch),
            EstimatorKind::SpiderFw => self.spider_update(obj, x, t, step.snapshots, step.batch),
            EstimatorKind::Orgfw => self.orgfw_update(obj, x, step.rho, step.batch),
            EstimatorKind::Csfw => self.csfw_update(obj, x, step.batch),
        }
    }
}

/// Per-iteration inputs for [`EstimatorState::update`].
#[derive(Debug, Clone, Copy)]
pub struct EstimatorStep<'a> {
    pub batch: &'a [usize],
    pub snapshots: &'a SnapshotSchedule,
    pub rho: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{Dataset, Loss};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logistic(m: usize, n: usize, seed: u64) -> FiniteSumObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        FiniteSumObjective::new(Loss::Logistic, Dataset::dense(rows, labels).unwrap()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn snapshot_schedules() {
        let s = SnapshotSchedule::Doubling { k0: 4 };
        assert_eq!(s.times(100), vec![0, 16, 48]);
        let s0 = SnapshotSchedule::Doubling { k0: 0 };
        assert_eq!(s0.times(20), vec![0, 1, 3, 7, 15]);
        assert_eq!(SnapshotSchedule::Periodic { period: 5 }.times(12), vec![0, 5, 10]);
        assert!(SnapshotSchedule::Explicit(vec![1, 2]).validate().is_err());
        assert!(SnapshotSchedule::Explicit(vec![0, 2, 2]).validate().is_err());
        assert!(SnapshotSchedule::Periodic { period: 0 }.validate().is_err());
        assert!(SnapshotSchedule::Explicit(vec![0, 3, 9]).is_snapshot(9));
    }

    #[test]
    fn sfw_full_batch_is_exact() {
        let obj = logistic(9, 3, 0);
        let x = [0.2, -0.1, 0.3];
        let mut st = EstimatorState::new(EstimatorKind::Sfw, &obj).unwrap();
        let all: Vec<usize> = (0..9).collect();
        let est = st.sfw_update(&obj, &x, &all).unwrap().to_vec();
        assert!(close(&est, &obj.full_gradient(&x).unwrap(), 1e-15));
        assert!(matches!(st.sfw_update(&obj, &x, &[]), Err(Error::EmptyBatch)));

        let single = logistic(1, 3, 1);
        let mut st = EstimatorState::new(EstimatorKind::Sfw, &single).unwrap();
        let est = st.sfw_update(&single, &x, &[0, 0, 0]).unwrap().to_vec();
        assert!(close(&est, &single.full_gradient(&x).unwrap(), 1e-15));
    }

    #[test]
    fn svrf_snapshot_and_anchor_cases() {
        let obj = logistic(12, 4, 2);
        let sched = SnapshotSchedule::Doubling { k0: 2 };
        let x0 = [0.1, 0.2, -0.3, 0.0];
        let mut st = EstimatorState::new(EstimatorKind::Svrf, &obj).unwrap();
        let est = st.svrf_update(&obj, &x0, 0, &sched, &[]).unwrap().to_vec();
        assert_eq!(est, obj.full_gradient(&x0).unwrap());
        assert_eq!(st.evaluations(), 12);
        // same point as the snapshot: differences vanish for any batch
        let est = st.svrf_update(&obj, &x0, 1, &sched, &[3, 3, 7]).unwrap().to_vec();
        assert!(close(&est, &obj.full_gradient(&x0).unwrap(), 1e-15));
        assert_eq!(st.evaluations(), 18);

        let mut fresh = EstimatorState::new(EstimatorKind::Svrf, &obj).unwrap();
        assert!(matches!(
            fresh.svrf_update(&obj, &x0, 1, &sched, &[0]),
            Err(Error::MissingState(_))
        ));
    }

    #[test]
    fn spider_cases() {
        let obj = logistic(10, 3, 3);
        let sched = SnapshotSchedule::Doubling { k0: 0 };
        let mut st = EstimatorState::new(EstimatorKind::SpiderFw, &obj).unwrap();
        let x0 = [0.1, 0.1, 0.1];
        st.spider_update(&obj, &x0, 0, &sched, &[]).unwrap();
        // t = 1 is a snapshot under k0 = 0; t = 2 is not
        let x1 = [0.2, 0.0, 0.1];
        let e1 = st.spider_update(&obj, &x1, 1, &sched, &[]).unwrap().to_vec();
        assert_eq!(e1, obj.full_gradient(&x1).unwrap());
        let e2 = st.spider_update(&obj, &x1, 2, &sched, &[4, 5]).unwrap().to_vec();
        assert!(close(&e2, &e1, 0.0));
        // full batch one step after a snapshot telescopes to the exact gradient
        let x3 = [-0.3, 0.4, 0.2];
        let all: Vec<usize> = (0..10).collect();
        let mut st = EstimatorState::new(EstimatorKind::SpiderFw, &obj).unwrap();
        st.spider_update(&obj, &x1, 0, &sched, &[]).unwrap();
        let s = SnapshotSchedule::Explicit(vec![0]);
        let e = st.spider_update(&obj, &x3, 1, &s, &all).unwrap().to_vec();
        assert!(close(&e, &obj.full_gradient(&x3).unwrap(), 1e-14));

        let mut fresh = EstimatorState::new(EstimatorKind::SpiderFw, &obj).unwrap();
        assert!(fresh.spider_update(&obj, &x0, 2, &sched, &[0]).is_err());
    }

    #[test]
    fn orgfw_cases() {
        let obj = logistic(8, 3, 4);
        let x0 = [0.3, -0.2, 0.1];
        let x1 = [0.1, 0.25, -0.4];
        let batch = [1, 6, 6, 2];
        let mut st = EstimatorState::new(EstimatorKind::Orgfw, &obj).unwrap();
        st.orgfw_update(&obj, &x0, 0.5, &batch).unwrap();
        let e = st.orgfw_update(&obj, &x1, 1.0, &batch).unwrap().to_vec();
        assert!(close(&e, &obj.minibatch_gradient(&x1, &batch).unwrap(), 1e-15));

        let all: Vec<usize> = (0..8).collect();
        let mut st = EstimatorState::new(EstimatorKind::Orgfw, &obj).unwrap();
        st.orgfw_update(&obj, &x0, 0.3, &all).unwrap();
        let e = st.orgfw_update(&obj, &x1, 0.3, &all).unwrap().to_vec();
        assert!(close(&e, &obj.full_gradient(&x1).unwrap(), 1e-14));

        assert!(st.orgfw_update(&obj, &x1, 0.0, &all).is_err());
        assert!(st.orgfw_update(&obj, &x1, 1.5, &all).is_err());
    }

    #[test]
    fn orgfw_matches_direct_formula() {
        let obj = logistic(15, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let xp: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b0: Vec<usize> = (0..3).map(|_| rng.random_range(0..15)).collect();
            let b1: Vec<usize> = (0..5).map(|_| rng.random_range(0..15)).collect();
            let rho: f64 = rng.random_range(0.01..1.0);
            let mut st = EstimatorState::new(EstimatorKind::Orgfw, &obj).unwrap();
            let prev = st.orgfw_update(&obj, &xp, 1.0, &b0).unwrap().to_vec();
            let got = st.orgfw_update(&obj, &x, rho, &b1).unwrap().to_vec();
            let now = obj.minibatch_gradient(&x, &b1).unwrap();
            let then = obj.minibatch_gradient(&xp, &b1).unwrap();
            let expected: Vec<f64> = (0..4).map(|j| now[j] + (1.0 - rho) * (prev[j] - then[j])).collect();
            assert!(close(&got, &expected, 1e-14));
        }
    }

    #[test]
    fn csfw_cases() {
        let obj = logistic(7, 3, 7);
        let x = [0.2, -0.5, 0.3];
        let all: Vec<usize> = (0..7).collect();
        let mut st = EstimatorState::new(EstimatorKind::Csfw, &obj).unwrap();
        let e = st.csfw_update(&obj, &x, &all).unwrap().to_vec();
        assert!(close(&e, &obj.full_gradient(&x).unwrap(), 1e-15));
        let e2 = st.csfw_update(&obj, &x, &[2, 2, 5]).unwrap().to_vec();
        assert!(close(&e2, &e, 1e-16));

        let opaque = logistic(7, 3, 7).with_separable(false);
        assert!(matches!(
            EstimatorState::new(EstimatorKind::Csfw, &opaque),
            Err(Error::NotSeparable(_))
        ));
    }

    #[test]
    fn csfw_running_sum_matches_recomputation() {
        let obj = logistic(25, 6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = EstimatorState::new(EstimatorKind::Csfw, &obj).unwrap();
        let mut x: Vec<f64> = vec![0.0; 6];
        for _ in 0..1000 {
            for xi in x.iter_mut() {
                *xi += rng.random_range(-0.1..0.1);
            }
            let batch: Vec<usize> = (0..4).map(|_| rng.random_range(0..25)).collect();
            st.csfw_update(&obj, &x, &batch).unwrap();
            assert!(st.csfw_drift(&obj).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn determinism_same_seed_same_sequence() {
        let obj = logistic(30, 5, 10);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let sched = SnapshotSchedule::Doubling { k0: 1 };
            let mut out = Vec::new();
            for kind in [
                EstimatorKind::Sfw,
                EstimatorKind::Svrf,
                EstimatorKind::SpiderFw,
                EstimatorKind::Orgfw,
                EstimatorKind::Csfw,
            ] {
                let mut st = EstimatorState::new(kind, &obj).unwrap();
                for t in 0..20 {
                    let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let batch: Vec<usize> = (0..3).map(|_| rng.random_range(0..30)).collect();
                    let step = EstimatorStep {
                        batch: &batch,
                        snapshots: &sched,
                        rho: 0.5,
                    };
                    out.extend(st.update(&obj, &x, t, &step).unwrap().iter().map(|v| v.to_bits()));
                }
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let obj = logistic(5, 2, 0);
        let mut st = EstimatorState::new(EstimatorKind::Sfw, &obj).unwrap();
        assert!(st.csfw_update(&obj, &[0.0, 0.0], &[0]).is_err());
    }
}
