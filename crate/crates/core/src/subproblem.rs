//! K-step Frank-Wolfe on the quadratic model
//! `Q_t(y) = ⟨g̃, y − x_t⟩ + (1/(2η_t))·‖y − x_t‖²_H`.
//!
//! The constant `f(x_t)` is dropped; every check compares model values.

use crate::adaptive_metric::DiagonalMetric;
use crate::error::{check_dim, Error, Result};
use crate::feasible_set::FeasibleRegion;
use crate::vector;

#[derive(Debug, Clone)]
pub struct QuadraticModel {
    anchor: Vec<f64>,
    gradient: Vec<f64>,
    metric: DiagonalMetric,
    eta: f64,
}

impl QuadraticModel {
    pub fn new(anchor: Vec<f64>, gradient: Vec<f64>, metric: DiagonalMetric, eta: f64) -> Result<Self> {
        check_dim(anchor.len(), gradient.len())?;
        check_dim(anchor.len(), metric.dim())?;
        if !(eta > 0.0) || eta.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        Ok(Self {
            anchor,
            gradient,
            metric,
            eta,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn metric(&self) -> &DiagonalMetric {
        &self.metric
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// `g̃ + (1/η)·h ⊙ (y − x_t)`
    pub fn model_gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.model_gradient_into(y, &mut out);
        out
    }

    fn model_gradient_into(&self, y: &[f64], out: &mut [f64]) {
        let inv_eta = 1.0 / self.eta;
        let h = self.metric.entries();
        for i in 0..out.len() {
            out[i] = self.gradient[i] + inv_eta * h[i] * (y[i] - self.anchor[i]);
        }
    }

    /// `⟨g̃, y − x_t⟩ + (1/(2η))·‖y − x_t‖²_H`
    pub fn model_value(&self, y: &[f64]) -> f64 {
        let h = self.metric.entries();
        let mut linear = 0.0;
        let mut quad = 0.0;
        for i in 0..y.len() {
            let d = y[i] - self.anchor[i];
            linear += self.gradient[i] * d;
            quad += h[i] * d * d;
        }
        linear + quad / (2.0 * self.eta)
    }

    /// Exact minimizer of `Q` on the segment `[y, y + gamma_cap·(v − y)]`,
    /// expressed as the step in `[0, gamma_cap]`.
    pub fn optimal_inner_step(&self, y: &[f64], v: &[f64], gamma_cap: f64) -> f64 {
        let grad = self.model_gradient(y);
        self.step_from_gradient(&grad, y, v, gamma_cap)
    }

    fn step_from_gradient(&self, grad: &[f64], y: &[f64], v: &[f64], gamma_cap: f64) -> f64 {
        let h = self.metric.entries();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..y.len() {
            let d = y[i] - v[i];
            num += grad[i] * d;
            den += h[i] * d * d;
        }
        if den == 0.0 {
            return 0.0;
        }
        // num ≥ 0 up to rounding when v comes from the LMO
        (self.eta * num / den).clamp(0.0, gamma_cap)
    }

    /// `⟨∇Q(y), y − v*⟩` with `v*` the oracle answer for `∇Q(y)`.
    pub fn subproblem_duality_gap(&self, region: &FeasibleRegion, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), region.dim())?;
        let grad = self.model_gradient(y);
        let v = region.lmo(&grad)?;
        Ok(vector::dot(&grad, &vector::sub(y, &v)).max(0.0))
    }

    /// Runs `K` Frank-Wolfe steps from `y_0 = x_t` and returns `y_K`.
    pub fn inner_loop(&self, region: &FeasibleRegion, k: usize, gamma_cap: f64) -> Result<Vec<f64>> {
        Ok(self.inner_loop_logged(region, k, gamma_cap)?.point)
    }

    /// Like [`inner_loop`](Self::inner_loop) but also reports per-step model
    /// values and step sizes.
    pub fn inner_loop_logged(&self, region: &FeasibleRegion, k: usize, gamma_cap: f64) -> Result<InnerLoopOutcome> {
        if k == 0 {
            return Err(Error::InvalidParameter("inner iterations K must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&gamma_cap) {
            return Err(Error::InvalidParameter(format!(
                "step cap must lie in [0, 1], got {gamma_cap}"
            )));
        }
        check_dim(self.dim(), region.dim())?;
        let n = self.dim();
        let mut y = self.anchor.clone();
        let mut grad = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut values = Vec::with_capacity(k + 1);
        let mut steps = Vec::with_capacity(k);
        values.push(0.0);
        for _ in 0..k {
            self.model_gradient_into(&y, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite("model gradient"));
            }
            region.lmo_into(&grad, &mut v);
            let gamma = self.step_from_gradient(&grad, &y, &v, gamma_cap);
            if gamma > 0.0 {
                vector::convex_step(&mut y, &v, gamma);
            }
            steps.push(gamma);
            values.push(self.model_value(&y));
        }
        Ok(InnerLoopOutcome {
            point: y,
            values,
            steps,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InnerLoopOutcome {
    /// `y_K`
    pub point: Vec<f64>,
    /// `Q(y_0), …, Q(y_K)`
    pub values: Vec<f64>,
    /// `γ_0, …, γ_{K−1}`
    pub steps: Vec<f64>,
}

impl InnerLoopOutcome {
    /// Number of steps whose model value rose by more than `tol`.
    pub fn monotonicity_violations(&self, tol: f64) -> usize {
        self.values.windows(2).filter(|w| w[1] > w[0] + tol).count()
    }

    pub fn max_increase(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
