//! Diagonal metrics `H_t = diag(h)` built from past gradient estimates.

use crate::error::{check_dim, check_finite, Error, Result};

/// Default offset added to the square-root accumulator.
pub const DEFAULT_DELTA: f64 = 1e-8;
pub const DEFAULT_BETA_M: f64 = 0.9;
pub const DEFAULT_BETA_S: f64 = 0.99;
/// Stand-in for an infinite upper clipping bound.
pub const DEFAULT_LAMBDA_PLUS: f64 = 1e12;

/// Positive diagonal of `H_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric(Vec<f64>);

impl DiagonalMetric {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(
                "metric entries must be positive and finite".into(),
            ));
        }
        Ok(Self(entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// `‖d‖²_H = Σ h_i d_i²`
    #[inline]
    pub fn norm_sq(&self, d: &[f64]) -> f64 {
        self.0.iter().zip(d).map(|(h, x)| h * x * x).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `Σ h_i d_i²`, checking dimensions.
pub fn metric_norm_sq(h: &DiagonalMetric, d: &[f64]) -> Result<f64> {
    check_dim(h.dim(), d.len())?;
    Ok(h.norm_sq(d))
}

/// AdaGrad accumulator: `h_i = δ + √(Σ_s g_{s,i}²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradAccumulator {
    sum_of_squares: Vec<f64>,
    delta: f64,
}

impl AdaGradAccumulator {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            sum_of_squares: vec![0.0; n],
            delta,
        })
    }

    pub fn sum_of_squares(&self) -> &[f64] {
        &self.sum_of_squares
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn update(&mut self, g: &[f64]) -> Result<DiagonalMetric> {
        check_dim(self.sum_of_squares.len(), g.len())?;
        check_finite(g, "gradient estimate")?;
        for (s, gi) in self.sum_of_squares.iter_mut().zip(g) {
            *s += gi * gi;
        }
        Ok(self.metric())
    }

    pub fn metric(&self) -> DiagonalMetric {
        DiagonalMetric(self.sum_of_squares.iter().map(|s| self.delta + s.sqrt()).collect())
    }
}

fn check_bounds(lambda_minus: f64, lambda_plus: f64) -> Result<()> {
    if !(lambda_minus > 0.0) || !(lambda_minus <= lambda_plus) || lambda_plus.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "clip bounds must satisfy 0 < λ⁻ ≤ λ⁺, got [{lambda_minus}, {lambda_plus}]"
        )));
    }
    Ok(())
}

/// Clamps every entry into `[lambda_minus, lambda_plus]`.
pub fn clip_metric(h: &DiagonalMetric, lambda_minus: f64, lambda_plus: f64) -> Result<DiagonalMetric> {
    check_bounds(lambda_minus, lambda_plus)?;
    Ok(DiagonalMetric(
        h.0.iter().map(|v| v.clamp(lambda_minus, lambda_plus)).collect(),
    ))
}

/// Clipping across iterations, enforcing `λ_t⁻ ≤ λ_{t+1}⁻ ≤ λ_{t+1}⁺ ≤ λ_t⁺`.
#[derive(Debug, Clone, Default)]
pub struct MetricClipper {
    previous: Option<(f64, f64)>,
    initial: Option<(f64, f64)>,
}

impl MetricClipper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clip(&mut self, h: &DiagonalMetric, lambda_minus: f64, lambda_plus: f64) -> Result<DiagonalMetric> {
        check_bounds(lambda_minus, lambda_plus)?;
        if let Some((lo, hi)) = self.previous {
            if lambda_minus < lo || lambda_plus > hi {
                return Err(Error::InvalidParameter(format!(
                    "clip bounds may only tighten: [{lambda_minus}, {lambda_plus}] after [{lo}, {hi}]"
                )));
            }
        }
        self.previous = Some((lambda_minus, lambda_plus));
        self.initial.get_or_insert((lambda_minus, lambda_plus));
        clip_metric(h, lambda_minus, lambda_plus)
    }

    /// `κ = λ₀⁺ / λ₀⁻`, once the first bounds are known.
    pub fn kappa(&self) -> Option<f64> {
        self.initial.map(|(lo, hi)| hi / lo)
    }
}

/// AMSGrad moments: EMA of the gradient, EMA of its square, and the running
/// maximum of the latter. No bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsGradState {
    momentum: Vec<f64>,
    second_moment: Vec<f64>,
    max_second_moment: Vec<f64>,
    beta_m: f64,
    beta_s: f64,
    delta: f64,
}

impl AmsGradState {
    pub fn new(n: usize, beta_m: f64, beta_s: f64, delta: f64) -> Result<Self> {
        for (name, b) in [("beta_m", beta_m), ("beta_s", beta_s)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if beta_m >= beta_s.sqrt() {
            return Err(Error::InvalidParameter(format!(
                "beta_m must be below sqrt(beta_s): {beta_m} >= {}",
                beta_s.sqrt()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            momentum: vec![0.0; n],
            second_moment: vec![0.0; n],
            max_second_moment: vec![0.0; n],
            beta_m,
            beta_s,
            delta,
        })
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn max_second_moment(&self) -> &[f64] {
        &self.max_second_moment
    }

    /// Advances the moments with `g`; returns the new momentum and metric.
    pub fn update(&mut self, g: &[f64]) -> Result<(Vec<f64>, DiagonalMetric)> {
        check_dim(self.momentum.len(), g.len())?;
        check_finite(g, "gradient estimate")?;
        let (bm, bs) = (self.beta_m, self.beta_s);
        for i in 0..g.len() {
            self.momentum[i] = bm * self.momentum[i] + (1.0 - bm) * g[i];
            self.second_moment[i] = bs * self.second_moment[i] + (1.0 - bs) * g[i] * g[i];
            self.max_second_moment[i] = self.max_second_moment[i].max(self.second_moment[i]);
        }
        Ok((self.momentum.clone(), self.metric()))
    }

    pub fn metric(&self) -> DiagonalMetric {
        DiagonalMetric(self.max_second_moment.iter().map(|s| self.delta + s.sqrt()).collect())
    }
}
