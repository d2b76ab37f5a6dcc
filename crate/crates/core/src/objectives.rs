//! Finite-sum objectives `f(x) = (1/m) Σ_i ℓ(y_i, ⟨a_i, x⟩)`.
//!
//! Every loss here is separable: the component gradient is
//! `∇f_i(x) = f_i′(⟨a_i, x⟩)·a_i`, where `f_i′` is the scalar derivative of the
//! loss in its second argument. Minibatch estimates average `∇f_i` over the
//! sampled indices and are therefore unbiased for `∇f`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::vector;

/// Row storage of the data matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Dense(Vec<Vec<f64>>),
    /// Index/value pairs per row, indices strictly below `n`.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// Samples `a_1, …, a_m ∈ R^n` with labels `y_1, …, y_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Rows,
    n: usize,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn dense(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        for row in &rows {
            check_dim(n, row.len())?;
            check_finite(row, "dataset row")?;
        }
        Self::finish(Rows::Dense(rows), n, labels)
    }

    pub fn sparse(n: usize, rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>) -> Result<Self> {
        for row in &rows {
            for &(j, v) in row {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, len: n });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("dataset row"));
                }
            }
        }
        Self::finish(Rows::Sparse(rows), n, labels)
    }

    fn finish(rows: Rows, n: usize, labels: Vec<f64>) -> Result<Self> {
        let m = match &rows {
            Rows::Dense(r) => r.len(),
            Rows::Sparse(r) => r.len(),
        };
        if m == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one sample".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one feature".into()));
        }
        check_dim(m, labels.len())?;
        check_finite(&labels, "labels")?;
        Ok(Self { rows, n, labels })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rows(&self) -> &Rows {
        &self.rows
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.rows, Rows::Sparse(_))
    }

    /// `⟨a_i, x⟩`
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match &self.rows {
            Rows::Dense(r) => vector::dot(&r[i], x),
            Rows::Sparse(r) => r[i].iter().map(|&(j, v)| v * x[j]).sum(),
        }
    }

    /// `out += alpha · a_i`
    #[inline]
    pub fn add_row_scaled(&self, i: usize, alpha: f64, out: &mut [f64]) {
        match &self.rows {
            Rows::Dense(r) => vector::axpy(alpha, &r[i], out),
            Rows::Sparse(r) => {
                for &(j, v) in &r[i] {
                    out[j] += alpha * v;
                }
            }
        }
    }

    /// Dense copy of row `i`.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.add_row_scaled(i, 1.0, &mut out);
        out
    }

    /// `A·x`
    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|i| self.row_dot(i, x)).collect()
    }

    /// `Aᵀ·w`
    pub fn mat_t_vec(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                self.add_row_scaled(i, wi, &mut out);
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        match &self.rows {
            Rows::Dense(r) => r.iter().map(|row| row.iter().filter(|v| **v != 0.0).count()).sum(),
            Rows::Sparse(r) => r.iter().map(Vec::len).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `max(0, 1 − y·s)²`
    SquaredHinge,
    /// `(y − s)²`
    SquaredError,
    /// `ln(1 + exp(−y·s))`
    Logistic,
    /// `1 / (1 + exp(y·s))`, smooth, bounded and nonconvex.
    SigmoidNonconvex,
}

/// Above this margin the logistic loss is evaluated as its linear asymptote.
const LOGISTIC_LINEAR_CUTOFF: f64 = 30.0;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn value(self, y: f64, s: f64) -> f64 {
        match self {
            Loss::SquaredHinge => {
                let r = (1.0 - y * s).max(0.0);
                r * r
            }
            Loss::SquaredError => (y - s) * (y - s),
            Loss::Logistic => {
                let z = -y * s;
                if z > LOGISTIC_LINEAR_CUTOFF {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
            Loss::SigmoidNonconvex => sigmoid(-y * s),
        }
    }

    /// Derivative of the loss with respect to the score `s`.
    pub fn derivative(self, y: f64, s: f64) -> f64 {
        match self {
            Loss::SquaredHinge => -2.0 * y * (1.0 - y * s).max(0.0),
            Loss::SquaredError => -2.0 * (y - s),
            Loss::Logistic => -y * sigmoid(-y * s),
            Loss::SigmoidNonconvex => {
                let p = sigmoid(y * s);
                -y * p * (1.0 - p)
            }
        }
    }

    /// Lipschitz constant of the derivative for labels with `|y| = 1`.
    pub fn scalar_smoothness(self) -> f64 {
        match self {
            Loss::SquaredHinge | Loss::SquaredError => 2.0,
            Loss::Logistic => 0.25,
            // max |σ''| = √3/18
            Loss::SigmoidNonconvex => 3f64.sqrt() / 18.0,
        }
    }

    pub fn is_convex(self) -> bool {
        !matches!(self, Loss::SigmoidNonconvex)
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, Loss::SquaredError)
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::SquaredHinge => "squared_hinge",
            Loss::SquaredError => "squared_error",
            Loss::Logistic => "logistic",
            Loss::SigmoidNonconvex => "sigmoid_nonconvex",
        }
    }
}

/// `f(x) = (1/m) Σ_i loss(y_i, ⟨a_i, x⟩)` over a fixed dataset.
#[derive(Debug, Clone)]
pub struct FiniteSumObjective {
    loss: Loss,
    data: Dataset,
    separable: bool,
}

impl FiniteSumObjective {
    pub fn new(loss: Loss, data: Dataset) -> Result<Self> {
        if loss.is_classification() && data.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter(format!(
                "{} requires labels in {{-1, +1}}",
                loss.name()
            )));
        }
        Ok(Self {
            loss,
            data,
            separable: true,
        })
    }

    /// Marks the objective as opaque, so estimators relying on the
    /// `f_i(⟨a_i, x⟩)` structure refuse it.
    pub fn with_separable(mut self, separable: bool) -> Self {
        self.separable = separable;
        self
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    pub fn m(&self) -> usize {
        self.data.m()
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        check_finite(x, "iterate")?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let total: f64 = (0..self.m())
            .map(|i| self.loss.value(self.data.labels[i], self.data.row_dot(i, x)))
            .sum();
        total / self.m() as f64
    }

    /// `f_i′(s)`, without the `1/m` factor.
    pub fn scalar_derivative(&self, i: usize, s: f64) -> Result<f64> {
        self.check_index(i)?;
        if !s.is_finite() {
            return Err(Error::NonFinite("score"));
        }
        Ok(self.loss.derivative(self.data.labels[i], s))
    }

    /// `f_i′(⟨a_i, x⟩)`
    #[inline]
    pub(crate) fn derivative_at(&self, i: usize, x: &[f64]) -> f64 {
        self.loss.derivative(self.data.labels[i], self.data.row_dot(i, x))
    }

    /// Vector of `f_i′(⟨a_i, x⟩)` for every sample.
    pub fn scalar_derivatives(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        Ok((0..self.m()).map(|i| self.derivative_at(i, x)).collect())
    }

    /// `∇f(x) = (1/m) Σ_i f_i′(⟨a_i, x⟩)·a_i`
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        check_finite(x, "iterate")?;
        let mut out = vec![0.0; self.n()];
        self.full_gradient_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.m() {
            let d = self.derivative_at(i, x);
            if d != 0.0 {
                self.data.add_row_scaled(i, d, out);
            }
        }
        let inv_m = 1.0 / self.m() as f64;
        out.iter_mut().for_each(|o| *o *= inv_m);
    }

    /// `∇f_i(x)`
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        check_dim(self.n(), x.len())?;
        let mut out = vec![0.0; self.n()];
        self.data.add_row_scaled(i, self.derivative_at(i, x), &mut out);
        Ok(out)
    }

    /// `(1/b) Σ_{i ∈ indices} ∇f_i(x)`, summed in the order given.
    pub fn minibatch_gradient(&self, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        check_dim(self.n(), x.len())?;
        check_finite(x, "iterate")?;
        self.check_batch(indices)?;
        let mut out = vec![0.0; self.n()];
        self.minibatch_gradient_into(x, indices, &mut out);
        Ok(out)
    }

    pub(crate) fn minibatch_gradient_into(&self, x: &[f64], indices: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &i in indices {
            let d = self.derivative_at(i, x);
            if d != 0.0 {
                self.data.add_row_scaled(i, d, out);
            }
        }
        let inv_b = 1.0 / indices.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv_b);
    }

    pub(crate) fn check_batch(&self, indices: &[usize]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        indices.iter().try_for_each(|&i| self.check_index(i))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.m() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.m(),
            });
        }
        Ok(())
    }
}
