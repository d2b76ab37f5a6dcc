//! Feasible regions: linear minimization oracles over ℓ1- and ℓ∞-balls,
//! membership tests, closed-form diameters, and the ℓ1-ball projection in a
//! diagonal metric used by the projected adaptive-gradient baselines.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::vector;

/// Default relative tolerance for membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    L1Ball,
    LinfBall,
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionKind::L1Ball => f.write_str("l1_ball"),
            RegionKind::LinfBall => f.write_str("linf_ball"),
        }
    }
}

/// Norm index used for diameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    /// Maps a numeric norm index (1, 2 or +∞) to a [`Norm`].
    pub fn from_index(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Norm::L1)
        } else if p == 2.0 {
            Ok(Norm::L2)
        } else if p == f64::INFINITY {
            Ok(Norm::Linf)
        } else {
            Err(Error::InvalidParameter(format!("unsupported norm index {p}")))
        }
    }

    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => vector::norm1(v),
            Norm::L2 => vector::norm2(v),
            Norm::Linf => vector::norm_inf(v),
        }
    }
}

/// A ball `{x : ‖x − center‖_p ≤ radius}` with `p ∈ {1, ∞}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    kind: RegionKind,
    center: Vec<f64>,
    radius: f64,
}

impl FeasibleRegion {
    pub fn new(kind: RegionKind, center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("region dimension must be >= 1".into()));
        }
        check_finite(&center, "region center")?;
        Ok(Self { kind, center, radius })
    }

    /// ℓ1-ball of the given radius centered at the origin of `R^n`.
    pub fn l1_ball(n: usize, radius: f64) -> Result<Self> {
        Self::new(RegionKind::L1Ball, vec![0.0; n], radius)
    }

    /// ℓ∞-ball of the given radius centered at the origin of `R^n`.
    pub fn linf_ball(n: usize, radius: f64) -> Result<Self> {
        Self::new(RegionKind::LinfBall, vec![0.0; n], radius)
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn norm(&self) -> Norm {
        match self.kind {
            RegionKind::L1Ball => Norm::L1,
            RegionKind::LinfBall => Norm::Linf,
        }
    }

    /// Linear minimization oracle: a vertex minimizing `⟨g, v⟩` over the ball.
    pub fn lmo(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), g.len())?;
        check_finite(g, "lmo direction")?;
        let mut v = self.center.clone();
        self.lmo_into(g, &mut v);
        Ok(v)
    }

    /// Unchecked oracle writing into `out`. Ties on the ℓ1 argmax go to the
    /// lowest index and `sign(0) = +1`.
    pub(crate) fn lmo_into(&self, g: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.center);
        match self.kind {
            RegionKind::L1Ball => {
                let mut best = 0;
                let mut best_abs = g[0].abs();
                for (i, gi) in g.iter().enumerate().skip(1) {
                    if gi.abs() > best_abs {
                        best = i;
                        best_abs = gi.abs();
                    }
                }
                out[best] -= self.radius * sign(g[best]);
            }
            RegionKind::LinfBall => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o -= self.radius * sign(*gi);
                }
            }
        }
    }

    /// True iff `‖x − center‖_p ≤ radius·(1 + tol)`.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "membership point")?;
        Ok(self.contains_unchecked(x, tol))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64], tol: f64) -> bool {
        let d = vector::sub(x, &self.center);
        self.norm().of(&d) <= self.radius * (1.0 + tol)
    }

    /// Closed-form diameter of the ball in the requested norm.
    pub fn diameter(&self, p: Norm) -> f64 {
        let r = self.radius;
        let n = self.dim() as f64;
        match (self.kind, p) {
            (RegionKind::L1Ball, _) => 2.0 * r,
            (RegionKind::LinfBall, Norm::Linf) => 2.0 * r,
            (RegionKind::LinfBall, Norm::L2) => 2.0 * r * n.sqrt(),
            (RegionKind::LinfBall, Norm::L1) => 2.0 * r * n,
        }
    }

    /// Projects `z` onto the region in the metric `Σ h_i (x_i − z_i)²`.
    ///
    /// ℓ∞-balls are boxes, so the projection is a coordinatewise clamp for any
    /// diagonal metric. ℓ1-balls must be centered at the origin.
    pub fn metric_projection(&self, z: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), h.len())?;
        match self.kind {
            RegionKind::L1Ball => {
                if self.center.iter().any(|&c| c != 0.0) {
                    return Err(Error::UnsupportedRegion(
                        "metric projection onto an ℓ1-ball requires center 0".into(),
                    ));
                }
                metric_projection_l1(z, h, self.radius)
            }
            RegionKind::LinfBall => {
                check_finite(z, "projection point")?;
                if h.iter().any(|&hi| !(hi > 0.0)) {
                    return Err(Error::InvalidParameter("metric entries must be positive".into()));
                }
                Ok(z.iter()
                    .zip(&self.center)
                    .map(|(zi, ci)| zi.clamp(ci - self.radius, ci + self.radius))
                    .collect())
            }
        }
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `argmin_{‖x‖₁ ≤ radius} Σ_i h_i (x_i − z_i)²`.
///
/// The minimizer is the weighted soft-threshold
/// `x_i = sign(z_i)·max(|z_i| − θ/h_i, 0)` where `θ = 0` when `z` is already
/// feasible and otherwise solves `Σ_i max(|z_i| − θ/h_i, 0) = radius`. The
/// left side is piecewise linear in `θ` with breakpoints `h_i|z_i|`, so the
/// root is located exactly by a single sort.
pub fn metric_projection_l1(z: &[f64], h: &[f64], radius: f64) -> Result<Vec<f64>> {
    check_dim(z.len(), h.len())?;
    check_finite(z, "projection point")?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if h.iter().any(|&hi| !(hi > 0.0 && hi.is_finite())) {
        return Err(Error::InvalidParameter("metric entries must be positive".into()));
    }
    if vector::norm1(z) <= radius {
        return Ok(z.to_vec());
    }

    let mut order: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
    // descending breakpoints
    order.sort_by(|&a, &b| (h[b] * z[b].abs()).total_cmp(&(h[a] * z[a].abs())));

    let mut abs_sum = 0.0;
    let mut inv_h_sum = 0.0;
    let mut theta = 0.0;
    for &i in &order {
        let next_sum = abs_sum + z[i].abs();
        let next_w = inv_h_sum + 1.0 / h[i];
        let candidate = (next_sum - radius) / next_w;
        if h[i] * z[i].abs() > candidate {
            abs_sum = next_sum;
            inv_h_sum = next_w;
            theta = candidate;
        } else {
            break;
        }
    }

    Ok(z.iter()
        .zip(h)
        .map(|(&zi, &hi)| sign(zi) * (zi.abs() - theta / hi).max(0.0))
        .collect())
}

/// Bounds on the problem used by the theoretical schedules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Smoothness bound on the components.
    pub l: f64,
    /// Bound on component gradient norms over the region.
    pub g: f64,
    /// ℓ2-diameter of the region.
    pub d: f64,
    /// Spectral norm of the data matrix.
    pub a_norm2: f64,
    /// ℓ1-diameter of `A·C`.
    pub d1_a: f64,
    /// ℓ∞-diameter of `A·C`.
    pub dinf_a: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("L", self.l),
            ("G", self.g),
            ("D", self.d),
            ("A_norm2", self.a_norm2),
            ("D1_A", self.d1_a),
            ("Dinf_A", self.dinf_a),
        ];
        for (name, value) in fields {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "constant {name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that `D` agrees with the region's ℓ2-diameter.
    pub fn validate_against(&self, region: &FeasibleRegion) -> Result<()> {
        self.validate()?;
        let d = region.diameter(Norm::L2);
        if (self.d - d).abs() > 1e-12 * d.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "D = {} disagrees with the region diameter {d}",
                self.d
            )));
        }
        Ok(())
    }
}
