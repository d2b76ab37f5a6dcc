//! Batch-size, learning-rate and step-size schedules: the practical rules
//! used in experiments and the rules that carry convergence guarantees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SnapshotSchedule;
use crate::feasible_set::{FeasibleRegion, Norm, ProblemConstants, RegionKind};
use crate::objectives::FiniteSumObjective;
use crate::vector;

use super::config::{EtaSchedule, GammaSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PracticalRule {
    /// `b_t = round(t² / √m)`
    QuadraticOverSqrtM,
    /// `b_t = t + 1`
    Linear,
    /// `b_t = max{2^k : 2^k ≤ t + 1}`
    Doubling,
    /// `b_t = ⌊m / denominator⌋`
    ConstantFraction { denominator: usize },
}

impl std::str::FromStr for PracticalRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic_over_sqrt_m" => Ok(PracticalRule::QuadraticOverSqrtM),
            "linear" => Ok(PracticalRule::Linear),
            "doubling" => Ok(PracticalRule::Doubling),
            _ => match s.strip_prefix("constant_fraction:") {
                Some(d) => d
                    .parse()
                    .map(|denominator| PracticalRule::ConstantFraction { denominator })
                    .map_err(|_| Error::InvalidParameter(format!("bad denominator in {s:?}"))),
                None => Err(Error::InvalidParameter(format!("unknown batch rule {s:?}"))),
            },
        }
    }
}

/// Batch size of a practical rule at iteration `t`, clamped to `[1, m]`.
pub fn practical_schedule(rule: PracticalRule, m: usize, t: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let raw = match rule {
        PracticalRule::QuadraticOverSqrtM => {
            let t = t as f64;
            (t * t / (m as f64).sqrt()).round().min(m as f64) as usize
        }
        PracticalRule::Linear => t + 1,
        PracticalRule::Doubling => {
            let n = t + 1;
            1usize << (usize::BITS - 1 - n.leading_zeros())
        }
        PracticalRule::ConstantFraction { denominator } => {
            if denominator == 0 {
                return Err(Error::InvalidParameter("denominator must be >= 1".into()));
            }
            m / denominator
        }
    };
    Ok(raw.clamp(1, m))
}

/// Setting a guaranteed schedule is derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// AdaSFW on a convex objective.
    Convex,
    /// AdaSFW on a nonconvex objective.
    Nonconvex,
    /// AdaSVRF on a convex objective.
    VarianceReduced,
    /// AdaCSFW on a convex separable objective.
    Cached,
}

/// Inputs of [`theoretical_schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalParams {
    pub regime: Regime,
    pub constants: ProblemConstants,
    /// `κ = λ₀⁺ / λ₀⁻`
    pub kappa: f64,
    /// Exponent offset for the anytime nonconvex step bound.
    #[serde(default)]
    pub nu: Option<f64>,
    /// Snapshot offset for the AdaSVRF rule.
    #[serde(default)]
    pub k0: u32,
    pub inner_steps: usize,
    /// Fixed horizon `T` for the nonconvex rule.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Constant batch size for the AdaCSFW rule.
    #[serde(default)]
    pub batch: Option<usize>,
}

impl TheoreticalParams {
    pub fn validate(&self) -> Result<()> {
        theoretical_schedule(self).map(|_| ())
    }

    /// Real-valued batch size before rounding.
    fn raw_batch(&self, t: usize) -> f64 {
        let c = &self.constants;
        let t = t as f64;
        let ratio_sq = (c.g / (c.l * c.d)).powi(2);
        match self.regime {
            Regime::Convex => ratio_sq * (t + 2.0).powi(2),
            Regime::Nonconvex => match self.horizon {
                Some(horizon) => ratio_sq * horizon as f64,
                None => ratio_sq * (t + 1.0),
            },
            Regime::VarianceReduced => {
                let k = self.inner_steps as f64;
                8.0 * (2f64.powi(self.k0 as i32 + 1) + 1.0) * (k + 1.0 + self.kappa) * (t + 2.0)
            }
            Regime::Cached => self.batch.unwrap_or(1) as f64,
        }
    }

    /// Rounded up and clamped to `[1, m]`.
    pub fn batch_size(&self, t: usize, m: usize) -> usize {
        let raw = self.raw_batch(t);
        // absorb rounding noise so that exact integers stay put
        let b = (raw * (1.0 - 1e-12)).ceil();
        if b >= m as f64 {
            m
        } else {
            (b as usize).max(1)
        }
    }
}

/// Rules under which a convergence guarantee holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalSchedule {
    pub params: TheoreticalParams,
    pub eta: EtaSchedule,
    pub gamma: GammaSchedule,
    pub snapshots: Option<SnapshotSchedule>,
}

impl TheoreticalSchedule {
    pub fn batch_size(&self, t: usize, m: usize) -> usize {
        self.params.batch_size(t, m)
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "constant {name} must be supplied and positive, got {value}"
        )));
    }
    Ok(())
}

pub fn theoretical_schedule(params: &TheoreticalParams) -> Result<TheoreticalSchedule> {
    let c = &params.constants;
    c.validate()?;
    if !(params.kappa >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be >= 1, got {}",
            params.kappa
        )));
    }
    if params.inner_steps == 0 {
        return Err(Error::InvalidParameter("inner_steps must be >= 1".into()));
    }
    let harmonic = GammaSchedule::Harmonic;
    let lambda_over_l = EtaSchedule::LambdaMinusOver { divisor: c.l };
    match params.regime {
        Regime::Convex => {
            require_positive("G", c.g)?;
            require_positive("L", c.l)?;
            require_positive("D", c.d)?;
            Ok(TheoreticalSchedule {
                params: params.clone(),
                eta: lambda_over_l,
                gamma: harmonic,
                snapshots: None,
            })
        }
        Regime::Nonconvex => {
            require_positive("G", c.g)?;
            require_positive("L", c.l)?;
            require_positive("D", c.d)?;
            let gamma = match (params.horizon, params.nu) {
                (Some(0), _) => {
                    return Err(Error::InvalidParameter("horizon must be >= 1".into()));
                }
                (Some(horizon), _) => GammaSchedule::Constant {
                    value: 1.0 / (horizon as f64).sqrt(),
                },
                (None, Some(nu)) => GammaSchedule::PowerNu { nu },
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "the nonconvex regime needs nu or a horizon".into(),
                    ));
                }
            };
            gamma.validate()?;
            Ok(TheoreticalSchedule {
                params: params.clone(),
                eta: lambda_over_l,
                gamma,
                snapshots: None,
            })
        }
        Regime::VarianceReduced => {
            require_positive("L", c.l)?;
            Ok(TheoreticalSchedule {
                params: params.clone(),
                eta: lambda_over_l,
                gamma: harmonic,
                snapshots: Some(SnapshotSchedule::Doubling { k0: params.k0 }),
            })
        }
        Regime::Cached => {
            require_positive("L", c.l)?;
            require_positive("A_norm2", c.a_norm2)?;
            if params.batch.unwrap_or(0) == 0 {
                return Err(Error::InvalidParameter(
                    "the cached regime needs a constant batch size".into(),
                ));
            }
            // the sample count is folded in by `for_sample_count`
            Ok(TheoreticalSchedule {
                params: params.clone(),
                eta: EtaSchedule::LambdaMinusOver {
                    divisor: c.l * c.a_norm2 * c.a_norm2,
                },
                gamma: harmonic,
                snapshots: None,
            })
        }
    }
}

impl TheoreticalSchedule {
    /// Folds the sample count into sample-dependent learning rates.
    pub fn for_sample_count(mut self, m: usize) -> Self {
        if self.params.regime == Regime::Cached {
            if let EtaSchedule::LambdaMinusOver { divisor } = self.eta {
                self.eta = EtaSchedule::LambdaMinusOver {
                    divisor: divisor / m as f64,
                };
            }
        }
        self
    }
}

/// Estimates the constants of a problem.
///
/// `L` bounds the component smoothness by `L_ℓ·max_i ‖a_i‖²`; `G` is the
/// largest component-gradient norm seen at the region center and at
/// `samples` random points of the region, so it is a sampled lower estimate.
/// `D1_A` is exact for ℓ1-balls and an upper bound for ℓ∞-balls.
pub fn estimate_constants(
    obj: &FiniteSumObjective,
    region: &FeasibleRegion,
    samples: usize,
    seed: u64,
) -> Result<ProblemConstants> {
    crate::error::check_dim(obj.n(), region.dim())?;
    let data = obj.data();
    let m = obj.m();
    let n = obj.n();
    let row_norms: Vec<f64> = (0..m).map(|i| vector::norm2(&data.row_dense(i))).collect();
    let max_row = row_norms.iter().copied().fold(0.0, f64::max);
    let l = obj.loss().scalar_smoothness() * max_row * max_row;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![region.center().to_vec()];
    let mut v = vec![0.0; n];
    for _ in 0..samples {
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        region.lmo_into(&dir, &mut v);
        let w: f64 = rng.random_range(0.0..=1.0);
        let p: Vec<f64> = v
            .iter()
            .zip(region.center())
            .map(|(vi, ci)| ci + w * (vi - ci))
            .collect();
        points.push(v.clone());
        points.push(p);
    }
    let mut g: f64 = 0.0;
    for x in &points {
        for (i, norm) in row_norms.iter().enumerate() {
            g = g.max(obj.derivative_at(i, x).abs() * norm);
        }
    }

    let a_norm2 = spectral_norm(obj, 200, seed);
    let r = region.radius();
    let (d1_a, dinf_a) = match region.kind() {
        RegionKind::L1Ball => {
            let mut col1 = vec![0.0; n];
            let mut colinf = vec![0.0f64; n];
            for i in 0..m {
                for (j, a) in data.row_dense(i).into_iter().enumerate() {
                    col1[j] += a.abs();
                    colinf[j] = colinf[j].max(a.abs());
                }
            }
            let max1 = col1.iter().copied().fold(0.0, f64::max);
            let maxinf = colinf.iter().copied().fold(0.0, f64::max);
            (2.0 * r * max1, 2.0 * r * maxinf)
        }
        RegionKind::LinfBall => {
            let row1: Vec<f64> = (0..m).map(|i| vector::norm1(&data.row_dense(i))).collect();
            let sum: f64 = row1.iter().sum();
            let max = row1.iter().copied().fold(0.0, f64::max);
            (2.0 * r * sum, 2.0 * r * max)
        }
    };
    Ok(ProblemConstants {
        l,
        g,
        d: region.diameter(Norm::L2),
        a_norm2,
        d1_a,
        dinf_a,
    })
}

/// Largest singular value of the data matrix by power iteration on `AᵀA`.
pub fn spectral_norm(obj: &FiniteSumObjective, iterations: usize, seed: u64) -> f64 {
    let data = obj.data();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut v: Vec<f64> = (0..obj.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let nv = vector::norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let av = data.mat_vec(&v);
        sigma = vector::norm2(&av);
        v = data.mat_t_vec(&av);
    }
    sigma
}
