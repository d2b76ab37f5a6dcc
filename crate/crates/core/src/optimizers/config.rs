use serde::{Deserialize, Serialize};

use crate::adaptive_metric::{DEFAULT_BETA_M, DEFAULT_BETA_S, DEFAULT_DELTA, DEFAULT_LAMBDA_PLUS};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, SnapshotSchedule};

use super::schedules::{PracticalRule, TheoreticalParams, TheoreticalSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sfw,
    Svrf,
    SpiderFw,
    Orgfw,
    Csfw,
    Adasfw,
    Adasvrf,
    Adacsfw,
    Adamsfw,
    Adagrad,
    Amsgrad,
}

/// How an algorithm turns a gradient estimate into the next iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// One oracle call and a convex-combination step.
    TemplateFw,
    /// K inner Frank-Wolfe steps on an AdaGrad-metric quadratic model.
    AdaptiveFw,
    /// Like `AdaptiveFw` but with AMSGrad momentum and metric.
    AdamSfw,
    /// Projection in the adaptive metric.
    Projected,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Sfw,
        Algorithm::Svrf,
        Algorithm::SpiderFw,
        Algorithm::Orgfw,
        Algorithm::Csfw,
        Algorithm::Adasfw,
        Algorithm::Adasvrf,
        Algorithm::Adacsfw,
        Algorithm::Adamsfw,
        Algorithm::Adagrad,
        Algorithm::Amsgrad,
    ];

    pub fn family(self) -> Family {
        use Algorithm::*;
        match self {
            Sfw | Svrf | SpiderFw | Orgfw | Csfw => Family::TemplateFw,
            Adasfw | Adasvrf | Adacsfw => Family::AdaptiveFw,
            Adamsfw => Family::AdamSfw,
            Adagrad | Amsgrad => Family::Projected,
        }
    }

    pub fn estimator(self) -> EstimatorKind {
        use Algorithm::*;
        match self {
            Sfw | Adasfw | Adamsfw | Adagrad | Amsgrad => EstimatorKind::Sfw,
            Svrf | Adasvrf => EstimatorKind::Svrf,
            SpiderFw => EstimatorKind::SpiderFw,
            Orgfw => EstimatorKind::Orgfw,
            Csfw | Adacsfw => EstimatorKind::Csfw,
        }
    }

    pub fn name(self) -> &'static str {
        use Algorithm::*;
        match self {
            Sfw => "sfw",
            Svrf => "svrf",
            SpiderFw => "spider_fw",
            Orgfw => "orgfw",
            Csfw => "csfw",
            Adasfw => "adasfw",
            Adasvrf => "adasvrf",
            Adacsfw => "adacsfw",
            Adamsfw => "adamsfw",
            Adagrad => "adagrad",
            Amsgrad => "amsgrad",
        }
    }

    /// Batch-size rule used when the configuration leaves it open.
    pub fn default_batch(self) -> BatchSchedule {
        use Algorithm::*;
        match self {
            Sfw | Adasfw => BatchSchedule::Practical(PracticalRule::QuadraticOverSqrtM),
            Svrf | Adasvrf => BatchSchedule::Practical(PracticalRule::Linear),
            SpiderFw => BatchSchedule::Practical(PracticalRule::Doubling),
            Orgfw | Csfw | Adacsfw | Adamsfw | Adagrad | Amsgrad => {
                BatchSchedule::Practical(PracticalRule::ConstantFraction { denominator: 100 })
            }
        }
    }

    pub fn default_gamma(self) -> GammaSchedule {
        match self.family() {
            Family::TemplateFw => GammaSchedule::Harmonic,
            _ => GammaSchedule::CapOne,
        }
    }

    pub fn default_snapshots(self) -> SnapshotSchedule {
        match self {
            // epochs restart whenever t + 1 is a power of two
            Algorithm::SpiderFw => SnapshotSchedule::Doubling { k0: 0 },
            _ => SnapshotSchedule::Doubling { k0: 4 },
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Outer step-size bound `γ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GammaSchedule {
    /// `2 / (t + 2)`
    Harmonic,
    /// `1 / (t + 1)^(1/2 + ν)` with `ν ∈ (0, 1/2)`
    PowerNu {
        nu: f64,
    },
    Constant {
        value: f64,
    },
    CapOne,
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GammaSchedule::PowerNu { nu } if !(nu > 0.0 && nu < 0.5) => {
                Err(Error::InvalidParameter(format!("nu must lie in (0, 1/2), got {nu}")))
            }
            GammaSchedule::Constant { value } if !(0.0..=1.0).contains(&value) => Err(Error::InvalidParameter(
                format!("constant step bound must lie in [0, 1], got {value}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        let t = t as f64;
        match *self {
            GammaSchedule::Harmonic => 2.0 / (t + 2.0),
            GammaSchedule::PowerNu { nu } => (t + 1.0).powf(-(0.5 + nu)),
            GammaSchedule::Constant { value } => value,
            GammaSchedule::CapOne => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BatchSchedule {
    /// Exact gradients: every index once, in order.
    Full,
    Constant {
        size: usize,
    },
    Practical(PracticalRule),
    Theoretical(TheoreticalParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant {
        value: f64,
    },
    /// `η_t = λ_t⁻ / divisor` with `λ_t⁻` the smallest entry of the clipped metric.
    LambdaMinusOver {
        divisor: f64,
    },
}

impl EtaSchedule {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            EtaSchedule::Constant { value } => value,
            EtaSchedule::LambdaMinusOver { divisor } => divisor,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning-rate parameter must be positive, got {v}"
            )));
        }
        Ok(())
    }

    pub fn at(&self, lambda_minus: f64) -> f64 {
        match *self {
            EtaSchedule::Constant { value } => value,
            EtaSchedule::LambdaMinusOver { divisor } => lambda_minus / divisor,
        }
    }
}

/// ORGFW momentum `ρ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RhoSchedule {
    /// `(t + 2)^(−exponent)`
    Power {
        exponent: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for RhoSchedule {
    fn default() -> Self {
        RhoSchedule::Power { exponent: 2.0 / 3.0 }
    }
}

impl RhoSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            RhoSchedule::Power { exponent } => (t as f64 + 2.0).powf(-exponent),
            RhoSchedule::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Budget {
    Iterations {
        count: usize,
    },
    /// Measured in component-gradient evaluations divided by `m`.
    Epochs {
        count: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GapEvery {
    Iterations { every: usize },
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Inner Frank-Wolfe iterations `K`.
    pub inner_steps: usize,
    pub eta: EtaSchedule,
    pub gamma: Option<GammaSchedule>,
    pub batch: Option<BatchSchedule>,
    pub delta: f64,
    pub beta_m: f64,
    pub beta_s: f64,
    pub rho: RhoSchedule,
    /// `None` disables clipping (bounds `[δ, 1e12]`).
    pub clip: Option<ClipBounds>,
    pub seed: u64,
    pub budget: Budget,
    pub snapshots: Option<SnapshotSchedule>,
    pub gap_every: GapEvery,
    /// Start point; the region center when absent.
    pub x0: Option<Vec<f64>>,
    /// Fail the run on the first invariant violation instead of counting it.
    pub strict: bool,
    /// Record wall-clock seconds in the trace; zero otherwise.
    pub record_time: bool,
    /// Keep every iterate `x_0, …, x_T` in the trace.
    pub record_iterates: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adasfw,
            inner_steps: 5,
            eta: EtaSchedule::Constant { value: 1.0 },
            gamma: None,
            batch: None,
            delta: DEFAULT_DELTA,
            beta_m: DEFAULT_BETA_M,
            beta_s: DEFAULT_BETA_S,
            rho: RhoSchedule::default(),
            clip: None,
            seed: 0,
            budget: Budget::Iterations { count: 100 },
            snapshots: None,
            gap_every: GapEvery::Epoch,
            x0: None,
            strict: false,
            record_time: true,
            record_iterates: false,
        }
    }
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    /// Installs the batch, learning-rate, step and snapshot rules of a guaranteed schedule.
    pub fn with_theoretical(mut self, schedule: &TheoreticalSchedule) -> Self {
        self.batch = Some(BatchSchedule::Theoretical(schedule.params.clone()));
        self.eta = schedule.eta;
        self.gamma = Some(schedule.gamma);
        if let Some(s) = &schedule.snapshots {
            self.snapshots = Some(s.clone());
        }
        self
    }

    pub fn gamma_schedule(&self) -> GammaSchedule {
        self.gamma.unwrap_or_else(|| self.algorithm.default_gamma())
    }

    pub fn batch_schedule(&self) -> BatchSchedule {
        self.batch.clone().unwrap_or_else(|| self.algorithm.default_batch())
    }

    pub fn snapshot_schedule(&self) -> SnapshotSchedule {
        self.snapshots
            .clone()
            .unwrap_or_else(|| self.algorithm.default_snapshots())
    }

    pub fn clip_bounds(&self) -> ClipBounds {
        self.clip.unwrap_or(ClipBounds {
            lower: self.delta,
            upper: DEFAULT_LAMBDA_PLUS,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::InvalidParameter("inner_steps must be >= 1".into()));
        }
        self.eta.validate()?;
        self.gamma_schedule().validate()?;
        self.snapshot_schedule().validate()?;
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        let clip = self.clip_bounds();
        if !(clip.lower > 0.0 && clip.lower <= clip.upper) {
            return Err(Error::InvalidParameter(format!(
                "clip bounds must satisfy 0 < lower <= upper, got [{}, {}]",
                clip.lower, clip.upper
            )));
        }
        if let RhoSchedule::Constant { value } = self.rho {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {value}")));
            }
        }
        match self.budget {
            Budget::Epochs { count } if !(count > 0.0 && count.is_finite()) => {
                return Err(Error::InvalidParameter("epoch budget must be positive".into()));
            }
            _ => {}
        }
        if let GapEvery::Iterations { every: 0 } = self.gap_every {
            return Err(Error::InvalidParameter("gap_every must be >= 1".into()));
        }
        if let BatchSchedule::Constant { size: 0 } = self.batch_schedule() {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if let BatchSchedule::Theoretical(p) = self.batch_schedule() {
            p.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert_eq!(GammaSchedule::Harmonic.at(0), 1.0);
        assert_eq!(GammaSchedule::Harmonic.at(2), 0.5);
        assert_eq!(GammaSchedule::CapOne.at(100), 1.0);
        assert!((GammaSchedule::PowerNu { nu: 0.05 }.at(3) - 4f64.powf(-0.55)).abs() < 1e-15);
        assert!(GammaSchedule::PowerNu { nu: 0.5 }.validate().is_err());
        assert!(GammaSchedule::Constant { value: 1.5 }.validate().is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("storc".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = OptimizerConfig {
            algorithm: Algorithm::Adacsfw,
            inner_steps: 2,
            eta: EtaSchedule::Constant {
                value: 10f64.powf(-1.5),
            },
            batch: Some(BatchSchedule::Practical(PracticalRule::ConstantFraction {
                denominator: 100,
            })),
            budget: Budget::Epochs { count: 10.0 },
            ..Default::default()
        };
        let s = serde_json::to_string(&cfg).unwrap();
        let back: OptimizerConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        let sparse: OptimizerConfig = serde_json::from_str(r#"{"algorithm":"csfw"}"#).unwrap();
        assert_eq!(sparse.inner_steps, 5);
        assert_eq!(sparse.gamma_schedule(), GammaSchedule::Harmonic);
    }

    #[test]
    fn validation() {
        let mut cfg = OptimizerConfig::new(Algorithm::Adasfw);
        assert!(cfg.validate().is_ok());
        cfg.inner_steps = 0;
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig {
            clip: Some(ClipBounds { lower: 2.0, upper: 1.0 }),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig {
            rho: RhoSchedule::Constant { value: 0.0 },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_rho_schedule() {
        assert!((RhoSchedule::default().at(0) - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
    }
}
