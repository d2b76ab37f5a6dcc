//! Synthetic sparse classification data.
//!
//! Column `j` (1-based) is nonzero with probability `1/j`; nonzeros are ±1.
//! Labels are the sign of `⟨a_i, u⟩` for a hidden `u ∈ {−1, 1}^n`, flipped
//! with probability `flip_probability`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSvmSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_flip")]
    pub flip_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_flip() -> f64 {
    0.05
}

impl SyntheticSvmSpec {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            flip_probability: default_flip(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParameter("m and n must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidParameter(format!(
                "flip probability must lie in [0, 1), got {}",
                self.flip_probability
            )));
        }
        Ok(())
    }
}

/// Generated data together with the hidden direction and the flip mask.
#[derive(Debug, Clone)]
pub struct SyntheticSvm {
    pub data: Dataset,
    pub direction: Vec<f64>,
    pub flipped: Vec<bool>,
}

pub fn generate_synthetic_svm(spec: &SyntheticSvmSpec) -> Result<Dataset> {
    Ok(generate_synthetic_svm_detailed(spec)?.data)
}

pub fn generate_synthetic_svm_detailed(spec: &SyntheticSvmSpec) -> Result<SyntheticSvm> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let direction: Vec<f64> = (0..spec.n).map(|_| sign_draw(&mut rng)).collect();
    let mut rows = Vec::with_capacity(spec.m);
    let mut labels = Vec::with_capacity(spec.m);
    let mut flipped = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let mut row = Vec::new();
        let mut score = 0.0;
        for j in 0..spec.n {
            if rng.random_bool(1.0 / (j + 1) as f64) {
                let v = sign_draw(&mut rng);
                score += v * direction[j];
                row.push((j, v));
            }
        }
        let clean = if score >= 0.0 { 1.0 } else { -1.0 };
        let flip = rng.random_bool(spec.flip_probability);
        labels.push(if flip { -clean } else { clean });
        flipped.push(flip);
        rows.push(row);
    }
    Ok(SyntheticSvm {
        data: Dataset::sparse(spec.n, rows, labels)?,
        direction,
        flipped,
    })
}

fn sign_draw(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}
