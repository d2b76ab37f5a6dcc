#![allow(dead_code)]

use adafw::{Dataset, FeasibleRegion, FiniteSumObjective, Loss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense rows with entries uniform in (−1, 1). Classification losses get ±1
/// labels from a random linear rule with 10% flips; squared error gets a noisy
/// linear response.
pub fn dense_problem(loss: Loss, m: usize, n: usize, seed: u64) -> FiniteSumObjective {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let truth: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let labels = rows
        .iter()
        .map(|a| {
            let s: f64 = a.iter().zip(&truth).map(|(x, y)| x * y).sum();
            match loss {
                Loss::SquaredError => s + 0.1 * r.random_range(-1.0..1.0),
                _ => {
                    let y = if s >= 0.0 { 1.0 } else { -1.0 };
                    if r.random_bool(0.1) {
                        -y
                    } else {
                        y
                    }
                }
            }
        })
        .collect();
    FiniteSumObjective::new(loss, Dataset::dense(rows, labels).unwrap()).unwrap()
}

/// Random point with ‖x‖₁ ≤ radius.
pub fn point_in_l1_ball(r: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    let scale = radius * r.random_range(0.0..1.0) / norm.max(1e-300);
    v.into_iter().map(|x| x * scale).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean projection onto the ℓ1-ball by sorting magnitudes.
pub fn euclidean_l1_projection(z: &[f64], radius: f64) -> Vec<f64> {
    if norm1(z) <= radius {
        return z.to_vec();
    }
    let mut u: Vec<f64> = z.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if uj > candidate {
            theta = candidate;
        }
    }
    z.iter()
        .map(|&x| {
            let s = if x < 0.0 { -1.0 } else { 1.0 };
            s * (x.abs() - theta).max(0.0)
        })
        .collect()
}

/// `Σ w_i (y_i − c_i)²`
pub fn weighted_sq(y: &[f64], c: &[f64], w: &[f64]) -> f64 {
    y.iter().zip(c).zip(w).map(|((a, b), h)| h * (a - b) * (a - b)).sum()
}

/// Minimizes `Σ w_i (y_i − c_i)²` over the ℓ1-ball by Euclidean projected
/// gradient with step `1/(2 max w)`.
pub fn weighted_l1_oracle(c: &[f64], w: &[f64], radius: f64, steps: usize) -> Vec<f64> {
    let step = 1.0 / w.iter().cloned().fold(0.0, f64::max);
    let mut y = euclidean_l1_projection(c, radius);
    let mut z = vec![0.0; c.len()];
    for _ in 0..steps {
        for i in 0..c.len() {
            z[i] = y[i] - step * w[i] * (y[i] - c[i]);
        }
        y = euclidean_l1_projection(&z, radius);
    }
    y
}

/// Minimum of a finite-sum objective over the ℓ1-ball by projected gradient
/// with step `1/L`.
pub fn l1_reference_minimum(obj: &FiniteSumObjective, radius: f64, lipschitz: f64, steps: usize) -> (Vec<f64>, f64) {
    let n = obj.n();
    let mut x = vec![0.0; n];
    for _ in 0..steps {
        let g = obj.full_gradient(&x).unwrap();
        let z: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi / lipschitz).collect();
        x = euclidean_l1_projection(&z, radius);
    }
    let v = obj.value(&x).unwrap();
    (x, v)
}

/// Largest eigenvalue of `(1/m) AᵀA` by power iteration.
pub fn gram_top_eigenvalue(obj: &FiniteSumObjective, iterations: usize) -> f64 {
    let data = obj.data();
    let mut v = vec![1.0; obj.n()];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let av = data.mat_vec(&v);
        let w: Vec<f64> = data.mat_t_vec(&av).iter().map(|x| x / obj.m() as f64).collect();
        lambda = norm2(&w) / norm2(&v);
        let nw = norm2(&w);
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda
}

pub fn l1_region(n: usize, radius: f64) -> FeasibleRegion {
    FeasibleRegion::l1_ball(n, radius).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
