mod common;

use adafw::optimizers::{
    duality_gap, run, run_adamsfw, run_projected_adagrad, sample_uniform_iterate, Algorithm, BatchSchedule, Budget,
    ClipBounds, EtaSchedule, GammaSchedule, GapEvery, OptimizerConfig,
};
use adafw::{Dataset, FeasibleRegion, FiniteSumObjective, Loss};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn every_iteration(config: OptimizerConfig) -> OptimizerConfig {
    OptimizerConfig {
        gap_every: GapEvery::Iterations { every: 1 },
        record_time: false,
        ..config
    }
}

#[test]
fn duality_gap_bounds_primal_gap() {
    let obj = dense_problem(Loss::Logistic, 40, 6, 1);
    let radius = 2.0;
    let region = l1_region(6, radius);
    let (_, f_star) = l1_reference_minimum(&obj, radius, 0.25 * gram_top_eigenvalue(&obj, 300), 100_000);
    for algorithm in [
        Algorithm::Sfw,
        Algorithm::Adasfw,
        Algorithm::Adacsfw,
        Algorithm::Adagrad,
    ] {
        let config = every_iteration(OptimizerConfig {
            budget: Budget::Iterations { count: 200 },
            batch: Some(BatchSchedule::Constant { size: 8 }),
            ..OptimizerConfig::new(algorithm)
        });
        let trace = run(&obj, &region, &config).unwrap();
        for r in &trace.records {
            assert!(r.duality_gap >= 0.0);
            assert!(
                r.duality_gap >= r.objective - f_star - 1e-8,
                "{algorithm} t={}: gap {} < primal gap {}",
                r.t,
                r.duality_gap,
                r.objective - f_star
            );
        }
    }
}

#[test]
fn full_batch_sfw_meets_classical_bound() {
    // f(x) = (1/3)·Σ (y_i − s_i x_i)², Hessian diag(2 s_i² / 3)
    let scales = [3.0, 1.5, 0.5];
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| if i == j { scales[i] } else { 0.0 }).collect())
        .collect();
    let obj = FiniteSumObjective::new(Loss::SquaredError, Dataset::dense(rows, vec![2.0, -1.0, 0.5]).unwrap()).unwrap();
    let lipschitz = 2.0 * 9.0 / 3.0;
    let radius = 1.0;
    let diameter = 2.0 * radius;
    let region = l1_region(3, radius);
    let (_, f_star) = l1_reference_minimum(&obj, radius, lipschitz, 100_000);
    let config = every_iteration(OptimizerConfig {
        batch: Some(BatchSchedule::Full),
        gamma: Some(GammaSchedule::Harmonic),
        budget: Budget::Iterations { count: 1000 },
        ..OptimizerConfig::new(Algorithm::Sfw)
    });
    let trace = run(&obj, &region, &config).unwrap();
    for r in trace.records.iter().skip(1) {
        let bound = 2.0 * lipschitz * diameter * diameter / (r.t as f64 + 2.0);
        assert!(r.objective - f_star <= bound, "t={}", r.t);
    }
}

#[test]
fn runs_are_deterministic() {
    let obj = dense_problem(Loss::SquaredHinge, 50, 5, 3);
    let region = FeasibleRegion::linf_ball(5, 1.0).unwrap();
    for algorithm in Algorithm::ALL {
        let config = every_iteration(OptimizerConfig {
            budget: Budget::Iterations { count: 40 },
            batch: Some(BatchSchedule::Constant { size: 5 }),
            seed: 99,
            ..OptimizerConfig::new(algorithm)
        });
        let a = run(&obj, &region, &config).unwrap();
        let b = run(&obj, &region, &config).unwrap();
        assert_eq!(a.records, b.records, "{algorithm}");
        assert_eq!(a.final_point, b.final_point, "{algorithm}");
        let other = run(&obj, &region, &OptimizerConfig { seed: 100, ..config }).unwrap();
        if !matches!(algorithm, Algorithm::Svrf | Algorithm::Adasvrf) || other.records.len() > 1 {
            assert_ne!(a.final_point, other.final_point, "{algorithm} ignores its seed");
        }
    }
}

#[test]
fn single_inner_step_with_unit_metric_is_the_template_step() {
    let obj = dense_problem(Loss::Logistic, 60, 7, 4);
    let region = l1_region(7, 1.5);
    for (template, adaptive) in [
        (Algorithm::Sfw, Algorithm::Adasfw),
        (Algorithm::Svrf, Algorithm::Adasvrf),
        (Algorithm::Csfw, Algorithm::Adacsfw),
    ] {
        let base = OptimizerConfig {
            gamma: Some(GammaSchedule::Harmonic),
            batch: Some(BatchSchedule::Constant { size: 6 }),
            budget: Budget::Iterations { count: 60 },
            record_iterates: true,
            seed: 5,
            ..OptimizerConfig::new(template)
        };
        let plain = run(&obj, &region, &base).unwrap();
        let ada = run(
            &obj,
            &region,
            &OptimizerConfig {
                algorithm: adaptive,
                inner_steps: 1,
                eta: EtaSchedule::Constant { value: 1e12 },
                clip: Some(ClipBounds { lower: 1.0, upper: 1.0 }),
                ..base.clone()
            },
        )
        .unwrap();
        assert_eq!(plain.iterates.len(), 61);
        assert_eq!(plain.iterates, ada.iterates, "{template} vs {adaptive}");
    }
}

#[test]
fn zero_gradient_keeps_start_point() {
    let rows = vec![vec![0.0; 4]; 10];
    let obj = FiniteSumObjective::new(Loss::SquaredError, Dataset::dense(rows, vec![0.0; 10]).unwrap()).unwrap();
    let region = l1_region(4, 1.0);
    let x0 = vec![0.3, -0.2, 0.1, 0.0];
    for algorithm in [
        Algorithm::Adasfw,
        Algorithm::Adasvrf,
        Algorithm::Adacsfw,
        Algorithm::Adamsfw,
    ] {
        let config = OptimizerConfig {
            x0: Some(x0.clone()),
            inner_steps: 7,
            budget: Budget::Iterations { count: 20 },
            ..OptimizerConfig::new(algorithm)
        };
        let trace = run(&obj, &region, &config).unwrap();
        assert_eq!(trace.final_point, x0, "{algorithm}");
    }
}

/// `argmin_{‖v‖₁ ≤ r} ⟨g, v⟩`, lowest index on ties.
fn l1_vertex(g: &[f64], radius: f64) -> Vec<f64> {
    let mut j = 0;
    for i in 1..g.len() {
        if g[i].abs() > g[j].abs() {
            j = i;
        }
    }
    let mut v = vec![0.0; g.len()];
    v[j] = if g[j] < 0.0 { radius } else { -radius };
    v
}

#[test]
fn first_adamsfw_step_matches_closed_form() {
    let obj = dense_problem(Loss::Logistic, 30, 5, 6);
    let radius = 1.0;
    let region = l1_region(5, radius);
    let x0 = vec![0.1, -0.2, 0.0, 0.3, 0.1];
    let (beta_m, beta_s, delta, eta) = (0.9, 0.99, 1e-8, 0.05);
    let config = OptimizerConfig {
        x0: Some(x0.clone()),
        inner_steps: 1,
        eta: EtaSchedule::Constant { value: eta },
        beta_m,
        beta_s,
        delta,
        batch: Some(BatchSchedule::Full),
        budget: Budget::Iterations { count: 1 },
        ..OptimizerConfig::new(Algorithm::Adamsfw)
    };
    let trace = run_adamsfw(&obj, &region, &config).unwrap();
    let g = obj.full_gradient(&x0).unwrap();
    let m1: Vec<f64> = g.iter().map(|v| (1.0 - beta_m) * v).collect();
    let h: Vec<f64> = g.iter().map(|v| delta + ((1.0 - beta_s) * v * v).sqrt()).collect();
    let v = l1_vertex(&m1, radius);
    let d: Vec<f64> = x0.iter().zip(&v).map(|(a, b)| a - b).collect();
    let gamma = (eta * dot(&m1, &d) / weighted_sq(&x0, &v, &h)).clamp(0.0, 1.0);
    let expected: Vec<f64> = x0.iter().zip(&v).map(|(a, b)| a + gamma * (b - a)).collect();
    for (a, b) in trace.final_point.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-14, "{:?} vs {expected:?}", trace.final_point);
    }
}

fn adagrad_first_step(region: &FeasibleRegion, eta: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let obj = dense_problem(Loss::Logistic, 40, 6, 7);
    let config = OptimizerConfig {
        eta: EtaSchedule::Constant { value: eta },
        batch: Some(BatchSchedule::Full),
        budget: Budget::Iterations { count: 1 },
        ..OptimizerConfig::new(Algorithm::Adagrad)
    };
    let x1 = run_projected_adagrad(&obj, region, &config).unwrap().final_point;
    let g = obj.full_gradient(&[0.0; 6]).unwrap();
    let h: Vec<f64> = g.iter().map(|v| config.delta + v.abs()).collect();
    (x1, g, h)
}

#[test]
fn projected_adagrad_first_step() {
    let eta = 0.3;
    // radius too large to matter: x₁ = −η g / (δ + |g|)
    let (x1, g, h) = adagrad_first_step(&l1_region(6, 1e6), eta);
    for i in 0..6 {
        let want = -eta * g[i] / h[i];
        assert!((x1[i] - want).abs() <= 1e-15 * want.abs().max(1.0));
    }
    // boxes clamp coordinatewise
    let (x1, g, h) = adagrad_first_step(&FeasibleRegion::linf_ball(6, 0.1).unwrap(), eta);
    for i in 0..6 {
        assert_eq!(x1[i], (-eta * g[i] / h[i]).clamp(-0.1, 0.1));
    }
    // ℓ1-balls: minimizer of the metric distance
    let radius = 0.2;
    let (x1, g, h) = adagrad_first_step(&l1_region(6, radius), eta);
    let z: Vec<f64> = (0..6).map(|i| -eta * g[i] / h[i]).collect();
    let oracle = weighted_l1_oracle(&z, &h, radius, 200_000);
    assert!(norm1(&x1) <= radius * (1.0 + 1e-9));
    assert!(weighted_sq(&x1, &z, &h) <= weighted_sq(&oracle, &z, &h) + 1e-9);
}

#[test]
fn gradient_evaluations_match_recount() {
    let (m, b, seed) = (30, 4, 17);
    let obj = dense_problem(Loss::SquaredHinge, m, 5, 8);
    let region = l1_region(5, 1.0);
    for algorithm in Algorithm::ALL {
        let config = every_iteration(OptimizerConfig {
            batch: Some(BatchSchedule::Constant { size: b }),
            budget: Budget::Iterations { count: 70 },
            seed,
            ..OptimizerConfig::new(algorithm)
        });
        let trace = run(&obj, &region, &config).unwrap();
        let snapshots = config.snapshot_schedule();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut expected = 0u64;
        for (t, w) in trace.records.windows(2).enumerate() {
            let snapshot = matches!(algorithm, Algorithm::Svrf | Algorithm::Adasvrf | Algorithm::SpiderFw)
                && snapshots.is_snapshot(t);
            let cost = if snapshot {
                m as u64
            } else {
                let batch: Vec<usize> = (0..b).map(|_| rng.random_range(0..m)).collect();
                match algorithm {
                    Algorithm::Csfw | Algorithm::Adacsfw => {
                        let mut unique = batch.clone();
                        unique.sort();
                        unique.dedup();
                        unique.len() as u64
                    }
                    Algorithm::Svrf | Algorithm::Adasvrf | Algorithm::SpiderFw => 2 * b as u64,
                    Algorithm::Orgfw if t > 0 => 2 * b as u64,
                    _ => b as u64,
                }
            };
            expected += cost;
            assert_eq!(w[1].grad_evals, expected, "{algorithm} t={t}");
            assert_eq!(w[1].batch_size, if snapshot { m } else { b }, "{algorithm} t={t}");
            assert!((w[1].epoch - expected as f64 / m as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_iterate_sampling_passes_chi_square() {
    let (len, t, draws) = (12, 9, 20_000);
    let mut counts = vec![0usize; t + 1];
    for seed in 0..draws {
        let i = sample_uniform_iterate(len, t, seed as u64).unwrap();
        assert!(i <= t);
        counts[i] += 1;
    }
    let expected = draws as f64 / (t + 1) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile with 9 degrees of freedom
    assert!(chi2 < 27.88, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn nonconvex_traces_report_best_and_sampled_gaps() {
    let obj = dense_problem(Loss::SigmoidNonconvex, 40, 5, 9);
    let region = l1_region(5, 3.0);
    let config = every_iteration(OptimizerConfig {
        budget: Budget::Iterations { count: 50 },
        batch: Some(BatchSchedule::Constant { size: 10 }),
        eta: EtaSchedule::Constant { value: 0.3 },
        ..OptimizerConfig::new(Algorithm::Adasfw)
    });
    let trace = run(&obj, &region, &config).unwrap();
    let best = trace.best_gap_so_far();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*best.last().unwrap(), trace.best_gap().unwrap());
    let gaps = trace.gaps();
    let sampled = trace.sampled_gap(50, 3).unwrap();
    assert!(gaps.contains(&sampled));
    // every recorded gap is the gap of the iterate it was recorded at
    let x = trace.final_point.clone();
    assert_eq!(duality_gap(&obj, &region, &x).unwrap(), *gaps.last().unwrap());
}
