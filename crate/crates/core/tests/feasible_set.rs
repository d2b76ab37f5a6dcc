mod common;

use adafw::adaptive_metric::{clip_metric, AdaGradAccumulator, DiagonalMetric};
use adafw::feasible_set::{metric_projection_l1, Norm};
use adafw::{FeasibleRegion, RegionKind};
use common::*;
use proptest::prelude::*;

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn vertices(region: &FeasibleRegion) -> Vec<Vec<f64>> {
    let n = region.dim();
    let c = region.center();
    let r = region.radius();
    match region.kind() {
        RegionKind::L1Ball => (0..2 * n)
            .map(|k| {
                let mut v = c.to_vec();
                v[k / 2] += if k % 2 == 0 { r } else { -r };
                v
            })
            .collect(),
        RegionKind::LinfBall => (0..1usize << n)
            .map(|mask| (0..n).map(|j| c[j] + if mask >> j & 1 == 1 { r } else { -r }).collect())
            .collect(),
    }
}

proptest! {
    #[test]
    fn lmo_attains_the_minimum_over_vertices(
        (g, c) in (1usize..7).prop_flat_map(|n| (vector(n), vector(n))),
        radius in 0.1..4.0f64,
        linf in any::<bool>(),
    ) {
        let kind = if linf { RegionKind::LinfBall } else { RegionKind::L1Ball };
        let region = FeasibleRegion::new(kind, c, radius).unwrap();
        let s = region.lmo(&g).unwrap();
        prop_assert!(region.contains(&s, 1e-9).unwrap());
        let best = vertices(&region).iter().map(|v| dot(&g, v)).fold(f64::INFINITY, f64::min);
        prop_assert!(dot(&g, &s) <= best + 1e-12 * (1.0 + best.abs()));
    }

    #[test]
    fn weighted_projection_beats_feasible_competitors(
        (z, h) in (1usize..7).prop_flat_map(|n| (vector(n), prop::collection::vec(0.1..10.0f64, n))),
        radius in 0.1..4.0f64,
        seed in any::<u64>(),
    ) {
        let y = metric_projection_l1(&z, &h, radius).unwrap();
        prop_assert!(norm1(&y) <= radius * (1.0 + 1e-9));
        let value = weighted_sq(&y, &z, &h);
        let mut r = rng(seed);
        for _ in 0..50 {
            let w = point_in_l1_ball(&mut r, z.len(), radius);
            prop_assert!(value <= weighted_sq(&w, &z, &h) + 1e-9);
        }
        if norm1(&z) <= radius {
            prop_assert_eq!(y, z);
        }
    }

    #[test]
    fn identity_metric_projection_is_euclidean(z in (1usize..9).prop_flat_map(vector), radius in 0.1..4.0f64) {
        let y = metric_projection_l1(&z, &vec![1.0; z.len()], radius).unwrap();
        let reference = euclidean_l1_projection(&z, radius);
        prop_assert!(dist2(&y, &reference) <= 1e-12 * (1.0 + norm2(&z)));
    }

    #[test]
    fn accumulated_metric_is_monotone_and_clipping_stays_in_range(
        grads in prop::collection::vec(vector(4), 1..20),
        lo in 0.01..1.0f64,
        span in 1.0..100.0f64,
    ) {
        let mut acc = AdaGradAccumulator::new(4, 1e-8).unwrap();
        let mut prev = vec![0.0; 4];
        for g in &grads {
            let h = acc.update(g).unwrap();
            for j in 0..4 {
                prop_assert!(h.entries()[j] >= prev[j]);
            }
            let clipped = clip_metric(&h, lo, lo * span).unwrap();
            prop_assert!(clipped.min() >= lo && clipped.max() <= lo * span);
            prev = h.into_inner();
        }
    }
}

#[test]
fn diameters_of_unit_balls() {
    let l1 = l1_region(4, 1.0);
    assert_eq!(l1.diameter(Norm::L1), 2.0);
    assert_eq!(l1.diameter(Norm::L2), 2.0);
    let linf = FeasibleRegion::linf_ball(4, 1.0).unwrap();
    assert_eq!(linf.diameter(Norm::Linf), 2.0);
    assert_eq!(linf.diameter(Norm::L1), 8.0);
    assert!(DiagonalMetric::new(vec![1.0, 0.0]).is_err());
}
