#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use otalign::{
    align, cosine_cost, mean_pairwise_cost, project_full, project_topk, sinkhorn, CouplingPlan,
    EmbeddingSequence, PairingMode, ProjectionConfig, ProjectionMode, SinkhornConfig, TargetPool,
};
use proptest::prelude::*;

fn topk(k: usize) -> ProjectionConfig {
    ProjectionConfig {
        k,
        mode: ProjectionMode::TopK,
    }
}

fn solved_plan(
    rng: &mut SeededRng,
    m: usize,
    n: usize,
    d: usize,
) -> (CouplingPlan, EmbeddingSequence) {
    let x = random_sequence(rng, m, d);
    let y = random_sequence(rng, n, d);
    let plan = sinkhorn(&cosine_cost(&x, &y).unwrap(), &SinkhornConfig::default()).unwrap();
    (plan, y)
}

fn max_abs_diff(a: &EmbeddingSequence, b: &EmbeddingSequence) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn k_at_least_n_is_the_full_map(seed in any::<u64>(), m in 1usize..8, n in 1usize..8, extra in 0usize..3) {
        let mut rng = SeededRng::new(seed);
        let (plan, y) = solved_plan(&mut rng, m, n, 4);
        let a = project_topk(&plan, &y, &topk(n + extra)).unwrap();
        let b = project_full(&plan, &y).unwrap();
        prop_assert!(max_abs_diff(&a.transported, &b.transported) <= 1e-9);
    }

    #[test]
    fn weights_and_hull(seed in any::<u64>(), m in 1usize..10, n in 1usize..12, k in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let (plan, y) = solved_plan(&mut rng, m, n, 5);
        let r = project_topk(&plan, &y, &topk(k)).unwrap();
        prop_assert_eq!(r.transported.len(), m);
        prop_assert_eq!(r.transported.dim(), 5);
        for (i, sup) in r.support.iter().enumerate() {
            prop_assert_eq!(sup.len(), k.min(n));
            let total: f64 = sup.iter().map(|s| s.1).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(sup.iter().all(|s| s.1 >= 0.0));
            prop_assert!(sup.windows(2).all(|w| w[0].1 >= w[1].1));
            let idx: Vec<usize> = sup.iter().map(|s| s.0).collect();
            let (lo, hi) = hull_bounds(&y, &idx);
            for (c, v) in r.transported.frame(i).iter().enumerate() {
                prop_assert!(*v >= lo[c] - 1e-12 && *v <= hi[c] + 1e-12);
            }
        }
    }

    #[test]
    fn reordering_targets_changes_nothing(seed in any::<u64>(), m in 2usize..8, n in 2usize..10, k in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let x = random_sequence(&mut rng, m, 4);
        let y = random_sequence(&mut rng, n, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.int(0, i));
        }
        let frames: Vec<&[f64]> = perm.iter().map(|&j| y.frame(j)).collect();
        let y_perm = EmbeddingSequence::from_frames(frames, "perm").unwrap();
        let cfg = SinkhornConfig::default();
        let a = align(&x, &TargetPool::from_sequence(y), &cfg, &topk(k)).unwrap();
        let b = align(&x, &TargetPool::from_sequence(y_perm), &cfg, &topk(k)).unwrap();
        prop_assert!(max_abs_diff(&a.transported, &b.transported) <= 1e-9);
    }
}

#[test]
fn two_by_five_top_three_matches_sorted_oracle() {
    let mut rng = SeededRng::new(235);
    let raw: Vec<f64> = (0..10).map(|_| rng.uniform()).collect();
    let total: f64 = raw.iter().sum();
    let gamma: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let plan = CouplingPlan::from_matrix(2, 5, gamma.clone()).unwrap();
    let y = random_sequence(&mut rng, 5, 3);
    let got = project_topk(&plan, &y, &topk(3)).unwrap();
    let want = sort_select_project(&gamma, 2, 5, &y, 3);
    for i in 0..2 {
        for d in 0..3 {
            assert!((got.transported.frame(i)[d] - want[i][d]).abs() <= 1e-12);
        }
    }
}

#[test]
fn full_map_on_three_by_four_matches_direct_sum() {
    let mut rng = SeededRng::new(34);
    let (plan, y) = solved_plan(&mut rng, 3, 4, 6);
    let got = project_full(&plan, &y).unwrap();
    let want = naive_full_project(plan.as_slice(), 3, 4, &y);
    for i in 0..3 {
        for d in 0..6 {
            assert!((got.transported.frame(i)[d] - want[i][d]).abs() <= 1e-12);
        }
    }
}

#[test]
fn self_transport_is_near_identity() {
    let cfg = SinkhornConfig {
        epsilon: 0.005,
        max_iters: 100_000,
        tolerance: 1e-6,
    };
    let mut rng = SeededRng::new(6);
    for n in 1..=6 {
        for _ in 0..5 {
            let x = random_sequence(&mut rng, n, 8);
            let pool = TargetPool::from_sequence(x.clone());
            let r = align(&x, &pool, &cfg, &ProjectionConfig::default()).unwrap();
            let cost = mean_pairwise_cost(&r.transported, &x, PairingMode::Framewise).unwrap();
            assert!(cost < 0.05, "n={n}: {cost}");
        }
    }
}

#[test]
fn separated_clusters_move_toward_target() {
    let mut rng = SeededRng::new(12);
    let mut cluster = |center: &[f64], count: usize| {
        let frames: Vec<Vec<f64>> = (0..count)
            .map(|_| center.iter().map(|c| c + 0.1 * rng.normal()).collect())
            .collect();
        EmbeddingSequence::from_frames(&frames, "c").unwrap()
    };
    let x = cluster(&[1.0, 0.0, 0.0], 30);
    let y = cluster(&[0.0, 1.0, 0.0], 50);
    let before = mean_pairwise_cost(&x, &y, PairingMode::Nearest).unwrap();
    let r = align(
        &x,
        &TargetPool::from_sequence(y.clone()),
        &SinkhornConfig::default(),
        &ProjectionConfig::default(),
    )
    .unwrap();
    let after = mean_pairwise_cost(&r.transported, &y, PairingMode::Nearest).unwrap();
    assert!(after < before, "{after} >= {before}");
    assert!(r.diagnostics.converged());
}
