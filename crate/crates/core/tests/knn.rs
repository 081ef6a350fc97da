mod common;

use pccseg::{build_graph, normalize, FeatureMatrix, LabelMap, TrimapCode, WeightVector, FEATURE_COUNT};
use proptest::prelude::*;
use rand::Rng;

fn random_set(seed: u64, n: usize) -> (Vec<[f64; FEATURE_COUNT]>, LabelMap) {
    let mut rng = common::rng(seed);
    let rows: Vec<[f64; FEATURE_COUNT]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
        .collect();
    let codes = (0..n)
        .map(|i| match i % 7 {
            0 => TrimapCode::LabeledBackground,
            1 => TrimapCode::LabeledForeground,
            _ => TrimapCode::Unlabeled,
        })
        .collect();
    (rows, LabelMap::new(n, 1, codes).unwrap())
}

fn edges_of(fm: &FeatureMatrix, labels: &LabelMap, k: usize, lambda: &WeightVector) -> Vec<(usize, usize)> {
    build_graph(fm, labels, k, lambda).unwrap().edges().collect()
}

#[test]
fn matches_brute_force_with_weights() {
    for seed in 0..8u64 {
        let (rows, labels) = random_set(seed, 120);
        let mut rng = common::rng(seed + 100);
        let lambda: Vec<f64> = (0..FEATURE_COUNT).map(|_| rng.random_range(0.0..1.0)).collect();
        let fm = FeatureMatrix::from_rows(rows.clone());
        for k in [1, 4, 13] {
            let got = edges_of(&fm, &labels, k, &WeightVector::from_slice(&lambda).unwrap());
            assert_eq!(
                got,
                common::brute_force_knn_edges(&rows, &lambda, k),
                "seed {seed} k {k}"
            );
        }
    }
}

#[test]
fn ties_prefer_lower_index() {
    // node 0 is equidistant from 1 and 2; k = 1 must pick 1. Node 2 has a
    // closer partner (3), so no reverse edge brings 0-2 back.
    let mut rows = vec![[0.0; FEATURE_COUNT]; 4];
    rows[1][0] = 1.0;
    rows[2][0] = -1.0;
    rows[3][0] = -1.5;
    let codes = vec![
        TrimapCode::LabeledBackground,
        TrimapCode::LabeledForeground,
        TrimapCode::Unlabeled,
        TrimapCode::Unlabeled,
    ];
    let g = build_graph(
        &FeatureMatrix::from_rows(rows),
        &LabelMap::new(4, 1, codes).unwrap(),
        1,
        &WeightVector::unit(),
    )
    .unwrap();
    assert!(g.neighbors(0).contains(&1));
    assert!(!g.neighbors(0).contains(&2));
}

#[test]
fn ignored_pixels_never_become_nodes() {
    let (rows, _) = random_set(5, 30);
    let codes: Vec<TrimapCode> = (0..30)
        .map(|i| match i {
            0 => TrimapCode::LabeledBackground,
            1 => TrimapCode::LabeledForeground,
            i if i % 3 == 0 => TrimapCode::IgnoredBackground,
            _ => TrimapCode::Unlabeled,
        })
        .collect();
    let ignored = codes.iter().filter(|&&c| c == TrimapCode::IgnoredBackground).count();
    let g = build_graph(
        &FeatureMatrix::from_rows(rows),
        &LabelMap::new(30, 1, codes.clone()).unwrap(),
        3,
        &WeightVector::unit(),
    )
    .unwrap();
    assert_eq!(g.node_count(), 30 - ignored);
    assert!(g
        .node_pixels()
        .iter()
        .all(|&p| codes[p] != TrimapCode::IgnoredBackground));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symmetric_and_degree_bounded(seed in any::<u64>(), n in 8usize..60, k in 1usize..7) {
        let (rows, labels) = random_set(seed, n);
        let g = build_graph(&FeatureMatrix::from_rows(rows), &labels, k, &WeightVector::unit()).unwrap();
        for i in 0..g.node_count() {
            prop_assert!(g.neighbors(i).len() >= k);
            prop_assert!(!g.neighbors(i).contains(&(i as u32)));
            for &j in g.neighbors(i) {
                prop_assert!(g.neighbors(j as usize).contains(&(i as u32)));
            }
        }
    }

    #[test]
    fn larger_k_only_adds_edges(seed in any::<u64>(), n in 10usize..60, k in 1usize..8) {
        let (rows, labels) = random_set(seed, n);
        let fm = FeatureMatrix::from_rows(rows);
        let small = edges_of(&fm, &labels, k, &WeightVector::unit());
        let large = edges_of(&fm, &labels, k + 1, &WeightVector::unit());
        prop_assert!(small.iter().all(|e| large.binary_search(e).is_ok()));
    }

    #[test]
    fn invariant_under_uniform_scaling(seed in any::<u64>(), n in 10usize..50, k in 1usize..6, pow in 1i32..4) {
        // scaling by a power of two keeps every distance comparison exact
        let (rows, labels) = random_set(seed, n);
        let mut rng = common::rng(seed ^ 1);
        let lambda: Vec<f64> = (0..FEATURE_COUNT).map(|_| f64::from(rng.random_range(1u8..=8)) / 8.0).collect();
        let scale = 2f64.powi(-pow);
        let scaled: Vec<f64> = lambda.iter().map(|l| l * scale).collect();
        let fm = FeatureMatrix::from_rows(rows);
        let a = edges_of(&fm, &labels, k, &WeightVector::from_slice(&lambda).unwrap());
        let b = edges_of(&fm, &labels, k, &WeightVector::from_slice(&scaled).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fast_labeled_counts_agree(seed in any::<u64>(), n in 10usize..60, k in 1usize..9) {
        let (rows, labels) = random_set(seed, n);
        let fm = normalize(&FeatureMatrix::from_rows(rows));
        let g = build_graph(&fm, &labels, k, &WeightVector::unit()).unwrap();
        let fast = pccseg::knn::labeled_edge_counts(&fm, &labels, k, &WeightVector::unit()).unwrap();
        prop_assert_eq!(fast, pccseg::count_labeled_edges(&g));
    }
}
