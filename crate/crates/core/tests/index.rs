mod common;

use std::path::PathBuf;

use pccseg::graph_io::{load_graph, read_binary, write_binary};
use pccseg::index::baseline_phi;
use pccseg::{compute_alpha, compute_phi, compute_sigma, count_labeled_edges, IndexReport, WeightVector};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn fig1a_fixture() {
    let g = load_graph(&fixture("fig1a.edges")).unwrap();
    assert_eq!(g.node_count(), 27);
    assert_eq!(g.labels().iter().flatten().filter(|&&c| c == 0).count(), 8);
    assert_eq!(g.labels().iter().flatten().filter(|&&c| c == 1).count(), 8);
    assert_eq!(count_labeled_edges(&g), (15, 20));
    let r = IndexReport::for_graph(&g, 0.75).unwrap();
    assert_eq!(r.phi, 0.75);
    assert!((r.sigma - 2.4094).abs() < 5e-5);
    assert!((r.alpha - 0.5).abs() < 1e-6);
}

#[test]
fn fig1b_fixture_with_fig1a_sigma() {
    let a = load_graph(&fixture("fig1a.edges")).unwrap();
    let b = load_graph(&fixture("fig1b.edges")).unwrap();
    let (s, t) = count_labeled_edges(&a);
    assert_eq!(count_labeled_edges(&b), (16, 17));
    let r = IndexReport::for_graph(&b, compute_phi(s, t)).unwrap();
    assert!((r.alpha - 0.8641).abs() < 5e-4, "{}", r.alpha);
}

#[test]
fn binary_round_trip_keeps_counts() {
    let g = load_graph(&fixture("fig1b.edges")).unwrap();
    let mut bytes = Vec::new();
    write_binary(&g, &mut bytes).unwrap();
    let back = read_binary(bytes.as_slice()).unwrap();
    assert_eq!(count_labeled_edges(&back), (16, 17));
    assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
}

#[test]
fn unit_weights_score_one_half() {
    let (fm, labels) = common::separable_features(4, 150, 3, 12);
    let k = 6;
    let phi0 = baseline_phi(&fm, &labels, k).unwrap();
    let g = pccseg::build_graph(&fm, &labels, k, &WeightVector::unit()).unwrap();
    let r = IndexReport::for_graph(&g, phi0).unwrap();
    assert!(
        phi0 > 0.0 && phi0 < 1.0,
        "fixture must not be trivially separated: {phi0}"
    );
    assert!((r.alpha - 0.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn alpha_in_unit_interval_and_monotone(
        phi0 in 1e-6f64..0.999,
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let sigma = compute_sigma(phi0).unwrap();
        prop_assert!(sigma > 0.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (alo, ahi) = (compute_alpha(lo, sigma), compute_alpha(hi, sigma));
        prop_assert!((0.0..=1.0).contains(&alo) && (0.0..=1.0).contains(&ahi));
        prop_assert!(alo <= ahi);
        prop_assert!((compute_alpha(phi0, sigma) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn phi_is_a_fraction(same in 0usize..1000, extra in 0usize..1000) {
        let phi = compute_phi(same, same + extra);
        prop_assert!((0.0..=1.0).contains(&phi));
    }
}
