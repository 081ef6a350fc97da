#![allow(dead_code)]

use pccseg::{FeatureMatrix, LabelMap, PixelGraph, RgbImage, TrimapCode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthetic two-region scene: a centered foreground square on background,
/// Gaussian noise per channel, and a fraction of each region given as seeds.
pub struct TwoRegion {
    pub image: RgbImage,
    pub trimap: LabelMap,
    /// True class per pixel.
    pub truth: Vec<u8>,
}

pub fn two_region(seed: u64, size: usize, separation: f64, noise: f64, seed_fraction: f64) -> TwoRegion {
    let mut rng = rng(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let bg_mean = [90.0, 100.0, 110.0];
    let fg_mean = bg_mean.map(|m| m + separation);
    let lo = size / 4;
    let hi = size - size / 4;
    let truth: Vec<u8> = (0..size * size)
        .map(|p| {
            let (x, y) = (p % size, p / size);
            u8::from((lo..hi).contains(&x) && (lo..hi).contains(&y))
        })
        .collect();
    let pixels = truth
        .iter()
        .map(|&t| {
            let mean = if t == 1 { fg_mean } else { bg_mean };
            mean.map(|m| (m + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        })
        .collect();
    let image = RgbImage::new(size, size, pixels).unwrap();
    let mut codes = vec![TrimapCode::Unlabeled; size * size];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..truth.len()).filter(|&p| truth[p] == class).collect();
        members.shuffle(&mut rng);
        let n = ((members.len() as f64 * seed_fraction).round() as usize).max(1);
        for &p in &members[..n] {
            codes[p] = if class == 0 {
                TrimapCode::LabeledBackground
            } else {
                TrimapCode::LabeledForeground
            };
        }
    }
    let trimap = LabelMap::new(size, size, codes).unwrap();
    TwoRegion { image, trimap, truth }
}

/// Random connected-ish graph: a ring plus random chords, with `labeled`
/// nodes per class.
pub fn random_graph(rng: &mut impl Rng, n: usize, classes: usize, extra_edges: usize, labeled: usize) -> PixelGraph {
    let mut adj = vec![Vec::new(); n];
    let add = |a: usize, b: usize, adj: &mut Vec<Vec<u32>>| {
        if a != b {
            adj[a].push(b as u32);
            adj[b].push(a as u32);
        }
    };
    for i in 0..n {
        add(i, (i + 1) % n, &mut adj);
    }
    for _ in 0..extra_edges {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        add(a, b, &mut adj);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![None; n];
    for (i, &node) in order.iter().take(labeled * classes).enumerate() {
        labels[node] = Some((i % classes) as u8);
    }
    PixelGraph::from_adjacency(adj, labels, classes).unwrap()
}

/// Feature rows with column `signal` separating the two classes and every
/// other column uniform noise. Returns the matrix and a 1-row label map
/// with `per_class` seeds per class.
pub fn separable_features(seed: u64, n: usize, signal: usize, per_class: usize) -> (FeatureMatrix, LabelMap) {
    let mut rng = rng(seed);
    let class: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let rows = class
        .iter()
        .map(|&c| {
            let mut row = [0.0; pccseg::FEATURE_COUNT];
            for (f, v) in row.iter_mut().enumerate() {
                *v = if f == signal {
                    f64::from(c) + rng.random_range(-0.05..0.05)
                } else {
                    rng.random_range(0.0..1.0)
                };
            }
            row
        })
        .collect();
    let codes = (0..n)
        .map(|i| match (i < 2 * per_class, class[i]) {
            (true, 0) => TrimapCode::LabeledBackground,
            (true, _) => TrimapCode::LabeledForeground,
            _ => TrimapCode::Unlabeled,
        })
        .collect();
    (
        pccseg::normalize(&FeatureMatrix::from_rows(rows)),
        LabelMap::new(n, 1, codes).unwrap(),
    )
}

/// Fraction of unlabeled pixels whose predicted class matches the truth.
pub fn unlabeled_accuracy(labels: &[u8], trimap: &LabelMap, truth: &[u8]) -> f64 {
    let mut total = 0;
    let mut right = 0;
    for ((&l, &code), &t) in labels.iter().zip(trimap.codes()).zip(truth) {
        if code == TrimapCode::Unlabeled {
            total += 1;
            right += usize::from(l == t);
        }
    }
    right as f64 / total as f64
}

/// Edge set of the symmetrized k-NN graph by sorting every pairwise distance.
pub fn brute_force_knn_edges(rows: &[[f64; pccseg::FEATURE_COUNT]], lambda: &[f64], k: usize) -> Vec<(usize, usize)> {
    let n = rows.len();
    let mut edges = Vec::new();
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = (0..lambda.len())
                    .map(|f| {
                        let x = lambda[f] * rows[i][f] - lambda[f] * rows[j][f];
                        x * x
                    })
                    .sum();
                (d, j)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in &all[..k] {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}
