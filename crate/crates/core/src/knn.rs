//! Undirected, unweighted k-nearest-neighbor pixel graphs.
//!
//! Each node is joined to its `k` nearest nodes in weighted feature space and
//! the edge set is symmetrized by union. Ties between equidistant candidates
//! go to the lower node index, which makes the neighbor order a strict total
//! order and the graph fully deterministic.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::features::{apply_weights, FeatureMatrix, FeatureRow, Grid, WeightVector};
use crate::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const FOREGROUND: u8 = 1;

/// Trimap pixel codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrimapCode {
    /// 0: background outside the region of interest, excluded from the graph.
    IgnoredBackground,
    /// 64
    LabeledBackground,
    /// 128
    Unlabeled,
    /// 255
    LabeledForeground,
}

impl TrimapCode {
    pub fn from_gray(value: u8) -> Option<Self> {
        match value {
            0 => Some(Self::IgnoredBackground),
            64 => Some(Self::LabeledBackground),
            128 => Some(Self::Unlabeled),
            255 => Some(Self::LabeledForeground),
            _ => None,
        }
    }

    pub fn gray(self) -> u8 {
        match self {
            Self::IgnoredBackground => 0,
            Self::LabeledBackground => 64,
            Self::Unlabeled => 128,
            Self::LabeledForeground => 255,
        }
    }

    /// Class carried by a seed pixel, if any.
    pub fn class(self) -> Option<u8> {
        match self {
            Self::LabeledBackground => Some(BACKGROUND),
            Self::LabeledForeground => Some(FOREGROUND),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    grid: Grid,
    codes: Vec<TrimapCode>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, codes: Vec<TrimapCode>) -> Result<Self> {
        if codes.len() != width * height || codes.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} label map needs {} codes, got {}",
                width * height,
                codes.len()
            )));
        }
        Ok(Self {
            grid: Grid { width, height },
            codes,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn codes(&self) -> &[TrimapCode] {
        &self.codes
    }

    pub fn count(&self, code: TrimapCode) -> usize {
        self.codes.iter().filter(|&&c| c == code).count()
    }

    /// Errors unless both background and foreground seeds are present.
    pub fn require_both_classes(&self) -> Result<()> {
        for (code, name) in [
            (TrimapCode::LabeledBackground, "background"),
            (TrimapCode::LabeledForeground, "foreground"),
        ] {
            if !self.codes.contains(&code) {
                return Err(Error::InvalidInput(format!("no labeled {name} pixels")));
            }
        }
        Ok(())
    }
}

/// k-NN graph over the non-ignored pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGraph {
    node_pixels: Vec<usize>,
    adjacency: Vec<Vec<u32>>,
    labels: Vec<Option<u8>>,
    class_count: usize,
    k: usize,
    lambda: Option<WeightVector>,
}

impl PixelGraph {
    /// Graph from explicit adjacency lists. Lists are sorted and deduplicated;
    /// asymmetric input, self-loops and out-of-range ids are rejected.
    pub fn from_adjacency(adjacency: Vec<Vec<u32>>, labels: Vec<Option<u8>>, class_count: usize) -> Result<Self> {
        let n = adjacency.len();
        if labels.len() != n {
            return Err(Error::InvalidInput(format!("{} labels for {n} nodes", labels.len())));
        }
        if class_count < 2 {
            return Err(Error::InvalidParameter("at least two classes are required".into()));
        }
        if let Some(c) = labels.iter().flatten().find(|&&c| c as usize >= class_count) {
            return Err(Error::InvalidInput(format!(
                "class {c} out of range for {class_count} classes"
            )));
        }
        let mut adjacency = adjacency;
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.iter().any(|&j| j as usize >= n || j as usize == i) {
                return Err(Error::InvalidInput(format!(
                    "node {i} has a self-loop or out-of-range neighbor"
                )));
            }
        }
        for (i, list) in adjacency.iter().enumerate() {
            for &j in list {
                if adjacency[j as usize].binary_search(&(i as u32)).is_err() {
                    return Err(Error::InvalidInput(format!("edge {i}-{j} is not symmetric")));
                }
            }
        }
        Ok(Self {
            node_pixels: (0..n).collect(),
            adjacency,
            labels,
            class_count,
            k: 0,
            lambda: None,
        })
    }

    pub(crate) fn with_metadata(
        mut self,
        node_pixels: Vec<usize>,
        k: usize,
        lambda: Option<WeightVector>,
    ) -> Result<Self> {
        if node_pixels.len() != self.adjacency.len() {
            return Err(Error::InvalidInput("node-to-pixel map has the wrong length".into()));
        }
        self.node_pixels = node_pixels;
        self.k = k;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.adjacency
    }

    pub fn label(&self, node: usize) -> Option<u8> {
        self.labels[node]
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn node_pixels(&self) -> &[usize] {
        &self.node_pixels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> Option<&WeightVector> {
        self.lambda.as_ref()
    }

    /// Undirected edges with `i < j`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .map(|&j| j as usize)
                .filter(move |&j| i < j)
                .map(move |j| (i, j))
        })
    }
}

#[inline]
fn squared_distance(a: &FeatureRow, b: &FeatureRow) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted Euclidean distance between rows `i` and `j`.
pub fn distance(fm: &FeatureMatrix, lambda: &WeightVector, i: usize, j: usize) -> f64 {
    let w = lambda.as_array();
    let (a, b) = (fm.row(i), fm.row(j));
    (0..a.len())
        .map(|d| {
            let x = w[d] * (a[d] - b[d]);
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

fn by_distance_then_index(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Indices of the `k` nearest points to `points[query]`, nearest first,
/// excluding the query itself. `scratch` is reused between calls.
pub(crate) fn nearest_neighbors(
    points: &[FeatureRow],
    query: usize,
    k: usize,
    scratch: &mut Vec<(f64, u32)>,
) -> Vec<u32> {
    scratch.clear();
    let q = &points[query];
    scratch.extend(
        points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != query)
            .map(|(j, p)| (squared_distance(q, p), j as u32)),
    );
    let k = k.min(scratch.len());
    if k == 0 {
        return Vec::new();
    }
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, by_distance_then_index);
    }
    let head = &mut scratch[..k];
    head.sort_unstable_by(by_distance_then_index);
    head.iter().map(|&(_, j)| j).collect()
}

struct NodeSet {
    node_pixels: Vec<usize>,
    labels: Vec<Option<u8>>,
    points: Vec<FeatureRow>,
}

fn collect_nodes(fm: &FeatureMatrix, labels: &LabelMap, k: usize, lambda: &WeightVector) -> Result<NodeSet> {
    if fm.len() != labels.codes().len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} label codes",
            fm.len(),
            labels.codes().len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let weighted = apply_weights(fm, lambda);
    let mut set = NodeSet {
        node_pixels: Vec::new(),
        labels: Vec::new(),
        points: Vec::new(),
    };
    for (px, &code) in labels.codes().iter().enumerate() {
        if code != TrimapCode::IgnoredBackground {
            set.node_pixels.push(px);
            set.labels.push(code.class());
            set.points.push(*weighted.row(px));
        }
    }
    let n = set.points.len();
    if k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be smaller than the node count {n}"
        )));
    }
    for class in [BACKGROUND, FOREGROUND] {
        if !set.labels.contains(&Some(class)) {
            return Err(Error::InvalidInput(
                "labeled nodes must include both background and foreground".into(),
            ));
        }
    }
    Ok(set)
}

/// Builds the k-NN graph over all non-ignored pixels of `labels`.
pub fn build_graph(fm: &FeatureMatrix, labels: &LabelMap, k: usize, lambda: &WeightVector) -> Result<PixelGraph> {
    let nodes = collect_nodes(fm, labels, k, lambda)?;
    let n = nodes.points.len();

    let knn: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| nearest_neighbors(&nodes.points, i, k, scratch))
        .collect();

    let mut adjacency: Vec<Vec<u32>> = knn.clone();
    for (i, list) in knn.iter().enumerate() {
        for &j in list {
            adjacency[j as usize].push(i as u32);
        }
    }
    adjacency.par_iter_mut().for_each(|list| {
        list.sort_unstable();
        list.dedup();
    });

    Ok(PixelGraph {
        node_pixels: nodes.node_pixels,
        adjacency,
        labels: nodes.labels,
        class_count: 2,
        k,
        lambda: Some(*lambda),
    })
}

/// `(same-class, total)` edge counts between labeled nodes of the graph
/// `build_graph(fm, labels, k, lambda)` would produce, computed from the
/// neighbor lists of labeled nodes only.
pub fn labeled_edge_counts(
    fm: &FeatureMatrix,
    labels: &LabelMap,
    k: usize,
    lambda: &WeightVector,
) -> Result<(usize, usize)> {
    let nodes = collect_nodes(fm, labels, k, lambda)?;
    let labeled: Vec<usize> = (0..nodes.points.len()).filter(|&i| nodes.labels[i].is_some()).collect();

    let mut pairs: Vec<(u32, u32)> = labeled
        .par_iter()
        .map_init(Vec::new, |scratch, &i| {
            nearest_neighbors(&nodes.points, i, k, scratch)
                .into_iter()
                .filter(|&j| nodes.labels[j as usize].is_some())
                .map(|j| {
                    let i = i as u32;
                    (i.min(j), i.max(j))
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();

    let same = pairs
        .iter()
        .filter(|&&(a, b)| nodes.labels[a as usize] == nodes.labels[b as usize])
        .count();
    Ok((same, pairs.len()))
}
