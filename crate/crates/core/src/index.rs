//! Class-separability index of a candidate graph.
//!
//! `phi` is the share of labeled-to-labeled edges that join nodes of the same
//! class. Because `phi` sits close to 1 for most graphs, it is stretched into
//! `alpha = phi^sigma`, with `sigma = ln 0.5 / ln Phi` chosen so the graph
//! built from unweighted features (`phi = Phi`) scores exactly 0.5.

use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, WeightVector};
use crate::knn::{labeled_edge_counts, LabelMap, PixelGraph};
use crate::{Error, Result};

/// Lower clamp applied to the baseline before taking its logarithm.
pub const MIN_BASELINE_PHI: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub z_same: usize,
    pub z_total: usize,
    pub phi: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub baseline_phi: f64,
    /// The baseline graph had no cross-class labeled edges, so `sigma` fell
    /// back to 1.
    pub baseline_separated: bool,
}

impl IndexReport {
    pub fn new(z_same: usize, z_total: usize, baseline_phi: f64) -> Result<Self> {
        let phi = compute_phi(z_same, z_total);
        let sigma = compute_sigma(baseline_phi)?;
        Ok(Self {
            z_same,
            z_total,
            phi,
            sigma,
            alpha: compute_alpha(phi, sigma),
            baseline_phi,
            baseline_separated: baseline_phi >= 1.0,
        })
    }

    pub fn for_graph(graph: &PixelGraph, baseline_phi: f64) -> Result<Self> {
        let (same, total) = count_labeled_edges(graph);
        Self::new(same, total, baseline_phi)
    }

    /// Aligned `key value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "z_same              {}\n\
             z_total             {}\n\
             phi                 {:.6}\n\
             sigma               {:.6}\n\
             alpha               {:.6}\n\
             baseline_phi        {:.6}\n\
             baseline_separated  {}\n",
            self.z_same, self.z_total, self.phi, self.sigma, self.alpha, self.baseline_phi, self.baseline_separated
        )
    }
}

/// `(z_same, z_total)`: undirected edges whose endpoints are both labeled,
/// and the subset joining equal classes.
pub fn count_labeled_edges(graph: &PixelGraph) -> (usize, usize) {
    let mut same = 0;
    let mut total = 0;
    for (i, j) in graph.edges() {
        if let (Some(a), Some(b)) = (graph.label(i), graph.label(j)) {
            total += 1;
            if a == b {
                same += 1;
            }
        }
    }
    (same, total)
}

/// `z_same / z_total`, or 1 when there are no labeled-to-labeled edges.
pub fn compute_phi(z_same: usize, z_total: usize) -> f64 {
    if z_total == 0 {
        1.0
    } else {
        z_same as f64 / z_total as f64
    }
}

/// `ln 0.5 / ln baseline`. A perfectly separated baseline gives 1.
pub fn compute_sigma(baseline_phi: f64) -> Result<f64> {
    if baseline_phi.is_nan() || baseline_phi <= 0.0 || baseline_phi > 1.0 {
        return Err(Error::InvalidInput(format!(
            "baseline phi must be in (0, 1], got {baseline_phi}"
        )));
    }
    if baseline_phi == 1.0 {
        return Ok(1.0);
    }
    Ok(0.5f64.ln() / baseline_phi.max(MIN_BASELINE_PHI).ln())
}

pub fn compute_alpha(phi: f64, sigma: f64) -> f64 {
    phi.powf(sigma)
}

/// `Phi` of the unweighted graph.
pub fn baseline_phi(fm: &FeatureMatrix, labels: &LabelMap, k: usize) -> Result<f64> {
    let (same, total) = labeled_edge_counts(fm, labels, k, &WeightVector::unit())?;
    Ok(compute_phi(same, total))
}
