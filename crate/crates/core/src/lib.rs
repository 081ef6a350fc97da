//! Interactive image segmentation with particle competition and cooperation.
//!
//! The pipeline turns every pixel into a node of an unweighted k-nearest-neighbor
//! graph built from 23 normalized (and optionally weighted) pixel features. Labeled
//! pixels spawn particles that compete for the unlabeled nodes; nodes that end up
//! strongly dominated are labeled directly, the rest are resolved by a short
//! neighborhood-averaging pass over the pixel grid.
//!
//! The feature weights can be searched with a genetic algorithm that maximizes a
//! class-separability index computed on the labeled part of the candidate graph.

pub mod cli;
pub mod dataset;
mod error;
pub mod eval;
pub mod features;
pub mod graph_io;
pub mod index;
pub mod knn;
pub mod optimizer;
pub mod pcc;
pub mod server;

pub use error::{Error, Result};
pub use eval::{error_rate, EvalReport, GroundTruth};
pub use features::{
    apply_weights, extract_features, normalize, FeatureMatrix, RgbImage, WeightVector, FEATURE_COUNT, FEATURE_NAMES,
};
pub use index::{compute_alpha, compute_phi, compute_sigma, count_labeled_edges, IndexReport};
pub use knn::{build_graph, distance, LabelMap, PixelGraph, TrimapCode};
pub use optimizer::{optimize, GaConfig, OptimizationTrace};
pub use pcc::{segment, PccParams, PccState, SegmentationResult};
