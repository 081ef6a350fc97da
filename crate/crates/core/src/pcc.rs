//! Particle competition and cooperation.
//!
//! One particle is spawned per labeled node. Particles of a class form a team
//! sharing a table of hop-distance estimates to the team's labeled nodes.
//! Each step a particle picks a neighbor by mixing a uniform choice with a
//! greedy choice toward nodes its team dominates and that lie close to its
//! team's seeds. Visiting an unlabeled node shifts domination toward the
//! particle's class in proportion to its strength; the strength then mirrors
//! the class's post-visit domination level. A particle whose class is not the
//! strict maximum on the visited node is pushed back to where it came from.
//!
//! Once the mean maximum domination stabilizes, nodes with a domination level
//! above the threshold are labeled. Any remaining pixels are resolved on the
//! image grid by repeated similarity-weighted averaging over their 8-neighbors.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{apply_weights, extract_features, normalize, FeatureMatrix, Grid, RgbImage, WeightVector};
use crate::index::{baseline_phi, IndexReport};
use crate::knn::{build_graph, LabelMap, PixelGraph, TrimapCode, BACKGROUND};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Phase2Weighting {
    /// Neighbor weight `1 / (1 + dist)`, normalized over the neighborhood.
    #[default]
    Similarity,
    /// `(1/a) * sum(v_j * dist)`, the averaging rule taken literally.
    LiteralDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PccParams {
    pub delta_v: f64,
    pub stop_threshold: f64,
    pub check_interval: usize,
    pub stabilization_window: usize,
    pub stabilization_epsilon: f64,
    pub max_rounds: usize,
    pub phase2_epsilon: f64,
    pub phase2_max_sweeps: usize,
    pub phase2_weighting: Phase2Weighting,
    pub rng_seed: u64,
}

impl Default for PccParams {
    fn default() -> Self {
        Self {
            delta_v: 0.1,
            stop_threshold: 0.9,
            check_interval: 100,
            stabilization_window: 10,
            stabilization_epsilon: 1e-3,
            max_rounds: 20_000,
            phase2_epsilon: 1e-4,
            phase2_max_sweeps: 1000,
            phase2_weighting: Phase2Weighting::Similarity,
            rng_seed: 0,
        }
    }
}

impl PccParams {
    pub fn validate(&self, classes: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("PCC parameter {what}")));
        if !(self.delta_v > 0.0 && self.delta_v <= 1.0) {
            return bad("delta_v must be in (0, 1]");
        }
        if !(self.stop_threshold > 1.0 / classes as f64 && self.stop_threshold <= 1.0) {
            return bad("stop_threshold must be in (1/C, 1]");
        }
        if self.check_interval == 0 || self.stabilization_window == 0 {
            return bad("check_interval and stabilization_window must be positive");
        }
        if !(self.stabilization_epsilon > 0.0 && self.phase2_epsilon > 0.0) {
            return bad("epsilons must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub class: u8,
    pub home: usize,
    pub current: usize,
    pub previous: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Phase1,
    Phase2,
}

/// Snapshot emitted at every stop-criterion check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Progress {
    pub stage: Stage,
    pub round: usize,
    pub mean_max_domination: f64,
    pub fraction_finalized: f64,
}

pub trait Observer {
    fn on_progress(&mut self, _progress: &Progress) {}

    /// Polled once per round.
    fn should_cancel(&self) -> bool {
        false
    }
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

impl<F: FnMut(&Progress)> Observer for F {
    fn on_progress(&mut self, progress: &Progress) {
        self(progress)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// Node chosen by the walk, `None` when the current node is isolated.
    pub target: Option<usize>,
    pub expelled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase1Stop {
    Stabilized,
    MaxRounds,
    NothingToLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Outcome {
    pub rounds: usize,
    pub stop: Phase1Stop,
    /// Mean maximum domination over unlabeled nodes at each check.
    pub checks: Vec<f64>,
    /// Per-node class after finalization; `None` goes to the second phase.
    pub finalized: Vec<Option<u8>>,
}

/// Mutable PCC state over a borrowed graph.
#[derive(Debug, Clone)]
pub struct PccState<'g> {
    graph: &'g PixelGraph,
    classes: usize,
    delta_v: f64,
    // node-major, `classes` entries per node
    domination: Vec<f64>,
    // class-major, `node_count` entries per class
    distances: Vec<u32>,
    particles: Vec<Particle>,
    unlabeled: Vec<usize>,
    greedy: Vec<f64>,
}

impl<'g> PccState<'g> {
    pub fn init(graph: &'g PixelGraph) -> Result<Self> {
        let n = graph.node_count();
        let classes = graph.class_count();
        for c in 0..classes as u8 {
            if !graph.labels().contains(&Some(c)) {
                return Err(Error::InvalidInput(format!("class {c} has no labeled node")));
            }
        }
        let mut domination = vec![1.0 / classes as f64; n * classes];
        let max_distance = n.saturating_sub(1) as u32;
        let mut distances = vec![max_distance; n * classes];
        let mut particles = Vec::new();
        let mut unlabeled = Vec::new();
        for (i, label) in graph.labels().iter().enumerate() {
            match *label {
                Some(c) => {
                    let row = &mut domination[i * classes..(i + 1) * classes];
                    row.fill(0.0);
                    row[c as usize] = 1.0;
                    distances[c as usize * n + i] = 0;
                    particles.push(Particle {
                        class: c,
                        home: i,
                        current: i,
                        previous: i,
                        strength: 1.0,
                    });
                }
                None => unlabeled.push(i),
            }
        }
        Ok(Self {
            graph,
            classes,
            delta_v: 0.1,
            domination,
            distances,
            particles,
            unlabeled,
            greedy: Vec::new(),
        })
    }

    pub fn graph(&self) -> &'g PixelGraph {
        self.graph
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn set_delta_v(&mut self, delta_v: f64) {
        self.delta_v = delta_v;
    }

    pub fn domination(&self, node: usize) -> &[f64] {
        &self.domination[node * self.classes..(node + 1) * self.classes]
    }

    /// Test hook: overwrite the domination vector of an unlabeled node.
    pub fn set_domination(&mut self, node: usize, values: &[f64]) -> Result<()> {
        if self.graph.label(node).is_some() {
            return Err(Error::InvalidInput(format!("node {node} is labeled")));
        }
        if values.len() != self.classes {
            return Err(Error::InvalidInput("domination vector has the wrong length".into()));
        }
        self.domination[node * self.classes..(node + 1) * self.classes].copy_from_slice(values);
        Ok(())
    }

    pub fn distance(&self, class: u8, node: usize) -> u32 {
        self.distances[class as usize * self.graph.node_count() + node]
    }

    /// Test hook: overwrite a team distance entry.
    pub fn set_distance(&mut self, class: u8, node: usize, value: u32) {
        let n = self.graph.node_count();
        self.distances[class as usize * n + node] = value;
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particle_mut(&mut self, index: usize) -> &mut Particle {
        &mut self.particles[index]
    }

    /// Probability of each neighbor of the particle's current node, in the
    /// order of `graph.neighbors(current)`.
    pub fn transition_probabilities(&self, particle: usize) -> Vec<f64> {
        let p = &self.particles[particle];
        let neighbors = self.graph.neighbors(p.current);
        let greedy: Vec<f64> = neighbors
            .iter()
            .map(|&j| self.greedy_weight(p.class, j as usize))
            .collect();
        let total: f64 = greedy.iter().sum();
        let uniform = 1.0 / neighbors.len() as f64;
        greedy
            .iter()
            .map(|&g| {
                if total > 0.0 {
                    0.5 * uniform + 0.5 * g / total
                } else {
                    uniform
                }
            })
            .collect()
    }

    #[inline]
    fn greedy_weight(&self, class: u8, node: usize) -> f64 {
        let v = self.domination[node * self.classes + class as usize];
        let d = 1.0 + f64::from(self.distance(class, node));
        v / (d * d)
    }

    fn choose_target<R: Rng + ?Sized>(&mut self, particle: usize, rng: &mut R) -> Option<usize> {
        let p = self.particles[particle];
        let neighbors = self.graph.neighbors(p.current);
        if neighbors.is_empty() {
            return None;
        }
        let mut greedy = std::mem::take(&mut self.greedy);
        greedy.clear();
        greedy.extend(neighbors.iter().map(|&j| self.greedy_weight(p.class, j as usize)));
        let total: f64 = greedy.iter().sum();
        let uniform = 1.0 / neighbors.len() as f64;

        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = neighbors[neighbors.len() - 1] as usize;
        for (&j, &g) in neighbors.iter().zip(&greedy) {
            acc += if total > 0.0 {
                0.5 * uniform + 0.5 * g / total
            } else {
                uniform
            };
            if u < acc {
                chosen = j as usize;
                break;
            }
        }
        self.greedy = greedy;
        Some(chosen)
    }

    /// One move of one particle.
    pub fn step_particle<R: Rng + ?Sized>(&mut self, particle: usize, rng: &mut R) -> StepOutcome {
        let Some(target) = self.choose_target(particle, rng) else {
            return StepOutcome {
                target: None,
                expelled: false,
            };
        };
        self.visit(particle, target)
    }

    /// Applies the effects of `particle` visiting `target`.
    pub fn visit(&mut self, particle: usize, target: usize) -> StepOutcome {
        let p = self.particles[particle];
        let c = p.class as usize;
        let classes = self.classes;
        let row = &mut self.domination[target * classes..(target + 1) * classes];

        if self.graph.label(target).is_none() {
            let delta = self.delta_v * p.strength / (classes - 1) as f64;
            let mut rivals = 0.0;
            for (r, v) in row.iter_mut().enumerate() {
                if r != c {
                    *v = (*v - delta).max(0.0);
                    rivals += *v;
                }
            }
            // the owner takes what the rivals lost; writing it as the remainder
            // keeps the row summing to one without drift
            row[c] = (1.0 - rivals).max(0.0);
        }

        let own = row[c];
        let dominant = row.iter().enumerate().all(|(r, &v)| r == c || v < own);

        let n = self.graph.node_count();
        let came_from = self.distances[c * n + p.current];
        let slot = &mut self.distances[c * n + target];
        if came_from + 1 < *slot {
            *slot = came_from + 1;
        }

        let part = &mut self.particles[particle];
        part.strength = own;
        if dominant {
            part.previous = part.current;
            part.current = target;
        }
        StepOutcome {
            target: Some(target),
            expelled: !dominant,
        }
    }

    /// Every particle takes one step, in creation order.
    pub fn round<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in 0..self.particles.len() {
            self.step_particle(p, rng);
        }
    }

    /// Mean over unlabeled nodes of the largest domination level.
    pub fn mean_max_domination(&self) -> f64 {
        if self.unlabeled.is_empty() {
            return 1.0;
        }
        let sum: f64 = self
            .unlabeled
            .iter()
            .map(|&i| self.domination(i).iter().copied().fold(0.0, f64::max))
            .sum();
        sum / self.unlabeled.len() as f64
    }

    fn finalize_node(&self, node: usize, threshold: f64) -> Option<u8> {
        if let Some(c) = self.graph.label(node) {
            return Some(c);
        }
        let row = self.domination(node);
        let mut best: Option<(usize, f64)> = None;
        for (c, &v) in row.iter().enumerate() {
            if v > threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((c, v));
            }
        }
        best.map(|(c, _)| c as u8)
    }

    fn fraction_finalized(&self, threshold: f64) -> f64 {
        let n = self.graph.node_count();
        if n == 0 {
            return 1.0;
        }
        let done = (0..n).filter(|&i| self.finalize_node(i, threshold).is_some()).count();
        done as f64 / n as f64
    }

    /// Walks until the mean maximum domination stabilizes, then labels every
    /// node whose domination for some class exceeds the stop threshold.
    pub fn run_phase1<R: Rng + ?Sized>(
        &mut self,
        params: &PccParams,
        rng: &mut R,
        observer: &mut dyn Observer,
    ) -> Result<Phase1Outcome> {
        params.validate(self.classes)?;
        self.delta_v = params.delta_v;
        let mut checks = Vec::new();
        let mut window: VecDeque<f64> = VecDeque::with_capacity(params.stabilization_window.min(64));
        let mut rounds = 0;
        let stop = if self.unlabeled.is_empty() {
            Phase1Stop::NothingToLabel
        } else {
            loop {
                if rounds >= params.max_rounds {
                    break Phase1Stop::MaxRounds;
                }
                if observer.should_cancel() {
                    return Err(Error::Cancelled);
                }
                self.round(rng);
                rounds += 1;
                if rounds % params.check_interval == 0 {
                    let m = self.mean_max_domination();
                    checks.push(m);
                    observer.on_progress(&Progress {
                        stage: Stage::Phase1,
                        round: rounds,
                        mean_max_domination: m,
                        fraction_finalized: self.fraction_finalized(params.stop_threshold),
                    });
                    if window.len() == params.stabilization_window {
                        window.pop_front();
                    }
                    window.push_back(m);
                    if window.len() == params.stabilization_window {
                        let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                            (lo.min(x), hi.max(x))
                        });
                        if hi - lo < params.stabilization_epsilon {
                            break Phase1Stop::Stabilized;
                        }
                    }
                }
            }
        };
        let finalized = (0..self.graph.node_count())
            .map(|i| self.finalize_node(i, params.stop_threshold))
            .collect();
        Ok(Phase1Outcome {
            rounds,
            stop,
            checks,
            finalized,
        })
    }
}

/// Per-pixel domination vectors handed to the second phase. Fixed pixels
/// hold one-hot vectors and only act as neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDomination {
    classes: usize,
    values: Vec<f64>,
    fixed: Vec<bool>,
}

impl PixelDomination {
    pub fn new(classes: usize, pixels: usize) -> Self {
        Self {
            classes,
            values: vec![1.0 / classes as f64; pixels * classes],
            fixed: vec![false; pixels],
        }
    }

    pub fn fix(&mut self, pixel: usize, class: u8) {
        let row = &mut self.values[pixel * self.classes..(pixel + 1) * self.classes];
        row.fill(0.0);
        row[class as usize] = 1.0;
        self.fixed[pixel] = true;
    }

    pub fn set_free(&mut self, pixel: usize, values: &[f64]) {
        self.values[pixel * self.classes..(pixel + 1) * self.classes].copy_from_slice(values);
        self.fixed[pixel] = false;
    }

    pub fn get(&self, pixel: usize) -> &[f64] {
        &self.values[pixel * self.classes..(pixel + 1) * self.classes]
    }

    pub fn is_fixed(&self, pixel: usize) -> bool {
        self.fixed[pixel]
    }

    fn argmax(&self, pixel: usize) -> u8 {
        let row = self.get(pixel);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        best as u8
    }

    fn mean_max_free(&self, free: &[usize]) -> f64 {
        if free.is_empty() {
            return 0.0;
        }
        free.iter()
            .map(|&p| self.get(p).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / free.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Outcome {
    pub sweeps: usize,
    /// Final class of every pixel.
    pub labels: Vec<u8>,
}

/// Resolves non-fixed pixels by Jacobi sweeps over their 8-neighborhoods.
/// `weighted` holds the weighted feature rows of every pixel of `grid`.
pub fn run_phase2(
    dom: &mut PixelDomination,
    weighted: &FeatureMatrix,
    grid: Grid,
    params: &PccParams,
) -> Result<Phase2Outcome> {
    if weighted.len() != grid.len() || dom.fixed.len() != grid.len() {
        return Err(Error::InvalidInput("phase 2 inputs disagree on the pixel count".into()));
    }
    let classes = dom.classes;
    let free: Vec<usize> = (0..grid.len()).filter(|&p| !dom.fixed[p]).collect();

    // neighbor weights are fixed across sweeps
    let hoods: Vec<Vec<(usize, f64)>> = free
        .iter()
        .map(|&p| {
            let row = weighted.row(p);
            let hood: Vec<(usize, f64)> = grid
                .neighbors8(p)
                .map(|q| {
                    let d = row
                        .iter()
                        .zip(weighted.row(q))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (q, d)
                })
                .collect();
            match params.phase2_weighting {
                Phase2Weighting::Similarity => {
                    let total: f64 = hood.iter().map(|&(_, d)| 1.0 / (1.0 + d)).sum();
                    hood.into_iter().map(|(q, d)| (q, 1.0 / (1.0 + d) / total)).collect()
                }
                Phase2Weighting::LiteralDistance => {
                    let a = hood.len() as f64;
                    hood.into_iter().map(|(q, d)| (q, d / a)).collect()
                }
            }
        })
        .collect();

    let mut sweeps = 0;
    let mut previous = dom.mean_max_free(&free);
    let mut next = vec![0.0; free.len() * classes];
    while !free.is_empty() && sweeps < params.phase2_max_sweeps {
        for (slot, hood) in hoods.iter().enumerate() {
            let out = &mut next[slot * classes..(slot + 1) * classes];
            out.fill(0.0);
            for &(q, w) in hood {
                for (o, v) in out.iter_mut().zip(dom.get(q)) {
                    *o += w * v;
                }
            }
        }
        if hoods.iter().all(|h| h.is_empty()) {
            break;
        }
        for (slot, &p) in free.iter().enumerate() {
            if !hoods[slot].is_empty() {
                dom.values[p * classes..(p + 1) * classes].copy_from_slice(&next[slot * classes..(slot + 1) * classes]);
            }
        }
        sweeps += 1;
        let current = dom.mean_max_free(&free);
        if (current - previous).abs() < params.phase2_epsilon {
            break;
        }
        previous = current;
    }

    let mut labels: Vec<u8> = (0..grid.len()).map(|p| dom.argmax(p)).collect();
    for (slot, &p) in free.iter().enumerate() {
        if hoods[slot].is_empty() {
            labels[p] = BACKGROUND;
        }
    }
    Ok(Phase2Outcome { sweeps, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    pub width: usize,
    pub height: usize,
    /// Class per pixel, 0 = background, 1 = foreground.
    pub labels: Vec<u8>,
    pub index: Option<IndexReport>,
    pub rounds: usize,
    pub phase1_stop: Phase1Stop,
    pub phase2_sweeps: usize,
    pub unlabeled_nodes: usize,
    pub finalized_in_phase1: usize,
    pub k: usize,
    pub lambda: [f64; crate::features::FEATURE_COUNT],
    pub seed: u64,
}

impl SegmentationResult {
    /// 0 for background, 255 for foreground.
    pub fn mask(&self) -> Vec<u8> {
        self.labels
            .iter()
            .map(|&c| if c == BACKGROUND { 0 } else { 255 })
            .collect()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.index.map(|r| r.alpha)
    }
}

/// Everything a segmentation run needs once features are computed.
#[derive(Debug, Clone)]
pub struct SegmentRequest<'a> {
    /// Normalized, unweighted features of every pixel.
    pub features: &'a FeatureMatrix,
    pub trimap: &'a LabelMap,
    pub lambda: WeightVector,
    pub k: usize,
    pub params: PccParams,
    /// Phi of the unweighted graph at this k, if already known.
    pub baseline_phi: Option<f64>,
}

pub fn run_segmentation(req: &SegmentRequest<'_>, observer: &mut dyn Observer) -> Result<SegmentationResult> {
    let grid = req.trimap.grid();
    if req.features.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows for a {}x{} trimap",
            req.features.len(),
            grid.width,
            grid.height
        )));
    }
    req.params.validate(2)?;
    req.trimap.require_both_classes()?;

    let base = SegmentationResult {
        width: grid.width,
        height: grid.height,
        labels: Vec::new(),
        index: None,
        rounds: 0,
        phase1_stop: Phase1Stop::NothingToLabel,
        phase2_sweeps: 0,
        unlabeled_nodes: req.trimap.count(TrimapCode::Unlabeled),
        finalized_in_phase1: 0,
        k: req.k,
        lambda: *req.lambda.as_array(),
        seed: req.params.rng_seed,
    };

    if base.unlabeled_nodes == 0 {
        let labels = req
            .trimap
            .codes()
            .iter()
            .map(|c| c.class().unwrap_or(BACKGROUND))
            .collect();
        return Ok(SegmentationResult { labels, ..base });
    }

    let graph = build_graph(req.features, req.trimap, req.k, &req.lambda)?;
    let phi0 = match req.baseline_phi {
        Some(p) => p,
        None if req.lambda.is_unit() => {
            let (s, t) = crate::index::count_labeled_edges(&graph);
            crate::index::compute_phi(s, t)
        }
        None => baseline_phi(req.features, req.trimap, req.k)?,
    };
    let index = IndexReport::for_graph(&graph, phi0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(req.params.rng_seed);
    let mut state = PccState::init(&graph)?;
    let phase1 = state.run_phase1(&req.params, &mut rng, observer)?;

    let mut dom = PixelDomination::new(2, grid.len());
    for (p, code) in req.trimap.codes().iter().enumerate() {
        if *code == TrimapCode::IgnoredBackground {
            dom.fix(p, BACKGROUND);
        }
    }
    let mut finalized_in_phase1 = 0;
    for (node, &pixel) in graph.node_pixels().iter().enumerate() {
        match phase1.finalized[node] {
            Some(c) => {
                if graph.label(node).is_none() {
                    finalized_in_phase1 += 1;
                }
                dom.fix(pixel, c)
            }
            None => dom.set_free(pixel, state.domination(node)),
        }
    }
    let weighted = apply_weights(req.features, &req.lambda);
    let phase2 = run_phase2(&mut dom, &weighted, grid, &req.params)?;
    observer.on_progress(&Progress {
        stage: Stage::Phase2,
        round: phase1.rounds,
        mean_max_domination: phase1.checks.last().copied().unwrap_or(1.0),
        fraction_finalized: 1.0,
    });

    Ok(SegmentationResult {
        labels: phase2.labels,
        index: Some(index),
        rounds: phase1.rounds,
        phase1_stop: phase1.stop,
        phase2_sweeps: phase2.sweeps,
        finalized_in_phase1,
        ..base
    })
}

/// Full pipeline from raw image and trimap.
pub fn segment(
    image: &RgbImage,
    trimap: &LabelMap,
    lambda: &WeightVector,
    k: usize,
    params: &PccParams,
) -> Result<SegmentationResult> {
    if image.grid() != trimap.grid() {
        return Err(Error::InvalidInput(format!(
            "image is {}x{} but trimap is {}x{}",
            image.width(),
            image.height(),
            trimap.width(),
            trimap.height()
        )));
    }
    let features = normalize(&extract_features(image)?);
    run_segmentation(
        &SegmentRequest {
            features: &features,
            trimap,
            lambda: *lambda,
            k,
            params: *params,
            baseline_phi: None,
        },
        &mut NoopObserver,
    )
}
