//! Feature-weight search.
//!
//! A real-coded genetic algorithm looks for the weight vector whose k-NN graph
//! maximizes the separability index `alpha`. Genes live in `[0, 1]`. Each
//! generation keeps `elite_count` elites, fills a `crossover_fraction` share
//! of the remaining slots with blend-crossover children of two size-2
//! tournament winners, and the rest with mutated copies of a tournament
//! winner (each gene reset uniformly with probability `mutation_rate`).

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, WeightVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::index::{baseline_phi, compute_alpha, compute_phi, compute_sigma};
use crate::knn::{labeled_edge_counts, LabelMap};
use crate::{Error, Result};

/// BLX-alpha extension on each side of the parents' interval.
const BLEND_EXTENSION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_fraction: f64,
    pub elite_count: usize,
    pub mutation_rate: f64,
    pub stall_generations: usize,
    pub rng_seed: u64,
    pub early_stop_alpha: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_generations: 200,
            crossover_fraction: 0.8,
            elite_count: 2,
            mutation_rate: 1.0 / FEATURE_COUNT as f64,
            stall_generations: 50,
            rng_seed: 0,
            early_stop_alpha: 1.0 - 1e-9,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if self.elite_count >= self.population_size {
            return Err(Error::Config("elite_count must be below population_size".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::Config("crossover_fraction must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config("mutation_rate must be in [0, 1]".into()));
        }
        if self.stall_generations == 0 {
            return Err(Error::Config("stall_generations must be positive".into()));
        }
        if self.early_stop_alpha.is_nan() {
            return Err(Error::Config("early_stop_alpha must be a number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    Stalled,
    MaxGenerations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness seen so far.
    pub best_alpha: f64,
    pub mean_alpha: f64,
    pub best_lambda: [f64; FEATURE_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub generations: Vec<GenerationRecord>,
    /// Fitness evaluations actually computed (cache misses).
    pub evaluations: usize,
    pub cache_hits: usize,
    pub stop_reason: StopReason,
    pub baseline_phi: Option<f64>,
    pub sigma: Option<f64>,
}

impl OptimizationTrace {
    pub fn best_alpha(&self) -> f64 {
        self.generations.last().map_or(f64::NAN, |g| g.best_alpha)
    }

    /// One row per generation: generation, best_alpha, mean_alpha, then the
    /// best weight vector by feature name.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["generation".to_string(), "best_alpha".into(), "mean_alpha".into()];
        header.extend(FEATURE_NAMES.iter().map(|n| format!("lambda_{n}")));
        w.write_record(&header)?;
        for g in &self.generations {
            let mut row = vec![
                g.generation.to_string(),
                g.best_alpha.to_string(),
                g.mean_alpha.to_string(),
            ];
            row.extend(g.best_lambda.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

type Genome = [f64; FEATURE_COUNT];

fn genome_key(g: &Genome) -> [u64; FEATURE_COUNT] {
    g.map(f64::to_bits)
}

fn random_genome<R: Rng>(rng: &mut R) -> Genome {
    let mut g: Genome = std::array::from_fn(|_| rng.random::<f64>());
    repair(&mut g, rng);
    g
}

// A vector of all zeros is not a valid weight vector.
fn repair<R: Rng>(g: &mut Genome, rng: &mut R) {
    while g.iter().all(|&x| x == 0.0) {
        let j = rng.random_range(0..FEATURE_COUNT);
        g[j] = rng.random::<f64>();
    }
}

fn tournament<R: Rng>(fitness: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..fitness.len());
    let b = rng.random_range(0..fitness.len());
    if fitness[b] > fitness[a] || (fitness[b] == fitness[a] && b < a) {
        b
    } else {
        a
    }
}

fn blend<R: Rng>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    std::array::from_fn(|j| {
        let (lo, hi) = (a[j].min(b[j]), a[j].max(b[j]));
        let ext = BLEND_EXTENSION * (hi - lo);
        let x = lo - ext + rng.random::<f64>() * (hi - lo + 2.0 * ext);
        x.clamp(0.0, 1.0)
    })
}

fn mutate<R: Rng>(g: &mut Genome, rate: f64, rng: &mut R) {
    for x in g.iter_mut() {
        if rng.random::<f64>() < rate {
            *x = rng.random::<f64>();
        }
    }
}

pub struct GaOutcome {
    pub best: WeightVector,
    pub best_fitness: f64,
    pub trace: OptimizationTrace,
}

/// Runs the genetic algorithm against an arbitrary fitness. Fitness values
/// are memoized by exact bit pattern and evaluated in parallel within a
/// generation; results do not depend on the thread count.
///
/// `on_generation` sees every record as it is produced and may return
/// `false` to cancel.
pub fn run_ga<F>(
    cfg: &GaConfig,
    fitness: F,
    on_generation: &mut dyn FnMut(&GenerationRecord) -> bool,
) -> Result<GaOutcome>
where
    F: Fn(&WeightVector) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut cache: HashMap<[u64; FEATURE_COUNT], f64> = HashMap::new();
    let mut evaluations = 0;
    let mut cache_hits = 0;

    let mut evaluate = |population: &[Genome]| -> Result<Vec<f64>> {
        let mut pending: Vec<Genome> = Vec::new();
        for g in population {
            let key = genome_key(g);
            if !cache.contains_key(&key) && !pending.iter().any(|p| genome_key(p) == key) {
                pending.push(*g);
            }
        }
        let computed: Vec<f64> = pending
            .par_iter()
            .map(|g| WeightVector::new(*g).and_then(|w| fitness(&w)))
            .collect::<Result<_>>()?;
        evaluations += pending.len();
        cache_hits += population.len() - pending.len();
        for (g, f) in pending.iter().zip(computed) {
            cache.insert(genome_key(g), f);
        }
        Ok(population.iter().map(|g| cache[&genome_key(g)]).collect())
    };

    let mut population: Vec<Genome> = (0..cfg.population_size).map(|_| random_genome(&mut rng)).collect();
    let mut best: Option<(Genome, f64)> = None;
    let mut generations = Vec::new();
    let mut stall = 0;
    let mut generation = 0;

    let stop_reason = loop {
        let scores = evaluate(&population)?;
        let mut improved = false;
        for (g, &f) in population.iter().zip(&scores) {
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((*g, f));
                improved = true;
            }
        }
        let (best_genome, best_fit) = best.expect("population is never empty");
        let record = GenerationRecord {
            generation,
            best_alpha: best_fit,
            mean_alpha: scores.iter().sum::<f64>() / scores.len() as f64,
            best_lambda: best_genome,
        };
        if !on_generation(&record) {
            return Err(Error::Cancelled);
        }
        generations.push(record);

        if generation > 0 {
            stall = if improved { 0 } else { stall + 1 };
        }
        if best_fit >= cfg.early_stop_alpha {
            break StopReason::TargetReached;
        }
        if stall >= cfg.stall_generations {
            break StopReason::Stalled;
        }
        if generation >= cfg.max_generations {
            break StopReason::MaxGenerations;
        }

        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..cfg.elite_count].iter().map(|&i| population[i]).collect();
        let remaining = cfg.population_size - cfg.elite_count;
        let crossovers = (cfg.crossover_fraction * remaining as f64).round() as usize;
        for slot in 0..remaining {
            let mut child = if slot < crossovers {
                let a = tournament(&scores, &mut rng);
                let b = tournament(&scores, &mut rng);
                blend(&population[a], &population[b], &mut rng)
            } else {
                let mut c = population[tournament(&scores, &mut rng)];
                mutate(&mut c, cfg.mutation_rate, &mut rng);
                c
            };
            repair(&mut child, &mut rng);
            next.push(child);
        }
        population = next;
        generation += 1;
    };

    let (genome, best_fitness) = best.expect("population is never empty");
    Ok(GaOutcome {
        best: WeightVector::new(genome)?,
        best_fitness,
        trace: OptimizationTrace {
            generations,
            evaluations,
            cache_hits,
            stop_reason,
            baseline_phi: None,
            sigma: None,
        },
    })
}

/// `alpha` of the graph built with `lambda`, given the unweighted baseline.
/// `fm` must be normalized.
pub fn fitness(lambda: &WeightVector, fm: &FeatureMatrix, labels: &LabelMap, k: usize, baseline: f64) -> Result<f64> {
    let sigma = compute_sigma(baseline)?;
    let (same, total) = labeled_edge_counts(fm, labels, k, lambda)?;
    Ok(compute_alpha(compute_phi(same, total), sigma))
}

/// Searches the weights that maximize `alpha` at fixed `k`. `fm` must be
/// normalized.
pub fn optimize(
    fm: &FeatureMatrix,
    labels: &LabelMap,
    k: usize,
    cfg: &GaConfig,
) -> Result<(WeightVector, OptimizationTrace)> {
    optimize_with(fm, labels, k, cfg, &mut |_| true)
}

pub fn optimize_with(
    fm: &FeatureMatrix,
    labels: &LabelMap,
    k: usize,
    cfg: &GaConfig,
    on_generation: &mut dyn FnMut(&GenerationRecord) -> bool,
) -> Result<(WeightVector, OptimizationTrace)> {
    cfg.validate()?;
    let phi0 = baseline_phi(fm, labels, k)?;
    let sigma = compute_sigma(phi0)?;
    let outcome = run_ga(
        cfg,
        |lambda| {
            let (same, total) = labeled_edge_counts(fm, labels, k, lambda)?;
            Ok(compute_alpha(compute_phi(same, total), sigma))
        },
        on_generation,
    )?;
    let mut trace = outcome.trace;
    trace.baseline_phi = Some(phi0);
    trace.sigma = Some(sigma);
    Ok((outcome.best, trace))
}
