//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for bad input (arguments, missing or malformed
//! files), 3 for runtime failures such as a port that cannot be bound.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{factor_for_max_side, save_mask, Sample};
use crate::eval::{error_rate, EvalReport};
use crate::features::{extract_features, normalize, FeatureMatrix, Grid, WeightVector, FEATURE_NAMES};
use crate::graph_io::{load_graph, save_binary, save_edge_list};
use crate::index::{baseline_phi, compute_phi, count_labeled_edges, IndexReport};
use crate::knn::build_graph;
use crate::optimizer::{optimize_with, GaConfig, OptimizationTrace};
use crate::pcc::{run_segmentation, PccParams, Progress, SegmentRequest, SegmentationResult};
use crate::server::{AppState, ServerConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_K: usize = 100;
const DEFAULT_PORT: u16 = 8080;
const DEFAULT_OUT: &str = "pccseg-out";

#[derive(Debug, Parser)]
#[command(
    name = "pccseg",
    version,
    about = "Particle competition and cooperation image segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment an image for one or more values of k.
    Segment(SegmentArgs),
    /// Search feature weights that maximize alpha, optionally segmenting with them.
    Optimize(OptimizeArgs),
    /// Report phi, sigma and alpha for a graph.
    Index(IndexArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Export the per-pixel feature matrix as CSV.
    Features(FeaturesArgs),
    /// Export the k-NN graph of an image.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    trimap: PathBuf,
    /// Ground-truth mask (0 background, 255 foreground, anything else ignored).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Shrink inputs by this factor (area average for the image, nearest for masks).
    #[arg(long, conflicts_with = "max_side")]
    downscale: Option<f64>,
    /// Shrink inputs so that the longest side is at most this many pixels.
    #[arg(long)]
    max_side: Option<usize>,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "PCCSEG_OUT")]
    out: Option<PathBuf>,
    /// JSON file with defaults for any option, plus "pcc" and "ga" sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, conflicts_with = "k_sweep")]
    k: Option<usize>,
    /// Comma-separated list of k values.
    #[arg(long, value_delimiter = ',')]
    k_sweep: Option<Vec<usize>>,
    /// JSON weight vector: a 23-element array or an object with a "lambda" array.
    #[arg(long, conflicts_with = "optimize")]
    lambda_file: Option<PathBuf>,
    /// Search the weights first.
    #[arg(long)]
    optimize: bool,
    /// k used during the weight search.
    #[arg(long)]
    optimize_k: Option<usize>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// k used during the weight search.
    #[arg(long)]
    k: Option<usize>,
    /// Segment with the found weights afterwards.
    #[arg(long)]
    segment: bool,
    /// k values for the follow-up segmentation (defaults to the search k).
    #[arg(long, value_delimiter = ',', requires = "segment")]
    k_sweep: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Graph file (text edge list or binary); replaces --image/--trimap.
    #[arg(long, conflicts_with_all = ["image", "trimap"])]
    graph: Option<PathBuf>,
    /// Baseline phi used to calibrate sigma.
    #[arg(long, conflicts_with = "baseline_graph")]
    baseline: Option<f64>,
    /// Graph whose phi is the baseline.
    #[arg(long)]
    baseline_graph: Option<PathBuf>,
    #[arg(long, requires = "trimap")]
    image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    trimap: Option<PathBuf>,
    #[arg(long)]
    downscale: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda_file: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Directory receiving a copy of every finished mask.
    #[arg(long)]
    spill_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    downscale: Option<f64>,
    /// Write z-scored columns instead of raw values.
    #[arg(long)]
    normalized: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Edges,
    Binary,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edges")]
    format: GraphFormat,
}

/// Defaults read from `--config`. Command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub k_sweep: Option<Vec<usize>>,
    pub optimize_k: Option<usize>,
    pub seed: Option<u64>,
    pub downscale: Option<f64>,
    pub max_side: Option<usize>,
    pub out: Option<PathBuf>,
    pub port: Option<u16>,
    pub static_dir: Option<PathBuf>,
    pub spill_dir: Option<PathBuf>,
    pub session_ttl_secs: Option<u64>,
    pub max_pixels: Option<usize>,
    pub pcc: PccParams,
    pub ga: GaConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Index(a) => cmd_index(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Features(a) => cmd_features(a),
        Command::Graph(a) => cmd_graph(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &FileConfig) -> Result<PathBuf> {
    let dir = flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn scale_factor(image: &Path, downscale: Option<f64>, max_side: Option<usize>) -> Result<Option<f64>> {
    match (downscale, max_side) {
        (Some(f), _) => Ok(Some(f)),
        (None, Some(side)) => {
            if !image.exists() {
                return Err(Error::io(image, std::io::ErrorKind::NotFound.into()));
            }
            let (w, h) = image::image_dimensions(image)?;
            let grid = Grid {
                width: w as usize,
                height: h as usize,
            };
            Ok(Some(factor_for_max_side(grid, side)))
        }
        (None, None) => Ok(None),
    }
}

fn load_sample(input: &InputArgs, cfg: &FileConfig) -> Result<Sample> {
    for path in [&input.image, &input.trimap].into_iter().chain(input.gt.as_ref()) {
        if !path.exists() {
            return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
        }
    }
    let factor = scale_factor(
        &input.image,
        input.downscale.or(cfg.downscale),
        input.max_side.or(cfg.max_side),
    )?;
    let sample = Sample::load(&input.image, &input.trimap, input.gt.as_deref(), factor)?;
    log::info!(
        "loaded {} ({}x{})",
        input.image.display(),
        sample.image.width(),
        sample.image.height()
    );
    Ok(sample)
}

/// Reads a weight vector: either a bare JSON array or an object with a
/// `lambda` array (the format `optimize` writes).
pub fn read_lambda_file(path: &Path) -> Result<WeightVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let array = match &value {
        serde_json::Value::Object(map) => map.get("lambda").cloned(),
        other => Some(other.clone()),
    };
    let weights: Vec<f64> = array.and_then(|a| serde_json::from_value(a).ok()).ok_or_else(|| {
        Error::Format(format!(
            "{}: expected an array of {} numbers",
            path.display(),
            FEATURE_NAMES.len()
        ))
    })?;
    WeightVector::from_slice(&weights)
}

#[derive(Debug, Serialize)]
struct LambdaRecord<'a> {
    lambda: &'a [f64],
    feature_names: &'a [&'a str],
    best_alpha: f64,
    baseline_phi: Option<f64>,
    sigma: Option<f64>,
    k: usize,
    seed: u64,
    generations: usize,
    evaluations: usize,
    cache_hits: usize,
    stop_reason: crate::optimizer::StopReason,
}

fn run_optimizer(
    features: &FeatureMatrix,
    sample: &Sample,
    k: usize,
    ga: &GaConfig,
    out: &Path,
) -> Result<(WeightVector, OptimizationTrace)> {
    let (best, trace) = optimize_with(features, &sample.trimap, k, ga, &mut |g| {
        log::info!(
            "generation {} best alpha {:.6} mean {:.6}",
            g.generation,
            g.best_alpha,
            g.mean_alpha
        );
        true
    })?;
    let record = LambdaRecord {
        lambda: best.as_array(),
        feature_names: &FEATURE_NAMES,
        best_alpha: trace.best_alpha(),
        baseline_phi: trace.baseline_phi,
        sigma: trace.sigma,
        k,
        seed: ga.rng_seed,
        generations: trace.generations.len(),
        evaluations: trace.evaluations,
        cache_hits: trace.cache_hits,
        stop_reason: trace.stop_reason,
    };
    let json = serde_json::to_string_pretty(&record).expect("lambda record serializes");
    write_file(&out.join("lambda.json"), format!("{json}\n").as_bytes())?;
    let mut csv_bytes = Vec::new();
    trace
        .write_csv(&mut csv_bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    write_file(&out.join("trace.csv"), &csv_bytes)?;
    println!(
        "best alpha {:.6} after {} generations ({:?})",
        record.best_alpha, record.generations, trace.stop_reason
    );
    Ok((best, trace))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    k: usize,
    error_rate: Option<f64>,
    alpha: Option<f64>,
    rounds: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    best_k: usize,
    best_mask: &'a str,
    rows: &'a [SweepRow],
    lambda: &'a [f64],
    index: Option<IndexReport>,
    evaluation: Option<EvalReport>,
}

/// Segments `sample` once per k, writing masks, the sweep CSV and a summary
/// into `out`. The run for k uses seed `seed + k`.
fn run_sweep(
    sample: &Sample,
    features: &FeatureMatrix,
    lambda: WeightVector,
    ks: &[usize],
    seed: u64,
    pcc: &PccParams,
    out: &Path,
) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("k sweep is empty".into()));
    }
    let results: Vec<SegmentationResult> = ks
        .par_iter()
        .map(|&k| {
            let params = PccParams {
                rng_seed: seed.wrapping_add(k as u64),
                ..*pcc
            };
            let mut progress = |p: &Progress| {
                log::debug!(
                    "k={k} {:?} round {} <max v> {:.4}",
                    p.stage,
                    p.round,
                    p.mean_max_domination
                );
            };
            run_segmentation(
                &SegmentRequest {
                    features,
                    trimap: &sample.trimap,
                    lambda,
                    k,
                    params,
                    baseline_phi: None,
                },
                &mut progress,
            )
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in &results {
        let report = sample
            .truth
            .as_ref()
            .map(|t| error_rate(&r.labels, &sample.trimap, t))
            .transpose()?;
        save_mask(&out.join(format!("mask_k{}.png", r.k)), r.width, r.height, &r.mask())?;
        rows.push(SweepRow {
            k: r.k,
            error_rate: report.map(|e| e.error_rate),
            alpha: r.alpha(),
            rounds: r.rounds,
            seed: r.seed,
        });
        reports.push(report);
    }

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        csv_out.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    let csv_bytes = csv_out.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_file(&out.join("sweep.csv"), &csv_bytes)?;

    // lowest error if ground truth is known, otherwise highest alpha; ties go to the smaller k
    let best = (0..rows.len())
        .min_by(|&a, &b| {
            let key = |i: usize| match rows[i].error_rate {
                Some(e) => e,
                None => -rows[i].alpha.unwrap_or(f64::NEG_INFINITY),
            };
            key(a).total_cmp(&key(b)).then(rows[a].k.cmp(&rows[b].k))
        })
        .expect("sweep is not empty");
    let r = &results[best];
    save_mask(&out.join("mask.png"), r.width, r.height, &r.mask())?;
    let summary = Summary {
        best_k: r.k,
        best_mask: "mask.png",
        rows: &rows,
        lambda: &r.lambda,
        index: r.index,
        evaluation: reports[best],
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out.join("summary.json"), format!("{json}\n").as_bytes())?;

    let mut stdout = std::io::stdout().lock();
    for row in &rows {
        let _ = writeln!(
            stdout,
            "k={:<4} error={} alpha={} rounds={}",
            row.k,
            row.error_rate.map_or("-".into(), |e| format!("{e:.6}")),
            row.alpha.map_or("-".into(), |a| format!("{a:.6}")),
            row.rounds
        );
    }
    let _ = writeln!(stdout, "best k={}", r.k);
    if let Some(report) = reports[best] {
        let _ = write!(stdout, "{}", report.to_text());
    }
    Ok(())
}

fn cmd_segment(a: SegmentArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.common.config.as_deref())?;
    let sample = load_sample(&a.input, &cfg)?;
    let out = out_dir(a.common.out, &cfg)?;
    let seed = a.common.seed.or(cfg.seed).unwrap_or(0);
    let features = normalize(&extract_features(&sample.image)?);
    let lambda = if a.optimize {
        let ga = GaConfig {
            rng_seed: seed,
            ..cfg.ga
        };
        let k = a.optimize_k.or(cfg.optimize_k).unwrap_or(DEFAULT_K);
        run_optimizer(&features, &sample, k, &ga, &out)?.0
    } else if let Some(path) = &a.lambda_file {
        read_lambda_file(path)?
    } else {
        WeightVector::unit()
    };
    let ks = a
        .k_sweep
        .or(a.k.map(|k| vec![k]))
        .or(cfg.k_sweep.clone())
        .or(cfg.k.map(|k| vec![k]))
        .unwrap_or_else(|| vec![DEFAULT_K]);
    run_sweep(&sample, &features, lambda, &ks, seed, &cfg.pcc, &out)?;
    Ok(EXIT_OK)
}

fn cmd_optimize(a: OptimizeArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.common.config.as_deref())?;
    let sample = load_sample(&a.input, &cfg)?;
    let out = out_dir(a.common.out, &cfg)?;
    let seed = a.common.seed.or(cfg.seed).unwrap_or(0);
    let k = a.k.or(cfg.optimize_k).unwrap_or(DEFAULT_K);
    let features = normalize(&extract_features(&sample.image)?);
    let ga = GaConfig {
        rng_seed: seed,
        ..cfg.ga
    };
    let (best, _) = run_optimizer(&features, &sample, k, &ga, &out)?;
    if a.segment {
        let ks = a.k_sweep.unwrap_or_else(|| vec![k]);
        run_sweep(&sample, &features, best, &ks, seed, &cfg.pcc, &out)?;
    }
    Ok(EXIT_OK)
}

fn cmd_index(a: IndexArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.config.as_deref())?;
    let report = if let Some(path) = &a.graph {
        let graph = load_graph(path)?;
        let (same, total) = count_labeled_edges(&graph);
        let baseline = match (&a.baseline_graph, a.baseline) {
            (Some(g), _) => {
                let (s, t) = count_labeled_edges(&load_graph(g)?);
                compute_phi(s, t)
            }
            (None, Some(phi)) => phi,
            (None, None) => compute_phi(same, total),
        };
        IndexReport::new(same, total, baseline)?
    } else {
        let (Some(image), Some(trimap)) = (&a.image, &a.trimap) else {
            return Err(Error::InvalidInput(
                "give either --graph or --image with --trimap".into(),
            ));
        };
        let input = InputArgs {
            image: image.clone(),
            trimap: trimap.clone(),
            gt: None,
            downscale: a.downscale,
            max_side: None,
        };
        let sample = load_sample(&input, &cfg)?;
        let k = a.k.or(cfg.k).unwrap_or(DEFAULT_K);
        let lambda = a
            .lambda_file
            .as_deref()
            .map(read_lambda_file)
            .transpose()?
            .unwrap_or_else(WeightVector::unit);
        let features = normalize(&extract_features(&sample.image)?);
        let graph = build_graph(&features, &sample.trimap, k, &lambda)?;
        let baseline = match (&a.baseline_graph, a.baseline) {
            (Some(g), _) => {
                let (s, t) = count_labeled_edges(&load_graph(g)?);
                compute_phi(s, t)
            }
            (None, Some(phi)) => phi,
            (None, None) => baseline_phi(&features, &sample.trimap, k)?,
        };
        IndexReport::for_graph(&graph, baseline)?
    };
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("index report serializes")
        );
    } else {
        print!("{}", report.to_text());
    }
    Ok(EXIT_OK)
}

fn cmd_serve(a: ServeArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.config.as_deref())?;
    let port = a.port.or(cfg.port).unwrap_or(DEFAULT_PORT);
    let defaults = ServerConfig::default();
    let config = ServerConfig {
        max_pixels: cfg.max_pixels.unwrap_or(defaults.max_pixels),
        session_ttl: cfg.session_ttl_secs.map_or(defaults.session_ttl, Duration::from_secs),
        static_dir: a.static_dir.or(cfg.static_dir),
        spill_dir: a.spill_dir.or(cfg.spill_dir),
    };
    if let Some(dir) = &config.spill_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let addr = format!("{}:{port}", a.host);
    let listener = match std::net::TcpListener::bind(&addr) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return Ok(EXIT_RUNTIME);
        }
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&addr, e))?;
    let served = runtime.block_on(async {
        listener.set_nonblocking(true)?;
        let listener = tokio::net::TcpListener::from_std(listener)?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        crate::server::serve(listener, AppState::new(config)).await
    });
    match served {
        Ok(()) => Ok(EXIT_OK),
        Err(e) => {
            eprintln!("error: server failed: {e}");
            Ok(EXIT_RUNTIME)
        }
    }
}

fn cmd_features(a: FeaturesArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.common.config.as_deref())?;
    if !a.image.exists() {
        return Err(Error::io(&a.image, std::io::ErrorKind::NotFound.into()));
    }
    let mut image = crate::dataset::load_image(&a.image)?;
    if let Some(f) = a.downscale.or(cfg.downscale).filter(|&f| f > 1.0) {
        image = crate::dataset::downscale_area(&image, f)?;
    }
    let out = out_dir(a.common.out, &cfg)?;
    let mut fm = extract_features(&image)?;
    if a.normalized {
        fm = normalize(&fm);
    }
    fm.save_csv(&out.join("features.csv"))?;
    Ok(EXIT_OK)
}

fn cmd_graph(a: GraphArgs) -> Result<i32> {
    let cfg = FileConfig::load(a.common.config.as_deref())?;
    let sample = load_sample(&a.input, &cfg)?;
    let out = out_dir(a.common.out, &cfg)?;
    let k = a.k.or(cfg.k).unwrap_or(DEFAULT_K);
    let lambda = a
        .lambda_file
        .as_deref()
        .map(read_lambda_file)
        .transpose()?
        .unwrap_or_else(WeightVector::unit);
    let features = normalize(&extract_features(&sample.image)?);
    let graph = build_graph(&features, &sample.trimap, k, &lambda)?;
    match a.format {
        GraphFormat::Edges => save_edge_list(&graph, &out.join("graph.edges"))?,
        GraphFormat::Binary => save_binary(&graph, &out.join("graph.pccg"))?,
    }
    println!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    Ok(EXIT_OK)
}
