//! C ABI over the segmentation toolkit.
//!
//! Every fallible call returns a [`PccStatus`]. On failure the message is
//! kept per thread and can be read with [`pcc_last_error`] until the next
//! failing call on the same thread. Handles are opaque and must be released
//! with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pccseg::dataset::trimap_from_gray;
use pccseg::optimizer::GaConfig;
use pccseg::pcc::{run_segmentation, NoopObserver, SegmentRequest};
use pccseg::{
    extract_features, normalize, Error, FeatureMatrix, GroundTruth, IndexReport, LabelMap, PccParams, RgbImage,
    SegmentationResult, WeightVector, FEATURE_COUNT,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidParameter = 3,
    Format = 4,
    Io = 5,
    Cancelled = 6,
    Panic = 7,
}

/// Image, trimap and optional ground truth of one segmentation problem.
pub struct PccProblem {
    trimap: LabelMap,
    truth: Option<GroundTruth>,
    features: FeatureMatrix,
}

/// Outcome of [`pcc_segment`].
pub struct PccSegmentation(SegmentationResult);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PccSegmentOptions {
    pub k: usize,
    pub seed: u64,
    /// `PCC_FEATURE_COUNT` weights, or null for all ones.
    pub lambda: *const f64,
    pub max_rounds: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PccGaOptions {
    pub population_size: usize,
    pub max_generations: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PccIndex {
    pub z_same: usize,
    pub z_total: usize,
    pub phi: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub baseline_phi: f64,
}

pub const PCC_FEATURE_COUNT: usize = 23;
const _: () = assert!(PCC_FEATURE_COUNT == FEATURE_COUNT);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PccStatus {
    match err {
        Error::InvalidInput(_) | Error::Image(_) => PccStatus::InvalidInput,
        Error::InvalidParameter(_) | Error::Config(_) => PccStatus::InvalidParameter,
        Error::Format(_) => PccStatus::Format,
        Error::Io { .. } => PccStatus::Io,
        Error::Cancelled => PccStatus::Cancelled,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PccStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            PccStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PccStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller promises `p` is null or valid for the duration of the call.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn read_lambda(p: *const f64) -> Result<WeightVector, Failure> {
    if p.is_null() {
        return Ok(WeightVector::unit());
    }
    Ok(WeightVector::from_slice(std::slice::from_raw_parts(p, FEATURE_COUNT))?)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn pcc_feature_count() -> usize {
    FEATURE_COUNT
}

/// Builds a problem from a packed RGB buffer (`3 * width * height` bytes) and
/// a trimap of gray levels 0, 64, 128, 255 (`width * height` bytes).
///
/// # Safety
/// `rgb` and `trimap` must point to buffers of the sizes above; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcc_problem_new(
    width: usize,
    height: usize,
    rgb: *const u8,
    trimap: *const u8,
    out: *mut *mut PccProblem,
) -> PccStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidInput("image size overflows".into()))?;
        let rgb = slice(rgb, n * 3, "rgb")?;
        let trimap = slice(trimap, n, "trimap")?;
        let pixels = rgb.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let image = RgbImage::new(width, height, pixels)?;
        let trimap = trimap_from_gray(width, height, trimap)?;
        let features = normalize(&extract_features(&image)?);
        *out = Box::into_raw(Box::new(PccProblem {
            trimap,
            truth: None,
            features,
        }));
        Ok(())
    })
}

/// Attaches a ground-truth mask (`width * height` bytes; 0 background, 255
/// foreground, other values ignored).
///
/// # Safety
/// `problem` must come from [`pcc_problem_new`]; `gt` must hold
/// `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn pcc_problem_set_ground_truth(problem: *mut PccProblem, gt: *const u8) -> PccStatus {
    guard(|| {
        let problem = problem.as_mut().ok_or(Failure::Null("problem"))?;
        let grid = problem.trimap.grid();
        let gt = slice(gt, grid.len(), "gt")?;
        problem.truth = Some(GroundTruth::from_gray(grid.width, grid.height, gt)?);
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or come from [`pcc_problem_new`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcc_problem_free(problem: *mut PccProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

#[no_mangle]
pub extern "C" fn pcc_segment_options_default() -> PccSegmentOptions {
    PccSegmentOptions {
        k: 100,
        seed: 0,
        lambda: ptr::null(),
        max_rounds: PccParams::default().max_rounds,
    }
}

/// # Safety
/// `problem` must come from [`pcc_problem_new`]; `options` may be null for
/// defaults; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcc_segment(
    problem: *const PccProblem,
    options: *const PccSegmentOptions,
    out: *mut *mut PccSegmentation,
) -> PccStatus {
    guard(|| {
        let problem = non_null(problem, "problem")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| pcc_segment_options_default());
        let params = PccParams {
            rng_seed: opts.seed,
            max_rounds: opts.max_rounds,
            ..PccParams::default()
        };
        let result = run_segmentation(
            &SegmentRequest {
                features: &problem.features,
                trimap: &problem.trimap,
                lambda: read_lambda(opts.lambda)?,
                k: opts.k,
                params,
                baseline_phi: None,
            },
            &mut NoopObserver,
        )?;
        *out = Box::into_raw(Box::new(PccSegmentation(result)));
        Ok(())
    })
}

/// Number of pixels in the mask.
///
/// # Safety
/// `seg` must be null or come from [`pcc_segment`].
#[no_mangle]
pub unsafe extern "C" fn pcc_segmentation_len(seg: *const PccSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.0.labels.len())
}

/// Copies the 0/255 mask into `out`, which must hold `len` bytes with `len`
/// equal to [`pcc_segmentation_len`].
///
/// # Safety
/// `seg` must come from [`pcc_segment`]; `out` must be writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pcc_segmentation_mask(seg: *const PccSegmentation, out: *mut u8, len: usize) -> PccStatus {
    guard(|| {
        let seg = non_null(seg, "segmentation")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let mask = seg.0.mask();
        if len != mask.len() {
            return Err(Error::InvalidParameter(format!("buffer holds {len} bytes, mask has {}", mask.len())).into());
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&mask);
        Ok(())
    })
}

/// Alpha of the graph used, or NaN when no graph was built.
///
/// # Safety
/// `seg` must be null or come from [`pcc_segment`].
#[no_mangle]
pub unsafe extern "C" fn pcc_segmentation_alpha(seg: *const PccSegmentation) -> f64 {
    seg.as_ref().and_then(|s| s.0.alpha()).unwrap_or(f64::NAN)
}

/// # Safety
/// `seg` must be null or come from [`pcc_segment`].
#[no_mangle]
pub unsafe extern "C" fn pcc_segmentation_rounds(seg: *const PccSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.0.rounds)
}

/// # Safety
/// `seg` must be null or come from [`pcc_segment`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcc_segmentation_free(seg: *mut PccSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Error rate of a 0/255 mask over the unlabeled pixels, against the ground
/// truth attached to `problem`.
///
/// # Safety
/// `problem` must come from [`pcc_problem_new`]; `mask` must hold one byte per
/// pixel; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcc_error_rate(problem: *const PccProblem, mask: *const u8, out: *mut f64) -> PccStatus {
    guard(|| {
        let problem = non_null(problem, "problem")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let truth = problem
            .truth
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("no ground truth attached".into()))?;
        let mask = slice(mask, problem.trimap.grid().len(), "mask")?;
        let predicted: Vec<u8> = mask.iter().map(|&v| u8::from(v != 0)).collect();
        *out = pccseg::error_rate(&predicted, &problem.trimap, truth)?.error_rate;
        Ok(())
    })
}

/// Separability index of the k-NN graph under `lambda` (null for all ones),
/// calibrated against the unweighted graph.
///
/// # Safety
/// `problem` must come from [`pcc_problem_new`]; `lambda` null or
/// `PCC_FEATURE_COUNT` values; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcc_index(
    problem: *const PccProblem,
    k: usize,
    lambda: *const f64,
    out: *mut PccIndex,
) -> PccStatus {
    guard(|| {
        let problem = non_null(problem, "problem")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let lambda = read_lambda(lambda)?;
        let graph = pccseg::build_graph(&problem.features, &problem.trimap, k, &lambda)?;
        let baseline = pccseg::index::baseline_phi(&problem.features, &problem.trimap, k)?;
        let r = IndexReport::for_graph(&graph, baseline)?;
        *out = PccIndex {
            z_same: r.z_same,
            z_total: r.z_total,
            phi: r.phi,
            sigma: r.sigma,
            alpha: r.alpha,
            baseline_phi: r.baseline_phi,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pcc_ga_options_default() -> PccGaOptions {
    let d = GaConfig::default();
    PccGaOptions {
        population_size: d.population_size,
        max_generations: d.max_generations,
        seed: d.rng_seed,
    }
}

/// Searches weights maximizing alpha at fixed `k`. Writes
/// `PCC_FEATURE_COUNT` weights to `lambda_out` and the best alpha to
/// `alpha_out` (which may be null).
///
/// # Safety
/// `problem` must come from [`pcc_problem_new`]; `options` may be null;
/// `lambda_out` must be writable for `PCC_FEATURE_COUNT` values.
#[no_mangle]
pub unsafe extern "C" fn pcc_optimize(
    problem: *const PccProblem,
    k: usize,
    options: *const PccGaOptions,
    lambda_out: *mut f64,
    alpha_out: *mut f64,
) -> PccStatus {
    guard(|| {
        let problem = non_null(problem, "problem")?;
        if lambda_out.is_null() {
            return Err(Failure::Null("lambda_out"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| pcc_ga_options_default());
        let cfg = GaConfig {
            population_size: opts.population_size,
            max_generations: opts.max_generations,
            rng_seed: opts.seed,
            ..GaConfig::default()
        };
        let (best, trace) = pccseg::optimize(&problem.features, &problem.trimap, k, &cfg)?;
        std::slice::from_raw_parts_mut(lambda_out, FEATURE_COUNT).copy_from_slice(best.as_array());
        if let Some(a) = alpha_out.as_mut() {
            *a = trace.best_alpha();
        }
        Ok(())
    })
}

/// Exponent calibrating a baseline phi to alpha = 0.5; NaN if `baseline_phi`
/// is outside (0, 1].
#[no_mangle]
pub extern "C" fn pcc_sigma(baseline_phi: f64) -> f64 {
    match pccseg::compute_sigma(baseline_phi) {
        Ok(s) => s,
        Err(e) => {
            set_last_error(e.to_string());
            f64::NAN
        }
    }
}

#[no_mangle]
pub extern "C" fn pcc_alpha(phi: f64, sigma: f64) -> f64 {
    pccseg::compute_alpha(phi, sigma)
}
