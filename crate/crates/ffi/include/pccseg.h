#ifndef PCCSEG_H
#define PCCSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PCC_FEATURE_COUNT 23

/**
 * Result code of every fallible call.
 */
typedef enum PccStatus {
  PCC_STATUS_OK = 0,
  PCC_STATUS_NULL_POINTER = 1,
  PCC_STATUS_INVALID_INPUT = 2,
  PCC_STATUS_INVALID_PARAMETER = 3,
  PCC_STATUS_FORMAT = 4,
  PCC_STATUS_IO = 5,
  PCC_STATUS_CANCELLED = 6,
  PCC_STATUS_PANIC = 7,
} PccStatus;

/**
 * Image, trimap and optional ground truth of one segmentation problem.
 */
typedef struct PccProblem PccProblem;

/**
 * Outcome of [`pcc_segment`].
 */
typedef struct PccSegmentation PccSegmentation;

typedef struct PccSegmentOptions {
  size_t k;
  uint64_t seed;
  /**
   * `PCC_FEATURE_COUNT` weights, or null for all ones.
   */
  const double *lambda;
  size_t max_rounds;
} PccSegmentOptions;

typedef struct PccIndex {
  size_t z_same;
  size_t z_total;
  double phi;
  double sigma;
  double alpha;
  double baseline_phi;
} PccIndex;

typedef struct PccGaOptions {
  size_t population_size;
  size_t max_generations;
  uint64_t seed;
} PccGaOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pcc_last_error(void);

size_t pcc_feature_count(void);

/**
 * Builds a problem from a packed RGB buffer (`3 * width * height` bytes) and
 * a trimap of gray levels 0, 64, 128, 255 (`width * height` bytes).
 *
 * # Safety
 * `rgb` and `trimap` must point to buffers of the sizes above; `out` must be
 * a valid pointer.
 */
enum PccStatus pcc_problem_new(size_t width,
                               size_t height,
                               const uint8_t *rgb,
                               const uint8_t *trimap,
                               struct PccProblem **out);

/**
 * Attaches a ground-truth mask (`width * height` bytes; 0 background, 255
 * foreground, other values ignored).
 *
 * # Safety
 * `problem` must come from [`pcc_problem_new`]; `gt` must hold
 * `width * height` bytes.
 */
enum PccStatus pcc_problem_set_ground_truth(struct PccProblem *problem, const uint8_t *gt);

/**
 * # Safety
 * `problem` must be null or come from [`pcc_problem_new`], and not be used
 * afterwards.
 */
void pcc_problem_free(struct PccProblem *problem);

struct PccSegmentOptions pcc_segment_options_default(void);

/**
 * # Safety
 * `problem` must come from [`pcc_problem_new`]; `options` may be null for
 * defaults; `out` must be a valid pointer.
 */
enum PccStatus pcc_segment(const struct PccProblem *problem,
                           const struct PccSegmentOptions *options,
                           struct PccSegmentation **out);

/**
 * Number of pixels in the mask.
 *
 * # Safety
 * `seg` must be null or come from [`pcc_segment`].
 */
size_t pcc_segmentation_len(const struct PccSegmentation *seg);

/**
 * Copies the 0/255 mask into `out`, which must hold `len` bytes with `len`
 * equal to [`pcc_segmentation_len`].
 *
 * # Safety
 * `seg` must come from [`pcc_segment`]; `out` must be writable for `len` bytes.
 */
enum PccStatus pcc_segmentation_mask(const struct PccSegmentation *seg, uint8_t *out, size_t len);

/**
 * Alpha of the graph used, or NaN when no graph was built.
 *
 * # Safety
 * `seg` must be null or come from [`pcc_segment`].
 */
double pcc_segmentation_alpha(const struct PccSegmentation *seg);

/**
 * # Safety
 * `seg` must be null or come from [`pcc_segment`].
 */
size_t pcc_segmentation_rounds(const struct PccSegmentation *seg);

/**
 * # Safety
 * `seg` must be null or come from [`pcc_segment`], and not be used afterwards.
 */
void pcc_segmentation_free(struct PccSegmentation *seg);

/**
 * Error rate of a 0/255 mask over the unlabeled pixels, against the ground
 * truth attached to `problem`.
 *
 * # Safety
 * `problem` must come from [`pcc_problem_new`]; `mask` must hold one byte per
 * pixel; `out` must be a valid pointer.
 */
enum PccStatus pcc_error_rate(const struct PccProblem *problem, const uint8_t *mask, double *out);

/**
 * Separability index of the k-NN graph under `lambda` (null for all ones),
 * calibrated against the unweighted graph.
 *
 * # Safety
 * `problem` must come from [`pcc_problem_new`]; `lambda` null or
 * `PCC_FEATURE_COUNT` values; `out` must be a valid pointer.
 */
enum PccStatus pcc_index(const struct PccProblem *problem,
                         size_t k,
                         const double *lambda,
                         struct PccIndex *out);

struct PccGaOptions pcc_ga_options_default(void);

/**
 * Searches weights maximizing alpha at fixed `k`. Writes
 * `PCC_FEATURE_COUNT` weights to `lambda_out` and the best alpha to
 * `alpha_out` (which may be null).
 *
 * # Safety
 * `problem` must come from [`pcc_problem_new`]; `options` may be null;
 * `lambda_out` must be writable for `PCC_FEATURE_COUNT` values.
 */
enum PccStatus pcc_optimize(const struct PccProblem *problem,
                            size_t k,
                            const struct PccGaOptions *options,
                            double *lambda_out,
                            double *alpha_out);

/**
 * Exponent calibrating a baseline phi to alpha = 0.5; NaN if `baseline_phi`
 * is outside (0, 1].
 */
double pcc_sigma(double baseline_phi);

double pcc_alpha(double phi, double sigma);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCCSEG_H */
