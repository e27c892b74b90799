#ifndef CFREG_H
#define CFREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum CfregStatus {
  CFREG_STATUS_OK = 0,
  /**
   * Invalid argument or configuration.
   */
  CFREG_STATUS_USAGE = 1,
  /**
   * File missing, unreadable or malformed.
   */
  CFREG_STATUS_IO = 2,
  /**
   * Input too degenerate to register (empty, too few keypoints, ...).
   */
  CFREG_STATUS_DEGENERATE = 3,
  /**
   * A required pointer was null.
   */
  CFREG_STATUS_NULL_POINTER = 4,
  /**
   * An internal panic was caught.
   */
  CFREG_STATUS_PANIC = 5,
} CfregStatus;

/**
 * Opaque point cloud.
 */
typedef struct CfregCloud CfregCloud;

/**
 * Opaque registration result.
 */
typedef struct CfregResult CfregResult;

/**
 * Settings for CF and CFK.
 */
typedef struct CfregSolverConfig {
  /**
   * Feature-distance scale in the pair weight.
   */
  double beta;
  /**
   * Neighbors for normals and descriptors.
   */
  size_t k;
  /**
   * Lower bound on every pair weight, in [0, 1].
   */
  double weight_floor;
  /**
   * Keypoint surface-variation threshold.
   */
  double keypoint_threshold;
  /**
   * Keypoint suppression radius; 0 picks a multiple of the point spacing.
   */
  double keypoint_nms_radius;
  double keypoint_nms_spacing_factor;
  size_t keypoint_max;
  /**
   * Nonzero for single-threaded, bit-reproducible numerics.
   */
  int deterministic;
} CfregSolverConfig;

typedef struct CfregIcpConfig {
  double max_correspondence_distance;
  size_t max_iterations;
  double transformation_epsilon;
  double euclidean_fitness_epsilon;
  int deterministic;
} CfregIcpConfig;

/**
 * Flattened diagnostics. Fields that do not apply to the algorithm are 0.
 */
typedef struct CfregDiagnostics {
  double total_weight;
  uint64_t pair_count;
  double effective_pairs;
  double singular_values[3];
  int reflection_corrected;
  int ill_conditioned;
  size_t source_keypoints;
  size_t target_keypoints;
  size_t icp_iterations;
  int icp_converged;
  int icp_lost_correspondences;
  double icp_final_mse;
  double total_ms;
} CfregDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cfreg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cfreg_version(void);

struct CfregSolverConfig cfreg_solver_config_default(void);

struct CfregIcpConfig cfreg_icp_config_default(void);

/**
 * Copies `n` points from `xyz` (`3n` doubles, x y z per point) into a new cloud.
 *
 * # Safety
 * `xyz` must point to `3n` readable doubles (it may be null when `n` is 0) and
 * `out` to writable storage for one pointer.
 */
enum CfregStatus cfreg_cloud_from_xyz(const double *xyz, size_t n, struct CfregCloud **out);

/**
 * Reads a PLY or xyz file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CfregStatus cfreg_cloud_read(const char *path, struct CfregCloud **out);

/**
 * Number of points; 0 for a null handle.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t cfreg_cloud_len(const struct CfregCloud *cloud);

/**
 * Writes the points as `3 * len` doubles into `out`, which holds `capacity`
 * points.
 *
 * # Safety
 * `cloud` must be a live handle and `out` writable for `3 * capacity` doubles.
 */
enum CfregStatus cfreg_cloud_copy_xyz(const struct CfregCloud *cloud, double *out, size_t capacity);

/**
 * # Safety
 * `cloud` must be null or a handle not freed before.
 */
void cfreg_cloud_free(struct CfregCloud *cloud);

/**
 * Full-connection registration of `source` onto `target`. A null `config`
 * uses the defaults.
 *
 * # Safety
 * Handles must be live, `config` null or valid, `out` writable.
 */
enum CfregStatus cfreg_register_cf(const struct CfregCloud *source,
                                   const struct CfregCloud *target,
                                   const struct CfregSolverConfig *config,
                                   struct CfregResult **out);

/**
 * Keypoint-restricted registration. Fails with `CFREG_STATUS_DEGENERATE`
 * when either cloud has fewer than three keypoints.
 *
 * # Safety
 * As [`cfreg_register_cf`].
 */
enum CfregStatus cfreg_register_cfk(const struct CfregCloud *source,
                                    const struct CfregCloud *target,
                                    const struct CfregSolverConfig *config,
                                    struct CfregResult **out);

/**
 * Point-to-point ICP from `init` (16 row-major doubles; null for identity).
 *
 * # Safety
 * As [`cfreg_register_cf`]; `init` null or 16 readable doubles.
 */
enum CfregStatus cfreg_register_icp(const struct CfregCloud *source,
                                    const struct CfregCloud *target,
                                    const struct CfregIcpConfig *config,
                                    const double *init,
                                    struct CfregResult **out);

/**
 * Writes the estimated 4x4 transform, row-major, into `out[16]`.
 *
 * # Safety
 * `result` must be live and `out` writable for 16 doubles.
 */
enum CfregStatus cfreg_result_matrix(const struct CfregResult *result, double *out);

/**
 * # Safety
 * `result` must be live and `out` writable.
 */
enum CfregStatus cfreg_result_diagnostics(const struct CfregResult *result,
                                          struct CfregDiagnostics *out);

/**
 * # Safety
 * `result` must be null or a handle not freed before.
 */
void cfreg_result_free(struct CfregResult *result);

/**
 * `‖I − R_pred R_gtᵀ‖_F` for two row-major 3x3 rotations.
 *
 * # Safety
 * `r_gt` and `r_pred` must hold 9 doubles each; `out` must be writable.
 */
enum CfregStatus cfreg_rotation_accuracy(const double *r_gt, const double *r_pred, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFREG_H */
