#ifndef PLANAR_POSE_H
#define PLANAR_POSE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_INPUT = 2,
  PP_STATUS_DEGENERATE = 3,
  PP_STATUS_ROBUST_FAILURE = 4,
  PP_STATUS_NO_SOLUTION = 5,
  PP_STATUS_BUFFER_TOO_SMALL = 6,
  PP_STATUS_PANIC = 7,
} PpStatus;

/**
 * Opaque estimator settings.
 */
typedef struct PpEstimator PpEstimator;

/**
 * A correspondence in normalized image coordinates.
 */
typedef struct PpCorrespondence {
  double q1x;
  double q1y;
  double q2x;
  double q2y;
} PpCorrespondence;

/**
 * Planar pose: yaw `alpha` and translation direction `beta`, radians.
 */
typedef struct PpPose {
  double alpha;
  double beta;
} PpPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *pp_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *pp_status_string(enum PpStatus status);

/**
 * New estimator with default settings. Release with [`pp_estimator_free`].
 */
struct PpEstimator *pp_estimator_new(void);

/**
 * Frees an estimator; null is ignored.
 */
void pp_estimator_free(struct PpEstimator *est);

/**
 * Sampson-distance inlier threshold, squared normalized units.
 */
enum PpStatus pp_estimator_set_threshold(struct PpEstimator *est, double threshold);

enum PpStatus pp_estimator_set_max_iterations(struct PpEstimator *est, size_t iterations);

enum PpStatus pp_estimator_set_confidence(struct PpEstimator *est, double confidence);

enum PpStatus pp_estimator_set_seed(struct PpEstimator *est, uint64_t seed);

/**
 * Fraction of points held out for candidate selection, in `[0, 0.5]`. Applies
 * to both the optimal solver and the robust refits.
 */
enum PpStatus pp_estimator_set_holdout_fraction(struct PpEstimator *est, double fraction);

enum PpStatus pp_estimator_set_local_optimization(struct PpEstimator *est, bool enabled);

enum PpStatus pp_estimator_set_min_inliers(struct PpEstimator *est, size_t min_inliers);

/**
 * Least-squares optimal pose from at least three points. `out_cost` may be
 * null.
 */
enum PpStatus pp_estimator_solve_optimal(struct PpEstimator *est,
                                         const struct PpCorrespondence *pts,
                                         size_t len,
                                         struct PpPose *out_pose,
                                         double *out_cost);

/**
 * Robust pose. `inlier_mask` may be null; otherwise it must hold `len`
 * bytes and receives 1 for inliers and 0 for outliers. `out_inliers` may be
 * null.
 */
enum PpStatus pp_estimator_ransac(struct PpEstimator *est,
                                  const struct PpCorrespondence *pts,
                                  size_t len,
                                  struct PpPose *out_pose,
                                  uint8_t *inlier_mask,
                                  size_t *out_inliers);

/**
 * Linear baseline solver.
 */
enum PpStatus pp_solve_linear(const struct PpCorrespondence *pts,
                              size_t len,
                              struct PpPose *out_pose);

/**
 * Minimal solver. Writes up to `capacity` poses (at most four exist) and
 * their number to `out_count`. If `capacity` is too small, `out_count`
 * still receives the number needed and `BufferTooSmall` is returned.
 */
enum PpStatus pp_solve_two_point(const struct PpCorrespondence *c1,
                                 const struct PpCorrespondence *c2,
                                 struct PpPose *out_poses,
                                 size_t capacity,
                                 size_t *out_count);

/**
 * Planar essential matrix of `pose`, row-major into `out[9]`.
 */
enum PpStatus pp_essential_from_pose(const struct PpPose *pose, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANAR_POSE_H */
