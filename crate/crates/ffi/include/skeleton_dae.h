#ifndef SKELETON_DAE_H
#define SKELETON_DAE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkdStatus {
  SKD_STATUS_OK = 0,
  SKD_STATUS_NULL_POINTER = 1,
  SKD_STATUS_INVALID_ARGUMENT = 2,
  SKD_STATUS_PARSE_ERROR = 3,
  SKD_STATUS_WRONG_CHAIN_KIND = 4,
  SKD_STATUS_NUMERICAL = 5,
  SKD_STATUS_BUFFER_TOO_SMALL = 6,
  SKD_STATUS_PANIC = 7,
} SkdStatus;

typedef enum SkdChainKind {
  SKD_CHAIN_KIND_REGULAR = 0,
  SKD_CHAIN_KIND_DEGENERATE = 1,
} SkdChainKind;

typedef enum SkdStability {
  SKD_STABILITY_STABLE = 0,
  SKD_STABILITY_UNSTABLE = 1,
  SKD_STABILITY_INDETERMINATE = 2,
} SkdStability;

// Skeleton chain of a square operator.
typedef struct SkdChain SkdChain;

// Vector-valued forcing term.
typedef struct SkdSignal SkdSignal;

// Sampled solution.
typedef struct SkdTrajectory SkdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating if needed. Returns the length of the
// full message excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `cap` bytes.
size_t skd_last_error_message(char *buf, size_t cap);

// Builds the skeleton chain of the `n × n` row-major matrix `b`.
//
// # Safety
// `b` must point to `n*n` doubles; `out` must be a valid pointer.
enum SkdStatus skd_chain_build(const double *b, size_t n, double tol, struct SkdChain **out);

// # Safety
// `chain` must be null or a handle from [`skd_chain_build`] not yet freed.
void skd_chain_free(struct SkdChain *chain);

// Chain length `p` and classification.
//
// # Safety
// `chain` must be a live handle; `length` and `kind` may be null.
enum SkdStatus skd_chain_info(const struct SkdChain *chain,
                              size_t *length,
                              enum SkdChainKind *kind);

// Dimensions `n₀ > n₁ > … > n_p` of the chain spaces.
//
// # Safety
// `chain` must be a live handle; `buf` must be valid for `cap` values.
enum SkdStatus skd_chain_dims(const struct SkdChain *chain, size_t *buf, size_t cap, size_t *len);

// The `n_p × n` regularizing map, row-major.
//
// # Safety
// `chain` must be a live handle; `buf` must be valid for `cap` values.
enum SkdStatus skd_chain_projector(const struct SkdChain *chain,
                                   double *buf,
                                   size_t cap,
                                   size_t *len);

// Stability of the reduced flow. Fails with `WrongChainKind` for
// degenerate chains.
//
// # Safety
// `chain` must be a live handle; `verdict` must be valid; `abscissa` may be null.
enum SkdStatus skd_chain_stability(const struct SkdChain *chain,
                                   enum SkdStability *verdict,
                                   double *abscissa);

// Parses a forcing expression with `dim` components separated by `;`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid.
enum SkdStatus skd_signal_parse(const char *text, size_t dim, struct SkdSignal **out);

// # Safety
// `signal` must be null or a handle from [`skd_signal_parse`] not yet freed.
void skd_signal_free(struct SkdSignal *signal);

// Writes the `order`-th derivative at `t` into `buf[0..dim]`.
//
// # Safety
// `signal` must be a live handle; `buf` must be valid for `cap` values.
enum SkdStatus skd_signal_eval(const struct SkdSignal *signal,
                               double t,
                               size_t order,
                               double *buf,
                               size_t cap);

// Solves `B·x′ = x + f(t)` on `[0, t_end]` for the operator the chain was
// built from. Regular chains need `c0` with `n_p` entries; degenerate
// chains ignore it and accept null.
//
// # Safety
// `chain` and `signal` must be live handles; `c0` must be valid for
// `c0_len` values; `out` must be valid.
enum SkdStatus skd_solve(const struct SkdChain *chain,
                         const struct SkdSignal *signal,
                         const double *c0,
                         size_t c0_len,
                         double t_end,
                         double step,
                         struct SkdTrajectory **out);

// # Safety
// `traj` must be null or a handle from [`skd_solve`] not yet freed.
void skd_trajectory_free(struct SkdTrajectory *traj);

// Number of samples, state dimension and the largest equation residual.
//
// # Safety
// `traj` must be a live handle; output pointers may be null.
enum SkdStatus skd_trajectory_info(const struct SkdTrajectory *traj,
                                   size_t *points,
                                   size_t *dim,
                                   double *residual_max);

// # Safety
// `traj` must be a live handle; `buf` must be valid for `cap` values.
enum SkdStatus skd_trajectory_times(const struct SkdTrajectory *traj,
                                    double *buf,
                                    size_t cap,
                                    size_t *len);

// States as a `points × dim` row-major array.
//
// # Safety
// `traj` must be a live handle; `buf` must be valid for `cap` values.
enum SkdStatus skd_trajectory_states(const struct SkdTrajectory *traj,
                                     double *buf,
                                     size_t cap,
                                     size_t *len);

// Classical consistency of `x0` for `B·x′ = x + f`: `*consistent` is 1 when
// `x0 + f(0)` is orthogonal to `ker Bᵀ` within `tol`.
//
// # Safety
// `b` must point to `n*n` doubles and `x0` to `n`; `signal` must be a live
// handle; `consistent` must be valid; `defect` may be null.
enum SkdStatus skd_check_consistency(const double *b,
                                     size_t n,
                                     const double *x0,
                                     const struct SkdSignal *signal,
                                     double tol,
                                     int32_t *consistent,
                                     double *defect);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKELETON_DAE_H */
