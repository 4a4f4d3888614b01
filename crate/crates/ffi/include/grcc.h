/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef GRCC_H
#define GRCC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GrccStatus {
  GRCC_STATUS_OK = 0,
  GRCC_STATUS_NULL_POINTER = 1,
  GRCC_STATUS_INVALID_UTF8 = 2,
  GRCC_STATUS_USAGE = 3,
  GRCC_STATUS_PARSE = 4,
  GRCC_STATUS_ASSEMBLY = 5,
  GRCC_STATUS_SOLVER = 6,
  GRCC_STATUS_CERTIFICATION = 7,
  GRCC_STATUS_BUFFER_TOO_SMALL = 8,
  GRCC_STATUS_PANIC = 9,
} GrccStatus;

/**
 * Which closed form produced a safety factor.
 */
typedef enum GrccSafetyBranch {
  GRCC_SAFETY_BRANCH_MEAN_AND_SPREAD = 0,
  GRCC_SAFETY_BRANCH_SPREAD_ONLY = 1,
} GrccSafetyBranch;

typedef enum GrccFormulation {
  GRCC_FORMULATION_RLT = 0,
  GRCC_FORMULATION_CONE = 1,
} GrccFormulation;

typedef enum GrccFamily {
  GRCC_FAMILY_GAUSSIAN = 0,
  GRCC_FAMILY_LAPLACE = 1,
  GRCC_FAMILY_LOGISTIC = 2,
} GrccFamily;

/**
 * Opaque power case.
 */
typedef struct GrccCase GrccCase;

/**
 * Opaque study configuration.
 */
typedef struct GrccConfig GrccConfig;

/**
 * Opaque solved dispatch, with the prepared model it came from.
 */
typedef struct GrccDispatch GrccDispatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *grcc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *grcc_version(void);

/**
 * Safety factor k for risk level `eps` and radii `gamma1`, `gamma2`.
 *
 * # Safety
 * `k_out` must be valid for writes; `branch_out` may be NULL.
 */
enum GrccStatus grcc_safety_factor(double eps,
                                   double gamma1,
                                   double gamma2,
                                   double *k_out,
                                   enum GrccSafetyBranch *branch_out);

/**
 * Load a case file (MATPOWER `.m` or native TOML).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum GrccStatus grcc_case_load(const char *path, struct GrccCase **out);

/**
 * Parse case text held in memory.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum GrccStatus grcc_case_parse(const char *text, struct GrccCase **out);

/**
 * # Safety
 * `case` must be NULL or a handle from this library, freed at most once.
 */
void grcc_case_free(struct GrccCase *case_);

/**
 * Number of generators, buses and branches of a case.
 *
 * # Safety
 * `case` must be a valid handle; each output may be NULL.
 */
enum GrccStatus grcc_case_dims(const struct GrccCase *case_,
                               size_t *n_gen,
                               size_t *n_bus,
                               size_t *n_branch);

/**
 * Load a study config for `case`. A NULL `path` yields the defaults.
 *
 * # Safety
 * `path` must be NULL or NUL-terminated; `case` a valid handle; `out`
 * valid for writes.
 */
enum GrccStatus grcc_config_load(const char *path,
                                 const struct GrccCase *case_,
                                 struct GrccConfig **out);

/**
 * Parse config text held in memory.
 *
 * # Safety
 * As for [`grcc_config_load`], with `text` non-NULL.
 */
enum GrccStatus grcc_config_parse(const char *text,
                                  const struct GrccCase *case_,
                                  struct GrccConfig **out);

/**
 * Replace γ₁ and γ₂.
 *
 * # Safety
 * `cfg` must be a valid handle.
 */
enum GrccStatus grcc_config_set_gammas(struct GrccConfig *cfg, double gamma1, double gamma2);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library, freed at most once.
 */
void grcc_config_free(struct GrccConfig *cfg);

/**
 * Assemble and solve. A non-optimal solve returns `Solver` and no handle.
 *
 * # Safety
 * `case` and `cfg` must be valid handles; `out` valid for writes.
 */
enum GrccStatus grcc_solve(const struct GrccCase *case_,
                           const struct GrccConfig *cfg,
                           enum GrccFormulation formulation,
                           struct GrccDispatch **out);

/**
 * # Safety
 * `d` must be NULL or a handle from this library, freed at most once.
 */
void grcc_dispatch_free(struct GrccDispatch *d);

/**
 * Objective Z and the certification outcome of a dispatch.
 *
 * # Safety
 * `d` must be a valid handle; each output may be NULL.
 */
enum GrccStatus grcc_dispatch_summary(const struct GrccDispatch *d,
                                      double *objective,
                                      bool *certified,
                                      double *max_violation);

/**
 * Copy base points and participation factors into caller buffers of
 * length `len` each. `len` below the generator count yields
 * `BufferTooSmall`; query the count with [`grcc_case_dims`].
 *
 * # Safety
 * `d` must be a valid handle; `p` and `alpha` valid for `len` writes or NULL.
 */
enum GrccStatus grcc_dispatch_copy(const struct GrccDispatch *d,
                                   double *p,
                                   double *alpha,
                                   size_t len);

/**
 * Monte Carlo maximum violation probability of a dispatch, with scenarios
 * drawn from the config's nominal moments.
 *
 * # Safety
 * `d` must be a valid handle; `max_violation` valid for writes;
 * `std_error` may be NULL.
 */
enum GrccStatus grcc_dispatch_risk(const struct GrccDispatch *d,
                                   enum GrccFamily family,
                                   size_t samples,
                                   uint64_t seed,
                                   double *max_violation,
                                   double *std_error);

/**
 * Check that a case and config assemble, without solving.
 *
 * # Safety
 * `case` and `cfg` must be valid handles.
 */
enum GrccStatus grcc_check(const struct GrccCase *case_, const struct GrccConfig *cfg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRCC_H */
