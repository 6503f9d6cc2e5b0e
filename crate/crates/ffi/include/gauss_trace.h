#ifndef GAUSS_TRACE_H
#define GAUSS_TRACE_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum GtStatus {
  GT_STATUS_OK = 0,
  GT_STATUS_NULL_POINTER = 1,
  GT_STATUS_INVALID_ARGUMENT = 2,
  GT_STATUS_DIMENSION_MISMATCH = 3,
  GT_STATUS_UNSUPPORTED = 4,
  GT_STATUS_DEGENERATE = 5,
  GT_STATUS_NUMERICAL = 6,
  GT_STATUS_CONFIG = 7,
  GT_STATUS_IO = 8,
  /**
   * The run finished but at least one gated check failed.
   */
  GT_STATUS_GATE_FAILED = 9,
  GT_STATUS_PANIC = 10,
} GtStatus;

/**
 * A sublevel domain `{G < 0}` bound to the space it was built for.
 */
typedef struct GtDomain GtDomain;

/**
 * A Gaussian space `N(0, Q)` with diagonal `Q`.
 */
typedef struct GtSpace GtSpace;

/**
 * Integrand callback: `x` points to `dim` coordinates.
 */
typedef double (*GtIntegrand)(const double *x, size_t dim, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *gt_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gt_version(void);

/**
 * Builds `N(0, diag(eigenvalues))`.
 *
 * # Safety
 * `eigenvalues` must point to `dim` doubles and `out` must be writable.
 */
enum GtStatus gt_space_diagonal(const double *eigenvalues, size_t dim, struct GtSpace **out);

/**
 * # Safety
 * `space` must come from [`gt_space_diagonal`] or be null.
 */
void gt_space_free(struct GtSpace *space);

/**
 * # Safety
 * `space` must be a live handle and `out` writable.
 */
enum GtStatus gt_space_dim(const struct GtSpace *space, size_t *out);

/**
 * Halfspace `{⟨hhat, x⟩ > 0}`, `hhat` given by its `dim` coordinates.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum GtStatus gt_domain_halfspace(const struct GtSpace *space,
                                  const double *hhat,
                                  size_t dim,
                                  struct GtDomain **out);

/**
 * Centred ball `{|x| < r}`.
 *
 * # Safety
 * `space` must be live and `out` writable.
 */
enum GtStatus gt_domain_ball(const struct GtSpace *space, double radius, struct GtDomain **out);

/**
 * Ellipsoid `{Σ α_k x_k² < r²}`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum GtStatus gt_domain_ellipsoid(const struct GtSpace *space,
                                  const double *alphas,
                                  size_t dim,
                                  double radius,
                                  struct GtDomain **out);

/**
 * # Safety
 * `domain` must come from a `gt_domain_*` constructor or be null.
 */
void gt_domain_free(struct GtDomain *domain);

/**
 * `∫ f dρ` over `{G = 0}` by deterministic surface quadrature. `err` is
 * the difference between orders `resolution` and `2·resolution`.
 *
 * # Safety
 * Handles must be live, `f` non-null, outputs writable. The callback must
 * not unwind.
 */
enum GtStatus gt_surface_integral(const struct GtSpace *space,
                                  const struct GtDomain *domain,
                                  size_t resolution,
                                  GtIntegrand f,
                                  void *user,
                                  double *value,
                                  double *err);

/**
 * Monte Carlo estimate of the total surface measure `ρ({G = 0})` through
 * the divergence identity.
 *
 * # Safety
 * Handles must be live and outputs writable.
 */
enum GtStatus gt_rho_total(const struct GtSpace *space,
                           const struct GtDomain *domain,
                           uint64_t seed,
                           size_t samples,
                           double *mean,
                           double *stderr);

/**
 * Trace-space norm `‖f‖_{T_2}` of the Hermite mode of order `degree` along
 * `axis` of the boundary `{x_{h_index} = 0}`.
 *
 * # Safety
 * `space` must be live and `out` writable.
 */
enum GtStatus gt_halfspace_t2_norm(const struct GtSpace *space,
                                   size_t h_index,
                                   size_t axis,
                                   uint32_t degree,
                                   double *out);

/**
 * Runs the experiment described by the TOML file at `config_path`. A null
 * `out_dir` keeps the directory from the config. Returns
 * [`GtStatus::GateFailed`] when a gated check fails.
 *
 * # Safety
 * Strings must be NUL-terminated UTF-8.
 */
enum GtStatus gt_run_config(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAUSS_TRACE_H */
