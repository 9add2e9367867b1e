#ifndef MFA_H
#define MFA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfaStatus {
  MFA_STATUS_OK = 0,
  MFA_STATUS_NULL_POINTER = 1,
  MFA_STATUS_INVALID_ARGUMENT = 2,
  MFA_STATUS_INFEASIBLE = 3,
  MFA_STATUS_NO_CONVERGENCE = 4,
  MFA_STATUS_STREAM = 5,
  MFA_STATUS_IO = 6,
  MFA_STATUS_PANIC = 7,
} MfaStatus;

/**
 * A matrix Fisher distribution on SO(3).
 */
typedef struct MfaDistribution MfaDistribution;

/**
 * Attitude filter state with its sensor models and random stream.
 */
typedef struct MfaFilter MfaFilter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *mfa_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfa_version(void);

/**
 * `log c(S)` for non-negative singular values `s[3]`.
 *
 * # Safety
 * `s` must point to 3 doubles and `out` to writable storage for one.
 */
enum MfaStatus mfa_log_c(const double *s, double *out);

/**
 * Creates `M(F)`; `det F` must be positive.
 *
 * # Safety
 * `f` must point to 9 doubles and `out` to writable storage for a handle.
 */
enum MfaStatus mfa_distribution_new(const double *f, struct MfaDistribution **out);

/**
 * Releases a distribution. Null is ignored.
 *
 * # Safety
 * `d` must be null or a handle from this library not yet freed.
 */
void mfa_distribution_free(struct MfaDistribution *d);

/**
 * Writes `F` (9 doubles, row-major).
 *
 * # Safety
 * `d` must be a live handle and `out` must hold 9 doubles.
 */
enum MfaStatus mfa_distribution_f(const struct MfaDistribution *d, double *out);

/**
 * # Safety
 * `d` must be a live handle and `out` must hold 3 doubles.
 */
enum MfaStatus mfa_distribution_singular_values(const struct MfaDistribution *d, double *out);

/**
 * # Safety
 * `d` must be a live handle and `out` must point to one double.
 */
enum MfaStatus mfa_distribution_log_c(const struct MfaDistribution *d, double *out);

/**
 * Writes the mode `U Vᵀ` (9 doubles, row-major).
 *
 * # Safety
 * `d` must be a live handle and `out` must hold 9 doubles.
 */
enum MfaStatus mfa_distribution_mode(const struct MfaDistribution *d, double *out);

/**
 * Log density at the rotation `r` (row-major) relative to Haar measure.
 *
 * # Safety
 * `d` must be a live handle, `r` must point to 9 doubles and `out` to one.
 */
enum MfaStatus mfa_distribution_log_density(const struct MfaDistribution *d,
                                            const double *r,
                                            double *out);

/**
 * Marginal density of body axis `axis` (0, 1 or 2) at the unit vector `r`,
 * relative to the uniform distribution on the sphere.
 *
 * # Safety
 * `d` must be a live handle, `r` must point to 3 doubles and `out` to one.
 */
enum MfaStatus mfa_distribution_marginal_density(const struct MfaDistribution *d,
                                                 uint32_t axis,
                                                 const double *r,
                                                 double *out);

/**
 * Draws `n` rotations into `out` (`9 n` doubles, one row-major matrix per
 * draw). The same seed gives the same draws.
 *
 * # Safety
 * `d` must be a live handle and `out` must hold `9 n` doubles.
 */
enum MfaStatus mfa_distribution_sample(const struct MfaDistribution *d,
                                       uint64_t seed,
                                       size_t n,
                                       double *out);

/**
 * Writes the seven sigma points (`63` doubles: mode first, then
 * `+θ1, −θ1, +θ2, −θ2, +θ3, −θ3`).
 *
 * # Safety
 * `d` must be a live handle and `out` must hold 63 doubles.
 */
enum MfaStatus mfa_sigma_points(const struct MfaDistribution *d, double sigma, double *out);

/**
 * Recovers the distribution whose sigma points have arithmetic mean `mean`.
 *
 * # Safety
 * `mean` must point to 9 doubles and `out` to writable storage for a handle.
 */
enum MfaStatus mfa_reconstruct(const double *mean, double sigma, struct MfaDistribution **out);

/**
 * Creates a filter at time `t0` with prior `M(F0)`, gyro noise covariance
 * and rate, and attitude noise `M(Fz)` and rate.
 *
 * # Safety
 * `f0`, `gyro_cov` and `fz` must each point to 9 doubles; `out` to writable
 * storage for a handle.
 */
enum MfaStatus mfa_filter_new(const double *f0,
                              double t0,
                              double sigma,
                              const double *gyro_cov,
                              double gyro_rate,
                              const double *fz,
                              double attitude_rate,
                              uint64_t seed,
                              struct MfaFilter **out);

/**
 * Releases a filter. Null is ignored.
 *
 * # Safety
 * `f` must be null or a handle from this library not yet freed.
 */
void mfa_filter_free(struct MfaFilter *f);

/**
 * Propagates over one gyro interval of length `h` with body rates
 * `omega_k` at its start and `omega_k1` at its end.
 *
 * # Safety
 * `f` must be a live handle; `omega_k` and `omega_k1` must point to 3
 * doubles each.
 */
enum MfaStatus mfa_filter_propagate(struct MfaFilter *f,
                                    const double *omega_k,
                                    const double *omega_k1,
                                    double h);

/**
 * Fuses an attitude measurement `rz` (row-major rotation).
 *
 * # Safety
 * `f` must be a live handle and `rz` must point to 9 doubles.
 */
enum MfaStatus mfa_filter_update(struct MfaFilter *f, const double *rz);

/**
 * Current time of the filter.
 *
 * # Safety
 * `f` must be a live handle and `out` must point to one double.
 */
enum MfaStatus mfa_filter_time(const struct MfaFilter *f, double *out);

/**
 * Copies the current estimate into a new distribution handle.
 *
 * # Safety
 * `f` must be a live handle and `out` writable storage for a handle.
 */
enum MfaStatus mfa_filter_estimate(const struct MfaFilter *f, struct MfaDistribution **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFA_H */
