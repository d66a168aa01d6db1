#ifndef REPSCEN_H
#define REPSCEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define RS_OK 0

/**
 * Invalid argument values (domain errors, infeasible designs).
 */
#define RS_ERR_DOMAIN 1

/**
 * Malformed input: null pointer, bad UTF-8, or invalid JSON.
 */
#define RS_ERR_INPUT 2

/**
 * Numerical failure inside the library.
 */
#define RS_ERR_NUMERICAL 3

/**
 * Opaque trial-design handle.
 */
typedef struct RsDesign RsDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Binomial distribution function: probability of `n` or fewer successes
 * in `big_n` trials of success probability `p`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
int32_t rs_binom_cdf(int64_t n, uint64_t big_n, double p, double *out);

/**
 * Solves `binom_cdf(n, big_n, 1 - eps) = target` for `eps`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
int32_t rs_binom_cdf_inv_eps(int64_t n, uint64_t big_n, double target, double *out);

/**
 * Level-q confidence quantity `Phi(q - zeta; m, 1 - eps)`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
int32_t rs_levelq_confidence(uint64_t q, uint64_t m, uint64_t zeta, double eps, double *out);

/**
 * Comparison bound for optimal-discarding strategies, clamped to [0, 1].
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
int32_t rs_psi_campi(uint64_t q, uint64_t zeta_high, uint64_t m, double eps, double *out);

/**
 * Exact probability that the unviolated count lands on `q` when solving
 * on `r` of `m` samples with support dimension `k`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
int32_t rs_selection_prob_exact(uint64_t r, uint64_t q, uint64_t m, uint64_t k, double *out);

/**
 * Builds a trial design from a JSON design spec; on success stores an
 * owned handle in `*out`.
 *
 * # Safety
 * `spec_json` must be a valid NUL-terminated string; `out` must be a
 * valid pointer to a handle slot.
 */
int32_t rs_design_new(const char *spec_json, struct RsDesign **out);

/**
 * Number of samples each trial solves on.
 *
 * # Safety
 * `handle` must be a live handle from `rs_design_new`; `out` valid.
 */
int32_t rs_design_r_star(const struct RsDesign *handle, uint64_t *out);

/**
 * Number of independent trials to run.
 *
 * # Safety
 * `handle` must be a live handle from `rs_design_new`; `out` valid.
 */
int32_t rs_design_n_trials(const struct RsDesign *handle, uint64_t *out);

/**
 * Target band for the unviolated count.
 *
 * # Safety
 * `handle` must be a live handle from `rs_design_new`; both out
 * pointers valid.
 */
int32_t rs_design_band(const struct RsDesign *handle, uint64_t *q_low, uint64_t *q_high);

/**
 * Per-trial probability that the count lands in the band.
 *
 * # Safety
 * `handle` must be a live handle from `rs_design_new`; `out` valid.
 */
int32_t rs_design_p_trial(const struct RsDesign *handle, double *out);

/**
 * Serializes the design (with its spec) to a JSON string owned by the
 * caller; release with `rs_string_free`.
 *
 * # Safety
 * `handle` must be a live handle from `rs_design_new`; `out` valid.
 */
int32_t rs_design_to_json(const struct RsDesign *handle, char **out);

/**
 * Releases a design handle. Null is a no-op.
 *
 * # Safety
 * `handle` must be null or a handle from `rs_design_new`, not yet freed.
 */
void rs_design_free(struct RsDesign *handle);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string from this library, not yet freed.
 */
void rs_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* REPSCEN_H */
