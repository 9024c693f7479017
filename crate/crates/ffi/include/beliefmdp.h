#ifndef BELIEFMDP_H
#define BELIEFMDP_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum BmdpStatus {
  BMDP_STATUS_OK = 0,
  // Bad argument, including a null pointer or wrong length.
  BMDP_STATUS_INVALID_ARGUMENT = 1,
  // The model or a distribution failed validation.
  BMDP_STATUS_VALIDATION = 2,
  // A size guard refused the computation.
  BMDP_STATUS_RESOURCE_GUARD = 3,
  BMDP_STATUS_PARSE = 4,
  BMDP_STATUS_IO = 5,
  // Any other library error, or a caught panic.
  BMDP_STATUS_INTERNAL = 6,
} BmdpStatus;

// Opaque model handle.
typedef struct BmdpModel BmdpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *bmdp_last_error(void);

// Library version as a static NUL-terminated string.
const char *bmdp_version(void);

// Parses and validates a JSON model document.
//
// # Safety
// `json` must be a NUL-terminated string and `out_model` writable.
enum BmdpStatus bmdp_model_from_json(const char *json, struct BmdpModel **out_model);

// Loads and validates a JSON model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out_model` writable.
enum BmdpStatus bmdp_model_load(const char *path, struct BmdpModel **out_model);

// Releases a model handle; null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void bmdp_model_free(struct BmdpModel *model);

// Sizes of the embedded MDPII: unobservable states, observations, actions.
//
// # Safety
// `model` must be a live handle; each out-pointer may be null.
enum BmdpStatus bmdp_model_dims(const struct BmdpModel *model,
                                size_t *states,
                                size_t *observations,
                                size_t *actions);

// Discount declared by the model file.
//
// # Safety
// `model` must be a live handle and `out_alpha` writable.
enum BmdpStatus bmdp_model_discount(const struct BmdpModel *model, double *out_alpha);

// Optimal `T`-step expected discounted cost by finite-horizon dynamic
// programming. `prior` may be null for the file's prior.
//
// # Safety
// `model` must be a live handle, `prior` null or `prior_len` readable
// doubles, `out_value` writable.
enum BmdpStatus bmdp_finite_horizon_value(const struct BmdpModel *model,
                                          const double *prior,
                                          size_t prior_len,
                                          size_t horizon,
                                          double alpha,
                                          double *out_value);

// Same quantity by enumerating deterministic observation-history policies.
//
// # Safety
// As for [`bmdp_finite_horizon_value`].
enum BmdpStatus bmdp_brute_force_value(const struct BmdpModel *model,
                                       const double *prior,
                                       size_t prior_len,
                                       size_t horizon,
                                       double alpha,
                                       double *out_value);

// Monte Carlo mean and standard error of the finite-horizon optimal policy
// over `runs` trajectories; run `i` uses ChaCha8 seeded from `seed` on
// stream `i`.
//
// # Safety
// As for [`bmdp_finite_horizon_value`]; `out_mean` and `out_stderr` writable.
enum BmdpStatus bmdp_monte_carlo_optimal(const struct BmdpModel *model,
                                         const double *prior,
                                         size_t prior_len,
                                         size_t horizon,
                                         double alpha,
                                         size_t runs,
                                         uint64_t seed,
                                         double *out_mean,
                                         double *out_stderr);

// Total variation `½ Σ |a − b|` of two length-`n` weight vectors.
//
// # Safety
// `a` and `b` must point to `n` readable doubles; `out_tv` writable.
enum BmdpStatus bmdp_tv_distance(const double *a, const double *b, size_t n, double *out_tv);

// Kantorovich–Rubinshtein distance of two distributions on `n` points with
// the row-major `n × n` metric.
//
// # Safety
// `a`, `b` must point to `n` doubles, `metric` to `n * n`; `out_kr` writable.
enum BmdpStatus bmdp_kr_distance(const double *a,
                                 const double *b,
                                 size_t n,
                                 const double *metric,
                                 double *out_kr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELIEFMDP_H */
