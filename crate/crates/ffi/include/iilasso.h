#ifndef IILASSO_H
#define IILASSO_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum IilStatus {
  IIL_STATUS_OK = 0,
  IIL_STATUS_NULL_POINTER = 1,
  IIL_STATUS_INVALID_ARGUMENT = 2,
  IIL_STATUS_DIMENSION_MISMATCH = 3,
  IIL_STATUS_INVALID_DATA = 4,
  IIL_STATUS_NUMERICAL = 5,
  IIL_STATUS_BUFFER_TOO_SMALL = 6,
  IIL_STATUS_INTERNAL = 7,
} IilStatus;

typedef enum IilTask {
  IIL_TASK_REGRESSION = 0,
  IIL_TASK_CLASSIFICATION = 1,
} IilTask;

typedef enum IilSimilarity {
  IIL_SIMILARITY_SQUARED = 0,
  IIL_SIMILARITY_ABSOLUTE = 1,
  IIL_SIMILARITY_RATIO = 2,
  IIL_SIMILARITY_GROUP = 3,
} IilSimilarity;

/*
 Opaque dataset handle.
 */
typedef struct IilDataset IilDataset;

/*
 Opaque fit handle.
 */
typedef struct IilFit IilFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *iil_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *iil_version(void);

/*
 `sgn(z)·max(|z| − gamma, 0)`. Returns NaN for negative or NaN `gamma`.
 */
double iil_soft_threshold(double z, double gamma);

/*
 Creates a dataset from a row-major `n × p` design `x` and response `y`.

 # Safety
 `x` must point to `n*p` doubles, `y` to `n` doubles and `out` to a
 writable handle slot.
 */
enum IilStatus iil_dataset_new(const double *x,
                               const double *y,
                               size_t n,
                               size_t p,
                               enum IilTask task,
                               bool standardize,
                               struct IilDataset **out);

/*
 Draws the block-correlated synthetic design (standardized). `coef`
 holds `b` values; `beta_star_out`, when not null, receives the `p`
 raw-scale true coefficients.

 # Safety
 Pointers must be valid for the stated lengths.
 */
enum IilStatus iil_generate_synthetic(size_t n,
                                      size_t b,
                                      size_t q,
                                      double rho,
                                      const double *coef,
                                      double noise_sd,
                                      uint64_t seed,
                                      struct IilDataset **out,
                                      double *beta_star_out);

/*
 # Safety
 `ds` must come from this library and not be used afterwards.
 */
void iil_dataset_free(struct IilDataset *ds);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t iil_dataset_n(const struct IilDataset *ds);

/*
 Number of feature columns, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t iil_dataset_p(const struct IilDataset *ds);

/*
 Fits at one `(lambda, alpha)`. `group_labels` (length `p`) is required
 for `IIL_SIMILARITY_GROUP` and must be null otherwise. `tol <= 0` and
 `max_sweeps == 0` select the defaults. The task of `ds` decides between
 least squares and logistic regression. A fit that stops before
 converging is still returned with status OK; query
 `iil_fit_converged`.

 # Safety
 `ds` must be a live handle, `group_labels` null or valid for `p`
 entries and `out` writable.
 */
enum IilStatus iil_fit(const struct IilDataset *ds,
                       double lambda,
                       double alpha,
                       enum IilSimilarity similarity,
                       const size_t *group_labels,
                       double tol,
                       size_t max_sweeps,
                       struct IilFit **out);

/*
 # Safety
 `fit` must come from this library and not be used afterwards.
 */
void iil_fit_free(struct IilFit *fit);

/*
 Copies the standardized-scale coefficients into `out` (capacity `len`).
 Fails with `BUFFER_TOO_SMALL` when `len < p`.

 # Safety
 `fit` must be a live handle and `out` valid for `len` writes.
 */
enum IilStatus iil_fit_beta(const struct IilFit *fit, double *out, size_t len);

/*
 Intercept (0 for least squares, NaN for a null handle).

 # Safety
 `fit` must be null or a live handle.
 */
double iil_fit_intercept(const struct IilFit *fit);

/*
 # Safety
 `fit` must be null or a live handle.
 */
bool iil_fit_converged(const struct IilFit *fit);

/*
 Largest stationarity violation at the returned coefficients.

 # Safety
 `fit` must be null or a live handle.
 */
double iil_fit_kkt_residual(const struct IilFit *fit);

/*
 Penalized objective at the returned coefficients.

 # Safety
 `fit` must be null or a live handle.
 */
double iil_fit_objective(const struct IilFit *fit);

/*
 Serializes the fit as versioned JSON. Release the string with
 `iil_string_free`.

 # Safety
 `fit` must be a live handle and `out` writable.
 */
enum IilStatus iil_fit_to_json(const struct IilFit *fit, char **out);

/*
 # Safety
 `s` must come from `iil_fit_to_json` and not be used afterwards.
 */
void iil_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IILASSO_H */
