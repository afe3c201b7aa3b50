#ifndef NCBASIS_H
#define NCBASIS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the numeric values match the CLI exit codes where they
// overlap.
typedef enum {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_DOMAIN = 2,
  NC_STATUS_CERTIFICATION_FAILED = 3,
  NC_STATUS_NUMERIC_FAILURE = 4,
  NC_STATUS_BUFFER_SIZE = 5,
  NC_STATUS_IO = 6,
  NC_STATUS_PANIC = 7,
} NcStatus;

typedef enum {
  NC_SIDE_LEFT = 0,
  NC_SIDE_RIGHT = 1,
} NcSide;

typedef enum {
  NC_NORM_SIDE_PLAIN = 0,
  NC_NORM_SIDE_LEFT = 1,
  NC_NORM_SIDE_RIGHT = 2,
} NcNormSide;

// Opaque Haar system.
typedef struct NcHaarSystem NcHaarSystem;

// Opaque certification report.
typedef struct NcReport NcReport;

// Estimation effort for [`nc_certify`].
typedef struct {
  uintptr_t samples;
  uintptr_t restarts;
  uintptr_t iterations;
  uint64_t seed;
} NcStrategy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *nc_last_error_message(void);

// Standard Haar system for `alpha = num/den` (exact) at the given level.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
NcStatus nc_haar_new(uint64_t num, uint64_t den, uintptr_t level, NcSide side, NcHaarSystem **out);

// # Safety
// `h` must come from [`nc_haar_new`] and not have been freed.
void nc_haar_free(NcHaarSystem *h);

// Number of elements, 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
uintptr_t nc_haar_len(const NcHaarSystem *h);

// Matrix dimension `2^level`, 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
uintptr_t nc_haar_dim(const NcHaarSystem *h);

// # Safety
// `h` must be a live handle and `out` writable.
NcStatus nc_haar_gram_residual(const NcHaarSystem *h, double *out);

// Coefficients of `x` (dim × dim) into `coeffs` (`2 len` doubles).
//
// # Safety
// `x` holds `2 dim²` doubles and `coeffs` has room for `coeffs_len` doubles.
NcStatus nc_haar_analyze(const NcHaarSystem *h,
                         const double *x,
                         double *coeffs,
                         uintptr_t coeffs_len);

// `Σ c_j h_j` from `2 len` doubles into `out` (`2 dim²` doubles).
//
// # Safety
// `coeffs` holds `2 len` doubles and `out` has room for `out_len` doubles.
NcStatus nc_haar_synthesize(const NcHaarSystem *h,
                            const double *coeffs,
                            double *out,
                            uintptr_t out_len);

// Inductive bound of the system at its top level.
//
// # Safety
// `h` must be a live handle and `out` writable.
NcStatus nc_haar_theoretical_bound(const NcHaarSystem *h, double p, double *out);

// Plain Schatten-p norm.
//
// # Safety
// `x` holds `2 dim²` doubles and `out` is writable.
NcStatus nc_schatten_norm(uintptr_t dim, const double *x, double p, double *out);

// Norm of `x` weighted by `A_ν` for `alpha = num/den`, `ν = log2 dim`.
//
// # Safety
// `x` holds `2 dim²` doubles and `out` is writable.
NcStatus nc_weighted_norm(uintptr_t dim,
                          const double *x,
                          uint64_t num,
                          uint64_t den,
                          double p,
                          NcNormSide side,
                          double *out);

// Default estimation effort with the given seed.
NcStrategy nc_strategy_default(uint64_t seed);

// Certifies all scheduled partial sums. Returns `Ok` with a report even when
// some rows fail; query [`nc_report_passed`].
//
// # Safety
// `h` must be a live handle and `out` a valid handle slot.
NcStatus nc_certify(const NcHaarSystem *h,
                    double p,
                    NcNormSide side,
                    NcStrategy strategy,
                    NcReport **out);

// # Safety
// `r` must come from [`nc_certify`] and not have been freed.
void nc_report_free(NcReport *r);

// 1 when every row passes, 0 otherwise or for a null handle.
//
// # Safety
// `r` must be null or a live handle.
int32_t nc_report_passed(const NcReport *r);

// # Safety
// `r` must be null or a live handle.
uintptr_t nc_report_rows(const NcReport *r);

// Largest estimate in the report, NaN for a null handle.
//
// # Safety
// `r` must be null or a live handle.
double nc_report_max_estimate(const NcReport *r);

// CSV rendering; release with [`nc_string_free`].
//
// # Safety
// `r` must be a live handle and `out` a valid pointer slot.
NcStatus nc_report_csv(const NcReport *r, char **out);

// # Safety
// `s` must come from this library and not have been freed.
void nc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCBASIS_H */
