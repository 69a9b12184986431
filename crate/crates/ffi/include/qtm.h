#ifndef QTM_H
#define QTM_H

#include <stddef.h>
#include <stdint.h>

// Result code of every exported function.
typedef enum QtmStatus {
  QTM_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or a buffer of the wrong size.
  QTM_STATUS_INVALID_ARGUMENT = 1,
  // Rejected grid, packet, pulse or configuration.
  QTM_STATUS_INVALID_PARAMETER = 2,
  // The state reached the edge of the box.
  QTM_STATUS_BOUNDARY_CONTAMINATION = 3,
  // Two states on different grids.
  QTM_STATUS_GRID_MISMATCH = 4,
  QTM_STATUS_IO = 5,
  // Any other failure, including a caught panic.
  QTM_STATUS_INTERNAL = 6,
} QtmStatus;

// Spatial grid handle.
typedef struct QtmGrid QtmGrid;

// Completed run handle.
typedef struct QtmRun QtmRun;

// Wave function handle.
typedef struct QtmWave QtmWave;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *qtm_last_error_message(void);

// Library version as a static string.
const char *qtm_version(void);

// Periodic grid of `n` points per axis on `[x_min, x_max)` in `dim` = 1 or 2
// dimensions.
//
// # Safety
// `out` must be valid for writes.
enum QtmStatus qtm_grid_new(size_t dim, double x_min, double x_max, size_t n, struct QtmGrid **out);

// # Safety
// `grid` must be null or come from this library and not be used afterwards.
void qtm_grid_free(struct QtmGrid *grid);

// Number of lattice points, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t qtm_grid_len(const struct QtmGrid *grid);

// Normalized Gaussian line packet centred at `center` moving with `k`.
//
// # Safety
// `grid` must be a live 1D handle and `out` valid for writes.
enum QtmStatus qtm_wave_gaussian(const struct QtmGrid *grid,
                                 double sigma,
                                 double k,
                                 double center,
                                 struct QtmWave **out);

// Normalized Gaussian ring of radius `radius` expanding with `k`.
//
// # Safety
// `grid` must be a live 2D handle and `out` valid for writes.
enum QtmStatus qtm_wave_ring(const struct QtmGrid *grid,
                             double radius,
                             double sigma,
                             double k,
                             struct QtmWave **out);

// Independent copy of `wave`.
//
// # Safety
// `wave` must be a live handle and `out` valid for writes.
enum QtmStatus qtm_wave_clone(const struct QtmWave *wave, struct QtmWave **out);

// # Safety
// `wave` must be null or come from this library and not be used afterwards.
void qtm_wave_free(struct QtmWave *wave);

// Number of amplitudes, or 0 for a null handle.
//
// # Safety
// `wave` must be null or a live handle.
size_t qtm_wave_len(const struct QtmWave *wave);

// # Safety
// `wave` must be a live handle and `out` valid for writes.
enum QtmStatus qtm_wave_time(const struct QtmWave *wave, double *out);

// L2 norm `√∫|ψ|²`.
//
// # Safety
// `wave` must be a live handle and `out` valid for writes.
enum QtmStatus qtm_wave_norm(const struct QtmWave *wave, double *out);

// Copies the amplitudes as interleaved `re, im` pairs into `buf`, which must
// hold exactly `2 * qtm_wave_len(wave)` doubles. Row-major in 2D.
//
// # Safety
// `buf` must be valid for `len` writes.
enum QtmStatus qtm_wave_amplitudes(const struct QtmWave *wave, double *buf, size_t len);

// Exact free evolution over `duration` in place, with the boundary guard.
// The state is left unchanged on failure.
//
// # Safety
// `wave` must be a live handle.
enum QtmStatus qtm_wave_evolve_free(struct QtmWave *wave, double duration);

// Instantaneous kick `ψ → ψ e^{-iλ|ψ|²}` in place.
//
// # Safety
// `wave` must be a live handle.
enum QtmStatus qtm_wave_kick(struct QtmWave *wave, double lambda);

// Density correlation `N = ∫ρ₀ρ / sqrt(∫ρ₀² ∫ρ²)` of two states on the same
// grid.
//
// # Safety
// Both handles must be live and `out` valid for writes.
enum QtmStatus qtm_norm_correlation(const struct QtmWave *reference,
                                    const struct QtmWave *wave,
                                    double *out);

// Threshold estimate for a line packet.
//
// # Safety
// `out` must be valid for writes.
enum QtmStatus qtm_lambda_min_1d(double sigma, double k, double *out);

// Threshold estimate for a ring.
//
// # Safety
// `out` must be valid for writes.
enum QtmStatus qtm_lambda_min_2d(double radius, double sigma, double k, double *out);

// Writes `wave` as a binary QTMW snapshot.
//
// # Safety
// `wave` must be a live handle and `path` a nul-terminated string.
enum QtmStatus qtm_wave_save(const struct QtmWave *wave, const char *path);

// Reads a binary QTMW snapshot.
//
// # Safety
// `path` must be a nul-terminated string and `out` valid for writes.
enum QtmStatus qtm_wave_load(const char *path, struct QtmWave **out);

// Loads a run configuration file and runs it to completion.
//
// # Safety
// `path` must be a nul-terminated string and `out` valid for writes.
enum QtmStatus qtm_run_config(const char *path, struct QtmRun **out);

// # Safety
// `run` must be null or come from this library and not be used afterwards.
void qtm_run_free(struct QtmRun *run);

// Echo peak `N` and its time, and whether it clears the free baseline by
// the echo threshold (1) or not (0). Any output pointer may be null.
//
// # Safety
// `run` must be a live handle; non-null outputs must be valid for writes.
enum QtmStatus qtm_run_echo(const struct QtmRun *run, double *peak, double *time, int32_t *present);

// Number of `N(t)` samples, or 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle.
size_t qtm_run_sample_count(const struct QtmRun *run);

// Copies sample times and `N(t)` into arrays of exactly
// `qtm_run_sample_count(run)` entries.
//
// # Safety
// `times` and `norm_corr` must be valid for `len` writes.
enum QtmStatus qtm_run_samples(const struct QtmRun *run,
                               double *times,
                               double *norm_corr,
                               size_t len);

// Copy of the state at the end of the run.
//
// # Safety
// `run` must be a live handle and `out` valid for writes.
enum QtmStatus qtm_run_final_state(const struct QtmRun *run, struct QtmWave **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QTM_H */
