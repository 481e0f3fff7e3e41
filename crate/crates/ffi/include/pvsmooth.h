#ifndef PVSMOOTH_H
#define PVSMOOTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum PvsStatus {
  PVS_STATUS_OK = 0,
  PVS_STATUS_NULL_POINTER = 1,
  PVS_STATUS_INVALID_UTF8 = 2,
  PVS_STATUS_CONFIG = 3,
  PVS_STATUS_INPUT = 4,
  /**
   * The LP did not reach an optimum.
   */
  PVS_STATUS_SOLVER = 5,
  /**
   * The dispatch failed validation.
   */
  PVS_STATUS_INVALID = 6,
  PVS_STATUS_IO = 7,
  PVS_STATUS_BUFFER_TOO_SMALL = 8,
  PVS_STATUS_PANIC = 9,
} PvsStatus;

/**
 * Series selector for [`pvs_solution_series`].
 */
typedef enum PvsSeries {
  PVS_SERIES_PV = 0,
  PVS_SERIES_GRID = 1,
  PVS_SERIES_BATTERY = 2,
  PVS_SERIES_ENERGY = 3,
  PVS_SERIES_CURTAILED = 4,
  PVS_SERIES_DIESEL = 5,
} PvsSeries;

/**
 * Opaque run configuration.
 */
typedef struct PvsConfig PvsConfig;

/**
 * Opaque solved case.
 */
typedef struct PvsSolution PvsSolution;

/**
 * Ratings of a solved case. Absent components are NaN.
 */
typedef struct PvsSizing {
  /**
   * kW
   */
  double battery_power;
  /**
   * kWh
   */
  double battery_energy;
  /**
   * kW
   */
  double diesel_power;
  /**
   * kW
   */
  double max_curtailed;
} PvsSizing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *pvs_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pvs_version(void);

/**
 * Configuration with every field at its default.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PvsStatus pvs_config_default(struct PvsConfig **out);

/**
 * Parses a TOML configuration. Relative weather paths resolve against the
 * working directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PvsStatus pvs_config_from_toml(const char *toml, struct PvsConfig **out);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PvsStatus pvs_config_load(const char *path, struct PvsConfig **out);

/**
 * Overrides the synthetic weather seed.
 *
 * # Safety
 * `config` must come from a `pvs_config_*` constructor.
 */
enum PvsStatus pvs_config_set_seed(struct PvsConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be null or come from a `pvs_config_*` constructor, and must
 * not be used afterwards.
 */
void pvs_config_free(struct PvsConfig *config);

/**
 * Solves one case on the configured weather.
 *
 * # Safety
 * `config` must be a live handle, `case_name` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum PvsStatus pvs_solve_case(const struct PvsConfig *config,
                              const char *case_name,
                              struct PvsSolution **out);

/**
 * Solves one case on a caller-supplied contiguous PV series (kW, one value
 * per step of the configured length).
 *
 * # Safety
 * `p_pv` must point to `len` doubles; other pointers as for
 * [`pvs_solve_case`].
 */
enum PvsStatus pvs_solve_series(const struct PvsConfig *config,
                                const char *case_name,
                                const double *p_pv,
                                size_t len,
                                struct PvsSolution **out);

/**
 * Number of optimized steps.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum PvsStatus pvs_solution_len(const struct PvsSolution *solution, size_t *out);

/**
 * Discounted net benefit, $.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum PvsStatus pvs_solution_net_benefit(const struct PvsSolution *solution, double *out);

/**
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum PvsStatus pvs_solution_sizing(const struct PvsSolution *solution, struct PvsSizing *out);

/**
 * 1 if every constraint check passed, else 0.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum PvsStatus pvs_solution_is_valid(const struct PvsSolution *solution, int32_t *out);

/**
 * Copies a series into `buf`. `*written` receives the series length, which
 * is 0 for series absent from the case. Fails with `BufferTooSmall` (and
 * still sets `*written`) when `capacity` is short.
 *
 * # Safety
 * `buf` must hold `capacity` doubles (may be null when `capacity` is 0);
 * other pointers as above.
 */
enum PvsStatus pvs_solution_series(const struct PvsSolution *solution,
                                   enum PvsSeries which,
                                   double *buf,
                                   size_t capacity,
                                   size_t *written);

/**
 * # Safety
 * `solution` must be null or a live handle, and must not be used
 * afterwards.
 */
void pvs_solution_free(struct PvsSolution *solution);

/**
 * Full run: solves the configured cases and writes every output file into
 * `output_dir`. Returns `Invalid` when a case failed to solve or validate;
 * the files are written either way.
 *
 * # Safety
 * `config` must be a live handle and `output_dir` a NUL-terminated string.
 */
enum PvsStatus pvs_run(const struct PvsConfig *config, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PVSMOOTH_H */
