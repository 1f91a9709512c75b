#ifndef HALLKIT_H
#define HALLKIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 2-5 match the command-line exit codes.
 */
typedef enum HkStatus {
  HK_STATUS_OK = 0,
  HK_STATUS_NULL_POINTER = 1,
  HK_STATUS_INVALID_INPUT = 2,
  HK_STATUS_NO_GAPPED_MULTIPLET = 3,
  HK_STATUS_TOLERANCE = 4,
  HK_STATUS_RESOURCE = 5,
  HK_STATUS_BUFFER_TOO_SMALL = 6,
  HK_STATUS_PANIC = 7,
} HkStatus;

/**
 * A Hamiltonian on a torus together with its twist lines.
 */
typedef struct HkModel HkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hk_version(void);

/**
 * Hofstadter model with nearest-neighbour repulsion `v_nn` (0 for none),
 * flux `flux_n/flux_m` per plaquette and `n` particles. Twist lines sit at
 * column and row 0.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HkStatus hk_model_hofstadter(size_t l1,
                                  size_t l2,
                                  int64_t flux_n,
                                  int64_t flux_m,
                                  double t,
                                  double v_nn,
                                  size_t n,
                                  struct HkModel **out);

/**
 * Hopping-free model with onsite energies `potentials[0..len]`.
 *
 * # Safety
 * `potentials` must point to `len` readable doubles; `out` must be writable.
 */
enum HkStatus hk_model_atomic(size_t l1,
                              size_t l2,
                              const double *potentials,
                              size_t len,
                              size_t n,
                              struct HkModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `m` must come from a `hk_model_*` constructor and not be freed twice.
 */
void hk_model_free(struct HkModel *m);

/**
 * Moves the twist lines to column `k1` and row `k2`.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum HkStatus hk_model_set_cut(struct HkModel *m, size_t k1, size_t k2);

/**
 * Dimension of the fixed-particle-number sector.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum HkStatus hk_model_dimension(const struct HkModel *m, size_t *out);

/**
 * Energies of the ground multiplet at twist (phi1, phi2). `q_hint = 0` lets
 * the detector choose q. Writes q energies into `energies` (capacity `cap`)
 * and q into `len`; fails with `BufferTooSmall` (len still set) if cap < q.
 *
 * # Safety
 * `m` must be a live handle, `energies` must hold `cap` doubles, `len` writable.
 */
enum HkStatus hk_ground_energies(const struct HkModel *m,
                                 double phi1,
                                 double phi2,
                                 size_t q_hint,
                                 double *energies,
                                 size_t cap,
                                 size_t *len);

/**
 * Chern number p, multiplet size q and averaged conductance p/(2πq) on an
 * n×n flux grid (refined once to 2n if integrality fails).
 *
 * # Safety
 * `m` must be a live handle and the three outputs writable.
 */
enum HkStatus hk_chern(const struct HkModel *m,
                       size_t grid,
                       size_t q_hint,
                       int64_t *p,
                       size_t *q,
                       double *sigma);

/**
 * Kubo-sum Hall conductance at twist (phi1, phi2). Needs the full spectrum.
 *
 * # Safety
 * `m` must be a live handle and `sigma` writable.
 */
enum HkStatus hk_kubo(const struct HkModel *m,
                      double phi1,
                      double phi2,
                      size_t q_hint,
                      double *sigma);

/**
 * Runs a config file through the harness, as `hallkit run` would, writing
 * its artifacts to the configured output directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum HkStatus hk_run_config(const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HALLKIT_H */
