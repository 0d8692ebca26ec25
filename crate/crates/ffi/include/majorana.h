#ifndef MAJORANA_H
#define MAJORANA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MjDisorder {
  MJ_DISORDER_NONE = 0,
  MJ_DISORDER_UNIFORM = 1,
  MJ_DISORDER_LOGISTIC = 2,
} MjDisorder;

/**
 * Status codes returned by every function.
 */
typedef enum MjStatus {
  MJ_STATUS_OK = 0,
  MJ_STATUS_NULL_POINTER = 1,
  MJ_STATUS_INVALID_ARGUMENT = 2,
  MJ_STATUS_NUMERICAL_FAILURE = 3,
  MJ_STATUS_OVER_LIMIT = 4,
  MJ_STATUS_BUFFER_TOO_SMALL = 5,
  MJ_STATUS_PANIC = 6,
} MjStatus;

/**
 * Opaque chain handle.
 */
typedef struct MjChain MjChain;

/**
 * Chain description. `seed` is used by uniform disorder, `y1` and `a` by
 * the logistic map; `realization` selects the disorder stream.
 */
typedef struct MjChainParams {
  size_t n;
  double mu;
  double eta;
  enum MjDisorder disorder;
  uint64_t seed;
  double y1;
  double a;
  uint64_t realization;
} MjChainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library, static storage.
 */
const char *mj_version(void);

/**
 * Copies the calling thread's last error message into `buf` (nul
 * terminated, truncated to `len`). Returns the full message length
 * excluding the terminator, 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mj_last_error_message(char *buf, size_t len);

/**
 * Builds a chain from parameters.
 *
 * # Safety
 * `params` must point to a valid `MjChainParams`; `out` to writable storage.
 */
enum MjStatus mj_chain_new(const struct MjChainParams *params, struct MjChain **out);

/**
 * Builds a chain with `J = 1` from explicit site potentials `mus[0..n]`.
 *
 * # Safety
 * `mus` must point to `n` doubles; `out` to writable storage.
 */
enum MjStatus mj_chain_from_potentials(const double *mus, size_t n, struct MjChain **out);

/**
 * Releases a chain. Null is ignored.
 *
 * # Safety
 * `chain` must come from this library and not be used afterwards.
 */
void mj_chain_free(struct MjChain *chain);

/**
 * Number of sites.
 *
 * # Safety
 * `chain` must be a live handle or null.
 */
enum MjStatus mj_chain_n(const struct MjChain *chain, size_t *n);

/**
 * Site potentials `μ_1..μ_N` into `buf` (length `len >= N`).
 *
 * # Safety
 * `chain` must be a live handle; `buf` must hold `len` doubles.
 */
enum MjStatus mj_chain_potential(const struct MjChain *chain, double *buf, size_t len);

/**
 * Williamson eigenvalues `λ_1 <= ... <= λ_N` into `buf` (length `len >= N`).
 *
 * # Safety
 * `chain` must be a live handle; `buf` must hold `len` doubles.
 */
enum MjStatus mj_chain_lambdas(const struct MjChain *chain, double *buf, size_t len);

/**
 * Ground-state splitting `δ = λ_1`.
 *
 * # Safety
 * `chain` must be a live handle; `out` writable.
 */
enum MjStatus mj_chain_splitting(const struct MjChain *chain, double *delta);

/**
 * `F(t)` by exact enumeration of all syndromes (N <= 12).
 *
 * # Safety
 * `chain` must be a live handle; `value` writable.
 */
enum MjStatus mj_exact_fidelity(const struct MjChain *chain, double t, double *value);

/**
 * Monte Carlo estimate of `F(t)`. The samples are determined by
 * `(seed, realization, t_index)`.
 *
 * # Safety
 * `chain` must be a live handle; `value` and `stderr` writable.
 */
enum MjStatus mj_monte_carlo_fidelity(const struct MjChain *chain,
                                      double t,
                                      size_t samples,
                                      uint64_t seed,
                                      uint64_t realization,
                                      uint64_t t_index,
                                      double *value,
                                      double *stderr);

/**
 * First time on `grid` (strictly increasing) with `F < f0`. With
 * `samples == 0` fidelities are exact, otherwise Monte Carlo. If no grid
 * point crosses, `time` is the last grid point and `censored` is set to 1.
 *
 * # Safety
 * `chain` must be a live handle; `grid` must hold `len` doubles; `time` and
 * `censored` writable.
 */
enum MjStatus mj_storage_time(const struct MjChain *chain,
                              const double *grid,
                              size_t len,
                              double f0,
                              size_t samples,
                              uint64_t seed,
                              uint64_t realization,
                              double *time,
                              int *censored);

/**
 * Effective localization length of the chain's potential (N >= 8).
 *
 * # Safety
 * `chain` must be a live handle; `xi` writable.
 */
enum MjStatus mj_xi_effective(const struct MjChain *chain, double *xi);

/**
 * Lyapunov exponent `ℓ(E)` over `n_sites` sites of the disorder stream
 * described by `params` (`params.n` is ignored).
 *
 * # Safety
 * `params` must point to a valid `MjChainParams`; `value` writable.
 */
enum MjStatus mj_lyapunov_exponent(const struct MjChainParams *params,
                                   size_t n_sites,
                                   double energy,
                                   double *value);

/**
 * Pfaffian of the antisymmetric `dim x dim` matrix stored row-major in `a`.
 *
 * # Safety
 * `a` must hold `dim * dim` doubles; `value` writable.
 */
enum MjStatus mj_pfaffian(const double *a, size_t dim, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAJORANA_H */
