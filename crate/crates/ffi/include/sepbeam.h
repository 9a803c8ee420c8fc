#ifndef SEPBEAM_H
#define SEPBEAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Values accepted by the `method` argument of [`sb_flops`].
 */
typedef enum SbFlopsMethod {
  SB_FLOPS_METHOD_MMSE_SAMPLE = 0,
  SB_FLOPS_METHOD_MMSE_LEMMA = 1,
  SB_FLOPS_METHOD_TMMSE = 2,
  SB_FLOPS_METHOD_KMMSE = 3,
} SbFlopsMethod;

/*
 Result code of every fallible call.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_DIMENSION_MISMATCH = 3,
  SB_STATUS_SINGULAR = 4,
  SB_STATUS_RANK_DEFICIENT = 5,
  SB_STATUS_DEGENERATE = 6,
  SB_STATUS_INTERNAL = 7,
  SB_STATUS_PANIC = 8,
} SbStatus;

/*
 Opaque block of received snapshots with the transmitted symbols.
 */
typedef struct SbBlock SbBlock;

/*
 Opaque source layout with signal and noise powers.
 */
typedef struct SbScenario SbScenario;

/*
 Complex number laid out as two doubles, real part first.
 */
typedef struct SbComplex {
  double re;
  double im;
} SbComplex;

/*
 Message describing the last failure on this thread, or NULL if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *sb_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

/*
 Builds a scenario of `r` sources with direction cosines `p[i]`, `q[i]` on
 an `n_h x n_v` array. Source powers are 1; noise power follows `snr_db`.

 # Safety
 `p` and `q` must point to `r` readable doubles; `out` must be writable.
 */
enum SbStatus sb_scenario_new(size_t n_h,
                              size_t n_v,
                              const double *p,
                              const double *q,
                              size_t r,
                              size_t desired_index,
                              double snr_db,
                              struct SbScenario **out);

/*
 # Safety
 `s` must come from [`sb_scenario_new`] and not be freed twice. NULL is ignored.
 */
void sb_scenario_free(struct SbScenario *s);

/*
 Number of array elements `n_h * n_v`.

 # Safety
 `s` must be a live scenario handle or NULL (returns 0).
 */
size_t sb_scenario_elements(const struct SbScenario *s);

/*
 Draws `k` QPSK snapshots for the scenario with a seeded generator.

 # Safety
 `s` must be a live scenario handle; `out` must be writable.
 */
enum SbStatus sb_block_synthesize(const struct SbScenario *s,
                                  size_t k,
                                  uint64_t seed,
                                  struct SbBlock **out);

/*
 # Safety
 `b` must come from [`sb_block_synthesize`] and not be freed twice. NULL is ignored.
 */
void sb_block_free(struct SbBlock *b);

/*
 Number of snapshots in the block.

 # Safety
 `b` must be a live block handle or NULL (returns 0).
 */
size_t sb_block_snapshots(const struct SbBlock *b);

/*
 Copies the desired source's transmitted symbols into `out` (length K).

 # Safety
 `b` must be a live block handle; `out` must hold `len` elements.
 */
enum SbStatus sb_block_desired_symbols(const struct SbBlock *b, struct SbComplex *out, size_t len);

/*
 Wiener filter from the scenario's exact statistics (length `n_h * n_v`).

 # Safety
 `s` must be a live scenario handle; `w` must hold `len` elements.
 */
enum SbStatus sb_mmse_analytic(const struct SbScenario *s, struct SbComplex *w, size_t len);

/*
 Wiener filter from the block's sample statistics (length `n_h * n_v`).

 # Safety
 `b` must be a live block handle; `w` must hold `len` elements.
 */
enum SbStatus sb_mmse_sample(const struct SbBlock *b, struct SbComplex *w, size_t len);

/*
 Regularized sub-array filters from the block's sample statistics.

 # Safety
 `b` must be a live block handle; `w_h` and `w_v` must hold `n_h` and `n_v`
 elements.
 */
enum SbStatus sb_kmmse(const struct SbBlock *b,
                       double rho,
                       struct SbComplex *w_h,
                       size_t n_h,
                       struct SbComplex *w_v,
                       size_t n_v);

/*
 Alternating sub-array MMSE on the block's sample statistics from a
 seeded random start. `iterations` and `converged` may be NULL.

 # Safety
 `b` must be a live block handle; `w_h` and `w_v` must hold `n_h` and `n_v`
 elements; non-NULL `iterations` and `converged` must be writable.
 */
enum SbStatus sb_tmmse(const struct SbBlock *b,
                       uint64_t seed,
                       double eps,
                       size_t max_iter,
                       struct SbComplex *w_h,
                       size_t n_h,
                       struct SbComplex *w_v,
                       size_t n_v,
                       size_t *iterations,
                       bool *converged);

/*
 Beamformer output `y[k] = w^H x[k]` for every snapshot. Pass the full
 filter in `w` (length `n_h * n_v`) or a separable one as `w_h` then `w_v`
 concatenated (length `n_h + n_v`) with `separable` set.

 # Safety
 `b` must be a live block handle; `w` must hold `w_len` elements and `y`
 must hold `y_len` elements.
 */
enum SbStatus sb_apply(const struct SbBlock *b,
                       const struct SbComplex *w,
                       size_t w_len,
                       bool separable,
                       struct SbComplex *y,
                       size_t y_len);

/*
 Modelled real flops of one design. `method` is an [`SbFlopsMethod`]
 value; `iterations` is used by TMMSE only.

 # Safety
 `out` must be writable.
 */
enum SbStatus sb_flops(uint32_t method,
                       size_t n_h,
                       size_t n_v,
                       size_t r,
                       size_t k,
                       size_t iterations,
                       uint64_t *out);

#endif  /* SEPBEAM_H */
