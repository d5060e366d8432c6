#ifndef MBF_H
#define MBF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MbfStatus {
  MBF_STATUS_OK = 0,
  MBF_STATUS_NULL_POINTER = 1,
  MBF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed JSON or parameters outside their domain.
   */
  MBF_STATUS_CONFIG = 3,
  /**
   * Quadrature or factorization failure.
   */
  MBF_STATUS_NUMERICAL = 4,
  MBF_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  MBF_STATUS_INTERNAL = 6,
} MbfStatus;

/**
 * Opaque covariance model.
 */
typedef struct MbfModel MbfModel;

/**
 * Opaque factored sampler for one model on one lattice.
 */
typedef struct MbfSampler MbfSampler;

/**
 * Message of the last failure on this thread; empty before any failure.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *mbf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mbf_version(void);

/**
 * Build a model from its JSON description, e.g.
 * `{"family": {"type": "levy_fbm", "hurst": 0.5, "dim": 1}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MbfStatus mbf_model_from_json(const char *json, struct MbfModel **out);

/**
 * # Safety
 * `model` must come from [`mbf_model_from_json`] and not be used afterwards.
 */
void mbf_model_free(struct MbfModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum MbfStatus mbf_model_dim(const struct MbfModel *model, size_t *out);

/**
 * Covariance `E[X_s X_t]`; `s` and `t` hold `dim` coordinates each.
 *
 * # Safety
 * `s` and `t` must point to `dim` readable doubles and `out` be valid.
 */
enum MbfStatus mbf_model_cov(const struct MbfModel *model,
                             const double *s,
                             const double *t,
                             size_t dim,
                             double *out);

/**
 * Factor `model` on the lattice described by `grid_json`
 * (`{"lower": [...], "upper": [...], "resolution": [...]}`). Lattices above
 * `cap` points are refused unless the model is separable.
 *
 * # Safety
 * `model` must be live, `grid_json` NUL-terminated and `out` valid.
 */
enum MbfStatus mbf_sampler_new(const struct MbfModel *model,
                               const char *grid_json,
                               size_t cap,
                               struct MbfSampler **out);

/**
 * # Safety
 * `sampler` must come from [`mbf_sampler_new`] and not be used afterwards.
 */
void mbf_sampler_free(struct MbfSampler *sampler);

/**
 * Number of lattice points, i.e. the length one replicate needs.
 *
 * # Safety
 * `sampler` must be live and `out` valid.
 */
enum MbfStatus mbf_sampler_len(const struct MbfSampler *sampler, size_t *out);

/**
 * Write replicate `replicate` of `seed` into `buf` in row-major order.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum MbfStatus mbf_sampler_sample(const struct MbfSampler *sampler,
                                  uint64_t seed,
                                  uint64_t replicate,
                                  double *buf,
                                  size_t len);

#endif  /* MBF_H */
