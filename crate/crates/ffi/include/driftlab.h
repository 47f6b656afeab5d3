#ifndef DRIFTLAB_H
#define DRIFTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_ARGUMENT = 2,
  DL_STATUS_IO = 3,
  DL_STATUS_FORMAT = 4,
  DL_STATUS_MISSING_WORD = 5,
  DL_STATUS_DIMENSION = 6,
  DL_STATUS_NON_FINITE = 7,
  DL_STATUS_INSUFFICIENT = 8,
  DL_STATUS_BUFFER_TOO_SMALL = 9,
  DL_STATUS_PANIC = 99,
} DlStatus;

// An aligned chain of period spaces.
typedef struct DlChain DlChain;

// One trained embedding space.
typedef struct DlEmbedding DlEmbedding;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. Valid until the
// next call into the library on the same thread.
const char *dl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dl_version(void);

// Orthogonal `W` (d×d) minimizing `|AW - B|_F` for n×d matrices `a`, `b`.
//
// # Safety
// `a` and `b` must point to `n * d` doubles and `out_w` to `d * d` writable doubles.
enum DlStatus dl_procrustes(const double *a, const double *b, size_t n, size_t d, double *out_w);

// Cosine similarity of two d-vectors.
//
// # Safety
// `u` and `v` must point to `d` doubles; `out` must be writable.
enum DlStatus dl_cosine(const double *u, const double *v, size_t d, double *out);

// Loads an embedding file (binary or text format).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DlStatus dl_embedding_open(const char *path, struct DlEmbedding **out);

// # Safety
// `handle` must come from `dl_embedding_open` and not have been freed; NULL is ignored.
void dl_embedding_free(struct DlEmbedding *handle);

// # Safety
// `handle` must be a live embedding handle; `dim` and `len` must be writable.
enum DlStatus dl_embedding_shape(const struct DlEmbedding *handle, size_t *dim, size_t *len);

// Copies the vector for `key` into `out` (capacity `cap` doubles).
//
// # Safety
// `handle` must be live, `key` NUL-terminated, `out` writable for `cap` doubles.
enum DlStatus dl_embedding_vector(const struct DlEmbedding *handle,
                                  const char *key,
                                  double *out,
                                  size_t cap);

// Loads an aligned chain written by `driftlab align`.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum DlStatus dl_chain_open(const char *dir, struct DlChain **out);

// # Safety
// `handle` must come from `dl_chain_open` and not have been freed; NULL is ignored.
void dl_chain_free(struct DlChain *handle);

// # Safety
// `handle` must be a live chain handle; `periods` and `dim` must be writable.
enum DlStatus dl_chain_shape(const struct DlChain *handle, size_t *periods, size_t *dim);

// Aligned vector of `key` in `period`.
//
// # Safety
// `handle` must be live, `key` NUL-terminated, `out` writable for `cap` doubles.
enum DlStatus dl_chain_vector(const struct DlChain *handle,
                              size_t period,
                              const char *key,
                              double *out,
                              size_t cap);

// Cumulative shift of `key`. When `per_step` is not NULL it receives the
// `periods - 1` step values (capacity `cap`).
//
// # Safety
// `handle` must be live, `key` NUL-terminated, `cumulative` writable and
// `per_step` NULL or writable for `cap` doubles.
enum DlStatus dl_chain_shift(const struct DlChain *handle,
                             const char *key,
                             double *cumulative,
                             double *per_step,
                             size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTLAB_H */
