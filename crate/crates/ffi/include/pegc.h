#ifndef PEGC_H
#define PEGC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes returned by every fallible function.
typedef enum PegcStatus {
  PEGC_STATUS_OK = 0,
  PEGC_STATUS_NULL_POINTER = 1,
  PEGC_STATUS_INVALID_ARGUMENT = 2,
  PEGC_STATUS_INVALID_INPUT = 3,
  PEGC_STATUS_COMPUTATION_FAILED = 4,
  PEGC_STATUS_BUFFER_TOO_SMALL = 5,
  PEGC_STATUS_PANIC = 6,
} PegcStatus;

// A loaded graph.
typedef struct PegcGraph PegcGraph;

// The output of one pipeline run.
typedef struct PegcResult PegcResult;

// Pipeline parameters. Obtain defaults from [`pegc_config_default`].
typedef struct PegcConfig {
  size_t k;
  uint64_t seed;
  // Total ε; ignored when `privacy_disabled` is set.
  double epsilon;
  double delta;
  bool privacy_disabled;
  double lambda;
  double b;
  uint32_t p;
  double alpha;
  double beta;
  // Zero selects `min(k, 20)`.
  size_t d_prime;
  double lambda_p_alpha;
  size_t max_iter;
  // Take the smallest eigenvalues instead of the largest.
  bool smallest_eigenvalues;
  // Keep unit eigenvector scale instead of the volume rescaling.
  bool unit_scale;
} PegcConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *pegc_last_error(void);

// Default parameters for `k` clusters. `epsilon` starts as NaN, so a run
// fails until it is set or `privacy_disabled` is switched on.
struct PegcConfig pegc_config_default(size_t k, uint64_t seed);

// Builds a graph on vertices `0..n` from `len` edges `(src[i], dst[i])`.
//
// # Safety
// `src` and `dst` must point to `len` readable elements; `out` must be
// writable.
enum PegcStatus pegc_graph_from_edges(size_t n,
                                      const size_t *src,
                                      const size_t *dst,
                                      size_t len,
                                      struct PegcGraph **out);

// Parses an edge list (`u<TAB>v` or `u,v` per line).
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum PegcStatus pegc_graph_parse(const char *text,
                                 bool csv,
                                 bool remap_ids,
                                 struct PegcGraph **out);

// Number of vertices, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live graph handle.
size_t pegc_graph_vertex_count(const struct PegcGraph *g);

// Number of edges, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live graph handle.
size_t pegc_graph_edge_count(const struct PegcGraph *g);

// # Safety
// `g` must be null or a handle from this library that is not used again.
void pegc_graph_free(struct PegcGraph *g);

// Runs the pipeline. `queries` holds dense vertex indices to explain.
//
// # Safety
// `g` and `cfg` must be valid; `queries` must point to `n_queries`
// elements; `out` must be writable.
enum PegcStatus pegc_run(const struct PegcGraph *g,
                         const struct PegcConfig *cfg,
                         const size_t *queries,
                         size_t n_queries,
                         struct PegcResult **out);

// Number of vertices covered by the result.
//
// # Safety
// `r` must be null or a live result handle.
size_t pegc_result_vertex_count(const struct PegcResult *r);

// Copies the cluster index of every vertex into `buf` (capacity `len`).
//
// # Safety
// `r` must be a live result; `buf` must have room for `len` elements.
enum PegcStatus pegc_result_assignment(const struct PegcResult *r, size_t *buf, size_t len);

// Final k-median cost on the critical set, or NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double pegc_result_cost(const struct PegcResult *r);

// Explanation score of a queried vertex, looked up by external id.
//
// # Safety
// `r` must be a live result; `exp` must be writable.
enum PegcStatus pegc_result_explanation(const struct PegcResult *r, uint64_t vertex, double *exp);

// The result document as JSON. Owned by the result handle.
//
// # Safety
// `r` must be null or a live result handle.
const char *pegc_result_json(const struct PegcResult *r);

// # Safety
// `r` must be null or a handle from this library that is not used again.
void pegc_result_free(struct PegcResult *r);

// Adjusted Rand index between two labelings of `n` vertices.
//
// # Safety
// `a` and `b` must point to `n` elements; `out` must be writable.
enum PegcStatus pegc_adjusted_rand_index(const size_t *a, const size_t *b, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEGC_H */
