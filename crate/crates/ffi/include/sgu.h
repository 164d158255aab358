#ifndef SGU_H
#define SGU_H

/* Generated by cbindgen from the sgu-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SguStatus {
  SGU_STATUS_OK = 0,
  SGU_STATUS_NULL_ARGUMENT = 1,
  SGU_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or graph file.
   */
  SGU_STATUS_PARSE_ERROR = 3,
  /**
   * A primitive or query failed against the graph.
   */
  SGU_STATUS_GRAPH_ERROR = 4,
  /**
   * The record was valid JSON but was not applied.
   */
  SGU_STATUS_REJECTED = 5,
  /**
   * The record was ambiguous and was held back.
   */
  SGU_STATUS_DEFERRED = 6,
  /**
   * The statement could not be understood.
   */
  SGU_STATUS_STATEMENT_UNPARSED = 7,
  SGU_STATUS_SCENARIO_ERROR = 8,
  SGU_STATUS_INVALID_ARGUMENT = 9,
  SGU_STATUS_PANIC = 255,
} SguStatus;

/**
 * Opaque scene graph handle.
 */
typedef struct SguGraph SguGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Text of the last error raised on this thread. Empty after a successful
 * call. The pointer stays valid until the next call on this thread.
 */
const char *sgu_last_error_message(void);

/**
 * Parses a scene graph from JSON and stores a new handle in `*out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SguStatus sgu_graph_from_json(const char *json, struct SguGraph **out);

/**
 * Writes the graph's canonical JSON to `*out`.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum SguStatus sgu_graph_to_json(const struct SguGraph *graph, char **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void sgu_graph_free(struct SguGraph *graph);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void sgu_string_free(char *s);

/**
 * Ids of attached objects with `label`, optionally limited to `room`
 * (null for all rooms), as a JSON array.
 *
 * # Safety
 * `graph` must be a live handle, `label` a NUL-terminated string, `room`
 * null or NUL-terminated, and `out` a valid pointer.
 */
enum SguStatus sgu_graph_find(const struct SguGraph *graph,
                              const char *label,
                              const char *room,
                              char **out);

/**
 * Applies one update record given as JSON. The apply report is written to
 * `*out_report` whenever the record parsed, including when it was rejected
 * or deferred.
 *
 * # Safety
 * `graph` must be a live handle, `record_json` NUL-terminated, and
 * `out_report` null or a valid pointer.
 */
enum SguStatus sgu_graph_apply_record(struct SguGraph *graph,
                                      const char *record_json,
                                      char **out_report);

/**
 * Parses a natural-language change statement and applies it with
 * timestamp `now`.
 *
 * # Safety
 * As for [`sgu_graph_apply_record`].
 */
enum SguStatus sgu_graph_apply_statement(struct SguGraph *graph,
                                         const char *text,
                                         double now,
                                         char **out_report);

/**
 * Probability that an object with `decay_rate` (1/s) last seen at
 * `last_seen` is still in place at `now`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SguStatus sgu_persistence_probability(double decay_rate,
                                           double now,
                                           double last_seen,
                                           double *out);

/**
 * Stale-target report as JSON.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum SguStatus sgu_graph_stale_targets(const struct SguGraph *graph,
                                       double now,
                                       double threshold,
                                       char **out);

/**
 * Runs a scenario file `runs` times and writes the averaged metrics as
 * JSON. If `out_graph` is not null it receives a handle to the final graph
 * of the last run.
 *
 * # Safety
 * `path` must be NUL-terminated, `out_metrics` a valid pointer and
 * `out_graph` null or a valid pointer.
 */
enum SguStatus sgu_run_scenario(const char *path,
                                uint32_t runs,
                                char **out_metrics,
                                struct SguGraph **out_graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGU_H */
