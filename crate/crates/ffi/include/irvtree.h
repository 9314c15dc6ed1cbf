#ifndef IRVTREE_H
#define IRVTREE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrvStatus {
  IRV_STATUS_OK = 0,
  IRV_STATUS_IO = 1,
  IRV_STATUS_PARSE = 2,
  IRV_STATUS_INVALID = 3,
  IRV_STATUS_NUMERICAL = 4,
  IRV_STATUS_TIE = 5,
  IRV_STATUS_NULL_ARGUMENT = 6,
  IRV_STATUS_BUFFER_TOO_SMALL = 7,
  IRV_STATUS_PANIC = 8,
} IrvStatus;

typedef enum IrvTiePolicy {
  IRV_TIE_POLICY_ELIMINATE_ALL = 0,
  IRV_TIE_POLICY_UNIFORM_RANDOM = 1,
  IRV_TIE_POLICY_ERROR = 2,
} IrvTiePolicy;

/**
 * Opaque election model with its candidate roster.
 */
typedef struct IrvModel IrvModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *irv_last_error(void);

/**
 * Load a distribution table from a file. `bucket_size` 0 takes the size from
 * the file's directive.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IrvStatus irv_model_from_table_path(const char *path,
                                         uint64_t bucket_size,
                                         struct IrvModel **out);

/**
 * Load a distribution table from its text.
 *
 * # Safety
 * `table` must be a NUL-terminated string; `out` must be writable.
 */
enum IrvStatus irv_model_from_table_str(const char *table,
                                        uint64_t bucket_size,
                                        struct IrvModel **out);

/**
 * Recount scenario around a final tally, with the default shift parameters.
 *
 * # Safety
 * `tally` must be a NUL-terminated string; `out` must be writable.
 */
enum IrvStatus irv_model_from_recount(const char *tally, struct IrvModel **out);

/**
 * Final-count scenario from a tally covering `fraction` of the ballots.
 * A non-positive `dispersion` selects the default.
 *
 * # Safety
 * `tally` must be a NUL-terminated string; `out` must be writable.
 */
enum IrvStatus irv_model_from_partial(const char *tally,
                                      double fraction,
                                      uint64_t bucket_size,
                                      double dispersion,
                                      struct IrvModel **out);

/**
 * Number of candidates, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t irv_model_candidate_count(const struct IrvModel *model);

/**
 * Write each candidate's win probability into `out[0..len]`, in roster order.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `len` doubles.
 */
enum IrvStatus irv_model_win_probs(const struct IrvModel *model, double *out, size_t len);

/**
 * Full elimination tree as JSON.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum IrvStatus irv_model_tree_json(const struct IrvModel *model, char **out);

/**
 * Run the count on a tally and return the rounds as JSON.
 *
 * # Safety
 * `tally` must be a NUL-terminated string; `out` must be writable.
 */
enum IrvStatus irv_tabulate_json(const char *tally,
                                 enum IrvTiePolicy policy,
                                 uint64_t seed,
                                 char **out);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void irv_string_free(char *s);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void irv_model_free(struct IrvModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRVTREE_H */
