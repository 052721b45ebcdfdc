#ifndef REPSET_H
#define REPSET_H

/* Generated by cbindgen from repset-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Outcome of a fallible FFI call.
 */
typedef enum {
  REPSET_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  REPSET_STATUS_NULL_ARGUMENT = 1,
  /**
   * An input string was not valid UTF-8.
   */
  REPSET_STATUS_INVALID_UTF8 = 2,
  /**
   * The source could not be tokenized or no function body was found.
   */
  REPSET_STATUS_ANALYSIS_FAILED = 3,
  /**
   * A numeric argument was out of range.
   */
  REPSET_STATUS_INVALID_ARGUMENT = 4,
  /**
   * Selection failed; see repset_last_error.
   */
  REPSET_STATUS_SELECTION_FAILED = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  REPSET_STATUS_INTERNAL_ERROR = 6,
} RepsetStatus;

/**
 * Metric rows accumulated for selection. Opaque.
 */
typedef struct RepsetMetricTable RepsetMetricTable;

/**
 * A finished selection. Opaque; ids are borrowed from the handle.
 */
typedef struct RepsetSelection RepsetSelection;

/**
 * Complexity measurements of one C function.
 */
typedef struct {
  double maintainability_index;
  double halstead_volume;
  uint32_t cyclomatic_complexity;
  uint32_t sloc;
} RepsetCMetrics;

/**
 * Complexity measurements of one Rust function.
 */
typedef struct {
  double maintainability_index;
  double halstead_volume;
  uint32_t cyclomatic_complexity;
  uint32_t sloc;
  double unsafe_complexity;
  uint32_t unsafe_blocks;
  uint32_t type_complexity;
} RepsetRustMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *repset_last_error(void);

/**
 * Library version as a static string.
 */
const char *repset_version(void);

/**
 * Measure one C function; writes into `out` on success.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
RepsetStatus repset_measure_c(const char *source, RepsetCMetrics *out);

/**
 * Measure one Rust function, including the unsafe and data-type metrics.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
RepsetStatus repset_measure_rust(const char *source, RepsetRustMetrics *out);

/**
 * Source lines of code (blank and comment-only lines excluded); 0 for a
 * null pointer.
 *
 * # Safety
 * `source` must be NUL-terminated when non-null.
 */
uint32_t repset_count_sloc(const char *source);

/**
 * New empty metric table.
 */
RepsetMetricTable *repset_table_new(void);

/**
 * Free a table created by `repset_table_new`.
 *
 * # Safety
 * `table` must come from `repset_table_new` and not be used afterwards.
 */
void repset_table_free(RepsetMetricTable *table);

/**
 * Append one row (id, program, the four metrics, sloc).
 *
 * # Safety
 * `table` must be a live table handle; strings must be NUL-terminated.
 */
RepsetStatus repset_table_add_row(RepsetMetricTable *table,
                                  const char *id,
                                  const char *program,
                                  double mi_c,
                                  double mi_rust,
                                  double unsafe_complexity,
                                  uint32_t type_complexity,
                                  uint32_t sloc);

/**
 * Number of rows in the table; 0 for null.
 *
 * # Safety
 * `table` must be a live table handle or null.
 */
uintptr_t repset_table_len(const RepsetMetricTable *table);

/**
 * Run the full selection over the table at (partitions, ratio) and hand
 * back an owned selection handle.
 *
 * # Safety
 * `table` must be a live table handle and `out` a valid pointer.
 */
RepsetStatus repset_select(const RepsetMetricTable *table,
                           uint32_t partitions,
                           double ratio,
                           RepsetSelection **out);

/**
 * Free a selection handle.
 *
 * # Safety
 * `selection` must come from `repset_select` and not be used afterwards.
 */
void repset_selection_free(RepsetSelection *selection);

/**
 * Number of selected ids; 0 for null.
 *
 * # Safety
 * `selection` must be a live selection handle or null.
 */
uintptr_t repset_selection_len(const RepsetSelection *selection);

/**
 * Borrowed pointer to the id at `index`, or null when out of range. The
 * pointer lives as long as the selection handle.
 *
 * # Safety
 * `selection` must be a live selection handle or null.
 */
const char *repset_selection_id(const RepsetSelection *selection, uintptr_t index);

/**
 * Selected-function count before/after as a packed pair via out
 * pointers.
 *
 * # Safety
 * `selection` must be a live selection handle; out pointers must be
 * valid.
 */
RepsetStatus repset_selection_reduction(const RepsetSelection *selection,
                                        uint64_t *functions_before,
                                        uint64_t *functions_after,
                                        uint64_t *sloc_before,
                                        uint64_t *sloc_after);

/**
 * The full selection report as JSON; free with `repset_string_free`.
 *
 * # Safety
 * `selection` must be a live selection handle or null.
 */
char *repset_selection_to_json(const RepsetSelection *selection);

/**
 * Free a string returned by this library.
 *
 * # Safety
 * `string` must come from this library and not be used afterwards.
 */
void repset_string_free(char *string);

/**
 * Mean relative per-bucket difference of two 21-bucket attempt
 * histograms. Returns a negative value on null input.
 *
 * # Safety
 * Both pointers must reference 21 readable doubles.
 */
double repset_relative_difference(const double *expected, const double *observed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPSET_H */
