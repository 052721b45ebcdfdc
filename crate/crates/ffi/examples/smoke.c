/* Minimal consumer of the repset C ABI.
 *
 * Build the library first, then compile against the generated header:
 *
 *   cargo build -p repset-ffi --release
 *   cc -std=c11 -I crates/ffi/include crates/ffi/examples/smoke.c \
 *      target/release/librepset_ffi.a -lpthread -ldl -lm -o smoke
 *   ./smoke
 */
#include <assert.h>
#include <stdio.h>

#include "repset.h"

int main(void) {
    RepsetCMetrics c_metrics;
    RepsetStatus status = repset_measure_c("int f(void){return 0;}", &c_metrics);
    assert(status == REPSET_STATUS_OK);
    printf("C function: MI %.2f, volume %.2f, CC %u, SLoC %u\n",
           c_metrics.maintainability_index, c_metrics.halstead_volume,
           c_metrics.cyclomatic_complexity, c_metrics.sloc);

    RepsetRustMetrics rust_metrics;
    status = repset_measure_rust(
        "pub fn f(p: *mut i32) { let x = 1; unsafe { *p = x; } }", &rust_metrics);
    assert(status == REPSET_STATUS_OK);
    printf("Rust function: %u unsafe block(s), unsafe complexity %.2f, %u type(s)\n",
           rust_metrics.unsafe_blocks, rust_metrics.unsafe_complexity,
           rust_metrics.type_complexity);

    RepsetMetricTable *table = repset_table_new();
    for (int i = 0; i < 30; i++) {
        char id[32];
        snprintf(id, sizeof id, "demo/file/fn%d:1", i);
        status = repset_table_add_row(table, id, "demo", 120.0 - i, 90.0 + i % 7,
                                      (double)(i % 3), (uint32_t)(i % 5),
                                      (uint32_t)(5 + i));
        assert(status == REPSET_STATUS_OK);
    }

    RepsetSelection *selection = NULL;
    status = repset_select(table, 3, 0.2, &selection);
    if (status != REPSET_STATUS_OK) {
        fprintf(stderr, "selection failed: %s\n", repset_last_error());
        return 1;
    }
    uint64_t before, after, sloc_before, sloc_after;
    repset_selection_reduction(selection, &before, &after, &sloc_before, &sloc_after);
    printf("selected %zu of %llu functions (SLoC %llu -> %llu):\n",
           repset_selection_len(selection), (unsigned long long)before,
           (unsigned long long)sloc_before, (unsigned long long)sloc_after);
    for (size_t i = 0; i < repset_selection_len(selection); i++) {
        printf("  %s\n", repset_selection_id(selection, i));
    }

    repset_selection_free(selection);
    repset_table_free(table);
    return 0;
}
