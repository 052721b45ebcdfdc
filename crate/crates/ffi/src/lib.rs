//! C ABI over the metric and selection engine, so the measurement and
//! selection steps can be driven from Python or any other language with a
//! C FFI. Handles are opaque pointers owned by this library; every
//! fallible call returns a status code and leaves a message for
//! `repset_last_error`.
//!
//! The generated header lands in `include/repset.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use repset_core::corpus::count_sloc;
use repset_core::lexer::Lang;
use repset_core::metrics::{
    cyclomatic_complexity, halstead_volume, maintainability_index, type_complexity,
    unsafe_complexity, MetricInputs, MetricRow,
};
use repset_core::select::{select, SelectionConfig, SelectionResult};

/// Outcome of a fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepsetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The source could not be tokenized or no function body was found.
    AnalysisFailed = 3,
    /// A numeric argument was out of range.
    InvalidArgument = 4,
    /// Selection failed; see repset_last_error.
    SelectionFailed = 5,
    /// An internal panic was caught at the boundary.
    InternalError = 6,
}

/// Complexity measurements of one C function.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RepsetCMetrics {
    pub maintainability_index: f64,
    pub halstead_volume: f64,
    pub cyclomatic_complexity: u32,
    pub sloc: u32,
}

/// Complexity measurements of one Rust function.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RepsetRustMetrics {
    pub maintainability_index: f64,
    pub halstead_volume: f64,
    pub cyclomatic_complexity: u32,
    pub sloc: u32,
    pub unsafe_complexity: f64,
    pub unsafe_blocks: u32,
    pub type_complexity: u32,
}

/// Metric rows accumulated for selection. Opaque.
pub struct RepsetMetricTable {
    rows: Vec<MetricRow>,
}

/// A finished selection. Opaque; ids are borrowed from the handle.
pub struct RepsetSelection {
    result: SelectionResult,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn guard<F: FnOnce() -> RepsetStatus>(body: F) -> RepsetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RepsetStatus::InternalError
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn repset_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn repset_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn utf8_arg<'a>(pointer: *const c_char) -> Result<&'a str, RepsetStatus> {
    if pointer.is_null() {
        set_error("null pointer argument");
        return Err(RepsetStatus::NullArgument);
    }
    CStr::from_ptr(pointer).to_str().map_err(|e| {
        set_error(&format!("invalid UTF-8: {e}"));
        RepsetStatus::InvalidUtf8
    })
}

fn measure(source: &str, lang: Lang) -> Result<(f64, u32, u32, f64), RepsetStatus> {
    let volume = halstead_volume(source, lang).map_err(|e| {
        set_error(&e.to_string());
        RepsetStatus::AnalysisFailed
    })?;
    let cyclomatic = cyclomatic_complexity(source, lang).map_err(|e| {
        set_error(&e.to_string());
        RepsetStatus::AnalysisFailed
    })?;
    let sloc = count_sloc(source);
    let mi = maintainability_index(&MetricInputs {
        halstead_volume: volume,
        cyclomatic_complexity: cyclomatic,
        sloc,
    });
    Ok((volume, cyclomatic, sloc, mi))
}

/// Measure one C function; writes into `out` on success.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repset_measure_c(
    source: *const c_char,
    out: *mut RepsetCMetrics,
) -> RepsetStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RepsetStatus::NullArgument;
        }
        let text = match utf8_arg(source) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match measure(text, Lang::C) {
            Ok((volume, cyclomatic, sloc, mi)) => {
                *out = RepsetCMetrics {
                    maintainability_index: mi,
                    halstead_volume: volume,
                    cyclomatic_complexity: cyclomatic,
                    sloc,
                };
                RepsetStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Measure one Rust function, including the unsafe and data-type metrics.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repset_measure_rust(
    source: *const c_char,
    out: *mut RepsetRustMetrics,
) -> RepsetStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RepsetStatus::NullArgument;
        }
        let text = match utf8_arg(source) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let (volume, cyclomatic, sloc, mi) = match measure(text, Lang::Rust) {
            Ok(values) => values,
            Err(status) => return status,
        };
        let profile = match unsafe_complexity(text) {
            Ok(p) => p,
            Err(e) => {
                set_error(&e.to_string());
                return RepsetStatus::AnalysisFailed;
            }
        };
        let types = match type_complexity(text) {
            Ok(t) => t,
            Err(e) => {
                set_error(&e.to_string());
                return RepsetStatus::AnalysisFailed;
            }
        };
        *out = RepsetRustMetrics {
            maintainability_index: mi,
            halstead_volume: volume,
            cyclomatic_complexity: cyclomatic,
            sloc,
            unsafe_complexity: profile.complexity(),
            unsafe_blocks: profile.block_count as u32,
            type_complexity: types,
        };
        RepsetStatus::Ok
    })
}

/// Source lines of code (blank and comment-only lines excluded); 0 for a
/// null pointer.
///
/// # Safety
/// `source` must be NUL-terminated when non-null.
#[no_mangle]
pub unsafe extern "C" fn repset_count_sloc(source: *const c_char) -> u32 {
    if source.is_null() {
        return 0;
    }
    match CStr::from_ptr(source).to_str() {
        Ok(text) => count_sloc(text),
        Err(_) => 0,
    }
}

/// New empty metric table.
#[no_mangle]
pub extern "C" fn repset_table_new() -> *mut RepsetMetricTable {
    Box::into_raw(Box::new(RepsetMetricTable { rows: Vec::new() }))
}

/// Free a table created by `repset_table_new`.
///
/// # Safety
/// `table` must come from `repset_table_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn repset_table_free(table: *mut RepsetMetricTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Append one row (id, program, the four metrics, sloc).
///
/// # Safety
/// `table` must be a live table handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn repset_table_add_row(
    table: *mut RepsetMetricTable,
    id: *const c_char,
    program: *const c_char,
    mi_c: f64,
    mi_rust: f64,
    unsafe_complexity: f64,
    type_complexity: u32,
    sloc: u32,
) -> RepsetStatus {
    guard(|| {
        let Some(table) = table.as_mut() else {
            set_error("null table handle");
            return RepsetStatus::NullArgument;
        };
        let id = match utf8_arg(id) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let program = match utf8_arg(program) {
            Ok(t) => t,
            Err(status) => return status,
        };
        if !(mi_c.is_finite() && mi_rust.is_finite() && unsafe_complexity.is_finite()) {
            set_error("metric values must be finite");
            return RepsetStatus::InvalidArgument;
        }
        table.rows.push(MetricRow {
            id: id.to_string(),
            program: program.to_string(),
            mi_c,
            mi_rust,
            unsafe_complexity,
            type_complexity,
            sloc,
        });
        RepsetStatus::Ok
    })
}

/// Number of rows in the table; 0 for null.
///
/// # Safety
/// `table` must be a live table handle or null.
#[no_mangle]
pub unsafe extern "C" fn repset_table_len(table: *const RepsetMetricTable) -> usize {
    table.as_ref().map_or(0, |t| t.rows.len())
}

/// Run the full selection over the table at (partitions, ratio) and hand
/// back an owned selection handle.
///
/// # Safety
/// `table` must be a live table handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repset_select(
    table: *const RepsetMetricTable,
    partitions: u32,
    ratio: f64,
    out: *mut *mut RepsetSelection,
) -> RepsetStatus {
    guard(|| {
        let Some(table) = table.as_ref() else {
            set_error("null table handle");
            return RepsetStatus::NullArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return RepsetStatus::NullArgument;
        }
        let config = SelectionConfig {
            n: partitions,
            r: ratio,
            seed: 0,
        };
        match select(&table.rows, &config) {
            Ok(result) => {
                let ids = result
                    .selected_ids
                    .iter()
                    .map(|id| CString::new(id.as_str()).unwrap_or_default())
                    .collect();
                *out = Box::into_raw(Box::new(RepsetSelection { result, ids }));
                RepsetStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                RepsetStatus::SelectionFailed
            }
        }
    })
}

/// Free a selection handle.
///
/// # Safety
/// `selection` must come from `repset_select` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn repset_selection_free(selection: *mut RepsetSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

/// Number of selected ids; 0 for null.
///
/// # Safety
/// `selection` must be a live selection handle or null.
#[no_mangle]
pub unsafe extern "C" fn repset_selection_len(selection: *const RepsetSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.ids.len())
}

/// Borrowed pointer to the id at `index`, or null when out of range. The
/// pointer lives as long as the selection handle.
///
/// # Safety
/// `selection` must be a live selection handle or null.
#[no_mangle]
pub unsafe extern "C" fn repset_selection_id(
    selection: *const RepsetSelection,
    index: usize,
) -> *const c_char {
    selection
        .as_ref()
        .and_then(|s| s.ids.get(index))
        .map_or(ptr::null(), |id| id.as_ptr())
}

/// Selected-function count before/after as a packed pair via out
/// pointers.
///
/// # Safety
/// `selection` must be a live selection handle; out pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn repset_selection_reduction(
    selection: *const RepsetSelection,
    functions_before: *mut u64,
    functions_after: *mut u64,
    sloc_before: *mut u64,
    sloc_after: *mut u64,
) -> RepsetStatus {
    let Some(selection) = selection.as_ref() else {
        set_error("null selection handle");
        return RepsetStatus::NullArgument;
    };
    for (slot, value) in [
        (functions_before, selection.result.reduction.functions_before),
        (functions_after, selection.result.reduction.functions_after),
        (sloc_before, selection.result.reduction.sloc_before),
        (sloc_after, selection.result.reduction.sloc_after),
    ] {
        if slot.is_null() {
            set_error("null output pointer");
            return RepsetStatus::NullArgument;
        }
        *slot = value;
    }
    RepsetStatus::Ok
}

/// The full selection report as JSON; free with `repset_string_free`.
///
/// # Safety
/// `selection` must be a live selection handle or null.
#[no_mangle]
pub unsafe extern "C" fn repset_selection_to_json(
    selection: *const RepsetSelection,
) -> *mut c_char {
    let Some(selection) = selection.as_ref() else {
        return ptr::null_mut();
    };
    match selection.result.to_json() {
        Ok(json) => CString::new(json).map_or(ptr::null_mut(), CString::into_raw),
        Err(_) => ptr::null_mut(),
    }
}

/// Free a string returned by this library.
///
/// # Safety
/// `string` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn repset_string_free(string: *mut c_char) {
    if !string.is_null() {
        drop(CString::from_raw(string));
    }
}

/// Mean relative per-bucket difference of two 21-bucket attempt
/// histograms. Returns a negative value on null input.
///
/// # Safety
/// Both pointers must reference 21 readable doubles.
#[no_mangle]
pub unsafe extern "C" fn repset_relative_difference(
    expected: *const f64,
    observed: *const f64,
) -> f64 {
    if expected.is_null() || observed.is_null() {
        return -1.0;
    }
    let mut e = repset_core::evaluate::AttemptHistogram::default();
    let mut o = repset_core::evaluate::AttemptHistogram::default();
    e.buckets
        .copy_from_slice(std::slice::from_raw_parts(expected, 21));
    o.buckets
        .copy_from_slice(std::slice::from_raw_parts(observed, 21));
    repset_core::evaluate::relative_difference(&e, &o)
}
