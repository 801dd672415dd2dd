//! C ABI over `btl-core`.
//!
//! Objects are opaque handles released with their `_free` function. Every
//! fallible call returns an `int32_t` status (`BTL_OK` or a negative code)
//! and reports details through `btl_last_error`. Strings returned through
//! out-parameters are owned by the caller and released with
//! `btl_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use btl_core::formula::{parse_file, print, StateFormula};
use btl_core::pipeline::{decide, EmptinessResult, SolverConfig, Verdict};
use btl_core::tree_model::{evaluate_state, FiniteTree};

pub const BTL_OK: i32 = 0;
pub const BTL_ERR_NULL: i32 = -1;
pub const BTL_ERR_UTF8: i32 = -2;
pub const BTL_ERR_PARSE: i32 = -3;
pub const BTL_ERR_MODEL: i32 = -4;
pub const BTL_ERR_PIPELINE: i32 = -5;
pub const BTL_ERR_NO_WITNESS: i32 = -6;
pub const BTL_ERR_PANIC: i32 = -7;

pub const BTL_SAT: i32 = 0;
pub const BTL_UNSAT: i32 = 1;
pub const BTL_UNKNOWN: i32 = 2;

/// A parsed formula with its propositions.
pub struct BtlFormula {
    props: Vec<String>,
    formula: StateFormula,
}

pub struct BtlTree {
    tree: FiniteTree,
}

pub struct BtlResult {
    result: EmptinessResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

/// Runs `f`, turning panics into `BTL_ERR_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BTL_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            BTL_ERR_PANIC
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, (i32, String)> {
    if s.is_null() {
        return Err((BTL_ERR_NULL, "null string".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (BTL_ERR_UTF8, e.to_string()))
}

fn null<T>(p: *const T, what: &str) -> Result<(), (i32, String)> {
    if p.is_null() {
        Err((BTL_ERR_NULL, format!("null {what}")))
    } else {
        Ok(())
    }
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("no interior nul")
        .into_raw()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn btl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `*out` (NULL if none).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_last_error(out: *mut *mut c_char) -> i32 {
    if out.is_null() {
        return BTL_ERR_NULL;
    }
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    *out = msg.map_or(ptr::null_mut(), CString::into_raw);
    BTL_OK
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a formula file: `props: p q` on the first line, then the formula.
///
/// # Safety
/// `file_text` must be a nul-terminated string, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_formula_parse(
    file_text: *const c_char,
    out: *mut *mut BtlFormula,
) -> i32 {
    guard(|| {
        null(out, "out")?;
        let ff = parse_file(text(file_text)?).map_err(|e| (BTL_ERR_PARSE, e.to_string()))?;
        *out = Box::into_raw(Box::new(BtlFormula {
            props: ff.props,
            formula: ff.formula,
        }));
        Ok(())
    })
}

/// Prints the formula in the concrete syntax.
///
/// # Safety
/// `f` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_formula_print(f: *const BtlFormula, out: *mut *mut c_char) -> i32 {
    guard(|| {
        null(f, "formula")?;
        null(out, "out")?;
        *out = owned(print(&(*f).formula));
        Ok(())
    })
}

/// Number of propositions declared in the formula file.
///
/// # Safety
/// `f` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_formula_prop_count(f: *const BtlFormula) -> usize {
    if f.is_null() {
        0
    } else {
        (*f).props.len()
    }
}

/// # Safety
/// `f` must come from `btl_formula_parse` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_formula_free(f: *mut BtlFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Reads a tree in the JSON format of the command line.
///
/// # Safety
/// `json` must be a nul-terminated string, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_tree_from_json(json: *const c_char, out: *mut *mut BtlTree) -> i32 {
    guard(|| {
        null(out, "out")?;
        let tree = FiniteTree::from_json(text(json)?).map_err(|e| (BTL_ERR_MODEL, e.to_string()))?;
        *out = Box::into_raw(Box::new(BtlTree { tree }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from `btl_tree_from_json` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_tree_free(t: *mut BtlTree) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Evaluates `f` at `node` of `t`; writes 1 or 0 to `*out`.
///
/// # Safety
/// Handles must be live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_evaluate(
    f: *const BtlFormula,
    t: *const BtlTree,
    node: usize,
    out: *mut i32,
) -> i32 {
    guard(|| {
        null(f, "formula")?;
        null(t, "tree")?;
        null(out, "out")?;
        let v = evaluate_state(&(*t).tree, node, &(*f).formula)
            .map_err(|e| (BTL_ERR_MODEL, e.to_string()))?;
        *out = i32::from(v);
        Ok(())
    })
}

/// Decides satisfiability with the given caps (0 selects the default).
///
/// # Safety
/// `f` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_sat(
    f: *const BtlFormula,
    d_max: usize,
    state_cap: usize,
    out: *mut *mut BtlResult,
) -> i32 {
    guard(|| {
        null(f, "formula")?;
        null(out, "out")?;
        let mut cfg = SolverConfig::default();
        if d_max > 0 {
            cfg.d_max = d_max;
        }
        if state_cap > 0 {
            cfg.state_cap = state_cap;
        }
        let result = decide(&(*f).formula, &cfg).map_err(|e| (BTL_ERR_PIPELINE, e.to_string()))?;
        *out = Box::into_raw(Box::new(BtlResult { result }));
        Ok(())
    })
}

/// `BTL_SAT`, `BTL_UNSAT` (within the branching cap) or `BTL_UNKNOWN`;
/// `BTL_ERR_NULL` for a NULL handle.
///
/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_result_verdict(r: *const BtlResult) -> i32 {
    if r.is_null() {
        return BTL_ERR_NULL;
    }
    match (*r).result.verdict {
        Verdict::Nonempty => BTL_SAT,
        Verdict::Empty => BTL_UNSAT,
        Verdict::Unknown => BTL_UNKNOWN,
    }
}

/// The witness as Kripke JSON; `BTL_ERR_NO_WITNESS` unless SAT.
///
/// # Safety
/// `r` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_result_witness_json(
    r: *const BtlResult,
    out: *mut *mut c_char,
) -> i32 {
    guard(|| {
        null(r, "result")?;
        null(out, "out")?;
        let w = (*r)
            .result
            .witness
            .as_ref()
            .ok_or((BTL_ERR_NO_WITNESS, "no witness".to_string()))?;
        *out = owned(w.to_json().to_string());
        Ok(())
    })
}

/// Statistics and scope of the run as JSON.
///
/// # Safety
/// `r` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn btl_result_report_json(
    r: *const BtlResult,
    out: *mut *mut c_char,
) -> i32 {
    guard(|| {
        null(r, "result")?;
        null(out, "out")?;
        let j = serde_json::to_string(&(*r).result).map_err(|e| (BTL_ERR_PIPELINE, e.to_string()))?;
        *out = owned(j);
        Ok(())
    })
}

/// # Safety
/// `r` must come from `btl_sat` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn btl_result_free(r: *mut BtlResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
