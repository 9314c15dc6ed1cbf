//! C interface to `irvtree`.
//!
//! Models are opaque handles created by one of the `irv_model_*` constructors
//! and released with [`irv_model_free`]. Every fallible call returns an
//! [`IrvStatus`]; on failure [`irv_last_error`] describes the problem. Strings
//! returned through `char **` arguments belong to the caller and must be
//! released with [`irv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irvtree::engine::win_vector_memoized;
use irvtree::formats::{parse_distribution_table, parse_tally, tree_to_json};
use irvtree::models::{partial_count_model, recount_model, PartialCountParams, RecountParams};
use irvtree::tabulator::run_irv;
use irvtree::{ElectionModel, Error, Roster, TiePolicy};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrvStatus {
    Ok = 0,
    Io = 1,
    Parse = 2,
    Invalid = 3,
    Numerical = 4,
    Tie = 5,
    NullArgument = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrvTiePolicy {
    EliminateAll = 0,
    UniformRandom = 1,
    Error = 2,
}

/// Opaque election model with its candidate roster.
pub struct IrvModel {
    model: ElectionModel,
    roster: Roster,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IrvStatus {
    match e.exit_code() {
        1 => IrvStatus::Io,
        2 => IrvStatus::Parse,
        4 => IrvStatus::Numerical,
        5 => IrvStatus::Tie,
        _ => IrvStatus::Invalid,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IrvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrvStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            IrvStatus::NullArgument
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer needs {need} entries"));
            IrvStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            IrvStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::Validation(format!("{what} is not valid UTF-8"))))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c =
        CString::new(s).map_err(|_| Fail::Lib(Error::Validation("output contains NUL".into())))?;
    put(out, c.into_raw())
}

fn boxed(model: ElectionModel, roster: Roster) -> *mut IrvModel {
    Box::into_raw(Box::new(IrvModel { model, roster }))
}

fn bucket_arg(b: u64) -> Option<u64> {
    (b != 0).then_some(b)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn irv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Load a distribution table from a file. `bucket_size` 0 takes the size from
/// the file's directive.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_model_from_table_path(
    path: *const c_char,
    bucket_size: u64,
    out: *mut *mut IrvModel,
) -> IrvStatus {
    guard(|| {
        let path = text(path, "path")?;
        let file = std::fs::File::open(path).map_err(Error::from)?;
        let t = parse_distribution_table(file, bucket_arg(bucket_size), None)?;
        let m = t.to_model()?;
        put(out, boxed(m, t.roster))
    })
}

/// Load a distribution table from its text.
///
/// # Safety
/// `table` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_model_from_table_str(
    table: *const c_char,
    bucket_size: u64,
    out: *mut *mut IrvModel,
) -> IrvStatus {
    guard(|| {
        let t = parse_distribution_table(
            text(table, "table")?.as_bytes(),
            bucket_arg(bucket_size),
            None,
        )?;
        let m = t.to_model()?;
        put(out, boxed(m, t.roster))
    })
}

/// Recount scenario around a final tally, with the default shift parameters.
///
/// # Safety
/// `tally` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_model_from_recount(
    tally: *const c_char,
    out: *mut *mut IrvModel,
) -> IrvStatus {
    guard(|| {
        let (roster, t) = parse_tally(text(tally, "tally")?.as_bytes(), None)?;
        let m = recount_model(&t, &RecountParams::default())?;
        put(out, boxed(m, roster))
    })
}

/// Final-count scenario from a tally covering `fraction` of the ballots.
/// A non-positive `dispersion` selects the default.
///
/// # Safety
/// `tally` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_model_from_partial(
    tally: *const c_char,
    fraction: f64,
    bucket_size: u64,
    dispersion: f64,
    out: *mut *mut IrvModel,
) -> IrvStatus {
    guard(|| {
        let (roster, t) = parse_tally(text(tally, "tally")?.as_bytes(), None)?;
        let mut p = PartialCountParams::new(fraction, bucket_size);
        if dispersion > 0.0 {
            p.dispersion = dispersion;
        }
        let m = partial_count_model(&t, &p)?;
        put(out, boxed(m, roster))
    })
}

/// Number of candidates, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irv_model_candidate_count(model: *const IrvModel) -> usize {
    model.as_ref().map_or(0, |m| m.roster.len())
}

/// Write each candidate's win probability into `out[0..len]`, in roster order.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn irv_model_win_probs(
    model: *const IrvModel,
    out: *mut f64,
    len: usize,
) -> IrvStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        if out.is_null() {
            return Err(Fail::Null("output buffer"));
        }
        let n = m.roster.len();
        if len < n {
            return Err(Fail::Small(n));
        }
        let tree = win_vector_memoized(&m.model)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(tree.win().as_slice());
        Ok(())
    })
}

/// Full elimination tree as JSON.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_model_tree_json(
    model: *const IrvModel,
    out: *mut *mut c_char,
) -> IrvStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        let tree = win_vector_memoized(&m.model)?;
        put_string(out, tree_to_json(&tree, &m.roster)?)
    })
}

/// Run the count on a tally and return the rounds as JSON.
///
/// # Safety
/// `tally` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irv_tabulate_json(
    tally: *const c_char,
    policy: IrvTiePolicy,
    seed: u64,
    out: *mut *mut c_char,
) -> IrvStatus {
    guard(|| {
        let (roster, t) = parse_tally(text(tally, "tally")?.as_bytes(), None)?;
        let policy = match policy {
            IrvTiePolicy::EliminateAll => TiePolicy::EliminateAll,
            IrvTiePolicy::UniformRandom => TiePolicy::UniformRandom { seed },
            IrvTiePolicy::Error => TiePolicy::Error,
        };
        let o = run_irv(&t, policy)?;
        let code = |c| roster.code(c).to_string();
        let rounds: Vec<_> = o
            .rounds
            .iter()
            .map(|r| {
                serde_json::json!({
                    "totals": r
                        .top_totals
                        .iter()
                        .map(|(&c, &v)| (code(c), serde_json::Value::from(v)))
                        .collect::<serde_json::Map<_, _>>(),
                    "exhausted": r.exhausted,
                    "eliminated": r.eliminated.iter().map(code).collect::<Vec<_>>(),
                })
            })
            .collect();
        let doc = serde_json::json!({ "rounds": rounds, "winner": o.winner.map(code) });
        put_string(out, doc.to_string())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn irv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn irv_model_free(model: *mut IrvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
