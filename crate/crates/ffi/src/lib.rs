//! C ABI over the reranking core.
//!
//! Every function returns an [`LfrStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read with
//! [`lfr_last_error_message`]. Strings returned by the library must be
//! released with [`lfr_string_free`], models with [`lfr_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lfrerank::data::{map_freebase_ids, Candidate, CandidateSet, IdentifierMap};
use lfrerank::evaluation::{ranking_accuracy, top1_accuracy, ScoredSet};
use lfrerank::reranker::{set_loss, RerankerModel};
use lfrerank::scoring::{bleu, standardize};
use lfrerank::selection::{select_combined, select_reranker};
use lfrerank::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    ModelMismatch = 6,
    MissingReference = 7,
    External = 8,
    Internal = 9,
    Panic = 10,
}

/// Opaque reranker model handle.
pub struct LfrModel {
    inner: RerankerModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(LfrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Invariant(_) | Error::DuplicateId(_) => {
                LfrStatus::InvalidArgument
            }
            Error::Io { .. } => LfrStatus::Io,
            Error::Json(_) | Error::MalformedRecord { .. } | Error::MissingField { .. } => LfrStatus::Parse,
            Error::ModelMismatch(_) => LfrStatus::ModelMismatch,
            Error::MissingReference(_) => LfrStatus::MissingReference,
            Error::Generator(_) | Error::Transport(_) | Error::Protocol(_) | Error::Timeout(_) => LfrStatus::External,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: LfrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LfrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LfrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            LfrStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(LfrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LfrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(LfrStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(LfrStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn lfr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lfr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn lfr_model_load(path: *const c_char, out_model: *mut *mut LfrModel) -> LfrStatus {
    guard(|| {
        let path = text(path, "path")?;
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let inner = RerankerModel::load(Path::new(path))?;
        *slot = Box::into_raw(Box::new(LfrModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`lfr_model_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lfr_model_free(model: *mut LfrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(m: *const LfrModel) -> Result<&'a RerankerModel, Failure> {
    m.as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| fail(LfrStatus::NullPointer, "model is null"))
}

/// Reranker score of one candidate.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lfr_model_score(
    model: *const LfrModel,
    lf: *const c_char,
    candidate: *const c_char,
    out_score: *mut f64,
) -> LfrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let s = m.score(text(lf, "lf")?, text(candidate, "candidate")?)?;
        *out(out_score, "out_score")? = s;
        Ok(())
    })
}

unsafe fn build_set(
    lf: *const c_char,
    candidates: *const *const c_char,
    logprobs: Option<&[f64]>,
    n: usize,
) -> Result<CandidateSet, Failure> {
    let lf = text(lf, "lf")?;
    let ptrs = slice(candidates, n, "candidates")?;
    let mut cands = Vec::with_capacity(n);
    for (k, p) in ptrs.iter().enumerate() {
        let t = text(*p, &format!("candidates[{k}]"))?;
        cands.push(Candidate::new(t, 1, logprobs.map(|l| l[k]))?);
    }
    Ok(CandidateSet::new("ffi", lf, None, cands)?)
}

/// Index of the highest reranker score (first on ties).
///
/// # Safety
/// `candidates` must point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lfr_model_select(
    model: *const LfrModel,
    lf: *const c_char,
    candidates: *const *const c_char,
    n: usize,
    out_index: *mut usize,
) -> LfrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let set = build_set(lf, candidates, None, n)?;
        *out(out_index, "out_index")? = select_reranker(&set, m)?.chosen_index;
        Ok(())
    })
}

/// Index maximizing `lambda * R + (1 - lambda) * G`, with `G` the mean token
/// log-probabilities in `logprobs`.
///
/// # Safety
/// `candidates` must point to `n` strings and `logprobs` to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lfr_model_select_combined(
    model: *const LfrModel,
    lf: *const c_char,
    candidates: *const *const c_char,
    logprobs: *const f64,
    n: usize,
    lambda: f64,
    out_index: *mut usize,
) -> LfrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let lp = slice(logprobs, n, "logprobs")?;
        let set = build_set(lf, candidates, Some(lp), n)?;
        *out(out_index, "out_index")? = select_combined(&set, m, lambda, false)?.chosen_index;
        Ok(())
    })
}

/// Pairwise margin loss of one set.
///
/// # Safety
/// `gold` and `pred` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lfr_set_loss(
    gold: *const f64,
    pred: *const f64,
    n: usize,
    gamma: f64,
    out_loss: *mut f64,
) -> LfrStatus {
    guard(|| {
        let l = set_loss(slice(gold, n, "gold")?, slice(pred, n, "pred")?, gamma)?;
        *out(out_loss, "out_loss")? = l;
        Ok(())
    })
}

/// Sentence BLEU (up to 4-grams, no smoothing).
///
/// # Safety
/// Both strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lfr_bleu(candidate: *const c_char, reference: *const c_char, out_score: *mut f64) -> LfrStatus {
    guard(|| {
        let s = bleu(text(candidate, "candidate")?, text(reference, "reference")?)?;
        *out(out_score, "out_score")? = s;
        Ok(())
    })
}

/// Standardize `n` values into `out_values` (may alias `values`). Writes
/// zeros and sets `*out_degenerate` to 1 for constant or single inputs.
///
/// # Safety
/// `values` and `out_values` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lfr_standardize(
    values: *const f64,
    n: usize,
    out_values: *mut f64,
    out_degenerate: *mut i32,
) -> LfrStatus {
    guard(|| {
        let (z, degenerate) = standardize(slice(values, n, "values")?);
        if n > 0 {
            if out_values.is_null() {
                return Err(fail(LfrStatus::NullPointer, "out_values is null"));
            }
            ptr::copy(z.as_ptr(), out_values, n);
        }
        if let Some(d) = out_degenerate.as_mut() {
            *d = degenerate as i32;
        }
        Ok(())
    })
}

unsafe fn scored_sets<'a>(
    scores: *const f64,
    labels: *const u8,
    set_sizes: *const usize,
    n_sets: usize,
) -> Result<Vec<ScoredSet<'a>>, Failure> {
    let sizes = slice(set_sizes, n_sets, "set_sizes")?;
    let total: usize = sizes.iter().sum();
    let scores = slice(scores, total, "scores")?;
    let labels = slice(labels, total, "labels")?;
    let mut at = 0;
    Ok(sizes
        .iter()
        .map(|&k| {
            let s = ScoredSet::new(&scores[at..at + k], &labels[at..at + k]);
            at += k;
            s
        })
        .collect())
}

/// Top-1 accuracy over `n_sets` sets stored back to back; `set_sizes[i]`
/// gives the length of set `i`.
///
/// # Safety
/// Arrays must hold `sum(set_sizes)` elements.
#[no_mangle]
pub unsafe extern "C" fn lfr_top1_accuracy(
    scores: *const f64,
    labels: *const u8,
    set_sizes: *const usize,
    n_sets: usize,
    out_value: *mut f64,
) -> LfrStatus {
    guard(|| {
        let sets = scored_sets(scores, labels, set_sizes, n_sets)?;
        *out(out_value, "out_value")? = top1_accuracy(&sets)?.value;
        Ok(())
    })
}

/// Pooled ranking accuracy, laid out as for [`lfr_top1_accuracy`].
/// `per_set_mean` nonzero averages per set instead.
///
/// # Safety
/// Arrays must hold `sum(set_sizes)` elements.
#[no_mangle]
pub unsafe extern "C" fn lfr_ranking_accuracy(
    scores: *const f64,
    labels: *const u8,
    set_sizes: *const usize,
    n_sets: usize,
    per_set_mean: i32,
    out_value: *mut f64,
) -> LfrStatus {
    guard(|| {
        let sets = scored_sets(scores, labels, set_sizes, n_sets)?;
        *out(out_value, "out_value")? = ranking_accuracy(&sets, per_set_mean != 0)?.value;
        Ok(())
    })
}

/// Rewrite Freebase identifiers with the built-in table. The result is
/// allocated here; free it with [`lfr_string_free`].
///
/// # Safety
/// `lf` must be NUL-terminated and `out_text` writable.
#[no_mangle]
pub unsafe extern "C" fn lfr_map_freebase_ids(lf: *const c_char, out_text: *mut *mut c_char) -> LfrStatus {
    guard(|| {
        let slot = out(out_text, "out_text")?;
        *slot = ptr::null_mut();
        let mapped = map_freebase_ids(text(lf, "lf")?, IdentifierMap::builtin());
        *slot = CString::new(mapped)
            .map_err(|_| fail(LfrStatus::InvalidArgument, "mapped text contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lfr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
