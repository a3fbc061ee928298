//! C ABI over the dynrank library.
//!
//! Handles (`DrCorpus`, `DrRanking`, `DrModel`) are opaque and owned by the caller, who releases
//! them with the matching `*_free` function. Every fallible function returns a [`DrStatus`]
//! and writes its result through an out pointer; on failure the message is available from
//! [`dr_last_error_message`] on the same thread until the next failing call. Strings returned
//! through `char **` out pointers are released with [`dr_string_free`].
//!
//! A ranking handle carries no reference to its corpus; functions taking both check that the
//! ranking is valid for the given query.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dynrank::features::FeatureTemplate;
use dynrank::gains::dynamic_utility_expected;
use dynrank::io::{self, LoadOptions, ProbMode};
use dynrank::learn::{predict_case, Model};
use dynrank::ranking::validate_ranking;
use dynrank::usermodel::truncated_metric;
use dynrank::{
    greedy_two_level, Error, GainSpec, GreedyOptions, QueryCase, ShapeParams, TwoLevelRanking,
};

/// Incremented on any incompatible change to the functions or types below.
pub const DR_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// Query index outside the corpus.
    OutOfRange = 3,
    InvalidArgument = 4,
    Parse = 5,
    Io = 6,
    Model = 7,
    /// The ranking does not fit the query's candidate set.
    InvalidRanking = 8,
    /// Unexpected internal failure; the library state is unchanged.
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrProbMode {
    Auto = 0,
    Explicit = 1,
    Proportional = 2,
    Uniform = 3,
}

pub struct DrCorpus {
    cases: Vec<QueryCase>,
}

pub struct DrRanking {
    ranking: TwoLevelRanking,
}

pub struct DrModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => DrStatus::Parse,
            Error::Io(_) => DrStatus::Io,
            Error::Model(_) | Error::DimensionMismatch { .. } => DrStatus::Model,
            Error::InvalidRanking(_) => DrStatus::InvalidRanking,
            _ => DrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F>(f: F) -> DrStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DrStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DrStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

fn query(corpus: &DrCorpus, index: usize) -> Result<&QueryCase, Failure> {
    corpus.cases.get(index).ok_or_else(|| {
        Failure(
            DrStatus::OutOfRange,
            format!("query {index} outside a corpus of {}", corpus.cases.len()),
        )
    })
}

fn gain(name: &str) -> Result<GainSpec, Failure> {
    Ok(name.parse::<GainSpec>()?)
}

fn shape(length: usize, width: usize) -> Result<ShapeParams, Failure> {
    Ok(ShapeParams::new(length, width)?)
}

fn check_ranking(r: &TwoLevelRanking, case: &QueryCase) -> Result<(), Failure> {
    let width = r.rows.iter().map(|row| row.tail.len()).max().unwrap_or(0);
    validate_ranking(r, case, &shape(r.len().max(1), width)?).map_err(Error::from)?;
    Ok(())
}

fn load_options(mode: DrProbMode, binarize: bool) -> LoadOptions {
    LoadOptions {
        binarize,
        prob_mode: match mode {
            DrProbMode::Auto => ProbMode::Auto,
            DrProbMode::Explicit => ProbMode::Explicit,
            DrProbMode::Proportional => ProbMode::Proportional,
            DrProbMode::Uniform => ProbMode::Uniform,
        },
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(DrStatus::InvalidArgument, "string contains NUL".into()))
}

#[no_mangle]
pub extern "C" fn dr_abi_version() -> u32 {
    DR_ABI_VERSION
}

/// Message of the last failure on this thread; empty if none. Owned by the library.
#[no_mangle]
pub extern "C" fn dr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a corpus file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_load(
    path: *const c_char,
    prob_mode: DrProbMode,
    binarize: bool,
    out: *mut *mut DrCorpus,
) -> DrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let cases = io::load_corpus(Path::new(path), &load_options(prob_mode, binarize))?;
        put(out, Box::into_raw(Box::new(DrCorpus { cases })))
    })
}

/// Parses corpus text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_parse(
    text: *const c_char,
    prob_mode: DrProbMode,
    binarize: bool,
    out: *mut *mut DrCorpus,
) -> DrStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let cases = io::parse_corpus(text, &load_options(prob_mode, binarize))?;
        put(out, Box::into_raw(Box::new(DrCorpus { cases })))
    })
}

/// # Safety
/// `corpus` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_free(corpus: *mut DrCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of queries; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_len(corpus: *const DrCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.cases.len())
}

/// Number of candidate documents of query `index`.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_n_docs(
    corpus: *const DrCorpus,
    index: usize,
    out: *mut usize,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        put(out, case.n_docs())
    })
}

/// Identifier of query `index`, to be released with [`dr_string_free`].
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_corpus_query_id(
    corpus: *const DrCorpus,
    index: usize,
    out: *mut *mut c_char,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        put(out, into_c_string(case.query_id().to_string())?)
    })
}

/// Nested greedy ranking of query `index` with `length` rows and tails of at most `width`.
///
/// # Safety
/// `corpus` must be a live handle, `gain` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_rank_greedy(
    corpus: *const DrCorpus,
    index: usize,
    gain_name: *const c_char,
    length: usize,
    width: usize,
    out: *mut *mut DrRanking,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let spec = gain(str_arg(gain_name, "gain")?)?;
        let ranking = greedy_two_level(
            case,
            &spec,
            &shape(length, width)?,
            GreedyOptions::default(),
        )?;
        put(out, Box::into_raw(Box::new(DrRanking { ranking })))
    })
}

/// Parses `head:tail,tail head ...` against the document labels of query `index`.
///
/// # Safety
/// `corpus` must be a live handle, `text` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_ranking_parse(
    corpus: *const DrCorpus,
    index: usize,
    text: *const c_char,
    out: *mut *mut DrRanking,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let ranking = io::parse_ranking(str_arg(text, "text")?, case)?;
        check_ranking(&ranking, case)?;
        put(out, Box::into_raw(Box::new(DrRanking { ranking })))
    })
}

/// # Safety
/// `ranking` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_ranking_free(ranking: *mut DrRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

/// Expected dynamic utility of `ranking` for query `index` under `gain`.
///
/// # Safety
/// Handles must be live, `gain` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_ranking_utility(
    corpus: *const DrCorpus,
    index: usize,
    ranking: *const DrRanking,
    gain_name: *const c_char,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let r = &ref_arg(ranking, "ranking")?.ranking;
        check_ranking(r, case)?;
        let spec = gain(str_arg(gain_name, "gain")?)?;
        put(out, dynamic_utility_expected(r, case, &spec)?)
    })
}

/// Expected utility of the first `k` documents on each intent's user path.
///
/// # Safety
/// Handles must be live, `gain` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_ranking_truncated(
    corpus: *const DrCorpus,
    index: usize,
    ranking: *const DrRanking,
    gain_name: *const c_char,
    k: usize,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let r = &ref_arg(ranking, "ranking")?.ranking;
        check_ranking(r, case)?;
        let spec = gain(str_arg(gain_name, "gain")?)?;
        put(out, truncated_metric(r, case, &spec, k)?)
    })
}

/// Text form of `ranking` using the labels of query `index`; release with [`dr_string_free`].
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_ranking_to_string(
    corpus: *const DrCorpus,
    index: usize,
    ranking: *const DrRanking,
    out: *mut *mut c_char,
) -> DrStatus {
    guard(|| {
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let r = &ref_arg(ranking, "ranking")?.ranking;
        check_ranking(r, case)?;
        put(out, into_c_string(io::format_ranking(r, case)?)?)
    })
}

/// Loads a model file. `template_path` may be null for the default feature template.
///
/// # Safety
/// `path` must be a NUL-terminated string, `template_path` null or one, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_model_load(
    path: *const c_char,
    template_path: *const c_char,
    out: *mut *mut DrModel,
) -> DrStatus {
    guard(|| {
        let read = |p: &str| {
            std::fs::read_to_string(p).map_err(|e| Failure(DrStatus::Io, format!("{p}: {e}")))
        };
        let template = if template_path.is_null() {
            FeatureTemplate::default()
        } else {
            FeatureTemplate::from_config(&read(str_arg(template_path, "template_path")?)?)?
        };
        let model = Model::from_text(&read(str_arg(path, "path")?)?, &template)?;
        put(out, Box::into_raw(Box::new(DrModel { model })))
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_model_free(model: *mut DrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Ranking of query `index` predicted by `model`. The query needs document text.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_predict(
    model: *const DrModel,
    corpus: *const DrCorpus,
    index: usize,
    length: usize,
    width: usize,
    out: *mut *mut DrRanking,
) -> DrStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let case = query(ref_arg(corpus, "corpus")?, index)?;
        let spec = GainSpec::new(m.gain.clone());
        let ranking = predict_case(&m.weights, case, &m.template, &spec, &shape(length, width)?)?;
        put(out, Box::into_raw(Box::new(DrRanking { ranking })))
    })
}
