//! C ABI over `asrdata`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`AsrStatus`]. On failure a message is
//!   available from [`asr_last_error`] until the next failing call on the
//!   same thread.
//! * Objects are opaque handles created by `asr_*_parse`/`_load`/`_extract`
//!   functions and released with the matching `asr_*_free`.
//! * Strings returned through `char **out` are owned by the caller and must
//!   be released with [`asr_string_free`].
//! * Input strings are NUL-terminated UTF-8.
//! * No function unwinds into the caller; a panic becomes `ASR_STATUS_PANIC`.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use asrdata::corpus::{self, CorpusFormat, NormalizationRules};
use asrdata::eval::{EvalOptions, InsertionAttribution};
use asrdata::lm::NGramLm;
use asrdata::selector::{self, Budget, DurationModel, SelectionState, Weights};
use asrdata::textmetrics;
use asrdata::{Corpus, DomainTermSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Io = 5,
    Selection = 6,
    Evaluation = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsrBudgetKind {
    /// `budget` is a sentence count.
    Count = 0,
    /// `budget` is seconds of estimated speech.
    Seconds = 1,
}

/// Parsed sentences.
pub struct AsrCorpus(Corpus);

/// Domain term list.
pub struct AsrTermSet(DomainTermSet);

/// Result of a selection run.
pub struct AsrSelection(SelectionState);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsrSelectParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub budget_kind: AsrBudgetKind,
    pub budget: f64,
    /// Speaking rate for duration estimates.
    pub wpm: f64,
    /// n-gram order of the perplexity model.
    pub lm_order: usize,
    /// Add-k smoothing constant of the perplexity model.
    pub lm_smoothing: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AsrWerReport {
    pub wer: f64,
    /// Meaningful only when `has_b_wer`.
    pub b_wer: f64,
    pub has_b_wer: bool,
    /// Meaningful only when `has_u_wer`.
    pub u_wer: f64,
    pub has_u_wer: bool,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_ref: usize,
    pub n_ref_biased: usize,
    pub n_ref_unbiased: usize,
    pub utterances: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AsrStatus, String);

impl Failure {
    fn new(status: AsrStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "\\0")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AsrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AsrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(AsrStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(AsrStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(AsrStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(AsrStatus::NullPointer, format!("{name} is NULL")))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "\\0")).expect("NULs replaced").into_raw()
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn asr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn asr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Tokenizes `text` with the default normalization; writes a JSON array of tokens.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_tokenize(text: *const c_char, out: *mut *mut c_char) -> AsrStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let tokens = corpus::tokenize(text, &NormalizationRules::default());
        *out = c_string(serde_json::to_string(&tokens).expect("tokens serialize"));
        Ok(())
    })
}

fn parse_corpus(text: &str, source: &str, jsonl: bool, allow_empty: bool) -> Result<Corpus, Failure> {
    let format = if jsonl { CorpusFormat::Jsonl } else { CorpusFormat::PlainLines };
    corpus::parse_records(text, source, format, &NormalizationRules::default(), allow_empty)
        .map_err(|e| Failure::new(AsrStatus::Parse, e))
}

/// Parses one sentence per line (ids `0..n`), or JSONL records when `jsonl`.
/// With `allow_empty`, lines without tokens are kept, as for ASR hypotheses.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_parse(
    text: *const c_char,
    jsonl: bool,
    allow_empty: bool,
    out: *mut *mut AsrCorpus,
) -> AsrStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        *out = boxed(AsrCorpus(parse_corpus(text, "<memory>", jsonl, allow_empty)?));
        Ok(())
    })
}

/// Loads a corpus file; `.jsonl` files are read as records, others as lines.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_load(path: *const c_char, allow_empty: bool, out: *mut *mut AsrCorpus) -> AsrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let text = std::fs::read_to_string(path).map_err(|e| Failure::new(AsrStatus::Io, format!("{path}: {e}")))?;
        let jsonl = CorpusFormat::from_path(Path::new(path)) == CorpusFormat::Jsonl;
        *out = boxed(AsrCorpus(parse_corpus(&text, path, jsonl, allow_empty)?));
        Ok(())
    })
}

/// Number of sentences; 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_len(c: *const AsrCorpus) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `c` must be NULL or a corpus handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_free(c: *mut AsrCorpus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

fn metric(r: Result<f64, textmetrics::MetricError>) -> Result<f64, Failure> {
    r.map_err(|e| Failure::new(AsrStatus::InvalidArgument, e))
}

/// Moving-average type-token ratio over the concatenated tokens.
///
/// # Safety
/// `c` must be a live corpus handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_mattr(c: *const AsrCorpus, window: usize, out: *mut f64) -> AsrStatus {
    guard(|| {
        let c = ref_arg(c, "corpus")?;
        *out_arg(out, "out")? = metric(textmetrics::corpus_mattr(&c.0, window))?;
        Ok(())
    })
}

/// Distinct n-grams over total n-grams, counted within sentences.
///
/// # Safety
/// `c` must be a live corpus handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_distinct_n(c: *const AsrCorpus, n: usize, out: *mut f64) -> AsrStatus {
    guard(|| {
        let c = ref_arg(c, "corpus")?;
        *out_arg(out, "out")? = metric(textmetrics::distinct_n(&c.0, n))?;
        Ok(())
    })
}

fn train_lm(training: &Corpus, order: usize, k: f64) -> Result<NGramLm, Failure> {
    NGramLm::train(training, order, k).map_err(|e| Failure::new(AsrStatus::InvalidArgument, e))
}

/// Mean sentence perplexity of `c` under an add-k n-gram model trained on
/// `training` (or on `c` itself when `training` is NULL).
///
/// # Safety
/// `c` must be a live corpus handle, `training` NULL or a live corpus handle,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_corpus_mean_perplexity(
    c: *const AsrCorpus,
    training: *const AsrCorpus,
    order: usize,
    smoothing: f64,
    out: *mut f64,
) -> AsrStatus {
    guard(|| {
        let c = ref_arg(c, "corpus")?;
        let lm = train_lm(training.as_ref().map_or(&c.0, |t| &t.0), order, smoothing)?;
        *out_arg(out, "out")? = metric(textmetrics::mean_perplexity(&c.0, &lm))?;
        Ok(())
    })
}

/// Parses a term list: one `term` or `term<TAB>count` per line.
///
/// # Safety
/// `tsv` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_parse(tsv: *const c_char, out: *mut *mut AsrTermSet) -> AsrStatus {
    guard(|| {
        let tsv = str_arg(tsv, "tsv")?;
        let out = out_arg(out, "out")?;
        let d = DomainTermSet::parse(tsv, "<memory>", &NormalizationRules::default())
            .map_err(|e| Failure::new(AsrStatus::Parse, e))?;
        *out = boxed(AsrTermSet(d));
        Ok(())
    })
}

/// Words occurring at least `min_frequency` times in `transcripts` that do
/// not occur in `reference_vocab` (newline-separated).
///
/// # Safety
/// `transcripts` must be a live corpus handle, `reference_vocab` a valid C
/// string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_extract(
    transcripts: *const AsrCorpus,
    reference_vocab: *const c_char,
    min_frequency: usize,
    out: *mut *mut AsrTermSet,
) -> AsrStatus {
    guard(|| {
        let t = ref_arg(transcripts, "transcripts")?;
        let vocab_text = str_arg(reference_vocab, "reference_vocab")?;
        let out = out_arg(out, "out")?;
        let rules = NormalizationRules::default();
        let vocab: HashSet<String> = vocab_text.lines().flat_map(|l| corpus::tokenize(l, &rules)).collect();
        *out = boxed(AsrTermSet(corpus::extract_domain_terms(&t.0, &vocab, min_frequency)));
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a live term-set handle.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_len(t: *const AsrTermSet) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Whether `word`, after normalization, is a term. False on any bad argument.
///
/// # Safety
/// `t` must be NULL or a live term-set handle; `word` NULL or a valid C string.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_contains(t: *const AsrTermSet, word: *const c_char) -> bool {
    let (Some(t), Ok(w)) = (t.as_ref(), str_arg(word, "word")) else {
        return false;
    };
    let tokens = corpus::tokenize(w, &NormalizationRules::default());
    tokens.len() == 1 && t.0.contains(&tokens[0])
}

/// Writes the term list as `term<TAB>count` lines.
///
/// # Safety
/// `t` must be a live term-set handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_to_tsv(t: *const AsrTermSet, out: *mut *mut c_char) -> AsrStatus {
    guard(|| {
        let t = ref_arg(t, "terms")?;
        *out_arg(out, "out")? = c_string(t.0.to_tsv());
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a term-set handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asr_terms_free(t: *mut AsrTermSet) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Weights 6:3:1, a one-hour budget at 160 words per minute, trigram model with k = 0.1.
#[no_mangle]
pub extern "C" fn asr_select_params_default() -> AsrSelectParams {
    AsrSelectParams {
        alpha: 6.0,
        beta: 3.0,
        gamma: 1.0,
        budget_kind: AsrBudgetKind::Seconds,
        budget: 3600.0,
        wpm: selector::DEFAULT_WPM,
        lm_order: asrdata::lm::DEFAULT_ORDER,
        lm_smoothing: asrdata::lm::DEFAULT_SMOOTHING,
    }
}

/// Greedy tri-objective selection from `pool` under the budget in `params`.
/// Perplexity comes from an n-gram model trained on `lm_training`, or on the
/// pool when `lm_training` is NULL.
///
/// # Safety
/// `pool` and `terms` must be live handles, `lm_training` NULL or a live
/// corpus handle, `params` a valid pointer, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_select_greedy(
    pool: *const AsrCorpus,
    terms: *const AsrTermSet,
    lm_training: *const AsrCorpus,
    params: *const AsrSelectParams,
    out: *mut *mut AsrSelection,
) -> AsrStatus {
    guard(|| {
        let pool = &ref_arg(pool, "pool")?.0;
        let terms = &ref_arg(terms, "terms")?.0;
        let p = *ref_arg(params, "params")?;
        let out = out_arg(out, "out")?;
        let sel_err = |e: selector::SelectionError| Failure::new(AsrStatus::Selection, e);
        let w = Weights::new(p.alpha, p.beta, p.gamma).map_err(sel_err)?;
        if !(p.wpm > 0.0 && p.wpm.is_finite()) {
            return Err(Failure::new(AsrStatus::InvalidArgument, "wpm must be positive"));
        }
        let budget = match p.budget_kind {
            AsrBudgetKind::Count if p.budget >= 0.0 && p.budget.fract() == 0.0 => Budget::count(p.budget as usize),
            AsrBudgetKind::Count => {
                return Err(Failure::new(AsrStatus::InvalidArgument, "count budget must be a whole number"))
            }
            AsrBudgetKind::Seconds => Budget::seconds(p.budget),
        }
        .with_duration_model(DurationModel::HeuristicWpm { wpm: p.wpm });
        let lm = train_lm(lm_training.as_ref().map_or(pool, |t| &t.0), p.lm_order, p.lm_smoothing)?;
        let features = selector::compute_static_features(pool, &lm, terms).map_err(sel_err)?;
        let state = selector::greedy_select(pool, &features, &w, &budget).map_err(sel_err)?;
        *out = boxed(AsrSelection(state));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a live selection handle.
#[no_mangle]
pub unsafe extern "C" fn asr_selection_len(s: *const AsrSelection) -> usize {
    s.as_ref().map_or(0, |s| s.0.selected.len())
}

/// Id of the `index`-th selected sentence, in selection order.
///
/// # Safety
/// `s` must be a live selection handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_selection_id(s: *const AsrSelection, index: usize, out: *mut *mut c_char) -> AsrStatus {
    guard(|| {
        let s = ref_arg(s, "selection")?;
        let out = out_arg(out, "out")?;
        let e = s.0.selected.get(index).ok_or_else(|| {
            Failure::new(
                AsrStatus::InvalidArgument,
                format!("index {index} out of range ({} selected)", s.0.selected.len()),
            )
        })?;
        *out = c_string(e.id.clone());
        Ok(())
    })
}

/// Estimated seconds of the selection; 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live selection handle.
#[no_mangle]
pub unsafe extern "C" fn asr_selection_total_duration(s: *const AsrSelection) -> f64 {
    s.as_ref().map_or(0.0, |s| s.0.total_duration())
}

/// Selected entries as a JSON array with step scores and raw features.
///
/// # Safety
/// `s` must be a live selection handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_selection_to_json(s: *const AsrSelection, out: *mut *mut c_char) -> AsrStatus {
    guard(|| {
        let s = ref_arg(s, "selection")?;
        *out_arg(out, "out")? = c_string(serde_json::to_string(&s.0.selected).expect("selection serializes"));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a selection handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asr_selection_free(s: *mut AsrSelection) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// WER, B-WER (term words) and U-WER (other words). Utterances are paired
/// by id. Insertions are charged to the class of the inserted word unless
/// `unbiased_insertions` is set.
///
/// # Safety
/// `reference`, `hypothesis` and `terms` must be live handles and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asr_evaluate(
    reference: *const AsrCorpus,
    hypothesis: *const AsrCorpus,
    terms: *const AsrTermSet,
    unbiased_insertions: bool,
    out: *mut AsrWerReport,
) -> AsrStatus {
    guard(|| {
        let r = &ref_arg(reference, "reference")?.0;
        let h = &ref_arg(hypothesis, "hypothesis")?.0;
        let t = &ref_arg(terms, "terms")?.0;
        let out = out_arg(out, "out")?;
        let opts = EvalOptions {
            insertions: if unbiased_insertions {
                InsertionAttribution::Unbiased
            } else {
                InsertionAttribution::HypothesisWord
            },
        };
        let rep = asrdata::evaluate(r, h, t, &opts).map_err(|e| Failure::new(AsrStatus::Evaluation, e))?;
        *out = AsrWerReport {
            wer: rep.wer,
            b_wer: rep.b_wer.unwrap_or(f64::NAN),
            has_b_wer: rep.b_wer.is_some(),
            u_wer: rep.u_wer.unwrap_or(f64::NAN),
            has_u_wer: rep.u_wer.is_some(),
            substitutions: rep.counts.substitutions,
            deletions: rep.counts.deletions,
            insertions: rep.counts.insertions,
            n_ref: rep.n_ref,
            n_ref_biased: rep.n_ref_biased,
            n_ref_unbiased: rep.n_ref_unbiased,
            utterances: rep.utterances,
        };
        Ok(())
    })
}
