//! C interface to `kbdecode`.
//!
//! Objects cross the boundary as opaque handles (`KbVocab`, `KbTrie`, `KbLm`,
//! `KbResult`) created by `kb_*_load`/`kb_*_build`/`kb_decode` and released
//! with the matching `kb_*_free`. Every fallible call returns a [`KbStatus`];
//! on failure `kb_last_error()` describes the problem for the calling thread.
//!
//! Strings are NUL-terminated UTF-8. Strings returned by the library are
//! owned by the handle they came from and stay valid until it is freed.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kbdecode::eval;
use kbdecode::lm::{CharLm, LmScorer, MultiLevelLm, NgramModel, Unit, WordLm};
use kbdecode::{io, DecodeError, DecoderConfig, EmissionMatrix, KeywordTrie, TokenId, Vocabulary};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be opened or read.
    Io = 3,
    /// A file or buffer was read but its contents are malformed.
    Parse = 4,
    /// An argument was out of range or inconsistent with another.
    InvalidArgument = 5,
    /// The decoder rejected its inputs.
    Decode = 6,
    /// The library panicked; the handle arguments should be considered lost.
    Internal = 7,
}

/// A token inventory with its blank and word-boundary tokens.
pub struct KbVocab(Vocabulary);

/// A keyword tree bound to the vocabulary it was built with.
pub struct KbTrie(KeywordTrie);

/// A loaded language model (character, word or multi-level).
pub struct KbLm(Box<dyn LmScorer>);

/// The output of one `kb_decode` call.
pub struct KbResult {
    transcripts: Vec<CString>,
    hyps: Vec<kbdecode::Hypothesis>,
}

/// Decoder settings. Obtain defaults from `kb_decoder_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KbDecoderConfig {
    pub beam_width: usize,
    pub keyword_weight: f64,
    pub lm_weight: f64,
    /// Tokens this many nats below the frame maximum are skipped.
    /// A negative value disables pruning.
    pub prune_logp_threshold: f64,
    pub length_bonus: f64,
    pub nbest: usize,
    /// Accept zero-frame input and return an empty transcript.
    pub allow_empty: bool,
}

/// One entry of the n-best list. `transcript` is owned by the result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KbHypothesis {
    pub transcript: *const c_char,
    pub score_total: f64,
    pub score_am: f64,
    pub score_lm: f64,
    pub score_boost: f64,
    pub score_length: f64,
    pub words: usize,
}

/// Keyword precision/recall plus error rates for one reference/hypothesis pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KbKeywordMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub wer: f64,
    pub cer: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(KbStatus, String);

impl Failure {
    fn new(status: KbStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        let status = match e {
            io::IoError::Io { .. } => KbStatus::Io,
            _ => KbStatus::Parse,
        };
        Failure::new(status, e)
    }
}

impl From<kbdecode::lm::ArpaError> for Failure {
    fn from(e: kbdecode::lm::ArpaError) -> Self {
        let status = match e {
            kbdecode::lm::ArpaError::Io(_) => KbStatus::Io,
            _ => KbStatus::Parse,
        };
        Failure::new(status, e)
    }
}

impl From<DecodeError> for Failure {
    fn from(e: DecodeError) -> Self {
        Failure::new(KbStatus::Decode, e)
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Runs `body`, records any failure for `kb_last_error` and turns panics into
/// `KB_STATUS_INTERNAL`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> KbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            KbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal error: {msg}"));
            KbStatus::Internal
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either NULL or a pointer to a live object.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(KbStatus::NullArgument, format!("{name} is NULL")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::new(KbStatus::NullArgument, format!("{name} is NULL")))
    } else {
        Ok(p)
    }
}

fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(KbStatus::NullArgument, format!("{name} is NULL")));
    }
    // SAFETY: non-NULL string arguments must be NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure::new(KbStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn str_array<'a>(p: *const *const c_char, len: usize, name: &str) -> Result<Vec<&'a str>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::new(KbStatus::NullArgument, format!("{name} is NULL")));
    }
    // SAFETY: the caller guarantees `len` readable entries.
    let items = unsafe { std::slice::from_raw_parts(p, len) };
    items
        .iter()
        .enumerate()
        .map(|(i, &s)| str_arg(s, &format!("{name}[{i}]")))
        .collect()
}

fn give<T>(out: *mut *mut T, value: T) {
    // SAFETY: `out` was checked non-NULL by the caller.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message describing the last failed call on this thread, or "" after a
/// successful call. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn kb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- vocabulary

/// Loads a vocabulary file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn kb_vocab_load(path: *const c_char, out: *mut *mut KbVocab) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = io::load_vocab(str_arg(path, "path")?)?;
        give(out, KbVocab(v));
        Ok(())
    })
}

/// Builds a vocabulary from `len` token strings. `boundary` < 0 means the
/// vocabulary has no word-boundary token.
///
/// # Safety
/// `tokens` must point to `len` NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kb_vocab_new(
    tokens: *const *const c_char,
    len: usize,
    blank: u32,
    boundary: i64,
    out: *mut *mut KbVocab,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let toks = str_array(tokens, len, "tokens")?.into_iter().map(String::from).collect();
        let boundary = match boundary {
            b if b < 0 => None,
            b => Some(TokenId(
                u32::try_from(b).map_err(|_| Failure::new(KbStatus::InvalidArgument, "boundary id too large"))?,
            )),
        };
        let v = Vocabulary::new(toks, TokenId(blank), boundary)
            .map_err(|e| Failure::new(KbStatus::InvalidArgument, e))?;
        give(out, KbVocab(v));
        Ok(())
    })
}

/// Number of tokens, or 0 for NULL.
///
/// # Safety
/// `vocab` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kb_vocab_len(vocab: *const KbVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.0.len())
}

/// # Safety
/// `vocab` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kb_vocab_free(vocab: *mut KbVocab) {
    release(vocab)
}

// ---------------------------------------------------------------- keywords

/// Builds a keyword tree from `len` keywords. Single-character entries are
/// dropped and duplicates keep their first position.
///
/// # Safety
/// `vocab` must be a live handle, `keywords` must point to `len`
/// NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kb_trie_build(
    vocab: *const KbVocab,
    keywords: *const *const c_char,
    len: usize,
    out: *mut *mut KbTrie,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let vocab = non_null(vocab, "vocab")?;
        let words = str_array(keywords, len, "keywords")?;
        let t = KeywordTrie::build_from_list(words, &vocab.0)
            .map_err(|e| Failure::new(KbStatus::InvalidArgument, e))?;
        give(out, KbTrie(t));
        Ok(())
    })
}

/// Loads a keyword list file (one keyword per line) into a tree.
///
/// # Safety
/// `vocab` must be a live handle, `path` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kb_trie_load(
    vocab: *const KbVocab,
    path: *const c_char,
    out: *mut *mut KbTrie,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let vocab = non_null(vocab, "vocab")?;
        let words = io::load_keyword_list(str_arg(path, "path")?)?;
        let t = KeywordTrie::build_from_list(words, &vocab.0)
            .map_err(|e| Failure::new(KbStatus::Parse, e))?;
        give(out, KbTrie(t));
        Ok(())
    })
}

/// Number of distinct keywords, or 0 for NULL.
///
/// # Safety
/// `trie` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kb_trie_num_keywords(trie: *const KbTrie) -> usize {
    trie.as_ref().map_or(0, |t| t.0.keywords().len())
}

/// # Safety
/// `trie` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kb_trie_free(trie: *mut KbTrie) {
    release(trie)
}

// ---------------------------------------------------------------- language models

/// Loads a language model. Pass a character ARPA file, a word ARPA file, or
/// both for multi-level scoring; NULL leaves that level out.
/// `word_oov_penalty` (natural log, ≤ 0) only applies to multi-level models.
///
/// # Safety
/// Non-NULL paths must be NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kb_lm_load(
    char_arpa: *const c_char,
    word_arpa: *const c_char,
    word_oov_penalty: f64,
    out: *mut *mut KbLm,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let load = |p: *const c_char, name: &str, unit: Unit| -> Result<Option<NgramModel>, Failure> {
            if p.is_null() {
                return Ok(None);
            }
            Ok(Some(NgramModel::load(str_arg(p, name)?, unit)?))
        };
        let chars = load(char_arpa, "char_arpa", Unit::Character)?;
        let words = load(word_arpa, "word_arpa", Unit::Word)?;
        let lm: Box<dyn LmScorer> = match (chars, words) {
            (Some(c), None) => Box::new(CharLm::new(c)),
            (None, Some(w)) => Box::new(WordLm::new(w)),
            (Some(c), Some(w)) => {
                if !(word_oov_penalty.is_finite() && word_oov_penalty <= 0.0) {
                    return Err(Failure::new(KbStatus::InvalidArgument, "word OOV penalty must be finite and <= 0"));
                }
                Box::new(MultiLevelLm::new(c, w).with_oov_penalty(word_oov_penalty))
            }
            (None, None) => return Err(Failure::new(KbStatus::NullArgument, "no ARPA file given")),
        };
        give(out, KbLm(lm));
        Ok(())
    })
}

/// # Safety
/// `lm` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kb_lm_free(lm: *mut KbLm) {
    release(lm)
}

// ---------------------------------------------------------------- decoding

/// Default decoder settings: 100 beams, no boosting, no LM, prune at 20 nats.
#[no_mangle]
pub extern "C" fn kb_decoder_config_default() -> KbDecoderConfig {
    let d = DecoderConfig::default();
    KbDecoderConfig {
        beam_width: d.beam_width,
        keyword_weight: d.keyword_weight,
        lm_weight: d.lm_weight,
        prune_logp_threshold: d.prune_logp_threshold.unwrap_or(-1.0),
        length_bonus: d.length_bonus,
        nbest: d.nbest,
        allow_empty: d.allow_empty,
    }
}

impl From<&KbDecoderConfig> for DecoderConfig {
    fn from(c: &KbDecoderConfig) -> Self {
        DecoderConfig {
            beam_width: c.beam_width,
            keyword_weight: c.keyword_weight,
            lm_weight: c.lm_weight,
            prune_logp_threshold: (c.prune_logp_threshold >= 0.0 || c.prune_logp_threshold.is_nan())
                .then_some(c.prune_logp_threshold),
            length_bonus: c.length_bonus,
            nbest: c.nbest,
            allow_empty: c.allow_empty,
        }
    }
}

/// Decodes a row-major `frames x vocab_size` matrix of natural-log
/// probabilities. `trie` and `lm` may be NULL; `config` NULL means defaults.
///
/// # Safety
/// `logp` must point to `frames * vocab_size` floats, handles must be live
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kb_decode(
    vocab: *const KbVocab,
    trie: *const KbTrie,
    lm: *const KbLm,
    logp: *const f32,
    frames: usize,
    vocab_size: usize,
    config: *const KbDecoderConfig,
    out: *mut *mut KbResult,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let vocab = non_null(vocab, "vocab")?;
        let n = frames
            .checked_mul(vocab_size)
            .ok_or_else(|| Failure::new(KbStatus::InvalidArgument, "frames * vocab_size overflows"))?;
        let values = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(non_null(logp, "logp")?, n).to_vec()
        };
        let m = EmissionMatrix::new(frames, vocab_size, values)
            .map_err(|e| Failure::new(KbStatus::InvalidArgument, e))?;
        let cfg = config.as_ref().map_or_else(DecoderConfig::default, DecoderConfig::from);
        let trie = trie.as_ref().map(|t| &t.0);
        let lm = lm.as_ref().map(|l| &*l.0);
        let r = kbdecode::decode(&m, &vocab.0, trie, lm, &cfg)?;
        let transcripts = r
            .n_best
            .iter()
            .map(|h| CString::new(h.transcript.as_str()))
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::new(KbStatus::Internal, e))?;
        give(out, KbResult { transcripts, hyps: r.n_best });
        Ok(())
    })
}

/// Best transcript, or NULL for a NULL result.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kb_result_transcript(result: *const KbResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.transcripts[0].as_ptr())
}

/// Number of n-best entries, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kb_result_nbest_len(result: *const KbResult) -> usize {
    result.as_ref().map_or(0, |r| r.hyps.len())
}

/// Copies n-best entry `index` (0 = best) into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kb_result_hypothesis(
    result: *const KbResult,
    index: usize,
    out: *mut KbHypothesis,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let r = non_null(result, "result")?;
        let h = r.hyps.get(index).ok_or_else(|| {
            Failure::new(KbStatus::InvalidArgument, format!("index {index} out of range ({} entries)", r.hyps.len()))
        })?;
        *out = KbHypothesis {
            transcript: r.transcripts[index].as_ptr(),
            score_total: h.score_total,
            score_am: h.score_am,
            score_lm: h.score_lm,
            score_boost: h.score_boost,
            score_length: h.score_length,
            words: h.words,
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kb_result_free(result: *mut KbResult) {
    release(result)
}

// ---------------------------------------------------------------- evaluation

/// Scores one hypothesis against its reference: WER, CER and keyword
/// precision/recall over matching blocks for the `len` given keywords.
///
/// # Safety
/// `reference` and `hypothesis` must be NUL-terminated, `keywords` must point
/// to `len` NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kb_score(
    reference: *const c_char,
    hypothesis: *const c_char,
    keywords: *const *const c_char,
    len: usize,
    out: *mut KbKeywordMetrics,
) -> KbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let r = str_arg(reference, "reference")?;
        let h = str_arg(hypothesis, "hypothesis")?;
        let kws: HashSet<String> = str_array(keywords, len, "keywords")?.into_iter().map(String::from).collect();
        let s = eval::score_utterance(r, h, &kws);
        let k = s.keywords;
        *out = KbKeywordMetrics {
            tp: k.tp,
            fp: k.fp,
            fn_: k.fn_,
            precision: k.precision,
            recall: k.recall,
            f1: k.f1,
            wer: s.wer,
            cer: s.cer,
        };
        Ok(())
    })
}
