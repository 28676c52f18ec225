//! Readers and writers for every on-disk format.
//!
//! * Emissions: `EMIT` v1 binary (magic, LE u32 version, T, V, then T*V LE
//!   f32 log-probabilities, frame-major) or JSON `{"T":..,"V":..,"logp":[[..]]}`.
//! * Vocabulary: one token per line with optional `#blank N` / `#boundary N`
//!   header lines, N being a 0-based token index.
//! * Keyword lists: one keyword per line; `#` comments and blank lines skipped.
//! * Manifests, transcripts and results: JSON lines.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{DecodeResult, Hypothesis};
use crate::emissions::{EmissionError, EmissionMatrix};
use crate::vocab::{TokenId, VocabError, Vocabulary};

pub const EMIT_MAGIC: &[u8; 4] = b"EMIT";
pub const EMIT_VERSION: u32 = 1;
const EMIT_HEADER: usize = 16;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not an emission file (bad magic)")]
    BadMagic,
    #[error("unsupported EMIT version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated emission file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("emission shape {frames}x{vocab_size} is too large")]
    ShapeOverflow { frames: u32, vocab_size: u32 },
    #[error("{0} unexpected trailing bytes after emission data")]
    TrailingData(usize),
    #[error("invalid JSON emissions: {0}")]
    Json(String),
    #[error(transparent)]
    Emissions(#[from] EmissionError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("{path}:{line}: {reason}")]
    Schema {
        path: String,
        line: usize,
        reason: String,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn schema(path: &Path, line: usize, reason: impl Into<String>) -> Self {
        IoError::Schema {
            path: path.display().to_string(),
            line,
            reason: reason.into(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

// ---------------------------------------------------------------- emissions

pub fn encode_emit(m: &EmissionMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMIT_HEADER + 4 * m.as_slice().len());
    out.extend_from_slice(EMIT_MAGIC);
    out.extend_from_slice(&EMIT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(m.vocab_size() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_emit(bytes: &[u8]) -> Result<EmissionMatrix, IoError> {
    if bytes.len() < 4 || &bytes[..4] != EMIT_MAGIC {
        return Err(IoError::BadMagic);
    }
    if bytes.len() < EMIT_HEADER {
        return Err(IoError::TruncatedFile {
            expected: EMIT_HEADER,
            found: bytes.len(),
        });
    }
    let version = le_u32(bytes, 4);
    if version != EMIT_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let (frames, vocab_size) = (le_u32(bytes, 8), le_u32(bytes, 12));
    let expected = (frames as usize)
        .checked_mul(vocab_size as usize)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(EMIT_HEADER))
        .ok_or(IoError::ShapeOverflow { frames, vocab_size })?;
    if bytes.len() < expected {
        return Err(IoError::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(IoError::TrailingData(bytes.len() - expected));
    }
    let values = bytes[EMIT_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok(EmissionMatrix::new(frames as usize, vocab_size as usize, values)?)
}

#[derive(Serialize, Deserialize)]
struct JsonEmissions {
    #[serde(rename = "T")]
    frames: usize,
    #[serde(rename = "V")]
    vocab_size: usize,
    logp: Vec<Vec<f32>>,
}

pub fn emissions_to_json(m: &EmissionMatrix) -> String {
    let doc = JsonEmissions {
        frames: m.frames(),
        vocab_size: m.vocab_size(),
        logp: m.rows().map(<[f32]>::to_vec).collect(),
    };
    serde_json::to_string(&doc).expect("plain numbers serialize")
}

pub fn emissions_from_json(text: &str) -> Result<EmissionMatrix, IoError> {
    let doc: JsonEmissions = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    if doc.logp.len() != doc.frames {
        return Err(IoError::Json(format!(
            "T is {} but logp has {} rows",
            doc.frames,
            doc.logp.len()
        )));
    }
    if let Some((t, row)) = doc.logp.iter().enumerate().find(|(_, r)| r.len() != doc.vocab_size) {
        return Err(IoError::Json(format!(
            "V is {} but row {t} has {} entries",
            doc.vocab_size,
            row.len()
        )));
    }
    let values = doc.logp.into_iter().flatten().collect();
    Ok(EmissionMatrix::new(doc.frames, doc.vocab_size, values)?)
}

/// Loads EMIT or JSON emissions, telling them apart by content.
pub fn load_emissions(path: impl AsRef<Path>) -> Result<EmissionMatrix, IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.starts_with(EMIT_MAGIC) {
        return decode_emit(&bytes);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => {
            let text = std::str::from_utf8(&bytes).map_err(|e| IoError::Json(e.to_string()))?;
            emissions_from_json(text)
        }
        _ => Err(IoError::BadMagic),
    }
}

pub fn write_emit(path: impl AsRef<Path>, m: &EmissionMatrix) -> Result<(), IoError> {
    write_all(path.as_ref(), &encode_emit(m))
}

pub fn write_emissions_json(path: impl AsRef<Path>, m: &EmissionMatrix) -> Result<(), IoError> {
    write_all(path.as_ref(), emissions_to_json(m).as_bytes())
}

// --------------------------------------------------------------- vocabulary

fn parse_directive(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('#')?;
    let (key, value) = rest.split_once(char::is_whitespace)?;
    matches!(key, "blank" | "boundary").then_some((key, value.trim()))
}

/// Parses a vocabulary file; `source` names it in error messages.
pub fn parse_vocab(text: &str, source: &Path) -> Result<Vocabulary, IoError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut blank = None;
    let mut boundary = None;
    while let Some(&(n, line)) = lines.peek() {
        let Some((key, value)) = parse_directive(line) else { break };
        let id: u32 = value
            .parse()
            .map_err(|_| IoError::schema(source, n + 1, format!("bad token index {value:?}")))?;
        if key == "blank" {
            blank = Some(TokenId(id));
        } else {
            boundary = Some(TokenId(id));
        }
        lines.next();
    }
    let tokens: Vec<String> = lines.map(|(_, l)| l.trim_end_matches('\r').to_string()).collect();
    let boundary = boundary.or_else(|| tokens.iter().position(|t| t == "|").map(|i| TokenId(i as u32)));
    Ok(Vocabulary::new(tokens, blank.unwrap_or(TokenId(0)), boundary)?)
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocabulary, IoError> {
    let path = path.as_ref();
    parse_vocab(&read_text(path)?, path)
}

/// Writes directives explicitly so the file reloads identically.
pub fn vocab_to_string(vocab: &Vocabulary) -> String {
    let mut out = format!("#blank {}\n", vocab.blank().0);
    if let Some(b) = vocab.boundary() {
        out.push_str(&format!("#boundary {}\n", b.0));
    }
    for t in vocab.tokens() {
        out.push_str(t);
        out.push('\n');
    }
    out
}

pub fn write_vocab(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<(), IoError> {
    write_all(path.as_ref(), vocab_to_string(vocab).as_bytes())
}

// ------------------------------------------------------------ keyword lists

pub fn parse_keyword_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn load_keyword_list(path: impl AsRef<Path>) -> Result<Vec<String>, IoError> {
    Ok(parse_keyword_list(&read_text(path.as_ref())?))
}

pub fn write_keyword_list<S: AsRef<str>>(path: impl AsRef<Path>, words: &[S]) -> Result<(), IoError> {
    let mut out = String::new();
    for w in words {
        out.push_str(w.as_ref());
        out.push('\n');
    }
    write_all(path.as_ref(), out.as_bytes())
}

// --------------------------------------------------------------- JSON lines

/// Non-blank lines parsed as `T`, paired with 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>, IoError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| IoError::schema(path, n + 1, e.to_string()))?;
        out.push((n + 1, value));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl_to(&mut w, records).map_err(|e| IoError::io(path, e))?;
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_jsonl_to<W: Write, T: Serialize>(w: &mut W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn check_unique_ids<'a>(
    path: &Path,
    ids: impl IntoIterator<Item = (usize, &'a str)>,
) -> Result<(), IoError> {
    let mut seen = HashSet::new();
    for (line, id) in ids {
        if !seen.insert(id) {
            return Err(IoError::schema(path, line, format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- manifest

/// One utterance to decode. Relative paths are taken from the manifest's
/// directory when loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub emissions: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<PathBuf>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, IoError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let rows: Vec<(usize, ManifestRecord)> = read_jsonl(path)?;
    check_unique_ids(path, rows.iter().map(|(n, r)| (*n, r.id.as_str())))?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, mut rec) in rows {
        if rec.id.is_empty() {
            return Err(IoError::schema(path, line, "empty id"));
        }
        rec.emissions = base.join(&rec.emissions);
        rec.keywords = rec.keywords.map(|k| base.join(k));
        for p in std::iter::once(&rec.emissions).chain(rec.keywords.as_ref()) {
            if !p.exists() {
                return Err(IoError::schema(path, line, format!("{} does not exist", p.display())));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<(), IoError> {
    write_jsonl(path, records)
}

// ------------------------------------------------------------------ results

/// A decoded utterance as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub transcript: String,
    pub score_total: f64,
    pub score_am: f64,
    pub score_lm: f64,
    pub score_boost: f64,
    pub score_length: f64,
    pub n_best: Vec<Hypothesis>,
}

impl ResultRecord {
    pub fn new(id: impl Into<String>, r: &DecodeResult) -> Self {
        Self {
            id: id.into(),
            transcript: r.transcript.clone(),
            score_total: r.score_total,
            score_am: r.score_am,
            score_lm: r.score_lm,
            score_boost: r.score_boost,
            score_length: r.score_length,
            n_best: r.n_best.clone(),
        }
    }
}

pub fn write_results(path: impl AsRef<Path>, results: &[ResultRecord]) -> Result<(), IoError> {
    write_jsonl(path, results)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>, IoError> {
    let path = path.as_ref();
    let rows: Vec<(usize, ResultRecord)> = read_jsonl(path)?;
    check_unique_ids(path, rows.iter().map(|(n, r)| (*n, r.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

// -------------------------------------------------------------- transcripts

/// `{id, text}`; `transcript` is accepted for `text` so result files can be
/// scored directly. Other fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub id: String,
    #[serde(alias = "transcript", alias = "reference")]
    pub text: String,
}

pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>, IoError> {
    let path = path.as_ref();
    let rows: Vec<(usize, TranscriptRecord)> = read_jsonl(path)?;
    check_unique_ids(path, rows.iter().map(|(n, r)| (*n, r.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Reference and hypothesis side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(rename = "hyp")]
    pub hypothesis: String,
}

pub fn load_score_pairs(path: impl AsRef<Path>) -> Result<Vec<ScorePair>, IoError> {
    let path = path.as_ref();
    let rows: Vec<(usize, ScorePair)> = read_jsonl(path)?;
    check_unique_ids(path, rows.iter().map(|(n, r)| (*n, r.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

// ------------------------------------------------------------------- corpus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(alias = "doc")]
    pub doc_id: String,
    pub text: String,
}

/// Corpus text as JSON lines `{doc_id, text}` or TSV `doc_id<TAB>text`,
/// decided per line by a leading `{`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let rec = if line.trim_start().starts_with('{') {
            serde_json::from_str(line).map_err(|e| IoError::schema(path, n + 1, e.to_string()))?
        } else {
            let (doc, body) = line
                .split_once('\t')
                .ok_or_else(|| IoError::schema(path, n + 1, "expected doc_id<TAB>text"))?;
            CorpusRecord {
                doc_id: doc.to_string(),
                text: body.to_string(),
            }
        };
        out.push(rec);
    }
    Ok(out)
}
