use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{FileConfig, PruneSetting};
use super::{
    CliError, Cli, Command, DecodeArgs, ExtractArgs, ScoreArgs, SearchArgs, SweepArgs, TrieCommand,
    WORKERS_ENV,
};
use crate::decoder::{decode, DecoderConfig, DEFAULT_PRUNE_THRESHOLD};
use crate::emissions::EmissionMatrix;
use crate::eval::{aggregate, score_utterance, DatasetReport, UtteranceScore};
use crate::io::{self, ManifestRecord, ResultRecord, ScorePair};
use crate::keywords::{self, tokenize};
use crate::lm::{CharLm, LmScorer, MultiLevelLm, NgramModel, Unit, WordLm};
use crate::trie::KeywordTrie;
use crate::vocab::Vocabulary;

const DEFAULT_PERCENT: f64 = 1.0;
const DEFAULT_SWEEP_KEYWORD_WEIGHTS: [f64; 3] = [0.0, 0.6, 1.2];

pub(super) fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Decode(args) => cmd_decode(&args, &file),
        Command::ExtractKeywords(args) => cmd_extract(&args, &file),
        Command::Score(args) => cmd_score(&args),
        Command::Sweep(args) => cmd_sweep(&args, &file),
        Command::Trie(TrieCommand::Dump { keywords, vocab }) => {
            let vocab = io::load_vocab(&vocab)?;
            let trie = KeywordTrie::build_from_list(io::load_keyword_list(&keywords)?, &vocab)?;
            write_output(None, trie.dump().as_bytes())
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Internal(format!("writing output: {e}")))
        }
    }
}

fn jsonl<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    io::write_jsonl_to(&mut buf, rows).expect("writing to memory cannot fail");
    buf
}

// ------------------------------------------------------------ configuration

fn decoder_config(
    s: &SearchArgs,
    file: &FileConfig,
    keyword_weight: f64,
    lm_weight: f64,
) -> Result<DecoderConfig, CliError> {
    let prune = if s.no_prune {
        None
    } else if let Some(t) = s.prune_threshold {
        Some(t)
    } else {
        match file.prune_threshold {
            Some(PruneSetting::Threshold(t)) => Some(t),
            Some(PruneSetting::Enabled(false)) => None,
            Some(PruneSetting::Enabled(true)) | None => Some(DEFAULT_PRUNE_THRESHOLD),
        }
    };
    let defaults = DecoderConfig::default();
    let cfg = DecoderConfig {
        beam_width: s.beam_width.or(file.beam_width).unwrap_or(defaults.beam_width),
        keyword_weight,
        lm_weight,
        prune_logp_threshold: prune,
        length_bonus: s.length_bonus.or(file.length_bonus).unwrap_or(defaults.length_bonus),
        nbest: s.nbest.or(file.nbest).unwrap_or(defaults.nbest),
        allow_empty: s.allow_empty || file.allow_empty.unwrap_or(false),
    };
    cfg.validate()?;
    if cfg.nbest == 0 {
        return Err(CliError::input("nbest must be at least 1"));
    }
    Ok(cfg)
}

fn worker_pool(flag: Option<usize>, file: &FileConfig) -> Result<rayon::ThreadPool, CliError> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("{WORKERS_ENV}={v:?} is not a worker count")))?,
        ),
        Err(_) => None,
    };
    let n = flag.or(file.workers).or(from_env);
    if n == Some(0) {
        return Err(CliError::input("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(format!("starting workers: {e}")))
}

// ------------------------------------------------------------------ decode

/// Everything needed to decode a manifest, loaded once.
pub struct DecodeInputs {
    pub vocab: Vocabulary,
    pub records: Vec<ManifestRecord>,
    /// Keyword tree per utterance; utterances sharing a list share a tree.
    pub tries: Vec<Option<Arc<KeywordTrie>>>,
    /// Lower-cased keyword words per utterance, for scoring.
    pub keyword_sets: Vec<Arc<HashSet<String>>>,
    pub lm: Option<Box<dyn LmScorer>>,
    pub normalize_check: bool,
}

fn keyword_set(words: &[String]) -> HashSet<String> {
    words.iter().flat_map(|w| tokenize(w)).collect()
}

impl DecodeInputs {
    pub fn load(s: &SearchArgs, file: &FileConfig) -> Result<Self, CliError> {
        let vocab = io::load_vocab(&s.vocab)?;
        let records = io::load_manifest(&s.manifest)?;

        let mut cache: HashMap<PathBuf, (Arc<KeywordTrie>, Arc<HashSet<String>>)> = HashMap::new();
        let mut load_list = |path: &PathBuf| -> Result<(Arc<KeywordTrie>, Arc<HashSet<String>>), CliError> {
            if let Some(hit) = cache.get(path) {
                return Ok(hit.clone());
            }
            let words = io::load_keyword_list(path)?;
            let trie = KeywordTrie::build_from_list(&words, &vocab)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let entry = (Arc::new(trie), Arc::new(keyword_set(&words)));
            cache.insert(path.clone(), entry.clone());
            Ok(entry)
        };
        let global = s.keywords.as_ref().map(&mut load_list).transpose()?;
        let mut tries = Vec::with_capacity(records.len());
        let mut keyword_sets = Vec::with_capacity(records.len());
        for r in &records {
            let chosen = match &r.keywords {
                Some(p) => Some(load_list(p)?),
                None => global.clone(),
            };
            match chosen {
                Some((t, k)) => {
                    tries.push(Some(t));
                    keyword_sets.push(k);
                }
                None => {
                    tries.push(None);
                    keyword_sets.push(Arc::new(HashSet::new()));
                }
            }
        }

        let load = |p: &PathBuf, unit| NgramModel::load(p, unit).map_err(|e| CliError::input(format!("{}: {e}", p.display())));
        let oov = s.word_oov_penalty.or(file.word_oov_penalty).unwrap_or(0.0);
        let lm: Option<Box<dyn LmScorer>> = match (&s.lm_char, &s.lm_word) {
            (None, None) => None,
            (Some(c), None) => Some(Box::new(CharLm::new(load(c, Unit::Character)?))),
            (None, Some(w)) => Some(Box::new(WordLm::new(load(w, Unit::Word)?))),
            (Some(c), Some(w)) => Some(Box::new(
                MultiLevelLm::new(load(c, Unit::Character)?, load(w, Unit::Word)?).with_oov_penalty(oov),
            )),
        };
        let normalize_check = !s.no_normalize_check && file.normalize_check.unwrap_or(true);
        Ok(Self {
            vocab,
            records,
            tries,
            keyword_sets,
            lm,
            normalize_check,
        })
    }

    fn emissions(&self, i: usize) -> Result<EmissionMatrix, CliError> {
        let r = &self.records[i];
        let m = io::load_emissions(&r.emissions)
            .map_err(|e| CliError::input(format!("utterance {}: {e}", r.id)))?;
        if self.normalize_check {
            m.check_normalized()
                .map_err(|e| CliError::input(format!("utterance {}: {e}", r.id)))?;
        }
        Ok(m)
    }

    fn decode_one(&self, i: usize, m: &EmissionMatrix, cfg: &DecoderConfig) -> Result<ResultRecord, CliError> {
        let r = &self.records[i];
        let res = decode(m, &self.vocab, self.tries[i].as_deref(), self.lm.as_deref(), cfg)
            .map_err(|e| CliError::input(format!("utterance {}: {e}", r.id)))?;
        Ok(ResultRecord::new(r.id.clone(), &res))
    }
}

/// First error in manifest order, so failures do not depend on scheduling.
fn in_order<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

/// Decodes every record, loading emissions inside the workers.
pub fn decode_records(
    inputs: &DecodeInputs,
    cfg: &DecoderConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<ResultRecord>, CliError> {
    let results = pool.install(|| {
        (0..inputs.records.len())
            .into_par_iter()
            .map(|i| inputs.decode_one(i, &inputs.emissions(i)?, cfg))
            .collect()
    });
    in_order(results)
}

fn cmd_decode(args: &DecodeArgs, file: &FileConfig) -> Result<(), CliError> {
    let kw = args.keyword_weight.or(file.keyword_weight).unwrap_or(0.0);
    let lm = args.lm_weight.or(file.lm_weight).unwrap_or(0.0);
    let cfg = decoder_config(&args.search, file, kw, lm)?;
    let pool = worker_pool(args.search.workers, file)?;
    let inputs = DecodeInputs::load(&args.search, file)?;
    let results = decode_records(&inputs, &cfg, &pool)?;
    write_output(args.output.as_deref(), &jsonl(&results))
}

// ------------------------------------------------------------------ extract

fn check_doc_id(id: &str) -> Result<(), CliError> {
    let bad = id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']);
    if bad {
        return Err(CliError::input(format!("document id {id:?} cannot name a file")));
    }
    Ok(())
}

fn cmd_extract(args: &ExtractArgs, file: &FileConfig) -> Result<(), CliError> {
    let percent = args.percent.or(file.percent).unwrap_or(DEFAULT_PERCENT);
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(keywords::KeywordError::InvalidPercent(percent).into());
    }
    let records: Vec<(String, String)> = io::load_corpus(&args.corpus)?
        .into_iter()
        .map(|r| (r.doc_id, r.text))
        .collect();
    for (doc, _) in &records {
        check_doc_id(doc)?;
    }
    let corpus = keywords::build_corpus_par(&records);
    let selections = keywords::extract_all(&corpus, percent)?;
    fs::create_dir_all(&args.output_dir)
        .map_err(|e| CliError::input(format!("{}: {e}", args.output_dir.display())))?;
    for sel in &selections {
        io::write_keyword_list(args.output_dir.join(format!("{}.txt", sel.doc_id)), &sel.selected)?;
    }
    #[derive(Serialize)]
    struct Report<'a> {
        percent: f64,
        documents: &'a [keywords::KeywordSelection],
    }
    let report = Report {
        percent,
        documents: &selections,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(Some(&args.output_dir.join("report.json")), text.as_bytes())
}

// -------------------------------------------------------------------- score

#[derive(Serialize)]
struct ScoredUtterance<'a> {
    id: &'a str,
    #[serde(flatten)]
    score: &'a UtteranceScore,
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    report: &'a DatasetReport,
    conventions: &'static str,
}

const CONVENTIONS: &str = "micro-averaged; precision and recall are 1 when their denominator is 0; \
error rates divide by max(reference length, 1)";

/// Scores pairs against one keyword set.
pub fn score_pairs(pairs: &[ScorePair], keywords: &HashSet<String>) -> Vec<UtteranceScore> {
    pairs
        .par_iter()
        .map(|p| score_utterance(&p.reference, &p.hypothesis, keywords))
        .collect()
}

fn join_by_id(refs: Vec<io::TranscriptRecord>, hyps: Vec<io::TranscriptRecord>) -> Result<Vec<ScorePair>, CliError> {
    let mut by_id: HashMap<String, String> = hyps.into_iter().map(|h| (h.id, h.text)).collect();
    let mut pairs = Vec::with_capacity(refs.len());
    for r in refs {
        let hyp = by_id
            .remove(&r.id)
            .ok_or_else(|| CliError::input(format!("no hypothesis for id {:?}", r.id)))?;
        pairs.push(ScorePair {
            id: r.id,
            reference: r.text,
            hypothesis: hyp,
        });
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(CliError::input(format!("hypothesis id {extra:?} has no reference")));
    }
    Ok(pairs)
}

fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let pairs = match (&args.pairs, &args.refs, &args.hyps) {
        (Some(p), _, _) => io::load_score_pairs(p)?,
        (None, Some(r), Some(h)) => join_by_id(io::load_transcripts(r)?, io::load_transcripts(h)?)?,
        _ => return Err(CliError::input("give --pairs or both --refs and --hyps")),
    };
    let keywords = match &args.keywords {
        Some(p) => keyword_set(&io::load_keyword_list(p)?),
        None => HashSet::new(),
    };
    let scores = score_pairs(&pairs, &keywords);
    if let Some(path) = &args.per_utterance {
        let rows: Vec<ScoredUtterance> = pairs
            .iter()
            .zip(&scores)
            .map(|(p, s)| ScoredUtterance { id: &p.id, score: s })
            .collect();
        write_output(Some(path), &jsonl(&rows))?;
    }
    let report = aggregate(&scores);
    let summary = Summary {
        report: &report,
        conventions: CONVENTIONS,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_output(args.output.as_deref(), text.as_bytes())
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lm_weight: f64,
    pub keyword_weight: f64,
    pub utterances: usize,
    pub wer: f64,
    pub cer: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Decodes and scores the manifest at every (LM weight, keyword weight)
/// pair; rows come back sorted by LM weight, then keyword weight.
pub fn run_sweep(
    inputs: &DecodeInputs,
    base: &DecoderConfig,
    lm_weights: &[f64],
    keyword_weights: &[f64],
    pool: &rayon::ThreadPool,
) -> Result<Vec<SweepRow>, CliError> {
    let references: Vec<&str> = inputs
        .records
        .iter()
        .map(|r| {
            r.reference
                .as_deref()
                .ok_or_else(|| CliError::input(format!("utterance {} has no reference", r.id)))
        })
        .collect::<Result<_, _>>()?;
    let emissions: Vec<EmissionMatrix> = in_order(pool.install(|| {
        (0..inputs.records.len())
            .into_par_iter()
            .map(|i| inputs.emissions(i))
            .collect()
    }))?;

    let mut grid: Vec<(f64, f64)> = lm_weights
        .iter()
        .flat_map(|&l| keyword_weights.iter().map(move |&k| (l, k)))
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();

    let mut rows = Vec::with_capacity(grid.len());
    for (lm_weight, keyword_weight) in grid {
        let cfg = DecoderConfig {
            keyword_weight,
            lm_weight,
            ..base.clone()
        };
        cfg.validate()?;
        let scores: Vec<UtteranceScore> = in_order(pool.install(|| {
            (0..emissions.len())
                .into_par_iter()
                .map(|i| {
                    let r = inputs.decode_one(i, &emissions[i], &cfg)?;
                    Ok(score_utterance(references[i], &r.transcript, &inputs.keyword_sets[i]))
                })
                .collect()
        }))?;
        let d = aggregate(&scores);
        rows.push(SweepRow {
            lm_weight,
            keyword_weight,
            utterances: d.utterances,
            wer: d.wer,
            cer: d.cer,
            precision: d.keywords.precision,
            recall: d.keywords.recall,
            f1: d.keywords.f1,
            tp: d.keywords.tp,
            fp: d.keywords.fp,
            fn_: d.keywords.fn_,
        });
    }
    Ok(rows)
}

fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:>6} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "w_lm", "w_k", "WER", "CER", "P", "R", "F1"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>6.2} {:>6.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}\n",
            r.lm_weight,
            r.keyword_weight,
            100.0 * r.wer,
            100.0 * r.cer,
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1
        ));
    }
    out
}

fn cmd_sweep(args: &SweepArgs, file: &FileConfig) -> Result<(), CliError> {
    let kws = args
        .keyword_weights
        .clone()
        .or_else(|| file.keyword_weights.clone())
        .unwrap_or_else(|| DEFAULT_SWEEP_KEYWORD_WEIGHTS.to_vec());
    let lms = args
        .lm_weights
        .clone()
        .or_else(|| file.lm_weights.clone())
        .unwrap_or_else(|| vec![0.0]);
    if kws.is_empty() || lms.is_empty() {
        return Err(CliError::input("sweep grid is empty"));
    }
    let base = decoder_config(&args.search, file, 0.0, 0.0)?;
    let pool = worker_pool(args.search.workers, file)?;
    let inputs = DecodeInputs::load(&args.search, file)?;
    let rows = run_sweep(&inputs, &base, &lms, &kws, &pool)?;
    let bytes = if args.table {
        sweep_table(&rows).into_bytes()
    } else {
        jsonl(&rows)
    };
    write_output(args.output.as_deref(), &bytes)
}
