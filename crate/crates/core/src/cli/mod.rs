//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 1 for internal
//! failures. Failures print one JSON object on stderr.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use commands::{decode_records, run_sweep, score_pairs, DecodeInputs, SweepRow};
pub use config::{FileConfig, PruneSetting};

/// Environment variable consulted for the worker count when no flag or
/// config value is given.
pub const WORKERS_ENV: &str = "KBDECODE_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Internal(_) => "internal",
        }
    }
}

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_errors!(
    crate::io::IoError,
    crate::lm::ArpaError,
    crate::trie::TrieError,
    crate::decoder::DecodeError,
    crate::keywords::KeywordError,
    crate::emissions::EmissionError
);

#[derive(Debug, Parser)]
#[command(name = "kbdecode", version, about = "Keyword-boosted CTC beam search decoding")]
pub struct Cli {
    /// TOML file with default option values; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode every utterance of a manifest.
    Decode(DecodeArgs),
    /// Pick per-document keywords from a text corpus by TF-IDF.
    ExtractKeywords(ExtractArgs),
    /// Compute WER, CER and keyword precision/recall/F1.
    Score(ScoreArgs),
    /// Decode and score over a grid of keyword and LM weights.
    Sweep(SweepArgs),
    /// Keyword tree utilities.
    #[command(subcommand)]
    Trie(TrieCommand),
}

/// Inputs and search options shared by `decode` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// JSON-lines manifest of {id, emissions, reference?, keywords?}.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Token list, one per line, with optional `#blank N` / `#boundary N` header.
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Keyword list used for utterances without their own list.
    #[arg(long, value_name = "FILE")]
    pub keywords: Option<PathBuf>,
    /// Character-level ARPA model.
    #[arg(long, value_name = "FILE")]
    pub lm_char: Option<PathBuf>,
    /// Word-level ARPA model; with --lm-char the two are combined.
    #[arg(long, value_name = "FILE")]
    pub lm_word: Option<PathBuf>,
    /// Added to the character score kept for words unknown to the word model [default: 0].
    #[arg(long, value_name = "NATS")]
    pub word_oov_penalty: Option<f64>,
    /// Hypotheses kept per frame [default: 100].
    #[arg(long, value_name = "N")]
    pub beam_width: Option<usize>,
    /// Tokens more than this many nats below the frame's best are skipped [default: 20].
    #[arg(long, value_name = "NATS", conflicts_with = "no_prune")]
    pub prune_threshold: Option<f64>,
    /// Expand every token at every frame.
    #[arg(long)]
    pub no_prune: bool,
    /// Score added per word [default: 0].
    #[arg(long, value_name = "NATS", allow_negative_numbers = true)]
    pub length_bonus: Option<f64>,
    /// Hypotheses reported per utterance [default: 1].
    #[arg(long, value_name = "N")]
    pub nbest: Option<usize>,
    /// Accept emissions whose frames do not sum to one.
    #[arg(long)]
    pub no_normalize_check: bool,
    /// Decode zero-frame emissions to an empty transcript instead of failing.
    #[arg(long)]
    pub allow_empty: bool,
    /// Worker threads [default: $KBDECODE_WORKERS, else one per CPU].
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Boost per keyword character [default: 0].
    #[arg(long, value_name = "W")]
    pub keyword_weight: Option<f64>,
    /// Language-model weight [default: 0].
    #[arg(long, value_name = "W")]
    pub lm_weight: Option<f64>,
    /// Results file; standard output when omitted.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus as JSON lines {doc_id, text} or TSV `doc_id<TAB>text`.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Share of each document's distinct words to keep, in (0, 100] [default: 1].
    #[arg(long, value_name = "P")]
    pub percent: Option<f64>,
    /// Directory receiving `<doc_id>.txt` keyword lists and `report.json`.
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// JSON lines of {id, ref, hyp}.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["refs", "hyps"], required_unless_present_all = ["refs", "hyps"])]
    pub pairs: Option<PathBuf>,
    /// Reference transcripts as JSON lines {id, text}.
    #[arg(long, value_name = "FILE", requires = "hyps")]
    pub refs: Option<PathBuf>,
    /// Hypotheses as JSON lines {id, text}; decode results are accepted.
    #[arg(long, value_name = "FILE", requires = "refs")]
    pub hyps: Option<PathBuf>,
    /// Keyword list for precision and recall.
    #[arg(long, value_name = "FILE")]
    pub keywords: Option<PathBuf>,
    /// Per-utterance scores as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub per_utterance: Option<PathBuf>,
    /// Summary JSON; standard output when omitted.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Comma-separated keyword weights [default: 0,0.6,1.2].
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub keyword_weights: Option<Vec<f64>>,
    /// Comma-separated LM weights [default: 0].
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub lm_weights: Option<Vec<f64>>,
    /// Print an aligned text table instead of JSON lines.
    #[arg(long)]
    pub table: bool,
    /// Report file; standard output when omitted.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TrieCommand {
    /// Print the keyword tree as indented text.
    Dump {
        #[arg(long, value_name = "FILE")]
        keywords: PathBuf,
        #[arg(long, value_name = "FILE")]
        vocab: PathBuf,
    },
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: &'a str,
    message: String,
}

fn report(kind: &str, message: String) {
    let d = Diagnostic { error: kind, message };
    eprintln!("{}", serde_json::to_string(&d).expect("diagnostic serializes"));
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report("usage", e.to_string().trim_end().to_string());
            return 2;
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| commands::run(cli)));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            report(e.kind(), e.to_string());
            e.exit_code()
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            report("internal", msg);
            1
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
