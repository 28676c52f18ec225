//! `--config` files: flat TOML whose keys mirror the long flags with
//! underscores. Values here sit between built-in defaults and flags.

use std::path::Path;

use serde::Deserialize;

use super::CliError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub beam_width: Option<usize>,
    pub keyword_weight: Option<f64>,
    pub lm_weight: Option<f64>,
    /// A number, or `false` to disable token pruning.
    pub prune_threshold: Option<PruneSetting>,
    pub length_bonus: Option<f64>,
    pub nbest: Option<usize>,
    pub allow_empty: Option<bool>,
    pub normalize_check: Option<bool>,
    pub word_oov_penalty: Option<f64>,
    pub workers: Option<usize>,
    pub percent: Option<f64>,
    pub keyword_weights: Option<Vec<f64>>,
    pub lm_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PruneSetting {
    Threshold(f64),
    Enabled(bool),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }
}
