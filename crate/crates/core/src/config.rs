//! Flat `key = value` configuration covering filter, dataset, forest, dense
//! head and embedding settings. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SplitRatios;
use crate::dense::TrainConfig;
use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::forest::ForestParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub min_action_ratio: f64,
    pub allow_imperative_as_pronoun_pass: bool,
    pub balance: f64,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub train: TrainConfig,
    pub forest: ForestParams,
    pub embed_dim: usize,
    pub embed_batch_size: usize,
    pub stub_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let filter = FilterConfig::default();
        RunConfig {
            min_tokens: filter.min_tokens,
            max_tokens: filter.max_tokens,
            min_action_ratio: filter.min_action_ratio,
            allow_imperative_as_pronoun_pass: filter.allow_imperative_as_pronoun_pass,
            balance: 1.0,
            ratios: SplitRatios::default(),
            seed: 42,
            train: TrainConfig {
                seed: 42,
                ..TrainConfig::default()
            },
            forest: ForestParams::default(),
            embed_dim: crate::embedding::DEFAULT_STUB_DIM,
            embed_batch_size: 64,
            stub_seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key} = {value:?}: {e}")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match value {
        "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// Parses the text into ordered key/value pairs.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key = value", n + 1))
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "min_tokens" => self.min_tokens = parse(key, value)?,
            "max_tokens" => self.max_tokens = parse(key, value)?,
            "min_action_ratio" => self.min_action_ratio = parse(key, value)?,
            "allow_imperative_as_pronoun_pass" => {
                self.allow_imperative_as_pronoun_pass = parse(key, value)?
            }
            "balance" => self.balance = parse(key, value)?,
            "train_ratio" => self.ratios.train = parse(key, value)?,
            "val_ratio" => self.ratios.val = parse(key, value)?,
            "test_ratio" => self.ratios.test = parse(key, value)?,
            "seed" => {
                self.seed = parse(key, value)?;
                self.train.seed = self.seed;
            }
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "dropout_rate" => self.train.dropout_rate = parse(key, value)?,
            "learning_rate" => self.train.adam.learning_rate = parse(key, value)?,
            "beta1" => self.train.adam.beta1 = parse(key, value)?,
            "beta2" => self.train.adam.beta2 = parse(key, value)?,
            "epsilon" => self.train.adam.epsilon = parse(key, value)?,
            "threshold_mode" => self.train.threshold_mode = parse(key, value)?,
            "threshold" => self.train.threshold = parse(key, value)?,
            "n_trees" => self.forest.n_trees = parse(key, value)?,
            "max_depth" => self.forest.max_depth = parse_optional(key, value)?,
            "min_samples_split" => self.forest.min_samples_split = parse(key, value)?,
            "feature_subsample" => self.forest.feature_subsample = parse_optional(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "embed_batch_size" => self.embed_batch_size = parse(key, value)?,
            "stub_seed" => self.stub_seed = parse(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_key_values(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Filter settings combined with a lexicon.
    pub fn filter_config(&self, lexicon: crate::filters::Lexicon) -> FilterConfig {
        FilterConfig {
            lexicon,
            min_tokens: self.min_tokens,
            max_tokens: self.max_tokens,
            min_action_ratio: self.min_action_ratio,
            allow_imperative_as_pronoun_pass: self.allow_imperative_as_pronoun_pass,
        }
    }

    /// Flat snapshot using the same keys `set` accepts.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mode = match self.train.threshold_mode {
            crate::dense::ThresholdMode::Fixed => "fixed",
            crate::dense::ThresholdMode::ValidationMedian => "validation_median",
        };
        [
            ("min_tokens", self.min_tokens.to_string()),
            ("max_tokens", self.max_tokens.to_string()),
            ("min_action_ratio", self.min_action_ratio.to_string()),
            (
                "allow_imperative_as_pronoun_pass",
                self.allow_imperative_as_pronoun_pass.to_string(),
            ),
            ("balance", self.balance.to_string()),
            ("train_ratio", self.ratios.train.to_string()),
            ("val_ratio", self.ratios.val.to_string()),
            ("test_ratio", self.ratios.test.to_string()),
            ("seed", self.seed.to_string()),
            ("epochs", self.train.epochs.to_string()),
            ("batch_size", self.train.batch_size.to_string()),
            ("dropout_rate", self.train.dropout_rate.to_string()),
            ("learning_rate", self.train.adam.learning_rate.to_string()),
            ("beta1", self.train.adam.beta1.to_string()),
            ("beta2", self.train.adam.beta2.to_string()),
            ("epsilon", self.train.adam.epsilon.to_string()),
            ("threshold_mode", mode.to_string()),
            ("threshold", self.train.threshold.to_string()),
            ("n_trees", self.forest.n_trees.to_string()),
            ("max_depth", opt(self.forest.max_depth)),
            ("min_samples_split", self.forest.min_samples_split.to_string()),
            ("feature_subsample", opt(self.forest.feature_subsample)),
            ("embed_dim", self.embed_dim.to_string()),
            ("embed_batch_size", self.embed_batch_size.to_string()),
            ("stub_seed", self.stub_seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::ThresholdMode;

    #[test]
    fn parses_and_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# filter\nmin_tokens = 4\nmax_depth = 12\nthreshold_mode = validation_median\nseed=7\n",
        )
        .unwrap();
        assert_eq!(cfg.min_tokens, 4);
        assert_eq!(cfg.forest.max_depth, Some(12));
        assert_eq!(cfg.train.threshold_mode, ThresholdMode::ValidationMedian);
        assert_eq!((cfg.seed, cfg.train.seed), (7, 7));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("bogus = 1").is_err());
        assert!(cfg.apply_text("min_tokens").is_err());
        assert!(cfg.apply_text("min_tokens = many").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.forest.feature_subsample = Some(9);
        let mut back = RunConfig::default();
        for (k, v) in cfg.snapshot() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }
}
