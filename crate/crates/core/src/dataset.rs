//! Weak labelling from filter verdicts, class balancing and stratified
//! train/val/test assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{apply_filters, FilterConfig, FilterStage, FilterVerdict};
use crate::ingest::EmailMessage;
use crate::segment::{segment_message, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|split| split.as_str() == s)
            .ok_or_else(|| Error::format("split", format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    pub label: u8,
    pub origin: String,
    pub trace: FilterVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub examples: Vec<LabeledExample>,
    pub seed: u64,
    /// Parallel to `examples` once [`LabeledDataset::assign_splits`] ran.
    pub splits: Option<Vec<Split>>,
    /// Fewer negatives were available than the balance ratio asked for.
    pub short_of_negatives: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.72,
            val: 0.08,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let ratios = SplitRatios { train, val, test };
        ratios.validate()?;
        Ok(ratios)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0) {
            return Err(Error::Ratio(format!("{parts:?} must lie in [0, 1]")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Ratio(format!("{parts:?} sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Per-stage rejection counts over every sentence seen.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub total: usize,
    pub passed: usize,
    pub rejected: BTreeMap<FilterStage, usize>,
}

impl FunnelReport {
    fn record(&mut self, verdict: &FilterVerdict) {
        self.total += 1;
        match verdict.rejected_by {
            None => self.passed += 1,
            Some(stage) => *self.rejected.entry(stage).or_default() += 1,
        }
    }
}

pub fn weak_label(verdict: &FilterVerdict) -> u8 {
    u8::from(verdict.passed)
}

/// Segments every message and builds the dataset from the resulting sentences.
pub fn build_dataset(
    corpus: &[EmailMessage],
    cfg: &FilterConfig,
    balance: f64,
    seed: u64,
) -> Result<(LabeledDataset, FunnelReport)> {
    let sentences: Vec<Sentence> = corpus.par_iter().flat_map_iter(segment_message).collect();
    build_dataset_from_sentences(&sentences, cfg, balance, seed)
}

/// Labels every sentence, keeps all positives, downsamples negatives to
/// `balance` per positive and shuffles. Everything random draws from `seed`.
pub fn build_dataset_from_sentences(
    sentences: &[Sentence],
    cfg: &FilterConfig,
    balance: f64,
    seed: u64,
) -> Result<(LabeledDataset, FunnelReport)> {
    if !(balance > 0.0 && balance.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "balance must be positive, got {balance}"
        )));
    }
    cfg.validate()?;
    let verdicts: Vec<FilterVerdict> = sentences
        .par_iter()
        .map(|s| apply_filters(s, cfg))
        .collect();

    let mut funnel = FunnelReport::default();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (sentence, verdict) in sentences.iter().zip(verdicts) {
        funnel.record(&verdict);
        let example = LabeledExample {
            text: sentence.text.clone(),
            label: weak_label(&verdict),
            origin: sentence.origin.to_string(),
            trace: verdict,
        };
        if example.label == 1 {
            positives.push(example);
        } else {
            negatives.push(example);
        }
    }
    if positives.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wanted = (balance * positives.len() as f64).round() as usize;
    let short_of_negatives = negatives.len() < wanted;
    if short_of_negatives {
        log::warn!(
            "only {} negatives available, {} requested",
            negatives.len(),
            wanted
        );
    }
    negatives.shuffle(&mut rng);
    negatives.truncate(wanted);

    let mut examples = positives;
    examples.append(&mut negatives);
    examples.shuffle(&mut rng);
    Ok((
        LabeledDataset {
            examples,
            seed,
            splits: None,
            short_of_negatives,
        },
        funnel,
    ))
}

/// Rounds each stratum's ideal split sizes to integers such that every
/// stratum keeps its total and every split total stays within one of its own
/// ideal. Exhaustive over floor/ceil choices; there are only two strata.
fn allocate(strata: &[usize], ratios: [f64; 3]) -> Vec<[usize; 3]> {
    let ideal: Vec<[f64; 3]> = strata
        .iter()
        .map(|&n| ratios.map(|r| r * n as f64))
        .collect();
    let choices: Vec<Vec<[usize; 3]>> = strata
        .iter()
        .zip(&ideal)
        .map(|(&n, ideal)| {
            let floor = ideal.map(|v| v.floor() as usize);
            let mut options = Vec::new();
            for mask in 0u8..8 {
                let counts: [usize; 3] = std::array::from_fn(|j| {
                    let up = mask >> j & 1 == 1 && ideal[j] > floor[j] as f64;
                    floor[j] + usize::from(up)
                });
                let exact = (0..3).all(|j| mask >> j & 1 == 0 || ideal[j] > floor[j] as f64);
                if exact && counts.iter().sum::<usize>() == n && !options.contains(&counts) {
                    options.push(counts);
                }
            }
            options
        })
        .collect();
    let total_ideal: [f64; 3] =
        std::array::from_fn(|j| ideal.iter().map(|row| row[j]).sum::<f64>());

    let mut best: Option<(f64, Vec<[usize; 3]>)> = None;
    let mut pick = vec![0usize; strata.len()];
    loop {
        let rows: Vec<[usize; 3]> = pick.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
        let deviation = (0..3)
            .map(|j| (rows.iter().map(|r| r[j]).sum::<usize>() as f64 - total_ideal[j]).abs())
            .fold(0.0, f64::max);
        if best.as_ref().map_or(true, |(d, _)| deviation < *d - 1e-12) {
            best = Some((deviation, rows));
        }
        let mut k = 0;
        while k < pick.len() {
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == pick.len() {
            break;
        }
    }
    best.map(|(_, rows)| rows).unwrap_or_default()
}

/// Seeded, label-stratified split assignment parallel to `examples`.
pub fn split(examples: &[LabeledExample], ratios: SplitRatios, seed: u64) -> Result<Vec<Split>> {
    ratios.validate()?;
    let mut strata: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, ex) in examples.iter().enumerate() {
        strata[usize::from(ex.label == 1)].push(i);
    }
    let sizes = [strata[0].len(), strata[1].len()];
    let counts = allocate(&sizes, ratios.as_array());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Split::Train; examples.len()];
    for (members, counts) in strata.iter_mut().zip(counts) {
        members.shuffle(&mut rng);
        let mut cursor = members.iter();
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for &i in cursor.by_ref().take(count) {
                assignment[i] = split;
            }
        }
    }
    Ok(assignment)
}

impl LabeledDataset {
    pub fn assign_splits(&mut self, ratios: SplitRatios, seed: u64) -> Result<()> {
        self.splits = Some(split(&self.examples, ratios, seed)?);
        Ok(())
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.splits.as_ref().map_or(Split::Train, |s| s[i])
    }

    pub fn subset(&self, which: Split) -> Vec<&LabeledExample> {
        self.examples
            .iter()
            .enumerate()
            .filter(|(i, _)| self.split_of(*i) == which)
            .map(|(_, ex)| ex)
            .collect()
    }

    pub fn positives(&self) -> usize {
        self.examples.iter().filter(|e| e.label == 1).count()
    }
}

/// One line of the dataset JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub text: String,
    pub label: u8,
    pub split: Split,
    pub origin: String,
    pub rejected_by: Option<FilterStage>,
    pub matched_verbs: Vec<String>,
}

impl LabeledDataset {
    pub fn records(&self) -> Vec<DatasetRecord> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| DatasetRecord {
                text: ex.text.clone(),
                label: ex.label,
                split: self.split_of(i),
                origin: ex.origin.clone(),
                rejected_by: ex.trace.rejected_by,
                matched_verbs: ex.trace.matched_verbs.clone(),
            })
            .collect()
    }
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| Error::format("jsonl row", e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| {
            Error::format(format!("{} line {}", path.display(), n + 1), e)
        })?;
        rows.push(row);
    }
    Ok(rows)
}
