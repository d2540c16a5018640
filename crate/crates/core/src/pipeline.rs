//! End-to-end glue: dataset records in, trained models and metric reports out.

use std::collections::HashMap;

use crate::dataset::{DatasetRecord, Split};
use crate::dense::{self, classify, DenseHead, ExampleRef, History, TrainConfig};
use crate::embedding::EmbeddingClient;
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::metrics::{confusion, metrics, MetricsReport, SplitAccuracy};
use crate::model::{ForestModel, SavedModel};
use crate::segment::tokenize;
use crate::tfidf::TfidfModel;

pub const FOREST_THRESHOLD: f64 = 0.5;

/// Lowercased word tokens for the vectorizer; punctuation-only tokens dropped.
pub fn tfidf_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.lower.chars().any(char::is_alphanumeric))
        .map(|t| t.lower)
        .collect()
}

fn in_split(records: &[DatasetRecord], split: Split) -> Vec<&DatasetRecord> {
    records.iter().filter(|r| r.split == split).collect()
}

fn example_id(index: usize, record: &DatasetRecord) -> String {
    format!("{index}:{}", record.origin)
}

/// Fits TF-IDF and the forest on the training split.
pub fn train_forest_model(
    records: &[DatasetRecord],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel<f64>> {
    let train = in_split(records, Split::Train);
    let docs: Vec<Vec<String>> = train.iter().map(|r| tfidf_tokens(&r.text)).collect();
    let tfidf = TfidfModel::<f64>::fit(&docs)?;
    let x: Vec<_> = docs.iter().map(|d| tfidf.transform(d)).collect();
    let y: Vec<u8> = train.iter().map(|r| r.label).collect();
    let forest = Forest::train(&x, &y, tfidf.dim(), params, seed)?;
    Ok(ForestModel { tfidf, forest })
}

/// Embeds every record, keyed by `index:origin`.
pub fn embed_records(
    client: &EmbeddingClient,
    records: &[DatasetRecord],
) -> Result<HashMap<String, Vec<f64>>> {
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vectors = client.embed_batch(&texts)?;
    Ok(records
        .iter()
        .enumerate()
        .zip(vectors)
        .map(|((i, r), v)| (example_id(i, r), v.values))
        .collect())
}

/// Trains the dense head on the training split, validating on the val split.
pub fn train_dense_model(
    records: &[DatasetRecord],
    client: &EmbeddingClient,
    cfg: &TrainConfig,
) -> Result<(DenseHead<f64>, History)> {
    let table = embed_records(client, records)?;
    let ids: Vec<String> = records
        .iter()
        .enumerate()
        .map(|(i, r)| example_id(i, r))
        .collect();
    let refs = |split: Split| -> Vec<ExampleRef<'_>> {
        records
            .iter()
            .zip(&ids)
            .filter(|(r, _)| r.split == split)
            .map(|(r, id)| ExampleRef {
                id,
                label: r.label,
            })
            .collect()
    };
    let (head, history, _) = dense::train(&refs(Split::Train), &refs(Split::Val), &table, cfg)?;
    Ok((head, history))
}

/// Probabilities for a batch of texts. Dense models need an embedding client
/// whose dimension matches the head.
pub fn predict_texts(
    model: &SavedModel<f64>,
    texts: &[&str],
    client: Option<&EmbeddingClient>,
) -> Result<Vec<f64>> {
    match model {
        SavedModel::Forest(m) => Ok(texts
            .iter()
            .map(|t| m.predict_tokens(&tfidf_tokens(t)))
            .collect()),
        SavedModel::Dense(head) => {
            let client = client.ok_or_else(|| {
                Error::InvalidConfig("dense models need an embedding backend".into())
            })?;
            client
                .embed_batch(texts)?
                .iter()
                .map(|v| head.predict(&v.values))
                .collect()
        }
    }
}

pub fn threshold_of(model: &SavedModel<f64>) -> f64 {
    match model {
        SavedModel::Forest(_) => FOREST_THRESHOLD,
        SavedModel::Dense(head) => head.threshold,
    }
}

/// Accuracy on each of `accuracy_splits` that has examples, and
/// precision/recall/F1 on `evaluated`.
pub fn evaluate(
    model: &SavedModel<f64>,
    records: &[DatasetRecord],
    evaluated: Split,
    accuracy_splits: &[Split],
    client: Option<&EmbeddingClient>,
) -> Result<MetricsReport> {
    let threshold = threshold_of(model);
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let probs = predict_texts(model, &texts, client)?;
    let labels_for = |split: Split| -> (Vec<u8>, Vec<u8>) {
        records
            .iter()
            .zip(&probs)
            .filter(|(r, _)| r.split == split)
            .map(|(r, &p)| (classify(p, threshold), r.label))
            .unzip()
    };
    let mut accuracy = SplitAccuracy::default();
    for &split in accuracy_splits {
        let (pred, truth) = labels_for(split);
        if pred.is_empty() {
            continue;
        }
        let acc = metrics::<f64>(&confusion(&pred, &truth)?).accuracy;
        match split {
            Split::Train => accuracy.train = Some(acc),
            Split::Val => accuracy.val = Some(acc),
            Split::Test => accuracy.test = Some(acc),
        }
    }
    let (pred, truth) = labels_for(evaluated);
    if pred.is_empty() {
        return Err(Error::InvalidConfig(format!("split {evaluated} has no examples")));
    }
    let m = metrics::<f64>(&confusion(&pred, &truth)?);
    Ok(MetricsReport::from_metrics(accuracy, &m, threshold, model.kind()))
}
