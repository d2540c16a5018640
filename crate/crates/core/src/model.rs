//! Persisted model documents.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::{DenseHead, HeadFile, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::metrics::ModelKind;
use crate::scalar::Scalar;
use crate::tfidf::TfidfModel;

/// TF-IDF vectorizer plus the forest trained on its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<T: Scalar> {
    pub tfidf: TfidfModel<T>,
    pub forest: Forest<T>,
}

impl<T: Scalar> ForestModel<T> {
    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> T {
        self.forest.predict(&self.tfidf.transform(tokens))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ForestFile<T: Scalar> {
    format_version: u32,
    tfidf: TfidfModel<T>,
    forest: Forest<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel<T: Scalar> {
    Forest(ForestModel<T>),
    Dense(DenseHead<T>),
}

impl<T: Scalar> SavedModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::Forest(_) => ModelKind::Forest,
            SavedModel::Dense(_) => ModelKind::DenseHead,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let json = match self {
            SavedModel::Forest(m) => serde_json::to_string(&ForestFile {
                format_version: FORMAT_VERSION,
                tfidf: m.tfidf.clone(),
                forest: m.forest.clone(),
            }),
            SavedModel::Dense(head) => serde_json::to_string(&HeadFile::from(head)),
        };
        json.map_err(|e| Error::format("model", e))
    }

    /// Distinguishes the two documents by their top-level keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::format("model", e))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(FORMAT_VERSION)) {
            return Err(Error::format("model", format!("unsupported format_version {version:?}")));
        }
        if value.get("forest").is_some() {
            let file: ForestFile<T> =
                serde_json::from_value(value).map_err(|e| Error::format("forest model", e))?;
            Ok(SavedModel::Forest(ForestModel {
                tfidf: file.tfidf,
                forest: file.forest,
            }))
        } else if value.get("W1").is_some() {
            let file: HeadFile<T> =
                serde_json::from_value(value).map_err(|e| Error::format("dense head", e))?;
            Ok(SavedModel::Dense(DenseHead::try_from(file)?))
        } else {
            Err(Error::format("model", "neither a forest nor a dense head document"))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = self.to_json()?;
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
