//! Smoothed TF-IDF over token lists with L2-normalised sparse output.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse row: strictly increasing `indices` with matching `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SparseVector<T: Scalar> {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn get(&self, index: usize) -> T {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => T::zero(),
        }
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TfidfModel<T: Scalar> {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<T>,
    pub doc_count: usize,
}

impl<T: Scalar> TfidfModel<T> {
    /// Vocabulary is every term of the training documents, indexed in sorted
    /// order; `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Self> {
        if docs.iter().all(|d| d.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for term in unique {
                *df.entry(term.to_string()).or_default() += 1;
            }
        }
        let n = T::of_usize(docs.len());
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (index, (term, count)) in df.into_iter().enumerate() {
            let ratio = (T::one() + n) / (T::one() + T::of_usize(count));
            idf.push(ratio.ln() + T::one());
            vocabulary.insert(term, index);
        }
        Ok(TfidfModel {
            vocabulary,
            idf,
            doc_count: docs.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn idf_of(&self, term: &str) -> Option<T> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    /// Counts times idf, L2-normalised. Out-of-vocabulary terms are dropped.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector<T> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for term in doc {
            if let Some(&i) = self.vocabulary.get(term.as_ref()) {
                *counts.entry(i).or_default() += 1;
            }
        }
        let mut row = SparseVector::zeros(self.dim());
        for (i, c) in counts {
            row.indices.push(i);
            row.values.push(T::of_usize(c) * self.idf[i]);
        }
        let norm = row.norm();
        if norm > T::zero() {
            for v in &mut row.values {
                *v /= norm;
            }
        }
        row
    }
}
