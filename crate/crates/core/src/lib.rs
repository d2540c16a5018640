//! Mining actionable sentences ("can you send me the report") from email.
//!
//! A lexicon-driven filter cascade weakly labels sentences, which then train
//! either a TF-IDF random forest or a small dense head over sentence
//! embeddings. Numeric code is generic over [`Scalar`] (`f32` or `f64`).

pub mod config;
pub mod dataset;
pub mod dense;
pub mod embedding;
pub mod error;
pub mod filters;
pub mod forest;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod segment;
pub mod synth;
pub mod tfidf;

pub use dataset::{DatasetRecord, LabeledDataset, Split, SplitRatios};
pub use embedding::{BackendConfig, BackendKind, EmbeddingClient, EmbeddingVector};
pub use error::{Error, Result};
pub use filters::{FilterConfig, FilterStage, FilterVerdict, Lexicon};
pub use ingest::{CorpusFormat, CorpusSpec, EmailMessage};
pub use metrics::{ConfusionMatrix, MetricsReport, ModelKind};
pub use scalar::Scalar;
pub use segment::{Sentence, Token};

pub type DenseHeadF32 = dense::DenseHead<f32>;
pub type DenseHeadF64 = dense::DenseHead<f64>;
pub type TfidfModelF64 = tfidf::TfidfModel<f64>;
pub type ForestF64 = forest::Forest<f64>;
pub type ForestModelF64 = model::ForestModel<f64>;
pub type SavedModelF64 = model::SavedModel<f64>;
pub type MetricsF64 = metrics::Metrics<f64>;
