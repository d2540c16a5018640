use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use actionable::config::RunConfig;
use actionable::dataset::{build_dataset_from_sentences, read_jsonl, write_jsonl};
use actionable::embedding::{BackendConfig, BackendKind, EmbeddingClient, ENDPOINT_ENV};
use actionable::ingest::{load_corpus, CorpusFormat, CorpusSpec};
use actionable::metrics::{emit_report, MetricsReport};
use actionable::model::SavedModel;
use actionable::pipeline::{self, evaluate, predict_texts, threshold_of};
use actionable::segment::{segment_message, Origin, Sentence};
use actionable::{dense, DatasetRecord, Lexicon, Split};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod manifest;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "actionable", version, about = "Actionable-sentence mining for email corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and write one JSON line per sentence.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "maildir")]
        format: CorpusFormat,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weakly label sentences with the filter cascade and split them.
    BuildDataset {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        lexicon_dir: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a forest baseline or the dense head.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = ["forest", "dense"])]
        model: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Score a model on one split of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Print the probability and label for one sentence.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: String,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Write a template-generated maildir corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        messages: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Write the shipped word lists into a directory for editing.
    WriteLexicon {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct BackendArgs {
    #[arg(long, default_value = "stub")]
    backend: BackendKind,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Stub embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    stub_seed: Option<u64>,
    #[arg(long)]
    embed_batch_size: Option<usize>,
    /// JSON Lines embedding cache.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl BackendArgs {
    fn config(&self, run: &RunConfig) -> BackendConfig {
        let mut cfg = match self.backend {
            BackendKind::Stub => BackendConfig::stub(self.dim.unwrap_or(run.embed_dim)),
            BackendKind::Remote => {
                BackendConfig::remote(self.endpoint.clone().unwrap_or_default())
            }
        };
        cfg.stub_seed = self.stub_seed.unwrap_or(run.stub_seed);
        cfg.batch_size = self.embed_batch_size.unwrap_or(run.embed_batch_size);
        cfg.cache_path = self.cache.clone();
        cfg
    }

    fn client(&self, run: &RunConfig) -> Result<EmbeddingClient, CliError> {
        Ok(EmbeddingClient::new(self.config(run))?)
    }

    fn describe(&self, run: &RunConfig) -> BTreeMap<String, String> {
        let cfg = self.config(run);
        let mut out = BTreeMap::from([("backend".to_string(), cfg.backend_id())]);
        if let Some(cache) = &self.cache {
            out.insert("cache".into(), cache.display().to_string());
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] actionable::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use actionable::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidConfig(_)
                | E::InvalidCorpusSpec(_)
                | E::InvalidLexicon { .. }
                | E::Ratio(_) => 2,
                E::Io { .. } | E::CsvSchema { .. } => 3,
                E::EmptyDataset => 4,
                E::BackendUnavailable(_) => 5,
                _ => 1,
            },
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRow {
    text: String,
    origin: String,
}

fn parse_origin(origin: &str) -> Origin {
    match origin.rsplit_once('#') {
        Some((id, index)) if index.parse::<usize>().is_ok() => Origin {
            message_id: id.to_string(),
            index: index.parse().unwrap_or_default(),
        },
        _ => Origin {
            message_id: origin.to_string(),
            index: 0,
        },
    }
}

fn load_run_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| actionable::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn ensure_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| actionable::Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}

fn ingest(
    corpus: PathBuf,
    format: CorpusFormat,
    limit: Option<usize>,
    out: PathBuf,
    manifest: &mut RunManifest,
) -> CliResult {
    let mut spec = CorpusSpec::new(&corpus, format);
    spec.limit = limit;
    let messages = load_corpus(&spec)?;
    let rows: Vec<SentenceRow> = messages
        .iter()
        .flat_map(segment_message)
        .map(|s| SentenceRow {
            text: s.text,
            origin: s.origin.to_string(),
        })
        .collect();
    ensure_parent(&out)?;
    write_jsonl(&out, &rows)?;
    log::info!("{} messages, {} sentences", messages.len(), rows.len());
    manifest.input(&corpus);
    manifest.output(&out);
    manifest.arg("format", format!("{format:?}"));
    if let Some(limit) = limit {
        manifest.arg("limit", limit.to_string());
    }
    manifest.finish(sidecar(&out, "manifest.json"))
}

fn build_dataset(
    sentences: PathBuf,
    lexicon_dir: Option<PathBuf>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    manifest: &mut RunManifest,
) -> CliResult {
    let cfg = load_run_config(config.as_deref(), seed)?;
    let lexicon = match &lexicon_dir {
        Some(dir) => Lexicon::from_dir(dir)?,
        None => Lexicon::default(),
    };
    let rows: Vec<SentenceRow> = read_jsonl(&sentences)?;
    let parsed: Vec<Sentence> = rows
        .into_iter()
        .map(|r| Sentence::new(r.text, parse_origin(&r.origin)))
        .collect();
    let filter = cfg.filter_config(lexicon);
    let (mut dataset, funnel) = build_dataset_from_sentences(&parsed, &filter, cfg.balance, cfg.seed)?;
    dataset.assign_splits(cfg.ratios, cfg.seed)?;
    ensure_parent(&out)?;
    write_jsonl(&out, &dataset.records())?;
    let funnel_path = sidecar(&out, "funnel.json");
    write_json(&funnel_path, &funnel)?;
    log::info!(
        "{} of {} sentences passed; dataset has {} examples",
        funnel.passed,
        funnel.total,
        dataset.examples.len()
    );
    manifest.input(&sentences);
    if let Some(dir) = &lexicon_dir {
        manifest.input(dir);
    }
    if let Some(c) = &config {
        manifest.input(c);
    }
    manifest.output(&out);
    manifest.output(&funnel_path);
    manifest.config = Some(cfg.snapshot());
    manifest.seed("dataset", cfg.seed);
    manifest.finish(sidecar(&out, "manifest.json"))
}

fn train(
    dataset: PathBuf,
    model: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    backend: BackendArgs,
    manifest: &mut RunManifest,
) -> CliResult {
    let cfg = load_run_config(config.as_deref(), seed)?;
    let records: Vec<DatasetRecord> = read_jsonl(&dataset)?;
    fs::create_dir_all(&out).map_err(|e| actionable::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let has_val = records.iter().any(|r| r.split == Split::Val);
    let evaluated = if has_val { Split::Val } else { Split::Train };
    let splits = [Split::Train, Split::Val];
    let model_path = out.join("model.json");
    let (saved, history, client) = match model.as_str() {
        "forest" => {
            let m = pipeline::train_forest_model(&records, &cfg.forest, cfg.seed)?;
            manifest.seed("forest", cfg.seed);
            (SavedModel::Forest(m), None, None)
        }
        _ => {
            let client = backend.client(&cfg)?;
            if client.config().kind == BackendKind::Remote {
                client.health()?;
            }
            let (head, history) = pipeline::train_dense_model(&records, &client, &cfg.train)?;
            manifest.seed("train", cfg.train.seed);
            manifest.args.extend(backend.describe(&cfg));
            (SavedModel::Dense(head), Some(history), Some(client))
        }
    };
    saved.save(&model_path)?;
    let report = evaluate(&saved, &records, evaluated, &splits, client.as_ref())?;
    let written = emit_report(&report, history.as_ref(), &out)?;
    manifest.input(&dataset);
    if let Some(c) = &config {
        manifest.input(c);
    }
    manifest.output(&model_path);
    for path in &written {
        manifest.output(path);
    }
    manifest.arg("model", model);
    manifest.arg("evaluated_split", evaluated.to_string());
    manifest.config = Some(cfg.snapshot());
    manifest.finish(out.join("manifest.json"))
}

fn load_model(path: &Path) -> CliResult<SavedModel<f64>> {
    Ok(SavedModel::load(path)?)
}

fn dense_client(
    model: &SavedModel<f64>,
    backend: &BackendArgs,
) -> CliResult<Option<EmbeddingClient>> {
    match model {
        SavedModel::Forest(_) => Ok(None),
        SavedModel::Dense(head) => {
            let mut run = RunConfig::default();
            run.embed_dim = head.d;
            backend.client(&run).map(Some)
        }
    }
}

fn eval(
    model_path: PathBuf,
    dataset: PathBuf,
    split: Split,
    out: PathBuf,
    backend: BackendArgs,
    manifest: &mut RunManifest,
) -> CliResult {
    let model = load_model(&model_path)?;
    let records: Vec<DatasetRecord> = read_jsonl(&dataset)?;
    let client = dense_client(&model, &backend)?;
    let report: MetricsReport = evaluate(&model, &records, split, &Split::ALL, client.as_ref())?;
    ensure_parent(&out)?;
    write_json(&out, &report)?;
    manifest.input(&model_path);
    manifest.input(&dataset);
    manifest.output(&out);
    manifest.arg("split", split.to_string());
    manifest.finish(sidecar(&out, "manifest.json"))
}

#[derive(Serialize)]
struct Prediction {
    probability: f64,
    label: u8,
    threshold: f64,
}

fn predict(model_path: PathBuf, text: String, backend: BackendArgs) -> CliResult {
    if text.trim().is_empty() {
        return Err(CliError::Usage("--text must not be empty".into()));
    }
    let model = load_model(&model_path)?;
    let client = dense_client(&model, &backend)?;
    let probability = predict_texts(&model, &[text.as_str()], client.as_ref())?[0];
    let threshold = threshold_of(&model);
    let prediction = Prediction {
        probability,
        label: dense::classify(probability, threshold),
        threshold,
    };
    println!(
        "{}",
        serde_json::to_string(&prediction).expect("prediction serialises")
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let started = Instant::now();
    let mut manifest = RunManifest::new(started);
    match cli.command {
        Command::Ingest {
            corpus,
            format,
            limit,
            out,
        } => {
            manifest.command = "ingest".into();
            ingest(corpus, format, limit, out, &mut manifest)
        }
        Command::BuildDataset {
            sentences,
            lexicon_dir,
            config,
            seed,
            out,
        } => {
            manifest.command = "build-dataset".into();
            build_dataset(sentences, lexicon_dir, config, seed, out, &mut manifest)
        }
        Command::Train {
            dataset,
            model,
            config,
            seed,
            out,
            backend,
        } => {
            manifest.command = "train".into();
            train(dataset, model, config, seed, out, backend, &mut manifest)
        }
        Command::Eval {
            model,
            dataset,
            split,
            out,
            backend,
        } => {
            manifest.command = "eval".into();
            eval(model, dataset, split, out, backend, &mut manifest)
        }
        Command::Predict {
            model,
            text,
            backend,
        } => predict(model, text, backend),
        Command::Synth {
            out,
            messages,
            seed,
        } => {
            actionable::synth::write_synthetic_maildir(&out, messages, seed)?;
            Ok(())
        }
        Command::WriteLexicon { out } => {
            Lexicon::write_defaults(&out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origins_round_trip() {
        let o = parse_origin("maildir/a/1.#3");
        assert_eq!(o.message_id, "maildir/a/1.");
        assert_eq!(o.index, 3);
        assert_eq!(parse_origin("plain").index, 0);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar(Path::new("out/data.jsonl"), "funnel.json"),
            PathBuf::from("out/data.funnel.json")
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(actionable::Error::EmptyDataset).exit_code(), 4);
        assert_eq!(
            CliError::from(actionable::Error::BackendUnavailable("x".into())).exit_code(),
            5
        );
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(actionable::Error::SingleClass).exit_code(), 1);
    }
}
