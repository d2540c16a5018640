//! Sentence embeddings from a deterministic hashing stub or a remote encoder
//! service, with a persistent JSON Lines cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::segment::tokenize;

pub const DEFAULT_STUB_DIM: usize = 512;
pub const ENDPOINT_ENV: &str = "ACTIONABLE_EMBED_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_scalar<T: crate::Scalar>(&self) -> Vec<T> {
        self.values.iter().map(|&v| T::of(v)).collect()
    }
}

/// Hex SHA-256 of `namespace`, a NUL separator and `text`.
pub fn content_hash(namespace: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(namespace.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

fn fnv1a(seed: u64, parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0100_0000_01b3;
    let mut h = OFFSET;
    for byte in seed.to_le_bytes().iter().chain(parts.iter().flat_map(|p| p.iter())) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Signed feature hashing of lowercase unigrams and bigrams, L2-normalised.
pub fn stub_embed(sentence: &str, dim: usize, seed: u64) -> EmbeddingVector {
    let mut values = vec![0.0; dim];
    if dim == 0 {
        return EmbeddingVector { values };
    }
    let tokens: Vec<String> = tokenize(sentence).into_iter().map(|t| t.lower).collect();
    let mut add = |h: u64| {
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[(h % dim as u64) as usize] += sign;
    };
    for token in &tokens {
        add(fnv1a(seed, &[b"u:", token.as_bytes()]));
    }
    for pair in tokens.windows(2) {
        add(fnv1a(seed, &[b"b:", pair[0].as_bytes(), b" ", pair[1].as_bytes()]));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    EmbeddingVector { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Stub,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stub" => Ok(BackendKind::Stub),
            "remote" => Ok(BackendKind::Remote),
            other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub dim: usize,
    pub stub_seed: u64,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub cache_path: Option<PathBuf>,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Stub,
            dim: DEFAULT_STUB_DIM,
            stub_seed: 0,
            endpoint: None,
            batch_size: 64,
            cache_path: None,
            max_in_flight: 4,
            attempts: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
        }
    }
}

impl BackendConfig {
    pub fn stub(dim: usize) -> Self {
        BackendConfig {
            dim,
            ..Default::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 || self.max_in_flight < 1 || self.attempts < 1 {
            return Err(Error::InvalidConfig(
                "batch_size, max_in_flight and attempts must be at least 1".into(),
            ));
        }
        match self.kind {
            BackendKind::Stub if self.dim < 8 => Err(Error::InvalidConfig(format!(
                "stub dim must be at least 8, got {}",
                self.dim
            ))),
            BackendKind::Remote if self.endpoint.as_deref().map_or(true, str::is_empty) => {
                Err(Error::InvalidConfig("remote backend needs an endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    /// Namespace for cache keys; different backends never share entries.
    pub fn backend_id(&self) -> String {
        match self.kind {
            BackendKind::Stub => format!("stub:{}:{}", self.dim, self.stub_seed),
            BackendKind::Remote => format!(
                "remote:{}",
                self.endpoint.as_deref().unwrap_or_default().trim_end_matches('/')
            ),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    k: String,
    v: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    sentences: &'a [String],
}

#[derive(Debug, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
    pub dim: usize,
    #[serde(default)]
    pub model: String,
}

#[derive(Debug, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub dim: usize,
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fatal(Error),
}

pub struct EmbeddingClient {
    config: BackendConfig,
    backend_id: String,
    cache: RwLock<HashMap<String, Vec<f64>>>,
    writer: Mutex<Option<BufWriter<File>>>,
    remote_calls: AtomicUsize,
    remote_dim: Mutex<Option<usize>>,
    http: Option<reqwest::blocking::Client>,
}

impl EmbeddingClient {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let mut cache = HashMap::new();
        let mut writer = None;
        if let Some(path) = &config.cache_path {
            if path.exists() {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let entry: CacheLine = serde_json::from_str(&line).map_err(|e| {
                        Error::format(format!("cache {} line {}", path.display(), n + 1), e)
                    })?;
                    cache.insert(entry.k, entry.v);
                }
            } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writer = Some(BufWriter::new(file));
        }
        let http = match config.kind {
            BackendKind::Remote => Some(
                reqwest::blocking::Client::builder()
                    .timeout(config.timeout)
                    .build()
                    .map_err(|e| Error::BackendUnavailable(e.to_string()))?,
            ),
            BackendKind::Stub => None,
        };
        Ok(EmbeddingClient {
            backend_id: config.backend_id(),
            config,
            cache: RwLock::new(cache),
            writer: Mutex::new(writer),
            remote_calls: AtomicUsize::new(0),
            remote_dim: Mutex::new(None),
            http,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Number of HTTP requests issued to `/embed` so far (retries included).
    pub fn remote_calls(&self) -> usize {
        self.remote_calls.load(Ordering::SeqCst)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn endpoint(&self) -> &str {
        self.config
            .endpoint
            .as_deref()
            .unwrap_or_default()
            .trim_end_matches('/')
    }

    /// Queries `/health` and returns the advertised dimension.
    pub fn health(&self) -> Result<usize> {
        match self.config.kind {
            BackendKind::Stub => Ok(self.config.dim),
            BackendKind::Remote => {
                let http = self.http.as_ref().expect("remote client");
                let url = format!("{}/health", self.endpoint());
                let resp = http
                    .get(&url)
                    .send()
                    .map_err(|e| Error::BackendUnavailable(format!("{url}: {e}")))?;
                if resp.status().as_u16() == 503 {
                    return Err(Error::BackendUnavailable(format!("{url}: model not loaded")));
                }
                if !resp.status().is_success() {
                    return Err(Error::Protocol(format!("{url}: status {}", resp.status())));
                }
                let health: HealthResponse =
                    resp.json().map_err(|e| Error::Protocol(format!("{url}: {e}")))?;
                if health.status != "ok" {
                    return Err(Error::BackendUnavailable(format!(
                        "{url}: status {:?}",
                        health.status
                    )));
                }
                Ok(health.dim)
            }
        }
    }

    fn post_once(&self, batch: &[String]) -> Attempt<Vec<Vec<f64>>> {
        let http = self.http.as_ref().expect("remote client");
        let url = format!("{}/embed", self.endpoint());
        self.remote_calls.fetch_add(1, Ordering::SeqCst);
        let resp = match http.post(&url).json(&EmbedRequest { sentences: batch }).send() {
            Ok(resp) => resp,
            Err(e) => return Attempt::Retry(format!("{url}: {e}")),
        };
        match resp.status().as_u16() {
            200 => {}
            503 => return Attempt::Retry(format!("{url}: model not loaded")),
            s if s >= 500 => return Attempt::Retry(format!("{url}: status {s}")),
            s => return Attempt::Fatal(Error::Protocol(format!("{url}: status {s}"))),
        }
        let body: EmbedResponse = match resp.json() {
            Ok(body) => body,
            Err(e) => return Attempt::Fatal(Error::Protocol(format!("{url}: {e}"))),
        };
        if body.embeddings.len() != batch.len() {
            return Attempt::Fatal(Error::Protocol(format!(
                "{url}: {} embeddings for {} sentences",
                body.embeddings.len(),
                batch.len()
            )));
        }
        if let Some(bad) = body.embeddings.iter().find(|v| v.len() != body.dim) {
            return Attempt::Fatal(Error::DimensionDrift {
                expected: body.dim,
                got: bad.len(),
            });
        }
        if body.embeddings.iter().flatten().any(|v| !v.is_finite()) {
            return Attempt::Fatal(Error::Protocol(format!("{url}: non-finite values")));
        }
        let mut known = self.remote_dim.lock().expect("dim lock");
        match *known {
            Some(expected) if expected != body.dim => {
                return Attempt::Fatal(Error::DimensionDrift {
                    expected,
                    got: body.dim,
                })
            }
            _ => *known = Some(body.dim),
        }
        Attempt::Done(body.embeddings)
    }

    fn post_with_retry(&self, batch: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut last = String::new();
        for attempt in 0..self.config.attempts {
            if attempt > 0 {
                thread::sleep(self.config.backoff * 2u32.pow(attempt - 1));
            }
            match self.post_once(batch) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    log::warn!("embedding request failed (attempt {}): {reason}", attempt + 1);
                    last = reason;
                }
            }
        }
        Err(Error::BackendUnavailable(last))
    }

    fn compute(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>> {
        match self.config.kind {
            BackendKind::Stub => Ok(sentences
                .iter()
                .map(|s| stub_embed(s, self.config.dim, self.config.stub_seed).values)
                .collect()),
            BackendKind::Remote => {
                let chunks: Vec<&[String]> = sentences.chunks(self.config.batch_size).collect();
                let mut out = Vec::with_capacity(sentences.len());
                for wave in chunks.chunks(self.config.max_in_flight) {
                    let results: Vec<Result<Vec<Vec<f64>>>> = thread::scope(|scope| {
                        let handles: Vec<_> = wave
                            .iter()
                            .map(|chunk| scope.spawn(move || self.post_with_retry(chunk)))
                            .collect();
                        handles
                            .into_iter()
                            .map(|h| h.join().expect("embedding worker panicked"))
                            .collect()
                    });
                    for r in results {
                        out.extend(r?);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Order-preserving embeddings for `sentences`. Cached entries are reused;
    /// misses are computed once per distinct sentence and appended to the cache.
    pub fn embed_batch<S: AsRef<str>>(&self, sentences: &[S]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = sentences
            .iter()
            .map(|s| content_hash(&self.backend_id, s.as_ref()))
            .collect();
        let mut missing: Vec<(String, String)> = Vec::new();
        {
            let cache = self.cache.read().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            for (key, s) in keys.iter().zip(sentences) {
                if !cache.contains_key(key) && seen.insert(key.clone()) {
                    missing.push((key.clone(), s.as_ref().to_string()));
                }
            }
        }
        if !missing.is_empty() {
            let texts: Vec<String> = missing.iter().map(|(_, s)| s.clone()).collect();
            let vectors = self.compute(&texts)?;
            let mut cache = self.cache.write().expect("cache lock");
            let mut writer = self.writer.lock().expect("writer lock");
            for ((key, _), v) in missing.into_iter().zip(vectors) {
                if let Some(w) = writer.as_mut() {
                    let line = serde_json::to_string(&CacheLine {
                        k: key.clone(),
                        v: v.clone(),
                    })
                    .map_err(|e| Error::format("cache line", e))?;
                    writeln!(w, "{line}").map_err(|e| self.cache_io(e))?;
                }
                cache.insert(key, v);
            }
            if let Some(w) = writer.as_mut() {
                w.flush().map_err(|e| self.cache_io(e))?;
            }
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(keys
            .iter()
            .map(|k| EmbeddingVector {
                values: cache[k].clone(),
            })
            .collect())
    }

    fn cache_io(&self, e: std::io::Error) -> Error {
        Error::io(self.config.cache_path.clone().unwrap_or_default(), e)
    }
}
