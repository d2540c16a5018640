//! Corpus loading: maildir-style trees or `file,message` CSV exports, reduced
//! to cleaned message bodies.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};

/// A reply/forward separator: five or more dashes, then "Original Message"
/// or "Forwarded by".
fn is_reply_marker(line: &str) -> bool {
    let rest = line.trim_start_matches('-');
    if line.len() - rest.len() < 5 {
        return false;
    }
    let rest = rest.trim_start();
    rest.starts_with("Original Message") || rest.starts_with("Forwarded by")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub id: String,
    pub body: String,
    pub source_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    MaildirTree,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maildir" | "maildir_tree" => Ok(CorpusFormat::MaildirTree),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidCorpusSpec(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub root: PathBuf,
    pub format: CorpusFormat,
    pub limit: Option<usize>,
}

impl CorpusSpec {
    pub fn new(root: impl Into<PathBuf>, format: CorpusFormat) -> Self {
        CorpusSpec {
            root: root.into(),
            format,
            limit: None,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.limit == Some(0) {
            return Err(Error::InvalidCorpusSpec("limit must be positive".into()));
        }
        if !self.root.exists() {
            return Err(Error::io(
                &self.root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root does not exist"),
            ));
        }
        Ok(())
    }
}

fn is_header_field(line: &str) -> bool {
    match line.split_once(':') {
        Some((name, _)) => {
            !name.is_empty() && name.bytes().all(|b| (0x21..=0x7e).contains(&b) && b != b':')
        }
        None => false,
    }
}

/// Splits an RFC-822 style message into (header block, body). A header block is
/// only recognised when the first line is a `Name: value` field; it then runs
/// up to the first blank line, continuation lines included.
fn split_headers(text: &str) -> (&str, &str) {
    let first = text.lines().next().unwrap_or("");
    if !is_header_field(first) {
        return ("", text);
    }
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_end_matches(['\n', '\r']).is_empty() {
            return (&text[..offset], &text[offset + line.len()..]);
        }
        offset += line.len();
    }
    (text, "")
}

fn header_value<'a>(headers: &'a str, name: &str) -> Option<&'a str> {
    headers.lines().find_map(|line| {
        let (field, value) = line.split_once(':')?;
        field.eq_ignore_ascii_case(name).then(|| value.trim())
    })
}

/// Drops quoted lines, truncates at the first forward/reply marker and
/// collapses blank-line runs.
pub fn strip_reply_noise(body: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut previous_blank = true;
    for line in body.lines() {
        let line = line.trim_end();
        let lead = line.trim_start();
        if is_reply_marker(lead) {
            break;
        }
        if lead.starts_with('>') {
            continue;
        }
        if lead.is_empty() {
            if !previous_blank {
                out.push("");
            }
            previous_blank = true;
        } else {
            out.push(line);
            previous_blank = false;
        }
    }
    while out.last() == Some(&"") {
        out.pop();
    }
    out.join("\n")
}

/// Parses one raw message. The id is the `Message-ID` header when present,
/// otherwise a content hash of the raw bytes.
pub fn parse_email(raw: &[u8]) -> Result<EmailMessage> {
    let text = String::from_utf8_lossy(raw).replace("\r\n", "\n");
    let (headers, body) = split_headers(&text);
    let id = header_value(headers, "Message-ID")
        .filter(|v| !v.is_empty())
        .map(str::to_owned)
        .unwrap_or_else(|| crate::embedding::content_hash("raw", &text));
    let body = strip_reply_noise(body);
    if body.trim().is_empty() {
        return Err(Error::EmptyMessage(id));
    }
    Ok(EmailMessage {
        id,
        body,
        source_path: String::new(),
    })
}

fn message_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

fn load_maildir(spec: &CorpusSpec) -> Result<Vec<EmailMessage>> {
    let mut files = message_files(&spec.root)?;
    if let Some(limit) = spec.limit {
        files.truncate(limit);
    }
    let parsed: Vec<Result<Option<EmailMessage>>> = files
        .par_iter()
        .map(|path| {
            let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
            let path_str = path.to_string_lossy().into_owned();
            match parse_email(&raw) {
                Ok(mut msg) => {
                    msg.id = path_str.clone();
                    msg.source_path = path_str;
                    Ok(Some(msg))
                }
                Err(Error::EmptyMessage(_)) => {
                    log::debug!("skipping empty message {path_str}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    parsed.into_iter().filter_map(Result::transpose).collect()
}

fn load_csv(spec: &CorpusSpec) -> Result<Vec<EmailMessage>> {
    let path = &spec.root;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::CsvSchema {
                path: path.clone(),
                reason: format!("missing column {name:?}"),
            })
    };
    let (file_col, message_col) = (column("file")?, column("message")?);
    let source_path = path.to_string_lossy().into_owned();
    let mut out = Vec::new();
    for (row, record) in reader.byte_records().enumerate() {
        if spec.limit.is_some_and(|limit| row >= limit) {
            break;
        }
        let record = record.map_err(|e| csv_error(path, e))?;
        let (Some(file), Some(message)) = (record.get(file_col), record.get(message_col)) else {
            return Err(Error::CsvSchema {
                path: path.clone(),
                reason: format!("row {} is missing fields", row + 1),
            });
        };
        match parse_email(message) {
            Ok(mut msg) => {
                msg.id = String::from_utf8_lossy(file).into_owned();
                msg.source_path = source_path.clone();
                out.push(msg);
            }
            Err(Error::EmptyMessage(_)) => {
                log::debug!("skipping empty message at row {}", row + 1)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::CsvSchema {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
    }
}

/// Loads a corpus in deterministic order: sorted paths for trees, row order
/// for CSV. Messages with no body left after cleaning are skipped.
pub fn load_corpus(spec: &CorpusSpec) -> Result<Vec<EmailMessage>> {
    spec.validate()?;
    match spec.format {
        CorpusFormat::MaildirTree => load_maildir(spec),
        CorpusFormat::Csv => load_csv(spec),
    }
}
