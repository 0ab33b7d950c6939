//! On-disk artifact formats: corpus JSONL, plain-text ingestion, manifest,
//! findings and report files.

use std::fs;
use std::path::{Path, PathBuf};

use regconflict_core::corpus::{load_corpus, CrossRefEdge, Document, UnresolvedRef};
use regconflict_core::{Clause, ClauseId, Corpus, CorpusError, Finding, Span};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::llm::WindowFailure;

pub const CORPUS_SCHEMA_VERSION: &str = "1";
pub const FINDINGS_SCHEMA_VERSION: &str = "1";

/// Separator line for several documents in one text file.
pub const DOC_SEPARATOR_PREFIX: &str = "=== doc:";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

impl ArtifactError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, line: usize, message: impl ToString) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    fn invalid(path: &Path, message: impl ToString) -> Self {
        Self::Invalid {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Document {
        schema_version: String,
        doc_id: String,
        text: String,
    },
    Clause {
        schema_version: String,
        doc_id: String,
        id: ClauseId,
        title: Option<String>,
        body: String,
        cross_refs: Vec<ClauseId>,
        span: Span,
    },
    Edge {
        schema_version: String,
        from_doc: String,
        from: ClauseId,
        to_doc: String,
        to: ClauseId,
    },
    Unresolved {
        schema_version: String,
        doc_id: String,
        clause: ClauseId,
        target: ClauseId,
    },
}

impl Record {
    fn schema_version(&self) -> &str {
        match self {
            Record::Document { schema_version, .. }
            | Record::Clause { schema_version, .. }
            | Record::Edge { schema_version, .. }
            | Record::Unresolved { schema_version, .. } => schema_version,
        }
    }
}

/// Document lines, then clause lines, then edges and unresolved references.
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    let v = || CORPUS_SCHEMA_VERSION.to_string();
    let mut records = Vec::new();
    for d in &corpus.documents {
        records.push(Record::Document {
            schema_version: v(),
            doc_id: d.doc_id.clone(),
            text: d.text.clone(),
        });
    }
    for c in &corpus.clauses {
        records.push(Record::Clause {
            schema_version: v(),
            doc_id: c.doc_id.clone(),
            id: c.id.clone(),
            title: c.title.clone(),
            body: c.body.clone(),
            cross_refs: c.cross_refs.clone(),
            span: c.span,
        });
    }
    for e in &corpus.edges {
        records.push(Record::Edge {
            schema_version: v(),
            from_doc: e.from_doc.clone(),
            from: e.from.clone(),
            to_doc: e.to_doc.clone(),
            to: e.to.clone(),
        });
    }
    for u in &corpus.unresolved_refs {
        records.push(Record::Unresolved {
            schema_version: v(),
            doc_id: u.doc_id.clone(),
            clause: u.clause.clone(),
            target: u.target.clone(),
        });
    }
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Reads a corpus file. `path` is only used in error messages.
pub fn corpus_from_jsonl(text: &str, path: &Path) -> Result<Corpus, ArtifactError> {
    let mut corpus = Corpus::default();
    let mut stage = 0;
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| ArtifactError::format(path, line_no, e))?;
        if rec.schema_version() != CORPUS_SCHEMA_VERSION {
            return Err(ArtifactError::format(
                path,
                line_no,
                format!("unsupported schema_version {:?}", rec.schema_version()),
            ));
        }
        let rank = match rec {
            Record::Document { .. } => 0,
            Record::Clause { .. } => 1,
            Record::Edge { .. } | Record::Unresolved { .. } => 2,
        };
        if rank < stage {
            return Err(ArtifactError::format(path, line_no, "record out of order"));
        }
        stage = rank;
        match rec {
            Record::Document { doc_id, text, .. } => corpus.documents.push(Document { doc_id, text }),
            Record::Clause {
                doc_id,
                id,
                title,
                body,
                cross_refs,
                span,
                ..
            } => {
                if corpus.document(&doc_id).is_none() {
                    return Err(ArtifactError::format(path, line_no, format!("unknown document {doc_id}")));
                }
                corpus.clauses.push(Clause {
                    id,
                    title,
                    body,
                    doc_id,
                    cross_refs,
                    span,
                });
            }
            Record::Edge {
                from_doc, from, to_doc, to, ..
            } => corpus.edges.push(CrossRefEdge { from_doc, from, to_doc, to }),
            Record::Unresolved { doc_id, clause, target, .. } => {
                corpus.unresolved_refs.push(UnresolvedRef { doc_id, clause, target })
            }
        }
    }
    Ok(corpus)
}

pub fn read_corpus(path: &Path) -> Result<Corpus, ArtifactError> {
    corpus_from_jsonl(&read_text(path)?, path)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<(), ArtifactError> {
    write_text(path, &corpus_to_jsonl(corpus))
}

pub fn read_text(path: &Path) -> Result<String, ArtifactError> {
    fs::read_to_string(path).map_err(|e| ArtifactError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ArtifactError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| ArtifactError::io(path, e))
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration order
/// and maps are ordered, so equal values give equal bytes.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    write_text(path, &to_pretty_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::format(path, e.line(), e))
}

/// Splits a concatenated file on `=== doc: <id> ===` lines. Without any
/// separator the whole file is one document named `default_id`.
pub fn split_documents(text: &str, default_id: &str) -> Result<Vec<(String, String)>, String> {
    let mut docs: Vec<(String, String)> = Vec::new();
    let mut preamble = String::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix(DOC_SEPARATOR_PREFIX) {
            let id = rest.strip_suffix("===").ok_or_else(|| format!("malformed separator {trimmed:?}"))?.trim();
            if id.is_empty() {
                return Err(format!("empty document id in {trimmed:?}"));
            }
            docs.push((id.to_string(), String::new()));
        } else if let Some((_, body)) = docs.last_mut() {
            body.push_str(line);
        } else {
            preamble.push_str(line);
        }
    }
    if docs.is_empty() {
        return Ok(vec![(default_id.to_string(), preamble)]);
    }
    if !preamble.trim().is_empty() {
        return Err("text before the first document separator".to_string());
    }
    Ok(docs)
}

/// Joins documents with separator lines; `split_documents` inverts it.
pub fn join_documents<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(docs: I) -> String {
    let mut out = String::new();
    for (id, text) in docs {
        out.push_str(&format!("{DOC_SEPARATOR_PREFIX} {id} ===\n"));
        out.push_str(text);
        if !text.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

/// A directory of `.txt` files (document id = file stem, in name order) or a
/// single file, optionally holding several separated documents.
pub fn ingest_path(path: &Path) -> Result<Corpus, ArtifactError> {
    let meta = fs::metadata(path).map_err(|e| ArtifactError::io(path, e))?;
    let docs = if meta.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| ArtifactError::io(path, e))? {
            let p = entry.map_err(|e| ArtifactError::io(path, e))?.path();
            if p.is_file() && p.extension().is_some_and(|x| x == "txt") {
                files.push(p);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(ArtifactError::invalid(path, "no .txt files"));
        }
        let mut docs = Vec::new();
        for f in files {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push((stem, read_text(&f)?));
        }
        docs
    } else {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        split_documents(&read_text(path)?, &stem).map_err(|m| ArtifactError::invalid(path, m))?
    };
    load_corpus(docs).map_err(|source| ArtifactError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

/// Output of `detect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingsFile {
    pub schema_version: String,
    pub backend: String,
    #[serde(default)]
    pub prompt_hash: Option<String>,
    pub findings: Vec<Finding>,
    #[serde(default)]
    pub window_failures: Vec<WindowFailure>,
}

impl FindingsFile {
    pub fn new(backend: &str, findings: Vec<Finding>) -> Self {
        Self {
            schema_version: FINDINGS_SCHEMA_VERSION.to_string(),
            backend: backend.to_string(),
            prompt_hash: None,
            findings,
            window_failures: Vec::new(),
        }
    }
}

pub fn read_findings(path: &Path) -> Result<FindingsFile, ArtifactError> {
    let file: FindingsFile = read_json(path)?;
    if file.schema_version != FINDINGS_SCHEMA_VERSION {
        return Err(ArtifactError::invalid(
            path,
            format!("unsupported schema_version {:?}", file.schema_version),
        ));
    }
    Ok(file)
}
