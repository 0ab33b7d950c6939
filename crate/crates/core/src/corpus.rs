//! Plain-text regulatory documents parsed into numbered clauses.
//!
//! A line that begins with a clause identifier immediately followed by `:`
//! opens a clause. When the header line carries only a heading (no terminal
//! punctuation) and further lines follow, the heading becomes the clause
//! title and the following lines its body; otherwise the header remainder
//! starts the body. Text before the first clause of a document is ignored.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clause_id::{scan_id, ClauseId};
use crate::quantity::measurement_follows;

/// Byte offsets into a document's raw text, `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub id: ClauseId,
    pub title: Option<String>,
    pub body: String,
    pub doc_id: String,
    pub cross_refs: Vec<ClauseId>,
    pub span: Span,
}

impl Clause {
    /// The clause as it appears in a prompt listing.
    pub fn listing(&self) -> String {
        match &self.title {
            Some(t) => alloc::format!("{}: {}\n{}", self.id, t, self.body),
            None => alloc::format!("{}: {}", self.id, self.body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

/// A resolved cross-reference from one clause to another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossRefEdge {
    pub from_doc: String,
    pub from: ClauseId,
    pub to_doc: String,
    pub to: ClauseId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedRef {
    pub doc_id: String,
    pub clause: ClauseId,
    pub target: ClauseId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub clauses: Vec<Clause>,
    pub edges: Vec<CrossRefEdge>,
    pub unresolved_refs: Vec<UnresolvedRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate clause id {id} in document {doc}")]
    DuplicateClauseId { doc: String, id: ClauseId },
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Index of the clause `id` in `doc_id`.
    pub fn position(&self, doc_id: &str, id: &ClauseId) -> Option<usize> {
        self.clauses.iter().position(|c| c.doc_id == doc_id && &c.id == id)
    }

    /// All clauses carrying `id`, in any document.
    pub fn find_all<'a>(&'a self, id: &'a ClauseId) -> impl Iterator<Item = (usize, &'a Clause)> + 'a {
        self.clauses.iter().enumerate().filter(move |(_, c)| &c.id == id)
    }

    /// Resolves `target` as referenced from a clause in `from_doc`: same
    /// document first, then the first document in corpus order holding it.
    pub fn resolve(&self, from_doc: &str, target: &ClauseId) -> Option<usize> {
        self.position(from_doc, target)
            .or_else(|| self.clauses.iter().position(|c| &c.id == target))
    }
}

/// Parses documents into a corpus. Cross-references are collected but not
/// resolved; see [`resolve_cross_references`].
pub fn parse_corpus<I, D, T>(documents: I) -> Result<Corpus, CorpusError>
where
    I: IntoIterator<Item = (D, T)>,
    D: Into<String>,
    T: Into<String>,
{
    let mut corpus = Corpus::default();
    let mut seen_docs = BTreeSet::new();
    for (doc_id, text) in documents {
        let doc_id: String = doc_id.into();
        let text: String = text.into();
        if !seen_docs.insert(doc_id.clone()) {
            return Err(CorpusError::DuplicateDocument(doc_id));
        }
        let clauses = parse_document(&doc_id, &text)?;
        corpus.clauses.extend(clauses);
        corpus.documents.push(Document { doc_id, text });
    }
    Ok(corpus)
}

/// Parses and resolves in one step.
pub fn load_corpus<I, D, T>(documents: I) -> Result<Corpus, CorpusError>
where
    I: IntoIterator<Item = (D, T)>,
    D: Into<String>,
    T: Into<String>,
{
    parse_corpus(documents).map(resolve_cross_references)
}

struct Header {
    line_start: usize,
    id: ClauseId,
    rest_start: usize,
    line_end: usize,
}

fn header_at(text: &str, line_start: usize, line_end: usize) -> Option<Header> {
    let line = &text[line_start..line_end];
    let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
    let body = &line[indent..];
    let id_len = scan_id(body);
    if id_len == 0 {
        return None;
    }
    let after = &body[id_len..];
    let after_colon = after.strip_prefix(':')?;
    if !(after_colon.is_empty() || after_colon.starts_with(char::is_whitespace)) {
        return None;
    }
    let id = ClauseId::parse(&body[..id_len])?;
    Some(Header {
        line_start: line_start + indent,
        id,
        rest_start: line_start + indent + id_len + 1,
        line_end,
    })
}

fn lines(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            let end = if i > start && text.as_bytes()[i - 1] == b'\r' { i - 1 } else { i };
            out.push((start, end));
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push((start, text.len()));
    }
    out
}

fn trimmed_range(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        (start, start)
    } else {
        (start + lead, end - trail)
    }
}

fn parse_document(doc_id: &str, text: &str) -> Result<Vec<Clause>, CorpusError> {
    let all_lines = lines(text);
    let mut headers = Vec::new();
    for (idx, &(s, e)) in all_lines.iter().enumerate() {
        if let Some(h) = header_at(text, s, e) {
            headers.push((idx, h));
        }
    }
    let mut seen = BTreeSet::new();
    let mut clauses = Vec::with_capacity(headers.len());
    for (n, (line_idx, header)) in headers.iter().enumerate() {
        if !seen.insert(header.id.as_str()) {
            return Err(CorpusError::DuplicateClauseId {
                doc: String::from(doc_id),
                id: header.id.clone(),
            });
        }
        let region_end = match headers.get(n + 1) {
            Some((_, next)) => next.line_start,
            None => text.len(),
        };
        let (rest_s, rest_e) = trimmed_range(text, header.rest_start, header.line_end);
        let cont_start = all_lines
            .get(line_idx + 1)
            .map(|&(s, _)| s)
            .unwrap_or(text.len())
            .min(region_end);
        let (cont_s, cont_e) = trimmed_range(text, cont_start, region_end);
        let rest = &text[rest_s..rest_e];
        let has_cont = cont_e > cont_s;
        let heading = !rest.is_empty() && has_cont && !rest.ends_with(['.', ';', ':', ',', '!', '?']);
        let (title, body_s, body_e) = if heading {
            (Some(String::from(rest)), cont_s, cont_e)
        } else if rest.is_empty() {
            (None, cont_s, cont_e)
        } else {
            let (s, e) = trimmed_range(text, rest_s, region_end);
            (None, s, e)
        };
        let body = String::from(&text[body_s..body_e]);
        let span_end = if body_e > body_s { body_e } else { rest_e.max(header.rest_start) };
        let cross_refs = scan_cross_refs(&body, &header.id);
        clauses.push(Clause {
            id: header.id.clone(),
            title,
            body,
            doc_id: String::from(doc_id),
            cross_refs,
            span: Span {
                start: header.line_start,
                end: span_end,
            },
        });
    }
    Ok(clauses)
}

/// Multi-segment identifiers mentioned in `body`, in order of first mention.
/// Numbers followed by a unit or forming a ratio are measurements, not
/// references.
pub fn scan_cross_refs(body: &str, own: &ClauseId) -> Vec<ClauseId> {
    let bytes = body.as_bytes();
    let mut out: Vec<ClauseId> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let boundary = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'.' || bytes[i - 1] == b':');
        if !bytes[i].is_ascii_digit() || !boundary {
            i += 1;
            continue;
        }
        let len = scan_id(&body[i..]);
        let candidate = &body[i..i + len];
        let rest = &body[i + len..];
        let next_is_word = rest.starts_with(|c: char| c.is_alphanumeric());
        if candidate.contains('.') && !next_is_word && !measurement_follows(rest) {
            if let Some(id) = ClauseId::parse(candidate) {
                if &id != own && !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        i += len.max(1);
    }
    out
}

/// Resolves every clause's cross-references into edges; targets missing from
/// the corpus land in `unresolved_refs`. Clauses are left untouched.
pub fn resolve_cross_references(mut corpus: Corpus) -> Corpus {
    // plain string keys; natural ordering is not needed for lookups
    let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut first_any: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, c) in corpus.clauses.iter().enumerate() {
        index.insert((c.doc_id.as_str(), c.id.as_str()), i);
        first_any.entry(c.id.as_str()).or_insert(i);
    }
    let mut edges = Vec::new();
    let mut unresolved = Vec::new();
    for c in &corpus.clauses {
        for r in &c.cross_refs {
            let hit = index
                .get(&(c.doc_id.as_str(), r.as_str()))
                .or_else(|| first_any.get(r.as_str()));
            match hit {
                Some(&t) => {
                    let target = &corpus.clauses[t];
                    edges.push(CrossRefEdge {
                        from_doc: c.doc_id.clone(),
                        from: c.id.clone(),
                        to_doc: target.doc_id.clone(),
                        to: target.id.clone(),
                    });
                }
                None => unresolved.push(UnresolvedRef {
                    doc_id: c.doc_id.clone(),
                    clause: c.id.clone(),
                    target: r.clone(),
                }),
            }
        }
    }
    corpus.edges = edges;
    corpus.unresolved_refs = unresolved;
    corpus
}
