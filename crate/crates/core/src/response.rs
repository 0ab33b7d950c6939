//! Parsing model responses into findings, and self-consistency voting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde_json::Value;

use crate::chunk::Window;
use crate::clause_id::ClauseId;
use crate::corpus::Corpus;
use crate::finding::{deduplicate_findings, normalized_ids, ConflictKind, DedupKey, Finding, Provenance};

pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResponseError {
    #[error("response holds no JSON array")]
    UnparseableResponse { raw: String },
    #[error("element {index} violates the findings schema: {reason}")]
    SchemaViolation { index: usize, reason: String },
}

/// Byte range of the balanced `[...]` starting at `open`, skipping brackets
/// inside JSON strings.
fn balanced_end(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (k, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(k + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The first balanced span that parses as a JSON array. Code fences and prose
/// around it are ignored.
pub fn extract_json_array(text: &str) -> Option<Vec<Value>> {
    let mut from = 0;
    while let Some(rel) = text[from..].find('[') {
        let open = from + rel;
        if let Some(end) = balanced_end(text, open) {
            if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(&text[open..end]) {
                return Some(items);
            }
        }
        from = open + 1;
    }
    None
}

fn violation(index: usize, reason: &str) -> ResponseError {
    ResponseError::SchemaViolation {
        index,
        reason: String::from(reason),
    }
}

fn element(index: usize, v: &Value) -> Result<(Vec<ClauseId>, ConflictKind, String, Vec<String>, f64), ResponseError> {
    let obj = v.as_object().ok_or_else(|| violation(index, "not an object"))?;
    let ids = obj
        .get("clause_ids")
        .and_then(Value::as_array)
        .ok_or_else(|| violation(index, "clause_ids must be an array"))?;
    let mut clause_ids = Vec::with_capacity(ids.len());
    for id in ids {
        match id.as_str().map(str::trim) {
            Some(s) if !s.is_empty() => clause_ids.push(ClauseId::from(s)),
            _ => return Err(violation(index, "clause_ids must hold non-empty strings")),
        }
    }
    if clause_ids.is_empty() {
        return Err(violation(index, "clause_ids is empty"));
    }
    let label = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| violation(index, "kind must be a string"))?;
    let kind = ConflictKind::from_label(label).ok_or_else(|| violation(index, "unknown kind"))?;
    let rationale = match obj.get("rationale") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(violation(index, "rationale must be a string")),
    };
    let quotes = match obj.get("quotes") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(qs)) => qs
            .iter()
            .map(|q| q.as_str().map(String::from))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| violation(index, "quotes must hold strings"))?,
        Some(_) => return Err(violation(index, "quotes must be an array")),
    };
    let confidence = match obj.get("confidence") {
        None | Some(Value::Null) => DEFAULT_CONFIDENCE,
        Some(c) => {
            let c = c.as_f64().ok_or_else(|| violation(index, "confidence must be a number"))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(violation(index, "confidence outside 0..1"));
            }
            c
        }
    };
    Ok((normalized_ids(clause_ids), kind, rationale, quotes, confidence))
}

/// Parses one raw response for `window`. Findings citing clauses outside the
/// window, or quoting text absent from the cited clauses, are kept and
/// flagged unverifiable.
pub fn parse_findings(raw: &str, corpus: &Corpus, window: &Window, backend: &str) -> Result<Vec<Finding>, ResponseError> {
    let items = extract_json_array(raw).ok_or_else(|| ResponseError::UnparseableResponse { raw: String::from(raw) })?;
    let bodies: BTreeMap<&str, &str> = corpus.clauses[window.start..window.end]
        .iter()
        .map(|c| (c.id.as_str(), c.body.as_str()))
        .collect();
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let (clause_ids, kind, rationale, quotes, confidence) = element(index, item)?;
        let cited: Vec<&str> = clause_ids.iter().filter_map(|id| bodies.get(id.as_str()).copied()).collect();
        let unknown = cited.len() != clause_ids.len();
        let bad_quote = quotes.iter().any(|q| !cited.iter().any(|b| b.contains(q.as_str())));
        out.push(Finding {
            id: String::new(),
            kind,
            clause_ids,
            rationale,
            quotes,
            confidence,
            provenance: vec![Provenance {
                backend: String::from(backend),
                window: Some(window.index),
            }],
            unverifiable: unknown || bad_quote,
        });
    }
    Ok(out)
}

/// Keeps findings whose key appears in a strict majority of `samples`. Each
/// kept key is represented by its most confident finding.
pub fn majority_vote(samples: Vec<Vec<Finding>>) -> Vec<Finding> {
    let n = samples.len();
    if n <= 1 {
        return samples.into_iter().next().map(deduplicate_findings).unwrap_or_default();
    }
    let mut votes: BTreeMap<DedupKey, usize> = BTreeMap::new();
    let mut all = Vec::new();
    for sample in samples {
        let sample = deduplicate_findings(sample);
        for f in &sample {
            *votes.entry(f.key()).or_insert(0) += 1;
        }
        all.extend(sample);
    }
    let kept: Vec<Finding> = all.into_iter().filter(|f| votes[&f.key()] * 2 > n).collect();
    deduplicate_findings(kept)
}

/// Cross-window aggregation: windows in index order, then deduplicated.
pub fn merge_windows(per_window: Vec<(usize, Vec<Finding>)>) -> Vec<Finding> {
    let mut per_window = per_window;
    per_window.sort_by_key(|(i, _)| *i);
    let mut out = deduplicate_findings(per_window.into_iter().flat_map(|(_, f)| f).collect());
    crate::finding::assign_ids(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{chunk_corpus, ChunkConfig};
    use crate::corpus::load_corpus;

    const ARRAY: &str = r#"[
      {"clause_ids": ["4.7.2", "1127B.5.5"], "kind": "numeric_contradiction", "rationale": "slopes differ",
       "quotes": ["shall not exceed 1:20"], "confidence": 0.9},
      {"clause_ids": ["4.7.2"], "kind": "Ambiguity", "rationale": "vague [sic]"}
    ]"#;

    fn fixture() -> (Corpus, Window) {
        let c = load_corpus([(
            "d",
            "4.7.2: Maximum slopes of adjoining gutters shall not exceed 1:20.\n1127B.5.5: A 0.5-inch (13mm) lip bevelled at 45 degrees.",
        )])
        .unwrap();
        let w = chunk_corpus(&c, &ChunkConfig::default()).unwrap().remove(0);
        (c, w)
    }

    #[test]
    fn bare_array() {
        let (c, w) = fixture();
        let f = parse_findings(ARRAY, &c, &w, "mock").unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].kind, ConflictKind::NumericContradiction);
        assert_eq!(f[0].clause_ids, ["4.7.2", "1127B.5.5"]);
        assert!(!f[0].unverifiable);
        assert_eq!(f[1].confidence, DEFAULT_CONFIDENCE);
        assert_eq!(f[1].provenance[0].window, Some(0));
    }

    #[test]
    fn fenced_with_prose_is_identical() {
        let (c, w) = fixture();
        let wrapped = alloc::format!("Here is what I found [see below]:\n```json\n{ARRAY}\n```\nDone.");
        assert_eq!(parse_findings(&wrapped, &c, &w, "mock"), parse_findings(ARRAY, &c, &w, "mock"));
    }

    #[test]
    fn prose_only() {
        let (c, w) = fixture();
        assert_eq!(
            parse_findings("No issues.", &c, &w, "mock"),
            Err(ResponseError::UnparseableResponse { raw: "No issues.".into() })
        );
    }

    #[test]
    fn schema_violation_names_element() {
        let (c, w) = fixture();
        let raw = r#"[{"clause_ids": ["4.7.2"], "kind": "Ambiguity", "rationale": "x"}, {"clause_ids": [], "kind": "Ambiguity", "rationale": "x"}]"#;
        assert!(matches!(parse_findings(raw, &c, &w, "mock"), Err(ResponseError::SchemaViolation { index: 1, .. })));
        let raw = r#"[{"clause_ids": ["4.7.2"], "kind": "Contradiction", "rationale": "x"}]"#;
        assert!(matches!(parse_findings(raw, &c, &w, "mock"), Err(ResponseError::SchemaViolation { index: 0, .. })));
    }

    #[test]
    fn unknown_ids_and_foreign_quotes_flagged() {
        let (c, w) = fixture();
        let raw = r#"[{"clause_ids": ["9.9"], "kind": "Ambiguity", "rationale": "x"},
                      {"clause_ids": ["4.7.2"], "kind": "Ambiguity", "rationale": "x", "quotes": ["45 degrees"]}]"#;
        let f = parse_findings(raw, &c, &w, "mock").unwrap();
        assert!(f[0].unverifiable && f[1].unverifiable);
    }

    fn finding(ids: &[&str], conf: f64) -> Finding {
        Finding {
            id: String::new(),
            kind: ConflictKind::Ambiguity,
            clause_ids: ids.iter().map(|s| ClauseId::from(*s)).collect(),
            rationale: String::new(),
            quotes: vec![],
            confidence: conf,
            provenance: vec![],
            unverifiable: false,
        }
    }

    #[test]
    fn strict_majority() {
        let a = finding(&["1.1"], 0.5);
        let b = finding(&["1.2"], 0.5);
        let out = majority_vote(vec![vec![a.clone(), b.clone()], vec![a.clone()], vec![b.clone(), a.clone()]]);
        assert_eq!(out.len(), 2);
        let out = majority_vote(vec![vec![a.clone()], vec![b.clone()]]);
        assert!(out.is_empty());
        // a key repeated inside one sample counts once
        let out = majority_vote(vec![vec![a.clone(), a.clone()], vec![], vec![]]);
        assert!(out.is_empty());
    }
}
