//! Conflict taxonomy and detector findings.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clause_id::ClauseId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConflictKind {
    NumericContradiction,
    ModalityFlip,
    TermInconsistency,
    UnitMismatch,
    CrossReferenceConflict,
    Ambiguity,
}

impl ConflictKind {
    pub const ALL: [ConflictKind; 6] = [
        ConflictKind::NumericContradiction,
        ConflictKind::ModalityFlip,
        ConflictKind::TermInconsistency,
        ConflictKind::UnitMismatch,
        ConflictKind::CrossReferenceConflict,
        ConflictKind::Ambiguity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::NumericContradiction => "NumericContradiction",
            ConflictKind::ModalityFlip => "ModalityFlip",
            ConflictKind::TermInconsistency => "TermInconsistency",
            ConflictKind::UnitMismatch => "UnitMismatch",
            ConflictKind::CrossReferenceConflict => "CrossReferenceConflict",
            ConflictKind::Ambiguity => "Ambiguity",
        }
    }

    /// Accepts labels regardless of case, spaces, `_` or `-`, e.g.
    /// `numeric_contradiction` or `Modality Flip`.
    pub fn from_label(label: &str) -> Option<Self> {
        let folded: String = label
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(&folded))
    }
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown conflict kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for ConflictKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s).ok_or_else(|| UnknownKind(String::from(s)))
    }
}

/// Which backend produced a finding, and from which window.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: String,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub kind: ConflictKind,
    /// Sorted and free of duplicates.
    pub clause_ids: Vec<ClauseId>,
    pub rationale: String,
    #[serde(default)]
    pub quotes: Vec<String>,
    pub confidence: f64,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
    /// Set when a cited clause is unknown or a quote is not found in the
    /// cited clauses.
    #[serde(default)]
    pub unverifiable: bool,
}

pub type DedupKey = (Vec<ClauseId>, ConflictKind);

impl Finding {
    pub fn key(&self) -> DedupKey {
        (normalized_ids(self.clause_ids.iter().cloned()), self.kind)
    }
}

pub fn normalized_ids<I: IntoIterator<Item = ClauseId>>(ids: I) -> Vec<ClauseId> {
    let mut v: Vec<ClauseId> = ids.into_iter().collect();
    v.sort();
    v.dedup();
    v
}

/// Merges findings sharing `(sorted clause ids, kind)`: the most confident one
/// survives (earliest on ties) and carries the union of all provenances.
/// Output is ordered by key.
pub fn deduplicate_findings(findings: Vec<Finding>) -> Vec<Finding> {
    let mut groups: BTreeMap<DedupKey, Finding> = BTreeMap::new();
    for f in findings {
        let key = f.key();
        match groups.get_mut(&key) {
            None => {
                let mut f = f;
                f.clause_ids = key.0.clone();
                f.provenance.sort();
                f.provenance.dedup();
                groups.insert(key, f);
            }
            Some(kept) => {
                let mut provenance = core::mem::take(&mut kept.provenance);
                provenance.extend(f.provenance.iter().cloned());
                provenance.sort();
                provenance.dedup();
                if f.confidence > kept.confidence {
                    *kept = f;
                    kept.clause_ids = key.0;
                }
                kept.provenance = provenance;
            }
        }
    }
    groups.into_values().collect()
}

/// Renumbers findings `F0001`, `F0002`, ... in their current order.
pub fn assign_ids(findings: &mut [Finding]) {
    for (i, f) in findings.iter_mut().enumerate() {
        f.id = alloc::format!("F{:04}", i + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn f(id: &str, ids: &[&str], kind: ConflictKind, conf: f64, window: usize) -> Finding {
        Finding {
            id: id.into(),
            kind,
            clause_ids: ids.iter().map(|s| ClauseId::from(*s)).collect(),
            rationale: String::new(),
            quotes: vec![],
            confidence: conf,
            provenance: vec![Provenance {
                backend: "mock".into(),
                window: Some(window),
            }],
            unverifiable: false,
        }
    }

    #[test]
    fn labels_normalize() {
        assert_eq!(ConflictKind::from_label("numeric_contradiction"), Some(ConflictKind::NumericContradiction));
        assert_eq!(ConflictKind::from_label("Modality Flip"), Some(ConflictKind::ModalityFlip));
        assert_eq!(ConflictKind::from_label("UNITMISMATCH"), Some(ConflictKind::UnitMismatch));
        assert_eq!(ConflictKind::from_label("contradiction"), None);
    }

    #[test]
    fn dedup_empty() {
        assert!(deduplicate_findings(vec![]).is_empty());
    }

    #[test]
    fn dedup_keeps_most_confident_and_merges_provenance() {
        let out = deduplicate_findings(vec![
            f("a", &["4.7.2", "1127B.5.5"], ConflictKind::NumericContradiction, 0.6, 0),
            f("b", &["1127B.5.5", "4.7.2"], ConflictKind::NumericContradiction, 0.9, 1),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "b");
        assert_eq!(out[0].confidence, 0.9);
        assert_eq!(out[0].provenance.len(), 2);
        assert_eq!(out[0].clause_ids, vec![ClauseId::from("4.7.2"), ClauseId::from("1127B.5.5")]);
    }

    #[test]
    fn dedup_distinguishes_kinds() {
        let out = deduplicate_findings(vec![
            f("a", &["1.1", "1.2"], ConflictKind::NumericContradiction, 0.6, 0),
            f("b", &["1.1", "1.2"], ConflictKind::Ambiguity, 0.6, 0),
        ]);
        assert_eq!(out.len(), 2);
    }
}
