//! Deterministic rule-based conflict detector.
//!
//! Rules, each over the clause analyses of [`crate::analysis`]:
//!
//! * numeric contradiction: two clauses bound the same subject in the same
//!   dimension with intervals that do not intersect;
//! * modality flip: a quantity-free requirement and its paraphrase with the
//!   opposite modal polarity;
//! * term inconsistency: a clause uses a dictionary variant while the nearest
//!   clause mentioning the canonical term uses the canonical spelling;
//! * unit mismatch: a parenthetical conversion off by more than tolerance;
//! * cross-reference conflict: a clause refers to a clause whose bound in
//!   the same dimension cannot hold together with its own.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    analyze_clause, incompatible, mentions, modality_flipped, nearest_mentioning, shared_subject,
    ClauseAnalysis, TermDictionary,
};
use crate::corpus::Corpus;
use crate::finding::{assign_ids, ConflictKind, Finding, Provenance};
use crate::quantity::UnitTolerance;

pub const BACKEND_NAME: &str = "baseline";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineDetector {
    #[serde(default)]
    pub dictionary: TermDictionary,
    #[serde(default)]
    pub tolerance: UnitTolerance,
}

/// A rule firing, with clause positions instead of identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub kind: ConflictKind,
    /// Sorted corpus positions.
    pub clauses: Vec<usize>,
    pub rationale: String,
    pub quotes: Vec<String>,
}

pub type HitKey = (ConflictKind, Vec<usize>);

impl Hit {
    pub fn key(&self) -> HitKey {
        (self.kind, self.clauses.clone())
    }
}

fn pair(a: usize, b: usize) -> Vec<usize> {
    if a < b {
        vec![a, b]
    } else {
        vec![b, a]
    }
}

impl BaselineDetector {
    pub fn new(dictionary: TermDictionary, tolerance: UnitTolerance) -> Self {
        Self { dictionary, tolerance }
    }

    pub fn analyze(&self, corpus: &Corpus) -> Vec<ClauseAnalysis> {
        corpus.clauses.iter().map(|c| analyze_clause(c, &self.tolerance)).collect()
    }

    /// Findings in `(first clause id, kind)` order, numbered `F0001`...
    pub fn detect(&self, corpus: &Corpus) -> Vec<Finding> {
        let analyses = self.analyze(corpus);
        let hits = self.hits(corpus, &analyses);
        let mut findings: Vec<Finding> = hits
            .into_iter()
            .map(|h| {
                let clause_ids = crate::finding::normalized_ids(h.clauses.iter().map(|&i| corpus.clauses[i].id.clone()));
                Finding {
                    id: String::new(),
                    kind: h.kind,
                    clause_ids,
                    rationale: h.rationale,
                    quotes: h.quotes,
                    confidence: 1.0,
                    provenance: vec![Provenance {
                        backend: String::from(BACKEND_NAME),
                        window: None,
                    }],
                    unverifiable: false,
                }
            })
            .collect();
        findings.sort_by(|a, b| {
            (a.clause_ids.first(), a.kind, &a.clause_ids).cmp(&(b.clause_ids.first(), b.kind, &b.clause_ids))
        });
        findings.dedup_by(|a, b| a.kind == b.kind && a.clause_ids == b.clause_ids);
        assign_ids(&mut findings);
        findings
    }

    /// Every rule firing, one per `(kind, clause set)`, ordered by key.
    pub fn hits(&self, corpus: &Corpus, analyses: &[ClauseAnalysis]) -> Vec<Hit> {
        let mut out: BTreeMap<HitKey, Hit> = BTreeMap::new();
        let mut add = |h: Hit| {
            out.entry(h.key()).or_insert(h);
        };
        let bodies: Vec<&str> = corpus.clauses.iter().map(|c| c.body.as_str()).collect();

        // numeric contradictions
        let flat: Vec<(usize, &crate::analysis::Constraint)> = analyses
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.constraints.iter().map(move |c| (i, c)))
            .collect();
        for (x, &(i, ci)) in flat.iter().enumerate() {
            for &(j, cj) in &flat[x + 1..] {
                if i == j || ci.quantity.quantity.dimension != cj.quantity.quantity.dimension {
                    continue;
                }
                if incompatible(ci, cj, &self.tolerance) && shared_subject(&ci.subject, &cj.subject) > 0 {
                    add(Hit {
                        kind: ConflictKind::NumericContradiction,
                        clauses: pair(i, j),
                        rationale: format!(
                            "{} and {} bound the same subject with incompatible values ({} vs {})",
                            corpus.clauses[i].id,
                            corpus.clauses[j].id,
                            ci.quantity.quantity.original_text,
                            cj.quantity.quantity.original_text
                        ),
                        quotes: vec![
                            String::from(&bodies[i][ci.modal_start..ci.quantity.end]),
                            String::from(&bodies[j][cj.modal_start..cj.quantity.end]),
                        ],
                    });
                }
            }
        }

        // modality flips
        let modal: Vec<(usize, &crate::analysis::ModalSentence)> = analyses
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.modal_sentences.iter().filter(|m| !m.has_quantity).map(move |m| (i, m)))
            .collect();
        for (x, &(i, mi)) in modal.iter().enumerate() {
            for &(j, mj) in &modal[x + 1..] {
                if i != j && modality_flipped(mi, mj) {
                    add(Hit {
                        kind: ConflictKind::ModalityFlip,
                        clauses: pair(i, j),
                        rationale: format!(
                            "{} and {} state the same requirement with opposite force",
                            corpus.clauses[i].id, corpus.clauses[j].id
                        ),
                        quotes: vec![
                            String::from(&bodies[i][mi.range.0..mi.range.1]),
                            String::from(&bodies[j][mj.range.0..mj.range.1]),
                        ],
                    });
                }
            }
        }

        // term variants
        for swap in self.dictionary.iter() {
            for (i, body) in bodies.iter().enumerate() {
                if !mentions(body, &swap.variant) {
                    continue;
                }
                if let Some(j) = nearest_mentioning(bodies.iter().copied(), i, &swap.term) {
                    add(Hit {
                        kind: ConflictKind::TermInconsistency,
                        clauses: pair(i, j),
                        rationale: format!(
                            "{} says \"{}\" where the related clause {} says \"{}\"",
                            corpus.clauses[i].id, swap.variant, corpus.clauses[j].id, swap.term
                        ),
                        quotes: vec![],
                    });
                }
            }
        }

        // unit mismatches
        for (i, a) in analyses.iter().enumerate() {
            for q in a.inconsistent_conversions() {
                let c = q.quantity.conversion.as_ref().map_or(0.0, |c| c.deviation);
                add(Hit {
                    kind: ConflictKind::UnitMismatch,
                    clauses: vec![i],
                    rationale: format!(
                        "converted value in \"{}\" is off by {} mm",
                        q.quantity.original_text,
                        crate::quantity::format_number(c)
                    ),
                    quotes: vec![q.quantity.original_text.clone()],
                });
            }
        }

        // cross-reference conflicts
        let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (i, c) in corpus.clauses.iter().enumerate() {
            index.insert((c.doc_id.as_str(), c.id.as_str()), i);
        }
        let mut seen_edges = BTreeSet::new();
        for e in &corpus.edges {
            let (Some(&i), Some(&j)) = (
                index.get(&(e.from_doc.as_str(), e.from.as_str())),
                index.get(&(e.to_doc.as_str(), e.to.as_str())),
            ) else {
                continue;
            };
            if i == j || !seen_edges.insert((i, j)) {
                continue;
            }
            let found = analyses[i].constraints.iter().find_map(|ci| {
                analyses[j]
                    .constraints
                    .iter()
                    .find(|cj| incompatible(ci, cj, &self.tolerance))
                    .map(|cj| (ci, cj))
            });
            if let Some((ci, cj)) = found {
                add(Hit {
                    kind: ConflictKind::CrossReferenceConflict,
                    clauses: pair(i, j),
                    rationale: format!(
                        "{} defers to {} whose requirement ({}) cannot hold with its own ({})",
                        corpus.clauses[i].id,
                        corpus.clauses[j].id,
                        cj.quantity.quantity.original_text,
                        ci.quantity.quantity.original_text
                    ),
                    quotes: vec![
                        String::from(&bodies[i][ci.modal_start..ci.quantity.end]),
                        String::from(&bodies[j][cj.modal_start..cj.quantity.end]),
                    ],
                });
            }
        }
        out.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;

    fn run(text: &str) -> Vec<Finding> {
        BaselineDetector::default().detect(&load_corpus([("d", text)]).unwrap())
    }

    #[test]
    fn consistent_corpus_yields_nothing() {
        let text = "1.1: The maximum slope of a curb ramp shall not exceed 1:12.\n\
                    1.2: The clear width of a corridor shall be at least 900 mm.\n\
                    1.3: The lower end of each curb ramp shall have a 0.5-inch (13mm) lip bevelled at 45 degrees.\n\
                    1.4: Transitions from ramps to walks shall be flush and free of abrupt changes.";
        assert!(run(text).is_empty());
    }

    #[test]
    fn numeric_contradiction_on_shared_subject() {
        let text = "4.7.2: Maximum slopes of adjoining gutters shall not exceed 1:20.\n\
                    4.7.3: Slopes of adjoining gutters shall be at least 1:12.";
        let f = run(text);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, ConflictKind::NumericContradiction);
        assert_eq!(f[0].clause_ids, ["4.7.2", "4.7.3"]);
        assert!(f[0].quotes.iter().all(|q| text.contains(q.as_str())));
    }

    #[test]
    fn unit_mismatch_in_parenthetical() {
        let f = run("1127B.5.5: The lip shall be 0.5-inch (25mm) high.");
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, ConflictKind::UnitMismatch);
        assert_eq!(f[0].clause_ids, ["1127B.5.5"]);
    }

    #[test]
    fn term_variant_pairs_with_nearest_canonical_use() {
        let text = "1.1: Curb ramps shall be provided.\n1.2: Nothing here applies.\n1.3: Kerb ramps shall be textured.\n1.4: The curb edge shall be painted.";
        let f = run(text);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, ConflictKind::TermInconsistency);
        assert_eq!(f[0].clause_ids, ["1.3", "1.4"]);
    }

    #[test]
    fn modality_flip_pair() {
        let text = "2.1: Transitions from ramps to walks shall be flush and free of abrupt changes.\n\
                    2.2: In every case, transitions from ramps to walks shall not be flush and free of abrupt changes.";
        let f = run(text);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, ConflictKind::ModalityFlip);
    }

    #[test]
    fn cross_reference_conflict() {
        let text = "3.1: The width of a corridor shall be at least 900 mm in accordance with 3.2.\n\
                    3.2: The height of a parapet shall not exceed 600 mm.";
        let f = run(text);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, ConflictKind::CrossReferenceConflict);
        assert_eq!(f[0].clause_ids, ["3.1", "3.2"]);
    }

    #[test]
    fn ordered_by_first_clause_then_kind() {
        let text = "1.1: The lip shall be 0.5-inch (25mm) high.\n\
                    1.2: Maximum slopes of adjoining gutters shall not exceed 1:20.\n\
                    1.3: Slopes of adjoining gutters shall be at least 1:12.";
        let f = run(text);
        let got: Vec<(&str, ConflictKind)> = f.iter().map(|f| (f.clause_ids[0].as_str(), f.kind)).collect();
        assert_eq!(
            got,
            vec![("1.1", ConflictKind::UnitMismatch), ("1.2", ConflictKind::NumericContradiction)]
        );
        assert_eq!(f[0].id, "F0001");
        assert_eq!(run(text), f);
    }
}
