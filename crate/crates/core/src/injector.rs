//! Seeded, taxonomized inconsistency injection with a ground-truth manifest.
//!
//! Planning works on a scratch copy of the corpus: each candidate mutation is
//! applied, the corpus is re-parsed, and the mutation is accepted only when
//! the rule set of [`crate::baseline`] gains exactly the intended conflict
//! (nothing for [`ConflictKind::Ambiguity`]) and loses none. Kinds are
//! planned in a fixed order with the clause-appending kinds first, so a later
//! append cannot change which clause an earlier term swap pairs with.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    analyze_clause, incompatible, mentions, nearest_mentioning, shared_subject, Bound, ClauseAnalysis,
    Constraint, TermDictionary,
};
use crate::baseline::{BaselineDetector, Hit};
use crate::clause_id::ClauseId;
use crate::corpus::{load_corpus, Clause, Corpus, CorpusError};
use crate::finding::ConflictKind;
use crate::sampling::Sampler;
use crate::quantity::{format_number, Dimension, UnitTolerance};
use crate::text::{find_word_ci, replace_word_ci};

pub const MANIFEST_SCHEMA_VERSION: &str = "1";

/// Order in which kinds are planned; clause-appending kinds come first.
pub const PLANNING_ORDER: [ConflictKind; 6] = [
    ConflictKind::NumericContradiction,
    ConflictKind::ModalityFlip,
    ConflictKind::CrossReferenceConflict,
    ConflictKind::UnitMismatch,
    ConflictKind::Ambiguity,
    ConflictKind::TermInconsistency,
];

const VAGUE_WORDS: [&str; 2] = ["adequate", "sufficient"];
const PARAPHRASE_PREFIX: &str = "In every case, ";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    #[serde(default)]
    pub counts: BTreeMap<ConflictKind, usize>,
    #[serde(default)]
    pub term_swaps: Option<TermDictionary>,
    #[serde(default)]
    pub exclude: Vec<ClauseId>,
}

impl InjectionConfig {
    pub fn with_count(mut self, kind: ConflictKind, n: usize) -> Self {
        self.counts.insert(kind, n);
        self
    }

    pub fn dictionary(&self) -> TermDictionary {
        self.term_swaps.clone().unwrap_or_default()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// One textual change to the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClauseEdit {
    /// Replace the body of an existing clause.
    Rewrite { doc_id: String, clause: ClauseId, body: String },
    /// Append a new clause at the end of a document.
    Append { doc_id: String, clause: ClauseId, body: String },
}

impl ClauseEdit {
    pub fn clause(&self) -> &ClauseId {
        match self {
            ClauseEdit::Rewrite { clause, .. } | ClauseEdit::Append { clause, .. } => clause,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedConflict {
    pub id: String,
    pub kind: ConflictKind,
    /// Sorted.
    pub clause_ids: Vec<ClauseId>,
    pub original_texts: BTreeMap<ClauseId, String>,
    pub mutated_texts: BTreeMap<ClauseId, String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub conflict: InjectedConflict,
    pub edits: Vec<ClauseEdit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub seed: u64,
    pub config: InjectionConfig,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub schema_version: String,
    pub seed: u64,
    pub config: InjectionConfig,
    pub conflicts: Vec<InjectedConflict>,
}

impl GroundTruthManifest {
    pub fn empty(seed: u64, config: InjectionConfig) -> Self {
        Self {
            schema_version: String::from(MANIFEST_SCHEMA_VERSION),
            seed,
            config,
            conflicts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.conflicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conflicts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InjectError {
    #[error("not enough eligible clauses for {kind}: requested {requested}, available {available}")]
    InsufficientTargets {
        kind: ConflictKind,
        requested: usize,
        available: usize,
    },
    #[error("clause is not eligible for {0}")]
    IneligibleClause(ConflictKind),
    #[error("plan targets clause {0} which is not in the corpus")]
    UnknownTarget(ClauseId),
    #[error("mutated corpus no longer parses: {0}")]
    Reparse(#[from] CorpusError),
    #[error("clause {0} did not take its planned text after re-parsing")]
    EditNotApplied(ClauseId),
}

type ClauseRef = (String, ClauseId);

fn clause_ref(c: &Clause) -> ClauseRef {
    (c.doc_id.clone(), c.id.clone())
}

type RefHit = (ConflictKind, Vec<ClauseRef>);

struct Scratch {
    corpus: Corpus,
    analyses: Vec<ClauseAnalysis>,
    hits: BTreeSet<RefHit>,
}

/// Applies kind-specific rewrites. Holds the semantics shared with the
/// baseline detector.
#[derive(Debug, Clone, Default)]
pub struct Mutator {
    pub dictionary: TermDictionary,
    pub tolerance: UnitTolerance,
}

/// Outcome of [`Mutator::mutate_clause`]: the edits plus the conflict record.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub edits: Vec<ClauseEdit>,
    pub conflict: InjectedConflict,
    /// The rule firing the baseline should gain, as clause references.
    intended: Option<(ConflictKind, Vec<ClauseRef>)>,
}

/// Clauses a mutation may not touch or pair with.
pub struct Reserved<'a> {
    pub used: &'a BTreeSet<ClauseRef>,
    pub excluded: &'a BTreeSet<ClauseId>,
    /// Ids carried by more than one clause; never targeted.
    pub duplicated: &'a BTreeSet<String>,
}

impl Reserved<'_> {
    fn allows(&self, corpus: &Corpus, i: usize) -> bool {
        let c = &corpus.clauses[i];
        !self.duplicated.contains(c.id.as_str()) && !self.excluded.contains(&c.id) && !self.used.contains(&clause_ref(c))
    }
}

/// Ids appearing more than once across the corpus.
pub fn duplicated_ids(corpus: &Corpus) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    corpus
        .clauses
        .iter()
        .filter(|c| !seen.insert(c.id.as_str()))
        .map(|c| String::from(c.id.as_str()))
        .collect()
}

fn contradicting_phrase(bound: Bound) -> &'static str {
    match bound {
        Bound::AtMost => "shall not exceed",
        Bound::AtLeast => "shall be at least",
        Bound::Exactly => "shall be",
    }
}

/// A bound and value that cannot hold together with `c`.
fn contradiction_for(c: &Constraint) -> Option<(Bound, String)> {
    let q = &c.quantity.quantity;
    let v = q.magnitude;
    let new_bound = match c.bound {
        Bound::AtMost => Bound::AtLeast,
        Bound::AtLeast => Bound::AtMost,
        Bound::Exactly => Bound::Exactly,
    };
    let text = match q.dimension {
        Dimension::Ratio if q.original_text.contains(':') => {
            if v <= 0.0 {
                return None;
            }
            let d = 1.0 / v;
            let nd = match c.bound {
                Bound::AtMost => libm::floor(d * 3.0 / 5.0 + 1e-9),
                Bound::AtLeast => libm::ceil(d * 5.0 / 3.0 - 1e-9),
                Bound::Exactly => libm::ceil(d * 3.0 / 2.0 - 1e-9),
            };
            if nd < 1.0 || (nd - d).abs() < 1e-9 {
                return None;
            }
            format!("1:{}", format_number(nd))
        }
        Dimension::Ratio => {
            let pct = v * 100.0;
            format!("{}%", format_number(scaled(pct, c.bound)?))
        }
        Dimension::Length => format!("{} mm", format_number(scaled(v, c.bound)?)),
        Dimension::Angle => format!("{} degrees", format_number(scaled(v, c.bound)?)),
        Dimension::Count => {
            let n = match c.bound {
                Bound::AtMost => v + 1.0,
                Bound::AtLeast if v >= 1.0 => v - 1.0,
                _ => return None,
            };
            format!("{}", format_number(n))
        }
    };
    Some((new_bound, text))
}

fn scaled(v: f64, bound: Bound) -> Option<f64> {
    let out = match bound {
        Bound::AtMost => libm::ceil(v * 1.5),
        Bound::AtLeast => libm::floor(v * 0.6),
        Bound::Exactly => libm::ceil(v * 1.5),
    };
    (out > 0.0 && (out - v).abs() >= 1.0).then_some(out)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(f) => f.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn decapitalize(s: &str) -> String {
    let first_word = s.split_whitespace().next().unwrap_or("");
    if first_word.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase) {
        return String::from(s);
    }
    let mut chars = s.chars();
    match chars.next() {
        Some(f) => f.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn strip_extreme_prefix(sentence: &str) -> String {
    for p in ["Maximum ", "Minimum ", "maximum ", "minimum "] {
        if let Some(rest) = sentence.strip_prefix(p) {
            return capitalize(rest);
        }
    }
    String::from(sentence)
}

/// Toggles the polarity of the modal verb at `modal` inside `sentence`.
fn flip_modal(sentence: &str, modal: (usize, usize)) -> String {
    let after = &sentence[modal.1..];
    let trimmed = after.trim_start();
    let word_len = trimmed.find(|c: char| !c.is_alphabetic()).unwrap_or(trimmed.len());
    let word = &trimmed[..word_len];
    if word.eq_ignore_ascii_case("not") || word.eq_ignore_ascii_case("never") {
        let skip = after.len() - trimmed.len() + word_len;
        format!("{}{}", &sentence[..modal.1], &sentence[modal.1 + skip..])
    } else {
        format!("{} not{}", &sentence[..modal.1], after)
    }
}

fn next_free_id(corpus: &Corpus, base: &ClauseId) -> ClauseId {
    let mut suffix = String::from("A");
    loop {
        let candidate = ClauseId::from(format!("{}{}", base, suffix));
        if corpus.clauses.iter().all(|c| c.id != candidate) {
            return candidate;
        }
        // A..Z, then AA..AZ, ...
        let last = suffix.pop().unwrap_or('A');
        if last == 'Z' {
            suffix.push('A');
            suffix.push('A');
        } else {
            suffix.push((last as u8 + 1) as char);
        }
    }
}

fn replace_range(body: &str, start: usize, end: usize, with: &str) -> String {
    format!("{}{}{}", &body[..start], with, &body[end..])
}

/// Replaces whole-token occurrences of a clause id in `body`.
fn retarget(body: &str, from: &ClauseId, to: &ClauseId) -> String {
    let mut out = String::new();
    let mut last = 0;
    let mut pos = 0;
    while let Some(at) = find_word_ci(body, from.as_str(), pos) {
        let after = &body[at + from.as_str().len()..];
        let continues = after.len() >= 2 && after.as_bytes()[0] == b'.' && after.as_bytes()[1].is_ascii_digit();
        let before_dot = at > 0 && body.as_bytes()[at - 1] == b'.';
        if !continues && !before_dot {
            out.push_str(&body[last..at]);
            out.push_str(to.as_str());
            last = at + from.as_str().len();
        }
        pos = at + 1;
    }
    out.push_str(&body[last..]);
    out
}

impl Mutator {
    pub fn new(dictionary: TermDictionary, tolerance: UnitTolerance) -> Self {
        Self { dictionary, tolerance }
    }

    /// Builds the rewrite of kind `kind` targeting clause `target`.
    /// `vague_word` selects the wording used for [`ConflictKind::Ambiguity`].
    pub fn mutate_clause(
        &self,
        corpus: &Corpus,
        analyses: &[ClauseAnalysis],
        target: usize,
        kind: ConflictKind,
        reserved: &Reserved<'_>,
        vague_word: usize,
    ) -> Result<Mutation, InjectError> {
        let inel = InjectError::IneligibleClause(kind);
        if !reserved.allows(corpus, target) {
            return Err(inel);
        }
        let clause = &corpus.clauses[target];
        let analysis = &analyses[target];
        let mut record = Record::new(clause);
        match kind {
            ConflictKind::NumericContradiction => {
                let c = analysis.constraints.first().ok_or(inel.clone())?;
                let (bound, value) = contradiction_for(c).ok_or(inel.clone())?;
                let replacement = format!("{} {}", contradicting_phrase(bound), value);
                let partner = self.subject_partner(corpus, analyses, target, c, reserved);
                match partner {
                    Some((p, pc)) => {
                        let pclause = &corpus.clauses[p];
                        let body = replace_range(&pclause.body, pc.modal_start, pc.quantity.end, &replacement);
                        record.rewrite(pclause, body);
                    }
                    None => {
                        let sentence = &clause.body[c.sentence.0..c.sentence.1];
                        let local = replace_range(
                            sentence,
                            c.modal_start - c.sentence.0,
                            c.quantity.end - c.sentence.0,
                            &replacement,
                        );
                        let body = strip_extreme_prefix(&local);
                        record.append(corpus, clause, body);
                    }
                }
                record.describe(format!(
                    "bound on the subject of {} contradicted ({} vs {})",
                    clause.id, c.quantity.quantity.original_text, value
                ));
                Ok(record.finish(kind, true))
            }
            ConflictKind::ModalityFlip => {
                let m = analysis
                    .modal_sentences
                    .iter()
                    .find(|m| !m.has_quantity && m.tokens.len() >= crate::analysis::MIN_PARAPHRASE_TOKENS)
                    .ok_or(inel.clone())?;
                let sentence = &clause.body[m.range.0..m.range.1];
                let flipped = flip_modal(sentence, (m.modal.0 - m.range.0, m.modal.1 - m.range.0));
                let body = format!("{}{}", PARAPHRASE_PREFIX, decapitalize(&flipped));
                record.append(corpus, clause, body);
                record.describe(format!("paraphrase of {} with the modal negated", clause.id));
                Ok(record.finish(kind, true))
            }
            ConflictKind::CrossReferenceConflict => {
                let c = analysis.constraints.first().ok_or(inel.clone())?;
                let current: Vec<usize> = corpus
                    .edges
                    .iter()
                    .filter(|e| e.from_doc == clause.doc_id && e.from == clause.id)
                    .filter_map(|e| corpus.position(&e.to_doc, &e.to))
                    .collect();
                let &old = current.first().ok_or(inel.clone())?;
                let x = (0..corpus.clauses.len())
                    .filter(|&j| j != target && !current.contains(&j) && reserved.allows(corpus, j))
                    .filter(|&j| {
                        analyses[j].constraints.iter().any(|cj| incompatible(c, cj, &self.tolerance))
                            && analyses[j]
                                .constraints
                                .iter()
                                .all(|cj| analysis.constraints.iter().all(|ci| shared_subject(&ci.subject, &cj.subject) == 0))
                    })
                    .min_by_key(|&j| (j.abs_diff(target), j))
                    .ok_or(inel.clone())?;
                let old_id = &corpus.clauses[old].id;
                let new_id = &corpus.clauses[x].id;
                let body = retarget(&clause.body, old_id, new_id);
                if body == clause.body {
                    return Err(inel);
                }
                record.rewrite(clause, body);
                record.include(&corpus.clauses[x]);
                record.describe(format!(
                    "reference in {} moved from {} to {}, whose requirement cannot hold with it",
                    clause.id, old_id, new_id
                ));
                Ok(record.finish(kind, true))
            }
            ConflictKind::UnitMismatch => {
                let q = analysis
                    .quantities
                    .iter()
                    .find(|q| q.quantity.conversion.as_ref().is_some_and(|c| c.consistent))
                    .ok_or(inel.clone())?;
                let conv = q.quantity.conversion.as_ref().ok_or(inel.clone())?;
                let factor = crate::quantity::parse_quantity(&format!("1 {}", conv.unit_text))
                    .filter(|u| u.dimension == Dimension::Length)
                    .map(|u| u.magnitude)
                    .ok_or(inel.clone())?;
                let stated = libm::round(2.0 * q.quantity.magnitude / factor);
                if (stated * factor - q.quantity.magnitude).abs() <= self.tolerance.allowance(q.quantity.magnitude) {
                    return Err(inel);
                }
                let start = q.start + conv.number_range.0;
                let end = q.start + conv.number_range.1;
                let body = replace_range(&clause.body, start, end, &format_number(stated));
                record.rewrite(clause, body);
                record.describe(format!(
                    "converted value in {} changed from {} to {}",
                    clause.id,
                    &clause.body[start..end],
                    format_number(stated)
                ));
                Ok(record.finish(kind, true))
            }
            ConflictKind::Ambiguity => {
                let c = analysis.constraints.first().ok_or(inel.clone())?;
                let word = VAGUE_WORDS[vague_word % VAGUE_WORDS.len()];
                let body = replace_range(&clause.body, c.modal_start, c.quantity.end, &format!("shall be {word}"));
                if let Some((p, _)) = self.subject_partner(corpus, analyses, target, c, reserved) {
                    record.include(&corpus.clauses[p]);
                }
                record.rewrite(clause, body);
                record.describe(format!(
                    "precise bound {} in {} replaced by \"{}\"",
                    c.quantity.quantity.original_text, clause.id, word
                ));
                Ok(record.finish(kind, false))
            }
            ConflictKind::TermInconsistency => {
                let bodies: Vec<&str> = corpus.clauses.iter().map(|c| c.body.as_str()).collect();
                let (swap, partner) = self
                    .dictionary
                    .iter()
                    .filter(|s| mentions(&clause.body, &s.term) && !mentions(&clause.body, &s.variant))
                    .find_map(|s| {
                        nearest_mentioning(bodies.iter().copied(), target, &s.term)
                            .filter(|&p| reserved.allows(corpus, p))
                            .map(|p| (s, p))
                    })
                    .ok_or(inel.clone())?;
                let body = replace_word_ci(&clause.body, &swap.term, &swap.variant);
                record.rewrite(clause, body);
                record.include(&corpus.clauses[partner]);
                record.describe(format!(
                    "\"{}\" in {} replaced by \"{}\" while {} keeps \"{}\"",
                    swap.term, clause.id, swap.variant, corpus.clauses[partner].id, swap.term
                ));
                Ok(record.finish(kind, true))
            }
        }
    }

    /// Nearest clause with a same-dimension constraint sharing the longest
    /// subject run with `c`.
    fn subject_partner<'a>(
        &self,
        corpus: &Corpus,
        analyses: &'a [ClauseAnalysis],
        target: usize,
        c: &Constraint,
        reserved: &Reserved<'_>,
    ) -> Option<(usize, &'a Constraint)> {
        let mut best: Option<(usize, usize, &Constraint)> = None;
        for (j, a) in analyses.iter().enumerate() {
            if j == target || !reserved.allows(corpus, j) {
                continue;
            }
            for cj in &a.constraints {
                if cj.quantity.quantity.dimension != c.quantity.quantity.dimension {
                    continue;
                }
                let shared = shared_subject(&c.subject, &cj.subject);
                if shared == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bj, bs, _)) => {
                        (shared, core::cmp::Reverse(j.abs_diff(target)), core::cmp::Reverse(j))
                            > (bs, core::cmp::Reverse(bj.abs_diff(target)), core::cmp::Reverse(bj))
                    }
                };
                if better {
                    best = Some((j, shared, cj));
                }
            }
        }
        best.map(|(j, _, cj)| (j, cj))
    }
}

/// Accumulates the clauses a mutation touches.
struct Record {
    target: ClauseRef,
    clauses: BTreeMap<ClauseId, (String, String, String)>,
    refs: Vec<ClauseRef>,
    edits: Vec<ClauseEdit>,
    description: String,
}

impl Record {
    fn new(target: &Clause) -> Self {
        let mut r = Self {
            target: clause_ref(target),
            clauses: BTreeMap::new(),
            refs: Vec::new(),
            edits: Vec::new(),
            description: String::new(),
        };
        r.include(target);
        r
    }

    fn include(&mut self, c: &Clause) {
        self.clauses
            .entry(c.id.clone())
            .or_insert_with(|| (c.doc_id.clone(), c.body.clone(), c.body.clone()));
        if !self.refs.contains(&clause_ref(c)) {
            self.refs.push(clause_ref(c));
        }
    }

    fn rewrite(&mut self, c: &Clause, body: String) {
        self.include(c);
        if let Some(entry) = self.clauses.get_mut(&c.id) {
            entry.2 = body.clone();
        }
        self.edits.push(ClauseEdit::Rewrite {
            doc_id: c.doc_id.clone(),
            clause: c.id.clone(),
            body,
        });
    }

    fn append(&mut self, corpus: &Corpus, like: &Clause, body: String) {
        let id = next_free_id(corpus, &like.id);
        self.clauses
            .insert(id.clone(), (like.doc_id.clone(), String::new(), body.clone()));
        self.refs.push((like.doc_id.clone(), id.clone()));
        self.edits.push(ClauseEdit::Append {
            doc_id: like.doc_id.clone(),
            clause: id,
            body,
        });
    }

    fn describe(&mut self, d: String) {
        self.description = d;
    }

    fn finish(self, kind: ConflictKind, detectable: bool) -> Mutation {
        let _ = &self.target;
        let mut refs = self.refs;
        refs.sort();
        let clause_ids: Vec<ClauseId> = self.clauses.keys().cloned().collect();
        let clause_ids = crate::finding::normalized_ids(clause_ids);
        Mutation {
            edits: self.edits,
            conflict: InjectedConflict {
                id: String::new(),
                kind,
                clause_ids,
                original_texts: self.clauses.iter().map(|(k, v)| (k.clone(), v.1.clone())).collect(),
                mutated_texts: self.clauses.iter().map(|(k, v)| (k.clone(), v.2.clone())).collect(),
                description: self.description,
            },
            intended: detectable.then_some((kind, refs)),
        }
    }
}

/// Applies edits to document texts and re-parses, checking every edited
/// clause carries its new body.
pub fn apply_edits(corpus: &Corpus, edits: &[ClauseEdit]) -> Result<Corpus, InjectError> {
    let mut docs: Vec<(String, String)> = corpus
        .documents
        .iter()
        .map(|d| (d.doc_id.clone(), d.text.clone()))
        .collect();
    let mut current = corpus.clone();
    for edit in edits {
        match edit {
            ClauseEdit::Rewrite { doc_id, clause, body } => {
                let pos = current
                    .position(doc_id, clause)
                    .ok_or_else(|| InjectError::UnknownTarget(clause.clone()))?;
                let c = &current.clauses[pos];
                let end = c.span.end;
                let start = end - c.body.len();
                let doc = docs
                    .iter_mut()
                    .find(|(d, _)| d == doc_id)
                    .ok_or_else(|| InjectError::UnknownTarget(clause.clone()))?;
                doc.1 = format!("{}{}{}", &doc.1[..start], body, &doc.1[end..]);
            }
            ClauseEdit::Append { doc_id, clause, body } => {
                let doc = docs
                    .iter_mut()
                    .find(|(d, _)| d == doc_id)
                    .ok_or_else(|| InjectError::UnknownTarget(clause.clone()))?;
                let trimmed = doc.1.trim_end().len();
                doc.1.truncate(trimmed);
                if !doc.1.is_empty() {
                    doc.1.push_str("\n\n");
                }
                doc.1.push_str(&format!("{clause}: {body}\n"));
            }
        }
        current = load_corpus(docs.iter().map(|(d, t)| (d.clone(), t.clone())))?;
        let pos = current
            .position(match edit {
                ClauseEdit::Rewrite { doc_id, .. } | ClauseEdit::Append { doc_id, .. } => doc_id,
            }, edit.clause())
            .ok_or_else(|| InjectError::EditNotApplied(edit.clause().clone()))?;
        let expected = match edit {
            ClauseEdit::Rewrite { body, .. } | ClauseEdit::Append { body, .. } => body,
        };
        if current.clauses[pos].body != *expected {
            return Err(InjectError::EditNotApplied(edit.clause().clone()));
        }
    }
    Ok(current)
}

impl Scratch {
    fn new(corpus: &Corpus, detector: &BaselineDetector) -> Self {
        let analyses = detector.analyze(corpus);
        let hits = ref_hits(corpus, &detector.hits(corpus, &analyses));
        Self {
            corpus: corpus.clone(),
            analyses,
            hits,
        }
    }

    /// Re-analyses only clauses whose body changed.
    fn advance(&self, next: Corpus, detector: &BaselineDetector) -> Self {
        let old: BTreeMap<(&str, &str), usize> = self
            .corpus
            .clauses
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.doc_id.as_str(), c.id.as_str()), i))
            .collect();
        let analyses: Vec<ClauseAnalysis> = next
            .clauses
            .iter()
            .map(|c| match old.get(&(c.doc_id.as_str(), c.id.as_str())) {
                Some(&i) if self.corpus.clauses[i].body == c.body => self.analyses[i].clone(),
                _ => analyze_clause(c, &detector.tolerance),
            })
            .collect();
        let hits = ref_hits(&next, &detector.hits(&next, &analyses));
        Self {
            corpus: next,
            analyses,
            hits,
        }
    }
}

fn ref_hits(corpus: &Corpus, hits: &[Hit]) -> BTreeSet<RefHit> {
    hits.iter()
        .map(|h| {
            let mut refs: Vec<ClauseRef> = h.clauses.iter().map(|&i| clause_ref(&corpus.clauses[i])).collect();
            refs.sort();
            (h.kind, refs)
        })
        .collect()
}

/// Seeded selection of disjoint targets per kind. Each entry carries the
/// concrete edits; [`apply_plan`] replays them.
pub fn plan_injections(corpus: &Corpus, config: &InjectionConfig, seed: u64) -> Result<InjectionPlan, InjectError> {
    let detector = BaselineDetector::new(config.dictionary(), UnitTolerance::default());
    let mutator = Mutator::new(config.dictionary(), detector.tolerance);
    let excluded: BTreeSet<ClauseId> = config.exclude.iter().cloned().collect();
    let mut used: BTreeSet<ClauseRef> = BTreeSet::new();
    let mut sampler = Sampler::new(seed);
    let mut entries = Vec::new();
    if config.total() == 0 {
        return Ok(InjectionPlan {
            seed,
            config: config.clone(),
            entries,
        });
    }
    let mut scratch = Scratch::new(corpus, &detector);
    let duplicated = duplicated_ids(corpus);
    for kind in PLANNING_ORDER {
        let requested = config.counts.get(&kind).copied().unwrap_or(0);
        if requested == 0 {
            continue;
        }
        // candidates are identified by reference since appends shift positions
        let mut candidates: Vec<ClauseRef> = scratch.corpus.clauses.iter().map(clause_ref).collect();
        sampler.shuffle(&mut candidates);
        let mut accepted = 0;
        for cand in candidates {
            if accepted == requested {
                break;
            }
            let Some(target) = scratch.corpus.position(&cand.0, &cand.1) else {
                continue;
            };
            let vague = sampler.below(VAGUE_WORDS.len());
            let reserved = Reserved {
                used: &used,
                excluded: &excluded,
                duplicated: &duplicated,
            };
            let Ok(mutation) =
                mutator.mutate_clause(&scratch.corpus, &scratch.analyses, target, kind, &reserved, vague)
            else {
                continue;
            };
            let Ok(next) = apply_edits(&scratch.corpus, &mutation.edits) else {
                continue;
            };
            let next = scratch.advance(next, &detector);

            let mut expected = scratch.hits.clone();
            if let Some(h) = &mutation.intended {
                expected.insert(h.clone());
            }
            if next.hits != expected || mutation.intended.as_ref().is_some_and(|h| scratch.hits.contains(h)) {
                continue;
            }
            for id in &mutation.conflict.clause_ids {
                let doc = &cand.0;
                let doc = next
                    .corpus
                    .position(doc, id)
                    .map(|p| next.corpus.clauses[p].doc_id.clone())
                    .or_else(|| next.corpus.find_all(id).next().map(|(_, c)| c.doc_id.clone()))
                    .unwrap_or_else(|| doc.clone());
                used.insert((doc, id.clone()));
            }
            let mut conflict = mutation.conflict;
            conflict.id = format!("C{:03}", entries.len() + 1);
            entries.push(PlanEntry {
                conflict,
                edits: mutation.edits,
            });
            scratch = next;
            accepted += 1;
        }
        if accepted < requested {
            return Err(InjectError::InsufficientTargets {
                kind,
                requested,
                available: accepted,
            });
        }
    }
    Ok(InjectionPlan {
        seed,
        config: config.clone(),
        entries,
    })
}

/// Replays the plan on `corpus`, returning the mutated corpus and manifest.
/// Only clauses named in the manifest change.
pub fn apply_plan(corpus: &Corpus, plan: &InjectionPlan) -> Result<(Corpus, GroundTruthManifest), InjectError> {
    let mut manifest = GroundTruthManifest::empty(plan.seed, plan.config.clone());
    if plan.entries.is_empty() {
        return Ok((corpus.clone(), manifest));
    }
    let edits: Vec<ClauseEdit> = plan.entries.iter().flat_map(|e| e.edits.iter().cloned()).collect();
    let mutated = apply_edits(corpus, &edits)?;
    manifest.conflicts = plan.entries.iter().map(|e| e.conflict.clone()).collect();
    Ok((mutated, manifest))
}

/// Plans and applies in one step.
pub fn inject(corpus: &Corpus, config: &InjectionConfig, seed: u64) -> Result<(Corpus, GroundTruthManifest), InjectError> {
    let plan = plan_injections(corpus, config, seed)?;
    apply_plan(corpus, &plan)
}

/// Clause ids whose body differs between two corpora, including clauses
/// present in only one of them.
pub fn changed_clauses(before: &Corpus, after: &Corpus) -> BTreeSet<ClauseId> {
    let map = |c: &Corpus| -> BTreeMap<ClauseRef, String> {
        c.clauses.iter().map(|cl| (clause_ref(cl), cl.body.clone())).collect()
    };
    let (a, b) = (map(before), map(after));
    let mut out = BTreeSet::new();
    for (k, v) in &a {
        if b.get(k) != Some(v) {
            out.insert(k.1.clone());
        }
    }
    for k in b.keys() {
        if !a.contains_key(k) {
            out.insert(k.1.clone());
        }
    }
    out
}
