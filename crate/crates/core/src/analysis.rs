//! Per-clause requirement analysis: numeric constraints with their subjects,
//! modal sentences with polarity, and the interval semantics that decide
//! when two constraints cannot both hold.
//!
//! The injector and the baseline detector share this module, so a conflict
//! planted by the injector is checkable with exactly the semantics the
//! detector applies.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Clause;
use crate::quantity::{scan_quantities, Dimension, QuantityMatch, UnitTolerance};
use crate::text::{alpha_words, content_tokens, find_word_ci, longest_common_run, sentences};

const MODALS: &[&str] = &["shall", "must", "should", "will"];

// Negated forms first; the phrase ending closest to the quantity wins, and
// among equal ends the longer phrase.
const AT_MOST: &[&str] = &[
    "not be more than",
    "not more than",
    "no more than",
    "not be greater than",
    "not greater than",
    "not be steeper than",
    "not steeper than",
    "not exceed",
    "at most",
    "a maximum of",
    "maximum of",
    "up to",
    "less than",
];
const AT_LEAST: &[&str] = &[
    "not be less than",
    "not less than",
    "no less than",
    "not be lower than",
    "at least",
    "a minimum of",
    "minimum of",
    "more than",
    "greater than",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
    Exactly,
}

/// One bounded requirement: `subject` must be `bound` `quantity`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub sentence: (usize, usize),
    pub subject: Vec<String>,
    pub bound: Bound,
    pub quantity: QuantityMatch,
    /// Byte offset in the body where the modal verb starts.
    pub modal_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalSentence {
    pub range: (usize, usize),
    pub negated: bool,
    pub tokens: BTreeSet<String>,
    pub has_quantity: bool,
    /// Byte range of the modal verb.
    pub modal: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClauseAnalysis {
    pub constraints: Vec<Constraint>,
    pub modal_sentences: Vec<ModalSentence>,
    pub quantities: Vec<QuantityMatch>,
}

impl ClauseAnalysis {
    pub fn inconsistent_conversions(&self) -> impl Iterator<Item = &QuantityMatch> {
        self.quantities
            .iter()
            .filter(|m| m.quantity.conversion.as_ref().is_some_and(|c| !c.consistent))
    }
}

fn modal_in(sentence: &str) -> Option<(usize, usize)> {
    alpha_words(sentence)
        .into_iter()
        .find(|(_, w)| MODALS.iter().any(|m| w.eq_ignore_ascii_case(m)))
        .map(|(s, w)| (s, s + w.len()))
}

fn is_negated(sentence: &str, modal_end: usize) -> bool {
    let after = sentence[modal_end..].trim_start();
    let next = after.split(|c: char| !c.is_alphabetic()).next().unwrap_or("");
    next.eq_ignore_ascii_case("not") || next.eq_ignore_ascii_case("never")
}

fn latest_phrase(context: &str, phrases: &[&str]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for p in phrases {
        let mut from = 0;
        while let Some(at) = find_word_ci(context, p, from) {
            let end = at + p.len();
            if best.is_none_or(|(e, l)| end > e || (end == e && p.len() > l)) {
                best = Some((end, p.len()));
            }
            from = at + 1;
        }
    }
    best
}

fn bound_from_context(context: &str, subject_raw: &str) -> Bound {
    let most = latest_phrase(context, AT_MOST);
    let least = latest_phrase(context, AT_LEAST);
    match (most, least) {
        (Some(a), Some(b)) => {
            if (a.0, a.1) >= (b.0, b.1) {
                Bound::AtMost
            } else {
                Bound::AtLeast
            }
        }
        (Some(_), None) => Bound::AtMost,
        (None, Some(_)) => Bound::AtLeast,
        (None, None) => {
            if find_word_ci(subject_raw, "maximum", 0).is_some() {
                Bound::AtMost
            } else if find_word_ci(subject_raw, "minimum", 0).is_some() {
                Bound::AtLeast
            } else {
                Bound::Exactly
            }
        }
    }
}

pub fn analyze_clause(clause: &Clause, tolerance: &UnitTolerance) -> ClauseAnalysis {
    analyze_text(&clause.body, tolerance)
}

pub fn analyze_text(body: &str, tolerance: &UnitTolerance) -> ClauseAnalysis {
    let quantities = scan_quantities(body, tolerance);
    let mut constraints = Vec::new();
    let mut modal_sentences = Vec::new();
    for (s, e) in sentences(body) {
        let sentence = &body[s..e];
        let Some((ms, me)) = modal_in(sentence) else {
            continue;
        };
        let in_sentence: Vec<&QuantityMatch> =
            quantities.iter().filter(|q| q.start >= s && q.end <= e).collect();
        modal_sentences.push(ModalSentence {
            range: (s, e),
            negated: is_negated(sentence, me),
            tokens: content_tokens(sentence).into_iter().collect(),
            has_quantity: !in_sentence.is_empty(),
            modal: (s + ms, s + me),
        });
        let subject_raw = &sentence[..ms];
        let subject = content_tokens(subject_raw);
        if subject.is_empty() {
            continue;
        }
        let mut ctx_start = s + me;
        for q in in_sentence {
            if q.start < ctx_start {
                continue;
            }
            let bound = bound_from_context(&body[ctx_start..q.start], subject_raw);
            ctx_start = q.end;
            if q.quantity.dimension == Dimension::Count && bound == Bound::Exactly {
                continue;
            }
            constraints.push(Constraint {
                sentence: (s, e),
                subject: subject.clone(),
                bound,
                quantity: q.clone(),
                modal_start: s + ms,
            });
        }
    }
    ClauseAnalysis {
        constraints,
        modal_sentences,
        quantities,
    }
}

/// Length of the shared subject phrase, or 0 when the subjects are not the
/// same. Subjects match when their longest common token run covers at least
/// two tokens and three quarters of the shorter subject.
pub fn shared_subject(a: &[String], b: &[String]) -> usize {
    let (run, _) = longest_common_run(a, b);
    let shorter = a.len().min(b.len());
    let needed = (3 * shorter).div_ceil(4).max(2);
    if run >= needed {
        run
    } else {
        0
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// True when no single value satisfies both constraints. Different
/// dimensions never conflict.
pub fn incompatible(a: &Constraint, b: &Constraint, tolerance: &UnitTolerance) -> bool {
    let (qa, qb) = (&a.quantity.quantity, &b.quantity.quantity);
    if qa.dimension != qb.dimension {
        return false;
    }
    let (x, y) = (qa.magnitude, qb.magnitude);
    let gt = |p: f64, q: f64| p > q && !close(p, q);
    match (a.bound, b.bound) {
        (Bound::AtMost, Bound::AtLeast) => gt(y, x),
        (Bound::AtLeast, Bound::AtMost) => gt(x, y),
        (Bound::Exactly, Bound::AtMost) => gt(x, y),
        (Bound::AtMost, Bound::Exactly) => gt(y, x),
        (Bound::Exactly, Bound::AtLeast) => gt(y, x),
        (Bound::AtLeast, Bound::Exactly) => gt(x, y),
        (Bound::Exactly, Bound::Exactly) => {
            let allowance = if qa.dimension == Dimension::Length {
                tolerance.allowance(x.abs().max(y.abs()))
            } else {
                0.0
            };
            (x - y).abs() > allowance && !close(x, y)
        }
        (Bound::AtMost, Bound::AtMost) | (Bound::AtLeast, Bound::AtLeast) => false,
    }
}

/// Jaccard similarity of two token sets; 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub const PARAPHRASE_SIMILARITY: f64 = 0.8;
pub const MIN_PARAPHRASE_TOKENS: usize = 3;

/// Two quantity-free modal sentences that say the same thing with opposite
/// polarity.
pub fn modality_flipped(a: &ModalSentence, b: &ModalSentence) -> bool {
    !a.has_quantity
        && !b.has_quantity
        && a.negated != b.negated
        && a.tokens.len() >= MIN_PARAPHRASE_TOKENS
        && b.tokens.len() >= MIN_PARAPHRASE_TOKENS
        && jaccard(&a.tokens, &b.tokens) >= PARAPHRASE_SIMILARITY
}

/// Canonical term and the variant spelling that signals inconsistent use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSwap {
    pub term: String,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermDictionary(pub Vec<TermSwap>);

impl Default for TermDictionary {
    fn default() -> Self {
        Self::from_pairs(&[
            ("curb", "kerb"),
            ("storey", "story"),
            ("handrail", "banister"),
            ("gutter", "drain channel"),
            ("pavement", "sidewalk"),
            ("wheelchair", "mobility chair"),
        ])
    }
}

impl TermDictionary {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self(
            pairs
                .iter()
                .map(|(t, v)| TermSwap {
                    term: String::from(*t),
                    variant: String::from(*v),
                })
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &TermSwap> {
        self.0.iter()
    }
}

pub fn mentions(text: &str, term: &str) -> bool {
    find_word_ci(text, term, 0).is_some()
}

/// Index of the clause nearest to `from` (excluding itself) whose body
/// mentions `term`; earlier clauses win ties.
pub fn nearest_mentioning<'a, I>(bodies: I, from: usize, term: &str) -> Option<usize>
where
    I: IntoIterator<Item = &'a str>,
{
    bodies
        .into_iter()
        .enumerate()
        .filter(|&(i, b)| i != from && mentions(b, term))
        .min_by_key(|&(i, _)| (i.abs_diff(from), i))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(body: &str) -> ClauseAnalysis {
        analyze_text(body, &UnitTolerance::default())
    }

    #[test]
    fn bounds_from_phrases() {
        let a = one("Maximum slopes of adjoining gutters shall not exceed 1:20.");
        assert_eq!(a.constraints.len(), 1);
        let c = &a.constraints[0];
        assert_eq!(c.bound, Bound::AtMost);
        assert_eq!(c.subject, ["slope", "adjoining", "gutter"]);
        let b = one("Maximum slopes of adjoining gutters shall be at least 1:12.");
        assert_eq!(b.constraints[0].bound, Bound::AtLeast);
        assert!(incompatible(c, &b.constraints[0], &UnitTolerance::default()));
        let n = one("The width shall be not less than 900 mm.");
        assert_eq!(n.constraints[0].bound, Bound::AtLeast);
        let m = one("The rise shall be not more than 170 mm.");
        assert_eq!(m.constraints[0].bound, Bound::AtMost);
    }

    #[test]
    fn exact_values_and_counts() {
        let a = one("The lower end of each curb ramp shall have a 0.5-inch (13mm) lip bevelled at 45 degrees.");
        assert_eq!(a.constraints.len(), 2);
        assert!(a.constraints.iter().all(|c| c.bound == Bound::Exactly));
        let a = one("Each stair shall have at least 2 handrails.");
        assert_eq!(a.constraints.len(), 1);
        let a = one("See Figure 11 which shall apply.");
        assert!(a.constraints.is_empty());
    }

    #[test]
    fn interval_semantics() {
        let tol = UnitTolerance::default();
        let c = |s: &str| one(s).constraints.remove(0);
        let max20 = c("The slope shall not exceed 1:20.");
        let max12 = c("The slope shall not exceed 1:12.");
        let min12 = c("The slope shall be at least 1:12.");
        let min30 = c("The slope shall be at least 1:30.");
        assert!(!incompatible(&max20, &max12, &tol));
        assert!(incompatible(&max20, &min12, &tol));
        assert!(!incompatible(&max20, &min30, &tol));
        let e13 = c("The lip shall be 13 mm.");
        let e127 = c("The lip shall be 0.5 inch.");
        let e25 = c("The lip shall be 25 mm.");
        assert!(!incompatible(&e13, &e127, &tol));
        assert!(incompatible(&e13, &e25, &tol));
        let angle = c("The bevel shall be 45 degrees.");
        assert!(!incompatible(&angle, &e25, &tol));
    }

    #[test]
    fn subject_matching() {
        let t = |s: &str| content_tokens(s);
        assert!(shared_subject(&t("clear width of corridor"), &t("clear width of corridor")) > 0);
        assert_eq!(shared_subject(&t("clear width of corridor"), &t("clear width of doorway")), 0);
        assert_eq!(shared_subject(&t("width of corridor"), &t("width of doorway")), 0);
        assert_eq!(shared_subject(&t("width of lift car"), &t("height of lift car")), 0);
    }

    #[test]
    fn modality_pairs() {
        let a = one("Transitions from ramps to walks shall be flush and free of abrupt changes.");
        let b = one("In every case, transitions from ramps to walks shall not be flush and free of abrupt changes.");
        assert!(!a.modal_sentences[0].negated);
        assert!(b.modal_sentences[0].negated);
        assert!(modality_flipped(&a.modal_sentences[0], &b.modal_sentences[0]));
        let c = one("Corridors shall be kept free of obstructions.");
        assert!(!modality_flipped(&a.modal_sentences[0], &c.modal_sentences[0]));
    }

    #[test]
    fn nearest_term_mention() {
        let bodies = ["curb ramp", "nothing", "the curb", "x", "curb"];
        assert_eq!(nearest_mentioning(bodies, 3, "curb"), Some(2));
        assert_eq!(nearest_mentioning(bodies, 1, "curb"), Some(0));
        assert_eq!(nearest_mentioning(bodies, 0, "kerb"), None);
    }
}
