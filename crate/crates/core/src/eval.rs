//! Scoring findings against a ground-truth manifest.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clause_id::ClauseId;
use crate::finding::{deduplicate_findings, ConflictKind, Finding};
use crate::injector::{GroundTruthManifest, InjectedConflict};

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Clause sets equal.
    Strict,
    /// At least half of the conflict's clauses named.
    #[default]
    Majority,
    /// Any shared clause.
    Overlap,
}

impl MatchMode {
    pub const ALL: [MatchMode; 3] = [MatchMode::Strict, MatchMode::Majority, MatchMode::Overlap];

    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Strict => "strict",
            MatchMode::Majority => "majority",
            MatchMode::Overlap => "overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown match policy {0:?} (expected strict, majority or overlap)")]
pub struct UnknownPolicy(pub String);

impl FromStr for MatchMode {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownPolicy(String::from(s)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub mode: MatchMode,
    #[serde(default)]
    pub kind_must_match: bool,
}

impl MatchPolicy {
    pub fn new(mode: MatchMode) -> Self {
        Self {
            mode,
            kind_must_match: false,
        }
    }

    /// Whether a finding may be credited with a conflict.
    pub fn accepts(&self, ids: &[ClauseId], kind: ConflictKind, conflict: &InjectedConflict) -> bool {
        if self.kind_must_match && kind != conflict.kind {
            return false;
        }
        let pred: BTreeSet<&ClauseId> = ids.iter().collect();
        let gt: BTreeSet<&ClauseId> = conflict.clause_ids.iter().collect();
        let inter = pred.intersection(&gt).count();
        match self.mode {
            MatchMode::Strict => pred == gt,
            MatchMode::Majority => !gt.is_empty() && inter >= gt.len().div_ceil(2),
            MatchMode::Overlap => inter > 0,
        }
    }
}

fn jaccard_ids(a: &[ClauseId], b: &[ClauseId]) -> f64 {
    let a: BTreeSet<&ClauseId> = a.iter().collect();
    let b: BTreeSet<&ClauseId> = b.iter().collect();
    crate::analysis::jaccard(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub finding_id: String,
    pub conflict_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchOutcome {
    /// Ordered by conflict id.
    pub assignments: Vec<Assignment>,
    pub unmatched_findings: Vec<String>,
    pub unmatched_conflicts: Vec<String>,
}

/// One-to-one assignment. Candidate pairs are taken greedily by descending
/// clause-set Jaccard similarity, ties by (conflict id, finding id); any
/// remaining augmenting paths are then applied, so the number of matches is
/// maximal for the policy.
pub fn match_findings(findings: &[Finding], conflicts: &[InjectedConflict], policy: &MatchPolicy) -> MatchOutcome {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in conflicts.iter().enumerate() {
        for (fi, f) in findings.iter().enumerate() {
            if policy.accepts(&f.clause_ids, f.kind, c) {
                cands.push((jaccard_ids(&f.clause_ids, &c.clause_ids), ci, fi));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| conflicts[a.1].id.cmp(&conflicts[b.1].id))
            .then_with(|| findings[a.2].id.cmp(&findings[b.2].id))
            .then_with(|| a.1.cmp(&b.1).then(a.2.cmp(&b.2)))
    });
    let mut of_conflict: Vec<Option<usize>> = vec![None; conflicts.len()];
    let mut of_finding: Vec<Option<usize>> = vec![None; findings.len()];
    for &(_, ci, fi) in &cands {
        if of_conflict[ci].is_none() && of_finding[fi].is_none() {
            of_conflict[ci] = Some(fi);
            of_finding[fi] = Some(ci);
        }
    }

    // adjacency in candidate order keeps augmentation deterministic
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); findings.len()];
    for &(_, ci, fi) in &cands {
        adj[fi].push(ci);
    }
    let mut order: Vec<usize> = (0..findings.len()).collect();
    order.sort_by(|&a, &b| findings[a].id.cmp(&findings[b].id).then(a.cmp(&b)));
    for &fi in &order {
        if of_finding[fi].is_some() || adj[fi].is_empty() {
            continue;
        }
        let mut seen = vec![false; conflicts.len()];
        augment(fi, &adj, &mut seen, &mut of_conflict, &mut of_finding);
    }

    let mut assignments: Vec<Assignment> = of_conflict
        .iter()
        .enumerate()
        .filter_map(|(ci, m)| {
            m.map(|fi| Assignment {
                finding_id: findings[fi].id.clone(),
                conflict_id: conflicts[ci].id.clone(),
            })
        })
        .collect();
    assignments.sort_by(|a, b| a.conflict_id.cmp(&b.conflict_id).then_with(|| a.finding_id.cmp(&b.finding_id)));
    MatchOutcome {
        assignments,
        unmatched_findings: findings
            .iter()
            .zip(&of_finding)
            .filter(|(_, m)| m.is_none())
            .map(|(f, _)| f.id.clone())
            .collect(),
        unmatched_conflicts: conflicts
            .iter()
            .zip(&of_conflict)
            .filter(|(_, m)| m.is_none())
            .map(|(c, _)| c.id.clone())
            .collect(),
    }
}

fn augment(
    fi: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    of_conflict: &mut [Option<usize>],
    of_finding: &mut [Option<usize>],
) -> bool {
    for &ci in &adj[fi] {
        if seen[ci] {
            continue;
        }
        seen[ci] = true;
        let free = match of_conflict[ci] {
            None => true,
            Some(other) => augment(other, adj, seen, of_conflict, of_finding),
        };
        if free {
            of_conflict[ci] = Some(fi);
            of_finding[fi] = Some(ci);
            return true;
        }
    }
    false
}

/// Precision and recall are `None` when their denominator is zero; f1 is 0
/// unless both are defined and positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
}

pub fn compute_metrics(tp: usize, fp: usize, fn_: usize) -> Metrics {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        // 2pr/(p+r) in counts, which avoids rounding in the products
        (Some(p), Some(r)) if p + r > 0.0 => (2 * tp) as f64 / (2 * tp + fp + fn_) as f64,
        _ => 0.0,
    };
    Metrics { precision, recall, f1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
}

impl KindMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let m = compute_metrics(tp, fp, fn_);
        Self {
            tp,
            fp,
            fn_,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingSummary {
    pub id: String,
    pub kind: ConflictKind,
    pub clause_ids: Vec<ClauseId>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictSummary {
    pub id: String,
    pub kind: ConflictKind,
    pub clause_ids: Vec<ClauseId>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: String,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub prompt_hash: Option<String>,
    pub policy: MatchPolicy,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
    pub kind_agreement_rate: Option<f64>,
    pub assignments: Vec<Assignment>,
    pub per_kind: BTreeMap<ConflictKind, KindMetrics>,
    pub false_positives: Vec<FindingSummary>,
    pub false_negatives: Vec<ConflictSummary>,
}

/// Deduplicates `findings`, matches them and tallies the report.
pub fn evaluate(findings: &[Finding], manifest: &GroundTruthManifest, policy: &MatchPolicy) -> EvaluationReport {
    let mut findings = deduplicate_findings(findings.to_vec());
    let distinct: BTreeSet<&str> = findings.iter().map(|f| f.id.as_str()).collect();
    if distinct.len() != findings.len() {
        crate::finding::assign_ids(&mut findings);
    }
    let conflicts = &manifest.conflicts;
    let outcome = match_findings(&findings, conflicts, policy);
    let by_fid: BTreeMap<&str, &Finding> = findings.iter().map(|f| (f.id.as_str(), f)).collect();
    let by_cid: BTreeMap<&str, &InjectedConflict> = conflicts.iter().map(|c| (c.id.as_str(), c)).collect();

    let tp = outcome.assignments.len();
    let fp = findings.len() - tp;
    let fn_ = conflicts.len() - tp;
    let m = compute_metrics(tp, fp, fn_);

    let mut counts: BTreeMap<ConflictKind, (usize, usize, usize)> =
        ConflictKind::ALL.iter().map(|&k| (k, (0, 0, 0))).collect();
    let mut agree = 0;
    for a in &outcome.assignments {
        let c = by_cid[a.conflict_id.as_str()];
        let f = by_fid[a.finding_id.as_str()];
        if let Some(e) = counts.get_mut(&c.kind) {
            e.0 += 1;
        }
        if f.kind == c.kind {
            agree += 1;
        }
    }
    let matched_f: BTreeSet<&str> = outcome.assignments.iter().map(|a| a.finding_id.as_str()).collect();
    let matched_c: BTreeSet<&str> = outcome.assignments.iter().map(|a| a.conflict_id.as_str()).collect();
    let false_positives: Vec<FindingSummary> = outcome
        .unmatched_findings
        .iter()
        .filter_map(|id| by_fid.get(id.as_str()))
        .map(|f| FindingSummary {
            id: f.id.clone(),
            kind: f.kind,
            clause_ids: f.clause_ids.clone(),
            rationale: f.rationale.clone(),
        })
        .collect();
    let false_negatives: Vec<ConflictSummary> = outcome
        .unmatched_conflicts
        .iter()
        .filter_map(|id| by_cid.get(id.as_str()))
        .map(|c| ConflictSummary {
            id: c.id.clone(),
            kind: c.kind,
            clause_ids: c.clause_ids.clone(),
            description: c.description.clone(),
        })
        .collect();
    for f in &findings {
        if !matched_f.contains(f.id.as_str()) {
            if let Some(e) = counts.get_mut(&f.kind) {
                e.1 += 1;
            }
        }
    }
    for c in conflicts {
        if !matched_c.contains(c.id.as_str()) {
            if let Some(e) = counts.get_mut(&c.kind) {
                e.2 += 1;
            }
        }
    }

    EvaluationReport {
        schema_version: String::from(REPORT_SCHEMA_VERSION),
        run_id: None,
        backend: None,
        prompt_hash: None,
        policy: *policy,
        tp,
        fp,
        fn_,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        kind_agreement_rate: (tp > 0).then(|| agree as f64 / tp as f64),
        assignments: outcome.assignments,
        per_kind: counts
            .into_iter()
            .map(|(k, (tp, fp, fn_))| (k, KindMetrics::from_counts(tp, fp, fn_)))
            .collect(),
        false_positives,
        false_negatives,
    }
}

/// Three decimals, or `undefined`.
pub fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => String::from("undefined"),
    }
}

fn join_ids(ids: &[ClauseId]) -> String {
    let parts: Vec<&str> = ids.iter().map(ClauseId::as_str).collect();
    parts.join(", ")
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn render_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).unwrap_or_default();
    s.push('\n');
    s
}

pub fn parse_report(json: &str) -> Result<EvaluationReport, serde_json::Error> {
    serde_json::from_str(json)
}

pub fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report");
    let _ = writeln!(out);
    if let Some(id) = &report.run_id {
        let _ = writeln!(out, "- Run: `{id}`");
    }
    let _ = writeln!(
        out,
        "- Policy: {} (kind must match: {})",
        report.policy.mode.as_str(),
        if report.policy.kind_must_match { "yes" } else { "no" }
    );
    if let Some(b) = &report.backend {
        let _ = writeln!(out, "- Backend: {b}");
    }
    if let Some(h) = &report.prompt_hash {
        let _ = writeln!(out, "- Prompt hash: `{h}`");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "## Overall");
    let _ = writeln!(out);
    let _ = writeln!(out, "| tp | fp | fn | precision | recall | f1 |");
    let _ = writeln!(out, "|---:|---:|---:|---:|---:|---:|");
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} | {:.3} |",
        report.tp,
        report.fp,
        report.fn_,
        fmt_metric(report.precision),
        fmt_metric(report.recall),
        report.f1
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "Kind agreement among matches: {}", fmt_metric(report.kind_agreement_rate));
    let _ = writeln!(out);
    let _ = writeln!(out, "## Per kind");
    let _ = writeln!(out);
    let _ = writeln!(out, "| kind | tp | fp | fn | precision | recall | f1 |");
    let _ = writeln!(out, "|---|---:|---:|---:|---:|---:|---:|");
    for (k, m) in &report.per_kind {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {:.3} |",
            k,
            m.tp,
            m.fp,
            m.fn_,
            fmt_metric(m.precision),
            fmt_metric(m.recall),
            m.f1
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "## False positives");
    let _ = writeln!(out);
    if report.false_positives.is_empty() {
        let _ = writeln!(out, "None.");
    }
    for f in &report.false_positives {
        let _ = writeln!(out, "- {} ({}) [{}]: {}", f.id, f.kind, join_ids(&f.clause_ids), one_line(&f.rationale));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "## False negatives");
    let _ = writeln!(out);
    if report.false_negatives.is_empty() {
        let _ = writeln!(out, "None.");
    }
    for c in &report.false_negatives {
        let _ = writeln!(out, "- {} ({}) [{}]: {}", c.id, c.kind, join_ids(&c.clause_ids), one_line(&c.description));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injector::InjectionConfig;

    fn conflict(id: &str, kind: ConflictKind, ids: &[&str]) -> InjectedConflict {
        InjectedConflict {
            id: id.into(),
            kind,
            clause_ids: ids.iter().map(|s| ClauseId::from(*s)).collect(),
            original_texts: BTreeMap::new(),
            mutated_texts: BTreeMap::new(),
            description: String::new(),
        }
    }

    fn finding(id: &str, kind: ConflictKind, ids: &[&str]) -> Finding {
        Finding {
            id: id.into(),
            kind,
            clause_ids: ids.iter().map(|s| ClauseId::from(*s)).collect(),
            rationale: String::new(),
            quotes: vec![],
            confidence: 0.5,
            provenance: vec![],
            unverifiable: false,
        }
    }

    fn manifest(conflicts: Vec<InjectedConflict>) -> GroundTruthManifest {
        let mut m = GroundTruthManifest::empty(0, InjectionConfig::default());
        m.conflicts = conflicts;
        m
    }

    const N: ConflictKind = ConflictKind::NumericContradiction;

    #[test]
    fn metric_oracles() {
        let m = compute_metrics(8, 2, 2);
        assert_eq!((m.precision, m.recall, m.f1), (Some(0.8), Some(0.8), 0.8));
        assert_eq!(compute_metrics(5, 0, 0), Metrics { precision: Some(1.0), recall: Some(1.0), f1: 1.0 });
        assert_eq!(compute_metrics(0, 0, 5), Metrics { precision: None, recall: Some(0.0), f1: 0.0 });
    }

    #[test]
    fn partial_pair_majority_vs_strict() {
        let man = manifest(vec![conflict("C001", N, &["1.1", "1.2"])]);
        let f = [finding("F0001", N, &["1.1"])];
        let r = evaluate(&f, &man, &MatchPolicy::new(MatchMode::Majority));
        assert_eq!((r.tp, r.fp, r.fn_), (1, 0, 0));
        let r = evaluate(&f, &man, &MatchPolicy::new(MatchMode::Strict));
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    }

    #[test]
    fn two_findings_one_conflict() {
        let man = manifest(vec![conflict("C001", N, &["1.1", "1.2"])]);
        let f = [finding("F0001", N, &["1.1", "1.3"]), finding("F0002", N, &["1.1", "1.2"])];
        let r = evaluate(&f, &man, &MatchPolicy::new(MatchMode::Overlap));
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
        assert_eq!(r.assignments[0].finding_id, "F0002");
    }

    #[test]
    fn augmentation_beats_plain_greedy() {
        // greedy would give C001 to F0001 (jaccard 1) and strand C002
        let man = manifest(vec![conflict("C001", N, &["1.1", "1.2"]), conflict("C002", N, &["1.1", "1.3"])]);
        let f = [finding("F0001", N, &["1.1", "1.2"]), finding("F0002", N, &["1.2", "1.4"])];
        let r = evaluate(&f, &man, &MatchPolicy::new(MatchMode::Overlap));
        assert_eq!(r.tp, 2);
    }

    #[test]
    fn kind_must_match() {
        let man = manifest(vec![conflict("C001", N, &["1.1", "1.2"])]);
        let f = [finding("F0001", ConflictKind::Ambiguity, &["1.1", "1.2"])];
        let mut p = MatchPolicy::new(MatchMode::Strict);
        assert_eq!(evaluate(&f, &man, &p).tp, 1);
        assert_eq!(evaluate(&f, &man, &p).kind_agreement_rate, Some(0.0));
        p.kind_must_match = true;
        assert_eq!(evaluate(&f, &man, &p).tp, 0);
    }

    #[test]
    fn empty_report_renders_undefined() {
        let r = evaluate(&[], &manifest(vec![]), &MatchPolicy::default());
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 0));
        let md = render_markdown(&r);
        assert!(md.contains("| 0 | 0 | 0 | undefined | undefined | 0.000 |"));
    }

    #[test]
    fn markdown_and_json() {
        let conflicts: Vec<_> = (1..=10).map(|i| conflict(&format!("C{i:03}"), N, &[&format!("{i}.1")])).collect();
        let mut findings: Vec<_> = (1..=8).map(|i| finding(&format!("F{i:04}"), N, &[&format!("{i}.1")])).collect();
        findings.push(finding("F0009", N, &["50.1"]));
        findings.push(finding("F0010", N, &["51.1"]));
        let r = evaluate(&findings, &manifest(conflicts), &MatchPolicy::default());
        assert_eq!((r.tp, r.fp, r.fn_), (8, 2, 2));
        let md = render_markdown(&r);
        let row = md.lines().find(|l| l.starts_with("| 8 |")).unwrap();
        assert_eq!(row.matches("0.800").count(), 3);
        assert_eq!(parse_report(&render_json(&r)).unwrap(), r);
    }
}
