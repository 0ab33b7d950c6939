//! Expert verdicts on findings and the metrics they validate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eval::EvaluationReport;
use crate::finding::Finding;

pub const VERDICT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Confirm,
    Reject,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub finding_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
    pub reviewer: String,
    /// RFC 3339.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdjudicationError {
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("unknown finding {0}")]
    UnknownFinding(String),
    #[error("reviewer must not be empty")]
    EmptyReviewer,
}

/// Checks a verdict refers to one of `findings`.
pub fn check_verdict(findings: &[Finding], v: &Verdict) -> Result<(), AdjudicationError> {
    if v.reviewer.trim().is_empty() {
        return Err(AdjudicationError::EmptyReviewer);
    }
    if findings.iter().any(|f| f.id == v.finding_id) {
        Ok(())
    } else {
        Err(AdjudicationError::UnknownFinding(v.finding_id.clone()))
    }
}

/// Latest decision per finding and reviewer, replaying the log in order.
pub fn current_decisions(log: &[Verdict]) -> BTreeMap<String, BTreeMap<String, Decision>> {
    let mut out: BTreeMap<String, BTreeMap<String, Decision>> = BTreeMap::new();
    for v in log {
        out.entry(v.finding_id.clone())
            .or_default()
            .insert(v.reviewer.clone(), v.decision);
    }
    out
}

/// Strict majority of the reviewers who voted; anything else is uncertain.
/// `None` when nobody voted.
pub fn consensus<'a, I: IntoIterator<Item = &'a Decision>>(votes: I) -> Option<Decision> {
    let mut n = 0;
    let mut confirm = 0;
    let mut reject = 0;
    for d in votes {
        n += 1;
        match d {
            Decision::Confirm => confirm += 1,
            Decision::Reject => reject += 1,
            Decision::Uncertain => {}
        }
    }
    if n == 0 {
        None
    } else if confirm * 2 > n {
        Some(Decision::Confirm)
    } else if reject * 2 > n {
        Some(Decision::Reject)
    } else {
        Some(Decision::Uncertain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedMetrics {
    pub automated: EvaluationReport,
    pub total_findings: usize,
    pub adjudicated: usize,
    pub expert_tp: usize,
    pub expert_fp: usize,
    pub expert_uncertain: usize,
    pub validated_precision: Option<f64>,
    /// Confirmed findings not matched to any planted conflict.
    pub novel_confirmed: Vec<String>,
    pub coverage: f64,
}

/// Pure function of the findings, the automated report and the verdict log.
pub fn validated_metrics(findings: &[Finding], automated: &EvaluationReport, log: &[Verdict]) -> ValidatedMetrics {
    let current = current_decisions(log);
    let matched: BTreeSet<&str> = automated.assignments.iter().map(|a| a.finding_id.as_str()).collect();
    let mut adjudicated = 0;
    let mut expert_tp = 0;
    let mut expert_fp = 0;
    let mut expert_uncertain = 0;
    let mut novel_confirmed = Vec::new();
    for f in findings {
        let Some(c) = current.get(&f.id).and_then(|votes| consensus(votes.values())) else {
            continue;
        };
        adjudicated += 1;
        match c {
            Decision::Confirm => {
                expert_tp += 1;
                if !matched.contains(f.id.as_str()) {
                    novel_confirmed.push(f.id.clone());
                }
            }
            Decision::Reject => expert_fp += 1,
            Decision::Uncertain => expert_uncertain += 1,
        }
    }
    let total = findings.len();
    ValidatedMetrics {
        automated: automated.clone(),
        total_findings: total,
        adjudicated,
        expert_tp,
        expert_fp,
        expert_uncertain,
        validated_precision: (expert_tp + expert_fp > 0).then(|| expert_tp as f64 / (expert_tp + expert_fp) as f64),
        novel_confirmed,
        coverage: if total == 0 { 0.0 } else { adjudicated as f64 / total as f64 },
    }
}
