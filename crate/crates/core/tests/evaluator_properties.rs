use std::collections::BTreeMap;

use proptest::prelude::*;
use regconflict_core::eval::{compute_metrics, evaluate, match_findings, MatchMode, MatchPolicy};
use regconflict_core::finding::{deduplicate_findings, ConflictKind, Finding};
use regconflict_core::injector::{GroundTruthManifest, InjectedConflict, InjectionConfig};
use regconflict_core::ClauseId;

const KINDS: [ConflictKind; 3] = [
    ConflictKind::NumericContradiction,
    ConflictKind::ModalityFlip,
    ConflictKind::Ambiguity,
];

fn ids(mask: u8) -> Vec<ClauseId> {
    (0..6).filter(|b| mask & (1 << b) != 0).map(|b| ClauseId::from(format!("1.{}", b + 1))).collect()
}

fn finding(i: usize, mask: u8, kind: usize) -> Finding {
    Finding {
        id: format!("F{:04}", i + 1),
        kind: KINDS[kind],
        clause_ids: ids(mask),
        rationale: String::new(),
        quotes: vec![],
        confidence: 0.5,
        provenance: vec![],
        unverifiable: false,
    }
}

fn conflict(i: usize, mask: u8, kind: usize) -> InjectedConflict {
    InjectedConflict {
        id: format!("C{:03}", i + 1),
        kind: KINDS[kind],
        clause_ids: ids(mask),
        original_texts: BTreeMap::new(),
        mutated_texts: BTreeMap::new(),
        description: String::new(),
    }
}

fn instance() -> impl Strategy<Value = (Vec<Finding>, GroundTruthManifest)> {
    let item = (1u8..64, 0usize..3);
    (prop::collection::vec(item.clone(), 0..=8), prop::collection::vec(item, 0..=8)).prop_map(|(fs, cs)| {
        // distinct keys, as after deduplication
        let fs: Vec<Finding> = fs.into_iter().enumerate().map(|(i, (m, k))| finding(i, m, k)).collect();
        let mut fs = deduplicate_findings(fs);
        fs.sort_by(|a, b| a.id.cmp(&b.id));
        let mut m = GroundTruthManifest::empty(0, InjectionConfig::default());
        m.conflicts = cs.into_iter().enumerate().map(|(i, (mask, k))| conflict(i, mask, k)).collect();
        (fs, m)
    })
}

/// Maximum one-to-one matching size by exhaustive DP over conflict subsets.
fn brute_force(findings: &[Finding], m: &GroundTruthManifest, policy: &MatchPolicy) -> usize {
    let c = m.conflicts.len();
    let mut best = vec![0usize; 1 << c];
    for f in findings {
        let mut next = best.clone();
        for mask in 0..(1usize << c) {
            for (j, conflict) in m.conflicts.iter().enumerate() {
                if mask & (1 << j) == 0 && policy.accepts(&f.clause_ids, f.kind, conflict) {
                    let nm = mask | (1 << j);
                    next[nm] = next[nm].max(best[mask] + 1);
                }
            }
        }
        for (n, b) in next.iter_mut().zip(&best) {
            *n = (*n).max(*b);
        }
        best = next;
    }
    best.into_iter().max().unwrap_or(0)
}

fn policies() -> Vec<MatchPolicy> {
    MatchMode::ALL
        .into_iter()
        .flat_map(|mode| [false, true].map(|k| MatchPolicy { mode, kind_must_match: k }))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn conservation((fs, m) in instance()) {
        for p in policies() {
            let r = evaluate(&fs, &m, &p);
            prop_assert_eq!(r.tp + r.fn_, m.conflicts.len());
            prop_assert_eq!(r.tp + r.fp, fs.len());
            let mut seen_f = std::collections::BTreeSet::new();
            let mut seen_c = std::collections::BTreeSet::new();
            for a in &r.assignments {
                prop_assert!(seen_f.insert(a.finding_id.clone()));
                prop_assert!(seen_c.insert(a.conflict_id.clone()));
            }
        }
    }

    #[test]
    fn matches_brute_force_maximum((fs, m) in instance()) {
        for p in policies() {
            let got = match_findings(&fs, &m.conflicts, &p).assignments.len();
            prop_assert_eq!(got, brute_force(&fs, &m, &p));
        }
    }

    #[test]
    fn policy_ordering((fs, m) in instance()) {
        for k in [false, true] {
            let tp = |mode| evaluate(&fs, &m, &MatchPolicy { mode, kind_must_match: k }).tp;
            prop_assert!(tp(MatchMode::Strict) <= tp(MatchMode::Majority));
            prop_assert!(tp(MatchMode::Majority) <= tp(MatchMode::Overlap));
        }
    }

    #[test]
    fn unmatched_finding_lowers_precision((fs, m) in instance()) {
        let p = MatchPolicy::default();
        let before = evaluate(&fs, &m, &p);
        let mut more = fs.clone();
        let mut extra = finding(90, 1, 0);
        extra.clause_ids = vec![ClauseId::from("99.1")];
        more.push(extra);
        let after = evaluate(&more, &m, &p);
        prop_assert_eq!(after.recall, before.recall);
        prop_assert_eq!(after.tp, before.tp);
        if let (Some(a), Some(b)) = (after.precision, before.precision) {
            prop_assert!(a < b || (a == 0.0 && b == 0.0));
        }
    }

    #[test]
    fn f1_between_precision_and_recall(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let m = compute_metrics(tp, fp, fn_);
        for v in [m.precision, m.recall].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if let (Some(p), Some(r)) = (m.precision, m.recall) {
            prop_assert!(m.f1 >= p.min(r) - 1e-12 && m.f1 <= p.max(r) + 1e-12);
        }
    }
}
