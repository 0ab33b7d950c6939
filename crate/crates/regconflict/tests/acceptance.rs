//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{fixture, ingest, ok, s};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use regconflict::io::{ingest_path, read_corpus, read_findings, read_json, write_json, FindingsFile};
use regconflict::store::{RunMeta, RunStore};
use regconflict_core::adjudication::{Decision, Verdict};
use regconflict_core::chunk::{chunk_corpus, estimate_tokens, ChunkConfig};
use regconflict_core::corpus::load_corpus;
use regconflict_core::eval::{compute_metrics, evaluate, fmt_metric, match_findings, EvaluationReport, MatchMode, MatchPolicy};
use regconflict_core::finding::{deduplicate_findings, ConflictKind, Finding};
use regconflict_core::injector::{changed_clauses, GroundTruthManifest, InjectedConflict, InjectionConfig};
use regconflict_core::quantity::{parse_quantity, Dimension};
use regconflict_core::ClauseId;

type Check = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn inject_run(corpus: &Path, config: &str, out: &Path) -> Duration {
    timed(|| {
        ok(&[
            "inject",
            "--corpus",
            s(corpus),
            "--config",
            s(&fixture(config)),
            "--seed",
            "42",
            "--out",
            s(out),
        ])
    })
    .1
}

fn injection_reproducibility() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ta = inject_run(&corpus, "inject_20.json", &a);
    let tb = inject_run(&corpus, "inject_20.json", &b);
    for f in ["corpus.jsonl", "manifest.json"] {
        check!(fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let source = read_corpus(&corpus).unwrap();
    check!(source.len() == 200, "fixture has {} clauses", source.len());
    let mutated = read_corpus(&a.join("corpus.jsonl")).unwrap();
    let manifest: GroundTruthManifest = read_json(&a.join("manifest.json")).unwrap();
    let listed: BTreeSet<ClauseId> = manifest.conflicts.iter().flat_map(|c| c.clause_ids.clone()).collect();
    let changed = changed_clauses(&source, &mutated);
    check!(changed.is_subset(&listed), "changed clauses outside the manifest: {:?}", changed.difference(&listed).collect::<Vec<_>>());
    let rewritten: BTreeSet<ClauseId> = manifest
        .conflicts
        .iter()
        .flat_map(|c| c.clause_ids.iter().filter(|id| c.original_texts[*id] != c.mutated_texts[*id]).cloned())
        .collect();
    check!(changed == rewritten, "diff does not match the recorded mutations");
    let slowest = ta.max(tb);
    check!(slowest < Duration::from_secs(1), "inject took {slowest:?}");
    Ok(format!(
        "{} conflicts, {} clauses changed, identical bytes, slowest inject {:.0} ms",
        manifest.len(),
        changed.len(),
        slowest.as_secs_f64() * 1e3
    ))
}

fn baseline_oracle() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest(tmp.path());
    let run = tmp.path().join("run");
    let (_, took) = timed(|| {
        inject_run(&corpus, "inject_20.json", &run);
        ok(&["detect", "--corpus", s(&run.join("corpus.jsonl")), "--backend", "baseline"]);
        ok(&[
            "evaluate",
            "--findings",
            s(&run.join("findings.json")),
            "--manifest",
            s(&run.join("manifest.json")),
            "--policy",
            "majority",
        ]);
    });
    let manifest: GroundTruthManifest = read_json(&run.join("manifest.json")).unwrap();
    let kinds: BTreeSet<ConflictKind> = manifest.conflicts.iter().map(|c| c.kind).collect();
    check!(manifest.len() == 20, "{} conflicts planted", manifest.len());
    check!(!kinds.contains(&ConflictKind::Ambiguity) && kinds.len() == 5, "kinds planted: {kinds:?}");
    let r: EvaluationReport = read_json(&run.join("report.json")).unwrap();
    check!(
        r.precision == Some(1.0) && r.recall == Some(1.0),
        "tp {} fp {} fn {}: precision {} recall {}",
        r.tp,
        r.fp,
        r.fn_,
        fmt_metric(r.precision),
        fmt_metric(r.recall)
    );
    check!(took < Duration::from_secs(5), "pipeline took {took:?}");
    Ok(format!(
        "tp {} fp {} fn {}, precision {} recall {}, {:.0} ms",
        r.tp,
        r.fp,
        r.fn_,
        fmt_metric(r.precision),
        fmt_metric(r.recall),
        took.as_secs_f64() * 1e3
    ))
}

fn mock_end_to_end() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest(tmp.path());
    let run = tmp.path().join("run");
    inject_run(&corpus, "inject_10.toml", &run);
    ok(&[
        "detect",
        "--corpus",
        s(&run.join("corpus.jsonl")),
        "--backend",
        "mock",
        "--transcript",
        s(&fixture("mock_8_2_2.json")),
    ]);
    ok(&[
        "evaluate",
        "--findings",
        s(&run.join("findings.json")),
        "--manifest",
        s(&run.join("manifest.json")),
        "--policy",
        "majority",
    ]);
    let r: EvaluationReport = read_json(&run.join("report.json")).unwrap();
    check!((r.tp, r.fp, r.fn_) == (8, 2, 2), "tp {} fp {} fn {}", r.tp, r.fp, r.fn_);
    for (name, v) in [("precision", r.precision), ("recall", r.recall), ("f1", Some(r.f1))] {
        check!(v == Some(0.8) && fmt_metric(v) == "0.800", "{name} = {}", fmt_metric(v));
    }
    Ok(format!("tp 8 fp 2 fn 2, precision {} recall {} f1 {:.3}", fmt_metric(r.precision), fmt_metric(r.recall), r.f1))
}

fn excerpt_parsing() -> Check {
    let c = ingest_path(&fixture("excerpts.txt")).map_err(|e| e.to_string())?;
    let ids: Vec<&str> = c.clauses.iter().map(|cl| cl.id.as_str()).collect();
    check!(ids == ["4.7.2", "1127B.5.5"], "clause ids {ids:?}");
    check!(
        c.clauses[0].cross_refs == [ClauseId::from("4.8.2")],
        "4.7.2 cross refs {:?}",
        c.clauses[0].cross_refs
    );
    check!(c.clauses[1].title.as_deref() == Some("Bevelled lip"), "1127B.5.5 title {:?}", c.clauses[1].title);
    check!(c.clauses[0].body.contains("1:20") && c.clauses[1].body.contains("0.5-inch (13mm)"), "bodies lost text");

    let ratio = parse_quantity("1:20").ok_or("1:20 not parsed")?;
    check!(ratio.dimension == Dimension::Ratio && (ratio.magnitude - 0.05).abs() < 1e-12, "1:20 -> {ratio:?}");
    let lip = parse_quantity("0.5-inch (13mm)").ok_or("0.5-inch (13mm) not parsed")?;
    let conv = lip.conversion.as_ref().ok_or("no parenthetical conversion")?;
    check!(lip.dimension == Dimension::Length && (lip.magnitude - 12.7).abs() < 1e-9, "0.5-inch -> {lip:?}");
    check!(conv.consistent && (conv.stated - 13.0).abs() < 1e-9 && conv.deviation <= 0.5, "(13mm) -> {conv:?}");
    let bevel = parse_quantity("45 degrees").ok_or("45 degrees not parsed")?;
    check!(bevel.dimension == Dimension::Angle && bevel.magnitude == 45.0, "45 degrees -> {bevel:?}");
    Ok(format!(
        "ids 4.7.2 (refs 4.8.2) and 1127B.5.5; 1:20 = {}, 0.5-inch = {} mm with (13mm) within {:.1} mm, 45 degrees = {}",
        ratio.magnitude, lip.magnitude, conv.deviation, bevel.magnitude
    ))
}

/// `n` clauses of exactly 15 words each, counting the id.
fn generated_document(n: usize) -> String {
    let mut text = String::new();
    for i in 0..n {
        text.push_str(&format!(
            "{}.{}: The width of each accessible route shall be kept free of any temporary obstruction.\n",
            i / 100 + 1,
            i % 100 + 1
        ));
    }
    text
}

fn context_sizing() -> Check {
    let doc = generated_document(4_000);
    let words = doc.split_whitespace().count();
    check!(words == 60_000, "document has {words} words");
    let tokens = estimate_tokens(&doc);
    check!(tokens == 128_000, "60,000 words estimate {tokens} tokens");
    let c = load_corpus([("big", doc.as_str())]).map_err(|e| e.to_string())?;
    let one = chunk_corpus(&c, &ChunkConfig::new(128_000, 10).without_reserve()).map_err(|e| e.to_string())?;
    check!(one.len() == 1 && one[0].len() == 4_000, "{} windows without reserve", one.len());

    let doc = generated_document(9_375);
    let tokens = estimate_tokens(&doc);
    check!(tokens == 300_000, "large document estimates {tokens} tokens");
    let c = load_corpus([("bigger", doc.as_str())]).map_err(|e| e.to_string())?;
    let cfg = ChunkConfig::new(128_000, 10);
    let windows = chunk_corpus(&c, &cfg).map_err(|e| e.to_string())?;
    check!(windows.len() >= 3, "{} windows at 300,000 tokens", windows.len());
    let covered: BTreeSet<&ClauseId> = windows.iter().flat_map(|w| &w.clause_ids).collect();
    check!(covered.len() == c.len(), "windows cover {} of {} clauses", covered.len(), c.len());
    for pair in windows.windows(2) {
        let shared = pair[0].end.saturating_sub(pair[1].start);
        check!(shared >= 10, "windows {} and {} share {shared} clauses", pair[0].index, pair[1].index);
    }
    check!(
        windows.iter().all(|w| w.estimated_tokens <= cfg.effective_budget()),
        "a window exceeds the effective budget"
    );
    Ok(format!(
        "60,000 words = 128,000 tokens in 1 window; 300,000 tokens in {} windows covering all {} clauses, overlap 10",
        windows.len(),
        c.len()
    ))
}

const KINDS: [ConflictKind; 3] = [ConflictKind::NumericContradiction, ConflictKind::ModalityFlip, ConflictKind::Ambiguity];

fn ids(mask: u8) -> Vec<ClauseId> {
    (0..6).filter(|b| mask & (1 << b) != 0).map(|b| ClauseId::from(format!("1.{}", b + 1))).collect()
}

fn finding(i: usize, mask: u8, kind: usize, confidence: f64) -> Finding {
    Finding {
        id: format!("F{:04}", i + 1),
        kind: KINDS[kind],
        clause_ids: ids(mask),
        rationale: String::new(),
        quotes: vec![],
        confidence,
        provenance: vec![],
        unverifiable: false,
    }
}

fn instance() -> impl Strategy<Value = (Vec<Finding>, GroundTruthManifest)> {
    let item = (1u8..64, 0usize..3, 0.0f64..=1.0);
    (prop::collection::vec(item.clone(), 0..=8), prop::collection::vec(item, 0..=8)).prop_map(|(fs, cs)| {
        let fs = fs.into_iter().enumerate().map(|(i, (m, k, p))| finding(i, m, k, p)).collect();
        let mut m = GroundTruthManifest::empty(0, InjectionConfig::default());
        m.conflicts = cs
            .into_iter()
            .enumerate()
            .map(|(i, (mask, k, _))| InjectedConflict {
                id: format!("C{:03}", i + 1),
                kind: KINDS[k],
                clause_ids: ids(mask),
                original_texts: BTreeMap::new(),
                mutated_texts: BTreeMap::new(),
                description: String::new(),
            })
            .collect();
        (fs, m)
    })
}

/// Largest one-to-one matching, by DP over subsets of conflicts.
fn brute_force(findings: &[Finding], conflicts: &[InjectedConflict], policy: &MatchPolicy) -> usize {
    let mut best = vec![0usize; 1 << conflicts.len()];
    for f in findings {
        let mut next = best.clone();
        for (mask, &b) in best.iter().enumerate() {
            for (j, c) in conflicts.iter().enumerate() {
                if mask & (1 << j) == 0 && policy.accepts(&f.clause_ids, f.kind, c) {
                    next[mask | (1 << j)] = next[mask | (1 << j)].max(b + 1);
                }
            }
        }
        best = next;
    }
    best.into_iter().max().unwrap_or(0)
}

fn evaluator_properties() -> Check {
    let policies: Vec<MatchPolicy> = MatchMode::ALL
        .into_iter()
        .flat_map(|mode| [false, true].map(|kind_must_match| MatchPolicy { mode, kind_must_match }))
        .collect();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&instance(), |(raw, m)| {
            let once = deduplicate_findings(raw.clone());
            prop_assert_eq!(deduplicate_findings(once.clone()), once.clone(), "dedup not idempotent");
            let fs = once;
            for p in &policies {
                let r = evaluate(&fs, &m, p);
                prop_assert_eq!(r.tp + r.fn_, m.len(), "tp + fn != |manifest|");
                prop_assert_eq!(r.tp + r.fp, fs.len(), "tp + fp != |findings|");
                prop_assert_eq!(r.tp, brute_force(&fs, &m.conflicts, p), "greedy tp != brute force under {:?}", p);
                prop_assert_eq!(match_findings(&fs, &m.conflicts, p).assignments.len(), r.tp);
                prop_assert!((0.0..=1.0).contains(&r.f1));
            }
            for k in [false, true] {
                let tp = |mode| evaluate(&fs, &m, &MatchPolicy { mode, kind_must_match: k }).tp;
                prop_assert!(tp(MatchMode::Strict) <= tp(MatchMode::Majority), "strict above majority");
                prop_assert!(tp(MatchMode::Majority) <= tp(MatchMode::Overlap), "majority above overlap");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    runner
        .run(&(0usize..60, 0usize..60, 0usize..60), |(tp, fp, fn_)| {
            let m = compute_metrics(tp, fp, fn_);
            if let (Some(p), Some(r)) = (m.precision, m.recall) {
                prop_assert!(m.f1 >= p.min(r) - 1e-12 && m.f1 <= p.max(r) + 1e-12, "f1 outside [min, max]");
            } else if m.f1 != 0.0 {
                return Err(TestCaseError::fail("f1 must be 0 when a metric is undefined"));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 random instances up to 8x8 under 6 policies: conservation, brute-force tp, policy ordering, F1 bounds, dedup idempotence".into())
}

fn adjudication_replay() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let findings: Vec<Finding> = (0..10).map(|i| finding(i, 1 << (i % 6), i % 3, 0.5)).collect();
    let findings: Vec<Finding> = findings
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            f.clause_ids = vec![ClauseId::from(format!("{}.1", i + 1))];
            f
        })
        .collect();
    write_json(&run.join("findings.json"), &FindingsFile::new("mock", findings)).unwrap();
    let mut meta = RunMeta::new("run");
    meta.findings = Some("findings.json".into());
    meta.save(&run).unwrap();

    let store = RunStore::open(tmp.path());
    let decisions = [Decision::Confirm; 7].into_iter().chain([Decision::Reject; 2]);
    for (i, d) in decisions.enumerate() {
        let v = Verdict {
            finding_id: format!("F{:04}", i + 1),
            decision: d,
            note: String::new(),
            reviewer: "expert".into(),
            timestamp: format!("2026-03-01T10:{i:02}:00Z"),
        };
        store.record_verdict("run", v).map_err(|e| e.to_string())?;
    }
    let (run_data, m) = store.validated("run").map_err(|e| e.to_string())?;
    check!(store.verdicts("run").unwrap().len() == 9, "log length");
    check!(read_findings(&run.join("findings.json")).unwrap().findings.len() == 10, "findings changed");
    let vp = m.validated_precision.ok_or("validated precision undefined")?;
    check!((vp - 0.778).abs() <= 0.001, "validated precision {vp}");
    check!(m.coverage == 0.9, "coverage {}", m.coverage);
    check!(m.automated == run_data.automated_report(), "automated report altered");
    Ok(format!("expert tp {} fp {}, validated precision {vp:.3}, coverage {:.3}", m.expert_tp, m.expert_fp, m.coverage))
}

fn main() {
    let criteria: [(u8, &str, fn() -> Check); 7] = [
        (1, "injection reproducibility", injection_reproducibility),
        (2, "baseline oracle run", baseline_oracle),
        (3, "mock end-to-end", mock_end_to_end),
        (4, "excerpt parsing", excerpt_parsing),
        (5, "context sizing", context_sizing),
        (6, "evaluator properties", evaluator_properties),
        (7, "adjudication replay", adjudication_replay),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {n} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n} {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
