#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regconflict"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and insists on exit 0.
pub fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Ingests the synthetic fixture into `dir/corpus.jsonl`.
pub fn ingest(dir: &Path) -> PathBuf {
    let out = dir.join("corpus.jsonl");
    ok(&["ingest", "--input", s(&fixture("synthetic.txt")), "--out", s(&out)]);
    out
}
