//! Command-line pipeline: each stage reads artifacts and writes new ones into
//! a run directory.

use std::ffi::OsString;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use regconflict_core::baseline::BaselineDetector;
use regconflict_core::eval::{evaluate, render_markdown, EvaluationReport, MatchMode, MatchPolicy};
use regconflict_core::injector::{inject, GroundTruthManifest, InjectionConfig};
use regconflict_core::prompt::PromptStrategy;

use crate::config::{load_config, snapshot_name, Backend, DetectorConfig};
use crate::io::{
    ingest_path, read_corpus, read_findings, read_json, read_text, write_corpus, write_json, write_text, FindingsFile,
};
use crate::llm::detect_llm;
use crate::store::{RunMeta, RunStore};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const SOURCE_FILE: &str = "source.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FINDINGS_FILE: &str = "findings.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_MD_FILE: &str = "report.md";
pub const TRANSCRIPT_FILE: &str = "transcript.json";

#[derive(Debug, Parser)]
#[command(name = "regconflict", version, about = "Plant, detect and score inconsistencies in regulatory text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Strict,
    Majority,
    Overlap,
}

impl From<PolicyArg> for MatchMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Strict => MatchMode::Strict,
            PolicyArg::Majority => MatchMode::Majority,
            PolicyArg::Overlap => MatchMode::Overlap,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Direct,
    Cot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse plain text (a .txt directory or one file) into a corpus file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plant conflicts; writes the mutated corpus and the manifest.
    Inject {
        #[arg(long)]
        corpus: PathBuf,
        /// Injection config, JSON or TOML.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a detector over a corpus; writes findings.
    Detect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        backend: Backend,
        /// Detector config, JSON or TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mock transcript; overrides the config.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        samples: Option<usize>,
        /// Run directory; defaults to the corpus file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score findings against a manifest; writes the report.
    Evaluate {
        #[arg(long)]
        findings: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "majority")]
        policy: PolicyArg,
        #[arg(long)]
        kind_must_match: bool,
        /// Run directory; defaults to the findings file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a report as markdown.
    Report {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to report.md next to the report; `-` prints.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the review API over a workspace of run directories.
    Serve {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Expose manifest-derived fields to reviewers.
        #[arg(long)]
        reveal: bool,
    },
}

/// Parses and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dir_of(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

/// Copies `src` to `dir/name` unless it already is that file.
fn snapshot(src: &Path, dir: &Path, name: &str) -> Result<()> {
    let dst = dir.join(name);
    if !same_file(src, &dst) {
        write_text(&dst, &read_text(src)?)?;
    }
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, out } => {
            let corpus = ingest_path(&input)?;
            write_corpus(&out, &corpus)?;
            eprintln!(
                "{}: {} documents, {} clauses, {} unresolved references",
                out.display(),
                corpus.documents.len(),
                corpus.len(),
                corpus.unresolved_refs.len()
            );
        }
        Command::Inject {
            corpus,
            config,
            seed,
            out,
        } => {
            let source = read_corpus(&corpus)?;
            let (cfg, raw): (InjectionConfig, String) = load_config(&config)?;
            let (mutated, manifest) =
                inject(&source, &cfg, seed).with_context(|| format!("injecting into {}", corpus.display()))?;
            let mut meta = RunMeta::load_or_new(&out)?;
            write_corpus(&out.join(SOURCE_FILE), &source)?;
            write_corpus(&out.join(CORPUS_FILE), &mutated)?;
            write_json(&out.join(MANIFEST_FILE), &manifest)?;
            let snap = snapshot_name("inject", &config);
            write_text(&out.join(&snap), &raw)?;
            meta.source_corpus = Some(SOURCE_FILE.into());
            meta.corpus = Some(CORPUS_FILE.into());
            meta.manifest = Some(MANIFEST_FILE.into());
            meta.seed = Some(seed);
            meta.config_snapshots.insert("inject".into(), snap);
            meta.save(&out)?;
            eprintln!("{}: {} conflicts planted", out.display(), manifest.len());
        }
        Command::Detect {
            corpus,
            backend,
            config,
            transcript,
            strategy,
            samples,
            out,
        } => {
            let out = out.unwrap_or_else(|| dir_of(&corpus));
            let (mut cfg, raw) = match &config {
                Some(p) => {
                    let (mut c, raw): (DetectorConfig, String) = load_config(p)?;
                    // transcript paths in a config file are relative to it
                    if let Some(t) = c.transcript.take() {
                        c.transcript = Some(if t.is_relative() { dir_of(p).join(t) } else { t });
                    }
                    (c, Some(raw))
                }
                None => (DetectorConfig::default(), None),
            };
            cfg.backend = backend;
            if let Some(t) = transcript {
                cfg.transcript = Some(t);
            }
            if let Some(s) = strategy {
                cfg.strategy = match s {
                    StrategyArg::Direct => PromptStrategy::Direct,
                    StrategyArg::Cot => PromptStrategy::Cot,
                };
            }
            if let Some(n) = samples {
                cfg.samples = n;
            }
            cfg.validate().context("detector config")?;
            let c = read_corpus(&corpus)?;
            let file = match backend {
                Backend::Baseline => {
                    let d = BaselineDetector::new(cfg.term_swaps.clone().unwrap_or_default(), cfg.tolerance.unwrap_or_default());
                    FindingsFile::new(backend.as_str(), d.detect(&c))
                }
                Backend::Llm | Backend::Mock => {
                    let d = detect_llm(&c, &cfg)?;
                    for f in &d.failures {
                        eprintln!("warning: window {} failed after {} attempts: {}", f.window, f.attempts, f.reason);
                    }
                    let mut file = FindingsFile::new(backend.as_str(), d.findings);
                    file.prompt_hash = Some(d.prompt_hash);
                    file.window_failures = d.failures;
                    file
                }
            };
            let mut meta = RunMeta::load_or_new(&out)?;
            snapshot(&corpus, &out, CORPUS_FILE)?;
            meta.corpus = Some(CORPUS_FILE.into());
            if let (Backend::Mock, Some(t)) = (backend, &cfg.transcript) {
                snapshot(t, &out, TRANSCRIPT_FILE)?;
            }
            if let (Some(p), Some(raw)) = (&config, raw) {
                let snap = snapshot_name("detect", p);
                write_text(&out.join(&snap), &raw)?;
                meta.config_snapshots.insert("detect".into(), snap);
            }
            write_json(&out.join(FINDINGS_FILE), &file)?;
            meta.findings = Some(FINDINGS_FILE.into());
            meta.backend = Some(file.backend.clone());
            meta.prompt_hash = file.prompt_hash.clone();
            meta.save(&out)?;
            eprintln!(
                "{}: {} findings, {} failed windows",
                out.join(FINDINGS_FILE).display(),
                file.findings.len(),
                file.window_failures.len()
            );
        }
        Command::Evaluate {
            findings,
            manifest,
            policy,
            kind_must_match,
            out,
        } => {
            let out = out.unwrap_or_else(|| dir_of(&findings));
            let file = read_findings(&findings)?;
            let m: GroundTruthManifest = read_json(&manifest)?;
            let policy = MatchPolicy {
                mode: policy.into(),
                kind_must_match,
            };
            let mut meta = RunMeta::load_or_new(&out)?;
            let mut report = evaluate(&file.findings, &m, &policy);
            report.run_id = Some(meta.run_id.clone());
            report.backend = Some(file.backend.clone());
            report.prompt_hash = file.prompt_hash.clone();
            snapshot(&findings, &out, FINDINGS_FILE)?;
            snapshot(&manifest, &out, MANIFEST_FILE)?;
            write_json(&out.join(REPORT_FILE), &report)?;
            meta.findings = Some(FINDINGS_FILE.into());
            meta.manifest = Some(MANIFEST_FILE.into());
            meta.report = Some(REPORT_FILE.into());
            meta.save(&out)?;
            println!(
                "tp {} fp {} fn {} precision {} recall {} f1 {:.3}",
                report.tp,
                report.fp,
                report.fn_,
                regconflict_core::eval::fmt_metric(report.precision),
                regconflict_core::eval::fmt_metric(report.recall),
                report.f1
            );
        }
        Command::Report { report, out } => {
            let r: EvaluationReport = read_json(&report)?;
            let md = render_markdown(&r);
            match out.as_deref() {
                Some(p) if p == Path::new("-") => print!("{md}"),
                Some(p) => write_text(p, &md)?,
                None => write_text(&dir_of(&report).join(REPORT_MD_FILE), &md)?,
            }
        }
        Command::Serve {
            workspace,
            port,
            host,
            reveal,
        } => {
            if !workspace.is_dir() {
                bail!("{}: not a directory", workspace.display());
            }
            let store = RunStore::open(workspace);
            let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
            rt.block_on(crate::server::serve(store, !reveal, SocketAddr::new(host, port)))
                .context("serving")?;
        }
    }
    Ok(())
}
