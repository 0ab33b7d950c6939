//! Run directories inside a workspace, and the per-run verdict log.
//!
//! A run directory holds `run.json` plus the artifacts it names. Verdicts are
//! appended to `verdicts.jsonl`; nothing ever rewrites that file.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use regconflict_core::adjudication::{
    check_verdict, validated_metrics, AdjudicationError, ValidatedMetrics, Verdict, VERDICT_SCHEMA_VERSION,
};
use regconflict_core::eval::{evaluate, EvaluationReport, MatchPolicy};
use regconflict_core::injector::GroundTruthManifest;
use regconflict_core::Corpus;
use serde::{Deserialize, Serialize};

use crate::io::{read_corpus, read_findings, read_json, read_text, write_json, ArtifactError, FindingsFile};

pub const RUN_SCHEMA_VERSION: &str = "1";
pub const RUN_FILE: &str = "run.json";
pub const VERDICT_LOG: &str = "verdicts.jsonl";

/// `run.json`. Paths are relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunMeta {
    pub schema_version: String,
    pub run_id: String,
    pub source_corpus: Option<String>,
    pub corpus: Option<String>,
    pub manifest: Option<String>,
    pub findings: Option<String>,
    pub report: Option<String>,
    pub verdicts: String,
    pub config_snapshots: BTreeMap<String, String>,
    pub backend: Option<String>,
    pub prompt_hash: Option<String>,
    pub seed: Option<u64>,
}

impl RunMeta {
    pub fn new(run_id: &str) -> Self {
        Self {
            schema_version: RUN_SCHEMA_VERSION.to_string(),
            run_id: run_id.to_string(),
            verdicts: VERDICT_LOG.to_string(),
            ..Default::default()
        }
    }

    /// Reads `dir/run.json`, or starts a fresh record named after `dir`.
    pub fn load_or_new(dir: &Path) -> Result<Self, ArtifactError> {
        let path = dir.join(RUN_FILE);
        if path.exists() {
            read_json(&path)
        } else {
            Ok(Self::new(&run_id_of(dir)))
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), ArtifactError> {
        write_json(&dir.join(RUN_FILE), self)
    }
}

pub fn run_id_of(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(dir)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string())
}

/// One line of the verdict log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub schema_version: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Adjudication(#[from] AdjudicationError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("run {0} has no findings")]
    NoFindings(String),
}

/// Everything a run directory holds, loaded.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub meta: RunMeta,
    pub corpus: Option<Corpus>,
    pub manifest: Option<GroundTruthManifest>,
    pub findings: FindingsFile,
    pub report: Option<EvaluationReport>,
}

impl RunArtifacts {
    /// The stored report, or one computed under the default policy.
    pub fn automated_report(&self) -> EvaluationReport {
        if let Some(r) = &self.report {
            return r.clone();
        }
        let manifest = self
            .manifest
            .clone()
            .unwrap_or_else(|| GroundTruthManifest::empty(0, Default::default()));
        let mut r = evaluate(&self.findings.findings, &manifest, &MatchPolicy::default());
        r.run_id = Some(self.meta.run_id.clone());
        r.backend = Some(self.findings.backend.clone());
        r.prompt_hash = self.findings.prompt_hash.clone();
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub backend: Option<String>,
    pub findings: usize,
    pub adjudicated: usize,
    pub verdicts: usize,
}

pub struct RunStore {
    root: PathBuf,
    writers: Mutex<BTreeMap<String, Arc<Mutex<()>>>>,
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\'])
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            writers: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        let dir = self.root.join(id);
        if valid_run_id(id) && dir.join(RUN_FILE).is_file() {
            Ok(dir)
        } else {
            Err(AdjudicationError::UnknownRun(id.to_string()).into())
        }
    }

    /// Run ids in name order.
    pub fn run_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        let entries = fs::read_dir(&self.root).map_err(|source| ArtifactError::Io {
            path: self.root.clone(),
            source,
        })?;
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if e.path().join(RUN_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load(&self, id: &str) -> Result<RunArtifacts, StoreError> {
        let dir = self.run_dir(id)?;
        let meta: RunMeta = read_json(&dir.join(RUN_FILE))?;
        let findings = match &meta.findings {
            Some(f) => read_findings(&dir.join(f))?,
            None => return Err(StoreError::NoFindings(id.to_string())),
        };
        let corpus = meta.corpus.as_ref().map(|p| read_corpus(&dir.join(p))).transpose()?;
        let manifest = meta.manifest.as_ref().map(|p| read_json(&dir.join(p))).transpose()?;
        let report = meta.report.as_ref().map(|p| read_json(&dir.join(p))).transpose()?;
        Ok(RunArtifacts {
            meta,
            corpus,
            manifest,
            findings,
            report,
        })
    }

    /// The full log, oldest first.
    pub fn verdicts(&self, id: &str) -> Result<Vec<Verdict>, StoreError> {
        let dir = self.run_dir(id)?;
        read_verdict_log(&dir.join(VERDICT_LOG)).map_err(Into::into)
    }

    /// Validates and appends; returns the new log length.
    pub fn record_verdict(&self, id: &str, verdict: Verdict) -> Result<usize, StoreError> {
        let run = self.load(id)?;
        check_verdict(&run.findings.findings, &verdict)?;
        let lock = self
            .writers
            .lock()
            .expect("writer table")
            .entry(id.to_string())
            .or_default()
            .clone();
        let _guard = lock.lock().expect("run writer");
        let path = self.root.join(id).join(VERDICT_LOG);
        let line = serde_json::to_string(&VerdictRecord {
            schema_version: VERDICT_SCHEMA_VERSION.to_string(),
            verdict,
        })
        .expect("verdict serializes");
        let io = |source| ArtifactError::Io {
            path: path.clone(),
            source,
        };
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        f.write_all(format!("{line}\n").as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)?;
        Ok(read_verdict_log(&path)?.len())
    }

    pub fn validated(&self, id: &str) -> Result<(RunArtifacts, ValidatedMetrics), StoreError> {
        let run = self.load(id)?;
        let log = self.verdicts(id)?;
        let m = validated_metrics(&run.findings.findings, &run.automated_report(), &log);
        Ok((run, m))
    }

    pub fn summaries(&self) -> Result<Vec<RunSummary>, StoreError> {
        let mut out = Vec::new();
        for id in self.run_ids()? {
            let Ok((run, m)) = self.validated(&id) else { continue };
            out.push(RunSummary {
                run_id: id.clone(),
                backend: Some(run.findings.backend.clone()),
                findings: run.findings.findings.len(),
                adjudicated: m.adjudicated,
                verdicts: self.verdicts(&id)?.len(),
            });
        }
        Ok(out)
    }
}

/// Missing log = no verdicts yet.
pub fn read_verdict_log(path: &Path) -> Result<Vec<Verdict>, ArtifactError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: VerdictRecord = serde_json::from_str(line).map_err(|e| ArtifactError::Format {
            path: path.to_path_buf(),
            line: k + 1,
            message: e.to_string(),
        })?;
        if rec.schema_version != VERDICT_SCHEMA_VERSION {
            return Err(ArtifactError::Format {
                path: path.to_path_buf(),
                line: k + 1,
                message: format!("unsupported schema_version {:?}", rec.schema_version),
            });
        }
        out.push(rec.verdict);
    }
    Ok(out)
}
