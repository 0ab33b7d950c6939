//! Windowed model detection over a pluggable transport.
//!
//! Windows are processed by a small pool of threads but merged strictly in
//! window order, so the output does not depend on completion order.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use regconflict_core::chunk::{chunk_corpus, ChunkError, Window};
use regconflict_core::prompt::{build_prompt, prompt_hash, SYSTEM_MESSAGE};
use regconflict_core::response::{majority_vote, merge_windows, parse_findings};
use regconflict_core::{Corpus, Finding};
use serde::{Deserialize, Serialize};

use crate::config::{Backend, ConfigError, DetectorConfig};
use crate::io::{read_json, ArtifactError};

/// Transcript entry that makes every attempt fail.
pub const FAIL_MARKER: &str = "fail";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub system: String,
    pub user: String,
    pub window: usize,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError>;
}

/// A window given up on after its retries ran out, or whose response could
/// not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub window: usize,
    pub attempts: u32,
    pub reason: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("http client: {0}")]
    Client(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub findings: Vec<Finding>,
    pub failures: Vec<WindowFailure>,
    pub prompt_hash: String,
}

/// Chat-completions over HTTP.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    credential: String,
}

impl HttpTransport {
    pub fn from_config(config: &DetectorConfig) -> Result<Self, DetectError> {
        let endpoint = config.endpoint.clone().ok_or(ConfigError::MissingEndpoint)?;
        let model = config.model.clone().ok_or(ConfigError::MissingModel)?;
        let credential = config.credential()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| DetectError::Client(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            model,
            credential,
        })
    }

    pub fn request_body(&self, request: &CompletionRequest) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.credential)
            .json(&self.request_body(request))
            .send()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError(format!("status {status}")));
        }
        let body: serde_json::Value = resp.json().map_err(|e| TransportError(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| TransportError("response has no choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Scripted {
    One(String),
    Samples(Vec<String>),
}

/// Replays a transcript: window index to raw response, or one response per
/// self-consistency sample. `"fail"` fails every attempt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct MockTransport {
    pub script: BTreeMap<usize, Scripted>,
}

impl MockTransport {
    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        read_json(path)
    }
}

impl Transport for MockTransport {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let raw = match self.script.get(&request.window) {
            Some(Scripted::One(s)) => Some(s),
            Some(Scripted::Samples(v)) => v.get(request.sample),
            None => None,
        }
        .ok_or_else(|| {
            TransportError(format!(
                "no scripted response for window {} sample {}",
                request.window, request.sample
            ))
        })?;
        if raw == FAIL_MARKER {
            Err(TransportError(format!("scripted failure for window {}", request.window)))
        } else {
            Ok(raw.clone())
        }
    }
}

fn backoff(config: &DetectorConfig, attempt: u32) -> Duration {
    Duration::from_millis(config.backoff_ms.saturating_mul(1u64 << (attempt - 1).min(16)))
}

/// One sample with retries. Returns the raw text and the attempts used.
fn request_with_retry<T: Transport + ?Sized>(
    transport: &T,
    config: &DetectorConfig,
    request: &CompletionRequest,
) -> Result<String, (u32, String)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match transport.complete(request) {
            Ok(raw) => return Ok(raw),
            Err(e) if attempt > config.retry_limit => return Err((attempt, e.0)),
            Err(_) => std::thread::sleep(backoff(config, attempt)),
        }
    }
}

fn run_window<T: Transport + ?Sized>(
    corpus: &Corpus,
    window: &Window,
    config: &DetectorConfig,
    backend: &str,
    transport: &T,
) -> Result<Vec<Finding>, WindowFailure> {
    let fail = |attempts, reason| WindowFailure {
        window: window.index,
        attempts,
        reason,
    };
    let user = build_prompt(corpus, window, config.strategy).map_err(|e| fail(0, e.to_string()))?;
    let mut samples = Vec::with_capacity(config.samples);
    for sample in 0..config.samples {
        let request = CompletionRequest {
            system: SYSTEM_MESSAGE.to_string(),
            user: user.clone(),
            window: window.index,
            sample,
        };
        let raw = request_with_retry(transport, config, &request).map_err(|(n, reason)| fail(n, reason))?;
        let parsed = parse_findings(&raw, corpus, window, backend).map_err(|e| fail(1, e.to_string()))?;
        samples.push(parsed);
    }
    Ok(majority_vote(samples))
}

/// Runs every window through `transport`. Failed windows are reported, not
/// fatal.
pub fn detect_with<T: Transport + ?Sized>(
    corpus: &Corpus,
    config: &DetectorConfig,
    transport: &T,
) -> Result<Detection, DetectError> {
    config.validate()?;
    let backend = config.backend.as_str();
    let windows = chunk_corpus(corpus, &config.chunking())?;
    let results: Mutex<BTreeMap<usize, Result<Vec<Finding>, WindowFailure>>> = Mutex::new(BTreeMap::new());
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.min(windows.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(w) = windows.get(k) else { break };
                let r = run_window(corpus, w, config, backend, transport);
                results.lock().expect("results lock").insert(w.index, r);
            });
        }
    });
    let mut per_window = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in results.into_inner().expect("results lock") {
        match r {
            Ok(f) => per_window.push((index, f)),
            Err(e) => failures.push(e),
        }
    }
    Ok(Detection {
        findings: merge_windows(per_window),
        failures,
        prompt_hash: prompt_hash(config.strategy),
    })
}

/// Picks the transport named by the config.
pub fn detect_llm(corpus: &Corpus, config: &DetectorConfig) -> Result<Detection, DetectError> {
    config.validate()?;
    match config.backend {
        Backend::Mock => {
            let path = config.transcript.as_deref().ok_or(ConfigError::MissingTranscript)?;
            detect_with(corpus, config, &MockTransport::load(path)?)
        }
        _ => detect_with(corpus, config, &HttpTransport::from_config(config)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use regconflict_core::corpus::load_corpus;
    use std::sync::atomic::AtomicU32;

    fn corpus(n: usize) -> Corpus {
        let text: String = (1..=n)
            .map(|i| format!("1.{i}: The width of item {i} shall be at least {} mm.\n", 100 + i))
            .collect();
        load_corpus([("d", text)]).unwrap()
    }

    fn config() -> DetectorConfig {
        DetectorConfig {
            backend: Backend::Mock,
            transcript: Some("unused".into()),
            backoff_ms: 0,
            ..Default::default()
        }
    }

    const TWO: &str = r#"[{"clause_ids": ["1.1", "1.2"], "kind": "NumericContradiction", "rationale": "a"},
                         {"clause_ids": ["1.3"], "kind": "ambiguity", "rationale": "b"}]"#;

    fn mock(entries: &[(usize, Scripted)]) -> MockTransport {
        MockTransport {
            script: entries.iter().cloned().collect(),
        }
    }

    #[test]
    fn single_window() {
        let d = detect_with(&corpus(5), &config(), &mock(&[(0, Scripted::One(TWO.into()))])).unwrap();
        assert_eq!(d.findings.len(), 2);
        assert!(d.findings.iter().all(|f| f.provenance[0].window == Some(0)));
        assert!(d.failures.is_empty());
        assert_eq!(d.findings[0].id, "F0001");
    }

    fn small_windows() -> DetectorConfig {
        DetectorConfig {
            budget: 60,
            overlap: 1,
            reserve_overhead: false,
            ..config()
        }
    }

    #[test]
    fn failing_window_is_data() {
        let c = corpus(6);
        let cfg = small_windows();
        let windows = chunk_corpus(&c, &cfg.chunking()).unwrap();
        assert!(windows.len() >= 2);
        let mut script = vec![(0, Scripted::One(TWO.into())), (1, Scripted::One(FAIL_MARKER.into()))];
        for w in 2..windows.len() {
            script.push((w, Scripted::One("[]".into())));
        }
        let d = detect_with(&c, &cfg, &mock(&script)).unwrap();
        assert_eq!(d.failures, vec![WindowFailure {
            window: 1,
            attempts: 3,
            reason: "scripted failure for window 1".into()
        }]);
        assert!(!d.findings.is_empty());
    }

    #[test]
    fn order_independent_of_concurrency() {
        let c = corpus(12);
        let cfg = small_windows();
        let n = chunk_corpus(&c, &cfg.chunking()).unwrap().len();
        let script: Vec<_> = (0..n)
            .map(|w| {
                let id = c.clauses[chunk_corpus(&c, &cfg.chunking()).unwrap()[w].start].id.clone();
                (w, Scripted::One(format!(r#"[{{"clause_ids": ["{id}"], "kind": "Ambiguity", "rationale": "w{w}"}}]"#)))
            })
            .collect();
        let one = detect_with(&c, &DetectorConfig { concurrency: 1, ..cfg.clone() }, &mock(&script)).unwrap();
        let four = detect_with(&c, &cfg, &mock(&script)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn self_consistency() {
        let cfg = DetectorConfig { samples: 3, ..config() };
        let one = r#"[{"clause_ids": ["1.1", "1.2"], "kind": "NumericContradiction", "rationale": "a"}]"#;
        let d = detect_with(
            &corpus(5),
            &cfg,
            &mock(&[(0, Scripted::Samples(vec![TWO.into(), one.into(), "[]".into()]))]),
        )
        .unwrap();
        assert_eq!(d.findings.len(), 1);
        assert_eq!(d.findings[0].clause_ids, ["1.1", "1.2"]);
    }

    #[test]
    fn unparseable_response_fails_window() {
        let d = detect_with(&corpus(3), &config(), &mock(&[(0, Scripted::One("no json here".into()))])).unwrap();
        assert_eq!(d.failures.len(), 1);
        assert!(d.findings.is_empty());
    }

    struct Flaky(AtomicU32);

    impl Transport for Flaky {
        fn complete(&self, _: &CompletionRequest) -> Result<String, TransportError> {
            if self.0.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(TransportError("reset".into()))
            } else {
                Ok(TWO.into())
            }
        }
    }

    #[test]
    fn retries_recover() {
        let t = Flaky(AtomicU32::new(0));
        let d = detect_with(&corpus(5), &config(), &t).unwrap();
        assert_eq!(d.findings.len(), 2);
        assert_eq!(t.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backoff_doubles() {
        let c = DetectorConfig { backoff_ms: 100, ..config() };
        assert_eq!([1, 2, 3].map(|a| backoff(&c, a).as_millis()), [100, 200, 400]);
    }

    #[test]
    fn llm_without_credential() {
        let c = DetectorConfig {
            backend: Backend::Llm,
            endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()),
            model: Some("m".into()),
            credential_env: "REGCONFLICT_TEST_UNSET_VARIABLE".into(),
            ..Default::default()
        };
        assert!(matches!(
            detect_llm(&corpus(2), &c),
            Err(DetectError::Config(ConfigError::MissingCredential(_)))
        ));
    }

    #[test]
    fn http_body_shape() {
        let t = HttpTransport {
            client: reqwest::blocking::Client::new(),
            endpoint: String::new(),
            model: "m".into(),
            credential: String::new(),
        };
        let body = t.request_body(&CompletionRequest {
            system: "s".into(),
            user: "u".into(),
            window: 0,
            sample: 0,
        });
        assert_eq!(body["temperature"], 0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "u");
    }
}
