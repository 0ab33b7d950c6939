//! Stage configuration files, JSON or TOML by extension.

use std::path::{Path, PathBuf};

use regconflict_core::analysis::TermDictionary;
use regconflict_core::chunk::{ChunkConfig, DEFAULT_CONTEXT_TOKENS, DEFAULT_OVERLAP};
use regconflict_core::prompt::PromptStrategy;
use regconflict_core::quantity::UnitTolerance;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::io::{read_text, ArtifactError};

pub const DEFAULT_CREDENTIAL_ENV: &str = "REGCONFLICT_API_KEY";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Baseline,
    Llm,
    Mock,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Baseline => "baseline",
            Backend::Llm => "llm",
            Backend::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("samples must be at least 1")]
    NoSamples,
    #[error("concurrency must be at least 1")]
    NoConcurrency,
    #[error("the llm backend needs an endpoint")]
    MissingEndpoint,
    #[error("the llm backend needs a model name")]
    MissingModel,
    #[error("environment variable {0} holding the credential is unset or empty")]
    MissingCredential(String),
    #[error("the mock backend needs a transcript")]
    MissingTranscript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub backend: Backend,
    /// Context window in tokens.
    pub budget: u64,
    /// Clauses repeated at the start of each following window.
    pub overlap: usize,
    /// Subtract the prompt and response reserve from `budget`.
    pub reserve_overhead: bool,
    pub strategy: PromptStrategy,
    /// Self-consistency samples per window.
    pub samples: usize,
    /// Retries after the first failed attempt.
    pub retry_limit: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub transcript: Option<PathBuf>,
    pub term_swaps: Option<TermDictionary>,
    pub tolerance: Option<UnitTolerance>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Baseline,
            budget: DEFAULT_CONTEXT_TOKENS,
            overlap: DEFAULT_OVERLAP,
            reserve_overhead: true,
            strategy: PromptStrategy::Direct,
            samples: 1,
            retry_limit: 2,
            backoff_ms: 500,
            concurrency: 4,
            timeout_secs: 120,
            endpoint: None,
            model: None,
            credential_env: DEFAULT_CREDENTIAL_ENV.to_string(),
            transcript: None,
            term_swaps: None,
            tolerance: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples == 0 {
            return Err(ConfigError::NoSamples);
        }
        if self.concurrency == 0 {
            return Err(ConfigError::NoConcurrency);
        }
        match self.backend {
            Backend::Llm => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(ConfigError::MissingEndpoint);
                }
                if self.model.as_deref().is_none_or(str::is_empty) {
                    return Err(ConfigError::MissingModel);
                }
            }
            Backend::Mock if self.transcript.is_none() => return Err(ConfigError::MissingTranscript),
            _ => {}
        }
        Ok(())
    }

    pub fn chunking(&self) -> ChunkConfig {
        let c = ChunkConfig::new(self.budget, self.overlap);
        if self.reserve_overhead {
            c
        } else {
            c.without_reserve()
        }
    }

    /// Reads the credential named by `credential_env`.
    pub fn credential(&self) -> Result<String, ConfigError> {
        match std::env::var(&self.credential_env) {
            Ok(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(ConfigError::MissingCredential(self.credential_env.clone())),
        }
    }
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|x| x.eq_ignore_ascii_case("toml"))
}

pub fn parse_config<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, ArtifactError> {
    let invalid = |message: String| ArtifactError::Invalid {
        path: path.to_path_buf(),
        message,
    };
    if is_toml(path) {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    } else {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }
}

/// The parsed value plus the raw text, kept for the run snapshot.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<(T, String), ArtifactError> {
    let text = read_text(path)?;
    Ok((parse_config(&text, path)?, text))
}

/// File name of a stage's config snapshot inside a run directory.
pub fn snapshot_name(stage: &str, source: &Path) -> String {
    format!("{stage}.config.{}", if is_toml(source) { "toml" } else { "json" })
}
