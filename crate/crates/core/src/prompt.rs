//! Prompt construction for the language-model detector.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chunk::Window;
use crate::corpus::Corpus;

/// Bumped whenever the wording below changes.
pub const PROMPT_VERSION: &str = "regconflict-prompt/1";

/// The findings schema shipped with the crate, embedded verbatim in prompts.
pub const FINDINGS_SCHEMA: &str = include_str!("../schemas/findings.schema.json");

pub const SYSTEM_MESSAGE: &str =
    "You review building regulations for internal inconsistencies. You answer with JSON only.";

const PREAMBLE: &str = "\
Find ambiguities, contradictions and conflicting requirements among the clauses listed below.
Cite every clause involved by its id exactly as it appears before the colon.
Quote wording verbatim from the cited clauses.
Classify each finding with one kind: NumericContradiction, ModalityFlip, TermInconsistency, UnitMismatch, CrossReferenceConflict or Ambiguity.
Respond with only a JSON array matching the schema at the end, or [] if there is nothing to report.";

/// Marker present only in chain-of-thought prompts.
pub const STEP_BY_STEP_MARKER: &str = "Think step by step.";

const STEP_BY_STEP: &str = "\
Think step by step. First note the requirement each clause states, then compare clauses that share a subject, a term or a reference, and only then write the array.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStrategy {
    #[default]
    Direct,
    Cot,
}

impl PromptStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptStrategy::Direct => "direct",
            PromptStrategy::Cot => "cot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("window {0} holds no clauses")]
    EmptyWindow(usize),
}

pub fn build_prompt(corpus: &Corpus, window: &Window, strategy: PromptStrategy) -> Result<String, PromptError> {
    if window.is_empty() {
        return Err(PromptError::EmptyWindow(window.index));
    }
    let mut out = format!("[{PROMPT_VERSION}]\n{PREAMBLE}\n\nClauses:\n");
    for c in &corpus.clauses[window.start..window.end] {
        out.push_str(&c.listing());
        out.push('\n');
    }
    out.push('\n');
    if strategy == PromptStrategy::Cot {
        out.push_str(STEP_BY_STEP);
        out.push_str("\n\n");
    }
    out.push_str("Output schema:\n");
    out.push_str(FINDINGS_SCHEMA.trim_end());
    out.push('\n');
    Ok(out)
}

/// SHA-256 over everything in a prompt except the clause listing, so runs
/// can cite which wording they used.
pub fn prompt_hash(strategy: PromptStrategy) -> String {
    let mut h = Sha256::new();
    for part in [PROMPT_VERSION, SYSTEM_MESSAGE, PREAMBLE, strategy.as_str(), FINDINGS_SCHEMA] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    if strategy == PromptStrategy::Cot {
        h.update(STEP_BY_STEP.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
