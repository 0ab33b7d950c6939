//! Token estimation and context-budgeted windowing of a corpus.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clause_id::ClauseId;
use crate::corpus::Corpus;
use crate::text::word_count;

/// Tokens the model reads per 60 words; 128k tokens is about 60k words.
pub const TOKENS_PER_60_WORDS: u64 = 128;
pub const DEFAULT_CONTEXT_TOKENS: u64 = 128_000;
pub const PROMPT_RESERVE_TOKENS: u64 = 2_000;
pub const RESPONSE_RESERVE_TOKENS: u64 = 4_000;
pub const DEFAULT_OVERLAP: usize = 10;

/// Token count estimate for a piece of text.
pub trait TokenEstimator {
    fn estimate(&self, text: &str) -> u64;
}

/// `ceil(words * 128 / 60)` over whitespace-separated words.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WordRatioEstimator;

impl TokenEstimator for WordRatioEstimator {
    fn estimate(&self, text: &str) -> u64 {
        estimate_tokens(text)
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    tokens_for_words(word_count(text) as u64)
}

pub fn tokens_for_words(words: u64) -> u64 {
    (words * TOKENS_PER_60_WORDS).div_ceil(60)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub budget: u64,
    pub overlap: usize,
    /// Tokens held back for prompt instructions and the response.
    pub reserve: u64,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_CONTEXT_TOKENS,
            overlap: DEFAULT_OVERLAP,
            reserve: PROMPT_RESERVE_TOKENS + RESPONSE_RESERVE_TOKENS,
        }
    }
}

impl ChunkConfig {
    pub fn new(budget: u64, overlap: usize) -> Self {
        Self {
            budget,
            overlap,
            ..Self::default()
        }
    }

    pub fn without_reserve(mut self) -> Self {
        self.reserve = 0;
        self
    }

    pub fn effective_budget(&self) -> u64 {
        self.budget.saturating_sub(self.reserve)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    /// Clause positions `start..end` in corpus order, overlap included.
    pub start: usize,
    pub end: usize,
    pub clause_ids: Vec<ClauseId>,
    pub estimated_tokens: u64,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error("clause {id} alone needs {tokens} tokens, over the effective budget of {budget}")]
    ClauseTooLarge { id: ClauseId, tokens: u64, budget: u64 },
    #[error("budget {budget} does not exceed the reserved {reserve} tokens")]
    BudgetBelowReserve { budget: u64, reserve: u64 },
}

pub fn chunk_corpus(corpus: &Corpus, config: &ChunkConfig) -> Result<Vec<Window>, ChunkError> {
    chunk_corpus_with(corpus, config, &WordRatioEstimator)
}

/// Greedy contiguous packing. Each window after the first starts with the
/// last `overlap` clauses of its predecessor; the overlap shrinks only when
/// keeping it whole would leave no room for a new clause.
pub fn chunk_corpus_with<E: TokenEstimator + ?Sized>(
    corpus: &Corpus,
    config: &ChunkConfig,
    estimator: &E,
) -> Result<Vec<Window>, ChunkError> {
    if config.budget <= config.reserve {
        return Err(ChunkError::BudgetBelowReserve {
            budget: config.budget,
            reserve: config.reserve,
        });
    }
    let budget = config.effective_budget();
    let costs: Vec<u64> = corpus.clauses.iter().map(|c| estimator.estimate(&c.listing())).collect();
    for (c, &cost) in corpus.clauses.iter().zip(&costs) {
        if cost > budget {
            return Err(ChunkError::ClauseTooLarge {
                id: c.id.clone(),
                tokens: cost,
                budget,
            });
        }
    }
    let mut windows = Vec::new();
    let mut start = 0;
    let mut fresh = 0; // first clause not yet covered
    while fresh < costs.len() {
        let mut total: u64 = costs[start..fresh].iter().sum();
        // drop overlap from the front until the next new clause fits
        while total + costs[fresh] > budget {
            total -= costs[start];
            start += 1;
        }
        let mut end = fresh;
        while end < costs.len() && total + costs[end] <= budget {
            total += costs[end];
            end += 1;
        }
        windows.push(Window {
            index: windows.len(),
            start,
            end,
            clause_ids: corpus.clauses[start..end].iter().map(|c| c.id.clone()).collect(),
            estimated_tokens: total,
        });
        fresh = end;
        start = end.saturating_sub(config.overlap).max(windows.last().map_or(0, |w| w.start + 1));
    }
    Ok(windows)
}
