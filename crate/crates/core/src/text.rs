//! Word, sentence and content-token helpers shared by the parser, the
//! injector and the detectors.

use alloc::string::String;
use alloc::vec::Vec;

const STOP_WORDS: &[&str] = &[
    "a", "all", "an", "and", "any", "are", "as", "at", "be", "been", "by", "case",
    "cases", "each", "every", "exceed", "for", "from", "greater", "has", "have",
    "in", "is", "it", "its", "least", "less", "max", "maximum", "may", "min", "minimum", "more",
    "most", "must", "no", "not", "of", "on", "or", "shall", "should", "such", "than", "that",
    "the", "their", "these", "this", "to", "up", "when", "where", "which", "will", "with",
];

pub fn is_stop_word(word: &str) -> bool {
    STOP_WORDS.binary_search(&word).is_ok()
}

/// Whitespace-separated word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Alphabetic words with their byte offsets, original case.
pub fn alpha_words(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphabetic() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push((s, &text[s..i]));
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

/// Crude plural folding: `slopes` -> `slope`, `ramps` -> `ramp`, keeps `glass`.
pub fn singular(word: &str) -> &str {
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        &word[..word.len() - 1]
    } else {
        word
    }
}

/// Lowercased, stop-word-free, singularized words in order of appearance.
pub fn content_tokens(text: &str) -> Vec<String> {
    alpha_words(text)
        .into_iter()
        .filter_map(|(_, w)| {
            let lower = w.to_lowercase();
            if is_stop_word(&lower) {
                None
            } else {
                Some(String::from(singular(&lower)))
            }
        })
        .collect()
}

/// Byte ranges of sentences. A sentence ends at `.`, `!` or `?` followed by
/// whitespace and then an uppercase letter, or by the end of the text; a
/// `.` inside `0.5` or `4.8.2` never ends a sentence.
pub fn sentences(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if matches!(b, b'.' | b'!' | b'?') {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            let ends = j == bytes.len() || (j > i + 1 && text[j..].starts_with(char::is_uppercase));
            if ends {
                push_trimmed(text, start, i + 1, &mut out);
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(text, start, bytes.len(), &mut out);
    out
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead + trail < slice.len() {
        out.push((start + lead, end - trail));
    }
}

/// Length of the longest run of equal consecutive tokens shared by `a` and `b`,
/// with the start index of that run in `a` (earliest on ties).
pub fn longest_common_run(a: &[String], b: &[String]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            cur[j + 1] = if a[i] == b[j] { prev[j] + 1 } else { 0 };
            let len = cur[j + 1];
            let start = i + 1 - len;
            if len > best.0 || (len == best.0 && len > 0 && start < best.1) {
                best = (len, start);
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Finds `needle` in `haystack` as a whole-word, ASCII-case-insensitive match.
pub fn find_word_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let hay = haystack.as_bytes();
    let nee = needle.as_bytes();
    let mut i = from;
    while i + nee.len() <= hay.len() {
        if hay[i..i + nee.len()].eq_ignore_ascii_case(nee) {
            let before_ok = i == 0 || !is_word_byte(hay[i - 1]);
            let after_ok = i + nee.len() == hay.len() || !is_word_byte(hay[i + nee.len()]);
            if before_ok && after_ok {
                return Some(i);
            }
        }
        i += 1;
    }
    None
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b >= 0x80
}

/// Replaces every whole-word occurrence of `from` with `to`, carrying over a
/// leading capital.
pub fn replace_word_ci(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut pos = 0;
    while let Some(at) = find_word_ci(text, from, pos) {
        out.push_str(&text[last..at]);
        let capital = text[at..].starts_with(char::is_uppercase);
        if capital {
            let mut chars = to.chars();
            if let Some(first) = chars.next() {
                out.extend(first.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(to);
        }
        last = at + from.len();
        pos = last;
    }
    out.push_str(&text[last..]);
    out
}
