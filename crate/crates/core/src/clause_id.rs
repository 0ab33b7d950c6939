//! Clause identifiers such as `4.7.2` or `1127B.5.5`.
//!
//! An identifier is one or more segments joined by `.`, where each segment is
//! one or more ASCII digits optionally followed by ASCII letters. Identifiers
//! order naturally segment by segment (`4.7.10` sorts after `4.7.9`).

use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

/// A clause identifier. Construction through [`ClauseId::parse`] enforces the
/// segment grammar; identifiers quoted by an external detector go through
/// [`ClauseId::from`] unchecked and fall back to string ordering.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClauseId(String);

impl ClauseId {
    pub fn parse(text: &str) -> Option<Self> {
        if is_valid(text) {
            Some(Self(String::from(text)))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_well_formed(&self) -> bool {
        is_valid(&self.0)
    }
}

impl From<String> for ClauseId {
    fn from(value: String) -> Self {
        Self(value)
    }
}

impl From<&str> for ClauseId {
    fn from(value: &str) -> Self {
        Self(String::from(value))
    }
}

impl fmt::Debug for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ClauseId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for ClauseId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for ClauseId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl Ord for ClauseId {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        match (is_valid(&self.0), is_valid(&other.0)) {
            (true, true) => natural_cmp(&self.0, &other.0),
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for ClauseId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let (mut i, mut j) = (0, 0);
    loop {
        match (i < a.len(), j < b.len()) {
            (false, false) => return a.cmp(b),
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            _ => {}
        }
        let ei = segment_end(a, i);
        let ej = segment_end(b, j);
        let ord = segment_cmp(&a[i..ei], &b[j..ej]);
        if ord != Ordering::Equal {
            return ord;
        }
        // skip the separating dot
        i = ei + 1;
        j = ej + 1;
        if i > a.len() && j > b.len() {
            return a.cmp(b);
        }
    }
}

fn segment_end(s: &[u8], from: usize) -> usize {
    let mut k = from;
    while k < s.len() && s[k] != b'.' {
        k += 1;
    }
    k
}

fn segment_cmp(a: &[u8], b: &[u8]) -> Ordering {
    let da = digits(a);
    let db = digits(b);
    let (na, la) = a.split_at(da);
    let (nb, lb) = b.split_at(db);
    let na = strip_zeros(na);
    let nb = strip_zeros(nb);
    na.len()
        .cmp(&nb.len())
        .then_with(|| na.cmp(nb))
        .then_with(|| la.cmp(lb))
}

fn digits(s: &[u8]) -> usize {
    let mut k = 0;
    while k < s.len() && s[k].is_ascii_digit() {
        k += 1;
    }
    k
}

fn strip_zeros(s: &[u8]) -> &[u8] {
    let mut k = 0;
    while k < s.len() && s[k] == b'0' {
        k += 1;
    }
    &s[k..]
}

fn is_valid(text: &str) -> bool {
    let b = text.as_bytes();
    let mut i = 0;
    loop {
        let d = digits(&b[i..]);
        if d == 0 {
            return false;
        }
        i += d;
        while i < b.len() && b[i].is_ascii_alphabetic() {
            i += 1;
        }
        if i == b.len() {
            return true;
        }
        if b[i] != b'.' {
            return false;
        }
        i += 1;
    }
}

/// Length in bytes of the longest identifier starting at the beginning of
/// `text`, or 0. A trailing `.` not followed by a segment is not consumed.
pub(crate) fn scan_id(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut end = 0;
    let mut pos = 0;
    loop {
        let digits_start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == digits_start {
            return end;
        }
        while pos < bytes.len() && bytes[pos].is_ascii_alphabetic() {
            pos += 1;
        }
        end = pos;
        if pos + 1 < bytes.len() && bytes[pos] == b'.' && bytes[pos + 1].is_ascii_digit() {
            pos += 1;
        } else {
            return end;
        }
    }
}
