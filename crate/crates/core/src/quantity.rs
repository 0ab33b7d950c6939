//! Quantity recognition: lengths, angles, ratios/percentages and bare counts,
//! including parenthetical unit conversions such as `0.5-inch (13mm)`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const MM_PER_INCH: f64 = 25.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Length,
    Angle,
    Ratio,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CanonicalUnit {
    #[serde(rename = "mm")]
    Millimetre,
    #[serde(rename = "degree")]
    Degree,
    #[serde(rename = "dimensionless")]
    Dimensionless,
}

impl Dimension {
    pub fn canonical_unit(self) -> CanonicalUnit {
        match self {
            Dimension::Length => CanonicalUnit::Millimetre,
            Dimension::Angle => CanonicalUnit::Degree,
            Dimension::Ratio | Dimension::Count => CanonicalUnit::Dimensionless,
        }
    }
}

/// Tolerance for judging a parenthetical conversion: the larger of an
/// absolute allowance in millimetres and a fraction of the primary value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTolerance {
    pub absolute_mm: f64,
    pub relative: f64,
}

impl Default for UnitTolerance {
    fn default() -> Self {
        Self {
            absolute_mm: 0.5,
            relative: 0.02,
        }
    }
}

impl UnitTolerance {
    pub fn allowance(&self, magnitude_mm: f64) -> f64 {
        let rel = self.relative * magnitude_mm.abs();
        if rel > self.absolute_mm {
            rel
        } else {
            self.absolute_mm
        }
    }
}

/// The converted value stated in parentheses after a length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    /// Stated value in millimetres.
    pub stated: f64,
    pub deviation: f64,
    pub consistent: bool,
    /// Byte range of the stated number inside the quantity's original text.
    pub number_range: (usize, usize),
    pub unit_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub magnitude: f64,
    pub dimension: Dimension,
    pub canonical_unit: CanonicalUnit,
    pub original_text: String,
    pub conversion: Option<Conversion>,
}

/// A quantity found in a larger text, with its byte range there.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityMatch {
    pub quantity: Quantity,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Copy)]
enum UnitKind {
    Length(f64),
    Angle,
    Percent,
}

// Longest spellings first so `inches` wins over `inch` and `in`.
const UNITS: &[(&str, UnitKind)] = &[
    ("millimetres", UnitKind::Length(1.0)),
    ("millimeters", UnitKind::Length(1.0)),
    ("centimetres", UnitKind::Length(10.0)),
    ("centimeters", UnitKind::Length(10.0)),
    ("millimetre", UnitKind::Length(1.0)),
    ("millimeter", UnitKind::Length(1.0)),
    ("centimetre", UnitKind::Length(10.0)),
    ("centimeter", UnitKind::Length(10.0)),
    ("degrees", UnitKind::Angle),
    ("metres", UnitKind::Length(1000.0)),
    ("meters", UnitKind::Length(1000.0)),
    ("degree", UnitKind::Angle),
    ("inches", UnitKind::Length(MM_PER_INCH)),
    ("metre", UnitKind::Length(1000.0)),
    ("meter", UnitKind::Length(1000.0)),
    ("inch", UnitKind::Length(MM_PER_INCH)),
    ("deg", UnitKind::Angle),
    ("mm", UnitKind::Length(1.0)),
    ("cm", UnitKind::Length(10.0)),
    ("in", UnitKind::Length(MM_PER_INCH)),
    ("m", UnitKind::Length(1000.0)),
    ("\u{b0}", UnitKind::Angle),
    ("%", UnitKind::Percent),
];

/// Returns the unit and its byte length when `rest` starts (after an optional
/// `-` or single space) with a recognised unit at a word boundary.
fn unit_at(rest: &str) -> Option<(UnitKind, usize, &str)> {
    let (skip, attached) = match rest.as_bytes().first() {
        Some(b'-') => (1, true),
        Some(b' ') => (1, false),
        _ => (0, true),
    };
    let tail = &rest[skip..];
    for &(name, kind) in UNITS {
        if tail.len() >= name.len() && tail.as_bytes()[..name.len()].eq_ignore_ascii_case(name.as_bytes()) {
            let after = &tail[name.len()..];
            let boundary = !after.starts_with(|c: char| c.is_alphanumeric());
            // "in" separated by a space is almost always the preposition.
            if !boundary || (name == "in" && !attached) {
                continue;
            }
            return Some((kind, skip + name.len(), &tail[..name.len()]));
        }
    }
    None
}

/// True when `rest` begins with something that makes a preceding number a
/// measurement rather than a clause reference.
pub(crate) fn measurement_follows(rest: &str) -> bool {
    if unit_at(rest).is_some() {
        return true;
    }
    let b = rest.as_bytes();
    b.len() >= 2 && b[0] == b':' && b[1].is_ascii_digit()
}

/// Lexes an unsigned decimal number at the start of `s`; returns (value, len,
/// had_fraction).
fn lex_number(s: &str) -> Option<(f64, usize, bool)> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == 0 {
        return None;
    }
    let mut frac = false;
    if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
        frac = true;
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    s[..i].parse::<f64>().ok().map(|v| (v, i, frac))
}

/// Finds every quantity in `text` in order of appearance.
pub fn scan_quantities(text: &str, tolerance: &UnitTolerance) -> Vec<QuantityMatch> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() || (i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'.')) {
            i += 1;
            continue;
        }
        match quantity_at(text, i, tolerance) {
            Some(m) => {
                i = m.end;
                out.push(m);
            }
            None => {
                // skip the whole token, e.g. a clause number like 4.8.2
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                    i += 1;
                }
            }
        }
    }
    out
}

fn quantity_at(text: &str, start: usize, tolerance: &UnitTolerance) -> Option<QuantityMatch> {
    let (value, len, frac) = lex_number(&text[start..])?;
    let mut end = start + len;
    let rest = &text[end..];
    let rb = rest.as_bytes();
    // a further ".digit" means a multi-level clause number, not a decimal
    if rb.len() >= 2 && rb[0] == b'.' && rb[1].is_ascii_digit() {
        return None;
    }
    if rb.first() == Some(&b':') {
        if let Some((den, dlen, _)) = lex_number(&rest[1..]) {
            let after = rest[1 + dlen..].as_bytes();
            let continues = after.first().is_some_and(|b| b.is_ascii_alphanumeric())
                || (after.len() >= 2 && after[0] == b'.' && after[1].is_ascii_digit());
            if den > 0.0 && !continues {
                end += 1 + dlen;
                return Some(make(text, start, end, value / den, Dimension::Ratio, None));
            }
        }
        return None;
    }
    match unit_at(rest) {
        Some((UnitKind::Length(factor), ulen, _)) => {
            end += ulen;
            let magnitude = value * factor;
            let (conversion, conv_end) = match parenthetical(text, end, magnitude, start, tolerance) {
                Some((c, e)) => (Some(c), e),
                None => (None, end),
            };
            Some(make(text, start, conv_end, magnitude, Dimension::Length, conversion))
        }
        Some((UnitKind::Angle, ulen, _)) => {
            end += ulen;
            Some(make(text, start, end, value, Dimension::Angle, None))
        }
        Some((UnitKind::Percent, ulen, _)) => {
            end += ulen;
            Some(make(text, start, end, value / 100.0, Dimension::Ratio, None))
        }
        None => {
            if frac || rest.starts_with(|c: char| c.is_alphabetic()) {
                None
            } else {
                Some(make(text, start, end, value, Dimension::Count, None))
            }
        }
    }
}

fn parenthetical(
    text: &str,
    from: usize,
    magnitude: f64,
    quantity_start: usize,
    tolerance: &UnitTolerance,
) -> Option<(Conversion, usize)> {
    let rest = &text[from..];
    let trimmed = rest.trim_start_matches([' ', '\t']);
    let open = from + (rest.len() - trimmed.len());
    let inner = trimmed.strip_prefix('(')?;
    let num_start = open + 1;
    let (value, nlen, _) = lex_number(inner)?;
    let (kind, ulen, unit_text) = unit_at(&inner[nlen..])?;
    let UnitKind::Length(factor) = kind else {
        return None;
    };
    let close = num_start + nlen + ulen;
    if text.as_bytes().get(close) != Some(&b')') {
        return None;
    }
    let stated = value * factor;
    let deviation = (stated - magnitude).abs();
    let consistent = deviation <= tolerance.allowance(magnitude) + 1e-9;
    Some((
        Conversion {
            stated,
            deviation,
            consistent,
            number_range: (num_start - quantity_start, num_start + nlen - quantity_start),
            unit_text: String::from(unit_text),
        },
        close + 1,
    ))
}

fn make(
    text: &str,
    start: usize,
    end: usize,
    magnitude: f64,
    dimension: Dimension,
    conversion: Option<Conversion>,
) -> QuantityMatch {
    QuantityMatch {
        quantity: Quantity {
            magnitude,
            dimension,
            canonical_unit: dimension.canonical_unit(),
            original_text: String::from(&text[start..end]),
            conversion,
        },
        start,
        end,
    }
}

/// Parses the first quantity in `span` with the default tolerance.
pub fn parse_quantity(span: &str) -> Option<Quantity> {
    parse_quantity_with(span, &UnitTolerance::default())
}

pub fn parse_quantity_with(span: &str, tolerance: &UnitTolerance) -> Option<Quantity> {
    scan_quantities(span, tolerance).into_iter().next().map(|m| m.quantity)
}

/// Formats a magnitude with up to three decimals and no trailing zeros.
pub fn format_number(value: f64) -> String {
    let mut s = alloc::format!("{:.3}", value);
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}
