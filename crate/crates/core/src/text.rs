//! Normalization and literal detection for the language of data.

use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use unicode_normalization::UnicodeNormalization;

/// Case-folds and NFC-normalizes a lemma, collapsing internal whitespace to
/// single spaces. Accents are preserved.
pub fn fold_lemma(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    nfc.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Trims and NFC-normalizes a cell value without changing its case.
pub fn normalize_cell(raw: &str) -> String {
    raw.trim().nfc().collect()
}

pub fn is_integer(s: &str) -> bool {
    s.parse::<i64>().is_ok()
}

pub fn is_number(s: &str) -> bool {
    let s = s.trim();
    if s.is_empty() {
        return false;
    }
    // Reject things Rust's float parser accepts but data rarely means: inf, nan, 1e5.
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let mut seen_dot = false;
    let mut seen_digit = false;
    for ch in body.chars() {
        match ch {
            '0'..='9' => seen_digit = true,
            '.' if !seen_dot => seen_dot = true,
            _ => return false,
        }
    }
    seen_digit
}

/// Parses ISO `yyyy-mm-dd` or `dd/mm/yyyy`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let iso = date_iso_re();
    let eu = date_eu_re();
    if iso.is_match(s) {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
    } else if eu.is_match(s) {
        NaiveDate::parse_from_str(s, "%d/%m/%Y").ok()
    } else {
        None
    }
}

pub fn parse_boolean(s: &str) -> Option<bool> {
    match s.trim().to_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// All-caps alphanumeric code of length >= 5 containing at least one digit,
/// e.g. a licence plate or a VIN.
pub fn is_identifier_literal(s: &str) -> bool {
    let s = s.trim();
    s.chars().count() >= 5
        && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        && s.chars().any(|c| c.is_ascii_digit())
}

/// True for values that are data rather than language: numbers, dates and
/// identifier codes. These never become terms.
pub fn is_literal(s: &str) -> bool {
    is_number(s) || parse_date(s).is_some() || is_identifier_literal(s)
}

/// Splits `prefix:local` where the prefix looks like a namespace prefix.
pub fn split_qualified(s: &str) -> Option<(&str, &str)> {
    let caps = qualified_re().captures(s.trim())?;
    let prefix = caps.get(1)?.as_str();
    let local = caps.get(2)?.as_str();
    Some((prefix, local))
}

fn date_iso_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d{4}-\d{2}-\d{2}$").unwrap())
}

fn date_eu_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d{2}/\d{2}/\d{4}$").unwrap())
}

fn qualified_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z][A-Za-z0-9_-]*):(\S.*)$").unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_keeps_accents() {
        assert_eq!(fold_lemma("Velocità"), "velocità");
        assert_ne!(fold_lemma("Velocità"), fold_lemma("Velocita"));
        assert_eq!(fold_lemma("  Tipo   di  corpo "), "tipo di corpo");
        // decomposed e + combining acute folds to the composed form
        assert_eq!(fold_lemma("Coupe\u{301}"), "coupé");
    }

    #[test]
    fn literals() {
        assert!(is_literal("158"));
        assert!(is_literal("155.0"));
        assert!(is_literal("-3"));
        assert!(is_literal("2020-11-25"));
        assert!(is_literal("25/11/2020"));
        assert!(is_literal("FP372MK"));
        assert!(!is_literal("Coupé"));
        assert!(!is_literal("Petrol"));
        assert!(!is_literal("ABCDE"));
        assert!(!is_literal("AB12"));
        assert!(!is_literal("nan"));
        assert!(!is_literal("2020-13-45"));
    }

    #[test]
    fn qualified_names() {
        assert_eq!(split_qualified("schema:speed"), Some(("schema", "speed")));
        assert_eq!(split_qualified("vso:VIN"), Some(("vso", "VIN")));
        assert_eq!(split_qualified("Tipo di corpo"), None);
        assert_eq!(split_qualified("12:30"), None);
    }
}
