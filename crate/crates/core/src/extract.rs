//! Label extraction from free-form completions.
//!
//! Two rules, tried in order:
//! 1. the earliest double-quoted label (`"Bad"`, `"Not bad."`);
//! 2. the earliest bare whole-word label, case-insensitive.
//!
//! At equal positions the longest surface form wins, so `Not bad` is never
//! read as `Bad`.

use serde::{Deserialize, Serialize};

use crate::task::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionRule {
    QuotedMatch,
    BareMatch,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    /// Canonical label.
    pub label: String,
    pub rule: ExtractionRule,
    /// Byte range of the matched surface form.
    pub span: (usize, usize),
}

/// One label occurrence found by [`label_occurrences`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub label: String,
    pub span: (usize, usize),
}

const OPEN_QUOTES: [char; 2] = ['"', '\u{201c}'];
const CLOSE_QUOTES: [char; 2] = ['"', '\u{201d}'];
const INNER_PUNCT: [char; 6] = ['.', ',', '!', '?', ';', ':'];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Length in bytes of `form` at the start of `text`, compared case-insensitively.
fn match_len(text: &str, form: &str) -> Option<usize> {
    let mut t = text.char_indices();
    for fc in form.chars() {
        let (_, tc) = t.next()?;
        if !tc.to_lowercase().eq(fc.to_lowercase()) {
            return None;
        }
    }
    Some(t.next().map(|(i, _)| i).unwrap_or(text.len()))
}

/// Longest lexicon form at the start of `text`, returning (label, byte length).
fn longest_form_at<'a>(
    text: &str,
    lexicon: &'a Lexicon,
    accept: impl Fn(usize) -> bool,
) -> Option<(&'a str, usize)> {
    lexicon
        .forms()
        .iter()
        .filter_map(|f| match_len(text, &f.form).map(|n| (f.label.as_str(), n)))
        .filter(|&(_, n)| accept(n))
        .max_by_key(|&(_, n)| n)
}

fn quoted_match(text: &str, lexicon: &Lexicon) -> Option<Extraction> {
    for (i, c) in text.char_indices() {
        if !OPEN_QUOTES.contains(&c) {
            continue;
        }
        let start = i + c.len_utf8();
        let inner = &text[start..];
        let closes = |n: usize| {
            let rest = inner[n..].trim_start_matches(INNER_PUNCT);
            rest.starts_with(CLOSE_QUOTES)
        };
        if let Some((label, n)) = longest_form_at(inner, lexicon, closes) {
            return Some(Extraction {
                label: label.to_string(),
                rule: ExtractionRule::QuotedMatch,
                span: (start, start + n),
            });
        }
    }
    None
}

fn bare_at(text: &str, i: usize, lexicon: &Lexicon) -> Option<(String, usize)> {
    if text[..i].chars().next_back().is_some_and(is_word_char) {
        return None;
    }
    let rest = &text[i..];
    let whole_word = |n: usize| !rest[n..].chars().next().is_some_and(is_word_char);
    longest_form_at(rest, lexicon, whole_word).map(|(l, n)| (l.to_string(), n))
}

fn bare_match(text: &str, lexicon: &Lexicon) -> Option<Extraction> {
    text.char_indices().find_map(|(i, _)| {
        bare_at(text, i, lexicon).map(|(label, n)| Extraction {
            label,
            rule: ExtractionRule::BareMatch,
            span: (i, i + n),
        })
    })
}

/// Finds the label a completion commits to, or `None` when no label occurs.
pub fn extract_label(text: &str, lexicon: &Lexicon) -> Option<Extraction> {
    quoted_match(text, lexicon).or_else(|| bare_match(text, lexicon))
}

/// All non-overlapping whole-word label occurrences, scanned left to right
/// with the longest form taken at each position.
pub fn label_occurrences(text: &str, lexicon: &Lexicon) -> Vec<Occurrence> {
    let mut out = Vec::new();
    let mut next_free = 0;
    for (i, _) in text.char_indices() {
        if i < next_free {
            continue;
        }
        if let Some((label, n)) = bare_at(text, i, lexicon) {
            out.push(Occurrence {
                label,
                span: (i, i + n),
            });
            next_free = i + n;
        }
    }
    out
}
