//! Extracting ratings and preferences from free-form reviewer replies.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::types::{Choice, PromptSetting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentKind {
    Rating,
    Preference,
    Unparseable,
}

/// A reviewer reply together with whatever could be read out of it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedJudgment {
    pub kind: JudgmentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<Choice>,
    pub raw_text: String,
}

impl ParsedJudgment {
    pub fn rating(value: u8, raw_text: impl Into<String>) -> Self {
        Self {
            kind: JudgmentKind::Rating,
            rating: Some(value),
            preference: None,
            raw_text: raw_text.into(),
        }
    }

    pub fn preference(choice: Choice, raw_text: impl Into<String>) -> Self {
        Self {
            kind: JudgmentKind::Preference,
            rating: None,
            preference: Some(choice),
            raw_text: raw_text.into(),
        }
    }

    pub fn unparseable(raw_text: impl Into<String>) -> Self {
        Self {
            kind: JudgmentKind::Unparseable,
            rating: None,
            preference: None,
            raw_text: raw_text.into(),
        }
    }

    pub fn is_parseable(&self) -> bool {
        self.kind != JudgmentKind::Unparseable
    }

    /// Whether this judgment is of the form the setting asks for.
    pub fn matches_setting(&self, setting: PromptSetting) -> bool {
        match (self.kind, setting.rating_range()) {
            (JudgmentKind::Unparseable, _) => true,
            (JudgmentKind::Preference, None) => self.preference.is_some(),
            (JudgmentKind::Rating, Some((lo, hi))) => self.rating.is_some_and(|r| (lo..=hi).contains(&r)),
            _ => false,
        }
    }
}

/// Reads a judgment out of a reply.
///
/// Pairwise: the first standalone `one` or `two`, case-insensitive.
/// Pointwise: the first number inside the setting's range, decimals truncated
/// toward zero. Anything else is [`JudgmentKind::Unparseable`].
pub fn parse_judgment(raw: &str, setting: PromptSetting) -> ParsedJudgment {
    let found = match setting.rating_range() {
        None => first_choice(raw).map(|c| ParsedJudgment::preference(c, raw)),
        Some((lo, hi)) => first_rating_in(raw, lo, hi).map(|r| ParsedJudgment::rating(r, raw)),
    };
    found.unwrap_or_else(|| ParsedJudgment::unparseable(raw.to_string()))
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn first_choice(raw: &str) -> Option<Choice> {
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !is_word_byte(bytes[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && is_word_byte(bytes[i]) {
            i += 1;
        }
        let word = &bytes[start..i];
        if word.eq_ignore_ascii_case(b"one") {
            return Some(Choice::One);
        }
        if word.eq_ignore_ascii_case(b"two") {
            return Some(Choice::Two);
        }
    }
    None
}

fn first_rating_in(raw: &str, lo: u8, hi: u8) -> Option<u8> {
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() || (i > 0 && bytes[i - 1].is_ascii_alphabetic()) {
            i += 1;
            continue;
        }
        let negative = i > 0 && bytes[i - 1] == b'-';
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let digits = &raw[start..i];
        // Skip a fractional part so "4.7" is read as 4, not 4 then 7.
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if negative {
            continue;
        }
        let trimmed = digits.trim_start_matches('0');
        if trimmed.len() > 3 {
            continue;
        }
        let value: u16 = if trimmed.is_empty() { 0 } else { trimmed.parse().ok()? };
        if (u16::from(lo)..=u16::from(hi)).contains(&value) {
            return Some(value as u8);
        }
    }
    None
}
