//! Post normalization: anonymization, retweet stripping, emoji removal,
//! hashtag splitting, whitespace cleanup, language filtering and
//! offset-exact tokenization.

use std::borrow::Cow;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDateTime, Utc};
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const USER_PLACEHOLDER: &str = "(user)";
pub const URL_PLACEHOLDER: &str = "(url)";
pub const EMAIL_PLACEHOLDER: &str = "(email)";
pub const PHONE_PLACEHOLDER: &str = "(phone)";

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());
static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+").unwrap());
static HANDLE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
// Digit groups of 2-4, 3-4 and 3-5 with optional country code and single
// separators; dates like 2020-05-15 and counts like 85,940 do not match.
static PHONE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\+\d{1,3}[ .-]?)?(?:\(\d{2,4}\)|\b\d{2,4})[ .-]?\d{3,4}[ .-]?\d{3,5}\b").unwrap()
});
static RETWEET_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*RT \(user\):").unwrap());
static EMOJI_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"[\p{Extended_Pictographic}\p{Emoji_Modifier}\p{Regional_Indicator}",
        r"\x{FE0E}\x{FE0F}\x{200D}\x{20E3}\x{E0020}-\x{E007F}]"
    ))
    .unwrap()
});
static HASHTAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\w+").unwrap());

/// Which personal-information pattern a residue scan found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiiKind {
    Url,
    Email,
    Handle,
    Phone,
}

/// Scans for any handle, URL, email or phone number left in `text`.
pub fn find_pii(text: &str) -> Option<(PiiKind, String)> {
    [
        (PiiKind::Url, &*URL_RE),
        (PiiKind::Email, &*EMAIL_RE),
        (PiiKind::Handle, &*HANDLE_RE),
        (PiiKind::Phone, &*PHONE_RE),
    ]
    .into_iter()
    .find_map(|(kind, re)| re.find(text).map(|m| (kind, m.as_str().to_string())))
}

pub fn contains_emoji(text: &str) -> bool {
    EMOJI_RE.is_match(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DropReason {
    #[serde(rename = "non-english")]
    NonEnglish,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NonEnglish => "non-english",
        }
    }
}

/// A whitespace-delimited token with 0-based half-open character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(String, usize, usize)", into = "(String, usize, usize)")]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl From<(String, usize, usize)> for Token {
    fn from((surface, start, end): (String, usize, usize)) -> Self {
        Token { surface, start, end }
    }
}

impl From<Token> for (String, usize, usize) {
    fn from(t: Token) -> Self {
        (t.surface, t.start, t.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanPost {
    pub id: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<DropReason>,
}

impl CleanPost {
    pub fn is_dropped(&self) -> bool {
        self.dropped.is_some()
    }

    /// View the normalized post as raw input again.
    pub fn as_raw(&self) -> RawPost {
        RawPost {
            id: self.id.clone(),
            created_at: self.created_at,
            text: self.text.clone(),
            lang: self.lang.clone(),
        }
    }
}

/// Switches for the individual normalization steps. All on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationPolicy {
    pub anonymize: bool,
    pub strip_retweets: bool,
    pub remove_emoji: bool,
    pub split_hashtags: bool,
    pub english_only: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            anonymize: true,
            strip_retweets: true,
            remove_emoji: true,
            split_hashtags: true,
            english_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HashtagError {
    #[error("hashtag {0:?} does not start with '#'")]
    MissingMarker(String),
    #[error("hashtag has no body")]
    EmptyBody,
}

/// Normalizes one post.
///
/// The steps run in order: anonymize (URLs, emails, handles, phone numbers),
/// strip a leading `RT (user):`, remove emoji, split hashtags into
/// `#(w1 w2)`, collapse whitespace. Removing emoji can splice together a new
/// pattern (`http😀://` becomes `http://`), so the sequence repeats until the
/// text stops changing; each pass either leaves the text untouched or
/// consumes an emoji, a retweet prefix or a pattern, so this terminates.
pub fn normalize_post(raw: &RawPost, policy: &NormalizationPolicy) -> CleanPost {
    let mut text = normalize_pass(&raw.text, policy);
    loop {
        let next = normalize_pass(&text, policy);
        if next == text {
            break;
        }
        text = next;
    }

    let dropped = match &raw.lang {
        Some(lang) if policy.english_only && !is_english(lang) => Some(DropReason::NonEnglish),
        _ => None,
    };

    CleanPost {
        id: raw.id.clone(),
        created_at: raw.created_at,
        tokens: tokenize(&text),
        text,
        lang: raw.lang.clone(),
        dropped,
    }
}

fn normalize_pass(text: &str, policy: &NormalizationPolicy) -> String {
    let mut text: Cow<'_, str> = Cow::Borrowed(text);
    if policy.anonymize {
        text = Cow::Owned(anonymize(&text));
    }
    if policy.strip_retweets {
        if let Some(m) = RETWEET_RE.find(&text) {
            text = Cow::Owned(text[m.end()..].to_string());
        }
    }
    if policy.remove_emoji {
        text = Cow::Owned(EMOJI_RE.replace_all(&text, "").into_owned());
    }
    if policy.split_hashtags {
        text = Cow::Owned(render_hashtags(&text));
    }
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Replaces URLs, emails, handles and phone numbers with placeholders.
pub fn anonymize(text: &str) -> String {
    let text = URL_RE.replace_all(text, URL_PLACEHOLDER);
    let text = EMAIL_RE.replace_all(&text, EMAIL_PLACEHOLDER);
    let text = HANDLE_RE.replace_all(&text, USER_PLACEHOLDER);
    PHONE_RE.replace_all(&text, PHONE_PLACEHOLDER).into_owned()
}

fn render_hashtags(text: &str) -> String {
    HASHTAG_RE
        .replace_all(text, |caps: &Captures<'_>| {
            let tag = &caps[0];
            match split_hashtag(tag) {
                Ok(words) if !words.is_empty() => format!("#({})", words.join(" ")),
                _ => tag.to_string(),
            }
        })
        .into_owned()
}

fn is_english(lang: &str) -> bool {
    lang.split(['-', '_'])
        .next()
        .is_some_and(|primary| primary.eq_ignore_ascii_case("en"))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Digit,
    Letter,
}

fn char_class(c: char) -> CharClass {
    if c.is_numeric() {
        CharClass::Digit
    } else {
        CharClass::Letter
    }
}

fn is_tag_separator(c: char) -> bool {
    c == '_' || c.is_whitespace() || c.is_ascii_punctuation()
}

/// Splits a hashtag into lowercase words at lower→upper case changes,
/// letter↔digit changes and underscores.
pub fn split_hashtag(tag: &str) -> Result<Vec<String>, HashtagError> {
    let body = tag
        .strip_prefix('#')
        .ok_or_else(|| HashtagError::MissingMarker(tag.to_string()))?;
    if body.is_empty() {
        return Err(HashtagError::EmptyBody);
    }

    let mut words = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for c in body.chars() {
        if is_tag_separator(c) {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let case_break = p.is_lowercase() && c.is_uppercase();
            if case_break || char_class(p) != char_class(c) {
                words.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
        prev = Some(c);
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words.into_iter().map(|w| w.to_lowercase()).collect())
}

/// Splits on Unicode whitespace. Offsets are character offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (char start, byte start)
    let mut char_pos = 0;
    for (byte_pos, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some((start, byte_start)) = current.take() {
                tokens.push(Token {
                    surface: text[byte_start..byte_pos].to_string(),
                    start,
                    end: char_pos,
                });
            }
        } else if current.is_none() {
            current = Some((char_pos, byte_pos));
        }
        char_pos += 1;
    }
    if let Some((start, byte_start)) = current {
        tokens.push(Token {
            surface: text[byte_start..].to_string(),
            start,
            end: char_pos,
        });
    }
    tokens
}

/// ISO-8601 timestamps at second precision. Accepts RFC 3339 with any offset
/// or a naive `YYYY-MM-DDTHH:MM:SS` (read as UTC); always writes `...Z`.
pub mod timestamp {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn parse(s: &str) -> Result<DateTime<Utc>, String> {
        let parsed = DateTime::parse_from_rfc3339(s)
            .map(|dt| dt.with_timezone(&Utc))
            .or_else(|_| {
                NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").map(|n| n.and_utc())
            })
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").map(|n| n.and_utc()))
            .map_err(|_| format!("invalid ISO-8601 timestamp {s:?}"))?;
        Ok(DateTime::from_timestamp(parsed.timestamp(), 0).expect("in range"))
    }

    pub fn format(dt: &DateTime<Utc>) -> String {
        dt.format(FORMAT).to_string()
    }

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(dt))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
