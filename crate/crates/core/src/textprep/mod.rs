//! Text normalization, tokenization, emoji counting and the English-share
//! estimate used by the corpus filter.

pub mod emoji;

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::mbti::is_acronym;

const STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Ordered, non-empty tokens with the 16 type acronyms removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn extend(&mut self, other: TokenList) {
        self.0.extend(other.0);
    }
}

/// Emoji sequence → occurrence count.
pub type EmojiCounts = BTreeMap<String, u64>;

fn is_url(chunk: &str) -> bool {
    chunk.starts_with("http://") || chunk.starts_with("https://") || chunk.starts_with("www.")
}

fn is_email(chunk: &str) -> bool {
    match chunk.split_once('@') {
        Some((local, domain)) => {
            !local.is_empty() && !local.contains('#') && domain.contains('.') && !domain.starts_with('.')
        }
        None => false,
    }
}

fn clean_chunk(chunk: &str) -> String {
    let kept: String = chunk
        .chars()
        .filter(|&c| c.is_alphabetic() || emoji::is_emoji_char(c) || matches!(c, '#' | '@' | '_'))
        .collect();
    let mut chars = kept.chars();
    let marker = match (chars.next(), chars.clone().find(|&c| c != '_')) {
        (Some(m @ ('#' | '@')), Some(c)) if c.is_alphabetic() => Some(m),
        _ => None,
    };
    match marker {
        Some(m) => {
            let body: String = kept[1..].chars().filter(|&c| !matches!(c, '#' | '@')).collect();
            format!("{m}{body}")
        }
        None => kept.chars().filter(|&c| !matches!(c, '#' | '@' | '_')).collect(),
    }
}

/// Lowercases and strips URLs, e-mail addresses, punctuation and digits.
///
/// Emoji are kept. A leading `#` or `@` is kept when followed by a letter so
/// hashtags and mentions survive to tokenization. Text is NFC-normalized.
pub fn clean_text(raw: &str) -> String {
    let lowered: String = raw.nfc().collect::<String>().to_lowercase().nfc().collect();
    let mut out = String::with_capacity(lowered.len());
    for chunk in lowered.split_whitespace() {
        if is_url(chunk) || is_email(chunk) {
            continue;
        }
        let cleaned = clean_chunk(chunk);
        if cleaned.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&cleaned);
    }
    out
}

fn push_token(tokens: &mut Vec<String>, tok: &str) {
    let tok = tok.trim_matches(emoji::is_component);
    if tok.is_empty() || is_acronym(tok) || tok.chars().all(|c| c.is_ascii_digit()) {
        return;
    }
    tokens.push(tok.to_string());
}

/// Splits cleaned text on whitespace, separating each emoji sequence into
/// its own token. Hashtags and mentions stay whole.
pub fn tokenize(cleaned: &str) -> TokenList {
    let mut tokens = Vec::new();
    for chunk in cleaned.split_whitespace() {
        let mut text_start = 0;
        let mut pos = 0;
        while pos < chunk.len() {
            if let Some(len) = emoji::sequence_len(chunk, pos) {
                push_token(&mut tokens, &chunk[text_start..pos]);
                tokens.push(chunk[pos..pos + len].to_string());
                pos += len;
                text_start = pos;
            } else {
                pos += chunk[pos..].chars().next().map_or(1, char::len_utf8);
            }
        }
        push_token(&mut tokens, &chunk[text_start..]);
    }
    TokenList(tokens)
}

/// `tokenize(clean_text(raw))`.
pub fn clean_tokens(raw: &str) -> TokenList {
    tokenize(&clean_text(raw))
}

/// Counts emoji sequences across posts; joined sequences count once.
pub fn emoji_frequencies<S: AsRef<str>>(posts: &[S]) -> EmojiCounts {
    let mut counts = EmojiCounts::new();
    for p in posts {
        let text: String = p.as_ref().nfc().collect();
        for seq in emoji::sequences(&text) {
            *counts.entry(seq.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-text language decision.
pub trait LanguageDetector: Sync {
    fn is_english(&self, text: &str) -> bool;
}

impl<F: Fn(&str) -> bool + Sync> LanguageDetector for F {
    fn is_english(&self, text: &str) -> bool {
        self(text)
    }
}

fn default_stopwords() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| parse_word_list(STOPWORDS))
}

/// One word per line, `#` comments, lowercased.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Labels a text English when at least `min_hits` of its words are on a
/// function-word list.
#[derive(Debug, Clone)]
pub struct StopwordDetector {
    words: Option<HashSet<String>>,
    pub min_hits: usize,
}

impl Default for StopwordDetector {
    fn default() -> Self {
        StopwordDetector {
            words: None,
            min_hits: 2,
        }
    }
}

impl StopwordDetector {
    pub fn with_words(words: HashSet<String>, min_hits: usize) -> Self {
        StopwordDetector {
            words: Some(words),
            min_hits,
        }
    }

    fn words(&self) -> &HashSet<String> {
        self.words.as_ref().unwrap_or_else(|| default_stopwords())
    }
}

impl LanguageDetector for StopwordDetector {
    fn is_english(&self, text: &str) -> bool {
        let words = self.words();
        let lower = text.to_lowercase();
        let hits = lower
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| words.contains(*w))
            .take(self.min_hits)
            .count();
        hits >= self.min_hits
    }
}

/// Share of posts the detector labels English.
pub fn english_fraction<S: AsRef<str>>(posts: &[S], detector: &dyn LanguageDetector) -> Result<f64> {
    if posts.is_empty() {
        return Err(Error::UndefinedInput("english fraction of zero posts".into()));
    }
    let english = posts.iter().filter(|p| detector.is_english(p.as_ref())).count();
    Ok(english as f64 / posts.len() as f64)
}
