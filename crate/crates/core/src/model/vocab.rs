use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ModelError;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
const SPECIALS: [&str; 4] = [PAD, UNK, CLS, SEP];

/// Word-level vocabulary. Ids are dense from zero and the four special
/// tokens occupy ids 0..4 in the order pad, unknown, class marker,
/// separator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

/// Token ids for one sequence, class marker first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenized {
    pub ids: Vec<usize>,
    /// `true` for real tokens, `false` for padding.
    pub mask: Vec<bool>,
    pub truncated: bool,
    /// Set when the input held no tokens at all.
    pub empty_input: bool,
}

impl Tokenized {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Appends pad tokens up to `len`.
    pub fn pad_to(mut self, len: usize) -> Self {
        while self.ids.len() < len {
            self.ids.push(Vocabulary::PAD_ID);
            self.mask.push(false);
        }
        self
    }
}

/// Lowercases and splits on whitespace, emitting every punctuation
/// character as its own token.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
        } else if ch.is_ascii_punctuation() || (!ch.is_alphanumeric() && !ch.is_whitespace()) {
            if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
            out.push(ch.to_lowercase().collect());
        } else {
            cur.extend(ch.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;
    pub const CLS_ID: usize = 2;
    pub const SEP_ID: usize = 3;

    /// Builds a vocabulary from a corpus, keeping words seen at least
    /// `min_count` times. Order: specials, then by descending frequency,
    /// ties broken lexicographically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for w in split_words(t) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count.max(1) && !SPECIALS.contains(&w.as_str()))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS.iter().map(|s| s.to_string()).chain(words.into_iter().map(|(w, _)| w));
        Self::from_tokens(tokens.collect()).expect("built vocabulary is well formed")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, ModelError> {
        for (id, special) in SPECIALS.iter().enumerate() {
            if tokens.get(id).map(String::as_str) != Some(*special) {
                return Err(ModelError::Vocabulary(format!("id {id} must be {special}")));
            }
        }
        let mut index = BTreeMap::new();
        for (id, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(ModelError::Vocabulary(format!("token {id} is empty or contains whitespace")));
            }
            if index.insert(t.clone(), id).is_some() {
                return Err(ModelError::Vocabulary(format!("duplicate token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Word ids of `text` without the class marker.
    pub fn word_ids(&self, text: &str) -> Vec<usize> {
        split_words(text).iter().map(|w| self.id(w)).collect()
    }

    /// Class marker followed by the word ids of `text`, cut to `max_len`.
    pub fn tokenize(&self, text: &str, max_len: usize) -> Result<Tokenized, ModelError> {
        if max_len < 2 {
            return Err(ModelError::Config(format!("max_len {max_len} must be at least 2")));
        }
        let words = self.word_ids(text);
        let empty_input = words.is_empty();
        let truncated = words.len() + 1 > max_len;
        let mut ids = Vec::with_capacity(max_len.min(words.len() + 1));
        ids.push(Self::CLS_ID);
        ids.extend(words.into_iter().take(max_len - 1));
        let mask = alloc::vec![true; ids.len()];
        Ok(Tokenized { ids, mask, truncated, empty_input })
    }

    /// 64-bit FNV-1a over the token list, one token per line.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(core::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
