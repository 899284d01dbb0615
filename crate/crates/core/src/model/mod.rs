//! The judgment model: tokenizer, shared self-attention encoder, the
//! cross-attention reasoning layers over a text stream and a concept
//! description stream, mean pooling and the classification heads.

mod network;
mod params;
mod vocab;

pub use network::{AttentionRecord, DescriptionSource, DualStreamState, EncodedInput, Model, Pass};
pub use params::{Param, ParamGroup, ParamSet};
pub use vocab::{split_words, Tokenized, Vocabulary, CLS, PAD, SEP, UNK};

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which pipeline a forward pass runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Both streams through the encoder, then the cross-attention stack.
    Ealm,
    /// One stream over `text [SEP] description`.
    ConcatDescriptions,
    /// One stream over the text alone.
    TextOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Two logits, softmax over {unacceptable, acceptable}.
    BinarySoftmax,
    /// Five independent sigmoid logits in canonical concept order.
    MultilabelSigmoid,
}

impl HeadKind {
    pub fn width(self) -> usize {
        match self {
            HeadKind::BinarySoftmax => 2,
            HeadKind::MultilabelSigmoid => crate::CONCEPT_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Self-attention encoder blocks shared by both streams.
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff_size: usize,
    /// Longest text stream, class marker included.
    pub max_text_len: usize,
    /// Longest description stream, class marker included.
    pub max_des_len: usize,
    pub vocab_size: usize,
    pub ca_layers: usize,
    pub mode: Mode,
    pub head: HeadKind,
    /// Seed for parameter initialisation.
    pub init_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 2,
            hidden: 32,
            heads: 4,
            ff_size: 64,
            max_text_len: 64,
            max_des_len: 64,
            vocab_size: 0,
            ca_layers: 2,
            mode: Mode::Ealm,
            head: HeadKind::BinarySoftmax,
            init_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn head_size(&self) -> usize {
        self.hidden / self.heads
    }

    /// Rows of the position table: long enough for the concatenated
    /// single-stream input.
    pub fn positions(&self) -> usize {
        self.max_text_len + self.max_des_len
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.hidden == 0 || self.heads == 0 || self.ff_size == 0 {
            return bad(format!(
                "hidden ({}), heads ({}) and ff_size ({}) must be positive",
                self.hidden, self.heads, self.ff_size
            ));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad(format!("hidden {} not divisible by heads {}", self.hidden, self.heads));
        }
        if self.max_text_len < 2 || self.max_des_len < 2 {
            return bad(format!(
                "sequence limits ({}, {}) must be at least 2",
                self.max_text_len, self.max_des_len
            ));
        }
        if self.vocab_size < 4 {
            return bad(format!("vocab_size {} smaller than the special tokens", self.vocab_size));
        }
        Ok(())
    }
}
