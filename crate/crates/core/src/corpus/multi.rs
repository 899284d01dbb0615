use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::CONCEPT_COUNT;

/// A scenario judged under all five concepts at once. `labels[i]` is 1 when
/// the text is acceptable under the concept with canonical index `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiPerspectiveExample {
    pub id: String,
    pub text: String,
    pub labels: [u8; CONCEPT_COUNT],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelVectorError {
    #[error("expected {CONCEPT_COUNT} labels, found {0}")]
    Length(usize),
    #[error("label {value} at slot {slot} is not 0 or 1")]
    NotBinary { slot: usize, value: i64 },
}

impl MultiPerspectiveExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, labels: &[i64]) -> Result<Self, LabelVectorError> {
        if labels.len() != CONCEPT_COUNT {
            return Err(LabelVectorError::Length(labels.len()));
        }
        let mut out = [0u8; CONCEPT_COUNT];
        for (slot, (&value, dst)) in labels.iter().zip(out.iter_mut()).enumerate() {
            *dst = match value {
                0 => 0,
                1 => 1,
                _ => return Err(LabelVectorError::NotBinary { slot, value }),
            };
        }
        Ok(MultiPerspectiveExample {
            id: id.into(),
            text: text.into(),
            labels: out,
        })
    }
}
