use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::EthicalConcept;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    HardTest,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::HardTest];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::HardTest => "hard_test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "hard_test" | "hard-test" | "test_hard" | "hard" => Ok(Split::HardTest),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One row of an upstream ethics file, before templating.
///
/// `excuse` is set only for deontology, `pair_second` only for
/// utilitarianism (where `scenario` holds the first sentence and the upstream
/// file carries no label), and `trait_term` only for virtue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub concept: EthicalConcept,
    pub label: Option<u8>,
    pub scenario: String,
    pub excuse: Option<String>,
    pub pair_second: Option<String>,
    pub trait_term: Option<String>,
    pub split: Split,
    /// Zero-based data row index within the source file.
    pub row: usize,
    /// Explicit exact-match group taken from a mapped source column.
    pub group: Option<String>,
}

impl RawRecord {
    /// A record with only the common fields set.
    pub fn new(concept: EthicalConcept, split: Split, row: usize, scenario: impl Into<String>) -> Self {
        RawRecord {
            concept,
            label: None,
            scenario: scenario.into(),
            excuse: None,
            pair_second: None,
            trait_term: None,
            split,
            row,
            group: None,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_excuse(mut self, excuse: impl Into<String>) -> Self {
        self.excuse = Some(excuse.into());
        self
    }

    pub fn with_pair_second(mut self, second: impl Into<String>) -> Self {
        self.pair_second = Some(second.into());
        self
    }

    pub fn with_trait(mut self, term: impl Into<String>) -> Self {
        self.trait_term = Some(term.into());
        self
    }

    /// `<concept>:<split>:<row>`
    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.concept, self.split, self.row)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let c = self.concept;
        if self.scenario.trim().is_empty() {
            return Err(CorpusError::invariant(c, "scenario is empty"));
        }
        let slot = |present: bool, wanted: bool, name: &str| -> Result<(), CorpusError> {
            match (present, wanted) {
                (true, false) => Err(CorpusError::invariant(c, format!("unexpected {name}"))),
                (false, true) => Err(CorpusError::invariant(c, format!("missing {name}"))),
                _ => Ok(()),
            }
        };
        slot(self.excuse.is_some(), c == EthicalConcept::Deontology, "excuse")?;
        slot(self.pair_second.is_some(), c == EthicalConcept::Utilitarianism, "second sentence")?;
        slot(self.trait_term.is_some(), c == EthicalConcept::Virtue, "trait")?;
        for (name, text) in [
            ("excuse", &self.excuse),
            ("second sentence", &self.pair_second),
            ("trait", &self.trait_term),
        ] {
            if matches!(text, Some(t) if t.trim().is_empty()) {
                return Err(CorpusError::invariant(c, format!("{name} is empty")));
            }
        }
        match (c, self.label) {
            (EthicalConcept::Utilitarianism, _) => Ok(()),
            (_, None) => Err(CorpusError::invariant(c, "missing label")),
            (_, Some(l)) if l > 1 => Err(CorpusError::invariant(c, format!("label {l} not in {{0,1}}"))),
            _ => Ok(()),
        }
    }

    /// Whitespace token count of all raw text fragments.
    pub fn raw_token_len(&self) -> usize {
        [
            Some(&self.scenario),
            self.excuse.as_ref(),
            self.pair_second.as_ref(),
            self.trait_term.as_ref(),
        ]
        .into_iter()
        .flatten()
        .map(|t| t.split_whitespace().count())
        .sum()
    }
}

/// A templated question with its binary "is it compliant" label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub concept: EthicalConcept,
    pub text: String,
    pub label: u8,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swapped: Option<bool>,
}

impl QAExample {
    pub fn token_len(&self) -> usize {
        self.text.split_whitespace().count()
    }
}
