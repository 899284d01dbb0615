use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CorpusError, MultiPerspectiveExample};
use crate::{EthicalConcept, CONCEPT_COUNT};

/// Raw annotation for one generated scenario: one row per annotator, one
/// acceptable (1) / unacceptable (0) judgment per concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteSheet {
    pub sample_id: String,
    pub text: String,
    pub votes: Vec<[u8; CONCEPT_COUNT]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    NoVotes,
    TooFewVotes { count: usize, min_votes: usize },
    LowAgreement { concept: EthicalConcept, agreement: f64 },
}

impl core::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RejectReason::NoVotes => f.write_str("no votes"),
            RejectReason::TooFewVotes { count, min_votes } => {
                write!(f, "{count} votes, at least {min_votes} required")
            }
            RejectReason::LowAgreement { concept, agreement } => {
                write!(f, "{concept} agreement {agreement:.3} below threshold")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VoteOutcome {
    Accepted(MultiPerspectiveExample),
    Rejected(RejectReason),
}

impl VoteOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, VoteOutcome::Accepted(_))
    }
}

/// Accepts a sheet when it has at least `min_votes` rows and, for every
/// concept, the majority side holds at least `min_agreement` of the votes.
/// Accepted labels are the per-concept majority.
pub fn aggregate_votes(sheet: &VoteSheet, min_votes: usize, min_agreement: f64) -> Result<VoteOutcome, CorpusError> {
    if min_votes == 0 {
        return Err(CorpusError::Parameters("min_votes must be at least 1".into()));
    }
    if !(min_agreement > 0.0 && min_agreement <= 1.0) {
        return Err(CorpusError::Parameters(format!("min_agreement {min_agreement} outside (0, 1]")));
    }
    for (row, vote) in sheet.votes.iter().enumerate() {
        if let Some(v) = vote.iter().find(|v| **v > 1) {
            return Err(CorpusError::VoteSheet {
                sample_id: sheet.sample_id.clone(),
                detail: format!("vote row {row} holds non-binary value {v}"),
            });
        }
    }

    let n = sheet.votes.len();
    if n == 0 {
        return Ok(VoteOutcome::Rejected(RejectReason::NoVotes));
    }
    if n < min_votes {
        return Ok(VoteOutcome::Rejected(RejectReason::TooFewVotes { count: n, min_votes }));
    }

    let mut labels = [0u8; CONCEPT_COUNT];
    for concept in EthicalConcept::ALL {
        let ones = sheet.votes.iter().filter(|v| v[concept.index()] == 1).count();
        let majority = ones.max(n - ones);
        // ties resolve to unacceptable
        labels[concept.index()] = u8::from(ones > n - ones);
        // integer-scaled comparison so 18/20 meets 0.9 exactly
        if (majority as f64) < min_agreement * n as f64 - 1e-9 {
            return Ok(VoteOutcome::Rejected(RejectReason::LowAgreement {
                concept,
                agreement: majority as f64 / n as f64,
            }));
        }
    }
    Ok(VoteOutcome::Accepted(MultiPerspectiveExample {
        id: sheet.sample_id.clone(),
        text: sheet.text.clone(),
        labels,
    }))
}
