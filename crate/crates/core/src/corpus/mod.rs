//! Ethics corpora: raw records, the QA template rewrite, dataset assembly
//! and annotation vote aggregation.

mod build;
mod multi;
mod record;
mod template;
mod votes;

pub use build::{build_qa_ethics, DatasetStats, Grouping, SplitCounts};
pub use multi::{LabelVectorError, MultiPerspectiveExample};
pub use record::{QAExample, RawRecord, Split};
pub use template::{
    judge_prompt, multi_perspective_prompt, strip_to_template, template_skeleton, transform,
    MULTI_PERSPECTIVE_QUESTION,
};
pub use votes::{aggregate_votes, RejectReason, VoteOutcome, VoteSheet};

use alloc::boxed::Box;
use alloc::string::String;

use crate::EthicalConcept;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("{concept} record violates invariant: {detail}")]
    Invariant {
        concept: EthicalConcept,
        detail: String,
    },
    #[error("record {index}: {source}")]
    AtRecord {
        index: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("invalid vote sheet `{sample_id}`: {detail}")]
    VoteSheet { sample_id: String, detail: String },
    #[error("invalid aggregation parameters: {0}")]
    Parameters(String),
}

impl CorpusError {
    pub(crate) fn invariant(concept: EthicalConcept, detail: impl Into<String>) -> Self {
        CorpusError::Invariant {
            concept,
            detail: detail.into(),
        }
    }
}
