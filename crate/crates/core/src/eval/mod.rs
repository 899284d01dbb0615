//! Accuracy, grouped exact match and samples F1, plus per-concept reports.

mod metrics;
mod report;

pub use metrics::{
    accuracy, all_correct, exact_match, exact_match_with, samples_f1, Gold, MultiGold, MultiPrediction, Prediction,
    DEFAULT_THRESHOLD,
};
pub use report::{
    evaluate, evaluate_multilabel, evaluate_predictions, predict, predict_multilabel, ConceptScore, MetricKind,
    MetricPlan, MetricReport, MultilabelReport, SplitReport,
};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("predictions and golds misaligned: {0}")]
    Alignment(String),
    #[error("example `{0}` belongs to no exact-match group")]
    Ungrouped(String),
    #[error("no examples to score")]
    Empty,
    #[error("split `{0}` has no examples")]
    MissingSplit(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
