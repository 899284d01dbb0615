//! Pass/block filtering of candidate texts against the five concepts.

#[cfg(test)]
mod tests;

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::{judge_prompt, multi_perspective_prompt};
use crate::model::{DescriptionSource, HeadKind, Model, ModelError, Vocabulary};
use crate::{EthicalConcept, CONCEPT_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error("empty text")]
    EmptyText,
    #[error("invalid gate policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    RequireAll,
    RequireAny,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailAction {
    Block,
    Annotate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Block,
    Annotate,
    /// The input could not be judged at all.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatePolicy {
    pub mode: GateMode,
    /// Per-concept thresholds in canonical concept order.
    pub thresholds: [f64; CONCEPT_COUNT],
    /// Weighted mode only; non-negative, summing to 1.
    pub weights: [f64; CONCEPT_COUNT],
    /// Weighted mode only.
    pub global_threshold: f64,
    /// Compare with `>` instead of `>=`.
    pub strict: bool,
    pub fail_action: FailAction,
}

impl Default for GatePolicy {
    fn default() -> Self {
        GatePolicy {
            mode: GateMode::RequireAll,
            thresholds: [0.5; CONCEPT_COUNT],
            weights: [1.0 / CONCEPT_COUNT as f64; CONCEPT_COUNT],
            global_threshold: 0.5,
            strict: false,
            fail_action: FailAction::Block,
        }
    }
}

impl GatePolicy {
    pub fn validate(&self) -> Result<(), GateError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if let Some(i) = self.thresholds.iter().position(|t| !unit(*t)) {
            return Err(GateError::Policy(format!(
                "threshold for {} is {}, outside [0, 1]",
                EthicalConcept::ALL[i],
                self.thresholds[i]
            )));
        }
        if self.mode == GateMode::Weighted {
            if self.weights.iter().any(|w| w.is_nan() || *w < 0.0) {
                return Err(GateError::Policy("weights must be non-negative".into()));
            }
            let total: f64 = self.weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(GateError::Policy(format!("weights sum to {total}, not 1")));
            }
            if !unit(self.global_threshold) {
                return Err(GateError::Policy(format!("global threshold {} outside [0, 1]", self.global_threshold)));
            }
        }
        Ok(())
    }

    fn meets(&self, score: f64, threshold: f64) -> bool {
        if self.strict {
            score > threshold
        } else {
            score >= threshold
        }
    }

    fn failed(&self) -> Verdict {
        match self.fail_action {
            FailAction::Block => Verdict::Block,
            FailAction::Annotate => Verdict::Annotate,
        }
    }
}

/// Outcome of applying a policy to one score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ruling {
    pub verdict: Verdict,
    /// The rule that settled the verdict, e.g. `require_all:justice`.
    pub rule: String,
}

/// Applies `policy` to five scores in canonical concept order.
pub fn decide(scores: &[f64; CONCEPT_COUNT], policy: &GatePolicy) -> Ruling {
    let ruling = |pass: bool, rule: String| Ruling { verdict: if pass { Verdict::Pass } else { policy.failed() }, rule };
    match policy.mode {
        GateMode::RequireAll => {
            match (0..CONCEPT_COUNT).find(|&i| !policy.meets(scores[i], policy.thresholds[i])) {
                Some(i) => ruling(false, format!("require_all:{}", EthicalConcept::ALL[i])),
                None => ruling(true, "require_all".into()),
            }
        }
        GateMode::RequireAny => {
            match (0..CONCEPT_COUNT).find(|&i| policy.meets(scores[i], policy.thresholds[i])) {
                Some(i) => ruling(true, format!("require_any:{}", EthicalConcept::ALL[i])),
                None => ruling(false, "require_any:none".into()),
            }
        }
        GateMode::Weighted => {
            let total: f64 = scores.iter().zip(&policy.weights).map(|(s, w)| s * w).sum();
            ruling(policy.meets(total, policy.global_threshold), "weighted".into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub scores: [f64; CONCEPT_COUNT],
    /// Some stream was cut to the model's maximum length.
    pub truncated: bool,
}

/// Scores a text against every concept. A binary checkpoint runs one pass
/// per concept over that concept's question and description, scoring the
/// acceptable class; a multi-label checkpoint runs a single pass.
pub fn judge(model: &Model, vocab: &Vocabulary, text: &str) -> Result<Judgment, GateError> {
    if text.trim().is_empty() {
        return Err(GateError::EmptyText);
    }
    let mut scores = [0.0; CONCEPT_COUNT];
    let mut truncated = false;
    match model.config().head {
        HeadKind::BinarySoftmax => {
            for c in EthicalConcept::ALL {
                let input = model.prepare(vocab, &judge_prompt(c, text), DescriptionSource::Concept(c))?;
                truncated |= input.truncated();
                scores[c.index()] = model.probabilities(&input)?[1];
            }
        }
        HeadKind::MultilabelSigmoid => {
            let input = model.prepare(vocab, &multi_perspective_prompt(text), DescriptionSource::AllConcepts)?;
            truncated = input.truncated();
            scores.copy_from_slice(&model.probabilities(&input)?[..CONCEPT_COUNT]);
        }
    }
    Ok(Judgment { scores, truncated })
}
