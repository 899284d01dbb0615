use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::CONCEPT_COUNT;

/// Sigmoid score at or above which a multilabel slot is predicted positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Binary prediction: `label` is the argmax of the two class scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: u8,
    pub scores: [f64; 2],
}

impl Prediction {
    /// Ties go to class 0.
    pub fn from_scores(id: impl Into<String>, scores: [f64; 2]) -> Self {
        Prediction { id: id.into(), label: u8::from(scores[1] > scores[0]), scores }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPrediction {
    pub id: String,
    pub labels: [u8; CONCEPT_COUNT],
    pub scores: [f64; CONCEPT_COUNT],
}

impl MultiPrediction {
    pub fn from_scores(id: impl Into<String>, scores: [f64; CONCEPT_COUNT], threshold: f64) -> Self {
        MultiPrediction { id: id.into(), labels: scores.map(|s| u8::from(s >= threshold)), scores }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    pub id: String,
    pub label: u8,
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiGold {
    pub id: String,
    pub labels: [u8; CONCEPT_COUNT],
}

fn align<'a, P, G>(
    preds: &'a [P],
    golds: &'a [G],
    pid: impl Fn(&P) -> &str,
    gid: impl Fn(&G) -> &str,
) -> Result<impl Iterator<Item = (&'a P, &'a G)>, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::Alignment(format!("{} predictions for {} golds", preds.len(), golds.len())));
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some((p, g)) = preds.iter().zip(golds).find(|(p, g)| pid(p) != gid(g)) {
        return Err(EvalError::Alignment(format!("prediction `{}` paired with gold `{}`", pid(p), gid(g))));
    }
    Ok(preds.iter().zip(golds))
}

/// Fraction of examples whose predicted label equals the gold label.
pub fn accuracy(preds: &[Prediction], golds: &[Gold]) -> Result<f64, EvalError> {
    let pairs = align(preds, golds, |p| &p.id, |g| &g.id)?;
    let correct = pairs.filter(|(p, g)| p.label == g.label).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Scores a group as 1 only when every member is correct.
pub fn all_correct(members: &[bool]) -> bool {
    members.iter().all(|c| *c)
}

/// Mean over groups of the all-correct indicator.
pub fn exact_match(preds: &[Prediction], golds: &[Gold]) -> Result<f64, EvalError> {
    exact_match_with(preds, golds, all_correct)
}

/// Exact match with a custom per-group scoring rule. The rule receives the
/// correctness of each member in input order.
pub fn exact_match_with(preds: &[Prediction], golds: &[Gold], rule: impl Fn(&[bool]) -> bool) -> Result<f64, EvalError> {
    let pairs = align(preds, golds, |p| &p.id, |g| &g.id)?;
    let mut groups: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    for (p, g) in pairs {
        let key = g.group.as_deref().ok_or_else(|| EvalError::Ungrouped(g.id.clone()))?;
        groups.entry(key).or_default().push(p.label == g.label);
    }
    let hits = groups.values().filter(|m| rule(m)).count();
    Ok(hits as f64 / groups.len() as f64)
}

/// Per-sample F1 between predicted and gold label sets, averaged.
/// Both sets empty scores 1; exactly one empty scores 0.
pub fn samples_f1(preds: &[MultiPrediction], golds: &[MultiGold]) -> Result<f64, EvalError> {
    let pairs = align(preds, golds, |p| &p.id, |g| &g.id)?;
    let total: f64 = pairs
        .map(|(p, g)| {
            let predicted = p.labels.iter().filter(|v| **v == 1).count();
            let gold = g.labels.iter().filter(|v| **v == 1).count();
            let both = p.labels.iter().zip(&g.labels).filter(|(a, b)| **a == 1 && **b == 1).count();
            if predicted + gold == 0 {
                1.0
            } else {
                2.0 * both as f64 / (predicted + gold) as f64
            }
        })
        .sum();
    Ok(total / preds.len() as f64)
}
