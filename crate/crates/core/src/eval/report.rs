use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, exact_match, samples_f1, Gold, MultiGold, MultiPrediction, Prediction};
use super::EvalError;
use crate::corpus::{multi_perspective_prompt, MultiPerspectiveExample, QAExample, Split};
use crate::model::{DescriptionSource, HeadKind, Model, ModelError, Vocabulary};
use crate::{EthicalConcept, CONCEPT_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    ExactMatch,
}

/// Metric used for each concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricPlan {
    pub kinds: [MetricKind; CONCEPT_COUNT],
}

impl Default for MetricPlan {
    /// Accuracy for commonsense and utilitarianism, exact match for
    /// deontology, justice and virtue.
    fn default() -> Self {
        use MetricKind::*;
        MetricPlan { kinds: [Accuracy, ExactMatch, ExactMatch, Accuracy, ExactMatch] }
    }
}

impl MetricPlan {
    pub fn accuracy_only() -> Self {
        MetricPlan { kinds: [MetricKind::Accuracy; CONCEPT_COUNT] }
    }

    pub fn kind(&self, concept: EthicalConcept) -> MetricKind {
        self.kinds[concept.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptScore {
    pub concept: EthicalConcept,
    pub metric: MetricKind,
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: Split,
    /// Concepts present in the split, canonical order.
    pub concepts: Vec<ConceptScore>,
    /// Mean of the per-concept values.
    pub average: f64,
    /// Accuracy over every sample of the split.
    pub overall: f64,
    pub count: usize,
}

impl SplitReport {
    pub fn concept(&self, c: EthicalConcept) -> Option<&ConceptScore> {
        self.concepts.iter().find(|s| s.concept == c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub splits: Vec<SplitReport>,
}

/// Column order of the results table: exact-match concepts first.
const TABLE_ORDER: [EthicalConcept; CONCEPT_COUNT] = [
    EthicalConcept::Deontology,
    EthicalConcept::Justice,
    EthicalConcept::Virtue,
    EthicalConcept::Commonsense,
    EthicalConcept::Utilitarianism,
];

impl MetricReport {
    pub fn split(&self, split: Split) -> Option<&SplitReport> {
        self.splits.iter().find(|s| s.split == split)
    }

    /// Aligned plain-text table, one `test / hard test` cell per concept,
    /// values in percent.
    pub fn table(&self, model_name: &str) -> String {
        let cell = |f: &dyn Fn(&SplitReport) -> Option<f64>| -> String {
            let parts: Vec<String> = self
                .splits
                .iter()
                .map(|s| f(s).map_or_else(|| String::from("-"), |v| format!("{:.1}", v * 100.0)))
                .collect();
            parts.join(" / ")
        };
        let mut header: Vec<String> = Vec::from([String::from("Model")]);
        let mut row: Vec<String> = Vec::from([String::from(model_name)]);
        for c in TABLE_ORDER {
            header.push(String::from(c.title()));
            row.push(cell(&|s| s.concept(c).map(|x| x.value)));
        }
        header.push("Average".into());
        row.push(cell(&|s| Some(s.average)));
        header.push("Overall".into());
        row.push(cell(&|s| Some(s.overall)));

        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let mut out = String::new();
        let splits: Vec<&str> = self.splits.iter().map(|s| s.split.name()).collect();
        let _ = writeln!(out, "Results ({})", splits.join(" / "));
        for line in [&header, &row] {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        }
        out
    }
}

impl MetricReport {
    /// Element-wise mean of reports with identical layout, as when
    /// averaging the test metrics of several seeded runs.
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport, EvalError> {
        let first = reports.first().ok_or(EvalError::Empty)?;
        let n = reports.len() as f64;
        let mut out = first.clone();
        for (si, split) in out.splits.iter_mut().enumerate() {
            let peers = reports
                .iter()
                .map(|r| {
                    r.splits
                        .get(si)
                        .filter(|s| s.split == split.split && s.concepts.len() == split.concepts.len())
                        .ok_or_else(|| EvalError::Alignment("reports differ in layout".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            split.average = peers.iter().map(|s| s.average).sum::<f64>() / n;
            split.overall = peers.iter().map(|s| s.overall).sum::<f64>() / n;
            for (ci, c) in split.concepts.iter_mut().enumerate() {
                if peers.iter().any(|s| s.concepts[ci].concept != c.concept) {
                    return Err(EvalError::Alignment("reports differ in layout".into()));
                }
                c.value = peers.iter().map(|s| s.concepts[ci].value).sum::<f64>() / n;
            }
        }
        Ok(out)
    }
}

/// Scores predictions against QA examples, per split and concept.
/// Every split in `splits` must contain at least one example.
pub fn evaluate_predictions(
    examples: &[QAExample],
    preds: &[Prediction],
    plan: &MetricPlan,
    splits: &[Split],
) -> Result<MetricReport, EvalError> {
    if examples.len() != preds.len() {
        return Err(EvalError::Alignment(format!("{} predictions for {} examples", preds.len(), examples.len())));
    }
    let mut out = Vec::new();
    for &split in splits {
        let mut split_preds = Vec::new();
        let mut split_golds = Vec::new();
        let mut concepts = Vec::new();
        for concept in EthicalConcept::ALL {
            let (p, g): (Vec<Prediction>, Vec<Gold>) = examples
                .iter()
                .zip(preds)
                .filter(|(e, _)| e.split == split && e.concept == concept)
                .map(|(e, p)| (p.clone(), Gold { id: e.id.clone(), label: e.label, group: e.group_id.clone() }))
                .unzip();
            if p.is_empty() {
                continue;
            }
            let metric = plan.kind(concept);
            let value = match metric {
                MetricKind::Accuracy => accuracy(&p, &g)?,
                MetricKind::ExactMatch => exact_match(&p, &g)?,
            };
            concepts.push(ConceptScore { concept, metric, value, count: p.len() });
            split_preds.extend(p);
            split_golds.extend(g);
        }
        if concepts.is_empty() {
            return Err(EvalError::MissingSplit(split.name().into()));
        }
        let average = concepts.iter().map(|c| c.value).sum::<f64>() / concepts.len() as f64;
        let overall = accuracy(&split_preds, &split_golds)?;
        out.push(SplitReport { split, concepts, average, overall, count: split_preds.len() });
    }
    Ok(MetricReport { splits: out })
}

/// Binary predictions for QA examples, each paired with its concept's
/// description stream.
pub fn predict(model: &Model, vocab: &Vocabulary, examples: &[QAExample]) -> Result<Vec<Prediction>, EvalError> {
    require_head(model, HeadKind::BinarySoftmax)?;
    examples
        .iter()
        .map(|e| {
            let input = model.prepare(vocab, &e.text, DescriptionSource::Concept(e.concept))?;
            let p = model.probabilities(&input)?;
            Ok(Prediction::from_scores(e.id.clone(), [p[0], p[1]]))
        })
        .collect()
}

pub fn evaluate(
    model: &Model,
    vocab: &Vocabulary,
    examples: &[QAExample],
    plan: &MetricPlan,
    splits: &[Split],
) -> Result<MetricReport, EvalError> {
    let preds = predict(model, vocab, examples)?;
    evaluate_predictions(examples, &preds, plan, splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilabelReport {
    pub samples_f1: f64,
    pub count: usize,
}

pub fn predict_multilabel(
    model: &Model,
    vocab: &Vocabulary,
    examples: &[MultiPerspectiveExample],
    threshold: f64,
) -> Result<Vec<MultiPrediction>, EvalError> {
    require_head(model, HeadKind::MultilabelSigmoid)?;
    examples
        .iter()
        .map(|e| {
            let text = multi_perspective_prompt(&e.text);
            let input = model.prepare(vocab, &text, DescriptionSource::AllConcepts)?;
            let p = model.probabilities(&input)?;
            let mut scores = [0.0; CONCEPT_COUNT];
            scores.copy_from_slice(&p[..CONCEPT_COUNT]);
            Ok(MultiPrediction::from_scores(e.id.clone(), scores, threshold))
        })
        .collect()
}

pub fn evaluate_multilabel(
    model: &Model,
    vocab: &Vocabulary,
    examples: &[MultiPerspectiveExample],
    threshold: f64,
) -> Result<MultilabelReport, EvalError> {
    let preds = predict_multilabel(model, vocab, examples, threshold)?;
    let golds: Vec<MultiGold> = examples.iter().map(|e| MultiGold { id: e.id.clone(), labels: e.labels }).collect();
    Ok(MultilabelReport { samples_f1: samples_f1(&preds, &golds)?, count: preds.len() })
}

fn require_head(model: &Model, head: HeadKind) -> Result<(), EvalError> {
    if model.config().head != head {
        return Err(EvalError::Model(ModelError::Contract(format!(
            "expected a {head:?} checkpoint, found {:?}",
            model.config().head
        ))));
    }
    Ok(())
}
