use alloc::vec::Vec;

use super::TrainError;
use crate::tensor::{Graph, Tensor};
use crate::CONCEPT_COUNT;

/// Mean softmax cross-entropy of 2-logit rows against 0/1 labels.
pub fn cross_entropy(logits: &[[f64; 2]], labels: &[u8]) -> Result<f64, TrainError> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(TrainError::Contract("cross_entropy needs aligned, non-empty logits and labels".into()));
    }
    let flat: Vec<f64> = logits.iter().flatten().copied().collect();
    let labels: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let mut g = Graph::new();
    let z = g.constant(Tensor::matrix(logits.len(), 2, flat)?);
    let loss = g.cross_entropy(z, &labels)?;
    Ok(g.value(loss).values()[0])
}

/// Mean over rows and slots of the per-label binary cross-entropy.
pub fn bce_multilabel(logits: &[[f64; CONCEPT_COUNT]], labels: &[[u8; CONCEPT_COUNT]]) -> Result<f64, TrainError> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(TrainError::Contract("bce_multilabel needs aligned, non-empty logits and labels".into()));
    }
    let flat: Vec<f64> = logits.iter().flatten().copied().collect();
    let targets: Vec<f64> = labels.iter().flatten().map(|&y| f64::from(y)).collect();
    let mut g = Graph::new();
    let z = g.constant(Tensor::matrix(logits.len(), CONCEPT_COUNT, flat)?);
    let loss = g.bce_with_logits(z, &targets)?;
    Ok(g.value(loss).values()[0])
}
