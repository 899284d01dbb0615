use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::optim::{clip_grad_norm, AdamW};
use super::schedule::lr_at;
use super::TrainError;
use crate::corpus::{multi_perspective_prompt, MultiPerspectiveExample, QAExample};
use crate::eval::{samples_f1, MultiGold, MultiPrediction};
use crate::model::{DescriptionSource, EncodedInput, EncoderConfig, HeadKind, Model, ParamGroup, Pass, Vocabulary};
use crate::rng::{keyed, shuffle};
use crate::tensor::{Graph, Var};
use crate::CONCEPT_COUNT;

/// Rng stream for the validation hold-out.
pub const VALIDATION_STREAM: u64 = 1;
/// Base rng stream for epoch shuffles; epoch `e` uses `SHUFFLE_STREAM + e`.
pub const SHUFFLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Never stated upstream; 32 is a guess.
    pub batch_size: usize,
    pub lr_backbone: f64,
    pub lr_reasoning: f64,
    pub warmup_fraction: f64,
    pub seeds: Vec<u64>,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub head: HeadKind,
    pub weight_decay: f64,
    /// Share of the training examples held out for checkpoint selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr_backbone: 1e-5,
            lr_reasoning: 1e-4,
            warmup_fraction: 0.06,
            seeds: vec![1, 2, 3],
            clip_norm: Some(1.0),
            head: HeadKind::BinarySoftmax,
            weight_decay: 0.01,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.lr_backbone > 0.0 && self.lr_reasoning > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup fraction {} outside [0, 1)", self.warmup_fraction));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("clip norm must be positive".into());
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight decay must be non-negative".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        Ok(())
    }

    fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Backbone => self.lr_backbone,
            ParamGroup::Reasoning => self.lr_reasoning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Binary(u8),
    Multi([u8; CONCEPT_COUNT]),
}

impl Target {
    fn head(self) -> HeadKind {
        match self {
            Target::Binary(_) => HeadKind::BinarySoftmax,
            Target::Multi(_) => HeadKind::MultilabelSigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub text: String,
    pub source: DescriptionSource,
    pub target: Target,
}

impl TrainExample {
    pub fn from_qa(e: &QAExample) -> Self {
        TrainExample {
            id: e.id.clone(),
            text: e.text.clone(),
            source: DescriptionSource::Concept(e.concept),
            target: Target::Binary(e.label),
        }
    }

    pub fn from_multi(e: &MultiPerspectiveExample) -> Self {
        TrainExample {
            id: e.id.clone(),
            text: multi_perspective_prompt(&e.text),
            source: DescriptionSource::AllConcepts,
            target: Target::Multi(e.labels),
        }
    }
}

/// One line of the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    /// Parameters from the epoch with the best validation metric, or the
    /// last epoch when nothing is held out.
    pub model: Model,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    /// Loss of the very first batch, before any update.
    pub initial_loss: f64,
    pub steps: u64,
    pub log: Vec<EpochRecord>,
}

/// Mean loss of a batch: cross-entropy for binary targets, per-slot
/// binary cross-entropy for multi-label ones. Returns `(loss, logits)`.
pub fn batch_loss(pass: &mut Pass<'_, '_>, inputs: &[&EncodedInput], targets: &[Target]) -> Result<(Var, Var), TrainError> {
    if inputs.len() != targets.len() {
        return Err(TrainError::Contract("inputs and targets differ in length".into()));
    }
    let owned: Vec<EncodedInput> = inputs.iter().map(|i| (*i).clone()).collect();
    let logits = pass.forward_batch(&owned)?;
    let loss = match targets.first() {
        Some(Target::Binary(_)) => {
            let labels = targets
                .iter()
                .map(|t| match t {
                    Target::Binary(l) => Ok(usize::from(*l)),
                    Target::Multi(_) => Err(TrainError::Contract("mixed targets in one batch".into())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            pass.graph.cross_entropy(logits, &labels)?
        }
        Some(Target::Multi(_)) => {
            let mut flat = Vec::with_capacity(targets.len() * CONCEPT_COUNT);
            for t in targets {
                match t {
                    Target::Multi(l) => flat.extend(l.iter().map(|&y| f64::from(y))),
                    Target::Binary(_) => return Err(TrainError::Contract("mixed targets in one batch".into())),
                }
            }
            pass.graph.bce_with_logits(logits, &flat)?
        }
        None => return Err(TrainError::Contract("empty batch".into())),
    };
    Ok((loss, logits))
}

struct Tally {
    loss: f64,
    count: usize,
    correct: usize,
    multi_preds: Vec<MultiPrediction>,
    multi_golds: Vec<MultiGold>,
}

impl Tally {
    fn new() -> Self {
        Tally { loss: 0.0, count: 0, correct: 0, multi_preds: Vec::new(), multi_golds: Vec::new() }
    }

    fn add(&mut self, loss: f64, logits: &[f64], batch: &[usize], examples: &[TrainExample]) {
        self.loss += loss * batch.len() as f64;
        self.count += batch.len();
        let width = logits.len() / batch.len();
        for (row, &i) in batch.iter().enumerate() {
            let z = &logits[row * width..(row + 1) * width];
            match examples[i].target {
                Target::Binary(label) => {
                    let predicted = u8::from(z[1] > z[0]);
                    self.correct += usize::from(predicted == label);
                }
                Target::Multi(labels) => {
                    let mut out = [0u8; CONCEPT_COUNT];
                    for (slot, v) in out.iter_mut().enumerate() {
                        *v = u8::from(z[slot] >= 0.0);
                    }
                    let id = examples[i].id.clone();
                    self.multi_preds.push(MultiPrediction { id: id.clone(), labels: out, scores: [0.0; CONCEPT_COUNT] });
                    self.multi_golds.push(MultiGold { id, labels });
                }
            }
        }
    }

    fn record(&self, epoch: usize, split: &str, head: HeadKind) -> Result<(EpochRecord, f64), TrainError> {
        let (name, value) = match head {
            HeadKind::BinarySoftmax => ("accuracy", self.correct as f64 / self.count as f64),
            HeadKind::MultilabelSigmoid => (
                "samples_f1",
                samples_f1(&self.multi_preds, &self.multi_golds).map_err(|e| TrainError::Contract(e.to_string()))?,
            ),
        };
        let mut metrics = BTreeMap::new();
        metrics.insert(name.to_string(), value);
        let rec = EpochRecord { epoch, split: split.to_string(), loss: self.loss / self.count as f64, metrics };
        Ok((rec, value))
    }
}

/// One seeded run. The seed drives parameter init, the validation
/// hold-out and every epoch shuffle.
pub fn train_run(
    model_config: &EncoderConfig,
    vocab: &Vocabulary,
    examples: &[TrainExample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RunResult, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::Contract("training set is empty".into()));
    }
    if model_config.head != cfg.head {
        return Err(TrainError::Config(format!(
            "model head {:?} differs from train head {:?}",
            model_config.head, cfg.head
        )));
    }
    if let Some(e) = examples.iter().find(|e| e.target.head() != cfg.head) {
        return Err(TrainError::Contract(format!("example {} does not fit a {:?} head", e.id, cfg.head)));
    }
    if let Some(e) = examples.iter().find(|e| match e.target {
        Target::Binary(l) => l > 1,
        Target::Multi(l) => l.iter().any(|&y| y > 1),
    }) {
        return Err(TrainError::Contract(format!("example {} has a non-binary label", e.id)));
    }

    let mut mc = model_config.clone();
    mc.init_seed = seed;
    let mut model = Model::new(mc)?;
    let inputs = examples
        .iter()
        .map(|e| model.prepare(vocab, &e.text, e.source))
        .collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    shuffle(&mut keyed(seed, VALIDATION_STREAM), &mut order);
    let held = libm::round(examples.len() as f64 * cfg.validation_fraction) as usize;
    let held = held.min(examples.len() - 1);
    let (val_idx, train_idx) = order.split_at(held);
    let (val_idx, mut train_idx) = (val_idx.to_vec(), train_idx.to_vec());
    train_idx.sort_unstable();

    let per_epoch = train_idx.len().div_ceil(cfg.batch_size) as u64;
    let total = per_epoch * cfg.epochs as u64;
    let mut opt = AdamW::new(model.params(), cfg.weight_decay);
    let mut step = 0u64;
    let mut initial_loss = None;
    let mut log = Vec::new();
    let mut best: Option<(f64, f64, usize, Model)> = None;

    for epoch in 1..=cfg.epochs {
        let mut epoch_order = train_idx.clone();
        shuffle(&mut keyed(seed, SHUFFLE_STREAM + epoch as u64), &mut epoch_order);
        let mut tally = Tally::new();
        for batch in epoch_order.chunks(cfg.batch_size) {
            let batch_inputs: Vec<&EncodedInput> = batch.iter().map(|&i| &inputs[i]).collect();
            let targets: Vec<Target> = batch.iter().map(|&i| examples[i].target).collect();
            let mut g = Graph::new();
            let mut pass = model.bind(&mut g);
            let (loss, logits) = batch_loss(&mut pass, &batch_inputs, &targets)?;
            pass.graph.backward(loss)?;
            let mut grads = pass.param_grads();
            let loss_value = g.value(loss).values()[0];
            let lr_scale = lr_at(step, total, 1.0, cfg.warmup_fraction)?;
            let norm = match cfg.clip_norm {
                Some(c) => clip_grad_norm(&mut grads, c),
                None => super::optim::global_norm(&grads),
            };
            if !loss_value.is_finite() || !norm.is_finite() {
                return Err(TrainError::Diverged { step, lr: lr_scale * cfg.lr_reasoning, grad_norm: norm });
            }
            initial_loss.get_or_insert(loss_value);
            tally.add(loss_value, g.value(logits).values(), batch, examples);
            opt.step(model.params_mut(), &grads, |group| lr_scale * cfg.lr(group))?;
            step += 1;
        }
        let (rec, train_metric) = tally.record(epoch, "train", cfg.head)?;
        log.push(rec);

        let selection = if val_idx.is_empty() {
            (train_metric, 0.0)
        } else {
            let tally = score(&model, &inputs, examples, &val_idx, cfg.batch_size)?;
            let (rec, metric) = tally.record(epoch, "validation", cfg.head)?;
            let loss = rec.loss;
            log.push(rec);
            (metric, loss)
        };
        // ties on the metric go to the lower validation loss
        let improved = val_idx.is_empty()
            || best.as_ref().is_none_or(|(m, l, _, _)| selection.0 > *m || (selection.0 == *m && selection.1 < *l));
        if improved {
            best = Some((selection.0, selection.1, epoch, model.clone()));
        }
    }

    let (metric, _, best_epoch, model) = best.ok_or_else(|| TrainError::Contract("no epoch completed".into()))?;
    Ok(RunResult {
        seed,
        model,
        best_epoch,
        best_metric: (!val_idx.is_empty()).then_some(metric),
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        steps: step,
        log,
    })
}

fn score(model: &Model, inputs: &[EncodedInput], examples: &[TrainExample], idx: &[usize], batch: usize) -> Result<Tally, TrainError> {
    let mut tally = Tally::new();
    for chunk in idx.chunks(batch) {
        let batch_inputs: Vec<&EncodedInput> = chunk.iter().map(|&i| &inputs[i]).collect();
        let targets: Vec<Target> = chunk.iter().map(|&i| examples[i].target).collect();
        let mut g = Graph::new();
        let mut pass = model.bind(&mut g);
        let (loss, logits) = batch_loss(&mut pass, &batch_inputs, &targets)?;
        tally.add(g.value(loss).values()[0], g.value(logits).values(), chunk, examples);
    }
    Ok(tally)
}

/// Runs every configured seed in turn.
pub fn train_seeds(
    model_config: &EncoderConfig,
    vocab: &Vocabulary,
    examples: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<Vec<RunResult>, TrainError> {
    cfg.seeds.iter().map(|&s| train_run(model_config, vocab, examples, cfg, s)).collect()
}
