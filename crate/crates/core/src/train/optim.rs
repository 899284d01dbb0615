use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::{ParamGroup, ParamSet};

/// Moment accumulators, one pair per parameter tensor, each with its own
/// step count so skipped tensors keep their bias correction honest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: Vec<u64>,
}

impl OptimizerState {
    pub fn for_params(params: &ParamSet) -> Self {
        OptimizerState {
            first: params.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
            steps: vec![0; params.len()],
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub state: OptimizerState,
}

impl AdamW {
    pub fn new(params: &ParamSet, weight_decay: f64) -> Self {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, state: OptimizerState::for_params(params) }
    }

    /// One update. `grads[i]` belongs to parameter `i`; `None` or an
    /// all-zero gradient leaves that tensor and its moments untouched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Option<Vec<f64>>], lr: impl Fn(ParamGroup) -> f64) -> Result<(), TrainError> {
        if grads.len() != params.len() || self.state.first.len() != params.len() {
            return Err(TrainError::Contract(format!(
                "optimizer over {} tensors given {} gradients for {} parameters",
                self.state.first.len(),
                grads.len(),
                params.len()
            )));
        }
        for (i, grad) in grads.iter().enumerate() {
            let Some(grad) = grad else { continue };
            if grad.iter().all(|g| *g == 0.0) {
                continue;
            }
            let param = params.get_mut(i);
            if grad.len() != param.tensor.len() {
                return Err(TrainError::Contract(format!("gradient length mismatch for {}", param.name)));
            }
            let rate = lr(param.group);
            let decay = if param.decay { self.weight_decay } else { 0.0 };
            self.state.steps[i] += 1;
            let t = self.state.steps[i] as i32;
            let c1 = 1.0 - libm::pow(self.beta1, f64::from(t));
            let c2 = 1.0 - libm::pow(self.beta2, f64::from(t));
            let (m, v) = (&mut self.state.first[i], &mut self.state.second[i]);
            for (j, w) in param.tensor.values_mut().iter_mut().enumerate() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let update = (m[j] / c1) / (libm::sqrt(v[j] / c2) + self.eps);
                *w -= rate * (update + decay * *w);
            }
        }
        Ok(())
    }
}

pub fn global_norm(grads: &[Option<Vec<f64>>]) -> f64 {
    libm::sqrt(grads.iter().flatten().flatten().map(|g| g * g).sum())
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Option<Vec<f64>>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().flatten().flatten().for_each(|g| *g *= s);
    }
    norm
}
