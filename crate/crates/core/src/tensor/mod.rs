//! Dense `f64` tensors with a tape-based reverse-mode autodiff graph.
//!
//! A [`Graph`] owns every tensor created during one forward pass. Values are
//! immutable once recorded; only the gradient slot of a leaf changes, during
//! [`Graph::backward`]. Operations work on matrices (rank 2). Rank-1 tensors
//! of length `n` are read as `1 x n` rows, which is how biases and
//! layernorm gains are stored.

mod backward;
mod gradcheck;
mod graph;

pub use gradcheck::{grad_check, GradCheckError};
pub use graph::{Graph, Var};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Epsilon added to the variance inside the layernorm square root.
pub const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddRow,
    Mul,
    Scale,
    SoftmaxRows,
    LayerNorm,
    Gelu,
    EmbedLookup,
    ConcatRows,
    MeanRows,
    Sigmoid,
    Transpose,
    SliceHeads,
    MergeHeads,
    Sum,
    CrossEntropy,
    BceWithLogits,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: OpKind,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    Layout { shape: Vec<usize>, len: usize },
    #[error("{0}")]
    Contract(String),
}

/// Row-major dense array with an optional gradient slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    #[serde(skip)]
    grad: Option<Vec<f64>>,
    #[serde(skip)]
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != values.len() {
            return Err(TensorError::Layout { shape, len: values.len() });
        }
        Ok(Tensor {
            shape,
            values,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(vec![rows, cols], values)
    }

    pub fn row(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(vec![n], values).expect("row tensor must be non-empty")
    }

    pub fn scalar(value: f64) -> Self {
        Self::row(vec![value])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape.to_vec(), vec![0.0; shape.iter().product()]).expect("zero-sized tensor")
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), (0..n).map(&mut f).collect()).expect("zero-sized tensor")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn with_requires_grad(mut self, on: bool) -> Self {
        self.requires_grad = on;
        self
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn accumulate_grad(&mut self, delta: &[f64]) {
        match &mut self.grad {
            Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
            None => self.grad = Some(delta.to_vec()),
        }
    }

    /// `(rows, cols)` view; rank-1 tensors are single rows.
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Some((1, *n)),
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        let (_, c) = self.dims().expect("rank-2 tensor");
        self.values[row * c + col]
    }

    pub fn row_slice(&self, row: usize) -> &[f64] {
        let (_, c) = self.dims().expect("rank-2 tensor");
        &self.values[row * c..(row + 1) * c]
    }
}
