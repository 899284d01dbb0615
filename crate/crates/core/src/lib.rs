//! Allocation-only core of the ethical alignment toolkit.
//!
//! Everything in here is pure computation over in-memory values: the QA
//! template rewriting of ethics corpora, vote aggregation, a small
//! reverse-mode autodiff tensor library, the dual-stream encoder with its
//! cross-attention reasoning layers, losses and the training loop, the
//! evaluation metrics, and the gate policy. File formats, the CLI and
//! anything touching the OS live in the `ealm` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod concept;
pub mod corpus;
pub mod eval;
pub mod gate;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use concept::{ConceptDescription, EthicalConcept, CONCEPT_COUNT};
