//! File formats, checkpoints, run configuration, the gate stream and the
//! command line on top of [`ealm_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod gate;
pub mod jsonl;
pub mod records;
pub mod runner;

mod error;

pub use ealm_core;
pub use error::Error;
