//! TOML run configuration.
//!
//! ```toml
//! output_dir = "runs/qa"        # checkpoints, metric logs, reports
//! min_count = 1                 # vocabulary frequency floor
//!
//! [data]
//! kind = "qa"                   # "qa" (QA-ETHICS lines) or "mp_ethics"
//! train = "data/train.jsonl"
//! test = "data/test.jsonl"      # optional; evaluated after training
//!
//! [model]                       # any EncoderConfig field; vocab_size and
//! hidden = 32                   # head are filled in from the data
//!
//! [train]                       # any TrainConfig field
//! epochs = 20
//! seeds = [1, 2, 3]
//! ```
//!
//! Relative paths are taken relative to the config file.

use std::path::{Path, PathBuf};

use ealm_core::model::EncoderConfig;
use ealm_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Qa,
    MpEthics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub kind: DataKind,
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub min_count: usize,
    pub data: DataPaths,
    #[serde(default)]
    pub model: EncoderConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.output_dir);
        fix(&mut cfg.data.train);
        if let Some(t) = cfg.data.test.as_mut() {
            fix(t);
        }
        Ok(cfg)
    }
}
