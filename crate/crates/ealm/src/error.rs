use std::path::PathBuf;

use ealm_core::corpus::CorpusError;
use ealm_core::eval::EvalError;
use ealm_core::gate::GateError;
use ealm_core::model::ModelError;
use ealm_core::train::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("schema error: {0}")]
    Schema(String),
    /// A bad value in a delimited file. `row` is the zero-based data row.
    #[error("row {row} (line {line}): {detail}")]
    Row { row: usize, line: u64, detail: String },
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
