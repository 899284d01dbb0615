//! Multi-seed training runs: one thread per seed, artifacts per seed and a
//! seed-averaged test report.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ealm_core::corpus::{multi_perspective_prompt, MultiPerspectiveExample, QAExample, Split};
use ealm_core::eval::{evaluate, evaluate_multilabel, MetricPlan, MetricReport, MultilabelReport, DEFAULT_THRESHOLD};
use ealm_core::model::{HeadKind, Model, Vocabulary};
use ealm_core::train::{train_run, EpochRecord, RunResult, TrainExample};
use ealm_core::EthicalConcept;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{DataKind, RunConfig};
use crate::jsonl::{load_mp_ethics, read_qa, write_jsonl};
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Qa(Vec<QAExample>),
    Multi(Vec<MultiPerspectiveExample>),
}

impl Dataset {
    pub fn load(kind: DataKind, path: &Path) -> Result<Self, Error> {
        let f = BufReader::new(fs::File::open(path).map_err(Error::io(path))?);
        Ok(match kind {
            DataKind::Qa => Dataset::Qa(read_qa(f)?),
            DataKind::MpEthics => Dataset::Multi(load_mp_ethics(f)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Qa(v) => v.len(),
            Dataset::Multi(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head(&self) -> HeadKind {
        match self {
            Dataset::Qa(_) => HeadKind::BinarySoftmax,
            Dataset::Multi(_) => HeadKind::MultilabelSigmoid,
        }
    }

    pub fn train_examples(&self) -> Vec<TrainExample> {
        match self {
            Dataset::Qa(v) => v.iter().map(TrainExample::from_qa).collect(),
            Dataset::Multi(v) => v.iter().map(TrainExample::from_multi).collect(),
        }
    }

    /// The texts the model will actually read.
    fn model_texts(&self) -> Vec<String> {
        match self {
            Dataset::Qa(v) => v.iter().map(|e| e.text.clone()).collect(),
            Dataset::Multi(v) => v.iter().map(|e| multi_perspective_prompt(&e.text)).collect(),
        }
    }
}

/// Vocabulary over the training texts plus every concept description.
pub fn build_vocab(train: &Dataset, min_count: usize) -> Vocabulary {
    let texts = train.model_texts();
    let descriptions = EthicalConcept::ALL.map(|c| c.description());
    Vocabulary::build(texts.iter().map(String::as_str).chain(descriptions), min_count)
}

/// Test metrics of one model, shaped by the data kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestReport {
    Qa(MetricReport),
    Multi(MultilabelReport),
}

impl TestReport {
    pub fn mean(reports: &[TestReport]) -> Result<TestReport, Error> {
        match reports.first() {
            Some(TestReport::Qa(_)) => {
                let qa: Vec<MetricReport> = reports
                    .iter()
                    .filter_map(|r| match r {
                        TestReport::Qa(m) => Some(m.clone()),
                        TestReport::Multi(_) => None,
                    })
                    .collect();
                Ok(TestReport::Qa(MetricReport::mean(&qa)?))
            }
            Some(TestReport::Multi(_)) => {
                let f: Vec<&MultilabelReport> = reports
                    .iter()
                    .filter_map(|r| match r {
                        TestReport::Multi(m) => Some(m),
                        TestReport::Qa(_) => None,
                    })
                    .collect();
                let mean = f.iter().map(|m| m.samples_f1).sum::<f64>() / f.len() as f64;
                Ok(TestReport::Multi(MultilabelReport { samples_f1: mean, count: f[0].count }))
            }
            None => Err(Error::Eval(ealm_core::eval::EvalError::Empty)),
        }
    }

    pub fn render(&self, name: &str) -> String {
        match self {
            TestReport::Qa(m) => m.table(name),
            TestReport::Multi(m) => format!("{name}: samples F1 {:.1} over {} examples\n", m.samples_f1 * 100.0, m.count),
        }
    }
}

/// Splits present in a QA set other than train, in canonical order.
pub fn eval_splits(examples: &[QAExample]) -> Vec<Split> {
    let present: Vec<Split> =
        [Split::Test, Split::HardTest].into_iter().filter(|s| examples.iter().any(|e| e.split == *s)).collect();
    if present.is_empty() && examples.iter().any(|e| e.split == Split::Train) {
        vec![Split::Train]
    } else {
        present
    }
}

pub fn evaluate_dataset(model: &Model, vocab: &Vocabulary, data: &Dataset, plan: &MetricPlan) -> Result<TestReport, Error> {
    Ok(match data {
        Dataset::Qa(v) => TestReport::Qa(evaluate(model, vocab, v, plan, &eval_splits(v))?),
        Dataset::Multi(v) => TestReport::Multi(evaluate_multilabel(model, vocab, v, DEFAULT_THRESHOLD)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    pub initial_loss: f64,
    pub checkpoint: PathBuf,
    pub checkpoint_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: Vec<SeedSummary>,
    /// Mean of the per-seed test reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestReport>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serialisable");
    v.push(b'\n');
    v
}

/// Trains every seed in parallel and writes, under `output_dir`:
/// `seed-<s>/model.ckpt` (+ sidecars), `seed-<s>/metrics.jsonl`,
/// `seed-<s>/report.json` when there is test data, and `summary.json`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, Error> {
    let train = Dataset::load(cfg.data.kind, &cfg.data.train)?;
    if train.is_empty() {
        return Err(Error::Config(format!("no training examples in {}", cfg.data.train.display())));
    }
    let test = cfg.data.test.as_ref().map(|p| Dataset::load(cfg.data.kind, p)).transpose()?;
    let vocab = build_vocab(&train, cfg.min_count);
    let mut model_cfg = cfg.model.clone();
    model_cfg.vocab_size = vocab.len();
    model_cfg.head = train.head();
    let mut train_cfg = cfg.train.clone();
    train_cfg.head = train.head();
    train_cfg.validate()?;
    let examples = train.train_examples();

    let results: Vec<Result<RunResult, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = train_cfg
            .seeds
            .iter()
            .map(|&seed| {
                let (m, v, e, t) = (&model_cfg, &vocab, &examples, &train_cfg);
                s.spawn(move || train_run(m, v, e, t, seed).map_err(Error::from))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });

    let plan = MetricPlan::default();
    let mut runs = Vec::new();
    for r in results {
        let r = r?;
        let dir = cfg.output_dir.join(format!("seed-{}", r.seed));
        let ckpt = dir.join("model.ckpt");
        let id = checkpoint::save(&ckpt, &r.model, &vocab)?;
        let mut log = Vec::new();
        write_jsonl(&mut log, r.log.iter())?;
        write(&dir.join("metrics.jsonl"), &log)?;
        let report = test.as_ref().map(|t| evaluate_dataset(&r.model, &vocab, t, &plan)).transpose()?;
        if let Some(rep) = &report {
            write(&dir.join("report.json"), &json_line(rep))?;
        }
        runs.push(SeedSummary {
            seed: r.seed,
            best_epoch: r.best_epoch,
            best_metric: r.best_metric,
            initial_loss: r.initial_loss,
            checkpoint: ckpt,
            checkpoint_id: id,
            test: report,
        });
    }
    let reports: Vec<TestReport> = runs.iter().filter_map(|r| r.test.clone()).collect();
    let summary = RunSummary { test: (!reports.is_empty()).then(|| TestReport::mean(&reports)).transpose()?, runs };
    write(&cfg.output_dir.join("summary.json"), &json_line(&summary))?;
    Ok(summary)
}

/// Reads a `metrics.jsonl` log.
pub fn read_log(path: &Path) -> Result<Vec<EpochRecord>, Error> {
    let f = BufReader::new(fs::File::open(path).map_err(Error::io(path))?);
    crate::jsonl::read_jsonl(f)
}
