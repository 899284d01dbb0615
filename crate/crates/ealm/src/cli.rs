//! `ealm` subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ealm_core::corpus::{build_qa_ethics, Grouping, Split};
use ealm_core::eval::MetricPlan;
use ealm_core::gate::{judge, FailAction, GateMode, GatePolicy};
use ealm_core::EthicalConcept;
use serde::Serialize;

use crate::config::{DataKind, RunConfig};
use crate::gate::run_batch;
use crate::records::{delimiter_for, parse_raw, SchemaMapping};
use crate::runner::{evaluate_dataset, Dataset, RunSummary, TestReport};
use crate::{checkpoint, jsonl, runner, Error};

#[derive(Debug, Parser)]
#[command(name = "ealm", version, about = "Ethics corpus transformation, judgment models, evaluation and output gating")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite an upstream ethics file into QA lines.
    Transform(TransformArgs),
    /// Train one model per seed from a run config.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Filter `{id, text}` lines through a checkpoint and a policy.
    Gate(GateArgs),
    /// Average saved reports into one table.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub concept: EthicalConcept,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML column mapping; defaults to the upstream layout of the concept.
    #[arg(long = "config", value_name = "SCHEMA")]
    pub schema: Option<PathBuf>,
    /// Exact-match group size for consecutive records; 0 disables grouping.
    #[arg(long)]
    pub group_size: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Train this single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanArg {
    /// Accuracy for commonsense and utilitarianism, exact match elsewhere.
    Default,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Qa,
    MpEthics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "default")]
    pub plan: PlanArg,
    #[arg(long, value_enum, default_value = "qa")]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    RequireAll,
    RequireAny,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActionArg {
    Block,
    Annotate,
}

#[derive(Debug, clap::Args)]
pub struct GateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `-` reads standard input.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// `-` writes standard output.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// TOML gate policy; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Same threshold for every concept.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Weighted-mode pass mark.
    #[arg(long)]
    pub global_threshold: Option<f64>,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum)]
    pub fail_action: Option<ActionArg>,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// `report.json` or `summary.json` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "EALM")]
    pub name: String,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
}

/// Progress chatter on stderr is off when `EALM_QUIET` is set.
fn quiet() -> bool {
    std::env::var_os("EALM_QUIET").is_some_and(|v| !v.is_empty() && v != "0")
}

fn open_in(path: &Path) -> Result<Box<dyn BufRead>, Error> {
    if path == Path::new("-") {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(fs::File::open(path).map_err(Error::io(path))?)))
    }
}

fn create(path: &Path) -> Result<fs::File, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::File::create(path).map_err(Error::io(path))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable")
}

#[derive(Serialize)]
struct TransformStats<'a> {
    concept: EthicalConcept,
    split: Split,
    rows: usize,
    #[serde(flatten)]
    stats: &'a ealm_core::corpus::DatasetStats,
}

fn transform(a: &TransformArgs, out: &mut dyn Write) -> Result<(), Error> {
    let schema = match &a.schema {
        Some(p) => toml::from_str(&fs::read_to_string(p).map_err(Error::io(p))?)
            .map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?,
        None => SchemaMapping::upstream(a.concept),
    };
    let f = fs::File::open(&a.input).map_err(Error::io(&a.input))?;
    let report = parse_raw(f, a.concept, a.split, &schema, delimiter_for(&a.input))?;
    let rows = report.rows;
    let records = report.into_records()?;
    let grouping = match a.group_size {
        Some(0) => Grouping::default().with_size(a.concept, None),
        Some(n) => Grouping::default().with_size(a.concept, Some(n)),
        None => Grouping::default(),
    };
    let (qa, stats) = build_qa_ethics(&records, a.seed, &grouping)?;
    let mut buf = Vec::new();
    jsonl::write_jsonl(&mut buf, qa.iter())?;
    create(&a.output)?.write_all(&buf).map_err(Error::io(&a.output))?;
    writeln!(out, "{}", pretty(&TransformStats { concept: a.concept, split: a.split, rows, stats: &stats }))?;
    Ok(())
}

fn train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.train.seeds = vec![s];
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    if !quiet() {
        writeln!(err, "training seeds {:?} into {}", cfg.train.seeds, cfg.output_dir.display())?;
    }
    let summary: RunSummary = runner::run(&cfg)?;
    for r in &summary.runs {
        writeln!(
            out,
            "seed {}: best epoch {} ({}), checkpoint {}",
            r.seed,
            r.best_epoch,
            r.best_metric.map_or_else(|| "no validation split".to_string(), |m| format!("validation {m:.4}")),
            r.checkpoint.display()
        )?;
    }
    if let Some(t) = &summary.test {
        write!(out, "{}", t.render(&format!("EALM (mean of {} seeds)", summary.runs.len())))?;
    }
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), Error> {
    let loaded = checkpoint::load(&a.checkpoint)?;
    let kind = match a.kind {
        KindArg::Qa => DataKind::Qa,
        KindArg::MpEthics => DataKind::MpEthics,
    };
    let data = Dataset::load(kind, &a.data)?;
    let plan = match a.plan {
        PlanArg::Default => MetricPlan::default(),
        PlanArg::Accuracy => MetricPlan::accuracy_only(),
    };
    let report = evaluate_dataset(&loaded.model, &loaded.vocab, &data, &plan)?;
    if let Some(p) = &a.output {
        writeln!(create(p)?, "{}", pretty(&report)).map_err(Error::io(p))?;
    }
    match a.format {
        FormatArg::Table => write!(out, "{}", report.render(&model_name(&a.checkpoint)))?,
        FormatArg::Json => writeln!(out, "{}", pretty(&report))?,
    }
    Ok(())
}

fn model_name(ckpt: &Path) -> String {
    ckpt.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

fn gate(a: &GateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let mut policy = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p).map_err(Error::io(p))?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => GatePolicy::default(),
    };
    if let Some(m) = a.mode {
        policy.mode = match m {
            ModeArg::RequireAll => GateMode::RequireAll,
            ModeArg::RequireAny => GateMode::RequireAny,
            ModeArg::Weighted => GateMode::Weighted,
        };
    }
    if let Some(t) = a.threshold {
        policy.thresholds = [t; ealm_core::CONCEPT_COUNT];
    }
    if let Some(t) = a.global_threshold {
        policy.global_threshold = t;
    }
    policy.strict |= a.strict;
    if let Some(f) = a.fail_action {
        policy.fail_action = match f {
            ActionArg::Block => FailAction::Block,
            ActionArg::Annotate => FailAction::Annotate,
        };
    }
    policy.validate()?;
    let loaded = checkpoint::load(&a.checkpoint)?;
    let input = open_in(&a.input)?;
    let log = io::BufWriter::new(create(&a.log)?);
    let judge_fn = |text: &str| judge(&loaded.model, &loaded.vocab, text);
    let summary = if a.output == Path::new("-") {
        run_batch(input, &mut *out, log, judge_fn, &policy, &loaded.checkpoint_id)?
    } else {
        let sink = io::BufWriter::new(create(&a.output)?);
        run_batch(input, sink, log, judge_fn, &policy, &loaded.checkpoint_id)?
    };
    if !quiet() {
        writeln!(err, "{}", serde_json::to_string(&summary).expect("serialisable"))?;
    }
    Ok(())
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut reports = Vec::new();
    for p in &a.inputs {
        let text = fs::read_to_string(p).map_err(Error::io(p))?;
        let bad = |e: serde_json::Error| Error::Config(format!("{}: {e}", p.display()));
        let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        let report = if value.get("runs").is_some() {
            serde_json::from_value::<RunSummary>(value)
                .map_err(bad)?
                .test
                .ok_or_else(|| Error::Config(format!("{}: summary has no test report", p.display())))?
        } else {
            serde_json::from_value::<TestReport>(value).map_err(bad)?
        };
        reports.push(report);
    }
    let mean = TestReport::mean(&reports)?;
    match a.format {
        FormatArg::Table => write!(out, "{}", mean.render(&a.name))?,
        FormatArg::Json => writeln!(out, "{}", pretty(&mean))?,
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// exit status: 0 on success, 1 when the command fails on its data, 2 for
/// usage errors.
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().ansi().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{text}");
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Transform(a) => transform(a, out),
        Command::Train(a) => train(a, out, err),
        Command::Eval(a) => eval(a, out),
        Command::Gate(a) => gate(a, out, err),
        Command::Report(a) => report(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
