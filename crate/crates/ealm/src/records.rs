//! Delimited upstream ethics files into [`RawRecord`]s.

use std::io::Read;

use ealm_core::corpus::{RawRecord, Split};
use ealm_core::EthicalConcept;
use serde::{Deserialize, Serialize};

use crate::Error;

/// A column picked by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl From<&str> for Column {
    fn from(s: &str) -> Self {
        Column::Name(s.to_string())
    }
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => write!(f, "`{n}`"),
        }
    }
}

/// How the columns of one upstream file map onto record fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaMapping {
    #[serde(default)]
    pub label: Option<Column>,
    pub scenario: Column,
    #[serde(default)]
    pub excuse: Option<Column>,
    #[serde(default)]
    pub pair_second: Option<Column>,
    #[serde(default)]
    pub trait_term: Option<Column>,
    /// Explicit exact-match group ids.
    #[serde(default)]
    pub group: Option<Column>,
    /// When set, the trait is split off the end of the scenario column at
    /// this marker instead of read from its own column.
    #[serde(default)]
    pub trait_separator: Option<String>,
    #[serde(default = "yes")]
    pub has_headers: bool,
    /// Defaults to tab for `.tsv` inputs and comma otherwise.
    #[serde(default)]
    pub delimiter: Option<char>,
}

fn yes() -> bool {
    true
}

impl SchemaMapping {
    fn base(scenario: &str) -> Self {
        SchemaMapping {
            label: Some("label".into()),
            scenario: scenario.into(),
            excuse: None,
            pair_second: None,
            trait_term: None,
            group: None,
            trait_separator: None,
            has_headers: true,
            delimiter: None,
        }
    }

    /// Layout of the public ETHICS release for each concept.
    pub fn upstream(concept: EthicalConcept) -> Self {
        match concept {
            EthicalConcept::Commonsense => SchemaMapping::base("input"),
            EthicalConcept::Deontology => SchemaMapping { excuse: Some("excuse".into()), ..SchemaMapping::base("scenario") },
            EthicalConcept::Justice => SchemaMapping::base("scenario"),
            EthicalConcept::Utilitarianism => SchemaMapping {
                label: None,
                scenario: Column::Index(0),
                pair_second: Some(Column::Index(1)),
                has_headers: false,
                ..SchemaMapping::base("")
            },
            EthicalConcept::Virtue => {
                SchemaMapping { trait_separator: Some("[SEP]".into()), ..SchemaMapping::base("scenario") }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    pub row: usize,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseReport {
    pub records: Vec<RawRecord>,
    pub malformed: Vec<MalformedRow>,
    /// Data rows seen, well-formed or not.
    pub rows: usize,
}

impl ParseReport {
    /// The records, or the first malformed row as an error.
    pub fn into_records(self) -> Result<Vec<RawRecord>, Error> {
        match self.malformed.into_iter().next() {
            Some(m) => Err(Error::Row { row: m.row, line: m.line, detail: m.reason }),
            None => Ok(self.records),
        }
    }
}

fn resolve(col: &Column, headers: Option<&csv::StringRecord>) -> Result<usize, Error> {
    match (col, headers) {
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(n), Some(h)) => h
            .iter()
            .position(|x| x.trim() == n)
            .ok_or_else(|| Error::Schema(format!("missing column `{n}`"))),
        (Column::Name(n), None) => Err(Error::Schema(format!("column `{n}` named but the file has no header row"))),
    }
}

struct Slots {
    label: Option<usize>,
    scenario: usize,
    excuse: Option<usize>,
    pair_second: Option<usize>,
    trait_term: Option<usize>,
    group: Option<usize>,
}

/// Reads every data row of `input` as a `concept` record of `split`.
/// Structural problems with the mapping fail the whole parse; problems
/// with single rows are collected in [`ParseReport::malformed`].
pub fn parse_raw(
    input: impl Read,
    concept: EthicalConcept,
    split: Split,
    schema: &SchemaMapping,
    delimiter: u8,
) -> Result<ParseReport, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_headers)
        .delimiter(schema.delimiter.map_or(delimiter, |c| c as u8))
        .flexible(true)
        .from_reader(input);
    let headers = if schema.has_headers {
        Some(reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone())
    } else {
        None
    };
    let h = headers.as_ref();
    let need = |name: &str, col: &Option<Column>, wanted: bool| -> Result<Option<usize>, Error> {
        match (col, wanted) {
            (Some(c), _) => resolve(c, h).map(Some),
            (None, true) => Err(Error::Schema(format!("{concept} needs a `{name}` column"))),
            (None, false) => Ok(None),
        }
    };
    let slots = Slots {
        label: need("label", &schema.label, concept != EthicalConcept::Utilitarianism)?,
        scenario: resolve(&schema.scenario, h)?,
        excuse: need("excuse", &schema.excuse, concept == EthicalConcept::Deontology)?,
        pair_second: need("pair_second", &schema.pair_second, concept == EthicalConcept::Utilitarianism)?,
        trait_term: need(
            "trait_term",
            &schema.trait_term,
            concept == EthicalConcept::Virtue && schema.trait_separator.is_none(),
        )?,
        group: need("group", &schema.group, false)?,
    };

    let mut report = ParseReport::default();
    for (row, result) in reader.records().enumerate() {
        report.rows += 1;
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.malformed.push(MalformedRow { row, line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match row_to_record(&rec, &slots, concept, split, row, schema) {
            Ok(r) => report.records.push(r),
            Err(reason) => report.malformed.push(MalformedRow { row, line, reason }),
        }
    }
    Ok(report)
}

fn row_to_record(
    rec: &csv::StringRecord,
    slots: &Slots,
    concept: EthicalConcept,
    split: Split,
    row: usize,
    schema: &SchemaMapping,
) -> Result<RawRecord, String> {
    let field = |i: usize| rec.get(i).ok_or_else(|| format!("row has {} fields, column #{i} is missing", rec.len()));
    let mut scenario = field(slots.scenario)?.to_string();
    let mut out = RawRecord::new(concept, split, row, String::new());
    if let Some(i) = slots.label {
        let raw = field(i)?.trim();
        out.label = Some(match raw {
            "0" => 0,
            "1" => 1,
            other => return Err(format!("label `{other}` is not 0 or 1")),
        });
    }
    if let Some(i) = slots.excuse {
        out.excuse = Some(field(i)?.to_string());
    }
    if let Some(i) = slots.pair_second {
        out.pair_second = Some(field(i)?.to_string());
    }
    if let Some(i) = slots.trait_term {
        out.trait_term = Some(field(i)?.to_string());
    } else if let (EthicalConcept::Virtue, Some(sep)) = (concept, &schema.trait_separator) {
        let (s, t) = scenario
            .rsplit_once(sep.as_str())
            .ok_or_else(|| format!("scenario lacks the trait separator `{sep}`"))?;
        out.trait_term = Some(t.trim().to_string());
        scenario = s.trim().to_string();
    }
    if let Some(i) = slots.group {
        out.group = Some(field(i)?.to_string());
    }
    out.scenario = scenario;
    out.validate().map_err(|e| e.to_string())?;
    Ok(out)
}

/// Tab for `.tsv` paths, comma otherwise.
pub fn delimiter_for(path: &std::path::Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("tsv") => b'\t',
        _ => b',',
    }
}
