//! Line-delimited JSON: QA datasets, multi-perspective sets, metric logs.

use std::io::{BufRead, Write};

use ealm_core::corpus::{MultiPerspectiveExample, QAExample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Error;

/// One compact JSON object per line, `\n` terminated.
pub fn write_jsonl<T: Serialize>(mut out: impl Write, items: impl IntoIterator<Item = T>) -> Result<(), Error> {
    for item in items {
        serde_json::to_writer(&mut out, &item).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses every non-blank line. Errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(input: impl BufRead) -> Result<Vec<T>, Error> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Line { line: i + 1, detail: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_qa(input: impl BufRead) -> Result<Vec<QAExample>, Error> {
    read_jsonl(input)
}

#[derive(Deserialize)]
struct MpLine {
    id: String,
    text: String,
    labels: Vec<i64>,
}

/// Multi-perspective records `{id, text, labels: [5 x 0/1]}`, one per line.
pub fn load_mp_ethics(input: impl BufRead) -> Result<Vec<MultiPerspectiveExample>, Error> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| Error::Line { line: i + 1, detail };
        let rec: MpLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let ex = MultiPerspectiveExample::new(rec.id, rec.text, &rec.labels).map_err(|e| bad(e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}
