//! The gate as a stream filter over `{id, text}` lines.

use std::io::{BufRead, Write};

use ealm_core::gate::{decide, GateError, GatePolicy, Judgment, Verdict};
use ealm_core::CONCEPT_COUNT;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::hex;
use crate::Error;

/// Hex SHA-256 of the policy's JSON form.
pub fn policy_hash(policy: &GatePolicy) -> String {
    hex(&Sha256::digest(serde_json::to_vec(policy).expect("policy serialises")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub text: String,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Absent when the input line carried no readable id.
    pub id: Option<String>,
    /// Absent for `error` verdicts.
    pub scores: Option<[f64; CONCEPT_COUNT]>,
    pub verdict: Verdict,
    pub rule: String,
    pub checkpoint_id: String,
    pub policy_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Annotated<'a> {
    id: &'a str,
    text: &'a str,
    gate: Annotation<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Annotation<'a> {
    verdict: Verdict,
    rule: &'a str,
    scores: [f64; CONCEPT_COUNT],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub total: usize,
    pub passed: usize,
    pub blocked: usize,
    pub annotated: usize,
    pub errors: usize,
}

fn read_candidate(line: &[u8]) -> Result<Candidate, (Option<String>, String)> {
    let text = std::str::from_utf8(line).map_err(|e| (None, format!("invalid UTF-8: {e}")))?;
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| (None, format!("malformed record: {e}")))?;
    let id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
    serde_json::from_value::<Candidate>(value).map_err(|e| (id, format!("malformed record: {e}")))
}

/// Judges every input line and applies `policy`. Passing lines are copied
/// to `output` byte for byte; failing ones are dropped (`block`) or
/// written as `{id, text, gate}` (`annotate`). Every input line, blank or
/// malformed ones included, yields exactly one record on `log`.
pub fn run_batch(
    mut input: impl BufRead,
    mut output: impl Write,
    mut log: impl Write,
    judge: impl Fn(&str) -> Result<Judgment, GateError>,
    policy: &GatePolicy,
    checkpoint_id: &str,
) -> Result<BatchSummary, Error> {
    policy.validate()?;
    let hash = policy_hash(policy);
    let mut summary = BatchSummary::default();
    let mut raw = Vec::new();
    loop {
        raw.clear();
        if input.read_until(b'\n', &mut raw)? == 0 {
            break;
        }
        summary.total += 1;
        let body = raw.strip_suffix(b"\n").unwrap_or(&raw);
        let body = body.strip_suffix(b"\r").unwrap_or(body);
        let mut record = DecisionRecord {
            id: None,
            scores: None,
            verdict: Verdict::Error,
            rule: String::new(),
            checkpoint_id: checkpoint_id.to_string(),
            policy_hash: hash.clone(),
            truncated: None,
        };
        match read_candidate(body) {
            Err((id, why)) => {
                record.id = id;
                record.rule = why;
            }
            Ok(c) => {
                record.id = Some(c.id.clone());
                match judge(&c.text) {
                    Err(e) => record.rule = e.to_string(),
                    Ok(j) => {
                        let ruling = decide(&j.scores, policy);
                        record.scores = Some(j.scores);
                        record.truncated = j.truncated.then_some(true);
                        record.verdict = ruling.verdict;
                        record.rule = ruling.rule;
                        match record.verdict {
                            Verdict::Pass => output.write_all(&raw)?,
                            Verdict::Annotate => {
                                let a = Annotated {
                                    id: &c.id,
                                    text: &c.text,
                                    gate: Annotation { verdict: record.verdict, rule: &record.rule, scores: j.scores },
                                };
                                serde_json::to_writer(&mut output, &a).map_err(std::io::Error::from)?;
                                output.write_all(b"\n")?;
                            }
                            Verdict::Block | Verdict::Error => {}
                        }
                    }
                }
            }
        }
        match record.verdict {
            Verdict::Pass => summary.passed += 1,
            Verdict::Block => summary.blocked += 1,
            Verdict::Annotate => summary.annotated += 1,
            Verdict::Error => summary.errors += 1,
        }
        serde_json::to_writer(&mut log, &record).map_err(std::io::Error::from)?;
        log.write_all(b"\n")?;
    }
    output.flush()?;
    log.flush()?;
    Ok(summary)
}

/// A log record whose verdict `decide` no longer reproduces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMismatch {
    pub line: usize,
    pub logged: Verdict,
    pub replayed: Verdict,
}

/// Re-runs `decide` over every judged record of a decision log.
pub fn replay(log: impl BufRead, policy: &GatePolicy) -> Result<Vec<ReplayMismatch>, Error> {
    let records: Vec<DecisionRecord> = crate::jsonl::read_jsonl(log)?;
    let hash = policy_hash(policy);
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let Some(scores) = r.scores else { continue };
        if r.policy_hash != hash {
            return Err(Error::Config(format!("log record {} was made under policy {}", i + 1, r.policy_hash)));
        }
        let again = decide(&scores, policy);
        if again.verdict != r.verdict || again.rule != r.rule {
            out.push(ReplayMismatch { line: i + 1, logged: r.verdict, replayed: again.verdict });
        }
    }
    Ok(out)
}
