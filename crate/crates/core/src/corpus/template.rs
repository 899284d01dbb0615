//! The per-concept question templates.

use alloc::string::String;

use rand_core::RngCore;

use super::{CorpusError, QAExample, RawRecord};
use crate::rng;
use crate::EthicalConcept;

/// Question appended to multi-perspective scenarios.
pub const MULTI_PERSPECTIVE_QUESTION: &str = "Is the sentence given consistent with the ethical concepts?";

const COMMONSENSE_Q: &str = "Is the sentence given consistent with commonsense morality?";
const DEONTOLOGY_LEAD: &str = "According to this sentence, is the statement";
const DEONTOLOGY_TAIL: &str = "consistent with deontological ethics?";
const JUSTICE_Q: &str = "Is the sentence given consistent with the principles of justice?";
const UTIL_LEAD: &str = "According to this sentence, would the statement";
const UTIL_TAIL: &str = "be considered to be more utilitarian?";
const VIRTUE_LEAD: &str = "In terms of virtue or vice, is this sentence compatible with the term";

/// Trait slot used when a virtue question is asked about free text.
const VIRTUE_JUDGE_TERM: &str = "Virtues and Vices";

fn join(parts: &[&str]) -> String {
    let mut out = String::new();
    for part in parts {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

fn fill(concept: EthicalConcept, first: &str, second: Option<&str>) -> String {
    let first = first.trim();
    let second = second.map(str::trim).unwrap_or("");
    match concept {
        EthicalConcept::Commonsense => join(&[first, COMMONSENSE_Q]),
        EthicalConcept::Deontology => join(&[first, DEONTOLOGY_LEAD, second, DEONTOLOGY_TAIL]),
        EthicalConcept::Justice => join(&[first, JUSTICE_Q]),
        EthicalConcept::Utilitarianism => join(&[first, UTIL_LEAD, second, UTIL_TAIL]),
        EthicalConcept::Virtue => {
            let mut s = join(&[first, VIRTUE_LEAD, second]);
            s.push('?');
            s
        }
    }
}

/// The concept's template with every text fragment replaced by `{}`.
pub fn template_skeleton(concept: EthicalConcept) -> String {
    match concept {
        EthicalConcept::Commonsense | EthicalConcept::Justice => fill(concept, "{}", None),
        _ => fill(concept, "{}", Some("{}")),
    }
}

/// Replaces the given fragments, in order, by `{}`. Used to check that a
/// produced question is exactly a template once its inputs are removed.
pub fn strip_to_template(text: &str, fragments: &[&str]) -> String {
    let mut out = String::new();
    let mut rest = text;
    for frag in fragments {
        let frag = frag.trim();
        match rest.find(frag) {
            Some(pos) => {
                out.push_str(&rest[..pos]);
                out.push_str("{}");
                rest = &rest[pos + frag.len()..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Rewrites one raw record as a QA example.
///
/// The generator is consumed only for utilitarianism pairs: one fair coin
/// decides whether the pair is swapped. Unswapped pairs keep the upstream
/// order (first sentence is the more pleasant one) and get label 1, swapped
/// pairs get label 0.
pub fn transform<R: RngCore + ?Sized>(record: &RawRecord, rng: &mut R) -> Result<QAExample, CorpusError> {
    record.validate()?;
    let (text, label, swapped) = match record.concept {
        EthicalConcept::Utilitarianism => {
            let s1 = record.scenario.as_str();
            let s2 = record.pair_second.as_deref().unwrap_or_default();
            let swap = rng::coin(rng);
            let (first, second) = if swap { (s2, s1) } else { (s1, s2) };
            (fill(record.concept, first, Some(second)), u8::from(!swap), Some(swap))
        }
        concept => {
            let second = record.excuse.as_deref().or(record.trait_term.as_deref());
            // validate() guarantees presence
            let label = record.label.unwrap_or_default();
            (fill(concept, &record.scenario, second), label, None)
        }
    };
    Ok(QAExample {
        id: record.id(),
        concept: record.concept,
        text,
        label,
        split: record.split,
        group_id: record.group.clone(),
        swapped,
    })
}

/// Wraps a free candidate text in a concept's question for inference.
///
/// Single-sentence concepts use their template directly. Two-slot templates
/// have no second sentence to draw on, so the candidate fills both slots for
/// deontology and utilitarianism, and the virtue trait slot carries the
/// generic term "Virtues and Vices".
pub fn judge_prompt(concept: EthicalConcept, text: &str) -> String {
    match concept {
        EthicalConcept::Commonsense | EthicalConcept::Justice => fill(concept, text, None),
        EthicalConcept::Deontology | EthicalConcept::Utilitarianism => fill(concept, text, Some(text)),
        EthicalConcept::Virtue => fill(concept, text, Some(VIRTUE_JUDGE_TERM)),
    }
}

/// Multi-perspective scenario with the shared question appended.
pub fn multi_perspective_prompt(text: &str) -> String {
    join(&[text.trim(), MULTI_PERSPECTIVE_QUESTION])
}
