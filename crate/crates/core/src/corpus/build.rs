use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{transform, CorpusError, QAExample, RawRecord, Split};
use crate::rng;
use crate::{EthicalConcept, CONCEPT_COUNT};

/// How exact-match groups are formed for records that carry no explicit
/// group column: consecutive records of the same concept and split are
/// chunked by the concept's group size. `None` leaves a concept ungrouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub sizes: [Option<usize>; CONCEPT_COUNT],
}

impl Default for Grouping {
    fn default() -> Self {
        let mut sizes = [None; CONCEPT_COUNT];
        sizes[EthicalConcept::Deontology.index()] = Some(4);
        sizes[EthicalConcept::Justice.index()] = Some(4);
        sizes[EthicalConcept::Virtue.index()] = Some(5);
        Grouping { sizes }
    }
}

impl Grouping {
    pub fn none() -> Self {
        Grouping { sizes: [None; CONCEPT_COUNT] }
    }

    pub fn size(&self, concept: EthicalConcept) -> Option<usize> {
        self.sizes[concept.index()]
    }

    pub fn with_size(mut self, concept: EthicalConcept, size: Option<usize>) -> Self {
        self.sizes[concept.index()] = size;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub hard_test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.test + self.hard_test
    }

    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Test => self.test += 1,
            Split::HardTest => self.hard_test += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub counts: SplitCounts,
    pub total: usize,
    /// Mean whitespace token count of the templated questions.
    pub mean_tokens: f64,
    /// Mean whitespace token count of the raw input fragments.
    pub mean_raw_tokens: f64,
}

/// Transforms every record, seeding each utilitarianism coin from
/// `(seed, record index)`. Output order equals input order.
pub fn build_qa_ethics(
    records: &[RawRecord],
    seed: u64,
    grouping: &Grouping,
) -> Result<(Vec<QAExample>, DatasetStats), CorpusError> {
    let mut out = Vec::with_capacity(records.len());
    let mut counts = SplitCounts::default();
    let mut tokens = 0usize;
    let mut raw_tokens = 0usize;
    let mut positions: BTreeMap<(EthicalConcept, Split), usize> = BTreeMap::new();

    for (index, record) in records.iter().enumerate() {
        let mut rng = rng::keyed(seed, index as u64);
        let mut qa = transform(record, &mut rng).map_err(|e| CorpusError::AtRecord {
            index,
            source: Box::new(e),
        })?;
        if qa.group_id.is_none() {
            if let Some(size) = grouping.size(record.concept).filter(|s| *s > 0) {
                let pos = positions.entry((record.concept, record.split)).or_default();
                qa.group_id = Some(format!("{}:{}:g{}", record.concept, record.split, *pos / size));
                *pos += 1;
            }
        }
        counts.bump(record.split);
        tokens += qa.token_len();
        raw_tokens += record.raw_token_len();
        out.push(qa);
    }

    let total = counts.total();
    let mean = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let stats = DatasetStats {
        counts,
        total,
        mean_tokens: mean(tokens),
        mean_raw_tokens: mean(raw_tokens),
    };
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn records() -> Vec<RawRecord> {
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(RawRecord::new(EthicalConcept::Justice, Split::Train, i, "I earned it.").with_label((i % 2) as u8));
        }
        for i in 0..5 {
            v.push(RawRecord::new(EthicalConcept::Utilitarianism, Split::Test, i, "I ate cake.").with_pair_second("I ate dirt."));
        }
        v.push(RawRecord::new(EthicalConcept::Commonsense, Split::HardTest, 0, "I lied.").with_label(0));
        v
    }

    #[test]
    fn deterministic_and_order_preserving() {
        let rs = records();
        let (a, sa) = build_qa_ethics(&rs, 7, &Grouping::default()).unwrap();
        let (b, sb) = build_qa_ethics(&rs, 7, &Grouping::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        for (qa, r) in a.iter().zip(&rs) {
            assert_eq!(qa.id, r.id());
        }
    }

    #[test]
    fn stats_count_splits_and_lengths() {
        let (qa, stats) = build_qa_ethics(&records(), 1, &Grouping::default()).unwrap();
        assert_eq!(stats.counts, SplitCounts { train: 6, test: 5, hard_test: 1 });
        assert_eq!(stats.total, 12);
        let expected = qa.iter().map(|q| q.token_len()).sum::<usize>() as f64 / 12.0;
        assert_eq!(stats.mean_tokens, expected);
        assert!(stats.mean_tokens > stats.mean_raw_tokens);
    }

    #[test]
    fn consecutive_grouping_by_concept_and_split() {
        let (qa, _) = build_qa_ethics(&records(), 1, &Grouping::default()).unwrap();
        let groups: Vec<_> = qa[..6].iter().map(|q| q.group_id.clone().unwrap()).collect();
        assert_eq!(groups[0], "justice:train:g0");
        assert_eq!(groups[3], "justice:train:g0");
        assert_eq!(groups[4], "justice:train:g1");
        assert!(qa[6..].iter().all(|q| q.group_id.is_none()));
    }

    #[test]
    fn explicit_group_column_wins() {
        let mut rs = records();
        rs[0].group = Some("custom".to_string());
        let (qa, _) = build_qa_ethics(&rs, 1, &Grouping::default()).unwrap();
        assert_eq!(qa[0].group_id.as_deref(), Some("custom"));
        assert_eq!(qa[1].group_id.as_deref(), Some("justice:train:g0"));
    }

    #[test]
    fn errors_carry_the_record_index() {
        let mut rs = records();
        rs[4].label = None;
        match build_qa_ethics(&rs, 1, &Grouping::default()) {
            Err(CorpusError::AtRecord { index, .. }) => assert_eq!(index, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        let (qa, stats) = build_qa_ethics(&[], 0, &Grouping::none()).unwrap();
        assert!(qa.is_empty());
        assert_eq!(stats.total, 0);
        assert_eq!(stats.mean_tokens, 0.0);
    }
}
