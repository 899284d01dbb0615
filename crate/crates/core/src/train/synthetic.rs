use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Target, TrainExample};
use crate::model::{DescriptionSource, EncoderConfig, HeadKind, Mode, Vocabulary};
use crate::rng::{below, keyed, shuffle};
use crate::EthicalConcept;

/// Balanced binary set where the label is carried by one planted word:
/// `good` marks class 1, `bad` class 0, surrounded by random filler.
/// `n` is rounded down to an even count.
pub fn planted_rule(n: usize, seed: u64) -> (Vec<TrainExample>, Vocabulary) {
    let mut rng = keyed(seed, 0);
    let mut labels: Vec<u8> = (0..n / 2 * 2).map(|i| (i % 2) as u8).collect();
    shuffle(&mut rng, &mut labels);
    let examples: Vec<TrainExample> = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut words: Vec<String> = (0..6).map(|_| format!("w{}", below(&mut rng, 20))).collect();
            let at = below(&mut rng, 7) as usize;
            words.insert(at, String::from(if label == 1 { "good" } else { "bad" }));
            TrainExample {
                id: format!("planted:{i}"),
                text: words.join(" "),
                source: DescriptionSource::Concept(EthicalConcept::Commonsense),
                target: Target::Binary(label),
            }
        })
        .collect();
    let texts = examples.iter().map(|e| e.text.as_str()).chain([EthicalConcept::Commonsense.description()]);
    let vocab = Vocabulary::build(texts, 1);
    (examples, vocab)
}

/// Small dual-stream config sized for [`planted_rule`].
pub fn tiny_config(vocab_size: usize) -> EncoderConfig {
    EncoderConfig {
        layers: 1,
        hidden: 16,
        heads: 2,
        ff_size: 32,
        max_text_len: 12,
        max_des_len: 12,
        vocab_size,
        ca_layers: 2,
        mode: Mode::Ealm,
        head: HeadKind::BinarySoftmax,
        init_seed: 0,
    }
}
