use rand_core::RngCore;

use super::*;
use crate::model::{EncoderConfig, Mode};
use crate::rng::{below, keyed, unit_f64};

fn all(p: GatePolicy) -> GatePolicy {
    GatePolicy { mode: GateMode::RequireAll, ..p }
}

#[test]
fn require_all_examples() {
    let p = all(GatePolicy::default());
    assert_eq!(decide(&[1.0; 5], &p).verdict, Verdict::Pass);
    let r = decide(&[0.9, 0.9, 0.2, 0.9, 0.9], &p);
    assert_eq!(r.verdict, Verdict::Block);
    assert_eq!(r.rule, "require_all:justice");
    let annotate = GatePolicy { fail_action: FailAction::Annotate, ..p.clone() };
    assert_eq!(decide(&[0.0; 5], &annotate).verdict, Verdict::Annotate);
    // boundary: >= by default, > when strict
    assert_eq!(decide(&[0.5; 5], &p).verdict, Verdict::Pass);
    let strict = GatePolicy { strict: true, ..p };
    assert_eq!(decide(&[0.5; 5], &strict).verdict, Verdict::Block);
}

#[test]
fn require_any_examples() {
    let p = GatePolicy { mode: GateMode::RequireAny, ..Default::default() };
    assert_eq!(decide(&[0.1, 0.1, 0.1, 0.6, 0.1], &p).rule, "require_any:utilitarianism");
    let r = decide(&[0.1; 5], &p);
    assert_eq!((r.verdict, r.rule.as_str()), (Verdict::Block, "require_any:none"));
}

#[test]
fn weighted_with_one_weight_thresholds_that_concept() {
    let mut r = keyed(1, 0);
    for target in 0..5 {
        let mut weights = [0.0; 5];
        weights[target] = 1.0;
        let p = GatePolicy { mode: GateMode::Weighted, weights, global_threshold: 0.3, ..Default::default() };
        p.validate().unwrap();
        for _ in 0..200 {
            let s: [f64; 5] = core::array::from_fn(|_| unit_f64(&mut r));
            assert_eq!(decide(&s, &p).verdict == Verdict::Pass, s[target] >= 0.3);
        }
    }
}

#[test]
fn degenerate_policies() {
    let open = GatePolicy { thresholds: [0.0; 5], ..Default::default() };
    let closed = GatePolicy { thresholds: [1.0; 5], strict: true, ..Default::default() };
    let mut r = keyed(2, 0);
    for _ in 0..500 {
        let s: [f64; 5] = core::array::from_fn(|_| unit_f64(&mut r));
        assert_eq!(decide(&s, &open).verdict, Verdict::Pass);
        assert_eq!(decide(&s, &closed).verdict, Verdict::Block);
    }
    assert_eq!(decide(&[1.0; 5], &closed).verdict, Verdict::Block);
}

#[test]
fn policy_validation() {
    assert!(GatePolicy::default().validate().is_ok());
    let bad = GatePolicy { thresholds: [0.5, 0.5, 1.5, 0.5, 0.5], ..Default::default() };
    assert!(matches!(bad.validate(), Err(GateError::Policy(m)) if m.contains("justice")));
    let w = GatePolicy { mode: GateMode::Weighted, weights: [0.5, 0.5, 0.5, 0.0, 0.0], ..Default::default() };
    assert!(w.validate().is_err());
    let neg = GatePolicy { mode: GateMode::Weighted, weights: [1.5, -0.5, 0.0, 0.0, 0.0], ..Default::default() };
    assert!(neg.validate().is_err());
}

pub(crate) fn random_policy<R: RngCore>(r: &mut R) -> GatePolicy {
    let mode = [GateMode::RequireAll, GateMode::RequireAny, GateMode::Weighted][below(r, 3) as usize];
    let raw: [f64; 5] = core::array::from_fn(|_| unit_f64(r));
    let total: f64 = raw.iter().sum();
    GatePolicy {
        mode,
        thresholds: core::array::from_fn(|_| unit_f64(r)),
        weights: raw.map(|w| w / total),
        global_threshold: unit_f64(r),
        strict: r.next_u32() & 1 == 1,
        fail_action: if r.next_u32() & 1 == 1 { FailAction::Block } else { FailAction::Annotate },
    }
}

#[test]
fn raising_a_score_never_blocks_a_pass() {
    let mut r = keyed(3, 0);
    for _ in 0..10_000 {
        let p = random_policy(&mut r);
        let s: [f64; 5] = core::array::from_fn(|_| unit_f64(&mut r));
        let mut raised = s;
        let slot = below(&mut r, 5) as usize;
        raised[slot] += (1.0 - raised[slot]) * unit_f64(&mut r);
        if decide(&s, &p).verdict == Verdict::Pass {
            assert_eq!(decide(&raised, &p).verdict, Verdict::Pass, "{p:?} {s:?} -> {raised:?}");
        }
    }
}

#[test]
fn rulings_replay() {
    let mut r = keyed(4, 0);
    for _ in 0..1000 {
        let p = random_policy(&mut r);
        let s: [f64; 5] = core::array::from_fn(|_| unit_f64(&mut r));
        assert_eq!(decide(&s, &p), decide(&s, &p.clone()));
    }
}

fn judge_model(head: HeadKind) -> (Model, Vocabulary) {
    let texts = EthicalConcept::ALL.map(|c| c.description());
    let vocab = Vocabulary::build(texts.iter().copied().chain(["I took the last cookie."]), 1);
    let cfg = EncoderConfig {
        layers: 1,
        hidden: 8,
        heads: 2,
        ff_size: 8,
        max_text_len: 24,
        max_des_len: 24,
        vocab_size: vocab.len(),
        ca_layers: 1,
        mode: Mode::Ealm,
        head,
        init_seed: 5,
    };
    (Model::new(cfg).unwrap(), vocab)
}

#[test]
fn judge_contract() {
    for head in [HeadKind::BinarySoftmax, HeadKind::MultilabelSigmoid] {
        let (m, v) = judge_model(head);
        let a = judge(&m, &v, "I took the last cookie.").unwrap();
        assert!(a.scores.iter().all(|s| (0.0..=1.0).contains(s)));
        assert_eq!(a, judge(&m, &v, "I took the last cookie.").unwrap());
        assert!(a.truncated);
        assert_eq!(judge(&m, &v, "  "), Err(GateError::EmptyText));
    }
}

#[test]
fn binary_judge_scores_each_concept_prompt() {
    let (m, v) = judge_model(HeadKind::BinarySoftmax);
    let text = "I took the last cookie.";
    let j = judge(&m, &v, text).unwrap();
    for c in EthicalConcept::ALL {
        let input = m.prepare(&v, &judge_prompt(c, text), DescriptionSource::Concept(c)).unwrap();
        assert_eq!(j.scores[c.index()], m.probabilities(&input).unwrap()[1]);
    }
}
