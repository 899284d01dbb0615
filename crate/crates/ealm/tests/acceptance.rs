//! Acceptance suite. Prints one PASS/FAIL (or SKIP) line per criterion and
//! exits non-zero when any criterion fails.
//!
//! Run with `cargo test -p ealm --test acceptance`.

use std::fs;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ealm::checkpoint;
use ealm::gate::{replay, run_batch, DecisionRecord};
use ealm::jsonl::write_jsonl;
use ealm::records::{delimiter_for, parse_raw, SchemaMapping};
use ealm_core::corpus::{build_qa_ethics, transform, Grouping, RawRecord, Split};
use ealm_core::eval::{accuracy, exact_match, samples_f1, Gold, MultiGold, MultiPrediction, Prediction};
use ealm_core::gate::{decide, judge, FailAction, GateMode, GatePolicy, Verdict};
use ealm_core::model::{
    DescriptionSource, DualStreamState, EncodedInput, EncoderConfig, HeadKind, Mode, Model, ModelError, Tokenized,
    Vocabulary,
};
use ealm_core::rng::{below, coin, keyed, standard_normal, unit_f64};
use ealm_core::tensor::{grad_check, Graph, Tensor, TensorError, Var};
use ealm_core::train::{planted_rule, tiny_config, train_run, TrainConfig};
use ealm_core::{EthicalConcept, CONCEPT_COUNT};

type Outcome = Result<String, String>;
type Criterion = Box<dyn FnOnce() -> Option<Outcome>>;

enum Status {
    Pass,
    Fail,
    Skip,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(took)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn random(shape: &[usize], seed: u64, key: u64) -> Tensor {
    let mut rng = keyed(seed, key);
    Tensor::from_fn(shape, |_| standard_normal(&mut rng))
}

fn small_vocab() -> Vocabulary {
    let mut texts = vec!["I lied to my friend.", "I helped my neighbour carry groceries.", "She kept the money."];
    texts.extend(EthicalConcept::ALL.iter().map(|c| c.description()));
    Vocabulary::build(texts, 1)
}

fn ealm_config(vocab: &Vocabulary, head: HeadKind, seed: u64) -> EncoderConfig {
    EncoderConfig {
        layers: 2,
        hidden: 8,
        heads: 2,
        ff_size: 16,
        max_text_len: 12,
        max_des_len: 16,
        vocab_size: vocab.len(),
        ca_layers: 2,
        mode: Mode::Ealm,
        head,
        init_seed: seed,
    }
}

/// Model with N(0, scale) noise added to every parameter.
fn perturbed(config: EncoderConfig, scale: f64, seed: u64) -> Model {
    let mut m = Model::new(config).unwrap();
    let mut rng = keyed(seed, 77);
    for i in 0..m.params().len() {
        for v in m.params_mut().get_mut(i).tensor.values_mut() {
            *v += scale * standard_normal(&mut rng);
        }
    }
    m
}

/// Random token ids after `[CLS]`, padded by up to two positions.
fn random_input(m: &Model, vocab: &Vocabulary, seed: u64, trial: u64) -> EncodedInput {
    let mut rng = keyed(seed, trial);
    let max = m.config().max_text_len;
    let len = 2 + below(&mut rng, (max - 3) as u64) as usize;
    let ids: Vec<usize> = (0..len)
        .map(|i| if i == 0 { Vocabulary::CLS_ID } else { 4 + below(&mut rng, (vocab.len() - 4) as u64) as usize })
        .collect();
    let pad = (len + below(&mut rng, 3) as usize).min(max);
    let text = Tokenized { mask: vec![true; len], ids, truncated: false, empty_input: false }.pad_to(pad);
    let concept = EthicalConcept::ALL[below(&mut rng, 5) as usize];
    let des = m.prepare(vocab, "", DescriptionSource::Concept(concept)).unwrap().des;
    EncodedInput { text, des }
}

// 1

fn golden_suite() -> Outcome {
    let start = Instant::now();
    let concepts = ["commonsense", "deontology", "justice", "utilitarianism", "virtue"];
    let mut records = 0;
    for (name, concept) in concepts.iter().zip([
        EthicalConcept::Commonsense,
        EthicalConcept::Deontology,
        EthicalConcept::Justice,
        EthicalConcept::Utilitarianism,
        EthicalConcept::Virtue,
    ]) {
        let path = fixture(&format!("{name}.csv"));
        let f = fs::File::open(&path).map_err(|e| e.to_string())?;
        let raw = parse_raw(f, concept, Split::Train, &SchemaMapping::upstream(concept), delimiter_for(&path))
            .and_then(|r| r.into_records())
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(raw.len() >= 4, || format!("{name}: only {} fixture records", raw.len()))?;
        records += raw.len();
        let (qa, _) = build_qa_ethics(&raw, 7, &Grouping::default()).map_err(|e| format!("{name}: {e}"))?;
        let mut got = Vec::new();
        write_jsonl(&mut got, qa.iter()).map_err(|e| e.to_string())?;
        let want = fs::read(fixture(&format!("{name}.golden.jsonl"))).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{name}: output differs from golden"))?;
        if concept == EthicalConcept::Justice {
            let expected = "I deserve to be paid by my boss because I keep her house clean daily \
                            Is the sentence given consistent with the principles of justice?";
            ensure(qa[0].text == expected, || format!("justice example rendered as {:?}", qa[0].text))?;
        }
    }
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("{records} records across 5 concepts in {took:.2?}"))
}

// 2

fn utilitarian_complement() -> Outcome {
    let mut violations = 0;
    let mut swaps = 0;
    for i in 0..10_000u64 {
        let mut words = keyed(99, i);
        let s1 = format!("I ate {} apples at noon.", below(&mut words, 50));
        let s2 = format!("I ate {} pears at dusk.", below(&mut words, 50));
        let rec = RawRecord::new(EthicalConcept::Utilitarianism, Split::Train, i as usize, s1).with_pair_second(s2);
        let qa = transform(&rec, &mut keyed(2024, i)).map_err(|e| e.to_string())?;
        let swapped = qa.swapped.ok_or("utilitarianism example without swap flag")?;
        swaps += usize::from(swapped);
        if qa.label != 1 - u8::from(swapped) {
            violations += 1;
        }
        let first = &qa.text[..qa.text.find('.').unwrap_or(0)];
        if swapped != first.contains("pears") {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("0 violations over 10000 pairs ({swaps} swapped)"))
}

// 3

fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> Result<Var, TensorError> {
    let w = g.constant(random(g.value(out).shape(), seed, 999));
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

type OpFn = fn(&mut Graph, Var, u64) -> Result<Var, TensorError>;

fn op_catalog() -> Vec<(&'static str, Vec<usize>, OpFn)> {
    vec![
        ("matmul", vec![3, 4], |g, x, s| {
            let b = g.constant(random(&[4, 2], s, 1));
            let a = g.constant(random(&[2, 3], s, 2));
            let l = g.matmul(x, b)?;
            let r = g.matmul(a, x)?;
            let l = weighted_sum(g, l, s)?;
            let r = weighted_sum(g, r, s + 1)?;
            g.add(l, r)
        }),
        ("add", vec![3, 4], |g, x, s| {
            let b = g.constant(random(&[3, 4], s, 1));
            let y = g.add(x, b)?;
            let y = g.add(y, x)?;
            weighted_sum(g, y, s)
        }),
        ("add_row", vec![3, 4], |g, x, s| {
            let b = g.constant(random(&[4], s, 1));
            let y = g.add_row(x, b)?;
            let m = g.constant(random(&[2, 4], s, 2));
            let row = g.mean_rows(x, None)?;
            let z = g.add_row(m, row)?;
            let y = weighted_sum(g, y, s)?;
            let z = weighted_sum(g, z, s + 1)?;
            g.add(y, z)
        }),
        ("mul", vec![3, 4], |g, x, s| {
            let b = g.constant(random(&[3, 4], s, 1));
            let y = g.mul(x, b)?;
            let y = g.mul(y, x)?;
            weighted_sum(g, y, s)
        }),
        ("scale", vec![2, 5], |g, x, s| {
            let y = g.scale(x, 0.37);
            weighted_sum(g, y, s)
        }),
        ("softmax_rows", vec![3, 5], |g, x, s| {
            let a = g.softmax_rows(x, None)?;
            let b = g.softmax_rows(x, Some(&[false, true, true, false, true]))?;
            let a = weighted_sum(g, a, s)?;
            let b = weighted_sum(g, b, s + 1)?;
            g.add(a, b)
        }),
        ("layernorm", vec![3, 6], |g, x, s| {
            let gain = g.constant(random(&[6], s, 1));
            let bias = g.constant(random(&[6], s, 2));
            let y = g.layernorm(x, gain, bias)?;
            weighted_sum(g, y, s)
        }),
        ("layernorm_gain", vec![5], |g, x, s| {
            let input = g.constant(random(&[3, 5], s, 1));
            let bias = g.constant(random(&[5], s, 2));
            let y = g.layernorm(input, x, bias)?;
            let z = g.layernorm(input, bias, x)?;
            let y = weighted_sum(g, y, s)?;
            let z = weighted_sum(g, z, s + 1)?;
            g.add(y, z)
        }),
        ("gelu", vec![4, 4], |g, x, s| {
            let y = g.gelu(x);
            weighted_sum(g, y, s)
        }),
        ("sigmoid", vec![3, 3], |g, x, s| {
            let y = g.sigmoid(x);
            weighted_sum(g, y, s)
        }),
        ("embed_lookup", vec![5, 3], |g, x, s| {
            let y = g.embed_lookup(x, &[1, 4, 1, 0])?;
            weighted_sum(g, y, s)
        }),
        ("concat_rows", vec![2, 3], |g, x, s| {
            let b = g.constant(random(&[2, 3], s, 1));
            let y = g.concat_rows(&[b, x, x])?;
            weighted_sum(g, y, s)
        }),
        ("mean_rows", vec![4, 3], |g, x, s| {
            let a = g.mean_rows(x, None)?;
            let b = g.mean_rows(x, Some(&[false, true, true, false]))?;
            let a = weighted_sum(g, a, s)?;
            let b = weighted_sum(g, b, s + 1)?;
            g.add(a, b)
        }),
        ("transpose", vec![2, 5], |g, x, s| {
            let y = g.transpose(x)?;
            weighted_sum(g, y, s)
        }),
        ("slice_heads", vec![3, 6], |g, x, s| {
            let y = g.slice_heads(x, 2, 3)?;
            weighted_sum(g, y, s)
        }),
        ("merge_heads", vec![3, 2], |g, x, s| {
            let b = g.constant(random(&[3, 2], s, 1));
            let y = g.merge_heads(&[x, b, x])?;
            weighted_sum(g, y, s)
        }),
        ("sum", vec![3, 3], |g, x, _| {
            let sq = g.mul(x, x)?;
            Ok(g.sum(sq))
        }),
        ("cross_entropy", vec![4, 2], |g, x, _| g.cross_entropy(x, &[0, 1, 1, 0])),
        ("bce_with_logits", vec![2, 5], |g, x, _| {
            g.bce_with_logits(x, &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
        }),
    ]
}

fn model_loss_at(m: &Model, inputs: &[EncodedInput], slot: usize, g: &mut Graph, x: Var) -> Result<Var, TensorError> {
    let vars = m.params().iter().enumerate().map(|(i, p)| if i == slot { x } else { g.constant(p.tensor.clone()) }).collect();
    let wrap = |e: ModelError| TensorError::Contract(e.to_string());
    let mut pass = m.bind_vars(g, vars).map_err(wrap)?;
    let logits = pass.forward_batch(inputs).map_err(wrap)?;
    pass.graph.cross_entropy(logits, &[1, 0])
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut ops = 0;
    let mut worst_op = 0.0f64;
    for (name, shape, f) in op_catalog() {
        for trial in 0..100u64 {
            let x = random(&shape, 17, trial);
            let err = grad_check(|g, v| f(g, v, trial), &x, 1e-5).map_err(|e| format!("{name}: {e}"))?;
            ensure(err < 1e-6, || format!("{name} trial {trial}: relative error {err:e}"))?;
            worst_op = worst_op.max(err);
        }
        ops += 1;
    }

    let vocab = small_vocab();
    let m = perturbed(ealm_config(&vocab, HeadKind::BinarySoftmax, 3), 0.3, 3);
    let source = DescriptionSource::Concept(EthicalConcept::Deontology);
    let inputs = [
        m.prepare(&vocab, "I lied to my friend.", source).map_err(|e| e.to_string())?,
        m.prepare(&vocab, "She kept the money.", source).map_err(|e| e.to_string())?,
    ];
    let mut worst_model = 0.0f64;
    for slot in 0..m.params().len() {
        let x = m.params().get(slot).tensor.clone();
        let name = &m.params().get(slot).name;
        let err = grad_check(|g, v| model_loss_at(&m, &inputs, slot, g, v), &x, 1e-5).map_err(|e| format!("{name}: {e}"))?;
        ensure(err < 1e-5, || format!("{name}: relative error {err:e}"))?;
        worst_model = worst_model.max(err);
    }
    let took = within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{ops} ops max {worst_op:.1e}; {} model tensors max {worst_model:.1e}; {took:.2?}",
        m.params().len()
    ))
}

// 4

fn attention_stochasticity() -> Outcome {
    let vocab = small_vocab();
    let m = perturbed(ealm_config(&vocab, HeadKind::BinarySoftmax, 5), 0.5, 5);
    let mut rows = 0;
    let mut masked = 0;
    for trial in 0..100u64 {
        let x = random_input(&m, &vocab, 8, trial);
        let mut g = Graph::new();
        let mut p = m.bind(&mut g);
        p.forward(&x).map_err(|e| e.to_string())?;
        for rec in &p.attention {
            let w = p.graph.value(rec.weights);
            let (r, c) = w.dims().ok_or("attention weights are not a matrix")?;
            for i in 0..r {
                let s: f64 = w.row_slice(i).iter().sum();
                ensure((s - 1.0).abs() < 1e-9, || format!("trial {trial}: row sums to {s}"))?;
                rows += 1;
                for j in (0..c).filter(|&j| !rec.key_mask[j]) {
                    ensure(w.at(i, j) < 1e-9, || format!("trial {trial}: masked weight {}", w.at(i, j)))?;
                    masked += 1;
                }
            }
        }
    }
    Ok(format!("{rows} rows, {masked} masked cells over 100 inputs"))
}

// 5

fn ca_order_independence() -> Outcome {
    let vocab = small_vocab();
    let mut compared = 0;
    for trial in 0..100u64 {
        let m = perturbed(ealm_config(&vocab, HeadKind::BinarySoftmax, trial), 0.3, trial);
        let mut rng = keyed(31, trial);
        let nt = 1 + below(&mut rng, 8) as usize;
        let nd = 1 + below(&mut rng, 8) as usize;
        let mut mask = |n: usize| -> Vec<bool> {
            let mut v: Vec<bool> = (0..n).map(|_| coin(&mut rng)).collect();
            v[0] = true;
            v
        };
        let text_mask = mask(nt);
        let des_mask = mask(nd);
        let mut g = Graph::new();
        let text = g.constant(random(&[nt, 8], 32, trial));
        let des = g.constant(random(&[nd, 8], 33, trial));
        let state = DualStreamState { text, des, text_mask, des_mask };
        let mut p = m.bind(&mut g);
        for layer in 0..m.config().ca_layers {
            let a = p.ca_layer_ordered(&state, layer, true).map_err(|e| e.to_string())?;
            let b = p.ca_layer_ordered(&state, layer, false).map_err(|e| e.to_string())?;
            for (x, y) in [(a.text, b.text), (a.des, b.des)] {
                let bits = |v: Var, g: &Graph| g.value(v).values().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
                ensure(bits(x, p.graph) == bits(y, p.graph), || format!("trial {trial} layer {layer} differs"))?;
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} layer evaluations bitwise equal"))
}

// 6

fn oracle_accuracy(p: &[u8], g: &[u8]) -> f64 {
    let mut hit = 0;
    for i in 0..p.len() {
        if p[i] == g[i] {
            hit += 1;
        }
    }
    hit as f64 / p.len() as f64
}

fn oracle_exact_match(p: &[u8], g: &[u8], groups: &[usize]) -> f64 {
    let mut seen: Vec<usize> = Vec::new();
    let mut hits = 0;
    for &grp in groups {
        if seen.contains(&grp) {
            continue;
        }
        seen.push(grp);
        if (0..p.len()).filter(|&i| groups[i] == grp).all(|i| p[i] == g[i]) {
            hits += 1;
        }
    }
    hits as f64 / seen.len() as f64
}

fn oracle_samples_f1(p: &[[u8; CONCEPT_COUNT]], g: &[[u8; CONCEPT_COUNT]]) -> f64 {
    let mut total = 0.0;
    for (a, b) in p.iter().zip(g) {
        let (mut tp, mut fp, mut fneg) = (0, 0, 0);
        for k in 0..CONCEPT_COUNT {
            match (a[k], b[k]) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fneg += 1,
                _ => {}
            }
        }
        total += if tp + fp + fneg == 0 { 1.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64 };
    }
    total / p.len() as f64
}

fn metric_oracles() -> Outcome {
    for case in 0..1000u64 {
        let mut rng = keyed(61, case);
        let n = 1 + below(&mut rng, 12) as usize;
        let p: Vec<u8> = (0..n).map(|_| u8::from(coin(&mut rng))).collect();
        let g: Vec<u8> = (0..n).map(|_| u8::from(coin(&mut rng))).collect();
        let groups: Vec<usize> = (0..n).map(|_| below(&mut rng, 4) as usize).collect();
        let preds: Vec<Prediction> = p
            .iter()
            .enumerate()
            .map(|(i, &l)| Prediction { id: i.to_string(), label: l, scores: [f64::from(1 - l), f64::from(l)] })
            .collect();
        let golds: Vec<Gold> = g
            .iter()
            .zip(&groups)
            .enumerate()
            .map(|(i, (&l, grp))| Gold { id: i.to_string(), label: l, group: Some(format!("g{grp}")) })
            .collect();
        let acc = accuracy(&preds, &golds).map_err(|e| e.to_string())?;
        ensure(acc == oracle_accuracy(&p, &g), || format!("accuracy case {case}"))?;
        let em = exact_match(&preds, &golds).map_err(|e| e.to_string())?;
        ensure(em == oracle_exact_match(&p, &g, &groups), || format!("exact match case {case}"))?;

        let mp: Vec<[u8; CONCEPT_COUNT]> = (0..n).map(|_| std::array::from_fn(|_| u8::from(coin(&mut rng)))).collect();
        let mg: Vec<[u8; CONCEPT_COUNT]> = (0..n).map(|_| std::array::from_fn(|_| u8::from(coin(&mut rng)))).collect();
        let mpreds: Vec<MultiPrediction> = mp
            .iter()
            .enumerate()
            .map(|(i, l)| MultiPrediction::from_scores(i.to_string(), l.map(f64::from), 0.5))
            .collect();
        let mgolds: Vec<MultiGold> = mg.iter().enumerate().map(|(i, l)| MultiGold { id: i.to_string(), labels: *l }).collect();
        let f1 = samples_f1(&mpreds, &mgolds).map_err(|e| e.to_string())?;
        ensure(f1 == oracle_samples_f1(&mp, &mg), || format!("samples F1 case {case}"))?;
    }
    Ok("accuracy, exact_match, samples_f1 equal on 1000 cases each".into())
}

// 7

fn random_baseline() -> Outcome {
    let start = Instant::now();
    let mut rng = keyed(7, 0);
    let n = 100_000;
    let mut draw = |i: usize, group: Option<String>| {
        let gold = Gold { id: i.to_string(), label: u8::from(coin(&mut rng)), group };
        let s = unit_f64(&mut rng);
        (Prediction::from_scores(i.to_string(), [1.0 - s, s]), gold)
    };
    let (preds, golds): (Vec<_>, Vec<_>) = (0..n).map(|i| draw(i, None)).unzip();
    let acc = accuracy(&preds, &golds).map_err(|e| e.to_string())?;
    let (preds, golds): (Vec<_>, Vec<_>) = (0..4 * n).map(|i| draw(i, Some(format!("g{}", i / 4)))).unzip();
    let em = exact_match(&preds, &golds).map_err(|e| e.to_string())?;
    ensure((acc - 0.5).abs() <= 0.005, || format!("accuracy {acc:.4}"))?;
    ensure((em - 0.0625).abs() <= 0.005, || format!("exact match {em:.4}"))?;
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!("accuracy {acc:.4} over {n}, exact match {em:.4} over {n} groups of 4, {took:.2?}"))
}

// 8

fn tiny_overfit() -> Outcome {
    let start = Instant::now();
    let (examples, vocab) = planted_rule(64, 0);
    let cfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
    let run = train_run(&tiny_config(vocab.len()), &vocab, &examples, &cfg, 1).map_err(|e| e.to_string())?;
    let ln2 = std::f64::consts::LN_2;
    let rel = (run.initial_loss - ln2).abs() / ln2;
    ensure(rel < 0.05, || format!("initial loss {:.4} is {:.1}% from ln 2", run.initial_loss, rel * 100.0))?;
    let mut correct = 0;
    for e in &examples {
        let x = run.model.prepare(&vocab, &e.text, e.source).map_err(|e| e.to_string())?;
        let p = run.model.probabilities(&x).map_err(|e| e.to_string())?;
        let label = u8::from(p[1] > p[0]);
        if ealm_core::train::Target::Binary(label) == e.target {
            correct += 1;
        }
    }
    let acc = correct as f64 / examples.len() as f64;
    ensure(acc >= 0.95, || format!("train accuracy {correct}/64"))?;
    let took = within(start, Duration::from_secs(120))?;
    Ok(format!(
        "train accuracy {correct}/64, initial loss {:.4} (ln 2 = {ln2:.4}), best epoch {}, {took:.2?}",
        run.initial_loss, run.best_epoch
    ))
}

// 9

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let vocab = small_vocab();
    let mut n = 0;
    for head in [HeadKind::BinarySoftmax, HeadKind::MultilabelSigmoid] {
        let m = perturbed(ealm_config(&vocab, head, 9), 0.2, 9);
        let path = dir.path().join(format!("{head:?}.ckpt"));
        let id = checkpoint::save(&path, &m, &vocab).map_err(|e| e.to_string())?;
        let loaded = checkpoint::load(&path).map_err(|e| e.to_string())?;
        ensure(loaded.checkpoint_id == id, || "checkpoint id changed on load".into())?;
        ensure(loaded.vocab == vocab, || "vocabulary changed on load".into())?;
        for trial in 0..100u64 {
            let x = random_input(&m, &vocab, 10, trial);
            let a = m.logits(&x).map_err(|e| e.to_string())?;
            let b = loaded.model.logits(&x).map_err(|e| e.to_string())?;
            let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            ensure(bits(&a) == bits(&b), || format!("{head:?} trial {trial}: logits differ"))?;
            n += 1;
        }
    }
    Ok(format!("{n} inputs bit-identical across both heads"))
}

// 10

fn random_policy(seed: u64) -> GatePolicy {
    let mut r = keyed(seed, 1);
    let mode = [GateMode::RequireAll, GateMode::RequireAny, GateMode::Weighted][below(&mut r, 3) as usize];
    let raw: [f64; CONCEPT_COUNT] = std::array::from_fn(|_| unit_f64(&mut r));
    let total: f64 = raw.iter().sum();
    GatePolicy {
        mode,
        thresholds: std::array::from_fn(|_| unit_f64(&mut r)),
        weights: raw.map(|w| w / total),
        global_threshold: unit_f64(&mut r),
        strict: coin(&mut r),
        fail_action: if coin(&mut r) { FailAction::Block } else { FailAction::Annotate },
    }
}

fn gate_properties() -> Outcome {
    let vocab = small_vocab();
    let model = perturbed(ealm_config(&vocab, HeadKind::BinarySoftmax, 12), 0.3, 12);
    let judge_fn = |t: &str| judge(&model, &vocab, t);

    let mut input = fs::read(fixture("candidates.jsonl")).map_err(|e| e.to_string())?;
    for i in 0..40 {
        input.extend(format!("{{\"id\":\"gen{i}\",\"text\":\"She kept the money {i} times.\"}}\n").bytes());
    }
    let all_pass = GatePolicy { thresholds: [0.0; CONCEPT_COUNT], ..GatePolicy::default() };
    let mut out = Vec::new();
    let mut log = Vec::new();
    run_batch(BufReader::new(input.as_slice()), &mut out, &mut log, judge_fn, &all_pass, "ckpt")
        .map_err(|e| e.to_string())?;
    ensure(out == input, || "all-pass output differs from input".into())?;

    let mut mixed = input.clone();
    mixed.extend(b"\n{not json}\n{\"id\":\"e\",\"text\":\"\"}\n{\"id\":\"x\"}\n");
    let lines = mixed.split(|b| *b == b'\n').count() - 1;
    let policy = GatePolicy::default();
    let mut out = Vec::new();
    let mut log = Vec::new();
    let summary = run_batch(BufReader::new(mixed.as_slice()), &mut out, &mut log, judge_fn, &policy, "ckpt")
        .map_err(|e| e.to_string())?;
    let records: Vec<DecisionRecord> = log
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_slice(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ensure(records.len() == lines && summary.total == lines, || format!("{lines} inputs, {} decisions", records.len()))?;
    ensure(records.iter().filter(|r| r.verdict == Verdict::Error).count() == 4, || "expected 4 error decisions".into())?;

    let mut violations = 0;
    for i in 0..10_000u64 {
        let p = random_policy(71 + i);
        let mut r = keyed(72, i);
        let low: [f64; CONCEPT_COUNT] = std::array::from_fn(|_| unit_f64(&mut r));
        let high = low.map(|s| if coin(&mut r) { s + (1.0 - s) * unit_f64(&mut r) } else { s });
        if decide(&low, &p).verdict == Verdict::Pass && decide(&high, &p).verdict != Verdict::Pass {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} monotonicity violations"))?;

    let mismatches = replay(log.as_slice(), &policy).map_err(|e| e.to_string())?;
    ensure(mismatches.is_empty(), || format!("{} replay mismatches", mismatches.len()))?;
    Ok(format!("identity on {} bytes, {lines} decisions, 0/10000 violations, replay exact", input.len()))
}

// 11

fn dataset_statistics() -> Option<Outcome> {
    let root = PathBuf::from(std::env::var_os("ETHICS_DIR")?);
    Some((|| {
        let layout = [
            (EthicalConcept::Commonsense, "commonsense", "cm"),
            (EthicalConcept::Deontology, "deontology", "deontology"),
            (EthicalConcept::Justice, "justice", "justice"),
            (EthicalConcept::Utilitarianism, "utilitarianism", "util"),
            (EthicalConcept::Virtue, "virtue", "virtue"),
        ];
        let mut records = Vec::new();
        for (concept, dir, prefix) in layout {
            for (split, suffix) in [(Split::Train, "train"), (Split::Test, "test"), (Split::HardTest, "test_hard")] {
                let path = root.join(dir).join(format!("{prefix}_{suffix}.csv"));
                let f = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let report = parse_raw(f, concept, split, &SchemaMapping::upstream(concept), b',')
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                records.extend(report.into_records().map_err(|e| format!("{}: {e}", path.display()))?);
            }
        }
        let (_, stats) = build_qa_ethics(&records, 0, &Grouping::default()).map_err(|e| e.to_string())?;
        let c = stats.counts;
        let got = (c.train, c.test, c.hard_test, stats.total);
        ensure(got == (95_848, 19_968, 18_604, 134_420), || format!("counts {got:?}"))?;
        ensure(stats.mean_tokens > stats.mean_raw_tokens, || "templating did not lengthen inputs".into())?;
        Ok(format!(
            "counts {got:?}; mean tokens {:.2} -> {:.2} (whitespace tokens)",
            stats.mean_raw_tokens, stats.mean_tokens
        ))
    })())
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Option<Outcome>) -> Status {
    let (status, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Some(Ok(d))) => (Status::Pass, d),
        Ok(Some(Err(d))) => (Status::Fail, d),
        Ok(None) => (Status::Skip, "ETHICS_DIR not set".to_string()),
        Err(_) => (Status::Fail, "panicked".to_string()),
    };
    let tag = match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    println!("{tag} {id:>2} {name}: {detail}");
    status
}

fn main() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("template golden suite", Box::new(|| Some(golden_suite()))),
        ("utilitarianism complement", Box::new(|| Some(utilitarian_complement()))),
        ("gradient checks", Box::new(|| Some(gradient_checks()))),
        ("attention stochasticity", Box::new(|| Some(attention_stochasticity()))),
        ("reasoning layer order independence", Box::new(|| Some(ca_order_independence()))),
        ("metric oracle equivalence", Box::new(|| Some(metric_oracles()))),
        ("random baseline", Box::new(|| Some(random_baseline()))),
        ("tiny overfit", Box::new(|| Some(tiny_overfit()))),
        ("checkpoint round trip", Box::new(|| Some(checkpoint_round_trip()))),
        ("gate properties", Box::new(|| Some(gate_properties()))),
        ("dataset statistics", Box::new(dataset_statistics)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        if matches!(run(i + 1, name, f), Status::Fail) {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
