use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Param, ParamGroup, ParamSet};
use super::vocab::{Tokenized, Vocabulary};
use super::{EncoderConfig, HeadKind, Mode, ModelError};
use crate::rng;
use crate::tensor::{Graph, Tensor, TensorError, Var};
use crate::EthicalConcept;

/// Standard deviation of the normal weight initialisation.
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy)]
struct LnIdx {
    gain: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct AttnIdx {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
}

#[derive(Debug, Clone, Copy)]
struct FfIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncoderBlockIdx {
    ln_attn: LnIdx,
    attn: AttnIdx,
    ln_ff: LnIdx,
    ff: FfIdx,
}

#[derive(Debug, Clone, Copy)]
struct CrossBlockIdx {
    ln_query: LnIdx,
    ln_context: LnIdx,
    attn: AttnIdx,
    ln_ff: LnIdx,
    ff: FfIdx,
}

#[derive(Debug, Clone, Copy)]
struct CrossLayerIdx {
    des: CrossBlockIdx,
    text: CrossBlockIdx,
}

#[derive(Debug, Clone)]
struct Layout {
    tok_emb: usize,
    pos_emb: usize,
    encoder: Vec<EncoderBlockIdx>,
    cross: Vec<CrossLayerIdx>,
    final_ln: LnIdx,
    head_w: usize,
    head_b: usize,
}

struct Builder {
    params: ParamSet,
    seed: u64,
    group: ParamGroup,
}

impl Builder {
    fn add(&mut self, name: String, tensor: Tensor, decay: bool) -> usize {
        self.params.push(Param { name, tensor, group: self.group, decay })
    }

    fn weight(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let mut r = rng::keyed(self.seed, self.params.len() as u64);
        let t = Tensor::from_fn(&[rows, cols], |_| INIT_STD * rng::standard_normal(&mut r));
        self.add(name, t, true)
    }

    fn bias(&mut self, name: String, n: usize) -> usize {
        self.add(name, Tensor::zeros(&[n]), false)
    }

    fn layernorm(&mut self, prefix: &str, d: usize) -> LnIdx {
        let gain = self.add(format!("{prefix}.gain"), Tensor::from_fn(&[d], |_| 1.0), false);
        let bias = self.bias(format!("{prefix}.bias"), d);
        LnIdx { gain, bias }
    }

    fn attention(&mut self, prefix: &str, d: usize) -> AttnIdx {
        AttnIdx {
            wq: self.weight(format!("{prefix}.w_q"), d, d),
            wk: self.weight(format!("{prefix}.w_k"), d, d),
            wv: self.weight(format!("{prefix}.w_v"), d, d),
            wo: self.weight(format!("{prefix}.w_o"), d, d),
        }
    }

    fn feed_forward(&mut self, prefix: &str, d: usize, f: usize) -> FfIdx {
        FfIdx {
            w1: self.weight(format!("{prefix}.w1"), d, f),
            b1: self.bias(format!("{prefix}.b1"), f),
            w2: self.weight(format!("{prefix}.w2"), f, d),
            b2: self.bias(format!("{prefix}.b2"), d),
        }
    }

    fn cross_block(&mut self, prefix: &str, d: usize, f: usize) -> CrossBlockIdx {
        CrossBlockIdx {
            ln_query: self.layernorm(&format!("{prefix}.ln_query"), d),
            ln_context: self.layernorm(&format!("{prefix}.ln_context"), d),
            attn: self.attention(&format!("{prefix}.attn"), d),
            ln_ff: self.layernorm(&format!("{prefix}.ln_ff"), d),
            ff: self.feed_forward(&format!("{prefix}.ff"), d, f),
        }
    }
}

fn build(config: &EncoderConfig) -> (ParamSet, Layout) {
    let d = config.hidden;
    let f = config.ff_size;
    let mut b = Builder {
        params: ParamSet::new(),
        seed: config.init_seed,
        group: ParamGroup::Backbone,
    };
    let tok_emb = b.weight("embed.tokens".into(), config.vocab_size, d);
    let pos_emb = b.weight("embed.positions".into(), config.positions(), d);
    let encoder = (0..config.layers)
        .map(|l| {
            let p = format!("encoder.{l}");
            EncoderBlockIdx {
                ln_attn: b.layernorm(&format!("{p}.ln_attn"), d),
                attn: b.attention(&format!("{p}.attn"), d),
                ln_ff: b.layernorm(&format!("{p}.ln_ff"), d),
                ff: b.feed_forward(&format!("{p}.ff"), d, f),
            }
        })
        .collect();
    b.group = ParamGroup::Reasoning;
    let cross = match config.mode {
        Mode::Ealm => (0..config.ca_layers)
            .map(|l| CrossLayerIdx {
                des: b.cross_block(&format!("reasoning.{l}.des"), d, f),
                text: b.cross_block(&format!("reasoning.{l}.text"), d, f),
            })
            .collect(),
        _ => Vec::new(),
    };
    let final_ln = b.layernorm("final_ln", d);
    let head_w = b.weight("head.weight".into(), d, config.head.width());
    let head_b = b.bias("head.bias".into(), config.head.width());
    let layout = Layout { tok_emb, pos_emb, encoder, cross, final_ln, head_w, head_b };
    (b.params, layout)
}

/// Which description stream accompanies a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptionSource {
    None,
    /// One concept's description (binary QA examples).
    Concept(EthicalConcept),
    /// All five descriptions in canonical order, separator-joined
    /// (multi-label examples).
    AllConcepts,
}

/// Model-ready token sequences for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub text: Tokenized,
    /// Present only in [`Mode::Ealm`].
    pub des: Option<Tokenized>,
}

impl EncodedInput {
    pub fn truncated(&self) -> bool {
        self.text.truncated || self.des.as_ref().is_some_and(|d| d.truncated)
    }
}

/// Hidden states of the two streams with their key masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualStreamState {
    pub text: Var,
    pub des: Var,
    pub text_mask: Vec<bool>,
    pub des_mask: Vec<bool>,
}

/// One attention probability matrix produced during a pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionRecord {
    pub weights: Var,
    pub key_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: EncoderConfig,
    params: ParamSet,
    layout: Layout,
}

impl PartialEq for Layout {
    fn eq(&self, _: &Self) -> bool {
        // layouts are a pure function of the config
        true
    }
}

fn description_ids(vocab: &Vocabulary, source: DescriptionSource) -> Vec<usize> {
    match source {
        DescriptionSource::None => Vec::new(),
        DescriptionSource::Concept(c) => vocab.word_ids(c.description()),
        DescriptionSource::AllConcepts => {
            let mut ids = Vec::new();
            for c in EthicalConcept::ALL {
                if !ids.is_empty() {
                    ids.push(Vocabulary::SEP_ID);
                }
                ids.extend(vocab.word_ids(c.description()));
            }
            ids
        }
    }
}

impl Model {
    pub fn new(config: EncoderConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let (params, layout) = build(&config);
        Ok(Model { config, params, layout })
    }

    /// Rebuilds a model from stored parameters, checking that names and
    /// shapes match what `config` lays out.
    pub fn from_params(config: EncoderConfig, params: ParamSet) -> Result<Self, ModelError> {
        Model::from_named(config, params.iter().map(|p| (p.name.clone(), p.tensor.clone())))
    }

    /// Like [`Model::from_params`] over bare `(name, tensor)` pairs, in
    /// layout order.
    pub fn from_named(config: EncoderConfig, named: impl IntoIterator<Item = (String, Tensor)>) -> Result<Self, ModelError> {
        let mut model = Model::new(config)?;
        let mut count = 0;
        for (i, (name, tensor)) in named.into_iter().enumerate() {
            count += 1;
            if i >= model.params.len() {
                continue;
            }
            let slot = model.params.get_mut(i);
            if slot.name != name || slot.tensor.shape() != tensor.shape() {
                return Err(ModelError::Config(format!(
                    "parameter {i}: expected {} {:?}, found {} {:?}",
                    slot.name,
                    slot.tensor.shape(),
                    name,
                    tensor.shape()
                )));
            }
            slot.tensor = tensor;
        }
        if count != model.params.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameter tensors, found {count}",
                model.params.len()
            )));
        }
        Ok(model)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Tokenizes a text and its description stream for the configured mode.
    pub fn prepare(&self, vocab: &Vocabulary, text: &str, source: DescriptionSource) -> Result<EncodedInput, ModelError> {
        let cfg = &self.config;
        match cfg.mode {
            Mode::TextOnly => Ok(EncodedInput { text: vocab.tokenize(text, cfg.max_text_len)?, des: None }),
            Mode::Ealm => {
                if source == DescriptionSource::None {
                    return Err(ModelError::Contract("ealm mode needs a description stream".into()));
                }
                let words = description_ids(vocab, source);
                let truncated = words.len() + 1 > cfg.max_des_len;
                let mut ids = vec![Vocabulary::CLS_ID];
                ids.extend(words.into_iter().take(cfg.max_des_len - 1));
                let des = Tokenized { mask: vec![true; ids.len()], ids, truncated, empty_input: false };
                Ok(EncodedInput { text: vocab.tokenize(text, cfg.max_text_len)?, des: Some(des) })
            }
            Mode::ConcatDescriptions => {
                let mut t = vocab.tokenize(text, cfg.max_text_len)?;
                let words = description_ids(vocab, source);
                if !words.is_empty() {
                    let room = cfg.max_des_len;
                    t.truncated |= words.len() + 1 > room;
                    t.ids.push(Vocabulary::SEP_ID);
                    t.ids.extend(words.into_iter().take(room - 1));
                    t.mask = vec![true; t.ids.len()];
                }
                Ok(EncodedInput { text: t, des: None })
            }
        }
    }

    /// Records every parameter on `graph` as a trainable leaf.
    pub fn bind<'g>(&self, graph: &'g mut Graph) -> Pass<'g, '_> {
        let vars = self.params.iter().map(|p| graph.param(p.tensor.clone())).collect();
        Pass { graph, model: self, vars, attention: Vec::new() }
    }

    /// Uses caller-recorded vars, one per parameter in order.
    pub fn bind_vars<'g>(&self, graph: &'g mut Graph, vars: Vec<Var>) -> Result<Pass<'g, '_>, ModelError> {
        if vars.len() != self.params.len() {
            return Err(ModelError::Contract(format!(
                "expected {} parameter vars, got {}",
                self.params.len(),
                vars.len()
            )));
        }
        Ok(Pass { graph, model: self, vars, attention: Vec::new() })
    }

    /// Raw logits for one example.
    pub fn logits(&self, input: &EncodedInput) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new();
        let mut pass = self.bind(&mut g);
        let out = pass.forward(input)?;
        Ok(g.value(out).values().to_vec())
    }

    /// Softmax probabilities (binary head) or per-concept sigmoid scores
    /// (multilabel head).
    pub fn probabilities(&self, input: &EncodedInput) -> Result<Vec<f64>, ModelError> {
        let logits = self.logits(input)?;
        Ok(match self.config.head {
            HeadKind::BinarySoftmax => {
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
            HeadKind::MultilabelSigmoid => logits
                .iter()
                .map(|&z| if z >= 0.0 { 1.0 / (1.0 + libm::exp(-z)) } else { libm::exp(z) / (1.0 + libm::exp(z)) })
                .collect(),
        })
    }
}

/// One forward pass of a model over a graph.
pub struct Pass<'g, 'm> {
    pub graph: &'g mut Graph,
    model: &'m Model,
    vars: Vec<Var>,
    /// Attention matrices in creation order.
    pub attention: Vec<AttentionRecord>,
}

impl<'g, 'm> Pass<'g, 'm> {
    fn v(&self, idx: usize) -> Var {
        self.vars[idx]
    }

    /// Var bound to parameter `index`.
    pub fn param_var(&self, index: usize) -> Var {
        self.vars[index]
    }

    /// Gradients of every parameter after `graph.backward`, in parameter
    /// order. `None` marks a parameter the loss does not reach.
    pub fn param_grads(&self) -> Vec<Option<Vec<f64>>> {
        self.vars.iter().map(|v| self.graph.grad(*v).map(<[f64]>::to_vec)).collect()
    }

    fn layernorm(&mut self, x: Var, ln: LnIdx) -> Result<Var, TensorError> {
        let (g, b) = (self.v(ln.gain), self.v(ln.bias));
        self.graph.layernorm(x, g, b)
    }

    fn feed_forward(&mut self, x: Var, ff: FfIdx) -> Result<Var, TensorError> {
        let (w1, b1, w2, b2) = (self.v(ff.w1), self.v(ff.b1), self.v(ff.w2), self.v(ff.b2));
        let h = self.graph.matmul(x, w1)?;
        let h = self.graph.add_row(h, b1)?;
        let h = self.graph.gelu(h);
        let h = self.graph.matmul(h, w2)?;
        self.graph.add_row(h, b2)
    }

    /// Multi-head attention of `query` rows over `context` rows, per head
    /// `softmax(Q K^T / sqrt(d_k)) V`, heads concatenated and projected by
    /// the output matrix. Masked context positions get zero weight.
    fn multi_head(&mut self, query: Var, context: Var, key_mask: &[bool], attn: AttnIdx) -> Result<Var, TensorError> {
        let g = &mut *self.graph;
        let dq = g.value(query).dims();
        let dc = g.value(context).dims();
        if dq.map(|d| d.1) != dc.map(|d| d.1) {
            return Err(TensorError::Shape {
                op: crate::tensor::OpKind::MatMul,
                left: g.value(query).shape().to_vec(),
                right: g.value(context).shape().to_vec(),
            });
        }
        let heads = self.model.config.heads;
        let q = g.matmul(query, self.vars[attn.wq])?;
        let k = g.matmul(context, self.vars[attn.wk])?;
        let v = g.matmul(context, self.vars[attn.wv])?;
        let d_k = self.model.config.head_size() as f64;
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = g.slice_heads(q, h, heads)?;
            let kh = g.slice_heads(k, h, heads)?;
            let vh = g.slice_heads(v, h, heads)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, 1.0 / libm::sqrt(d_k));
            let weights = g.softmax_rows(scores, Some(key_mask))?;
            self.attention.push(AttentionRecord { weights, key_mask: key_mask.to_vec() });
            outs.push(g.matmul(weights, vh)?);
        }
        let merged = g.merge_heads(&outs)?;
        g.matmul(merged, self.vars[attn.wo])
    }

    /// Public entry to the bare multi-head attention of encoder block
    /// `layer`, mainly for inspection.
    pub fn mha(&mut self, query: Var, context: Var, key_mask: &[bool], layer: usize) -> Result<Var, ModelError> {
        let attn = self.model.layout.encoder.get(layer).map(|b| b.attn).ok_or_else(|| {
            ModelError::Contract(format!("no encoder block {layer}"))
        })?;
        Ok(self.multi_head(query, context, key_mask, attn)?)
    }

    fn encoder_block(&mut self, x: Var, mask: &[bool], blk: EncoderBlockIdx) -> Result<Var, TensorError> {
        let n = self.layernorm(x, blk.ln_attn)?;
        let a = self.multi_head(n, n, mask, blk.attn)?;
        let h = self.graph.add(x, a)?;
        let n = self.layernorm(h, blk.ln_ff)?;
        let f = self.feed_forward(n, blk.ff)?;
        self.graph.add(h, f)
    }

    /// Pre-norm transformer block whose attention reads `context`.
    fn cross_block(&mut self, query: Var, context: Var, context_mask: &[bool], blk: CrossBlockIdx) -> Result<Var, TensorError> {
        let q = self.layernorm(query, blk.ln_query)?;
        let c = self.layernorm(context, blk.ln_context)?;
        let a = self.multi_head(q, c, context_mask, blk.attn)?;
        let h = self.graph.add(query, a)?;
        let n = self.layernorm(h, blk.ln_ff)?;
        let f = self.feed_forward(n, blk.ff)?;
        self.graph.add(h, f)
    }

    /// Token plus position embeddings.
    pub fn embed(&mut self, ids: &[usize]) -> Result<Var, ModelError> {
        let positions: Vec<usize> = (0..ids.len()).collect();
        if ids.len() > self.model.config.positions() {
            return Err(ModelError::Contract(format!("sequence of {} exceeds the position table", ids.len())));
        }
        let tok = self.graph.embed_lookup(self.v(self.model.layout.tok_emb), ids)?;
        let pos = self.graph.embed_lookup(self.v(self.model.layout.pos_emb), &positions)?;
        Ok(self.graph.add(tok, pos)?)
    }

    /// Embedding followed by every shared encoder block.
    pub fn encode(&mut self, seq: &Tokenized, max_len: usize) -> Result<Var, ModelError> {
        if seq.len() > max_len {
            return Err(ModelError::Contract(format!("sequence of {} tokens exceeds limit {max_len}", seq.len())));
        }
        if !seq.mask.iter().any(|m| *m) {
            return Err(ModelError::Contract("sequence is entirely padding".into()));
        }
        let mut x = self.embed(&seq.ids)?;
        for blk in self.model.layout.encoder.clone() {
            x = self.encoder_block(x, &seq.mask, blk)?;
        }
        Ok(x)
    }

    /// Runs both streams through the shared encoder independently.
    pub fn encode_streams(&mut self, text: &Tokenized, des: &Tokenized) -> Result<DualStreamState, ModelError> {
        let cfg = &self.model.config;
        let (mt, md) = (cfg.max_text_len, cfg.max_des_len);
        let t = self.encode(text, mt)?;
        let d = self.encode(des, md)?;
        Ok(DualStreamState { text: t, des: d, text_mask: text.mask.clone(), des_mask: des.mask.clone() })
    }

    /// Reasoning layer `layer`: the description stream attends to the
    /// previous text state and the text stream to the previous description
    /// state. Both blocks read only the incoming state.
    pub fn ca_layer(&mut self, state: &DualStreamState, layer: usize) -> Result<DualStreamState, ModelError> {
        self.ca_layer_ordered(state, layer, true)
    }

    /// [`Pass::ca_layer`] with an explicit block evaluation order.
    pub fn ca_layer_ordered(&mut self, state: &DualStreamState, layer: usize, des_first: bool) -> Result<DualStreamState, ModelError> {
        let idx = *self
            .model
            .layout
            .cross
            .get(layer)
            .ok_or_else(|| ModelError::Contract(format!("no reasoning layer {layer}")))?;
        let (des, text) = if des_first {
            let des = self.cross_block(state.des, state.text, &state.text_mask, idx.des)?;
            let text = self.cross_block(state.text, state.des, &state.des_mask, idx.text)?;
            (des, text)
        } else {
            let text = self.cross_block(state.text, state.des, &state.des_mask, idx.text)?;
            let des = self.cross_block(state.des, state.text, &state.text_mask, idx.des)?;
            (des, text)
        };
        Ok(DualStreamState { text, des, text_mask: state.text_mask.clone(), des_mask: state.des_mask.clone() })
    }

    /// Final norm then mean over non-pad text positions: a `1 x D` row.
    pub fn pool(&mut self, text: Var, mask: &[bool]) -> Result<Var, ModelError> {
        if !mask.iter().any(|m| *m) {
            return Err(ModelError::Contract("text stream is entirely padding".into()));
        }
        let n = self.layernorm(text, self.model.layout.final_ln)?;
        Ok(self.graph.mean_rows(n, Some(mask))?)
    }

    /// Affine head over pooled rows: `B x D -> B x width`.
    pub fn head(&mut self, pooled: Var) -> Result<Var, ModelError> {
        let (w, b) = (self.v(self.model.layout.head_w), self.v(self.model.layout.head_b));
        let z = self.graph.matmul(pooled, w)?;
        Ok(self.graph.add_row(z, b)?)
    }

    pub fn classify(&mut self, state: &DualStreamState) -> Result<Var, ModelError> {
        let p = self.pool(state.text, &state.text_mask)?;
        self.head(p)
    }

    fn pooled(&mut self, input: &EncodedInput) -> Result<Var, ModelError> {
        let cfg = self.model.config.clone();
        match cfg.mode {
            Mode::Ealm => {
                let des = input
                    .des
                    .as_ref()
                    .ok_or_else(|| ModelError::Contract("ealm input lacks a description stream".into()))?;
                let mut state = self.encode_streams(&input.text, des)?;
                for layer in 0..cfg.ca_layers {
                    state = self.ca_layer(&state, layer)?;
                }
                self.pool(state.text, &state.text_mask)
            }
            Mode::ConcatDescriptions | Mode::TextOnly => {
                let limit = match cfg.mode {
                    Mode::TextOnly => cfg.max_text_len,
                    _ => cfg.positions(),
                };
                let t = self.encode(&input.text, limit)?;
                self.pool(t, &input.text.mask)
            }
        }
    }

    /// Logits for one example, `1 x width`.
    pub fn forward(&mut self, input: &EncodedInput) -> Result<Var, ModelError> {
        let p = self.pooled(input)?;
        self.head(p)
    }

    /// Logits for a batch, `B x width`.
    pub fn forward_batch(&mut self, inputs: &[EncodedInput]) -> Result<Var, ModelError> {
        if inputs.is_empty() {
            return Err(ModelError::Contract("empty batch".into()));
        }
        let pooled = inputs.iter().map(|i| self.pooled(i)).collect::<Result<Vec<_>, _>>()?;
        let stacked = self.graph.concat_rows(&pooled)?;
        self.head(stacked)
    }
}
