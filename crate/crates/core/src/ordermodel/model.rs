use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::numkernel::{
    lstm_cell, Graph, LstmParams, NodeId, ParamCheckpoint, ParamId, ParamStore, Tensor,
};
use crate::rng::{derive_seed, rng_from_seed};

pub const MODEL_FORMAT: &str = "textorder-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Width of the pointer projection `W`, split evenly across heads.
    /// `None` means `hidden_dim`.
    pub attention_dim: Option<usize>,
    pub pointer_heads: usize,
    pub beam_width: usize,
    pub l2_lambda: f64,
    /// Inverted dropout on sequence vectors during training.
    pub dropout: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 100,
            hidden_dim: 100,
            attention_dim: None,
            pointer_heads: 4,
            beam_width: 32,
            l2_lambda: 1e-5,
            dropout: None,
        }
    }
}

impl ModelConfig {
    pub fn attention_dim(&self) -> usize {
        self.attention_dim.unwrap_or(self.hidden_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.attention_dim() == 0 {
            return bad("model dimensions must be positive");
        }
        if self.pointer_heads == 0 || !self.attention_dim().is_multiple_of(self.pointer_heads) {
            return Err(Error::Config(format!(
                "pointer_heads ({}) must divide attention_dim ({})",
                self.pointer_heads,
                self.attention_dim()
            )));
        }
        if self.beam_width == 0 {
            return bad("beam_width must be at least 1");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be a non-negative number");
        }
        if let Some(r) = self.dropout {
            if !(0.0..1.0).contains(&r) {
                return bad("dropout rate must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadParams {
    /// `[attention_dim / heads, 2 * hidden]`
    pub w: ParamId,
    pub b: ParamId,
    /// `[1, attention_dim / heads]`
    pub w_out: ParamId,
    /// `[1]`
    pub b_out: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayout {
    pub embed: ParamId,
    pub seq_lstm: LstmParams,
    pub doc_lstm: LstmParams,
    pub dec_lstm: LstmParams,
    pub heads: Vec<HeadParams>,
}

impl ModelLayout {
    fn register(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        vocab_len: usize,
        embeddings: Option<&EmbeddingMatrix>,
        seed: u64,
    ) -> Result<Self> {
        let (e, h) = (cfg.embed_dim, cfg.hidden_dim);
        let table = match embeddings {
            Some(m) => {
                if m.dim != e || m.rows.len() != vocab_len {
                    return Err(Error::dim(
                        "embedding",
                        format!(
                            "matrix is {}x{}, model needs {vocab_len}x{e}",
                            m.rows.len(),
                            m.dim
                        ),
                    ));
                }
                m.clone()
            }
            None => EmbeddingMatrix::random(vocab_len, e, derive_seed(seed, &[0])),
        };
        let embed = store.add("embed", Tensor::matrix(vocab_len, e, table.flatten())?)?;
        let mut rng = rng_from_seed(derive_seed(seed, &[1]));
        let seq_lstm = LstmParams::register(store, "seq_lstm", e, h, &mut rng)?;
        let doc_lstm = LstmParams::register(store, "doc_lstm", h, h, &mut rng)?;
        let dec_lstm = LstmParams::register(store, "dec_lstm", h, h, &mut rng)?;
        let per_head = cfg.attention_dim() / cfg.pointer_heads;
        let mut heads = Vec::with_capacity(cfg.pointer_heads);
        for k in 0..cfg.pointer_heads {
            let b_in = 1.0 / ((2 * h) as f64).sqrt();
            let b_out = 1.0 / (per_head as f64).sqrt();
            heads.push(HeadParams {
                w: store.add_uniform(format!("ptr.{k}.w"), &[per_head, 2 * h], b_in, &mut rng)?,
                b: store.add_uniform(format!("ptr.{k}.b"), &[per_head], b_in, &mut rng)?,
                w_out: store.add_uniform(format!("ptr.{k}.w_out"), &[1, per_head], b_out, &mut rng)?,
                b_out: store.add_uniform(format!("ptr.{k}.b_out"), &[1], b_out, &mut rng)?,
            });
        }
        Ok(ModelLayout {
            embed,
            seq_lstm,
            doc_lstm,
            dec_lstm,
            heads,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OrderModel {
    pub config: ModelConfig,
    pub layout: ModelLayout,
    pub params: ParamStore,
    pub vocab: Vocabulary,
    /// Seed the parameters were initialized from.
    pub init_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    init_seed: u64,
    vocab: Vocabulary,
    params: ParamCheckpoint,
}

impl OrderModel {
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        embeddings: Option<&EmbeddingMatrix>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let layout = ModelLayout::register(&mut params, &config, vocab.len(), embeddings, seed)?;
        Ok(OrderModel {
            config,
            layout,
            params,
            vocab,
            init_seed: seed,
        })
    }

    /// Number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.params.total_size()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            init_seed: self.init_seed,
            vocab: self.vocab.clone(),
            params: ParamCheckpoint::from_store(&self.params),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format {
                line: 0,
                message: format!("unsupported model file {} v{}", file.format, file.version),
            });
        }
        let mut model = OrderModel::new(file.config, file.vocab, None, file.init_seed)?;
        file.params.load_into(&mut model.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn zeros(g: &mut Graph<'_>, n: usize) -> NodeId {
    g.input(Tensor::zeros(&[n]))
}

/// Final hidden state of the sequence LSTM over the embedded tokens.
pub fn encode_sequence(g: &mut Graph<'_>, model: &OrderModel, token_ids: &[u32]) -> Result<NodeId> {
    if token_ids.is_empty() {
        return Err(Error::Precondition("cannot encode an empty sequence".into()));
    }
    let hd = model.config.hidden_dim;
    let mut h = zeros(g, hd);
    let mut c = zeros(g, hd);
    for &id in token_ids {
        let x = g.gather(model.layout.embed, id as usize)?;
        (h, c) = lstm_cell(g, x, h, c, &model.layout.seq_lstm)?;
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct DocumentEncoding {
    /// `s_i` in presentation order.
    pub vectors: Vec<NodeId>,
    pub h: NodeId,
    pub c: NodeId,
}

/// Runs the document LSTM over `vectors`; its final state seeds the decoder.
pub fn encode_document(
    g: &mut Graph<'_>,
    model: &OrderModel,
    vectors: &[NodeId],
) -> Result<DocumentEncoding> {
    if vectors.len() < 2 {
        return Err(Error::Precondition(format!(
            "a document needs at least 2 sequences, got {}",
            vectors.len()
        )));
    }
    let hd = model.config.hidden_dim;
    let mut h = zeros(g, hd);
    let mut c = zeros(g, hd);
    for &s in vectors {
        (h, c) = lstm_cell(g, s, h, c, &model.layout.doc_lstm)?;
    }
    Ok(DocumentEncoding {
        vectors: vectors.to_vec(),
        h,
        c,
    })
}

/// Mean over heads of `W'_k (W_k [s; h] + b_k) + b'_k`, a scalar node.
pub fn pointer_score(
    g: &mut Graph<'_>,
    heads: &[HeadParams],
    s: NodeId,
    h: NodeId,
) -> Result<NodeId> {
    let sh = g.concat(&[s, h])?;
    let mut per_head = Vec::with_capacity(heads.len());
    for hp in heads {
        let w = g.param(hp.w);
        let b = g.param(hp.b);
        let wo = g.param(hp.w_out);
        let bo = g.param(hp.b_out);
        let inner = g.matmul(w, sh)?;
        let inner = g.add(inner, b)?;
        let out = g.matmul(wo, inner)?;
        per_head.push(g.add(out, bo)?);
    }
    let total = g.add_all(&per_head)?;
    g.scale(total, 1.0 / heads.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub h: NodeId,
    pub c: NodeId,
    /// Raw scores `e^t` over all candidates.
    pub logits: NodeId,
    /// Masked softmax over unvisited candidates.
    pub probs: NodeId,
}

/// Advances the decoder on `prev` (the previously chosen vector, or `None`
/// for the zero start input) and scores every candidate.
pub fn decode_step(
    g: &mut Graph<'_>,
    model: &OrderModel,
    vectors: &[NodeId],
    h: NodeId,
    c: NodeId,
    prev: Option<NodeId>,
    visited: &[bool],
) -> Result<StepOutput> {
    if visited.len() != vectors.len() {
        return Err(Error::dim(
            "decode_step",
            format!("{} candidates, mask of {}", vectors.len(), visited.len()),
        ));
    }
    if visited.iter().all(|&v| v) {
        return Err(Error::Precondition("decode_step: every candidate is visited".into()));
    }
    let x = match prev {
        Some(x) => x,
        None => zeros(g, model.config.hidden_dim),
    };
    let (h, c) = lstm_cell(g, x, h, c, &model.layout.dec_lstm)?;
    let scores = vectors
        .iter()
        .map(|&s| pointer_score(g, &model.layout.heads, s, h))
        .collect::<Result<Vec<_>>>()?;
    let logits = g.concat(&scores)?;
    let live: Vec<bool> = visited.iter().map(|v| !v).collect();
    let probs = g.masked_softmax(logits, &live)?;
    Ok(StepOutput { h, c, logits, probs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(vec!["a".into(), "b".into(), "c".into()], 1)
    }

    fn small() -> ModelConfig {
        ModelConfig {
            embed_dim: 3,
            hidden_dim: 2,
            attention_dim: Some(4),
            pointer_heads: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig {
            attention_dim: Some(6),
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(OrderModel::new(bad, vocab(), None, 0).is_err());
    }

    #[test]
    fn parameter_count_sums_tensors() {
        let m = OrderModel::new(small(), vocab(), None, 1).unwrap();
        let (e, h, v) = (3, 2, 4);
        let lstm = |i: usize| 4 * h * i + 4 * h * h + 4 * h;
        let heads = 2 * (2 * 2 * h + 2 + 2 + 1);
        assert_eq!(m.parameter_count(), v * e + lstm(e) + 2 * lstm(h) + heads);
    }

    #[test]
    fn single_token_is_one_lstm_step() {
        let m = OrderModel::new(small(), vocab(), None, 2).unwrap();
        let mut g = Graph::new(&m.params);
        let s = encode_sequence(&mut g, &m, &[1]).unwrap();
        let mut g2 = Graph::new(&m.params);
        let x = g2.gather(m.layout.embed, 1).unwrap();
        let z = g2.input(Tensor::zeros(&[2]));
        let (h, _) = lstm_cell(&mut g2, x, z, z, &m.layout.seq_lstm).unwrap();
        assert_eq!(g.value(s).data(), g2.value(h).data());
        assert!(encode_sequence(&mut g, &m, &[]).is_err());
    }

    #[test]
    fn zero_model_encodes_to_zero() {
        let mut m = OrderModel::new(small(), vocab(), None, 3).unwrap();
        m.params.zero_all();
        let mut g = Graph::new(&m.params);
        let a = encode_sequence(&mut g, &m, &[0, 2, 1]).unwrap();
        let b = encode_sequence(&mut g, &m, &[2]).unwrap();
        assert_eq!(g.value(a).data(), [0.0, 0.0]);
        let d = encode_document(&mut g, &m, &[a, b]).unwrap();
        assert_eq!(g.value(d.h).data(), [0.0, 0.0]);
        assert_eq!(g.value(d.c).data(), [0.0, 0.0]);
        assert!(encode_document(&mut g, &m, &[a]).is_err());
    }

    #[test]
    fn document_encoding_depends_on_order() {
        let m = OrderModel::new(small(), vocab(), None, 4).unwrap();
        let mut g = Graph::new(&m.params);
        let a = encode_sequence(&mut g, &m, &[0, 1]).unwrap();
        let b = encode_sequence(&mut g, &m, &[2, 2, 0]).unwrap();
        let a2 = encode_sequence(&mut g, &m, &[0, 1]).unwrap();
        assert_eq!(g.value(a).data(), g.value(a2).data());
        let ab = encode_document(&mut g, &m, &[a, b]).unwrap();
        let ba = encode_document(&mut g, &m, &[b, a]).unwrap();
        assert_ne!(g.value(ab.h).data(), g.value(ba.h).data());
    }

    #[test]
    fn constant_pointer_score() {
        let mut m = OrderModel::new(small(), vocab(), None, 5).unwrap();
        m.params.zero_all();
        for hp in m.layout.heads.clone() {
            m.params.get_mut(hp.b_out).data_mut()[0] = 0.75;
        }
        let mut g = Graph::new(&m.params);
        let h = g.input(Tensor::vector(vec![0.3, -0.2]));
        for s in [[1.0, 2.0], [-4.0, 0.5]] {
            let s = g.input(Tensor::vector(s.to_vec()));
            let e = pointer_score(&mut g, &m.layout.heads, s, h).unwrap();
            assert_eq!(g.value(e).item(), 0.75);
        }
    }

    #[test]
    fn pointer_score_hand_instance() {
        // One head, hidden 1 so [s; h] has two entries, attention dim 2.
        let cfg = ModelConfig {
            embed_dim: 1,
            hidden_dim: 1,
            attention_dim: Some(2),
            pointer_heads: 1,
            ..ModelConfig::default()
        };
        let mut m = OrderModel::new(cfg, vocab(), None, 6).unwrap();
        let hp = m.layout.heads[0];
        m.params.get_mut(hp.w).data_mut().copy_from_slice(&[1.0, 2.0, -1.0, 0.5]);
        m.params.get_mut(hp.b).data_mut().copy_from_slice(&[0.25, -0.5]);
        m.params.get_mut(hp.w_out).data_mut().copy_from_slice(&[3.0, -2.0]);
        m.params.get_mut(hp.b_out).data_mut()[0] = 0.125;
        let mut g = Graph::new(&m.params);
        let s = g.input(Tensor::vector(vec![0.5]));
        let h = g.input(Tensor::vector(vec![-1.5]));
        let e = pointer_score(&mut g, &m.layout.heads, s, h).unwrap();
        // W[s;h] + b = [0.5 - 3 + 0.25, -0.5 - 0.75 - 0.5] = [-2.25, -1.75]
        // W'(.) + b' = -6.75 + 3.5 + 0.125
        assert!((g.value(e).item() - (-3.125)).abs() < 1e-12);
    }

    #[test]
    fn pointer_score_is_local() {
        let m = OrderModel::new(small(), vocab(), None, 7).unwrap();
        let mut g = Graph::new(&m.params);
        let h = g.input(Tensor::vector(vec![0.1, 0.9]));
        let s0 = g.input(Tensor::vector(vec![0.4, -0.4]));
        let others = [g.input(Tensor::vector(vec![1.0, 1.0])), g.input(Tensor::vector(vec![-3.0, 2.0]))];
        let mut seen = Vec::new();
        for o in others {
            let vis = [false, false];
            let out = decode_step(&mut g, &m, &[s0, o], h, h, None, &vis).unwrap();
            seen.push(g.value(out.logits).data()[0]);
        }
        assert_eq!(seen[0], seen[1]);
    }

    #[test]
    fn decode_step_distribution() {
        let m = OrderModel::new(small(), vocab(), None, 8).unwrap();
        let mut g = Graph::new(&m.params);
        let vs: Vec<_> = (0..4)
            .map(|i| g.input(Tensor::vector(vec![i as f64 * 0.3, 1.0 - i as f64])))
            .collect();
        let h = g.input(Tensor::zeros(&[2]));
        let out = decode_step(&mut g, &m, &vs, h, h, None, &[false, true, false, false]).unwrap();
        let p = g.value(out.probs).data();
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let one = decode_step(&mut g, &m, &vs, h, h, Some(vs[0]), &[true, true, false, true]).unwrap();
        assert_eq!(g.value(one.probs).data(), [0.0, 0.0, 1.0, 0.0]);
        assert!(decode_step(&mut g, &m, &vs, h, h, None, &[true; 4]).is_err());
    }

    #[test]
    fn uniform_scores_give_uniform_distribution() {
        let mut m = OrderModel::new(small(), vocab(), None, 9).unwrap();
        for hp in m.layout.heads.clone() {
            m.params.get_mut(hp.w_out).data_mut().fill(0.0);
        }
        let mut g = Graph::new(&m.params);
        let vs: Vec<_> = (0..3).map(|i| g.input(Tensor::vector(vec![i as f64, 2.0]))).collect();
        let h = g.input(Tensor::zeros(&[2]));
        let out = decode_step(&mut g, &m, &vs, h, h, None, &[false, false, true]).unwrap();
        assert_eq!(g.value(out.probs).data(), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn model_json_round_trip() {
        let m = OrderModel::new(small(), vocab(), None, 10).unwrap();
        let back = OrderModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.config, m.config);
        assert_eq!(back.vocab, m.vocab);
    }
}
