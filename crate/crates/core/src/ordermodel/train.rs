use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::beam::{beam_search, EncodedDoc};
use super::model::{decode_step, encode_document, encode_sequence, ModelConfig, OrderModel};
use crate::corpus::{build_vocab, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{pmr, EvalPair, Order};
use crate::numkernel::{Graph, NodeId, Optimizer, OptimizerKind, ParamStore, Tensor};
use crate::rng::{derive_seed, derive_seed_str, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Vocabulary threshold applied to the training corpus.
    pub min_freq: usize,
    /// Beam width for the per-epoch dev evaluation; `None` uses the model's.
    pub eval_beam_width: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            patience: 5,
            max_epochs: 100,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            min_freq: 1,
            eval_beam_width: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 || self.min_freq == 0 {
            return Err(Error::Config(
                "batch_size, patience, max_epochs and min_freq must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.eval_beam_width == Some(0) {
            return Err(Error::Config("eval_beam_width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_pmr: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_pmr: f64,
    pub stop: StopReason,
    /// Squared norm of the parameters after the last epoch.
    pub final_param_norm: f64,
}

/// A document's token ids in gold order.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDoc {
    pub id: String,
    pub token_ids: Vec<Vec<u32>>,
}

/// Encodes every sequence through `vocab`. A sequence with no tokens is
/// read as a single unknown token so every document stays encodable.
pub fn prepare_documents(corpus: &Corpus, vocab: &Vocabulary) -> Vec<PreparedDoc> {
    corpus
        .documents
        .iter()
        .map(|d| PreparedDoc {
            id: d.id.clone(),
            token_ids: d
                .sequences
                .iter()
                .map(|s| {
                    let ids = vocab.encode(&s.tokens);
                    if ids.is_empty() {
                        vec![vocab.unk_id()]
                    } else {
                        ids
                    }
                })
                .collect(),
        })
        .collect()
}

/// Presentation permutation: position `j` shows original sequence `perm[j]`.
pub fn shuffle_document(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    perm
}

fn presented(doc: &PreparedDoc, perm: &[usize]) -> (Vec<Vec<u32>>, Vec<usize>) {
    let ids = perm.iter().map(|&i| doc.token_ids[i].clone()).collect();
    // gold[t] = presented position of original sequence t
    let mut gold = vec![0; perm.len()];
    for (j, &i) in perm.iter().enumerate() {
        gold[i] = j;
    }
    (ids, gold)
}

/// Teacher-forced negative log-likelihood of `gold` (presented indices in
/// gold order). `dropout` is `(rate, seed)` for inverted dropout on the
/// sequence vectors.
pub fn document_loss(
    g: &mut Graph<'_>,
    model: &OrderModel,
    token_ids: &[Vec<u32>],
    gold: &[usize],
    dropout: Option<(f64, u64)>,
) -> Result<NodeId> {
    let mut vectors = token_ids
        .iter()
        .map(|ids| encode_sequence(g, model, ids))
        .collect::<Result<Vec<_>>>()?;
    if let Some((rate, seed)) = dropout.filter(|(r, _)| *r > 0.0) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let hd = model.config.hidden_dim;
        for v in &mut vectors {
            let mask: Vec<f64> = (0..hd)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / (1.0 - rate) })
                .collect();
            let m = g.input(Tensor::vector(mask));
            *v = g.mul(*v, m)?;
        }
    }
    let enc = encode_document(g, model, &vectors)?;
    let n = vectors.len();
    if gold.len() != n {
        return Err(Error::LengthMismatch {
            predicted: n,
            gold: gold.len(),
        });
    }
    let (mut h, mut c) = (enc.h, enc.c);
    let mut visited = vec![false; n];
    let mut prev = None;
    let mut terms = Vec::with_capacity(n);
    for &target in gold {
        if target >= n || visited[target] {
            return Err(Error::NotPermutation(gold.to_vec()));
        }
        let out = decode_step(g, model, &vectors, h, c, prev, &visited)?;
        let live: Vec<bool> = visited.iter().map(|v| !v).collect();
        terms.push(g.masked_nll(out.logits, &live, target)?);
        visited[target] = true;
        prev = Some(vectors[target]);
        (h, c) = (out.h, out.c);
    }
    g.add_all(&terms)
}

/// Mean document loss over the batch plus `lambda * ||theta||^2`.
pub fn batch_loss(
    g: &mut Graph<'_>,
    model: &OrderModel,
    batch: &[(Vec<Vec<u32>>, Vec<usize>)],
    dropout_seed: Option<u64>,
) -> Result<NodeId> {
    let rate = model.config.dropout;
    let mut losses = Vec::with_capacity(batch.len());
    for (k, (ids, gold)) in batch.iter().enumerate() {
        let dropout = rate.zip(dropout_seed).map(|(r, s)| (r, derive_seed(s, &[k as u64])));
        losses.push(document_loss(g, model, ids, gold, dropout)?);
    }
    let total = g.add_all(&losses)?;
    let mean = g.scale(total, 1.0 / batch.len() as f64)?;
    let lambda = model.config.l2_lambda;
    if lambda == 0.0 {
        return Ok(mean);
    }
    let norms = model
        .params
        .ids()
        .map(|id| {
            let p = g.param(id);
            g.sum_squares(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let norm = g.add_all(&norms)?;
    let penalty = g.scale(norm, lambda)?;
    g.add(mean, penalty)
}

/// Parameter-initialization seed used by [`train`] for a training seed.
pub fn init_seed(train_seed: u64) -> u64 {
    derive_seed(train_seed, &[0x1417])
}

/// Builds the vocabulary from `train`, initializes a model and trains it.
pub fn train(
    train_set: &Corpus,
    dev: &Corpus,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(OrderModel, TrainHistory)> {
    tcfg.validate()?;
    let vocab = build_vocab(train_set, tcfg.min_freq);
    let model = OrderModel::new(mcfg.clone(), vocab, None, init_seed(tcfg.seed))?;
    train_model(model, train_set, dev, tcfg)
}

/// Trains an initialized model, returning the parameters of the best dev
/// epoch. An epoch counts as an improvement only if dev PMR strictly
/// exceeds the best so far.
pub fn train_model(
    mut model: OrderModel,
    train_set: &Corpus,
    dev: &Corpus,
    tcfg: &TrainConfig,
) -> Result<(OrderModel, TrainHistory)> {
    tcfg.validate()?;
    if train_set.is_empty() || dev.is_empty() {
        return Err(Error::Precondition("train and dev corpora must be non-empty".into()));
    }
    let docs = prepare_documents(train_set, &model.vocab);
    let width = tcfg.eval_beam_width.unwrap_or(model.config.beam_width);
    let mut opt = Optimizer::new(tcfg.optimizer, tcfg.learning_rate, &model.params);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=tcfg.max_epochs {
        let e = epoch as u64;
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(tcfg.seed, &[e, 0])));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(tcfg.batch_size).enumerate() {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let perm = shuffle_document(
                        docs[i].token_ids.len(),
                        derive_seed(tcfg.seed, &[e, 1, i as u64]),
                    );
                    presented(&docs[i], &perm)
                })
                .collect();
            let grads = {
                let mut g = Graph::new(&model.params).unchecked();
                let loss = batch_loss(&mut g, &model, &batch, Some(derive_seed(tcfg.seed, &[e, 2, b as u64])))?;
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::Diverged { epoch, loss: value });
                }
                loss_sum += value * chunk.len() as f64;
                g.backward(loss)?
            };
            if !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
            opt.step(&mut model.params, &grads);
        }
        let pairs = pairs(&predict(dev, &model, width, tcfg.seed)?);
        let dev_pmr = pmr(&pairs)?;
        let improved = best.as_ref().is_none_or(|(b, _, _)| dev_pmr > *b);
        if improved {
            best = Some((dev_pmr, epoch, model.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / docs.len() as f64,
            dev_pmr,
            improved,
        });
        if since_best >= tcfg.patience {
            stop = StopReason::Patience;
            break;
        }
    }
    let final_param_norm = model.params.squared_norm();
    let (best_dev_pmr, best_epoch, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok((
        model,
        TrainHistory {
            epochs,
            best_epoch,
            best_dev_pmr,
            stop,
            final_param_norm,
        },
    ))
}

/// Orders are in the document's original sequence indices, so `gold` is
/// always the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub gold: Vec<usize>,
    pub predicted: Vec<usize>,
    pub logprob: f64,
    pub shuffle_seed: u64,
}

impl Prediction {
    pub fn eval_pair(&self) -> Result<EvalPair> {
        EvalPair::new(
            self.id.clone(),
            Order::new(self.predicted.clone())?,
            Order::new(self.gold.clone())?,
        )
    }
}

pub fn pairs(preds: &[Prediction]) -> Vec<EvalPair> {
    preds
        .iter()
        .map(|p| p.eval_pair().expect("predictions are permutations"))
        .collect()
}

/// Shuffles each document with a seed derived from `(seed, id)`, decodes it
/// with beam search and maps the result back to original indices.
pub fn predict(corpus: &Corpus, model: &OrderModel, beam_width: usize, seed: u64) -> Result<Vec<Prediction>> {
    prepare_documents(corpus, &model.vocab)
        .iter()
        .map(|doc| {
            let shuffle_seed = derive_seed_str(seed, &doc.id);
            let perm = shuffle_document(doc.token_ids.len(), shuffle_seed);
            let (ids, _) = presented(doc, &perm);
            let enc = EncodedDoc::new(model, &ids)?;
            let best = beam_search(model, &enc, beam_width)?;
            Ok(Prediction {
                id: doc.id.clone(),
                gold: (0..perm.len()).collect(),
                predicted: best.order.iter().map(|&j| perm[j]).collect(),
                logprob: best.logprob,
                shuffle_seed,
            })
        })
        .collect()
}

pub fn write_predictions(preds: &[Prediction], mut w: impl Write) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

/// Reads prediction JSONL; `logprob` and `shuffle_seed` may be absent, and
/// each line is validated as a pair of permutations.
pub fn read_predictions(reader: impl BufRead) -> Result<Vec<EvalPair>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        gold: Vec<usize>,
        predicted: Vec<usize>,
    }
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<predictions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |m: String| Error::Parse { line: k + 1, message: m };
        let rec: Line = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let pred = Order::new(rec.predicted).map_err(|e| parse(e.to_string()))?;
        let gold = Order::new(rec.gold).map_err(|e| parse(e.to_string()))?;
        out.push(EvalPair::new(rec.id, pred, gold).map_err(|e| parse(e.to_string()))?);
    }
    Ok(out)
}
