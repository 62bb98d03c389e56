use std::cmp::Ordering;

use super::model::{decode_step, encode_document, encode_sequence, OrderModel};
use crate::error::{Error, Result};
use crate::numkernel::{log_softmax_values, Graph, Tensor};

/// Encoder output as plain values, reused across decode steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub vectors: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl EncodedDoc {
    pub fn new(model: &OrderModel, token_ids: &[Vec<u32>]) -> Result<Self> {
        let mut g = Graph::new(&model.params);
        let vectors = token_ids
            .iter()
            .map(|ids| encode_sequence(&mut g, model, ids))
            .collect::<Result<Vec<_>>>()?;
        let enc = encode_document(&mut g, model, &vectors)?;
        Ok(EncodedDoc {
            vectors: vectors.iter().map(|&v| g.value(v).data().to_vec()).collect(),
            h: g.value(enc.h).data().to_vec(),
            c: g.value(enc.c).data().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub visited: Vec<bool>,
    pub partial: Vec<usize>,
    pub logprob: f64,
}

impl DecodeState {
    pub fn initial(doc: &EncodedDoc) -> Self {
        DecodeState {
            h: doc.h.clone(),
            c: doc.c.clone(),
            visited: vec![false; doc.len()],
            partial: Vec::new(),
            logprob: 0.0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.partial.len() == self.visited.len()
    }

    /// Log-probabilities of the next choice (`-inf` on visited entries) and
    /// the advanced decoder state.
    pub fn step(&self, model: &OrderModel, doc: &EncodedDoc) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(&model.params);
        let vectors: Vec<_> = doc
            .vectors
            .iter()
            .map(|v| g.input(Tensor::vector(v.clone())))
            .collect();
        let h = g.input(Tensor::vector(self.h.clone()));
        let c = g.input(Tensor::vector(self.c.clone()));
        let prev = self.partial.last().map(|&i| vectors[i]);
        let out = decode_step(&mut g, model, &vectors, h, c, prev, &self.visited)?;
        let live: Vec<bool> = self.visited.iter().map(|v| !v).collect();
        let logp = log_softmax_values(g.value(out.logits).data(), &live);
        Ok((logp, g.value(out.h).data().to_vec(), g.value(out.c).data().to_vec()))
    }

    fn child(&self, pick: usize, logp: f64, h: &[f64], c: &[f64]) -> Self {
        let mut next = DecodeState {
            h: h.to_vec(),
            c: c.to_vec(),
            visited: self.visited.clone(),
            partial: self.partial.clone(),
            logprob: self.logprob + logp,
        };
        next.visited[pick] = true;
        next.partial.push(pick);
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Indices into the presented sequences, in predicted order.
    pub order: Vec<usize>,
    pub logprob: f64,
    pub step_logprobs: Vec<f64>,
}

fn rank(a: &DecodeState, b: &DecodeState) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| a.partial.cmp(&b.partial))
}

/// Keeps the `width` best partial orders at every step, ranked by summed
/// log-probability with ties going to the lexicographically smaller order.
pub fn beam_search(model: &OrderModel, doc: &EncodedDoc, width: usize) -> Result<BeamResult> {
    if width == 0 {
        return Err(Error::Precondition("beam width must be at least 1".into()));
    }
    let mut beams = vec![(DecodeState::initial(doc), Vec::new())];
    for _ in 0..doc.len() {
        let mut next: Vec<(DecodeState, Vec<f64>)> = Vec::new();
        for (state, steps) in &beams {
            let (logp, h, c) = state.step(model, doc)?;
            for (j, &lp) in logp.iter().enumerate() {
                if !state.visited[j] {
                    let mut s = steps.clone();
                    s.push(lp);
                    next.push((state.child(j, lp, &h, &c), s));
                }
            }
        }
        next.sort_by(|a, b| rank(&a.0, &b.0));
        next.truncate(width);
        beams = next;
    }
    let (best, steps) = beams.into_iter().next().expect("documents are non-empty");
    Ok(BeamResult {
        order: best.partial,
        logprob: best.logprob,
        step_logprobs: steps,
    })
}

pub fn greedy_decode(model: &OrderModel, doc: &EncodedDoc) -> Result<BeamResult> {
    beam_search(model, doc, 1)
}

/// Log-probability of a complete order, replayed step by step.
pub fn order_logprob(model: &OrderModel, doc: &EncodedDoc, order: &[usize]) -> Result<f64> {
    let mut state = DecodeState::initial(doc);
    for &pick in order {
        if pick >= doc.len() || state.visited[pick] {
            return Err(Error::NotPermutation(order.to_vec()));
        }
        let (logp, h, c) = state.step(model, doc)?;
        state = state.child(pick, logp[pick], &h, &c);
    }
    if !state.is_complete() {
        return Err(Error::NotPermutation(order.to_vec()));
    }
    Ok(state.logprob)
}
