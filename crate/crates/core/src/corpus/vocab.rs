use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Corpus;

pub const UNK_TOKEN: &str = "<UNK>";

/// Token/id bijection. Retained tokens occupy ids `0..n`; UNK is id `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRecord", into = "VocabRecord")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    min_freq: usize,
    /// Retained tokens in id order; UNK is implicit and follows them.
    tokens: Vec<String>,
}

impl From<VocabRecord> for Vocabulary {
    fn from(r: VocabRecord) -> Self {
        Vocabulary::from_tokens(r.tokens, r.min_freq)
    }
}

impl From<Vocabulary> for VocabRecord {
    fn from(v: Vocabulary) -> Self {
        let mut tokens = v.tokens;
        tokens.pop();
        VocabRecord {
            min_freq: v.min_freq,
            tokens,
        }
    }
}

impl Vocabulary {
    /// `retained` must be duplicate-free; ids follow its order.
    pub fn from_tokens(retained: Vec<String>, min_freq: usize) -> Self {
        let mut tokens = retained;
        tokens.push(UNK_TOKEN.to_string());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            index,
            min_freq,
        }
    }

    /// Number of ids including UNK.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk_id(&self) -> u32 {
        (self.tokens.len() - 1) as u32
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or_else(|| self.unk_id())
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Keeps every token seen at least `min_freq` times, ordered by descending
/// frequency with lexicographic tie-breaking.
pub fn build_vocab(corpus: &Corpus, min_freq: usize) -> Vocabulary {
    let min_freq = min_freq.max(1);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for seq in corpus.documents.iter().flat_map(|d| &d.sequences) {
        for tok in &seq.tokens {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_freq && t != UNK_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()).collect(), min_freq)
}
