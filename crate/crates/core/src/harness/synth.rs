use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Level, Sequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceScheme {
    /// Positional marker `ord{k}` plus a chain token shared with the successor.
    #[default]
    MarkerChain,
    /// Chain tokens only; order is recoverable from adjacency alone.
    Chain,
    /// Filler only, as an unlearnable control.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub name: String,
    pub n_docs: usize,
    /// Inclusive range of sequences per document.
    pub seq_per_doc: (usize, usize),
    /// Inclusive range of tokens per sequence, structural tokens included.
    pub tokens_per_seq: (usize, usize),
    pub scheme: CoherenceScheme,
    /// Size of the filler word pool.
    pub filler_vocab: usize,
    /// Size of the chain token pool.
    pub chain_vocab: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synth".into(),
            n_docs: 200,
            seq_per_doc: (3, 5),
            tokens_per_seq: (4, 7),
            scheme: CoherenceScheme::MarkerChain,
            filler_vocab: 30,
            chain_vocab: 15,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (smin, smax) = self.seq_per_doc;
        let (tmin, tmax) = self.tokens_per_seq;
        if self.n_docs == 0 || smin < 2 || smin > smax || tmin == 0 || tmin > tmax {
            return Err(Error::Config(
                "synthetic ranges must be positive, ordered, with at least 2 sequences".into(),
            ));
        }
        let structural = match self.scheme {
            CoherenceScheme::MarkerChain => 3,
            CoherenceScheme::Chain => 2,
            CoherenceScheme::Random => 0,
        };
        if tmin < structural.max(1) {
            return Err(Error::Config(format!(
                "tokens_per_seq must start at {} or more for this scheme",
                structural.max(1)
            )));
        }
        if self.filler_vocab == 0 || (self.scheme != CoherenceScheme::Random && self.chain_vocab == 0) {
            return Err(Error::Config("token pools must be non-empty".into()));
        }
        Ok(())
    }
}

/// What the generator actually produced, for comparison with corpus stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub config: SynthConfig,
    pub documents: usize,
    pub sequences: usize,
    pub tokens: usize,
    pub vocabulary: usize,
}

pub fn marker_token(position: usize) -> String {
    format!("ord{position}")
}

/// Position encoded by a marker token, if `token` is one.
pub fn parse_marker(token: &str) -> Option<usize> {
    token.strip_prefix("ord")?.parse().ok()
}

/// Days since 1970-01-01 to an ISO date (proleptic Gregorian).
fn iso_date(days: i64) -> String {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02}")
}

/// Builds documents whose gold order is recoverable by construction. Under
/// the marker scheme sequence `k` carries `ord{k}`; under both structured
/// schemes consecutive sequences share a chain token. Dates increase with
/// the document index.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<(Corpus, SynthReport)> {
    cfg.validate()?;
    let mut vocab = std::collections::BTreeSet::new();
    let mut tokens_total = 0;
    let mut documents = Vec::with_capacity(cfg.n_docs);
    for d in 0..cfg.n_docs {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[d as u64]));
        let n = rng.random_range(cfg.seq_per_doc.0..=cfg.seq_per_doc.1);
        let chain: Vec<String> = (0..n.saturating_sub(1))
            .map(|_| format!("c{}", rng.random_range(0..cfg.chain_vocab)))
            .collect();
        let mut sequences = Vec::with_capacity(n);
        for k in 0..n {
            let len = rng.random_range(cfg.tokens_per_seq.0..=cfg.tokens_per_seq.1);
            let mut structural = Vec::new();
            if cfg.scheme != CoherenceScheme::Random {
                if k > 0 {
                    structural.push(chain[k - 1].clone());
                }
                if k + 1 < n {
                    structural.push(chain[k].clone());
                }
            }
            let mut tokens: Vec<String> = (0..len - structural.len()
                - usize::from(cfg.scheme == CoherenceScheme::MarkerChain))
                .map(|_| format!("w{}", rng.random_range(0..cfg.filler_vocab)))
                .collect();
            tokens.extend(structural);
            tokens.shuffle(&mut rng);
            if cfg.scheme == CoherenceScheme::MarkerChain {
                tokens.push(marker_token(k));
            }
            tokens_total += tokens.len();
            vocab.extend(tokens.iter().cloned());
            sequences.push(Sequence::from_tokens(tokens));
        }
        documents.push(Document {
            id: format!("{}-{d:05}", cfg.name),
            date: Some(iso_date(18_262 + d as i64)),
            sequences,
        });
    }
    let corpus = Corpus {
        name: cfg.name.clone(),
        level: Level::Sentence,
        documents,
    };
    let report = SynthReport {
        config: cfg.clone(),
        documents: corpus.len(),
        sequences: corpus.sequence_count(),
        tokens: tokens_total,
        vocabulary: vocab.len(),
    };
    Ok((corpus, report))
}
