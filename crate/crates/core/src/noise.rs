//! Corpus corruption: every sequence is contaminated independently with
//! probability `p`, and a contaminated sequence receives one of three edits.
//!
//! * Insert: an advertising slogan is prepended to the sequence.
//! * Remove: the sequence is dropped from its document.
//! * Modify: a fraction of the tokens are concatenated, split or have one
//!   character replaced.
//!
//! Draw order per document (stream seeded from `(seed, document id)`), for
//! each sequence in gold order: one uniform draw decides contamination; if
//! contaminated, modes are drawn by weight until a feasible one comes up
//! (an infeasible mode is removed before the next draw); the chosen mode then
//! draws its own arguments.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Sequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed_str, rng_from_seed, Pcg64};

pub const DEFAULT_SLOGANS: &str = include_str!("../data/slogans.txt");

/// Printable ASCII without the space: 94 characters.
pub fn substitution_list() -> Vec<char> {
    ('!'..='~').collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Insert,
    Remove,
    Modify,
    /// Contaminated, but no mode could be applied.
    Skipped,
}

const MODES: [NoiseMode; 3] = [NoiseMode::Insert, NoiseMode::Remove, NoiseMode::Modify];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p: f64,
    pub slogans: Vec<String>,
    /// Weights for insert, remove, modify.
    pub mode_weights: [f64; 3],
    pub modify_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p: 0.0,
            slogans: parse_slogans(DEFAULT_SLOGANS),
            mode_weights: [1.0, 1.0, 1.0],
            modify_fraction: 0.5,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn with_p(p: f64, seed: u64) -> Self {
        NoiseConfig {
            p,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p must be in [0, 1], got {}", self.p)));
        }
        if self.mode_weights.iter().any(|w| !(*w >= 0.0)) || self.mode_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("mode weights must be non-negative with a positive sum".into()));
        }
        if self.mode_weights[0] > 0.0 && self.slogans.is_empty() {
            return Err(Error::Config("insert mode needs at least one slogan".into()));
        }
        if !(self.modify_fraction > 0.0 && self.modify_fraction <= 1.0) {
            return Err(Error::Config("modify_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

pub fn parse_slogans(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_slogans(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_slogans(&text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    /// Index of the sequence in the uncorrupted document.
    pub sequence: usize,
    pub mode: NoiseMode,
    /// Token positions where Modify found no applicable edit.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub skipped_positions: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentAudit {
    pub id: String,
    pub events: Vec<NoiseEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub p: f64,
    pub seed: u64,
    pub documents: Vec<DocumentAudit>,
    pub sequences_considered: usize,
    pub contaminated: usize,
    pub realized_rate: f64,
}

impl NoiseAudit {
    pub fn count(&self, mode: NoiseMode) -> usize {
        self.documents
            .iter()
            .flat_map(|d| &d.events)
            .filter(|e| e.mode == mode)
            .count()
    }
}

pub fn corrupt_corpus(corpus: &Corpus, cfg: &NoiseConfig) -> Result<(Corpus, NoiseAudit)> {
    cfg.validate()?;
    let mut documents = Vec::with_capacity(corpus.len());
    let mut audits = Vec::new();
    let mut considered = 0;
    let mut contaminated = 0;
    for doc in &corpus.documents {
        let mut rng = rng_from_seed(derive_seed_str(cfg.seed, &doc.id));
        let (out, events) = corrupt_document(doc, cfg, &mut rng);
        considered += doc.len();
        contaminated += events.len();
        if !events.is_empty() {
            audits.push(DocumentAudit {
                id: doc.id.clone(),
                events,
            });
        }
        documents.push(out);
    }
    let realized_rate = if considered == 0 {
        0.0
    } else {
        contaminated as f64 / considered as f64
    };
    let audit = NoiseAudit {
        p: cfg.p,
        seed: cfg.seed,
        documents: audits,
        sequences_considered: considered,
        contaminated,
        realized_rate,
    };
    Ok((
        Corpus {
            name: corpus.name.clone(),
            level: corpus.level,
            documents,
        },
        audit,
    ))
}

fn corrupt_document(doc: &Document, cfg: &NoiseConfig, rng: &mut Pcg64) -> (Document, Vec<NoiseEvent>) {
    let mut slots: Vec<Option<Sequence>> = doc.sequences.iter().cloned().map(Some).collect();
    let mut live = slots.len();
    let mut events = Vec::new();
    for idx in 0..slots.len() {
        if rng.random::<f64>() >= cfg.p {
            continue;
        }
        let seq = slots[idx].as_ref().expect("only earlier slots are removed");
        let mut weights = cfg.mode_weights;
        let mut event = NoiseEvent {
            sequence: idx,
            mode: NoiseMode::Skipped,
            skipped_positions: 0,
        };
        while let Some(mode) = draw_mode(&weights, rng) {
            let feasible = match mode {
                NoiseMode::Insert => !cfg.slogans.is_empty(),
                NoiseMode::Remove => live > 2,
                NoiseMode::Modify => !seq.tokens.is_empty(),
                NoiseMode::Skipped => unreachable!(),
            };
            if !feasible {
                weights[MODES.iter().position(|m| *m == mode).unwrap()] = 0.0;
                continue;
            }
            event.mode = mode;
            match mode {
                NoiseMode::Insert => {
                    let slogan = &cfg.slogans[rng.random_range(0..cfg.slogans.len())];
                    slots[idx] = Some(insert_ad(seq, slogan));
                }
                NoiseMode::Remove => {
                    slots[idx] = None;
                    live -= 1;
                }
                NoiseMode::Modify => {
                    let (modified, skipped) = modify_tokens(seq, rng, cfg.modify_fraction);
                    event.skipped_positions = skipped;
                    slots[idx] = Some(modified);
                }
                NoiseMode::Skipped => unreachable!(),
            }
            break;
        }
        events.push(event);
    }
    let out = Document {
        id: doc.id.clone(),
        date: doc.date.clone(),
        sequences: slots.into_iter().flatten().collect(),
    };
    (out, events)
}

fn draw_mode(weights: &[f64; 3], rng: &mut Pcg64) -> Option<NoiseMode> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    for (mode, &w) in MODES.iter().zip(weights) {
        if w > 0.0 && r < w {
            return Some(*mode);
        }
        r -= w;
    }
    // rounding at the top end of the range
    MODES.iter().zip(weights).rev().find(|(_, &w)| w > 0.0).map(|(m, _)| *m)
}

/// Prepends `slogan` with a single space and retokenizes.
pub fn insert_ad(seq: &Sequence, slogan: &str) -> Sequence {
    let joined: Vec<&str> = slogan.split_whitespace().chain(seq.text.split_whitespace()).collect();
    Sequence::new(joined.join(" "))
}

/// Drops sequence `idx`. Documents may not fall below two sequences.
pub fn remove_sequence(doc: &Document, idx: usize) -> Result<Document> {
    if doc.len() <= 2 {
        return Err(Error::FloorRule { id: doc.id.clone() });
    }
    if idx >= doc.len() {
        return Err(Error::Precondition(format!(
            "sequence index {idx} out of range for {} sequences",
            doc.len()
        )));
    }
    let mut out = doc.clone();
    out.sequences.remove(idx);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenEdit {
    /// Join the token with the one right behind it.
    Concatenate,
    /// Split before character index `at` (1 <= at < chars).
    Split { at: usize },
    /// Replace the character at index `at`.
    Replace { at: usize, with: char },
}

/// Applies one edit at token position `pos`; returns false when the edit's
/// precondition does not hold and the tokens were left untouched.
pub fn apply_edit(tokens: &mut Vec<String>, pos: usize, edit: TokenEdit) -> bool {
    let Some(token) = tokens.get(pos) else {
        return false;
    };
    let chars: Vec<char> = token.chars().collect();
    match edit {
        TokenEdit::Concatenate => {
            if pos + 1 >= tokens.len() {
                return false;
            }
            let next = tokens.remove(pos + 1);
            tokens[pos].push_str(&next);
        }
        TokenEdit::Split { at } => {
            if chars.len() < 2 || at == 0 || at >= chars.len() {
                return false;
            }
            let head: String = chars[..at].iter().collect();
            let tail: String = chars[at..].iter().collect();
            tokens[pos] = head;
            tokens.insert(pos + 1, tail);
        }
        TokenEdit::Replace { at, with } => {
            if at >= chars.len() {
                return false;
            }
            let mut chars = chars;
            chars[at] = with;
            tokens[pos] = chars.into_iter().collect();
        }
    }
    true
}

/// Picks `ceil(fraction * T)` distinct positions and gives each one edit,
/// chosen uniformly among the edits whose preconditions hold. Positions are
/// processed from the back so earlier indices stay valid.
///
/// Returns the edited sequence and the number of positions left unedited.
pub fn modify_tokens(seq: &Sequence, rng: &mut Pcg64, fraction: f64) -> (Sequence, usize) {
    let t = seq.tokens.len();
    if t == 0 {
        return (seq.clone(), 0);
    }
    let k = ((fraction * t as f64).ceil() as usize).clamp(1, t);
    let mut positions = sample(rng, t, k).into_vec();
    positions.sort_unstable_by(|a, b| b.cmp(a));
    let subs = substitution_list();
    let mut tokens = seq.tokens.clone();
    let mut skipped = 0;
    for pos in positions {
        let len = tokens[pos].chars().count();
        let mut options = Vec::with_capacity(3);
        if pos + 1 < tokens.len() {
            options.push(0);
        }
        if len >= 2 {
            options.push(1);
        }
        if len >= 1 {
            options.push(2);
        }
        if options.is_empty() {
            skipped += 1;
            continue;
        }
        let edit = match options[rng.random_range(0..options.len())] {
            0 => TokenEdit::Concatenate,
            1 => TokenEdit::Split {
                at: rng.random_range(1..len),
            },
            _ => {
                let at = rng.random_range(0..len);
                let current = tokens[pos].chars().nth(at).unwrap();
                let choices: Vec<char> = subs.iter().copied().filter(|&c| c != current).collect();
                TokenEdit::Replace {
                    at,
                    with: choices[rng.random_range(0..choices.len())],
                }
            }
        };
        apply_edit(&mut tokens, pos, edit);
    }
    (Sequence::from_tokens(tokens), skipped)
}
