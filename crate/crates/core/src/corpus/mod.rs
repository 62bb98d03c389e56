//! Ordering corpora: documents made of sequences (sentences or paragraphs)
//! whose file order is the gold order.

mod embeddings;
mod stats;
mod tokenize;
mod vocab;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embeddings::{load_embeddings, EmbeddingMatrix, EmbeddingReport};
pub use stats::{stats, CorpusStats};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, Vocabulary, UNK_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sentence,
    Paragraph,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(Level::Sentence),
            "paragraph" => Ok(Level::Paragraph),
            other => Err(Error::Config(format!("unknown level {other:?}"))),
        }
    }
}

/// One orderable unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub text: String,
    pub tokens: Vec<String>,
    pub token_ids: Option<Vec<u32>>,
}

impl Sequence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sequence {
            text,
            tokens,
            token_ids: None,
        }
    }

    /// Builds a sequence from an already-edited token list; the text is the
    /// tokens joined by single spaces.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Sequence {
            text: tokens.join(" "),
            tokens,
            token_ids: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub date: Option<String>,
    pub sequences: Vec<Sequence>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub level: Level,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn sequence_count(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    fn with_documents(&self, documents: Vec<Document>) -> Corpus {
        Corpus {
            name: self.name.clone(),
            level: self.level,
            documents,
        }
    }
}

/// On-disk record: one document per JSONL line.
#[derive(Debug, Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    date: Option<String>,
    sequences: Vec<String>,
    /// Optional per-paragraph kind flags (`plain` / `bullet`); only
    /// consulted when bullets are merged at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kinds: Option<Vec<ParagraphKind>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParagraphKind {
    Plain,
    Bullet,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Fold bullet paragraphs into their preceding plain paragraph when the
    /// record carries `kinds`.
    pub merge_bullets: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub corpus: Corpus,
    /// Documents removed because they had fewer than two sequences.
    pub dropped: usize,
}

pub fn load_corpus(path: impl AsRef<Path>, level: Level) -> Result<Loaded> {
    load_corpus_with(path, level, &LoadOptions::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, level: Level, opts: &LoadOptions) -> Result<Loaded> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_corpus(BufReader::new(file), name, level, opts).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus(
    reader: impl BufRead,
    name: impl Into<String>,
    level: Level,
    opts: &LoadOptions,
) -> Result<Loaded> {
    let mut documents = Vec::new();
    let mut dropped = 0;
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(date) = &record.date {
            if !is_iso_date(date) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("date {date:?} is not YYYY-MM-DD"),
                });
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate document id {:?}", record.id),
            });
        }
        let texts = match (&record.kinds, opts.merge_bullets) {
            (Some(kinds), true) => {
                if kinds.len() != record.sequences.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "kinds and sequences differ in length".into(),
                    });
                }
                let paired: Vec<_> = kinds.iter().copied().zip(record.sequences).collect();
                merge_bullets(&paired).map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?
            }
            _ => record.sequences,
        };
        if texts.len() < 2 {
            dropped += 1;
            continue;
        }
        documents.push(Document {
            id: record.id,
            date: record.date,
            sequences: texts.into_iter().map(Sequence::new).collect(),
        });
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus { dropped });
    }
    Ok(Loaded {
        corpus: Corpus {
            name: name.into(),
            level,
            documents,
        },
        dropped,
    })
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Serializes one document per line in canonical field order.
pub fn write_corpus(corpus: &Corpus, mut w: impl Write) -> Result<()> {
    for doc in &corpus.documents {
        let record = DocumentRecord {
            id: doc.id.clone(),
            date: doc.date.clone(),
            sequences: doc.sequences.iter().map(|s| s.text.clone()).collect(),
            kinds: None,
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Appends every bullet/numbered item to the nearest preceding plain
/// paragraph, space-joined and in order.
pub fn merge_bullets(paragraphs: &[(ParagraphKind, String)]) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for (kind, text) in paragraphs {
        match (kind, out.last_mut()) {
            (ParagraphKind::Plain, _) => out.push(text.clone()),
            (ParagraphKind::Bullet, Some(prev)) => {
                prev.push(' ');
                prev.push_str(text);
            }
            (ParagraphKind::Bullet, None) => {
                return Err(Error::Precondition(
                    "first paragraph is a bullet; nothing to attach it to".into(),
                ))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.9,
            dev: 0.05,
            test: 0.05,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let all_positive = self.train > 0.0 && self.dev > 0.0 && self.test > 0.0;
        if !all_positive || (self.train + self.dev + self.test - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

/// Sorts by date (ties by id) and cuts at `floor(N*train)` and
/// `floor(N*(train+dev))`; the remainder goes to test.
///
/// With `chronological = false` the file order is kept and dates are ignored.
pub fn split_chronological(corpus: &Corpus, ratios: SplitRatios, chronological: bool) -> Result<Split> {
    ratios.validate()?;
    let mut docs = corpus.documents.clone();
    if chronological {
        if let Some(doc) = docs.iter().find(|d| d.date.is_none()) {
            return Err(Error::MissingDate { id: doc.id.clone() });
        }
        docs.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
    }
    let n = docs.len() as f64;
    let cut_train = (n * ratios.train + 1e-9).floor() as usize;
    let cut_dev = (n * (ratios.train + ratios.dev) + 1e-9).floor() as usize;
    let test = docs.split_off(cut_dev.min(docs.len()));
    let dev = docs.split_off(cut_train.min(docs.len()));
    Ok(Split {
        train: corpus.with_documents(docs),
        dev: corpus.with_documents(dev),
        test: corpus.with_documents(test),
    })
}

/// Attaches vocabulary ids to every sequence; unknown tokens map to UNK.
pub fn encode(corpus: &Corpus, vocab: &Vocabulary) -> Corpus {
    let mut out = corpus.clone();
    for seq in out.documents.iter_mut().flat_map(|d| d.sequences.iter_mut()) {
        seq.token_ids = Some(vocab.encode(&seq.tokens));
    }
    out
}
