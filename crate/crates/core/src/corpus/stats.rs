use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Corpus, Level};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub sequences: usize,
    pub avg_sequence_number: f64,
    /// Raw tokens per sequence (before any UNK replacement).
    pub avg_sequence_length: f64,
    pub vocabulary: usize,
    /// Paragraph-level corpora only: sentence-final punctuation tokens per
    /// paragraph, counting at least one sentence per paragraph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_sentences_per_paragraph: Option<f64>,
}

pub fn stats(corpus: &Corpus) -> CorpusStats {
    let documents = corpus.len();
    let sequences = corpus.sequence_count();
    let seqs = || corpus.documents.iter().flat_map(|d| &d.sequences);
    let tokens: usize = seqs().map(|s| s.tokens.len()).sum();
    let vocabulary = seqs()
        .flat_map(|s| s.tokens.iter().map(String::as_str))
        .collect::<HashSet<_>>()
        .len();
    let avg_sentences_per_paragraph = (corpus.level == Level::Paragraph).then(|| {
        let sentences: usize = seqs()
            .map(|s| {
                s.tokens
                    .iter()
                    .filter(|t| matches!(t.as_str(), "." | "!" | "?"))
                    .count()
                    .max(1)
            })
            .sum();
        sentences as f64 / sequences.max(1) as f64
    });
    CorpusStats {
        documents,
        sequences,
        avg_sequence_number: sequences as f64 / documents.max(1) as f64,
        avg_sequence_length: tokens as f64 / sequences.max(1) as f64,
        vocabulary,
        avg_sentences_per_paragraph,
    }
}
