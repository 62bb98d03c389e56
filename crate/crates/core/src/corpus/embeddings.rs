use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Half-width of the uniform init used for ids without a pretrained vector.
pub const UNMATCHED_INIT: f64 = 0.05;

/// Dense `vocab.len() x dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    /// Every row drawn from U[-0.05, 0.05].
    pub fn random(vocab_len: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let rows = (0..vocab_len)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.random_range(-UNMATCHED_INIT..=UNMATCHED_INIT))
                    .collect()
            })
            .collect();
        EmbeddingMatrix { dim, rows }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub matched: usize,
    pub vocab_size: usize,
    pub hit_rate: f64,
}

/// Reads whitespace-separated `token v1 .. v_dim` lines. Ids found in the file
/// take its vector; the rest keep their seeded uniform init.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<(EmbeddingMatrix, EmbeddingReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), vocab, dim, seed)
}

pub fn read_embeddings(
    reader: impl BufRead,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<(EmbeddingMatrix, EmbeddingReport)> {
    let mut matrix = EmbeddingMatrix::random(vocab.len(), dim, seed);
    let mut hit = vec![false; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != dim {
            return Err(Error::Format {
                line: i + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        let id = vocab.id(token);
        if id != vocab.unk_id() || token == super::UNK_TOKEN {
            matrix.rows[id as usize] = values;
            hit[id as usize] = true;
        }
    }
    // UNK is not a real token; the hit rate is over retained tokens.
    let retained = vocab.len() - 1;
    let matched = hit[..retained].iter().filter(|&&h| h).count();
    let hit_rate = if retained == 0 {
        0.0
    } else {
        matched as f64 / retained as f64
    };
    Ok((
        matrix,
        EmbeddingReport {
            matched,
            vocab_size: retained,
            hit_rate,
        },
    ))
}
