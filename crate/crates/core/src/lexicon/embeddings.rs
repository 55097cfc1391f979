use std::path::Path;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LexiconError;
use crate::numerics::Tensor;

/// What an out-of-vocabulary word maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnkPolicy {
    Zero,
    /// A fixed vector derived from the word and this seed.
    Random(u64),
    /// A trainable row appended after the vocabulary.
    Learned,
}

impl std::str::FromStr for UnkPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(UnkPolicy::Zero),
            "learned" => Ok(UnkPolicy::Learned),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(UnkPolicy::Random)
                .ok_or_else(|| format!("unknown unk policy `{s}` (zero | learned | random:<seed>)")),
        }
    }
}

impl std::fmt::Display for UnkPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnkPolicy::Zero => f.write_str("zero"),
            UnkPolicy::Random(seed) => write!(f, "random:{seed}"),
            UnkPolicy::Learned => f.write_str("learned"),
        }
    }
}

/// Word-to-row mapping, separate from the matrix so the matrix can live in a parameter registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordIndex {
    pub dim: usize,
    pub vocab: IndexMap<String, usize>,
    pub unk: UnkPolicy,
}

/// How a word resolves against a [`WordIndex`].
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Row(usize),
    Fixed(Tensor),
}

impl WordIndex {
    /// Rows the matrix needs: the vocabulary plus an UNK row under the learned policy.
    pub fn rows(&self) -> usize {
        self.vocab.len() + usize::from(self.unk == UnkPolicy::Learned)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(&word.to_lowercase())
    }

    /// Case-folds, then looks the word up exactly.
    pub fn resolve(&self, word: &str) -> Resolved {
        if let Some(&i) = self.vocab.get(&word.to_lowercase()) {
            return Resolved::Row(i);
        }
        match self.unk {
            UnkPolicy::Learned => Resolved::Row(self.vocab.len()),
            UnkPolicy::Zero => Resolved::Fixed(Tensor::zeros(vec![self.dim])),
            UnkPolicy::Random(seed) => Resolved::Fixed(hashed_vector(&word.to_lowercase(), seed, self.dim)),
        }
    }
}

/// Deterministic N(0, 0.01) vector keyed by FNV-1a of the word mixed with `seed`.
fn hashed_vector(word: &str, seed: u64, dim: usize) -> Tensor {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h ^ seed);
    Tensor::randn(vec![dim], 0.1, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub index: WordIndex,
    /// `index.rows() × dim`.
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Random N(0, std²) rows for `words` (case-folded, first occurrence wins), drawn in order from `seed`.
    pub fn random<'a>(
        words: impl IntoIterator<Item = &'a str>,
        dim: usize,
        unk: UnkPolicy,
        seed: u64,
        std: f64,
    ) -> Self {
        let mut vocab = IndexMap::new();
        for w in words {
            let w = w.to_lowercase();
            let next = vocab.len();
            vocab.entry(w).or_insert(next);
        }
        let index = WordIndex { dim, vocab, unk };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = Tensor::randn(vec![index.rows().max(1), dim], std, &mut rng);
        Self { index, matrix, trainable: true }
    }

    /// Overwrites rows of words that `pretrained` also knows.
    pub fn overlay(&mut self, pretrained: &EmbeddingTable) -> Result<usize, String> {
        if pretrained.index.dim != self.index.dim {
            return Err(format!(
                "embedding dimension {} does not match model dimension {}",
                pretrained.index.dim, self.index.dim
            ));
        }
        let d = self.index.dim;
        let mut hits = 0;
        for (w, &i) in &self.index.vocab {
            if let Some(&j) = pretrained.index.vocab.get(w) {
                let src = pretrained.matrix.data()[j * d..(j + 1) * d].to_vec();
                self.matrix.data_mut()[i * d..(i + 1) * d].copy_from_slice(&src);
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn lookup(&self, word: &str) -> Tensor {
        match self.index.resolve(word) {
            Resolved::Row(i) => self.matrix.row(i).expect("row within matrix"),
            Resolved::Fixed(t) => t,
        }
    }
}

/// Reads `word v1 ... vd` lines. Unknown words fall back to a learned UNK row initialised at zero.
pub fn load_embeddings(path: &Path, expected_dim: usize) -> Result<EmbeddingTable, LexiconError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LexiconError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_embeddings(&text, expected_dim)
}

pub fn parse_embeddings(text: &str, expected_dim: usize) -> Result<EmbeddingTable, LexiconError> {
    let mut vocab = IndexMap::new();
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LexiconError::Load { file: "embeddings", line: i + 1, message };
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-blank line").to_lowercase();
        let values = parts
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad number `{v}`"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != expected_dim {
            return Err(err(format!("expected {expected_dim} values, found {}", values.len())));
        }
        if vocab.contains_key(&word) {
            return Err(err(format!("duplicate word `{word}`")));
        }
        vocab.insert(word, vocab.len());
        data.extend(values);
    }
    let index = WordIndex { dim: expected_dim, vocab, unk: UnkPolicy::Learned };
    data.extend(std::iter::repeat_n(0.0, expected_dim));
    let matrix = Tensor::new(vec![index.rows(), expected_dim], data).expect("consistent length");
    Ok(EmbeddingTable { index, matrix, trainable: true })
}
