//! Word embeddings, relation vocabulary, label tokenization and the
//! sense/lemma lexicon used by the word-level relation path.

mod embeddings;
mod senses;

pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingTable, Resolved, UnkPolicy, WordIndex};
pub use senses::{load_lexicon, parse_lexicon, Sense, SenseLexicon};

use indexmap::IndexMap;

use crate::numerics::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{file} line {line}: {message}")]
    Load { file: &'static str, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Splits a relation or entity label into lowercase words.
///
/// Breaks on whitespace, `_`, `-`, `.` and lower-to-upper camelCase boundaries.
pub fn tokenize_relation_label(label: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for ch in label.chars() {
        if ch.is_whitespace() || matches!(ch, '_' | '-' | '.') {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        prev_lower = ch.is_lowercase();
        cur.extend(ch.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Relation ids with their learned relation-level rows. The last row is
/// shared by every relation outside the vocabulary.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelationVocabulary {
    relations: IndexMap<String, usize>,
    labels: IndexMap<String, String>,
}

impl RelationVocabulary {
    /// Relations are indexed in sorted order; labels default to the id.
    pub fn new<'a>(relations: impl IntoIterator<Item = &'a str>) -> Self {
        let mut sorted: Vec<&str> = relations.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        Self {
            relations: sorted.iter().enumerate().map(|(i, r)| (r.to_string(), i)).collect(),
            labels: sorted.iter().map(|r| (r.to_string(), r.to_string())).collect(),
        }
    }

    pub fn set_label(&mut self, relation: &str, label: impl Into<String>) {
        if self.relations.contains_key(relation) {
            self.labels.insert(relation.to_string(), label.into());
        }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Rows in the embedding matrix, including the unknown row.
    pub fn rows(&self) -> usize {
        self.relations.len() + 1
    }

    pub fn unk_row(&self) -> usize {
        self.relations.len()
    }

    pub fn row_of(&self, relation: &str) -> usize {
        self.relations.get(relation).copied().unwrap_or(self.unk_row())
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.relations.contains_key(relation)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    /// Human label, or the id itself for unknown relations.
    pub fn label_of<'a>(&'a self, relation: &'a str) -> &'a str {
        self.labels.get(relation).map(String::as_str).unwrap_or(relation)
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// A fresh `rows() × dim` matrix with entries drawn from N(0, std²).
    pub fn init_matrix<R: rand::Rng>(&self, dim: usize, std: f64, rng: &mut R) -> Tensor {
        Tensor::randn(vec![self.rows(), dim], std, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_tokenization() {
        assert_eq!(tokenize_relation_label("position_held"), vec!["position", "held"]);
        assert_eq!(tokenize_relation_label("be subject to"), vec!["be", "subject", "to"]);
        assert_eq!(tokenize_relation_label("birthPlace"), vec!["birth", "place"]);
        assert_eq!(tokenize_relation_label("a.b-c"), vec!["a", "b", "c"]);
        assert!(tokenize_relation_label("").is_empty());
        assert_eq!(tokenize_relation_label("HTML"), vec!["html"]);
    }

    #[test]
    fn relation_rows() {
        let mut v = RelationVocabulary::new(["b", "a", "b"]);
        assert_eq!(v.len(), 2);
        assert_eq!(v.row_of("a"), 0);
        assert_eq!(v.row_of("b"), 1);
        assert_eq!(v.row_of("zzz"), 2);
        v.set_label("a", "alpha beta");
        assert_eq!(v.label_of("a"), "alpha beta");
        assert_eq!(v.label_of("zzz"), "zzz");
    }
}
