//! Model configuration, vocabularies and the parameter registry shared by
//! the question and graph encoders.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::kb::KnowledgeBase;
use crate::lexicon::{tokenize_relation_label, EmbeddingTable, RelationVocabulary, Resolved, SenseLexicon, UnkPolicy, WordIndex};
use crate::numerics::{NumericsError, ParamRegistry, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationTyping {
    /// One neighbor transform per relation.
    Typed,
    /// One neighbor transform shared by all relations.
    Untyped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DependencyEdges {
    /// Self-loop and head-to-dependent.
    TwoClass,
    /// Self-loop plus one class per dependency label.
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub question_layers: usize,
    pub graph_layers: usize,
    pub dropout: f64,
    /// Attend over `[h0 ⊕ hL]` rather than `hL` alone.
    pub concat_sequence: bool,
    pub structure_attention: bool,
    pub wordnet: bool,
    pub fine_grained: bool,
    pub relation_typing: RelationTyping,
    pub dependency_edges: DependencyEdges,
    /// Also pass messages against edge direction, with separate weights.
    pub inverse_messages: bool,
    pub unk_policy: UnkPolicy,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            question_layers: 3,
            graph_layers: 2,
            dropout: 0.2,
            concat_sequence: true,
            structure_attention: true,
            wordnet: true,
            fine_grained: true,
            relation_typing: RelationTyping::Typed,
            dependency_edges: DependencyEdges::TwoClass,
            inverse_messages: false,
            unk_policy: UnkPolicy::Learned,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        if self.question_layers == 0 || self.graph_layers == 0 {
            return Err("layer counts must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} not in [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Width of the per-token vectors the question attention pools.
    pub fn token_feature_dim(&self) -> usize {
        if self.concat_sequence {
            2 * self.dim
        } else {
            self.dim
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("data error: {0}")]
    Data(String),
    #[error("degenerate graph encoding (zero vector)")]
    Degenerate,
}

/// Parameter names.
pub mod names {
    pub const WORD_EMB: &str = "emb.word";
    pub const REL_EMB: &str = "emb.relation";
    pub const Q_ATT: &str = "q.att";
    pub const Q_FC_W: &str = "q.fc.w";
    pub const Q_FC_B: &str = "q.fc.b";
    pub const G_INIT_ANSWER: &str = "g.init.answer";
    pub const G_INIT_VARIABLE: &str = "g.init.variable";
    pub const WN_W: &str = "wn.w";
    pub const WN_B: &str = "wn.b";
    pub const FUSE_W: &str = "fuse.w";
    pub const FUSE_B: &str = "fuse.b";
    pub const UNK: &str = "<unk>";

    pub fn q_self(l: usize) -> String {
        format!("q.{l}.self")
    }
    pub fn q_loop(l: usize) -> String {
        format!("q.{l}.loop")
    }
    pub fn q_head_dep(l: usize) -> String {
        format!("q.{l}.head_dep")
    }
    pub fn q_label(l: usize, label: &str) -> String {
        format!("q.{l}.dep.{label}")
    }
    pub fn g_self(l: usize) -> String {
        format!("g.{l}.self")
    }
    pub fn g_rel(l: usize, rel: Option<&str>) -> String {
        match rel {
            Some(r) => format!("g.{l}.rel.{r}"),
            None => format!("g.{l}.rel"),
        }
    }
    pub fn g_inv(l: usize, rel: Option<&str>) -> String {
        match rel {
            Some(r) => format!("g.{l}.inv.{r}"),
            None => format!("g.{l}.inv"),
        }
    }
}

/// Everything needed to encode and score: config, vocabularies, lexicon and parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub words: WordIndex,
    pub relations: RelationVocabulary,
    pub lexicon: SenseLexicon,
    /// Sorted dependency labels with their own transform in labeled mode.
    pub dep_labels: Vec<String>,
    pub params: ParamRegistry,
}

/// Inputs gathered from the training data that fix the model's vocabularies.
#[derive(Debug, Clone, Default)]
pub struct Vocabularies {
    pub words: Vec<String>,
    pub relations: RelationVocabulary,
    pub dep_labels: Vec<String>,
}

impl Vocabularies {
    /// Words from question tokens, KB relation and entity labels and lexicon
    /// lemmas (case-folded, sorted); every KB relation; every dependency label.
    pub fn collect(kb: &KnowledgeBase, records: &[DatasetRecord], lexicon: &SenseLexicon) -> Self {
        let mut words = BTreeSet::new();
        for r in records {
            words.extend(r.tokens.iter().map(|t| t.to_lowercase()));
        }
        for rel in kb.relations() {
            words.extend(tokenize_relation_label(rel));
        }
        for v in kb.values() {
            if let Some(id) = v.as_entity() {
                words.extend(tokenize_relation_label(&kb.label_of(id)));
            }
        }
        for (w, senses) in lexicon.iter() {
            words.insert(w.to_string());
            for s in senses {
                for l in &s.lemmas {
                    words.extend(tokenize_relation_label(l));
                }
            }
        }
        let dep_labels: BTreeSet<String> = records.iter().flat_map(|r| r.dep.iter().map(|d| d.label.clone())).collect();
        Self {
            words: words.into_iter().collect(),
            relations: RelationVocabulary::new(kb.relations()),
            dep_labels: dep_labels.into_iter().collect(),
        }
    }
}

impl Model {
    /// Fresh parameters drawn from `seed`. Rows of `pretrained` overwrite the
    /// random word rows they cover.
    pub fn init(
        config: ModelConfig,
        vocab: Vocabularies,
        lexicon: SenseLexicon,
        pretrained: Option<&EmbeddingTable>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Data)?;
        let d = config.dim;
        let emb_std = 1.0 / (d as f64).sqrt();
        let mut table =
            EmbeddingTable::random(vocab.words.iter().map(String::as_str), d, config.unk_policy, seed, emb_std);
        if let Some(p) = pretrained {
            table.overlay(p).map_err(ModelError::Data)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut params = ParamRegistry::new();
        let square = |rng: &mut ChaCha8Rng| Tensor::randn(vec![d, d], 1.0 / (d as f64).sqrt(), rng);
        params.insert(names::WORD_EMB, table.matrix)?;
        params.insert(names::REL_EMB, vocab.relations.init_matrix(d, emb_std, &mut rng))?;
        for l in 0..config.question_layers {
            params.insert(names::q_self(l), square(&mut rng))?;
            params.insert(names::q_loop(l), square(&mut rng))?;
            match config.dependency_edges {
                DependencyEdges::TwoClass => params.insert(names::q_head_dep(l), square(&mut rng))?,
                DependencyEdges::Labeled => {
                    for label in vocab.dep_labels.iter().map(String::as_str).chain([names::UNK]) {
                        params.insert(names::q_label(l, label), square(&mut rng))?;
                    }
                }
            }
        }
        let feat = config.token_feature_dim();
        params.insert(names::Q_ATT, Tensor::randn(vec![d, feat], 1.0 / (feat as f64).sqrt(), &mut rng))?;
        params.insert(names::Q_FC_W, Tensor::randn(vec![d, feat], 1.0 / (feat as f64).sqrt(), &mut rng))?;
        params.insert(names::Q_FC_B, Tensor::vector(vec![0.1; d]))?;
        params.insert(names::G_INIT_ANSWER, Tensor::randn(vec![d], emb_std, &mut rng))?;
        params.insert(names::G_INIT_VARIABLE, Tensor::randn(vec![d], emb_std, &mut rng))?;
        let rel_keys: Vec<Option<String>> = match config.relation_typing {
            RelationTyping::Typed => {
                vocab.relations.relations().chain([names::UNK]).map(|r| Some(r.to_string())).collect()
            }
            RelationTyping::Untyped => vec![None],
        };
        for l in 0..config.graph_layers {
            params.insert(names::g_self(l), square(&mut rng))?;
            for r in &rel_keys {
                params.insert(names::g_rel(l, r.as_deref()), square(&mut rng))?;
            }
            if config.inverse_messages {
                for r in &rel_keys {
                    params.insert(names::g_inv(l, r.as_deref()), square(&mut rng))?;
                }
            }
        }
        params.insert(names::WN_W, Tensor::scalar(1.0))?;
        params.insert(names::WN_B, Tensor::scalar(0.0))?;
        params.insert(names::FUSE_W, square(&mut rng))?;
        params.insert(names::FUSE_B, Tensor::vector(vec![0.1; d]))?;
        Ok(Self {
            config,
            words: table.index,
            relations: vocab.relations,
            lexicon,
            dep_labels: vocab.dep_labels,
            params,
        })
    }

    /// Parameters the optimizer should leave alone.
    pub fn is_frozen(&self, name: &str) -> bool {
        self.config.freeze_embeddings && name == names::WORD_EMB
    }

    /// The current word-embedding table.
    pub fn embedding_table(&self) -> EmbeddingTable {
        EmbeddingTable {
            index: self.words.clone(),
            matrix: self.params.get(names::WORD_EMB).expect("word embeddings registered").clone(),
            trainable: !self.config.freeze_embeddings,
        }
    }

    /// Case-folded word lookup on the tape.
    pub fn word(&self, tape: &mut Tape<'_>, word: &str) -> Result<Var, ModelError> {
        Ok(match self.words.resolve(word) {
            Resolved::Row(i) => {
                let emb = tape.param(names::WORD_EMB)?;
                tape.row(emb, i)?
            }
            Resolved::Fixed(t) => tape.constant(t),
        })
    }

    /// Mean of the word vectors of `words`; `fallback` is looked up whole when `words` is empty.
    pub fn mean_words(&self, tape: &mut Tape<'_>, words: &[String], fallback: &str) -> Result<Var, ModelError> {
        if words.is_empty() {
            return self.word(tape, fallback);
        }
        let rows = words.iter().map(|w| self.word(tape, w)).collect::<Result<Vec<_>, _>>()?;
        if rows.len() == 1 {
            return Ok(rows[0]);
        }
        let m = tape.stack(&rows)?;
        Ok(tape.mean_rows(m)?)
    }

    /// Relation-level row for `relation` (the UNK row when unknown).
    pub fn relation_row(&self, tape: &mut Tape<'_>, relation: &str) -> Result<Var, ModelError> {
        let emb = tape.param(names::REL_EMB)?;
        Ok(tape.row(emb, self.relations.row_of(relation))?)
    }
}

/// `Σ_i weights[i] · rows[i]` for a weight vector var.
pub(crate) fn weighted_sum(tape: &mut Tape<'_>, weights: Var, rows: &[Var]) -> Result<Var, ModelError> {
    let mut acc: Option<Var> = None;
    for (i, &r) in rows.iter().enumerate() {
        let w = tape.index(weights, i)?;
        let term = tape.scale(r, w)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    acc.ok_or_else(|| ModelError::Data("weighted sum over no rows".into()))
}

/// Sum of a non-empty list of same-shape vars.
pub(crate) fn sum_all(tape: &mut Tape<'_>, terms: &[Var]) -> Result<Var, ModelError> {
    let (&first, rest) = terms.split_first().ok_or_else(|| ModelError::Data("sum over no terms".into()))?;
    let mut acc = first;
    for &t in rest {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}
