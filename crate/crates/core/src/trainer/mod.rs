//! Margin-ranking training with Adam, plus checkpoints and the loss log.

mod adam;
mod checkpoint;

pub use adam::{Adam, NamedArray};
pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::graph_encoder::{encode_graph, score};
use crate::harness::pr_f1;
use crate::kb::{execute, KnowledgeBase};
use crate::model::{names, Model, ModelConfig, ModelError};
use crate::numerics::{Gradients, Tape, Tensor, Var};
use crate::query_graph::{generate_candidates, to_inline_logical_form, GenLimits, QueryGraph, TriggerLexicon};
use crate::question_encoder::encode_question;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("no trainable question: every record lacked a positive or a negative candidate")]
    NothingToTrain,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    /// Candidates at or above this answer F1 count as gold.
    pub gold_threshold: f64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 300,
            negatives_per_positive: 5,
            seed: 0,
            gold_threshold: 0.5,
            checkpoint_every: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives_per_positive must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gold_threshold) {
            return bad("gold_threshold must lie in [0, 1]");
        }
        self.model.validate().map_err(TrainError::Config)
    }
}

/// `Σ_neg max(0, λ − s⁺ + s⁻)`.
pub fn hinge_loss(score_pos: f64, score_negs: &[f64], margin: f64) -> f64 {
    score_negs.iter().map(|s| (margin - score_pos + s).max(0.0)).sum()
}

/// Uniform sample of `min(k, |negatives|)` without replacement.
pub fn sample_negatives<'a, T>(negatives: &'a [T], k: usize, rng: &mut ChaCha8Rng) -> Vec<&'a T> {
    negatives.choose_multiple(rng, k.min(negatives.len())).collect()
}

/// A record's positive graph and the pool its negatives are drawn from.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub record: usize,
    pub positive: QueryGraph,
    pub positive_form: String,
    pub negatives: Vec<QueryGraph>,
}

/// Splits candidates by answer F1. The positive is the best candidate, ties
/// broken by first logical form; negatives are those under the threshold.
/// `None` when there is no gold candidate or no negative.
pub fn label_candidates(
    record: &DatasetRecord,
    candidates: &[QueryGraph],
    kb: &KnowledgeBase,
    threshold: f64,
) -> Option<(QueryGraph, String, Vec<QueryGraph>)> {
    let mut best: Option<(f64, String, &QueryGraph)> = None;
    let mut negatives = Vec::new();
    for g in candidates {
        let Ok(answers) = execute(kb, g) else { continue };
        let (_, _, f1) = pr_f1(&answers, &record.answers);
        if f1 < threshold {
            negatives.push(g.clone());
            continue;
        }
        let form = to_inline_logical_form(g).expect("candidate validated");
        let better = match &best {
            None => true,
            Some((bf, bform, _)) => f1 > *bf || (f1 == *bf && form < *bform),
        };
        if better {
            best = Some((f1, form, g));
        }
    }
    let (_, form, pos) = best?;
    if negatives.is_empty() {
        return None;
    }
    Some((pos.clone(), form, negatives))
}

/// Candidates per record, labeled for training; skipped record ids are returned alongside.
pub fn build_examples(
    records: &[DatasetRecord],
    kb: &KnowledgeBase,
    limits: &GenLimits,
    triggers: &TriggerLexicon,
    threshold: f64,
) -> (Vec<TrainingExample>, Vec<String>) {
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let cands = generate_candidates(r, kb, limits, triggers);
        match label_candidates(r, &cands, kb, threshold) {
            Some((positive, positive_form, negatives)) => {
                examples.push(TrainingExample { record: i, positive, positive_form, negatives })
            }
            None => {
                log::info!("skipping `{}`: no usable positive/negative split among {} candidates", r.id, cands.len());
                skipped.push(r.id.clone());
            }
        }
    }
    (examples, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub n_pairs: usize,
}

/// `epoch<TAB>mean_loss<TAB>n_pairs` lines.
pub fn format_loss_log(log: &[EpochLoss]) -> String {
    log.iter().map(|e| format!("{}\t{}\t{}\n", e.epoch, e.mean_loss, e.n_pairs)).collect()
}

/// Training state that advances one epoch at a time.
pub struct Trainer<'a> {
    pub model: Model,
    pub adam: Adam,
    pub config: TrainConfig,
    pub limits: GenLimits,
    pub triggers: TriggerLexicon,
    pub epoch: usize,
    pub log: Vec<EpochLoss>,
    pub skipped: Vec<String>,
    rng: ChaCha8Rng,
    records: &'a [DatasetRecord],
    kb: &'a KnowledgeBase,
    examples: Vec<TrainingExample>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        model: Model,
        config: TrainConfig,
        limits: GenLimits,
        triggers: TriggerLexicon,
        records: &'a [DatasetRecord],
        kb: &'a KnowledgeBase,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        limits.validate().map_err(TrainError::Config)?;
        if model.config != config.model {
            return Err(TrainError::Config("model was built with a different configuration".into()));
        }
        let (examples, skipped) = build_examples(records, kb, &limits, &triggers, config.gold_threshold);
        if examples.is_empty() {
            return Err(TrainError::NothingToTrain);
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
        let adam = Adam::new(config.learning_rate);
        Ok(Self { model, adam, config, limits, triggers, epoch: 0, log: Vec::new(), skipped, rng, records, kb, examples })
    }

    /// Continues from a checkpoint taken on the same data.
    pub fn resume(checkpoint: Checkpoint, records: &'a [DatasetRecord], kb: &'a KnowledgeBase) -> Result<Self, TrainError> {
        let rng = checkpoint.rng.restore()?;
        let adam = checkpoint.adam()?;
        let epoch = checkpoint.epoch;
        let log = checkpoint.loss_log.clone();
        let (limits, triggers, config) = (checkpoint.limits, checkpoint.triggers.clone(), checkpoint.config.clone());
        let model = checkpoint.into_model()?;
        let mut t = Self::new(model, config, limits, triggers, records, kb)?;
        t.rng = rng;
        t.adam = adam;
        t.epoch = epoch;
        t.log = log;
        Ok(t)
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self)
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Trains up to `config.epochs`, calling `on_epoch` after each one.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&Self, EpochLoss) -> Result<(), TrainError>) -> Result<(), TrainError> {
        while self.epoch < self.config.epochs {
            let e = self.run_epoch()?;
            log::info!("epoch {} mean loss {:.6} over {} pairs", e.epoch, e.mean_loss, e.n_pairs);
            on_epoch(self, e)?;
        }
        Ok(())
    }

    pub fn run_epoch(&mut self) -> Result<EpochLoss, TrainError> {
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut n_pairs = 0;
        for batch in order.chunks(self.config.batch_size) {
            let (loss_sum, pairs, grads) = self.batch_gradients(batch)?;
            total += loss_sum;
            n_pairs += pairs;
            if let Some(grads) = grads {
                let freeze = self.model.config.freeze_embeddings;
                self.adam.step(&mut self.model.params, &grads, |n| freeze && n == names::WORD_EMB)?;
            }
        }
        self.epoch += 1;
        let mean_loss = if n_pairs == 0 { 0.0 } else { total / n_pairs as f64 };
        let entry = EpochLoss { epoch: self.epoch, mean_loss, n_pairs };
        self.log.push(entry);
        Ok(entry)
    }

    /// Hinge-loss sum, pair count and mean-per-pair gradients for one batch.
    fn batch_gradients(&mut self, batch: &[usize]) -> Result<(f64, usize, Option<Gradients>), TrainError> {
        let k = self.config.negatives_per_positive;
        let sampled: Vec<Vec<QueryGraph>> = batch
            .iter()
            .map(|&i| sample_negatives(&self.examples[i].negatives, k, &mut self.rng).into_iter().cloned().collect())
            .collect();
        let rng = self.rng.clone();
        let mut tape = Tape::training(&self.model.params, rng);
        let mut pair_losses: Vec<Var> = Vec::new();
        let margin = tape.constant(Tensor::scalar(self.config.margin));
        for (&i, negs) in batch.iter().zip(&sampled) {
            let ex = &self.examples[i];
            let record = &self.records[ex.record];
            let q = encode_question(&mut tape, &self.model, record)?;
            let pos = match score_graph(&mut tape, &self.model, self.kb, &ex.positive, q.h_q, q.e_avg) {
                Ok(s) => s,
                Err(ModelError::Degenerate) => {
                    log::debug!("`{}`: degenerate positive encoding, pair skipped", record.id);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            for neg in negs {
                let s_neg = match score_graph(&mut tape, &self.model, self.kb, neg, q.h_q, q.e_avg) {
                    Ok(s) => s,
                    Err(ModelError::Degenerate) => continue,
                    Err(e) => return Err(e.into()),
                };
                let gap = tape.sub(margin, pos).map_err(ModelError::from)?;
                let pre = tape.add(gap, s_neg).map_err(ModelError::from)?;
                pair_losses.push(tape.relu(pre));
            }
        }
        let n = pair_losses.len();
        let result = if n == 0 {
            (0.0, 0, None)
        } else {
            let stacked = tape.stack(&pair_losses).map_err(ModelError::from)?;
            let total = tape.sum(stacked);
            let mean = tape.scale_const(total, 1.0 / n as f64);
            let loss_sum = tape.value(total).data()[0];
            let grads = tape.backward(mean).map_err(ModelError::from)?;
            (loss_sum, n, Some(grads))
        };
        self.rng = tape.into_rng().expect("training tape keeps its generator");
        Ok(result)
    }
}

fn score_graph(
    tape: &mut Tape<'_>,
    model: &Model,
    kb: &KnowledgeBase,
    g: &QueryGraph,
    h_q: Var,
    e_avg: Var,
) -> Result<Var, ModelError> {
    let enc = encode_graph(tape, model, kb, g, e_avg)?;
    score(tape, h_q, enc.h_whole)
}

/// Record ids whose positive form is listed, for diagnostics.
pub fn positive_forms(examples: &[TrainingExample]) -> BTreeSet<String> {
    examples.iter().map(|e| e.positive_form.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_cases() {
        assert_eq!(hinge_loss(1.0, &[0.0], 0.5), 0.0);
        assert_eq!(hinge_loss(0.0, &[0.0, 0.0], 0.5), 1.0);
        assert_eq!(hinge_loss(0.3, &[0.3], 0.0), 0.0);
    }

    #[test]
    fn negative_sampling_clamps_and_repeats() {
        let pool = vec![1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s: Vec<i32> = sample_negatives(&pool, 5, &mut rng).into_iter().copied().collect();
        s.sort();
        assert_eq!(s, vec![1, 2, 3]);
        let pool: Vec<i32> = (0..20).collect();
        let a = sample_negatives(&pool, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_negatives(&pool, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 5);
    }
}
