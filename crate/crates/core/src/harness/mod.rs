//! Prediction, evaluation, run configuration and the gradient-check instance.

mod config;
mod gradcheck;
mod pipeline;

pub use config::{load_run_config, parse_run_config, ConfigError, RunConfig};
pub use gradcheck::{grad_check, grad_check_instance, GradCheckInstance, GRAD_CHECK_MARGIN, GRAD_CHECK_TOLERANCE};
pub use pipeline::{build_trainer, load_kb, train_run, write_file, HarnessError, Resources, TrainOutcome};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::dataset::DatasetRecord;
use crate::graph_encoder::{encode_graph, score};
use crate::kb::{execute, KnowledgeBase, Value};
use crate::model::{Model, ModelError};
use crate::numerics::Tape;
use crate::query_graph::{generate_candidates, to_inline_logical_form, GenLimits, TriggerLexicon};
use crate::question_encoder::encode_question;
use crate::trainer::{Checkpoint, TrainError};

/// Precision, recall and F1 of a predicted answer set. Empty sides score 0.
pub fn pr_f1(predicted: &BTreeSet<Value>, gold: &BTreeSet<Value>) -> (f64, f64, f64) {
    let hit = predicted.intersection(gold).count() as f64;
    let p = if predicted.is_empty() { 0.0 } else { hit / predicted.len() as f64 };
    let r = if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// A trained model with the generation settings it was trained under.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub model: Model,
    pub limits: GenLimits,
    pub triggers: TriggerLexicon,
}

impl Predictor {
    pub fn from_checkpoint(c: Checkpoint) -> Result<Self, TrainError> {
        let (limits, triggers) = (c.limits, c.triggers.clone());
        Ok(Self { model: c.into_model()?, limits, triggers })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub form: String,
    /// `None` when the graph encodes to a zero vector.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    /// Best first; equal scores ordered by logical form, degenerate candidates last.
    pub ranked: Vec<ScoredCandidate>,
    pub chosen: Option<String>,
    pub answers: BTreeSet<Value>,
}

pub fn predict(record: &DatasetRecord, kb: &KnowledgeBase, predictor: &Predictor) -> Result<Prediction, ModelError> {
    let model = &predictor.model;
    let candidates = generate_candidates(record, kb, &predictor.limits, &predictor.triggers);
    let mut ranked = Vec::with_capacity(candidates.len());
    let mut graphs = Vec::with_capacity(candidates.len());
    if !candidates.is_empty() {
        let mut tape = Tape::new(&model.params);
        let q = encode_question(&mut tape, model, record)?;
        for g in candidates {
            let enc = encode_graph(&mut tape, model, kb, &g, q.e_avg)?;
            let s = match score(&mut tape, q.h_q, enc.h_whole) {
                Ok(v) => Some(tape.value(v).data()[0]),
                Err(ModelError::Degenerate) => None,
                Err(e) => return Err(e),
            };
            let form = to_inline_logical_form(&g).map_err(|e| ModelError::Data(e.to_string()))?;
            ranked.push(ScoredCandidate { form, score: s });
            graphs.push(g);
        }
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&ranked[a], &ranked[b]);
        let by_score = match (x.score, y.score) {
            (Some(p), Some(q)) => q.total_cmp(&p),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_score.then_with(|| x.form.cmp(&y.form))
    });
    let answers = match order.first() {
        Some(&i) => execute(kb, &graphs[i]).map_err(|e| ModelError::Data(e.to_string()))?,
        None => BTreeSet::new(),
    };
    let ranked: Vec<ScoredCandidate> = order.into_iter().map(|i| ranked[i].clone()).collect();
    Ok(Prediction { id: record.id.clone(), chosen: ranked.first().map(|c| c.form.clone()), ranked, answers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionMetrics {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub chosen_form: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub questions: Vec<QuestionMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl Metrics {
    pub fn from_questions(questions: Vec<QuestionMetrics>) -> Self {
        let n = questions.len().max(1) as f64;
        let mean = |f: fn(&QuestionMetrics) -> f64| questions.iter().map(f).sum::<f64>() / n;
        Self {
            macro_precision: mean(|q| q.precision),
            macro_recall: mean(|q| q.recall),
            macro_f1: mean(|q| q.f1),
            questions,
        }
    }

    /// `id<TAB>p<TAB>r<TAB>f1<TAB>chosen_form`, one line per question.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for q in &self.questions {
            let form = q.chosen_form.as_deref().unwrap_or("");
            writeln!(out, "{}\t{}\t{}\t{}\t{}", q.id, q.precision, q.recall, q.f1, form).expect("string write");
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "questions\t{}\nmacro_precision\t{}\nmacro_recall\t{}\nmacro_f1\t{}\n",
            self.questions.len(),
            self.macro_precision,
            self.macro_recall,
            self.macro_f1
        )
    }
}

pub fn evaluate(records: &[DatasetRecord], kb: &KnowledgeBase, predictor: &Predictor) -> Result<Metrics, ModelError> {
    let questions = records
        .iter()
        .map(|r| {
            let pred = predict(r, kb, predictor)?;
            let (precision, recall, f1) = pr_f1(&pred.answers, &r.answers);
            Ok(QuestionMetrics { id: r.id.clone(), precision, recall, f1, chosen_form: pred.chosen })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Metrics::from_questions(questions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<Value> {
        xs.iter().map(|x| Value::entity(*x)).collect()
    }

    #[test]
    fn pr_f1_examples() {
        assert_eq!(pr_f1(&set(&["a"]), &set(&["a"])), (1.0, 1.0, 1.0));
        assert_eq!(pr_f1(&set(&["a", "b"]), &set(&["b", "c"])), (0.5, 0.5, 0.5));
        assert_eq!(pr_f1(&set(&[]), &set(&["a"])), (0.0, 0.0, 0.0));
        assert_eq!(pr_f1(&set(&["a"]), &set(&[])), (0.0, 0.0, 0.0));
    }

    fn q(id: &str, f1: f64) -> QuestionMetrics {
        QuestionMetrics { id: id.into(), precision: f1, recall: f1, f1, chosen_form: None }
    }

    #[test]
    fn macro_average() {
        let m = Metrics::from_questions(vec![q("a", 1.0), q("b", 0.0)]);
        assert_eq!(m.macro_f1, 0.5);
        assert_eq!(m.report().lines().count(), 2);
        assert_eq!(m.report().lines().next().unwrap(), "a\t1\t1\t1\t");
        let one = Metrics::from_questions(vec![q("a", 1.0)]);
        assert_eq!((one.macro_precision, one.macro_recall, one.macro_f1), (1.0, 1.0, 1.0));
    }
}
