use std::path::Path;

use super::{evaluate, ConfigError, Metrics, Predictor, RunConfig};
use crate::dataset::{DatasetError, DatasetRecord};
use crate::kb::{KbError, KbSchema, KnowledgeBase};
use crate::lexicon::{load_embeddings, load_lexicon, EmbeddingTable, LexiconError, SenseLexicon};
use crate::model::{Model, ModelError, Vocabularies};
use crate::query_graph::{GraphError, TriggerLexicon};
use crate::trainer::{format_loss_log, Checkpoint, EpochLoss, TrainError, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("trigger lexicon: {0}")]
    Triggers(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

/// Files referenced by a run config, loaded.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexicon: SenseLexicon,
    pub embeddings: Option<EmbeddingTable>,
    pub triggers: TriggerLexicon,
}

impl Resources {
    pub fn load(run: &RunConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            lexicon: match &run.lexicon {
                Some(p) => load_lexicon(p)?,
                None => SenseLexicon::default(),
            },
            embeddings: match &run.embeddings {
                Some(p) => Some(load_embeddings(p, run.train.model.dim)?),
                None => None,
            },
            triggers: match &run.triggers {
                Some(p) => TriggerLexicon::load(p)?,
                None => TriggerLexicon::default(),
            },
        })
    }
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, HarnessError> {
    Ok(KnowledgeBase::load_triples(path, KbSchema::default())?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::Write { path: path.display().to_string(), message: e.to_string() })
}

/// A freshly initialized model and its trainer.
pub fn build_trainer<'a>(
    run: &RunConfig,
    resources: &Resources,
    records: &'a [DatasetRecord],
    kb: &'a KnowledgeBase,
) -> Result<Trainer<'a>, HarnessError> {
    let vocab = Vocabularies::collect(kb, records, &resources.lexicon);
    let model = Model::init(
        run.train.model.clone(),
        vocab,
        resources.lexicon.clone(),
        resources.embeddings.as_ref(),
        run.train.seed,
    )?;
    Ok(Trainer::new(model, run.train.clone(), run.limits, resources.triggers.clone(), records, kb)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLoss>,
    pub skipped: Vec<String>,
}

/// Trains to completion. With `out`, the checkpoint is also written every
/// `checkpoint_every` epochs and at the end.
pub fn train_run(
    run: &RunConfig,
    resources: &Resources,
    records: &[DatasetRecord],
    kb: &KnowledgeBase,
    out: Option<&Path>,
) -> Result<TrainOutcome, HarnessError> {
    let mut trainer = build_trainer(run, resources, records, kb)?;
    let every = run.train.checkpoint_every;
    trainer.run(|t, e| match out {
        Some(path) if every > 0 && e.epoch % every == 0 => t.checkpoint().save(path),
        _ => Ok(()),
    })?;
    let checkpoint = trainer.checkpoint();
    if let Some(path) = out {
        checkpoint.save(path)?;
    }
    Ok(TrainOutcome { checkpoint, log: trainer.log.clone(), skipped: trainer.skipped.clone() })
}

impl TrainOutcome {
    pub fn loss_log(&self) -> String {
        format_loss_log(&self.log)
    }

    pub fn evaluate(&self, records: &[DatasetRecord], kb: &KnowledgeBase) -> Result<Metrics, HarnessError> {
        let predictor = Predictor::from_checkpoint(self.checkpoint.clone())?;
        Ok(evaluate(records, kb, &predictor)?)
    }
}
