use std::path::Path;

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, EpochLoss, NamedArray, TrainConfig, TrainError, Trainer};
use crate::lexicon::{RelationVocabulary, SenseLexicon, WordIndex};
use crate::model::Model;
use crate::numerics::ParamRegistry;
use crate::query_graph::{GenLimits, TriggerLexicon};

pub const CHECKPOINT_FORMAT: &str = "kbqa-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Generator state. The word position is a `u128`, kept as a decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, TrainError> {
        use rand::SeedableRng;
        let pos: u128 =
            self.word_pos.parse().map_err(|_| TrainError::Checkpoint(format!("bad rng word_pos `{}`", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub limits: GenLimits,
    pub triggers: TriggerLexicon,
    pub words: WordIndex,
    pub relations: RelationVocabulary,
    pub lexicon: SenseLexicon,
    pub dep_labels: Vec<String>,
    pub params: Vec<NamedArray>,
    pub adam_t: u64,
    pub adam_m: Vec<NamedArray>,
    pub adam_v: Vec<NamedArray>,
    pub epoch: usize,
    pub rng: RngState,
    pub loss_log: Vec<EpochLoss>,
}

fn arrays<'a>(it: impl Iterator<Item = (&'a str, &'a crate::numerics::Tensor)>) -> Vec<NamedArray> {
    it.map(|(n, t)| NamedArray::from_tensor(n, t)).collect()
}

impl Checkpoint {
    pub(super) fn new(t: &Trainer<'_>) -> Self {
        let m = &t.model;
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: t.config.clone(),
            limits: t.limits,
            triggers: t.triggers.clone(),
            words: m.words.clone(),
            relations: m.relations.clone(),
            lexicon: m.lexicon.clone(),
            dep_labels: m.dep_labels.clone(),
            params: arrays(m.params.iter()),
            adam_t: t.adam.t,
            adam_m: arrays(t.adam.m.iter().map(|(k, v)| (k.as_str(), v))),
            adam_v: arrays(t.adam.v.iter().map(|(k, v)| (k.as_str(), v))),
            epoch: t.epoch,
            rng: RngState::capture(t.rng()),
            loss_log: t.log.clone(),
        }
    }

    /// A model-only checkpoint, for scoring without a training run.
    pub fn from_model(model: &Model, config: TrainConfig, limits: GenLimits, triggers: TriggerLexicon) -> Self {
        use rand::SeedableRng;
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            rng: RngState::capture(&ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2))),
            config,
            limits,
            triggers,
            words: model.words.clone(),
            relations: model.relations.clone(),
            lexicon: model.lexicon.clone(),
            dep_labels: model.dep_labels.clone(),
            params: arrays(model.params.iter()),
            adam_t: 0,
            adam_m: Vec::new(),
            adam_v: Vec::new(),
            epoch: 0,
            loss_log: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let c: Self = serde_json::from_str(text).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(TrainError::Checkpoint(format!(
                "unsupported checkpoint `{}` version {}",
                c.format, c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| TrainError::Checkpoint(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn adam(&self) -> Result<Adam, TrainError> {
        let to_map = |xs: &[NamedArray]| -> Result<IndexMap<String, _>, TrainError> {
            xs.iter().map(|a| Ok((a.name.clone(), a.to_tensor().map_err(TrainError::Checkpoint)?))).collect()
        };
        let mut adam = Adam::new(self.config.learning_rate);
        adam.t = self.adam_t;
        adam.m = to_map(&self.adam_m)?;
        adam.v = to_map(&self.adam_v)?;
        Ok(adam)
    }

    pub fn into_model(self) -> Result<Model, TrainError> {
        let mut params = ParamRegistry::new();
        for a in &self.params {
            let t = a.to_tensor().map_err(TrainError::Checkpoint)?;
            params.insert(a.name.clone(), t).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        }
        Ok(Model {
            config: self.config.model,
            words: self.words,
            relations: self.relations,
            lexicon: self.lexicon,
            dep_labels: self.dep_labels,
            params,
        })
    }
}
