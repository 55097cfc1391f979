use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::lexicon::UnkPolicy;
use crate::model::{DependencyEdges, RelationTyping};
use crate::query_graph::GenLimits;
use crate::trainer::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Training settings plus generation limits and optional resource files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub limits: GenLimits,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub triggers: Option<PathBuf>,
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid number `{v}`"))
}

/// Parses `key = value` lines; `#` starts a comment. Relative paths resolve against `base`.
pub fn parse_run_config(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Line { line: line_no, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let path = || Some(base.join(value));
        let t = &mut c.train;
        let m = &mut t.model;
        let r: Result<(), String> = (|| {
            match key {
                "margin" => t.margin = parse_num(value)?,
                "learning_rate" => t.learning_rate = parse_num(value)?,
                "batch_size" => t.batch_size = parse_num(value)?,
                "epochs" => t.epochs = parse_num(value)?,
                "negatives_per_positive" => t.negatives_per_positive = parse_num(value)?,
                "seed" => t.seed = parse_num(value)?,
                "gold_threshold" => t.gold_threshold = parse_num(value)?,
                "checkpoint_every" => t.checkpoint_every = parse_num(value)?,
                "dim" => m.dim = parse_num(value)?,
                "question_layers" => m.question_layers = parse_num(value)?,
                "graph_layers" => m.graph_layers = parse_num(value)?,
                "dropout" => m.dropout = parse_num(value)?,
                "concat_sequence" => m.concat_sequence = parse_bool(value)?,
                "structure_attention" => m.structure_attention = parse_bool(value)?,
                "wordnet" => m.wordnet = parse_bool(value)?,
                "fine_grained" => m.fine_grained = parse_bool(value)?,
                "inverse_messages" => m.inverse_messages = parse_bool(value)?,
                "freeze_embeddings" => m.freeze_embeddings = parse_bool(value)?,
                "unk_policy" => m.unk_policy = value.parse::<UnkPolicy>()?,
                "relation_typing" => {
                    m.relation_typing = match value {
                        "typed" => RelationTyping::Typed,
                        "untyped" => RelationTyping::Untyped,
                        _ => return Err(format!("relation_typing must be typed or untyped, got `{value}`")),
                    }
                }
                "dependency_edges" => {
                    m.dependency_edges = match value {
                        "two_class" => DependencyEdges::TwoClass,
                        "labeled" => DependencyEdges::Labeled,
                        _ => return Err(format!("dependency_edges must be two_class or labeled, got `{value}`")),
                    }
                }
                "max_hops" => c.limits.max_hops = parse_num(value)?,
                "max_candidates" => c.limits.max_candidates = parse_num(value)?,
                "max_branch" => c.limits.max_branch = parse_num(value)?,
                "lexicon" => c.lexicon = path(),
                "embeddings" => c.embeddings = path(),
                "triggers" => c.triggers = path(),
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    c.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    c.limits.validate().map_err(ConfigError::Invalid)?;
    Ok(c)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_run_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = parse_run_config("", Path::new(".")).unwrap();
        assert_eq!(c, RunConfig::default());
        let c = parse_run_config(
            "# comment\nmargin = 0.3\nepochs=7 # trailing\nwordnet = false\nrelation_typing = untyped\nmax_hops = 1\nlexicon = lex.txt\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(c.train.margin, 0.3);
        assert_eq!(c.train.epochs, 7);
        assert!(!c.train.model.wordnet);
        assert_eq!(c.train.model.relation_typing, RelationTyping::Untyped);
        assert_eq!(c.limits.max_hops, 1);
        assert_eq!(c.lexicon, Some(PathBuf::from("/data/lex.txt")));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_run_config("epochs = 3\nbogus = 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 2, .. }), "{e}");
        let e = parse_run_config("epochs = 3\nepochs = 4\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 2, .. }));
        let e = parse_run_config("batch_size = x\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 1, .. }));
        assert!(matches!(parse_run_config("batch_size = 0\n", Path::new(".")), Err(ConfigError::Invalid(_))));
    }
}
