//! Trigger phrases that attach constraints during candidate generation.
//!
//! File format: one `key=phrase,phrase` entry per line, `#` comments.
//! Keys: `order_asc`, `order_desc`, `compare_gt`, `compare_lt`,
//! `temporal_before`, `temporal_after`.

use std::path::Path;

use super::GraphError;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TriggerLexicon {
    pub order_asc: Vec<String>,
    pub order_desc: Vec<String>,
    pub compare_gt: Vec<String>,
    pub compare_lt: Vec<String>,
    pub temporal_before: Vec<String>,
    pub temporal_after: Vec<String>,
}

impl Default for TriggerLexicon {
    fn default() -> Self {
        let list = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            order_asc: list(&["first", "smallest"]),
            order_desc: list(&["last", "largest"]),
            compare_gt: list(&["more than"]),
            compare_lt: list(&["less than"]),
            temporal_before: list(&["before"]),
            temporal_after: list(&["after", "since"]),
        }
    }
}

impl TriggerLexicon {
    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Parse { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    /// Keys present in `text` replace the defaults; absent keys keep them.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lex = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| GraphError::Parse { line: i + 1, message };
            let (key, phrases) = line.split_once('=').ok_or_else(|| err("expected key=phrase,phrase".into()))?;
            let phrases: Vec<String> =
                phrases.split(',').map(|p| p.trim().to_lowercase()).filter(|p| !p.is_empty()).collect();
            let slot = match key.trim() {
                "order_asc" => &mut lex.order_asc,
                "order_desc" => &mut lex.order_desc,
                "compare_gt" => &mut lex.compare_gt,
                "compare_lt" => &mut lex.compare_lt,
                "temporal_before" => &mut lex.temporal_before,
                "temporal_after" => &mut lex.temporal_after,
                other => return Err(err(format!("unknown trigger key `{other}`"))),
            };
            *slot = phrases;
        }
        Ok(lex)
    }
}

/// Start positions where `phrase` occurs as a whole-token sequence in `tokens` (already lowercased).
pub(crate) fn phrase_positions(tokens: &[String], phrase: &str) -> Vec<usize> {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    if words.is_empty() || words.len() > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - words.len())
        .filter(|&i| words.iter().enumerate().all(|(j, w)| tokens[i + j] == *w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_named_keys_only() {
        let lex = TriggerLexicon::parse("# c\norder_desc=biggest, most\n\n").unwrap();
        assert_eq!(lex.order_desc, vec!["biggest", "most"]);
        assert_eq!(lex.order_asc, TriggerLexicon::default().order_asc);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(matches!(TriggerLexicon::parse("x=y"), Err(GraphError::Parse { line: 1, .. })));
        assert!(TriggerLexicon::parse("no equals sign").is_err());
    }

    #[test]
    fn phrase_matching() {
        let toks: Vec<String> = "more than 5 and more".split(' ').map(String::from).collect();
        assert_eq!(phrase_positions(&toks, "more than"), vec![0]);
        assert_eq!(phrase_positions(&toks, "more"), vec![0, 4]);
        assert!(phrase_positions(&toks, "").is_empty());
    }
}
