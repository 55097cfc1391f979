//! Sense lexicon file format:
//!
//! ```text
//! subject: topic = topic, theme, subject
//! subject: citizen = national, subject
//!
//! held: hold = hold, keep
//! ```
//!
//! One sense per line; the lines of one word form a block and blocks are
//! separated by blank lines. `#` lines are comments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LexiconError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sense {
    pub sense_id: String,
    pub lemmas: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseLexicon {
    words: BTreeMap<String, Vec<Sense>>,
}

impl SenseLexicon {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Senses of `word`; an unlisted word gets one sense whose only lemma is the word.
    pub fn senses_of(&self, word: &str) -> Vec<Sense> {
        match self.words.get(&word.to_lowercase()) {
            Some(s) => s.clone(),
            None => vec![Sense { sense_id: word.to_lowercase(), lemmas: vec![word.to_lowercase()] }],
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(&word.to_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Sense])> {
        self.words.iter().map(|(w, s)| (w.as_str(), s.as_slice()))
    }
}

pub fn load_lexicon(path: &Path) -> Result<SenseLexicon, LexiconError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LexiconError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_lexicon(&text)
}

pub fn parse_lexicon(text: &str) -> Result<SenseLexicon, LexiconError> {
    let mut words: BTreeMap<String, Vec<Sense>> = BTreeMap::new();
    let mut block: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| LexiconError::Load { file: "lexicon", line: i + 1, message };
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            block = None;
            continue;
        }
        let (word, rest) = line.split_once(':').ok_or_else(|| err("expected `word: sense = lemmas`".into()))?;
        let (sense_id, lemmas) = rest.split_once('=').ok_or_else(|| err("expected `=` after the sense id".into()))?;
        let word = word.trim().to_lowercase();
        let sense_id = sense_id.trim().to_string();
        let lemmas: Vec<String> =
            lemmas.split(',').map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()).collect();
        if word.is_empty() || sense_id.is_empty() {
            return Err(err("empty word or sense id".into()));
        }
        if lemmas.is_empty() {
            return Err(err(format!("sense `{sense_id}` has no lemmas")));
        }
        match &block {
            Some(current) if *current == word => {}
            Some(current) => {
                return Err(err(format!("word `{word}` inside the block of `{current}`; separate blocks by a blank line")))
            }
            None => {
                if words.contains_key(&word) {
                    return Err(err(format!("duplicate record for word `{word}`")));
                }
                block = Some(word.clone());
            }
        }
        let senses = words.entry(word).or_default();
        if senses.iter().any(|s| s.sense_id == sense_id) {
            return Err(err(format!("duplicate sense `{sense_id}`")));
        }
        senses.push(Sense { sense_id, lemmas });
    }
    Ok(SenseLexicon { words })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUBJECT: &str = "subject: topic = topic, theme, subject\nsubject: citizen = national, subject\n";

    #[test]
    fn two_senses() {
        let lex = parse_lexicon(SUBJECT).unwrap();
        let s = lex.senses_of("subject");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].lemmas.len(), 3);
        assert_eq!(s[1].lemmas.len(), 2);
    }

    #[test]
    fn fallback_sense() {
        let lex = parse_lexicon(SUBJECT).unwrap();
        let s = lex.senses_of("absent");
        assert_eq!(s, vec![Sense { sense_id: "absent".into(), lemmas: vec!["absent".into()] }]);
    }

    #[test]
    fn duplicate_word_rejected() {
        let text = format!("{SUBJECT}\nsubject: other = x\n");
        let err = parse_lexicon(&text).unwrap_err();
        assert!(matches!(err, LexiconError::Load { line: 4, .. }), "{err}");
    }

    #[test]
    fn malformed_line_rejected() {
        assert!(matches!(parse_lexicon("held hold keep"), Err(LexiconError::Load { line: 1, .. })));
        assert!(parse_lexicon("held: hold =").is_err());
    }
}
