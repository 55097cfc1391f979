//! Question records.
//!
//! One record per line, tab-separated `key=value` fields:
//!
//! ```text
//! id=q1  text=who is the leader of france  tokens=who;is;the;leader;of;france
//! dep=2:nsubj;0:root;4:det;2:attr;4:prep;5:pobj  entities=5-6:france  answers=macron
//! gold=(?q)-[leader]->(france) ; ...
//! ```
//!
//! List fields are `;`-separated. `dep` pairs each token with its 1-based
//! head (`0` marks the root) and a dependency label. Entity spans are
//! 0-based half-open token ranges. `answers` use the triple-file literal
//! grammar. `gold` is optional. Blank lines and `#` lines are skipped.

use std::collections::BTreeSet;
use std::path::Path;

use crate::kb::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepArc {
    /// 1-based head token, 0 for the root.
    pub head: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkedEntity {
    pub start: usize,
    pub end: usize,
    pub kb_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub dep: Vec<DepArc>,
    pub entities: Vec<LinkedEntity>,
    pub answers: BTreeSet<Value>,
    pub gold_logical_form: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| DatasetError::Line { line: i + 1, message };
        let record = DatasetRecord::parse_line(line).map_err(err)?;
        if !ids.insert(record.id.clone()) {
            return Err(err(format!("duplicate record id `{}`", record.id)));
        }
        out.push(record);
    }
    Ok(out)
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').filter(|x| !x.is_empty())
}

impl DatasetRecord {
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let mut fields = std::collections::BTreeMap::new();
        for part in line.split('\t') {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("field `{part}` is not key=value"))?;
            if fields.insert(k, v).is_some() {
                return Err(format!("field `{k}` given twice"));
            }
        }
        let mut take = |k: &str| fields.remove(k).ok_or_else(|| format!("missing field `{k}`"));
        let id = take("id")?.to_string();
        let text = take("text")?.to_string();
        let tokens: Vec<String> = list(take("tokens")?).map(str::to_string).collect();
        let dep = list(take("dep")?)
            .map(|d| {
                let (h, label) = d.split_once(':').ok_or_else(|| format!("dep entry `{d}` is not head:label"))?;
                let head = h.parse().map_err(|_| format!("bad head `{h}`"))?;
                Ok(DepArc { head, label: label.to_string() })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let entities = list(take("entities")?)
            .map(|e| {
                let (span, kb_id) = e.split_once(':').ok_or_else(|| format!("entity `{e}` is not start-end:id"))?;
                let (s, t) = span.split_once('-').ok_or_else(|| format!("bad span `{span}`"))?;
                Ok(LinkedEntity {
                    start: s.parse().map_err(|_| format!("bad span start `{s}`"))?,
                    end: t.parse().map_err(|_| format!("bad span end `{t}`"))?,
                    kb_id: kb_id.to_string(),
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let answers = list(take("answers")?).map(Value::parse).collect::<Result<BTreeSet<_>, String>>()?;
        let gold_logical_form = fields.remove("gold").map(str::to_string);
        if let Some(k) = fields.keys().next() {
            return Err(format!("unknown field `{k}`"));
        }
        let record = Self { id, text, tokens, dep, entities, answers, gold_logical_form };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if n == 0 {
            return Err("record has no tokens".into());
        }
        if self.dep.len() != n {
            return Err(format!("dep has {} entries for {n} tokens", self.dep.len()));
        }
        let roots = self.dep.iter().filter(|d| d.head == 0).count();
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        if let Some(d) = self.dep.iter().find(|d| d.head > n) {
            return Err(format!("head {} out of range", d.head));
        }
        for start in 0..n {
            let mut at = start;
            let mut steps = 0;
            while self.dep[at].head != 0 {
                at = self.dep[at].head - 1;
                steps += 1;
                if steps > n {
                    return Err(format!("cyclic head chain from token {}", start + 1));
                }
            }
        }
        for e in &self.entities {
            if e.start >= e.end || e.end > n {
                return Err(format!("entity span {}-{} out of bounds", e.start, e.end));
            }
            if !crate::kb::valid_entity_id(&e.kb_id) {
                return Err(format!("invalid entity id `{}`", e.kb_id));
            }
        }
        Ok(())
    }

    /// Whether token `i` falls inside any linked-entity span.
    pub fn in_entity_span(&self, i: usize) -> bool {
        self.entities.iter().any(|e| (e.start..e.end).contains(&i))
    }

    pub fn lowercase_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_lowercase()).collect()
    }

    pub fn to_line(&self) -> String {
        let join = |xs: Vec<String>| xs.join(";");
        let mut fields = vec![
            format!("id={}", self.id),
            format!("text={}", self.text),
            format!("tokens={}", self.tokens.join(";")),
            format!("dep={}", join(self.dep.iter().map(|d| format!("{}:{}", d.head, d.label)).collect())),
            format!(
                "entities={}",
                join(self.entities.iter().map(|e| format!("{}-{}:{}", e.start, e.end, e.kb_id)).collect())
            ),
            format!("answers={}", join(self.answers.iter().map(Value::to_string).collect())),
        ];
        if let Some(g) = &self.gold_logical_form {
            fields.push(format!("gold={g}"));
        }
        fields.join("\t")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "id=q\ttext=obama\ttokens=obama\tdep=0:root\tentities=0-1:Q1\tanswers=Q1";

    #[test]
    fn minimal_record_parses_and_round_trips() {
        let rs = parse_dataset(MINIMAL).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].to_line(), MINIMAL);
    }

    #[test]
    fn dep_length_mismatch_reports_line() {
        let text = format!("# header\n{MINIMAL}\nid=r\ttext=a b\ttokens=a;b\tdep=0:root\tentities=\tanswers=");
        let err = parse_dataset(&text).unwrap_err();
        assert!(matches!(err, DatasetError::Line { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(parse_dataset("").unwrap().is_empty());
    }

    #[test]
    fn structural_checks() {
        let base = "id=r\ttext=a b\ttokens=a;b\tentities=\tanswers=";
        assert!(DatasetRecord::parse_line(&format!("{base}\tdep=2:x;1:y")).unwrap_err().contains("root"));
        assert!(DatasetRecord::parse_line(&format!("{base}\tdep=0:root;0:root")).is_err());
        assert!(DatasetRecord::parse_line(&format!("{base}\tdep=0:root;3:x")).is_err());
        let cyc = "id=r\ttext=a b c\ttokens=a;b;c\tentities=\tanswers=\tdep=0:root;3:x;2:y";
        assert!(DatasetRecord::parse_line(cyc).unwrap_err().contains("cyclic"));
        let span = "id=r\ttext=a\ttokens=a\tdep=0:root\tentities=0-2:E\tanswers=";
        assert!(DatasetRecord::parse_line(span).is_err());
    }
}
