use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::{KbError, Value};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: Value,
}

impl Triple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: Value) -> Self {
        Self { subject: subject.into(), relation: relation.into(), object }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Outgoing => Direction::Incoming,
            Direction::Incoming => Direction::Outgoing,
        }
    }
}

/// Relation ids with special meaning to the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbSchema {
    /// Relation whose objects are the types of its subjects.
    pub instance_of: String,
    /// Relation carrying a human-readable string label for an entity.
    pub label: String,
}

impl Default for KbSchema {
    fn default() -> Self {
        Self { instance_of: "instance_of".into(), label: "label".into() }
    }
}

type SpIndex = HashMap<String, BTreeMap<String, BTreeSet<Value>>>;
type OpIndex = HashMap<Value, BTreeMap<String, BTreeSet<String>>>;

/// Immutable in-memory triple store with subject- and object-side indexes.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    schema: KbSchema,
    triples: BTreeSet<Triple>,
    index_sp: SpIndex,
    index_op: OpIndex,
    type_index: HashMap<String, BTreeSet<String>>,
    values: BTreeSet<Value>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::from_triples(std::iter::empty(), KbSchema::default())
    }
}

impl KnowledgeBase {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>, schema: KbSchema) -> Self {
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        let (index_sp, index_op, type_index, values) = build_indexes(&triples, &schema);
        Self { schema, triples, index_sp, index_op, type_index, values }
    }

    /// Reads the tab-separated `subject<TAB>relation<TAB>object` format.
    pub fn load_triples(path: &Path, schema: KbSchema) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KbError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_triples(&text, schema)
    }

    pub fn parse_triples(text: &str, schema: KbSchema) -> Result<Self, KbError> {
        let mut triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let malformed = |message: String| KbError::Load { line: line_no, message };
            let [subject, relation, object] = fields.as_slice() else {
                return Err(malformed(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            if !super::value::valid_entity_id(subject) {
                return Err(malformed(format!("invalid subject `{subject}`")));
            }
            if relation.is_empty() || relation.chars().any(char::is_whitespace) {
                return Err(malformed(format!("invalid relation `{relation}`")));
            }
            let object = Value::parse(object).map_err(malformed)?;
            triples.push(Triple::new(*subject, *relation, object));
        }
        Ok(Self::from_triples(triples, schema))
    }

    pub fn schema(&self) -> &KbSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, subject: &str, relation: &str, object: &Value) -> bool {
        self.index_sp
            .get(subject)
            .and_then(|rels| rels.get(relation))
            .is_some_and(|objs| objs.contains(object))
    }

    /// Every subject and object in the store, sorted.
    pub fn values(&self) -> &BTreeSet<Value> {
        &self.values
    }

    pub fn relations(&self) -> BTreeSet<&str> {
        self.triples.iter().map(|t| t.relation.as_str()).collect()
    }

    pub fn objects(&self, subject: &str, relation: &str) -> Option<&BTreeSet<Value>> {
        self.index_sp.get(subject)?.get(relation)
    }

    pub fn subjects(&self, object: &Value, relation: &str) -> Option<&BTreeSet<String>> {
        self.index_op.get(object)?.get(relation)
    }

    pub fn has_type(&self, entity: &str, type_id: &str) -> bool {
        self.type_index.get(entity).is_some_and(|t| t.contains(type_id))
    }

    /// Every entity that occurs as the object of the type relation.
    pub fn types(&self) -> BTreeSet<&str> {
        self.type_index.values().flatten().map(String::as_str).collect()
    }

    /// Label literal for an entity, falling back to the id itself.
    pub fn label_of(&self, entity: &str) -> String {
        self.objects(entity, &self.schema.label)
            .and_then(|objs| {
                objs.iter().find_map(|v| match v {
                    Value::Str(s) => Some(s.clone()),
                    _ => None,
                })
            })
            .unwrap_or_else(|| entity.to_string())
    }

    /// `(relation, value)` pairs adjacent to `node`, sorted by relation then value.
    /// For incoming edges the value is the subject.
    pub fn neighbors(&self, node: &Value, direction: Direction) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        match direction {
            Direction::Outgoing => {
                if let Some(rels) = node.as_entity().and_then(|id| self.index_sp.get(id)) {
                    for (rel, objs) in rels {
                        out.extend(objs.iter().map(|o| (rel.clone(), o.clone())));
                    }
                }
            }
            Direction::Incoming => {
                if let Some(rels) = self.index_op.get(node) {
                    for (rel, subs) in rels {
                        out.extend(subs.iter().map(|s| (rel.clone(), Value::Entity(s.clone()))));
                    }
                }
            }
        }
        out
    }

    /// Distinct relations adjacent to `node` in `direction`, sorted.
    pub fn relations_at(&self, node: &Value, direction: Direction) -> Vec<&str> {
        match direction {
            Direction::Outgoing => node
                .as_entity()
                .and_then(|id| self.index_sp.get(id))
                .map(|rels| rels.keys().map(String::as_str).collect())
                .unwrap_or_default(),
            Direction::Incoming => self
                .index_op
                .get(node)
                .map(|rels| rels.keys().map(String::as_str).collect())
                .unwrap_or_default(),
        }
    }

    /// Rebuilds every index from the triple set and compares with the live ones.
    pub fn indexes_consistent(&self) -> bool {
        let (sp, op, ty, values) = build_indexes(&self.triples, &self.schema);
        sp == self.index_sp && op == self.index_op && ty == self.type_index && values == self.values
    }
}

fn build_indexes(
    triples: &BTreeSet<Triple>,
    schema: &KbSchema,
) -> (SpIndex, OpIndex, HashMap<String, BTreeSet<String>>, BTreeSet<Value>) {
    let mut sp: SpIndex = HashMap::new();
    let mut op: OpIndex = HashMap::new();
    let mut types: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut values = BTreeSet::new();
    for t in triples {
        sp.entry(t.subject.clone())
            .or_default()
            .entry(t.relation.clone())
            .or_default()
            .insert(t.object.clone());
        op.entry(t.object.clone())
            .or_default()
            .entry(t.relation.clone())
            .or_default()
            .insert(t.subject.clone());
        if t.relation == schema.instance_of {
            if let Value::Entity(ty) = &t.object {
                types.entry(t.subject.clone()).or_default().insert(ty.clone());
            }
        }
        values.insert(Value::Entity(t.subject.clone()));
        values.insert(t.object.clone());
    }
    (sp, op, types, values)
}
