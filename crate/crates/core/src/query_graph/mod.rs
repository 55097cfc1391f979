//! Query graphs: the answer/variable/entity node model, constraints,
//! validation, canonical logical forms, and heuristic candidate generation.

mod generate;
mod logical_form;
mod triggers;

use std::fmt;

use chrono::{Datelike, NaiveDate};

pub use generate::{generate_candidates, GenLimits};
pub use logical_form::{canonicalize, parse_logical_form, to_inline_logical_form, to_logical_form, INLINE_SEPARATOR};
pub use triggers::TriggerLexicon;

use crate::kb::valid_entity_id;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Answer,
    Variable,
    Entity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub relation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            "=" => Comparator::Eq,
            ">=" => Comparator::Ge,
            ">" => Comparator::Gt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrderDirection {
    Ascending,
    Descending,
}

/// A time point for temporal constraints. Inexplicit times carry only a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePoint {
    Date(NaiveDate),
    Year(i32),
}

impl TimePoint {
    pub fn is_explicit(self) -> bool {
        matches!(self, TimePoint::Date(_))
    }

    /// Compares a date binding against this point; years compare by year only.
    pub fn matches(self, cmp: Comparator, value: NaiveDate) -> bool {
        match self {
            TimePoint::Date(d) => cmp.holds(value, d),
            TimePoint::Year(y) => cmp.holds(value.year(), y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// The target's binding is exactly this entity.
    Entity { target: usize, id: String },
    /// The target's binding is an instance of this type.
    Type { target: usize, type_id: String },
    Temporal { target: usize, cmp: Comparator, time: TimePoint },
    /// Keeps the bindings holding the `rank`-th distinct property value.
    Order { target: usize, direction: OrderDirection, rank: usize, property: String },
    Compare { target: usize, cmp: Comparator, value: f64, property: String },
}

impl Constraint {
    pub fn target(&self) -> usize {
        match self {
            Constraint::Entity { target, .. }
            | Constraint::Type { target, .. }
            | Constraint::Temporal { target, .. }
            | Constraint::Order { target, .. }
            | Constraint::Compare { target, .. } => *target,
        }
    }
}

/// Directed labeled graph with exactly one answer node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub constraints: Vec<Constraint>,
}

impl QueryGraph {
    /// A graph holding only the answer node (index 0).
    pub fn answer_only() -> Self {
        Self { nodes: vec![Node::Answer], edges: vec![], constraints: vec![] }
    }

    pub fn add_node(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, src: usize, relation: impl Into<String>, dst: usize) {
        self.edges.push(Edge { src, dst, relation: relation.into() });
    }

    pub fn answer(&self) -> Option<usize> {
        self.nodes.iter().position(|n| *n == Node::Answer)
    }

    pub fn entity_node(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| matches!(n, Node::Entity(e) if e == id))
    }

    pub fn variable_count(&self) -> usize {
        self.nodes.iter().filter(|n| !matches!(n, Node::Entity(_))).count()
    }

    /// Checks every structural invariant and lists all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let answers = self.nodes.iter().filter(|n| **n == Node::Answer).count();
        match answers {
            0 => out.push(Violation::NoAnswerNode),
            1 => {}
            n => out.push(Violation::MultipleAnswerNodes(n)),
        }
        let n = self.nodes.len();
        let mut seen_entities = std::collections::BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Entity(id) = node {
                if !valid_entity_id(id) || id.starts_with('?') {
                    out.push(Violation::InvalidEntityId(i, id.clone()));
                }
                if !seen_entities.insert(id.as_str()) {
                    out.push(Violation::DuplicateEntity(id.clone()));
                }
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                out.push(Violation::DanglingEdge(i));
            }
            if e.relation.is_empty() || e.relation.chars().any(char::is_whitespace) {
                out.push(Violation::InvalidRelation(i, e.relation.clone()));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.target() >= n {
                out.push(Violation::BadConstraint(i, "target node does not exist".into()));
            }
            match c {
                Constraint::Order { rank: 0, .. } => {
                    out.push(Violation::BadConstraint(i, "order rank must be at least 1".into()))
                }
                Constraint::Temporal { cmp: Comparator::Lt | Comparator::Gt, .. } => out.push(
                    Violation::BadConstraint(i, "temporal comparator must be =, <= or >=".into()),
                ),
                Constraint::Compare { value, .. } if !value.is_finite() => {
                    out.push(Violation::BadConstraint(i, "compare operand must be finite".into()))
                }
                _ => {}
            }
        }
        if n > 0 && !self.is_connected() {
            out.push(Violation::Disconnected);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for e in &self.edges {
                if e.src >= n || e.dst >= n {
                    continue;
                }
                for (a, b) in [(e.src, e.dst), (e.dst, e.src)] {
                    if a == u && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoAnswerNode,
    MultipleAnswerNodes(usize),
    DanglingEdge(usize),
    InvalidRelation(usize, String),
    InvalidEntityId(usize, String),
    DuplicateEntity(String),
    BadConstraint(usize, String),
    Disconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoAnswerNode => write!(f, "no answer node"),
            Violation::MultipleAnswerNodes(n) => write!(f, "multiple answer nodes ({n})"),
            Violation::DanglingEdge(i) => write!(f, "edge {i} references an undeclared node"),
            Violation::InvalidRelation(i, r) => write!(f, "edge {i} has invalid relation `{r}`"),
            Violation::InvalidEntityId(i, id) => write!(f, "node {i} has invalid entity id `{id}`"),
            Violation::DuplicateEntity(id) => write!(f, "entity `{id}` appears on more than one node"),
            Violation::BadConstraint(i, why) => write!(f, "constraint {i}: {why}"),
            Violation::Disconnected => write!(f, "graph is disconnected"),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid query graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("logical form line {line}: {message}")]
    Parse { line: usize, message: String },
}
