//! In-memory triple store and query-graph execution.

mod exec;
mod store;
mod value;

pub use exec::{
    bindings_of, brute_force_execute, execute, homomorphisms, BRUTE_FORCE_MAX_VALUES, BRUTE_FORCE_MAX_VARIABLES,
};
pub use store::{Direction, KbSchema, KnowledgeBase, Triple};
pub use value::{valid_entity_id, Value};

use crate::query_graph::Violation;

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("triple file line {line}: {message}")]
    Load { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid query graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Violation>),
    #[error("brute-force guard exceeded ({variables} variables, {values} values)")]
    GuardExceeded { variables: usize, values: usize },
}
