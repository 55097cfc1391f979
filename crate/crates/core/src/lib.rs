//! Query-graph ranking for knowledge-base question answering.

pub mod dataset;
pub mod graph_encoder;
pub mod harness;
pub mod kb;
pub mod lexicon;
pub mod model;
pub mod numerics;
pub mod query_graph;
pub mod question_encoder;
pub mod trainer;
