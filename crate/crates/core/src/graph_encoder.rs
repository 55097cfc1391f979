//! Query-graph encoding: the relation-attention RGCN over the graph (read out
//! at the answer node), the relation-level plus sense-attended word-level
//! relation path, their fusion, and cosine scoring against the question.

use std::collections::BTreeSet;

use crate::kb::KnowledgeBase;
use crate::lexicon::{tokenize_relation_label, Sense};
use crate::model::{names, sum_all, weighted_sum, Model, ModelError, RelationTyping};
use crate::numerics::{NumericsError, Tape, Tensor, Var};
use crate::query_graph::{Node, QueryGraph};

#[derive(Debug, Clone)]
pub struct StructureEncoding {
    pub h_structure: Var,
    pub states: Vec<Var>,
    /// Softmax over edges; `None` for an edgeless graph.
    pub edge_attention: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct RelationalEncoding {
    /// Distinct relations in sorted order, one per row.
    pub relations: Vec<String>,
    pub r_whole: Option<Var>,
    pub r_fine: Option<Var>,
    pub h_relational: Var,
}

#[derive(Debug, Clone)]
pub struct GraphEncoding {
    pub h_whole: Var,
    pub structure: StructureEncoding,
    pub relational: RelationalEncoding,
}

/// Entities start from the mean of their label-word vectors; answer and
/// variable nodes from their own learned vectors.
pub fn node_init(tape: &mut Tape<'_>, model: &Model, kb: &KnowledgeBase, g: &QueryGraph) -> Result<Vec<Var>, ModelError> {
    g.nodes
        .iter()
        .map(|n| match n {
            Node::Answer => Ok(tape.param(names::G_INIT_ANSWER)?),
            Node::Variable => Ok(tape.param(names::G_INIT_VARIABLE)?),
            Node::Entity(id) => {
                let label = kb.label_of(id);
                model.mean_words(tape, &tokenize_relation_label(&label), &label)
            }
        })
        .collect()
}

/// Softmax over edges of `E_avg · r_e`.
pub fn relation_attention(
    tape: &mut Tape<'_>,
    model: &Model,
    e_avg: Var,
    g: &QueryGraph,
) -> Result<Option<Var>, ModelError> {
    if g.edges.is_empty() {
        return Ok(None);
    }
    let logits = g
        .edges
        .iter()
        .map(|e| {
            let r = model.relation_row(tape, &e.relation)?;
            Ok(tape.dot(e_avg, r)?)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let s = tape.stack(&logits)?;
    Ok(Some(tape.softmax(s)?))
}

fn rel_key<'a>(model: &Model, relation: &'a str) -> Option<&'a str> {
    match model.config.relation_typing {
        RelationTyping::Untyped => None,
        RelationTyping::Typed if model.relations.contains(relation) => Some(relation),
        RelationTyping::Typed => Some(names::UNK),
    }
}

/// `h'_i = ReLU(Σ_{e: src→i} a_e W_rel(e) h_src + W_0 h_i)` for `graph_layers`
/// layers; the answer node's final state is the readout.
pub fn structure_forward(
    tape: &mut Tape<'_>,
    model: &Model,
    g: &QueryGraph,
    init: &[Var],
    attention: Option<Var>,
) -> Result<StructureEncoding, ModelError> {
    let answer = g.answer().ok_or_else(|| ModelError::Data("graph has no answer node".into()))?;
    let coeffs: Vec<Option<Var>> = match (attention, model.config.structure_attention) {
        (Some(a), true) => (0..g.edges.len()).map(|i| tape.index(a, i).map(Some)).collect::<Result<_, _>>()?,
        _ => vec![None; g.edges.len()],
    };
    let mut h = init.to_vec();
    for l in 0..model.config.graph_layers {
        let w0 = tape.param(&names::g_self(l))?;
        let mut next = Vec::with_capacity(h.len());
        for i in 0..h.len() {
            let mut terms = vec![tape.matvec(w0, h[i])?];
            for (k, e) in g.edges.iter().enumerate() {
                let mut pairs = Vec::new();
                if e.dst == i {
                    pairs.push((names::g_rel(l, rel_key(model, &e.relation)), e.src));
                }
                if model.config.inverse_messages && e.src == i {
                    pairs.push((names::g_inv(l, rel_key(model, &e.relation)), e.dst));
                }
                for (w_name, from) in pairs {
                    let w = tape.param(&w_name)?;
                    let msg = tape.matvec(w, h[from])?;
                    terms.push(match coeffs[k] {
                        Some(a) => tape.scale(msg, a)?,
                        None => msg,
                    });
                }
            }
            let pre = sum_all(tape, &terms)?;
            next.push(tape.relu(pre));
        }
        h = next;
    }
    Ok(StructureEncoding { h_structure: h[answer], states: h, edge_attention: attention })
}

/// Distinct relations of `g`, sorted.
pub fn graph_relations(g: &QueryGraph) -> Vec<String> {
    g.edges.iter().map(|e| e.relation.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// One relation-level row per distinct relation, in sorted order.
pub fn relation_level_embed(tape: &mut Tape<'_>, model: &Model, relations: &[String]) -> Result<Option<Var>, ModelError> {
    if relations.is_empty() {
        return Ok(None);
    }
    let rows = relations.iter().map(|r| model.relation_row(tape, r)).collect::<Result<Vec<_>, _>>()?;
    Ok(Some(tape.stack(&rows)?))
}

/// Lemma vectors weighted by `softmax(tanh(E_avg · lemma))`.
pub fn wordnet_sense_vector(tape: &mut Tape<'_>, model: &Model, sense: &Sense, e_avg: Var) -> Result<Var, ModelError> {
    if sense.lemmas.is_empty() {
        return Err(ModelError::Data(format!("sense `{}` has no lemmas", sense.sense_id)));
    }
    let lemmas = sense
        .lemmas
        .iter()
        .map(|l| model.mean_words(tape, &tokenize_relation_label(l), l))
        .collect::<Result<Vec<_>, _>>()?;
    let logits = lemmas
        .iter()
        .map(|&v| {
            let d = tape.dot(e_avg, v)?;
            Ok(tape.tanh(d))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let s = tape.stack(&logits)?;
    let a = tape.softmax(s)?;
    weighted_sum(tape, a, &lemmas)
}

/// Sense vectors weighted by `softmax(W · tanh(E_avg · sense) + b)` with
/// scalar `W` and `b`; the raw word row when the sense path is disabled.
pub fn wordnet_word_vector(tape: &mut Tape<'_>, model: &Model, word: &str, e_avg: Var) -> Result<Var, ModelError> {
    if !model.config.wordnet {
        return model.word(tape, word);
    }
    let senses = model.lexicon.senses_of(word);
    let vecs = senses.iter().map(|s| wordnet_sense_vector(tape, model, s, e_avg)).collect::<Result<Vec<_>, _>>()?;
    let w = tape.param(names::WN_W)?;
    let b = tape.param(names::WN_B)?;
    let logits = vecs
        .iter()
        .map(|&v| {
            let d = tape.dot(e_avg, v)?;
            let t = tape.tanh(d);
            let wt = tape.scale(t, w)?;
            Ok(tape.add(wt, b)?)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let s = tape.stack(&logits)?;
    let a = tape.softmax(s)?;
    weighted_sum(tape, a, &vecs)
}

/// Row `i` is the mean word vector of relation `i`'s label plus its relation-level row.
pub fn fine_grained(
    tape: &mut Tape<'_>,
    model: &Model,
    relations: &[String],
    r_whole: Var,
    e_avg: Var,
) -> Result<Var, ModelError> {
    if !model.config.fine_grained {
        return Ok(r_whole);
    }
    let mut rows = Vec::with_capacity(relations.len());
    for (i, rel) in relations.iter().enumerate() {
        let words = tokenize_relation_label(model.relations.label_of(rel));
        if words.is_empty() {
            return Err(ModelError::Data(format!("relation `{rel}` has no label words")));
        }
        let vecs = words.iter().map(|w| wordnet_word_vector(tape, model, w, e_avg)).collect::<Result<Vec<_>, _>>()?;
        let mean = if vecs.len() == 1 {
            vecs[0]
        } else {
            let m = tape.stack(&vecs)?;
            tape.mean_rows(m)?
        };
        let whole = tape.row(r_whole, i)?;
        rows.push(tape.add(mean, whole)?);
    }
    Ok(tape.stack(&rows)?)
}

/// Column-wise max, or zeros for an edgeless graph.
pub fn relational_pool(tape: &mut Tape<'_>, model: &Model, r_fine: Option<Var>) -> Result<Var, ModelError> {
    Ok(match r_fine {
        Some(r) => tape.max_pool_rows(r)?,
        None => tape.constant(Tensor::zeros(vec![model.config.dim])),
    })
}

pub fn encode_relational(tape: &mut Tape<'_>, model: &Model, g: &QueryGraph, e_avg: Var) -> Result<RelationalEncoding, ModelError> {
    let relations = graph_relations(g);
    let r_whole = relation_level_embed(tape, model, &relations)?;
    let r_fine = match r_whole {
        Some(w) => Some(fine_grained(tape, model, &relations, w, e_avg)?),
        None => None,
    };
    let h_relational = relational_pool(tape, model, r_fine)?;
    Ok(RelationalEncoding { relations, r_whole, r_fine, h_relational })
}

/// `ReLU(W (h_rel + h_struct) + b)`.
pub fn fuse(tape: &mut Tape<'_>, h_relational: Var, h_structure: Var) -> Result<Var, ModelError> {
    let w = tape.param(names::FUSE_W)?;
    let b = tape.param(names::FUSE_B)?;
    let s = tape.add(h_relational, h_structure)?;
    let ws = tape.matvec(w, s)?;
    let pre = tape.add(ws, b)?;
    Ok(tape.relu(pre))
}

pub fn encode_graph(
    tape: &mut Tape<'_>,
    model: &Model,
    kb: &KnowledgeBase,
    g: &QueryGraph,
    e_avg: Var,
) -> Result<GraphEncoding, ModelError> {
    let init = node_init(tape, model, kb, g)?;
    let attention = relation_attention(tape, model, e_avg, g)?;
    let structure = structure_forward(tape, model, g, &init, attention)?;
    let relational = encode_relational(tape, model, g, e_avg)?;
    let h_whole = fuse(tape, relational.h_relational, structure.h_structure)?;
    Ok(GraphEncoding { h_whole, structure, relational })
}

/// Cosine of the question and graph vectors; a zero vector on either side is degenerate.
pub fn score(tape: &mut Tape<'_>, h_q: Var, h_whole: Var) -> Result<Var, ModelError> {
    tape.cosine(h_q, h_whole).map_err(|e| match e {
        NumericsError::ZeroVector(_) => ModelError::Degenerate,
        other => ModelError::Numerics(other),
    })
}
