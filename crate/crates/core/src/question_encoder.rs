//! Question encoding: dependency-graph RGCN, token attention and the
//! final projection to `h_q`.

use crate::dataset::DatasetRecord;
use crate::model::{names, sum_all, weighted_sum, DependencyEdges, Model, ModelError};
use crate::numerics::{Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeClass {
    SelfLoop,
    HeadToDependent,
    Label(String),
}

/// A directed message edge; the dependent receives from the head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepEdge {
    pub head: usize,
    pub dependent: usize,
    pub class: EdgeClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub tokens: Vec<String>,
    pub edges: Vec<DepEdge>,
}

impl DependencyGraph {
    /// Same tokens in a new order: token `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut tokens = vec![String::new(); self.tokens.len()];
        for (i, t) in self.tokens.iter().enumerate() {
            tokens[perm[i]] = t.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| DepEdge { head: perm[e.head], dependent: perm[e.dependent], class: e.class.clone() })
            .collect();
        Self { tokens, edges }
    }
}

/// One self-loop per token and one head-to-dependent edge per non-root token
/// (classed by dependency label in labeled mode). Heads are validated by the record.
pub fn build_dependency_graph(record: &DatasetRecord, mode: DependencyEdges) -> Result<DependencyGraph, ModelError> {
    record.validate().map_err(ModelError::Data)?;
    let n = record.tokens.len();
    let mut edges: Vec<DepEdge> =
        (0..n).map(|i| DepEdge { head: i, dependent: i, class: EdgeClass::SelfLoop }).collect();
    for (i, d) in record.dep.iter().enumerate() {
        if d.head == 0 {
            continue;
        }
        let class = match mode {
            DependencyEdges::TwoClass => EdgeClass::HeadToDependent,
            DependencyEdges::Labeled => EdgeClass::Label(d.label.clone()),
        };
        edges.push(DepEdge { head: d.head - 1, dependent: i, class });
    }
    Ok(DependencyGraph { tokens: record.tokens.clone(), edges })
}

#[derive(Debug, Clone)]
pub struct QuestionEncoding {
    pub h_q: Var,
    pub e_avg: Var,
    pub h0: Vec<Var>,
    pub h_last: Vec<Var>,
    pub attention: Var,
}

fn class_param(model: &Model, l: usize, class: &EdgeClass) -> String {
    match class {
        EdgeClass::SelfLoop => names::q_loop(l),
        EdgeClass::HeadToDependent => names::q_head_dep(l),
        EdgeClass::Label(lbl) if model.dep_labels.binary_search(lbl).is_ok() => names::q_label(l, lbl),
        EdgeClass::Label(_) => names::q_label(l, names::UNK),
    }
}

/// `h' = ReLU(Σ_r W_r · mean_{j ∈ N^r(i)} h_j + W_0 h_i)` per layer, dropout after each.
pub fn question_rgcn(
    tape: &mut Tape<'_>,
    model: &Model,
    dep: &DependencyGraph,
    h0: &[Var],
) -> Result<Vec<Var>, ModelError> {
    let mut h = h0.to_vec();
    for l in 0..model.config.question_layers {
        let w0 = tape.param(&names::q_self(l))?;
        let mut next = Vec::with_capacity(h.len());
        for i in 0..h.len() {
            let mut terms = vec![tape.matvec(w0, h[i])?];
            let mut classes: Vec<&EdgeClass> =
                dep.edges.iter().filter(|e| e.dependent == i).map(|e| &e.class).collect();
            classes.sort();
            classes.dedup();
            for class in classes {
                let srcs: Vec<Var> =
                    dep.edges.iter().filter(|e| e.dependent == i && &e.class == class).map(|e| h[e.head]).collect();
                let msg = if srcs.len() == 1 {
                    srcs[0]
                } else {
                    let m = tape.stack(&srcs)?;
                    tape.mean_rows(m)?
                };
                let w = tape.param(&class_param(model, l, class))?;
                terms.push(tape.matvec(w, msg)?);
            }
            let pre = sum_all(tape, &terms)?;
            let act = tape.relu(pre);
            next.push(tape.dropout(act, model.config.dropout)?);
        }
        h = next;
    }
    Ok(h)
}

/// Softmax over tokens of `E_avgᵀ M c_i`.
pub fn token_attention(tape: &mut Tape<'_>, e_avg: Var, features: &[Var], m: Var) -> Result<Var, ModelError> {
    let logits = features
        .iter()
        .map(|&c| {
            let mc = tape.matvec(m, c)?;
            Ok(tape.dot(e_avg, mc)?)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let stacked = tape.stack(&logits)?;
    Ok(tape.softmax(stacked)?)
}

pub fn encode_question(tape: &mut Tape<'_>, model: &Model, record: &DatasetRecord) -> Result<QuestionEncoding, ModelError> {
    let dep = build_dependency_graph(record, model.config.dependency_edges)?;
    encode_dependency_graph(tape, model, &dep)
}

pub fn encode_dependency_graph(
    tape: &mut Tape<'_>,
    model: &Model,
    dep: &DependencyGraph,
) -> Result<QuestionEncoding, ModelError> {
    if dep.tokens.is_empty() {
        return Err(ModelError::Data("question has no tokens".into()));
    }
    let h0 = dep.tokens.iter().map(|t| model.word(tape, t)).collect::<Result<Vec<_>, _>>()?;
    let e_avg = {
        let m = tape.stack(&h0)?;
        tape.mean_rows(m)?
    };
    let h_last = question_rgcn(tape, model, dep, &h0)?;
    let features = if model.config.concat_sequence {
        h0.iter().zip(&h_last).map(|(&a, &b)| tape.concat(&[a, b])).collect::<Result<Vec<_>, _>>()?
    } else {
        h_last.clone()
    };
    let m = tape.param(names::Q_ATT)?;
    let attention = token_attention(tape, e_avg, &features, m)?;
    let pooled = weighted_sum(tape, attention, &features)?;
    let w = tape.param(names::Q_FC_W)?;
    let b = tape.param(names::Q_FC_B)?;
    let wx = tape.matvec(w, pooled)?;
    let pre = tape.add(wx, b)?;
    let act = tape.relu(pre);
    let h_q = tape.dropout(act, model.config.dropout)?;
    Ok(QuestionEncoding { h_q, e_avg, h0, h_last, attention })
}
