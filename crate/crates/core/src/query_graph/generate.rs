//! Staged candidate generation.
//!
//! 1. one hop from every linked entity, both directions, relations in sorted order;
//! 2. (two-hop limit) a chain through an intermediate variable, or a dangling
//!    variable hung off the answer node when it changes the answer set;
//! 3. any other linked entity attached to a non-entity node it connects to;
//! 4. type, temporal, order and compare constraints fired by question tokens.
//!
//! Output is deduplicated by canonical logical form and truncated to the cap.

use std::collections::{BTreeSet, HashSet};

use super::triggers::phrase_positions;
use super::{canonicalize, Comparator, Constraint, Node, OrderDirection, QueryGraph, TimePoint, TriggerLexicon};
use crate::dataset::DatasetRecord;
use crate::kb::{bindings_of, Direction, KnowledgeBase, Value};
use crate::lexicon::tokenize_relation_label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GenLimits {
    /// 1 or 2.
    pub max_hops: usize,
    pub max_candidates: usize,
    /// Cap on relation fan-out explored from any one node.
    pub max_branch: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        Self { max_hops: 2, max_candidates: 200, max_branch: 20 }
    }
}

impl GenLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=2).contains(&self.max_hops) {
            return Err(format!("max_hops must be 1 or 2, got {}", self.max_hops));
        }
        if self.max_candidates == 0 || self.max_branch == 0 {
            return Err("max_candidates and max_branch must be positive".into());
        }
        Ok(())
    }
}

pub fn generate_candidates(
    record: &DatasetRecord,
    kb: &KnowledgeBase,
    limits: &GenLimits,
    triggers: &TriggerLexicon,
) -> Vec<QueryGraph> {
    let mut seeds: Vec<&str> = Vec::new();
    for e in &record.entities {
        if !seeds.contains(&e.kb_id.as_str()) {
            seeds.push(&e.kb_id);
        }
    }
    let mut graphs = Vec::new();
    for &e in &seeds {
        for (rel, dir) in incident(kb, &[Value::entity(e)], limits.max_branch) {
            let mut one = QueryGraph::answer_only();
            let en = one.add_node(Node::Entity(e.to_string()));
            link(&mut one, en, &rel, dir, 0);
            graphs.push(one.clone());
            if limits.max_hops >= 2 {
                graphs.extend(chains(kb, e, &rel, dir, limits.max_branch));
                graphs.extend(branches(kb, &one, limits.max_branch));
            }
        }
    }
    let attached: Vec<QueryGraph> = graphs
        .iter()
        .flat_map(|g| seeds.iter().filter(|e| g.entity_node(e).is_none()).flat_map(|e| attach(kb, g, e, limits)))
        .collect();
    graphs.extend(attached);

    let cues = Cues::scan(record, kb, triggers);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for mut g in graphs {
        for t in &cues.types {
            g.constraints.push(Constraint::Type { target: 0, type_id: t.clone() });
        }
        for &(cmp, time) in &cues.times {
            g.constraints.push(Constraint::Temporal { target: 0, cmp, time });
        }
        for g in expand_numeric(kb, g, &cues) {
            let Ok(g) = canonicalize(&g) else { continue };
            let key = super::logical_form::to_inline_logical_form(&g).expect("canonical graph validates");
            if seen.insert(key) {
                out.push(g);
            }
            if out.len() == limits.max_candidates {
                return out;
            }
        }
    }
    out
}

/// Adds an edge between `node` and `other`: `node -rel-> other` when
/// `dir` is outgoing from `node`, else `other -rel-> node`.
fn link(g: &mut QueryGraph, node: usize, rel: &str, dir: Direction, other: usize) {
    match dir {
        Direction::Outgoing => g.add_edge(node, rel, other),
        Direction::Incoming => g.add_edge(other, rel, node),
    }
}

/// Sorted `(relation, direction)` pairs touching any of `values`, minus the label relation.
fn incident(kb: &KnowledgeBase, values: &[Value], cap: usize) -> Vec<(String, Direction)> {
    let mut set = BTreeSet::new();
    for v in values {
        for dir in [Direction::Outgoing, Direction::Incoming] {
            for r in kb.relations_at(v, dir) {
                if r != kb.schema().label {
                    set.insert((r.to_string(), dir));
                }
            }
        }
    }
    set.into_iter().take(cap).collect()
}

/// `e -rel- v -r2- ?q` for every relation around the bindings of `v`.
fn chains(kb: &KnowledgeBase, e: &str, rel: &str, dir: Direction, cap: usize) -> Vec<QueryGraph> {
    let mut base = QueryGraph::answer_only();
    let v = base.add_node(Node::Variable);
    let en = base.add_node(Node::Entity(e.to_string()));
    link(&mut base, en, rel, dir, v);
    let mids: Vec<Value> = bindings_of(kb, &base, v).into_iter().collect();
    incident(kb, &mids, cap)
        .into_iter()
        .map(|(r2, d2)| {
            let mut g = base.clone();
            link(&mut g, v, &r2, d2, 0);
            g
        })
        .collect()
}

/// `?q -r2- v` added to a one-hop graph, kept when it narrows the answers.
fn branches(kb: &KnowledgeBase, one: &QueryGraph, cap: usize) -> Vec<QueryGraph> {
    let answers = bindings_of(kb, one, 0);
    let vals: Vec<Value> = answers.iter().cloned().collect();
    incident(kb, &vals, cap)
        .into_iter()
        .filter_map(|(r2, d2)| {
            let mut g = one.clone();
            let v = g.add_node(Node::Variable);
            link(&mut g, 0, &r2, d2, v);
            (bindings_of(kb, &g, 0) != answers).then_some(g)
        })
        .collect()
}

fn attach(kb: &KnowledgeBase, g: &QueryGraph, e2: &str, limits: &GenLimits) -> Vec<QueryGraph> {
    let target = Value::entity(e2);
    let mut out = Vec::new();
    for node in (0..g.nodes.len()).filter(|&i| !matches!(g.nodes[i], Node::Entity(_))) {
        let mut links = BTreeSet::new();
        for b in bindings_of(kb, g, node) {
            for (r, o) in kb.neighbors(&b, Direction::Outgoing) {
                if o == target {
                    links.insert((r, Direction::Outgoing));
                }
            }
            for (r, o) in kb.neighbors(&target, Direction::Outgoing) {
                if o == b {
                    links.insert((r, Direction::Incoming));
                }
            }
        }
        for (r, dir) in links.into_iter().take(limits.max_branch) {
            let mut h = g.clone();
            let en = h.add_node(Node::Entity(e2.to_string()));
            link(&mut h, node, &r, dir, en);
            out.push(h);
        }
    }
    out
}

/// Constraint cues found in the question text.
struct Cues {
    types: Vec<String>,
    times: Vec<(Comparator, TimePoint)>,
    orders: Vec<OrderDirection>,
    compares: Vec<(Comparator, f64)>,
}

impl Cues {
    fn scan(record: &DatasetRecord, kb: &KnowledgeBase, triggers: &TriggerLexicon) -> Self {
        let toks = record.lowercase_tokens();
        let free = |start: usize, len: usize| (start..start + len).all(|i| !record.in_entity_span(i));

        let mut types = Vec::new();
        for t in kb.types() {
            let label = tokenize_relation_label(&kb.label_of(t)).join(" ");
            let len = label.split(' ').count();
            if !label.is_empty() && phrase_positions(&toks, &label).into_iter().any(|p| free(p, len)) {
                types.push(t.to_string());
            }
        }

        let mut compares = Vec::new();
        let mut operand_positions = BTreeSet::new();
        for (phrases, cmp) in [(&triggers.compare_gt, Comparator::Gt), (&triggers.compare_lt, Comparator::Lt)] {
            for phrase in phrases {
                let len = phrase.split_whitespace().count();
                for p in phrase_positions(&toks, phrase) {
                    let at = p + len;
                    if let Some(Value::Number(x)) = toks.get(at).and_then(|t| Value::parse(t).ok()) {
                        compares.push((cmp, x));
                        operand_positions.insert(at);
                    }
                }
            }
        }

        let ends_phrase_before = |i: usize, phrases: &[String]| {
            phrases.iter().any(|ph| {
                let len = ph.split_whitespace().count();
                i >= len && phrase_positions(&toks[i - len..i], ph).contains(&0)
            })
        };
        let mut times = Vec::new();
        for (i, t) in toks.iter().enumerate() {
            if record.in_entity_span(i) || operand_positions.contains(&i) {
                continue;
            }
            let time = match Value::parse(t) {
                Ok(Value::Date(d)) => TimePoint::Date(d),
                _ if t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()) => {
                    TimePoint::Year(t.parse().expect("four digits"))
                }
                _ => continue,
            };
            let cmp = if ends_phrase_before(i, &triggers.temporal_before) {
                Comparator::Le
            } else if ends_phrase_before(i, &triggers.temporal_after) {
                Comparator::Ge
            } else {
                Comparator::Eq
            };
            times.push((cmp, time));
        }

        let mut orders = Vec::new();
        let fired = |phrases: &[String]| phrases.iter().any(|p| !phrase_positions(&toks, p).is_empty());
        if fired(&triggers.order_asc) {
            orders.push(OrderDirection::Ascending);
        }
        if fired(&triggers.order_desc) {
            orders.push(OrderDirection::Descending);
        }
        Self { types, times, orders, compares }
    }
}

/// Replaces `g` by its order and compare variants when those cues fired
/// and the answer bindings carry a suitable property.
fn expand_numeric(kb: &KnowledgeBase, g: QueryGraph, cues: &Cues) -> Vec<QueryGraph> {
    let mut out = vec![g];
    if !cues.orders.is_empty() {
        out = out
            .into_iter()
            .flat_map(|g| {
                let props = properties(kb, &g, |v| v.ordinal().is_some());
                if props.is_empty() {
                    return vec![g];
                }
                let mut vs = Vec::new();
                for p in &props {
                    for &direction in &cues.orders {
                        let mut h = g.clone();
                        h.constraints.push(Constraint::Order { target: 0, direction, rank: 1, property: p.clone() });
                        vs.push(h);
                    }
                }
                vs
            })
            .collect();
    }
    if !cues.compares.is_empty() {
        out = out
            .into_iter()
            .flat_map(|g| {
                let props = properties(kb, &g, |v| matches!(v, Value::Number(_)));
                if props.is_empty() {
                    return vec![g];
                }
                let mut vs = Vec::new();
                for p in &props {
                    for &(cmp, value) in &cues.compares {
                        let mut h = g.clone();
                        h.constraints.push(Constraint::Compare { target: 0, cmp, value, property: p.clone() });
                        vs.push(h);
                    }
                }
                vs
            })
            .collect();
    }
    out
}

/// Relations from the answer bindings to literals accepted by `keep`, sorted.
fn properties(kb: &KnowledgeBase, g: &QueryGraph, keep: impl Fn(&Value) -> bool) -> Vec<String> {
    let mut props = BTreeSet::new();
    for b in bindings_of(kb, g, 0) {
        for (r, o) in kb.neighbors(&b, Direction::Outgoing) {
            if keep(&o) {
                props.insert(r);
            }
        }
    }
    props.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;
    use crate::kb::KbSchema;
    use crate::query_graph::to_logical_form;

    fn record(line: &str) -> DatasetRecord {
        parse_dataset(line).unwrap().remove(0)
    }

    fn forms(gs: &[QueryGraph]) -> Vec<String> {
        gs.iter().map(|g| to_logical_form(g).unwrap()).collect()
    }

    #[test]
    fn no_entities_no_candidates() {
        let kb = KnowledgeBase::parse_triples("a\tr\tb\n", KbSchema::default()).unwrap();
        let r = record("id=q\ttext=x\ttokens=x\tdep=0:root\tentities=\tanswers=");
        assert!(generate_candidates(&r, &kb, &GenLimits::default(), &TriggerLexicon::default()).is_empty());
    }

    #[test]
    fn one_hop_follows_kb_direction() {
        let kb = KnowledgeBase::parse_triples("Q1\tr\tQ2\nQ3\ts\tQ4\nQ4\tt\tQ3\n", KbSchema::default()).unwrap();
        let r = record("id=q\ttext=q1\ttokens=q1\tdep=0:root\tentities=0-1:Q1\tanswers=Q2");
        let limits = GenLimits { max_hops: 1, ..GenLimits::default() };
        let gs = generate_candidates(&r, &kb, &limits, &TriggerLexicon::default());
        assert_eq!(forms(&gs), vec!["(Q1)-[r]->(?q)"]);
    }

    #[test]
    fn year_fires_inexplicit_temporal_everywhere() {
        let kb = KnowledgeBase::parse_triples(
            "p\tposition_held\tpres\np\tbirth\t1961-08-04\nq\tposition_held\tpres\n",
            KbSchema::default(),
        )
        .unwrap();
        let r = record(
            "id=q\ttext=pres born in 1961\ttokens=pres;born;in;1961\tdep=2:x;0:root;2:y;3:z\t\
             entities=0-1:pres\tanswers=p",
        );
        let gs = generate_candidates(&r, &kb, &GenLimits::default(), &TriggerLexicon::default());
        assert!(!gs.is_empty());
        for g in &gs {
            assert!(g.constraints.iter().any(|c| matches!(
                c,
                Constraint::Temporal { cmp: Comparator::Eq, time: TimePoint::Year(1961), .. }
            )));
        }
    }

    #[test]
    fn deterministic_capped_and_valid() {
        let kb = KnowledgeBase::parse_triples(
            "a\tr\tb\nb\ts\tc\nc\tt\ta\nb\tu\td\nd\tv\ta\n",
            KbSchema::default(),
        )
        .unwrap();
        let r = record("id=q\ttext=a d\ttokens=a;d\tdep=0:root;1:x\tentities=0-1:a;1-2:d\tanswers=b");
        let limits = GenLimits { max_candidates: 7, ..GenLimits::default() };
        let a = generate_candidates(&r, &kb, &limits, &TriggerLexicon::default());
        let b = generate_candidates(&r, &kb, &limits, &TriggerLexicon::default());
        assert_eq!(a, b);
        assert!(a.len() <= 7);
        assert!(a.iter().all(|g| g.validate().is_ok()));
    }
}
