//! Query-graph evaluation.
//!
//! [`execute`] is a backtracking join seeded from entity nodes that always
//! extends the variable with the most edges into the bound set.
//! [`brute_force_execute`] enumerates every assignment over the full value
//! domain against its own triple table and serves as the test oracle.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::{KbError, KnowledgeBase, Triple, Value};
use crate::query_graph::{Comparator, Constraint, Node, OrderDirection, QueryGraph, TimePoint};

/// Bindings of the answer node over all homomorphisms satisfying every constraint.
pub fn execute(kb: &KnowledgeBase, g: &QueryGraph) -> Result<BTreeSet<Value>, KbError> {
    g.validate().map_err(KbError::InvalidGraph)?;
    let answer = g.answer().expect("validated graph has an answer node");
    Ok(project(&homomorphisms(kb, g), answer))
}

/// Bindings of an arbitrary node (used to expand candidate graphs).
pub fn bindings_of(kb: &KnowledgeBase, g: &QueryGraph, node: usize) -> BTreeSet<Value> {
    project(&homomorphisms(kb, g), node)
}

fn project(rows: &[Vec<Value>], node: usize) -> BTreeSet<Value> {
    rows.iter().map(|row| row[node].clone()).collect()
}

/// Every full assignment of graph nodes to KB values that satisfies the
/// edges and constraints (order constraints applied last, in list order).
pub fn homomorphisms(kb: &KnowledgeBase, g: &QueryGraph) -> Vec<Vec<Value>> {
    let n = g.nodes.len();
    let mut assign: Vec<Option<Value>> = vec![None; n];
    for (i, node) in g.nodes.iter().enumerate() {
        if let Node::Entity(id) = node {
            assign[i] = Some(Value::Entity(id.clone()));
        }
    }
    let local: Vec<Vec<&Constraint>> = (0..n)
        .map(|i| {
            g.constraints
                .iter()
                .filter(|c| c.target() == i && !matches!(c, Constraint::Order { .. }))
                .collect()
        })
        .collect();
    for i in 0..n {
        if let Some(v) = &assign[i] {
            if !local[i].iter().all(|c| local_ok(kb, c, v)) {
                return Vec::new();
            }
        }
    }
    for e in &g.edges {
        if let (Some(s), Some(o)) = (&assign[e.src], &assign[e.dst]) {
            if !edge_holds(kb, s, &e.relation, o) {
                return Vec::new();
            }
        }
    }
    let mut out = Vec::new();
    let mut search = Search { kb, g, local: &local, out: &mut out };
    search.extend(&mut assign);
    apply_order_constraints(&g.constraints, out, |v, prop| property_ordinals(kb, v, prop))
}

struct Search<'a> {
    kb: &'a KnowledgeBase,
    g: &'a QueryGraph,
    local: &'a [Vec<&'a Constraint>],
    out: &'a mut Vec<Vec<Value>>,
}

impl Search<'_> {
    fn extend(&mut self, assign: &mut Vec<Option<Value>>) {
        let Some(next) = self.pick(assign) else {
            self.out.push(assign.iter().map(|v| v.clone().expect("complete assignment")).collect());
            return;
        };
        for cand in self.candidates(next, assign) {
            if !self.local[next].iter().all(|c| local_ok(self.kb, c, &cand)) {
                continue;
            }
            if !self.edges_ok(next, &cand, assign) {
                continue;
            }
            assign[next] = Some(cand);
            self.extend(assign);
            assign[next] = None;
        }
    }

    /// Unbound node with the most edges into the bound set; lowest index on ties.
    fn pick(&self, assign: &[Option<Value>]) -> Option<usize> {
        (0..assign.len())
            .filter(|&i| assign[i].is_none())
            .max_by_key(|&i| {
                let links = self
                    .g
                    .edges
                    .iter()
                    .filter(|e| {
                        (e.src == i && e.dst != i && assign[e.dst].is_some())
                            || (e.dst == i && e.src != i && assign[e.src].is_some())
                    })
                    .count();
                (links, std::cmp::Reverse(i))
            })
    }

    fn candidates(&self, node: usize, assign: &[Option<Value>]) -> Vec<Value> {
        for e in &self.g.edges {
            if e.dst == node && e.src != node {
                if let Some(Value::Entity(s)) = &assign[e.src] {
                    return self.kb.objects(s, &e.relation).map(|o| o.iter().cloned().collect()).unwrap_or_default();
                } else if assign[e.src].is_some() {
                    return Vec::new();
                }
            }
            if e.src == node && e.dst != node {
                if let Some(o) = &assign[e.dst] {
                    return self
                        .kb
                        .subjects(o, &e.relation)
                        .map(|s| s.iter().map(|id| Value::Entity(id.clone())).collect())
                        .unwrap_or_default();
                }
            }
        }
        self.kb.values().iter().cloned().collect()
    }

    fn edges_ok(&self, node: usize, cand: &Value, assign: &[Option<Value>]) -> bool {
        self.g.edges.iter().all(|e| {
            let s = if e.src == node { Some(cand) } else { assign[e.src].as_ref() };
            let o = if e.dst == node { Some(cand) } else { assign[e.dst].as_ref() };
            match (s, o) {
                (Some(s), Some(o)) if e.src == node || e.dst == node => edge_holds(self.kb, s, &e.relation, o),
                _ => true,
            }
        })
    }
}

fn edge_holds(kb: &KnowledgeBase, s: &Value, relation: &str, o: &Value) -> bool {
    match s {
        Value::Entity(id) => kb.contains(id, relation, o),
        _ => false,
    }
}

fn local_ok(kb: &KnowledgeBase, c: &Constraint, v: &Value) -> bool {
    match c {
        Constraint::Entity { id, .. } => v.as_entity() == Some(id.as_str()),
        Constraint::Type { type_id, .. } => v.as_entity().is_some_and(|e| kb.has_type(e, type_id)),
        Constraint::Temporal { cmp, time, .. } => match v {
            Value::Date(d) => time.matches(*cmp, *d),
            Value::Entity(_) => kb
                .neighbors(v, super::Direction::Outgoing)
                .iter()
                .any(|(_, o)| matches!(o, Value::Date(d) if time.matches(*cmp, *d))),
            _ => false,
        },
        Constraint::Compare { cmp, value, property, .. } => v.as_entity().is_some_and(|id| {
            kb.objects(id, property)
                .is_some_and(|objs| objs.iter().any(|o| matches!(o, Value::Number(x) if cmp.holds(*x, *value))))
        }),
        Constraint::Order { .. } => true,
    }
}

fn property_ordinals(kb: &KnowledgeBase, v: &Value, property: &str) -> Vec<f64> {
    v.as_entity()
        .and_then(|id| kb.objects(id, property))
        .map(|objs| objs.iter().filter_map(Value::ordinal).collect())
        .unwrap_or_default()
}

/// Dense-rank selection: for each order constraint keep the rows whose
/// target key equals the `rank`-th distinct key. Ascending keys use a
/// binding's smallest property value, descending keys its largest.
fn apply_order_constraints(
    constraints: &[Constraint],
    mut rows: Vec<Vec<Value>>,
    ordinals: impl Fn(&Value, &str) -> Vec<f64>,
) -> Vec<Vec<Value>> {
    for c in constraints {
        let Constraint::Order { target, direction, rank, property } = c else { continue };
        let key = |v: &Value| -> Option<f64> {
            let vals = ordinals(v, property);
            match direction {
                OrderDirection::Ascending => vals.into_iter().reduce(f64::min),
                OrderDirection::Descending => vals.into_iter().reduce(f64::max),
            }
        };
        let keyed: Vec<(f64, Vec<Value>)> =
            rows.into_iter().filter_map(|row| key(&row[*target]).map(|k| (k, row))).collect();
        let mut distinct: Vec<f64> = keyed.iter().map(|(k, _)| *k).collect();
        distinct.sort_by(|a, b| a.total_cmp(b));
        distinct.dedup();
        if *direction == OrderDirection::Descending {
            distinct.reverse();
        }
        rows = match distinct.get(rank - 1) {
            Some(&kth) => keyed.into_iter().filter(|(k, _)| *k == kth).map(|(_, r)| r).collect(),
            None => Vec::new(),
        };
    }
    rows
}

/// Largest variable count the oracle accepts.
pub const BRUTE_FORCE_MAX_VARIABLES: usize = 4;
/// Largest value domain the oracle accepts.
pub const BRUTE_FORCE_MAX_VALUES: usize = 500;

/// Exhaustive oracle with the same contract as [`execute`].
pub fn brute_force_execute(kb: &KnowledgeBase, g: &QueryGraph) -> Result<BTreeSet<Value>, KbError> {
    g.validate().map_err(KbError::InvalidGraph)?;
    let vars: Vec<usize> = (0..g.nodes.len()).filter(|&i| !matches!(g.nodes[i], Node::Entity(_))).collect();
    let domain: Vec<Value> = {
        let mut d = BTreeSet::new();
        for t in kb.triples() {
            d.insert(Value::Entity(t.subject.clone()));
            d.insert(t.object.clone());
        }
        d.into_iter().collect()
    };
    if vars.len() > BRUTE_FORCE_MAX_VARIABLES || domain.len() > BRUTE_FORCE_MAX_VALUES {
        return Err(KbError::GuardExceeded { variables: vars.len(), values: domain.len() });
    }
    let table = Oracle::new(kb);
    let mut assign: Vec<Option<Value>> = g
        .nodes
        .iter()
        .map(|n| match n {
            Node::Entity(id) => Some(Value::Entity(id.clone())),
            _ => None,
        })
        .collect();
    let mut rows = Vec::new();
    enumerate(&table, g, &vars, &domain, 0, &mut assign, &mut rows);
    let rows = apply_order_constraints(&g.constraints, rows, |v, p| table.ordinals(v, p));
    let answer = g.answer().expect("validated graph has an answer node");
    Ok(project(&rows, answer))
}

/// Triple table built straight from the triple list, independent of the store's indexes.
struct Oracle<'a> {
    triples: HashSet<&'a Triple>,
    by_subject: HashMap<&'a str, Vec<&'a Triple>>,
    instance_of: &'a str,
}

impl<'a> Oracle<'a> {
    fn new(kb: &'a KnowledgeBase) -> Self {
        let mut by_subject: HashMap<&str, Vec<&Triple>> = HashMap::new();
        for t in kb.triples() {
            by_subject.entry(t.subject.as_str()).or_default().push(t);
        }
        Self { triples: kb.triples().collect(), by_subject, instance_of: &kb.schema().instance_of }
    }

    fn holds(&self, s: &Value, r: &str, o: &Value) -> bool {
        let Value::Entity(id) = s else { return false };
        self.triples.contains(&Triple::new(id.clone(), r, o.clone()))
    }

    fn facts(&self, v: &Value) -> &[&'a Triple] {
        match v {
            Value::Entity(id) => self.by_subject.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]),
            _ => &[],
        }
    }

    fn ordinals(&self, v: &Value, property: &str) -> Vec<f64> {
        self.facts(v).iter().filter(|t| t.relation == property).filter_map(|t| t.object.ordinal()).collect()
    }

    fn satisfies(&self, c: &Constraint, v: &Value) -> bool {
        match c {
            Constraint::Entity { id, .. } => matches!(v, Value::Entity(e) if e == id),
            Constraint::Type { type_id, .. } => self
                .facts(v)
                .iter()
                .any(|t| t.relation == self.instance_of && t.object == Value::Entity(type_id.clone())),
            Constraint::Temporal { cmp, time, .. } => {
                let ok = |d: &chrono::NaiveDate| date_matches(*time, *cmp, *d);
                match v {
                    Value::Date(d) => ok(d),
                    _ => self.facts(v).iter().any(|t| matches!(&t.object, Value::Date(d) if ok(d))),
                }
            }
            Constraint::Compare { cmp, value, property, .. } => self
                .facts(v)
                .iter()
                .any(|t| &t.relation == property && matches!(t.object, Value::Number(x) if cmp.holds(x, *value))),
            Constraint::Order { .. } => true,
        }
    }
}

fn date_matches(time: TimePoint, cmp: Comparator, d: chrono::NaiveDate) -> bool {
    use chrono::Datelike;
    match time {
        TimePoint::Date(t) => cmp.holds(d, t),
        TimePoint::Year(y) => cmp.holds(d.year(), y),
    }
}

fn enumerate(
    table: &Oracle<'_>,
    g: &QueryGraph,
    vars: &[usize],
    domain: &[Value],
    depth: usize,
    assign: &mut Vec<Option<Value>>,
    rows: &mut Vec<Vec<Value>>,
) {
    if depth == vars.len() {
        let complete: Vec<Value> = assign.iter().map(|v| v.clone().expect("all assigned")).collect();
        let edges_ok = g.edges.iter().all(|e| table.holds(&complete[e.src], &e.relation, &complete[e.dst]));
        let constraints_ok = g.constraints.iter().all(|c| table.satisfies(c, &complete[c.target()]));
        if edges_ok && constraints_ok {
            rows.push(complete);
        }
        return;
    }
    let node = vars[depth];
    for v in domain {
        assign[node] = Some(v.clone());
        // prune on edges whose endpoints are both fixed
        let consistent = g.edges.iter().all(|e| match (&assign[e.src], &assign[e.dst]) {
            (Some(s), Some(o)) if e.src == node || e.dst == node => table.holds(s, &e.relation, o),
            _ => true,
        });
        if consistent {
            enumerate(table, g, vars, domain, depth + 1, assign, rows);
        }
    }
    assign[node] = None;
}
