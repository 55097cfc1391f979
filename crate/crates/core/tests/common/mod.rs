#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use kbqa::dataset::{load_dataset, DatasetRecord};
use kbqa::harness::{load_kb, load_run_config, Resources, RunConfig};
use kbqa::kb::{KbSchema, KnowledgeBase, Triple, Value};
use kbqa::query_graph::{Comparator, Constraint, Node, OrderDirection, QueryGraph, TimePoint};

pub fn synthetic_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic")
}

pub struct Corpus {
    pub run: RunConfig,
    pub resources: Resources,
    pub kb: KnowledgeBase,
    pub records: Vec<DatasetRecord>,
}

pub fn synthetic() -> Corpus {
    let d = synthetic_dir();
    let run = load_run_config(&d.join("config.txt")).expect("config");
    let resources = Resources::load(&run).expect("resources");
    let kb = load_kb(&d.join("kb.tsv")).expect("kb");
    let records = load_dataset(&d.join("dataset.tsv")).expect("dataset");
    Corpus { run, resources, kb, records }
}

/// Training and held-out records: every fourth record is held out.
pub fn split(records: &[DatasetRecord]) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if i % 4 == 3 {
            held.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    (train, held)
}

const RELATIONS: [&str; 4] = ["r0", "r1", "r2", "r3"];
pub const NUM_PROP: &str = "num";
pub const DATE_PROP: &str = "born";

fn entity(i: usize) -> String {
    format!("e{i}")
}

fn date(rng: &mut ChaCha8Rng) -> NaiveDate {
    NaiveDate::from_ymd_opt(rng.gen_range(1990..1994), rng.gen_range(1..=12), rng.gen_range(1..=28)).expect("valid date")
}

/// A small KB with entity edges, types, a numeric and a date property.
/// Small value ranges make ties, type hits and date matches common.
pub fn random_kb(rng: &mut ChaCha8Rng, max_triples: usize) -> (KnowledgeBase, usize) {
    let n_entities = rng.gen_range(3..=20);
    let n_triples = rng.gen_range(1..=max_triples);
    let schema = KbSchema::default();
    let mut triples = Vec::with_capacity(n_triples);
    for _ in 0..n_triples {
        let s = entity(rng.gen_range(0..n_entities));
        let t = match rng.gen_range(0..10) {
            0..=5 => Triple::new(s, RELATIONS[rng.gen_range(0..4)], Value::entity(entity(rng.gen_range(0..n_entities)))),
            6 => Triple::new(s, schema.instance_of.as_str(), Value::entity(format!("t{}", rng.gen_range(0..2)))),
            7 | 8 => Triple::new(s, NUM_PROP, Value::Number(rng.gen_range(0..8) as f64)),
            _ => Triple::new(s, DATE_PROP, Value::Date(date(rng))),
        };
        triples.push(t);
    }
    (KnowledgeBase::from_triples(triples, schema), n_entities)
}

fn comparator(rng: &mut ChaCha8Rng) -> Comparator {
    [Comparator::Lt, Comparator::Le, Comparator::Eq, Comparator::Ge, Comparator::Gt][rng.gen_range(0..5)]
}

/// A connected graph of 1 to `max_nodes` nodes with up to two constraints.
pub fn random_graph(rng: &mut ChaCha8Rng, n_entities: usize, max_nodes: usize) -> QueryGraph {
    let mut g = QueryGraph::answer_only();
    let n = rng.gen_range(1..=max_nodes);
    let mut used = Vec::new();
    for i in 1..n {
        let node = if rng.gen_bool(0.5) {
            let mut e = rng.gen_range(0..n_entities);
            while used.contains(&e) {
                e = (e + 1) % n_entities;
            }
            used.push(e);
            Node::Entity(entity(e))
        } else {
            Node::Variable
        };
        let idx = g.add_node(node);
        let other = rng.gen_range(0..i);
        let rel = RELATIONS[rng.gen_range(0..4)];
        if rng.gen_bool(0.5) {
            g.add_edge(idx, rel, other);
        } else {
            g.add_edge(other, rel, idx);
        }
    }
    if n > 1 && rng.gen_bool(0.3) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        g.add_edge(a, RELATIONS[rng.gen_range(0..4)], b);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let target = rng.gen_range(0..n);
        let c = match rng.gen_range(0..5) {
            0 => Constraint::Entity { target, id: entity(rng.gen_range(0..n_entities)) },
            1 => Constraint::Type { target, type_id: format!("t{}", rng.gen_range(0..2)) },
            2 => {
                let cmp = [Comparator::Le, Comparator::Eq, Comparator::Ge][rng.gen_range(0..3)];
                let time = if rng.gen_bool(0.5) {
                    TimePoint::Year(rng.gen_range(1989..1995))
                } else {
                    TimePoint::Date(date(rng))
                };
                Constraint::Temporal { target, cmp, time }
            }
            3 => Constraint::Order {
                target,
                direction: if rng.gen_bool(0.5) { OrderDirection::Ascending } else { OrderDirection::Descending },
                rank: rng.gen_range(1..=3),
                property: if rng.gen_bool(0.7) { NUM_PROP } else { DATE_PROP }.to_string(),
            },
            _ => Constraint::Compare {
                target,
                cmp: comparator(rng),
                value: rng.gen_range(0..8) as f64,
                property: NUM_PROP.to_string(),
            },
        };
        g.constraints.push(c);
    }
    g
}
