//! Acceptance criteria. Each test prints one PASS/FAIL line, then asserts.
//!
//! Run with `cargo test -p kbqa-core --test acceptance -- --nocapture --test-threads=1`.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kbqa::dataset::DatasetRecord;
use kbqa::graph_encoder::{encode_relational, node_init, relation_attention, score, structure_forward};
use kbqa::harness::{grad_check, predict, train_run, Predictor, RunConfig};
use kbqa::kb::{brute_force_execute, execute, KnowledgeBase};
use kbqa::model::{Model, ModelConfig, RelationTyping, Vocabularies};
use kbqa::numerics::{softmax, Tape, Tensor};
use kbqa::query_graph::{parse_logical_form, Node, QueryGraph};
use kbqa::question_encoder::{encode_dependency_graph, DepEdge, DependencyGraph, EdgeClass};

use common::{random_graph, random_kb, split, synthetic, Corpus};

fn verdict(n: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    println!("criterion {n} [{}] {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let report = grad_check(0).expect("instance builds");
    let elapsed = start.elapsed();
    let failing: Vec<&str> = report.params.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
    let ok = report.passed() && report.tolerance <= 1e-4 && within(elapsed, Duration::from_secs(60));
    verdict(
        1,
        "finite-difference gradient check over the full scoring path",
        ok,
        format!(
            "{} parameters, max rel err {:.2e}, failing {:?}, {:.1}s",
            report.params.len(),
            report.max_rel_error,
            failing,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_executor_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = Vec::new();
    let mut non_empty = 0;
    for case in 0..1000 {
        let (kb, n_entities) = random_kb(&mut rng, 200);
        let g = random_graph(&mut rng, n_entities, 4);
        let fast = execute(&kb, &g).expect("valid graph");
        let slow = brute_force_execute(&kb, &g).expect("within guard");
        if !fast.is_empty() {
            non_empty += 1;
        }
        if fast != slow {
            mismatches.push(case);
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && within(elapsed, Duration::from_secs(120));
    verdict(
        2,
        "execute equals brute-force enumeration on 1000 random instances",
        ok,
        format!("{} mismatches {:?}, {non_empty} non-empty results, {:.1}s", mismatches.len(), mismatches, elapsed.as_secs_f64()),
    );
    assert!(ok);
}

#[test]
fn criterion_3_overfit_oracle() {
    let start = Instant::now();
    let Corpus { run, resources, kb, records } = synthetic();
    assert_eq!(run.train.model, ModelConfig::default());
    assert!(run.train.epochs <= 300);
    let outcome = train_run(&run, &resources, &records, &kb, None).expect("training");
    let reached = outcome.log.iter().find(|e| e.mean_loss < 0.01).map(|e| e.epoch);
    let metrics = outcome.evaluate(&records, &kb).expect("evaluation");
    let elapsed = start.elapsed();
    let ok = reached.is_some() && metrics.macro_f1 >= 0.95 && within(elapsed, Duration::from_secs(300));
    verdict(
        3,
        "synthetic corpus overfits at the default config",
        ok,
        format!(
            "{} questions, {} triples, loss < 0.01 first at epoch {:?}, final loss {:.2e}, macro F1 {:.4}, {:.1}s",
            records.len(),
            kb.len(),
            reached,
            outcome.log.last().map_or(f64::NAN, |e| e.mean_loss),
            metrics.macro_f1,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_structure_pair() {
    let Corpus { run, resources, kb, records } = synthetic();
    let outcome = train_run(&run, &resources, &records, &kb, None).expect("training");
    let predictor = Predictor::from_checkpoint(outcome.checkpoint).expect("checkpoint");
    let record = records.iter().find(|r| r.id == "spouse_president").expect("pair question");
    let gold = "(?v0)-[position_held]->(president) ; (?v0)-[spouse]->(?q)";
    let swapped = "(?q)-[position_held]->(president) ; (?q)-[spouse]->(?v0)";
    let prediction = predict(record, &kb, &predictor).expect("prediction");
    let score_of = |form: &str| prediction.ranked.iter().find(|c| c.form == form).and_then(|c| c.score);
    let (s_gold, s_swapped) = (score_of(gold), score_of(swapped));
    let relations = |f: &str| {
        let mut r: Vec<String> = parse_logical_form(f).unwrap().edges.into_iter().map(|e| e.relation).collect();
        r.sort();
        r
    };
    let ok = relations(gold) == relations(swapped)
        && s_swapped.is_some()
        && prediction.chosen.as_deref() == Some(gold)
        && s_gold > s_swapped;
    verdict(
        4,
        "same relations, different structure: gold ranked first",
        ok,
        format!("chosen {:?}, gold {:?} vs swapped {:?}", prediction.chosen, s_gold, s_swapped),
    );
    assert!(ok);
}

fn held_out_f1(corpus: &Corpus, train: &[DatasetRecord], held: &[DatasetRecord], edit: impl Fn(&mut ModelConfig)) -> f64 {
    let mut run: RunConfig = corpus.run.clone();
    edit(&mut run.train.model);
    let outcome = train_run(&run, &corpus.resources, train, &corpus.kb, None).expect("training");
    outcome.evaluate(held, &corpus.kb).expect("evaluation").macro_f1
}

#[test]
fn criterion_5_ablation_monotonicity() {
    let corpus = synthetic();
    let (train, held) = split(&corpus.records);
    let full = held_out_f1(&corpus, &train, &held, |_| {});
    let ablations: [(&str, fn(&mut ModelConfig)); 3] = [
        ("structure_attention off", |m| m.structure_attention = false),
        ("wordnet off", |m| m.wordnet = false),
        ("untyped relations", |m| m.relation_typing = RelationTyping::Untyped),
    ];
    let mut ok = true;
    let mut detail = format!("held out {}, full {full:.4}", held.len());
    for (name, edit) in ablations {
        let f1 = held_out_f1(&corpus, &train, &held, edit);
        ok &= full >= f1 - 0.05;
        detail.push_str(&format!(", {name} {f1:.4}"));
    }
    verdict(5, "full config not worse than any ablation by more than 0.05 F1", ok, detail);
    assert!(ok);
}

fn synthetic_model() -> (Model, KnowledgeBase, Vec<String>, Vec<String>) {
    let Corpus { resources, kb, records, .. } = synthetic();
    let vocab = Vocabularies::collect(&kb, &records, &resources.lexicon);
    let words = vocab.words.clone();
    let model = Model::init(ModelConfig::default(), vocab, resources.lexicon, None, 11).expect("model");
    let entities: Vec<String> =
        kb.triples().map(|t| t.subject.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    (model, kb, words, entities)
}

/// A connected graph over the corpus relations; node 0 is the answer.
fn corpus_graph(rng: &mut ChaCha8Rng, relations: &[String], entities: &[String]) -> QueryGraph {
    let mut g = QueryGraph::answer_only();
    let n = rng.gen_range(1..=4);
    let mut used = BTreeSet::new();
    for i in 1..n {
        let node = if rng.gen_bool(0.5) {
            let e = &entities[rng.gen_range(0..entities.len())];
            if used.insert(e.clone()) { Node::Entity(e.clone()) } else { Node::Variable }
        } else {
            Node::Variable
        };
        let idx = g.add_node(node);
        let other = rng.gen_range(0..i);
        let rel = relations[rng.gen_range(0..relations.len())].clone();
        if rng.gen_bool(0.5) {
            g.add_edge(idx, rel, other);
        } else {
            g.add_edge(other, rel, idx);
        }
    }
    g
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Node `i` moves to `perm[i]`; edges are also reordered.
fn relabel(g: &QueryGraph, perm: &[usize], edge_order: &[usize]) -> QueryGraph {
    let mut nodes = vec![Node::Variable; g.nodes.len()];
    for (i, n) in g.nodes.iter().enumerate() {
        nodes[perm[i]] = n.clone();
    }
    let mut h = QueryGraph { nodes, edges: Vec::new(), constraints: Vec::new() };
    for &k in edge_order {
        let e = &g.edges[k];
        h.add_edge(perm[e.src], e.relation.clone(), perm[e.dst]);
    }
    h
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn run_property(runner: &mut TestRunner, seed_range: std::ops::Range<u64>, check: impl Fn(u64) -> Result<(), String>) -> Result<(), String> {
    runner
        .run(&seed_range, |seed| check(seed).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

#[test]
fn criterion_6_invariance_properties() {
    const CASES: u32 = 256;
    let (model, kb, words, entities) = synthetic_model();
    let relations: Vec<String> = model.relations.relations().map(str::to_string).collect();
    let mut results = Vec::new();
    let runner = || TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });

    results.push((
        "h_q invariant under token permutation",
        run_property(&mut runner(), 0..u64::MAX, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=8);
            let tokens: Vec<String> = (0..n).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
            let mut edges: Vec<DepEdge> =
                (0..n).map(|i| DepEdge { head: i, dependent: i, class: EdgeClass::SelfLoop }).collect();
            let order = shuffled(&mut rng, n);
            for k in 1..n {
                let head = order[rng.gen_range(0..k)];
                edges.push(DepEdge { head, dependent: order[k], class: EdgeClass::HeadToDependent });
            }
            let dep = DependencyGraph { tokens, edges };
            let perm = shuffled(&mut rng, n);
            let mut tape = Tape::new(&model.params);
            let a = encode_dependency_graph(&mut tape, &model, &dep).map_err(|e| e.to_string())?;
            let b = encode_dependency_graph(&mut tape, &model, &dep.permuted(&perm)).map_err(|e| e.to_string())?;
            let d = max_abs_diff(tape.value(a.h_q), tape.value(b.h_q));
            if d <= 1e-9 { Ok(()) } else { Err(format!("h_q differs by {d:e}")) }
        }),
    ));

    results.push((
        "h_structure invariant under node relabeling",
        run_property(&mut runner(), 0..u64::MAX, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = corpus_graph(&mut rng, &relations, &entities);
            let h = relabel(&g, &shuffled(&mut rng, g.nodes.len()), &shuffled(&mut rng, g.edges.len()));
            let mut tape = Tape::new(&model.params);
            let e_avg = tape.constant(Tensor::randn(vec![model.config.dim], 1.0, &mut rng));
            let mut structure = |g: &QueryGraph| -> Result<Tensor, String> {
                let init = node_init(&mut tape, &model, &kb, g).map_err(|e| e.to_string())?;
                let att = relation_attention(&mut tape, &model, e_avg, g).map_err(|e| e.to_string())?;
                let s = structure_forward(&mut tape, &model, g, &init, att).map_err(|e| e.to_string())?;
                Ok(tape.value(s.h_structure).clone())
            };
            let (a, b) = (structure(&g)?, structure(&h)?);
            let d = max_abs_diff(&a, &b);
            if d <= 1e-9 { Ok(()) } else { Err(format!("h_structure differs by {d:e}")) }
        }),
    ));

    results.push((
        "h_relational invariant under row permutation",
        run_property(&mut runner(), 0..u64::MAX, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = corpus_graph(&mut rng, &relations, &entities);
            if g.edges.is_empty() {
                g.add_node(Node::Variable);
                g.add_edge(0, relations[0].clone(), 1);
            }
            let mut tape = Tape::new(&model.params);
            let e_avg = tape.constant(Tensor::randn(vec![model.config.dim], 1.0, &mut rng));
            let enc = encode_relational(&mut tape, &model, &g, e_avg).map_err(|e| e.to_string())?;
            let r_fine = enc.r_fine.expect("graph has edges");
            let k = enc.relations.len();
            let rows = shuffled(&mut rng, k)
                .into_iter()
                .map(|i| tape.row(r_fine, i))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let stacked = tape.stack(&rows).map_err(|e| e.to_string())?;
            let pooled = tape.max_pool_rows(stacked).map_err(|e| e.to_string())?;
            let reordered = relabel(&g, &(0..g.nodes.len()).collect::<Vec<_>>(), &shuffled(&mut rng, g.edges.len()));
            let enc2 = encode_relational(&mut tape, &model, &reordered, e_avg).map_err(|e| e.to_string())?;
            let base = tape.value(enc.h_relational).clone();
            let d = max_abs_diff(&base, tape.value(pooled)).max(max_abs_diff(&base, tape.value(enc2.h_relational)));
            if d <= 1e-9 { Ok(()) } else { Err(format!("h_relational differs by {d:e}")) }
        }),
    ));

    results.push((
        "softmax sums to one within 1e-9",
        run_property(&mut runner(), 0..u64::MAX, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=40);
            let scale = [1.0, 10.0, 300.0][rng.gen_range(0..3)];
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
            let s: f64 = softmax(&xs).map_err(|e| e.to_string())?.iter().sum();
            if (s - 1.0).abs() <= 1e-9 { Ok(()) } else { Err(format!("sum {s}")) }
        }),
    ));

    results.push((
        "cosine lies in [-1, 1]",
        run_property(&mut runner(), 0..u64::MAX, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=16);
            let a = Tensor::randn(vec![n], 10.0, &mut rng);
            let b = if rng.gen_bool(0.3) {
                Tensor::vector(a.data().iter().map(|x| x * -3.0).collect())
            } else {
                Tensor::randn(vec![n], 0.1, &mut rng)
            };
            let direct = a.cosine(&b).map_err(|e| e.to_string())?;
            let params = kbqa::numerics::ParamRegistry::new();
            let mut tape = Tape::new(&params);
            let (va, vb) = (tape.constant(a), tape.constant(b));
            let c = score(&mut tape, va, vb).map_err(|e| e.to_string())?;
            let on_tape = tape.value(c).data()[0];
            if (-1.0..=1.0).contains(&direct) && (-1.0..=1.0).contains(&on_tape) {
                Ok(())
            } else {
                Err(format!("cosine {direct} / {on_tape}"))
            }
        }),
    ));

    let ok = results.iter().all(|(_, r)| r.is_ok());
    let detail: Vec<String> = results
        .iter()
        .map(|(name, r)| match r {
            Ok(()) => format!("{name}: ok"),
            Err(e) => format!("{name}: {e}"),
        })
        .collect();
    verdict(6, &format!("invariance properties ({CASES} cases each)"), ok, detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_7_determinism() {
    let Corpus { run, resources, kb, records } = synthetic();
    let once = || {
        let outcome = train_run(&run, &resources, &records, &kb, None).expect("training");
        let metrics = outcome.evaluate(&records, &kb).expect("evaluation");
        (outcome.loss_log(), metrics.report(), outcome.checkpoint.to_json())
    };
    let (a, b) = (once(), once());
    let ok = a == b;
    verdict(
        7,
        "two train+eval runs are bit-identical",
        ok,
        format!(
            "loss logs {}, reports {}, checkpoints {}",
            if a.0 == b.0 { "equal" } else { "differ" },
            if a.1 == b.1 { "equal" } else { "differ" },
            if a.2 == b.2 { "equal" } else { "differ" }
        ),
    );
    assert!(ok);
}
