mod common;

use kbqa::dataset::parse_dataset;
use kbqa::harness::pr_f1;
use kbqa::kb::execute;
use kbqa::query_graph::{generate_candidates, parse_logical_form, to_inline_logical_form};
use kbqa::trainer::label_candidates;

use common::{split, synthetic, synthetic_dir};

#[test]
fn corpus_size() {
    let c = synthetic();
    assert!((18..=30).contains(&c.records.len()), "{} questions", c.records.len());
    assert!((50..=80).contains(&c.kb.len()), "{} triples", c.kb.len());
    let (train, held) = split(&c.records);
    assert_eq!(held.len() * 3, train.len());
}

#[test]
fn gold_forms_are_canonical_and_exact() {
    let c = synthetic();
    for r in &c.records {
        let gold = r.gold_logical_form.as_deref().unwrap_or_else(|| panic!("{} has no gold form", r.id));
        let g = parse_logical_form(gold).unwrap();
        assert_eq!(to_inline_logical_form(&g).unwrap(), gold, "{}", r.id);
        let answers = execute(&c.kb, &g).unwrap();
        assert_eq!(pr_f1(&answers, &r.answers).2, 1.0, "{}", r.id);
    }
}

#[test]
fn gold_is_the_labeled_positive() {
    let c = synthetic();
    for r in &c.records {
        let cands = generate_candidates(r, &c.kb, &c.run.limits, &c.resources.triggers);
        let (_, form, negatives) = label_candidates(r, &cands, &c.kb, c.run.train.gold_threshold)
            .unwrap_or_else(|| panic!("{} has no training split", r.id));
        assert_eq!(Some(form.as_str()), r.gold_logical_form.as_deref(), "{}", r.id);
        assert!(!negatives.is_empty());
    }
}

#[test]
fn dataset_file_round_trips() {
    let text = std::fs::read_to_string(synthetic_dir().join("dataset.tsv")).unwrap();
    let records = parse_dataset(&text).unwrap();
    let back: String = records.iter().map(|r| r.to_line() + "\n").collect();
    assert_eq!(back, text);
}
