use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kbqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbqa")).args(args).output().expect("run kbqa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic").join(name).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let o = kbqa(&[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn grad_check_passes() {
    let o = kbqa(&["grad-check", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
}

#[test]
fn missing_input_fails_cleanly() {
    let o = kbqa(&["gen-graphs", "--kb", "/nonexistent/kb.tsv", "--dataset", &data("dataset.tsv")]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn gen_graphs_lists_gold_forms() {
    let o = kbqa(&["gen-graphs", "--kb", &data("kb.tsv"), "--dataset", &data("dataset.tsv"), "--limits", &data("config.txt")]);
    assert!(o.status.success());
    let out = stdout(&o);
    let dataset = std::fs::read_to_string(data("dataset.tsv")).unwrap();
    for r in kbqa::dataset::parse_dataset(&dataset).unwrap() {
        let line = format!("{}\t{}", r.id, r.gold_logical_form.unwrap());
        assert!(out.lines().any(|l| l == line), "{line}");
    }
    assert!(out.lines().all(|l| l.split('\t').count() == 2));
}

#[test]
fn train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!("seed = 3\nepochs = 3\nlexicon = {}\ntriggers = {}\n", data("lexicon.txt"), data("triggers.txt")),
    )
    .unwrap();
    let ck = dir.path().join("model.json");
    let (kb, ds) = (data("kb.tsv"), data("dataset.tsv"));

    let o = kbqa(&["train", "--kb", &kb, "--dataset", &ds, "--config", s(&config), "--out", s(&ck)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("model.json.loss.tsv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let o = kbqa(&["eval", "--kb", &kb, "--dataset", &ds, "--checkpoint", s(&ck)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("macro_f1\t"));
    let report = std::fs::read_to_string(dir.path().join("model.json.report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 24);

    let preds = dir.path().join("preds.tsv");
    let o = kbqa(&["predict", "--kb", &kb, "--dataset", &ds, "--checkpoint", s(&ck), "--out", s(&preds)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.lines().all(|l| l.split('\t').count() == 4));
}
