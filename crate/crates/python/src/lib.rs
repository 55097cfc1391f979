//! Python bindings: knowledge base, logical forms, candidate generation,
//! training, evaluation and prediction.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kbqa::dataset::{load_dataset, DatasetRecord};
use kbqa::harness::{self, load_kb, load_run_config, Predictor, Resources, RunConfig};
use kbqa::kb::{execute, KbSchema};
use kbqa::query_graph::{generate_candidates, parse_logical_form, to_inline_logical_form, to_logical_form};
use kbqa::trainer::{format_loss_log, Checkpoint};

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn run_config(path: Option<PathBuf>) -> PyResult<RunConfig> {
    match path {
        Some(p) => load_run_config(&p).map_err(value_err),
        None => Ok(RunConfig::default()),
    }
}

/// An in-memory triple store.
#[pyclass(frozen)]
pub struct KnowledgeBase {
    inner: kbqa::kb::KnowledgeBase,
}

#[pymethods]
impl KnowledgeBase {
    /// Loads a tab-separated triple file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_kb(&path).map_err(value_err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = kbqa::kb::KnowledgeBase::parse_triples(text, KbSchema::default()).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Answers of a logical form, sorted.
    fn execute(&self, logical_form: &str) -> PyResult<Vec<String>> {
        let g = parse_logical_form(logical_form).map_err(value_err)?;
        let answers = execute(&self.inner, &g).map_err(value_err)?;
        Ok(answers.iter().map(ToString::to_string).collect())
    }
}

/// Canonical multi-line form of a logical form.
#[pyfunction]
fn canonical_form(logical_form: &str) -> PyResult<String> {
    let g = parse_logical_form(logical_form).map_err(value_err)?;
    to_logical_form(&g).map_err(value_err)
}

/// Canonical single-line form of a logical form.
#[pyfunction]
fn inline_form(logical_form: &str) -> PyResult<String> {
    let g = parse_logical_form(logical_form).map_err(value_err)?;
    to_inline_logical_form(&g).map_err(value_err)
}

/// Candidate logical forms for one dataset line.
#[pyfunction]
#[pyo3(signature = (kb, record_line, config=None))]
fn candidates(kb: &KnowledgeBase, record_line: &str, config: Option<PathBuf>) -> PyResult<Vec<String>> {
    let record = DatasetRecord::parse_line(record_line).map_err(value_err)?;
    let run = run_config(config)?;
    let resources = Resources::load(&run).map_err(value_err)?;
    generate_candidates(&record, &kb.inner, &run.limits, &resources.triggers)
        .iter()
        .map(|g| to_inline_logical_form(g).map_err(value_err))
        .collect()
}

/// Maximum relative gradient error on the built-in check instance and whether it passed.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn grad_check(seed: u64) -> PyResult<(f64, bool)> {
    let report = harness::grad_check(seed).map_err(runtime_err)?;
    Ok((report.max_rel_error, report.passed()))
}

/// A trained ranker.
#[pyclass(frozen)]
pub struct Model {
    checkpoint: Checkpoint,
    predictor: Predictor,
    loss_log: String,
}

impl Model {
    fn from_checkpoint(checkpoint: Checkpoint) -> PyResult<Self> {
        let loss_log = format_loss_log(&checkpoint.loss_log);
        let predictor = Predictor::from_checkpoint(checkpoint.clone()).map_err(value_err)?;
        Ok(Self { checkpoint, predictor, loss_log })
    }
}

#[pymethods]
impl Model {
    /// Trains from a config file. `out` receives the checkpoint.
    #[staticmethod]
    #[pyo3(signature = (kb, dataset, config, out=None))]
    fn train(py: Python<'_>, kb: &KnowledgeBase, dataset: PathBuf, config: PathBuf, out: Option<PathBuf>) -> PyResult<Self> {
        let run = load_run_config(&config).map_err(value_err)?;
        let resources = Resources::load(&run).map_err(value_err)?;
        let records = load_dataset(&dataset).map_err(value_err)?;
        let outcome = py
            .detach(|| harness::train_run(&run, &resources, &records, &kb.inner, out.as_deref()))
            .map_err(runtime_err)?;
        Self::from_checkpoint(outcome.checkpoint)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::from_checkpoint(Checkpoint::load(&path).map_err(value_err)?)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.checkpoint.save(&path).map_err(runtime_err)
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.checkpoint.epoch
    }

    /// Tab-separated `epoch, mean loss, pairs` lines.
    #[getter]
    fn loss_log(&self) -> &str {
        &self.loss_log
    }

    /// Macro precision, recall and F1 over a dataset file.
    fn evaluate(&self, py: Python<'_>, kb: &KnowledgeBase, dataset: PathBuf) -> PyResult<(f64, f64, f64)> {
        let records = load_dataset(&dataset).map_err(value_err)?;
        let m = py
            .detach(|| harness::evaluate(&records, &kb.inner, &self.predictor))
            .map_err(runtime_err)?;
        Ok((m.macro_precision, m.macro_recall, m.macro_f1))
    }

    /// Ranked `(logical form, score)` pairs for one dataset line; unscorable candidates get `None`.
    fn rank(&self, kb: &KnowledgeBase, record_line: &str) -> PyResult<Vec<(String, Option<f64>)>> {
        let record = DatasetRecord::parse_line(record_line).map_err(value_err)?;
        let p = harness::predict(&record, &kb.inner, &self.predictor).map_err(runtime_err)?;
        Ok(p.ranked.into_iter().map(|c| (c.form, c.score)).collect())
    }

    /// Chosen logical form and its answers for one dataset line.
    fn predict(&self, kb: &KnowledgeBase, record_line: &str) -> PyResult<(Option<String>, Vec<String>)> {
        let record = DatasetRecord::parse_line(record_line).map_err(value_err)?;
        let p = harness::predict(&record, &kb.inner, &self.predictor).map_err(runtime_err)?;
        Ok((p.chosen, p.answers.iter().map(ToString::to_string).collect()))
    }
}

#[pymodule]
fn kbqa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<KnowledgeBase>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(canonical_form, m)?)?;
    m.add_function(wrap_pyfunction!(inline_form, m)?)?;
    m.add_function(wrap_pyfunction!(candidates, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    Ok(())
}

