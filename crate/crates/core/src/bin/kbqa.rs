use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kbqa::dataset::load_dataset;
use kbqa::harness::{
    evaluate, grad_check, load_kb, load_run_config, predict, train_run, write_file, Predictor, Resources, RunConfig,
};
use kbqa::query_graph::{generate_candidates, to_inline_logical_form};
use kbqa::trainer::Checkpoint;

#[derive(Parser)]
#[command(name = "kbqa", version, about = "Train and evaluate a query-graph ranker for KB question answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file and write a checkpoint.
    Train {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Loss log path (default: the checkpoint path with `.loss.tsv` appended).
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Macro precision/recall/F1 of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Per-question report (default: the checkpoint path with `.report.tsv` appended).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Chosen logical form and answers per question.
    Predict {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every candidate logical form per question.
    GenGraphs {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Config file supplying generation limits and triggers (defaults otherwise).
        #[arg(long)]
        limits: Option<PathBuf>,
    },
    /// Finite-difference check of every gradient on a small crafted instance.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_predictor(path: &Path) -> Result<Predictor> {
    let c = Checkpoint::load(path)?;
    Ok(Predictor::from_checkpoint(c)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { kb, dataset, config, out, loss_log } => {
            let run = load_run_config(&config)?;
            let resources = Resources::load(&run)?;
            let kb = load_kb(&kb)?;
            let records = load_dataset(&dataset)?;
            let outcome = train_run(&run, &resources, &records, &kb, Some(&out))?;
            let log_path = loss_log.unwrap_or_else(|| with_suffix(&out, ".loss.tsv"));
            write_file(&log_path, &outcome.loss_log())?;
            let last = outcome.log.last().map_or(f64::NAN, |e| e.mean_loss);
            println!(
                "trained {} epochs; final mean loss {last}; skipped {} questions",
                outcome.log.len(),
                outcome.skipped.len()
            );
            println!("checkpoint: {}", out.display());
            println!("loss log: {}", log_path.display());
        }
        Command::Eval { kb, dataset, checkpoint, report } => {
            let predictor = load_predictor(&checkpoint)?;
            let kb = load_kb(&kb)?;
            let records = load_dataset(&dataset)?;
            let metrics = evaluate(&records, &kb, &predictor)?;
            let report = report.unwrap_or_else(|| with_suffix(&checkpoint, ".report.tsv"));
            write_file(&report, &metrics.report())?;
            print!("{}", metrics.summary());
            println!("report: {}", report.display());
        }
        Command::Predict { kb, dataset, checkpoint, out } => {
            let predictor = load_predictor(&checkpoint)?;
            let kb = load_kb(&kb)?;
            let records = load_dataset(&dataset)?;
            let mut text = String::new();
            for r in &records {
                let p = predict(r, &kb, &predictor)?;
                let answers: Vec<String> = p.answers.iter().map(|v| v.to_string()).collect();
                let score = p.ranked.first().and_then(|c| c.score).map(|s| s.to_string()).unwrap_or_default();
                writeln!(text, "{}\t{}\t{}\t{}", p.id, p.chosen.unwrap_or_default(), answers.join(";"), score)?;
            }
            write_file(&out, &text)?;
            println!("wrote {} predictions to {}", records.len(), out.display());
        }
        Command::GenGraphs { kb, dataset, limits } => {
            let run = match limits {
                Some(p) => load_run_config(&p)?,
                None => RunConfig::default(),
            };
            let resources = Resources::load(&run)?;
            let kb = load_kb(&kb)?;
            let records = load_dataset(&dataset)?;
            for r in &records {
                for g in generate_candidates(r, &kb, &run.limits, &resources.triggers) {
                    println!("{}\t{}", r.id, to_inline_logical_form(&g)?);
                }
            }
        }
        Command::GradCheck { seed } => {
            let report = grad_check(seed).context("building the gradient-check instance")?;
            for p in &report.params {
                println!("{}\t{:.3e}\t{}", p.name, p.max_rel_error, if p.passed { "ok" } else { "FAIL" });
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!("max relative error {:.3e} (tolerance {:.0e}): {verdict}", report.max_rel_error, report.tolerance);
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
