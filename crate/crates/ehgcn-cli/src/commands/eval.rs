//! `ehg eval`: held-out evaluation of a checkpoint, with optional
//! event-budget truncation and an accuracy-versus-events sweep.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use ehgcn::network::{self, EvalReport, PreparedWindow};

use crate::checkpoint::Checkpoint;
use crate::dataset::{self, DatasetMeta, LoadedWindow};
use crate::error::{CliError, CliResult};

use super::{create_file, prepare_split, Truncation};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset directory produced by `ehg synth --dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint written by `ehg train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Which split to evaluate.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Metrics JSON output path.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Keep at most this many events per window before sampling.
    #[arg(long)]
    pub max_events: Option<usize>,
    /// How --max-events picks the survivors.
    #[arg(long, value_enum, default_value_t)]
    pub truncation: Truncation,
    /// Comma-separated event budgets swept into a CSV curve.
    #[arg(long, requires = "sweep_out")]
    pub sweep: Option<String>,
    /// Output CSV for the sweep (max_events,accuracy,mean_loss).
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    /// Override the sampling seed stored in the checkpoint.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct SplitEval {
    report: EvalReport,
    labels: Vec<usize>,
}

fn eval_prepared(
    ck: &Checkpoint,
    prepared: &[PreparedWindow],
) -> CliResult<SplitEval> {
    let params = ck.to_model()?;
    let ncfg = ck.run.network_config(ck.num_classes);
    let report = network::evaluate(&params, &ncfg, prepared)?;
    Ok(SplitEval {
        report,
        labels: prepared.iter().map(|w| w.label).collect(),
    })
}

fn per_class(eval: &SplitEval, num_classes: usize) -> Vec<(usize, usize, f64)> {
    let mut totals = vec![0usize; num_classes];
    let mut hits = vec![0usize; num_classes];
    for (label, pred) in eval.labels.iter().zip(&eval.report.predictions) {
        totals[*label] += 1;
        if label == pred {
            hits[*label] += 1;
        }
    }
    (0..num_classes)
        .map(|c| {
            let acc = if totals[c] == 0 {
                0.0
            } else {
                hits[c] as f64 / totals[c] as f64
            };
            (c, totals[c], acc)
        })
        .collect()
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let mut ck = Checkpoint::load(&args.checkpoint)?;
    if let Some(s) = args.seed {
        ck.run.seed = s;
    }
    let meta = DatasetMeta::load(&args.dataset)?;
    if meta.classes.len() != ck.num_classes {
        return Err(CliError::data(format!(
            "dataset has {} classes but the checkpoint was trained on {}",
            meta.classes.len(),
            ck.num_classes
        )));
    }
    if !crate::dataset::SPLITS.contains(&args.split.as_str()) {
        return Err(CliError::config(format!(
            "unknown split '{}', expected one of: {}",
            args.split,
            dataset::SPLITS.join(", ")
        )));
    }
    let windows: Vec<LoadedWindow> = dataset::load_split(&args.dataset, &args.split, &meta)?;
    if windows.is_empty() {
        return Err(CliError::data(format!("{} split is empty", args.split)));
    }
    let pcfg = ck.run.pipeline_config(meta.sensor(), meta.window_us);

    let prepared = prepare_split(&windows, &pcfg, args.max_events, args.truncation, ck.run.seed)?;
    if prepared.is_empty() {
        return Err(CliError::data("no non-empty windows after preparation"));
    }
    let eval = eval_prepared(&ck, &prepared)?;
    println!(
        "{}: accuracy {} over {} windows (mean loss {})",
        args.split,
        eval.report.accuracy,
        prepared.len(),
        eval.report.mean_loss
    );

    if let Some(path) = &args.metrics {
        let per_class_rows: Vec<_> = per_class(&eval, ck.num_classes)
            .into_iter()
            .map(|(c, n, acc)| {
                json!({
                    "label": c,
                    "class": ck.class_names.get(c),
                    "windows": n,
                    "accuracy": acc,
                })
            })
            .collect();
        let metrics = json!({
            "split": args.split,
            "windows": prepared.len(),
            "accuracy": eval.report.accuracy,
            "mean_loss": eval.report.mean_loss,
            "max_events": args.max_events,
            "per_class": per_class_rows,
        });
        let mut writer = create_file(path)?;
        writeln!(writer, "{}", serde_json::to_string_pretty(&metrics).expect("metrics json"))?;
        writer.flush()?;
    }

    if let Some(levels) = &args.sweep {
        let sweep_out = args.sweep_out.as_ref().expect("clap enforces sweep_out");
        let mut budgets = Vec::new();
        for part in levels.split(',') {
            let trimmed = part.trim();
            if trimmed.is_empty() {
                continue;
            }
            budgets.push(trimmed.parse::<usize>().map_err(|_| {
                CliError::config(format!("--sweep: bad event budget '{trimmed}'"))
            })?);
        }
        if budgets.is_empty() {
            return Err(CliError::config("--sweep: no budgets given"));
        }
        let mut writer = create_file(sweep_out)?;
        writeln!(writer, "max_events,accuracy,mean_loss")?;
        for budget in budgets {
            let prepared =
                prepare_split(&windows, &pcfg, Some(budget), args.truncation, ck.run.seed)?;
            if prepared.is_empty() {
                return Err(CliError::data(format!(
                    "no non-empty windows at event budget {budget}"
                )));
            }
            let eval = eval_prepared(&ck, &prepared)?;
            writeln!(
                writer,
                "{budget},{},{}",
                eval.report.accuracy, eval.report.mean_loss
            )?;
            println!("max_events {budget}: accuracy {}", eval.report.accuracy);
        }
        writer.flush()?;
    }
    Ok(())
}
