//! `ehg train`: two-phase full-batch training on a labelled dataset
//! directory, producing a version-tagged checkpoint and a per-step
//! loss trace CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use ehgcn::network::{self, TraceRow};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{self, DatasetMeta};
use crate::error::{CliError, CliResult};

use super::{create_file, prepare_split, Truncation};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `ehg synth --dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Pipeline configuration TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for checkpoint.json and trace.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Global seed overriding the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep at most this many events per window before sampling.
    #[arg(long)]
    pub max_events: Option<usize>,
    /// How --max-events picks the survivors.
    #[arg(long, value_enum, default_value_t)]
    pub truncation: Truncation,
}

/// Writes `step,loss,accuracy,c0..` rows; curvature columns match the
/// embedding plus one entry per ball layer.
pub fn write_trace(path: &PathBuf, trace: &[TraceRow]) -> CliResult<()> {
    let mut writer = create_file(path)?;
    let num_c = trace.first().map(|r| r.curvatures.len()).unwrap_or(0);
    let header: Vec<String> = ["step", "loss", "accuracy"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..num_c).map(|i| format!("c{i}")))
        .collect();
    writeln!(writer, "{}", header.join(","))?;
    for row in trace {
        let mut cols = vec![row.step.to_string(), row.loss.to_string(), row.accuracy.to_string()];
        cols.extend(row.curvatures.iter().map(|c| c.to_string()));
        writeln!(writer, "{}", cols.join(","))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let meta = DatasetMeta::load(&args.dataset)?;
    if meta.classes.len() < 2 {
        return Err(CliError::config(format!(
            "dataset has {} classes, training needs at least 2",
            meta.classes.len()
        )));
    }
    let windows = dataset::load_split(&args.dataset, "train", &meta)?;
    if windows.is_empty() {
        return Err(CliError::data("train split is empty"));
    }

    let pcfg = cfg.pipeline_config(meta.sensor(), meta.window_us);
    let prepared = prepare_split(&windows, &pcfg, args.max_events, args.truncation, cfg.seed)?;
    if prepared.is_empty() {
        return Err(CliError::data("no non-empty training windows after preparation"));
    }

    let ncfg = cfg.network_config(meta.classes.len());
    let (params, trace) = network::train(&prepared, &ncfg)?;
    let report = network::evaluate(&params, &ncfg, &prepared)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let ck = Checkpoint::new(&params, cfg, meta.classes.len(), meta.classes.clone());
    ck.save(&args.out_dir.join("checkpoint.json"))?;
    write_trace(&args.out_dir.join("trace.csv"), &trace)?;

    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        println!(
            "trained {} windows for {} steps: loss {} -> {}",
            prepared.len(),
            trace.len(),
            first.loss,
            last.loss
        );
    }
    println!("train accuracy {}", report.accuracy);
    Ok(())
}
