//! `ehg flops`: arithmetic cost report for the configured network,
//! either from explicit graph statistics or aggregated over a dataset
//! split.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use ehgcn::network::{estimate_flops, GraphStats};
use ehgcn::pipeline;

use crate::config::RunConfig;
use crate::dataset::{self, DatasetMeta};
use crate::error::{CliError, CliResult};

use super::create_file;

#[derive(Debug, Args)]
pub struct FlopsArgs {
    /// Pipeline configuration TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory: run preprocessing and sum costs per window.
    #[arg(long, conflicts_with_all = ["nodes", "agg_nnz"])]
    pub dataset: Option<PathBuf>,
    /// Which split to cost in dataset mode.
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Vertex count for direct mode.
    #[arg(long, requires = "agg_nnz")]
    pub nodes: Option<usize>,
    /// Aggregation-matrix non-zeros for direct mode.
    #[arg(long, requires = "nodes")]
    pub agg_nnz: Option<usize>,
    /// Hyperedge count for direct mode.
    #[arg(long, default_value_t = 0)]
    pub hyperedges: usize,
    /// Vertex-hyperedge incidences for direct mode.
    #[arg(long, default_value_t = 0)]
    pub incidences: usize,
    /// Classifier width in direct mode (dataset mode reads it from
    /// meta.toml).
    #[arg(long, default_value_t = 3)]
    pub num_classes: usize,
    /// Report JSON output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global seed overriding the config file (dataset mode samples).
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &FlopsArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }

    let (mode, windows, entries, total) = match (&args.dataset, args.nodes, args.agg_nnz) {
        (Some(dir), None, None) => {
            let meta = DatasetMeta::load(dir)?;
            if !dataset::SPLITS.contains(&args.split.as_str()) {
                return Err(CliError::config(format!(
                    "unknown split '{}', expected one of: {}",
                    args.split,
                    dataset::SPLITS.join(", ")
                )));
            }
            let loaded = dataset::load_split(dir, &args.split, &meta)?;
            if loaded.is_empty() {
                return Err(CliError::data(format!("{} split is empty", args.split)));
            }
            let num_classes = meta.classes.len().max(2);
            let ncfg = cfg.network_config(num_classes);
            ncfg.validate()?;
            let pcfg = cfg.pipeline_config(meta.sensor(), meta.window_us);
            let mut entries: Vec<(String, u64)> = Vec::new();
            let mut total = 0u64;
            let mut counted = 0usize;
            for (i, lw) in loaded.iter().enumerate() {
                let Some(artifacts) =
                    pipeline::prepare_window(&lw.window, &pcfg, i as u64, lw.label)?
                else {
                    continue;
                };
                let report = estimate_flops(&ncfg, &artifacts.prepared.stats);
                for (stage, flops) in report.entries {
                    match entries.iter_mut().find(|(name, _)| *name == stage) {
                        Some((_, sum)) => *sum += flops,
                        None => entries.push((stage, flops)),
                    }
                }
                total += report.total;
                counted += 1;
            }
            ("dataset", counted, entries, total)
        }
        (None, Some(nodes), Some(agg_nnz)) => {
            let ncfg = cfg.network_config(args.num_classes);
            ncfg.validate()?;
            let stats = GraphStats {
                nodes,
                agg_nnz,
                hyperedges: args.hyperedges,
                incidences: args.incidences,
            };
            let report = estimate_flops(&ncfg, &stats);
            ("direct", 1, report.entries, report.total)
        }
        _ => {
            return Err(CliError::config(
                "either --dataset or both --nodes and --agg-nnz are required",
            ))
        }
    };

    for (stage, flops) in &entries {
        println!("{stage}: {flops}");
    }
    println!("total: {total} flops over {windows} windows");

    if let Some(path) = &args.out {
        let report = json!({
            "mode": mode,
            "windows": windows,
            "entries": entries
                .iter()
                .map(|(stage, flops)| json!({"stage": stage, "flops": flops}))
                .collect::<Vec<_>>(),
            "total": total,
            "mean_per_window": total as f64 / windows.max(1) as f64,
        });
        let mut writer = create_file(path)?;
        writeln!(writer, "{}", serde_json::to_string_pretty(&report).expect("flops json"))?;
        writer.flush()?;
    }
    Ok(())
}
