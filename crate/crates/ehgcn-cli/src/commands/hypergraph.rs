//! `ehg hypergraph`: motion-consistent grouping of one event stream,
//! written as JSONL plus a stats report (hyperedge count, size
//! histogram, and label purity when a sidecar is available).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use ehgcn::event::{self, PolarityEncoding};
use ehgcn::hypergraph::{build_hyperedges, motion_features};
use ehgcn::sampling::SampledStream;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

use super::{create_file, read_label_file, resolve_geometry};

#[derive(Debug, Args)]
pub struct HypergraphArgs {
    /// Input event CSV, treated as one already-sampled window.
    #[arg(long)]
    pub input: PathBuf,
    /// Pipeline configuration TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hypergraph JSONL: a header object, then one member array per
    /// hyperedge.
    #[arg(long)]
    pub out: PathBuf,
    /// Stats JSON (vertices, hyperedges, size histogram, purity).
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Per-event labels aligned with the time-sorted input; enables
    /// purity.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Window length override, microseconds (sets the time scale).
    #[arg(long)]
    pub window_us: Option<u64>,
    /// Sensor width override, pixels.
    #[arg(long)]
    pub width: Option<u16>,
    /// Sensor height override, pixels.
    #[arg(long)]
    pub height: Option<u16>,
    /// Linking threshold override.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Direction bandwidth override.
    #[arg(long)]
    pub sigma_v: Option<f64>,
    /// Speed bandwidth override.
    #[arg(long)]
    pub sigma_s: Option<f64>,
    /// Neighbours scored per event.
    #[arg(long)]
    pub candidate_k: Option<usize>,
    /// Input polarity encoded as {0,1} instead of {-1,+1}.
    #[arg(long)]
    pub polarity_zero_one: bool,
}

pub fn run(args: &HypergraphArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.gamma {
        cfg.mvf.gamma = v;
    }
    if let Some(v) = args.sigma_v {
        cfg.mvf.sigma_v = v;
    }
    if let Some(v) = args.sigma_s {
        cfg.mvf.sigma_s = v;
    }
    if let Some(v) = args.candidate_k {
        cfg.mvf.candidate_k = v;
    }
    let (sensor, window_us) = resolve_geometry(&cfg, None, args.width, args.height, args.window_us)?;

    let encoding = if args.polarity_zero_one {
        PolarityEncoding::ZeroOne
    } else {
        PolarityEncoding::SignedUnit
    };
    let reader = BufReader::new(
        fs::File::open(&args.input)
            .map_err(|e| CliError::data(format!("{}: {e}", args.input.display())))?,
    );
    let events = event::parse_events_csv(reader, encoding)?;
    for ev in &events {
        if ev.x >= sensor.width || ev.y >= sensor.height {
            return Err(CliError::data(format!(
                "event at ({}, {}) outside {}x{} sensor",
                ev.x, ev.y, sensor.width, sensor.height
            )));
        }
    }
    let labels = match &args.labels {
        Some(p) => {
            let l = read_label_file(p)?;
            if l.len() != events.len() {
                return Err(CliError::data(format!(
                    "{}: {} labels for {} events",
                    p.display(),
                    l.len(),
                    events.len()
                )));
            }
            Some(l)
        }
        None => None,
    };

    let t_start = events.first().map(|e| e.t).unwrap_or(0);
    let t_end = events.last().map(|e| e.t + 1).unwrap_or(1).max(t_start + window_us);
    let n = events.len();
    let stream = SampledStream {
        t_start,
        t_end,
        sensor,
        retained_indices: (0..n).collect(),
        probabilities: vec![1.0; n],
        densities: vec![1.0; n],
        rate: 1.0,
        retained: events,
    };

    let mvf = cfg.mvf_config(sensor, window_us);
    let features = motion_features(&stream, &mvf)?;
    let hg = build_hyperedges(&features, &stream, &mvf)?;

    let mut out = create_file(&args.out)?;
    hg.write_jsonl(&mvf, &mut out)?;
    out.flush()?;

    let purity = labels.as_ref().and_then(|l| hg.purity(l));
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for edge in &hg.hyperedges {
        *histogram.entry(edge.len()).or_insert(0) += 1;
    }
    let grouped: usize = hg.incidence_count();
    if let Some(path) = &args.stats {
        let stats = json!({
            "vertices": hg.num_vertices,
            "hyperedges": hg.num_hyperedges(),
            "incidences": grouped,
            "links": hg.links.len(),
            "grouped_fraction": if n == 0 { 0.0 } else { grouped as f64 / n as f64 },
            "size_histogram": histogram
                .iter()
                .map(|(size, count)| json!({"size": size, "count": count}))
                .collect::<Vec<_>>(),
            "purity": purity,
        });
        let mut writer = create_file(path)?;
        writeln!(writer, "{}", serde_json::to_string_pretty(&stats).expect("stats json"))?;
        writer.flush()?;
    }

    match purity {
        Some(p) => println!(
            "{} vertices, {} hyperedges, purity {p}",
            hg.num_vertices,
            hg.num_hyperedges()
        ),
        None => println!("{} vertices, {} hyperedges", hg.num_vertices, hg.num_hyperedges()),
    }
    Ok(())
}
