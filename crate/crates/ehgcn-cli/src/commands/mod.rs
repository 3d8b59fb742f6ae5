//! Subcommand implementations plus the small amount of plumbing they
//! share: geometry resolution, window preparation, and output helpers.

pub mod ablate;
pub mod eval;
pub mod flops;
pub mod hypergraph;
pub mod sample;
pub mod synth;
pub mod train;

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ehgcn::event::Event;
use ehgcn::network::PreparedWindow;
use ehgcn::pipeline::{self, PipelineConfig};
use ehgcn::SensorGeometry;

use crate::config::{seeds, RunConfig};
use crate::dataset::{DatasetMeta, LoadedWindow};
use crate::error::{CliError, CliResult};

/// How `--max-events` picks the surviving subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Truncation {
    /// Keep the earliest events; the default, and deterministic without
    /// any randomness.
    #[default]
    Prefix,
    /// Keep a uniform random subset in stream order.
    Random,
}

/// Reduces a sorted event list to at most `limit` entries.
pub fn truncate_events(events: &mut Vec<Event>, limit: usize, mode: Truncation, seed: u64) {
    if events.len() <= limit {
        return;
    }
    match mode {
        Truncation::Prefix => events.truncate(limit),
        Truncation::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..events.len()).collect();
            for i in 0..limit {
                let j = rng.random_range(i..idx.len());
                idx.swap(i, j);
            }
            idx.truncate(limit);
            idx.sort_unstable();
            *events = idx.iter().map(|&i| events[i]).collect();
        }
    }
}

/// Runs the preprocessing pipeline over a loaded split. Windows that
/// end up with no events at all are dropped.
pub fn prepare_split(
    windows: &[LoadedWindow],
    pcfg: &PipelineConfig,
    limit: Option<usize>,
    mode: Truncation,
    global_seed: u64,
) -> CliResult<Vec<PreparedWindow>> {
    let mut prepared = Vec::with_capacity(windows.len());
    for (i, lw) in windows.iter().enumerate() {
        let mut window = lw.window.clone();
        if let Some(limit) = limit {
            truncate_events(
                &mut window.events,
                limit,
                mode,
                seeds::subsample(global_seed, i as u64),
            );
        }
        if let Some(artifacts) = pipeline::prepare_window(&window, pcfg, i as u64, lw.label)? {
            prepared.push(artifacts.prepared);
        }
    }
    Ok(prepared)
}

/// Sensor size and window length: explicit flags win, then dataset
/// metadata, then the `[window]` config section.
pub fn resolve_geometry(
    cfg: &RunConfig,
    meta: Option<&DatasetMeta>,
    width: Option<u16>,
    height: Option<u16>,
    window_us: Option<u64>,
) -> CliResult<(SensorGeometry, u64)> {
    let w = width.or(meta.map(|m| m.width)).unwrap_or(cfg.window.width);
    let h = height.or(meta.map(|m| m.height)).unwrap_or(cfg.window.height);
    let span = window_us
        .or(meta.map(|m| m.window_us))
        .unwrap_or(cfg.window.window_us);
    if w == 0 || h == 0 {
        return Err(CliError::config("sensor dimensions must be at least 1x1"));
    }
    if span == 0 {
        return Err(CliError::config("window_us must be positive"));
    }
    Ok((SensorGeometry::new(w, h), span))
}

/// Creates the file, making parent directories as needed.
pub fn create_file(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file =
        fs::File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Reads one integer label per line.
pub fn read_label_file(path: &Path) -> CliResult<Vec<i32>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        labels.push(row.parse().map_err(|_| {
            CliError::data(format!("{}:{}: bad label '{row}'", path.display(), lineno + 1))
        })?);
    }
    Ok(labels)
}
