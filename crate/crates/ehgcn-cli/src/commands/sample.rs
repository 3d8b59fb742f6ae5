//! `ehg sample`: adaptive (or uniform) event sampling over a windowed
//! stream, with per-window retention diagnostics.

use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use ehgcn::event::{self, PolarityEncoding, NOISE_LABEL};
use ehgcn::sampling::{self, SampledStream};
use ehgcn::seed;

use crate::config::{seeds, RunConfig};
use crate::dataset::DatasetMeta;
use crate::error::{CliError, CliResult};

use super::{create_file, read_label_file, resolve_geometry};

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Input event CSV (x,y,t,p rows).
    #[arg(long)]
    pub input: PathBuf,
    /// Pipeline configuration TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Retained events, same CSV layout as the input.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-window diagnostics, one JSON object per line.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Also write one JSON object per input event to the diagnostics
    /// file (density, probability, retained).
    #[arg(long)]
    pub per_event: bool,
    /// Per-event labels aligned with the time-sorted input stream.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Labels of the retained events, aligned with --out.
    #[arg(long, requires = "labels")]
    pub labels_out: Option<PathBuf>,
    /// Dataset meta.toml supplying sensor size and window length.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Window length override, microseconds.
    #[arg(long)]
    pub window_us: Option<u64>,
    /// Sensor width override, pixels.
    #[arg(long)]
    pub width: Option<u16>,
    /// Sensor height override, pixels.
    #[arg(long)]
    pub height: Option<u16>,
    /// Replace adaptive sampling with this fixed retention probability.
    #[arg(long)]
    pub uniform_rate: Option<f64>,
    /// Global seed overriding the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input polarity encoded as {0,1} instead of {-1,+1}.
    #[arg(long)]
    pub polarity_zero_one: bool,
}

fn load_meta_opt(path: &Option<PathBuf>) -> CliResult<Option<DatasetMeta>> {
    match path {
        Some(p) => {
            let dir = p.parent().unwrap_or(std::path::Path::new("."));
            Ok(Some(DatasetMeta::load(dir)?))
        }
        None => Ok(None),
    }
}

pub fn run(args: &SampleArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.uniform_rate.is_some() {
        cfg.sampling.uniform_rate = args.uniform_rate;
    }
    let meta = load_meta_opt(&args.meta)?;
    let (sensor, window_us) =
        resolve_geometry(&cfg, meta.as_ref(), args.width, args.height, args.window_us)?;

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

    let mut out = create_file(&args.out)?;
    let mut diag = match &args.diagnostics {
        Some(p) => Some(create_file(p)?),
        None => None,
    };
    let mut labels_out = match &args.labels_out {
        Some(p) => Some(create_file(p)?),
        None => None,
    };

    let windows = if events.is_empty() {
        Vec::new()
    } else {
        event::window_stream(&events, window_us, sensor)?
    };

    let base = seeds::sampling(cfg.seed);
    let sampling_cfg = cfg.sampling_config(sensor, window_us);
    let mut offset = 0usize;
    let mut total_in = 0usize;
    let mut total_kept = 0usize;
    for (w, window) in windows.iter().enumerate() {
        let window_seed = seed::derive(base, "window-sample", w as u64);
        let sampled: SampledStream = match cfg.sampling.uniform_rate {
            Some(rate) => sampling::uniform_sample(window, rate, window_seed)?,
            None => {
                let mut sc = sampling_cfg.clone();
                sc.seed = window_seed;
                sampling::sample(window, &sc)?
            }
        };

        event::write_events_csv(&mut out, &sampled.retained)?;
        if let (Some(writer), Some(all)) = (labels_out.as_mut(), labels.as_ref()) {
            for &idx in &sampled.retained_indices {
                writeln!(writer, "{}", all[offset + idx])?;
            }
        }

        let n = window.events.len();
        let kept = sampled.retained.len();
        if let Some(writer) = diag.as_mut() {
            if args.per_event {
                for i in 0..n {
                    let row = json!({
                        "window": w,
                        "index": i,
                        "density": sampled.densities[i],
                        "probability": sampled.probabilities[i],
                        "retained": sampled.retained_indices.binary_search(&i).is_ok(),
                    });
                    writeln!(writer, "{row}")?;
                }
            }
            let mut summary = json!({
                "window": w,
                "t_start": sampled.t_start,
                "t_end": sampled.t_end,
                "input": n,
                "retained": kept,
                "rate": sampled.rate,
                "retention": if n == 0 { 0.0 } else { kept as f64 / n as f64 },
            });
            if let Some(all) = labels.as_ref() {
                let slice = &all[offset..offset + n];
                let object_total = slice.iter().filter(|&&l| l != NOISE_LABEL).count();
                let object_kept = sampled
                    .retained_indices
                    .iter()
                    .filter(|&&i| slice[i] != NOISE_LABEL)
                    .count();
                let noise_total = n - object_total;
                let noise_kept = kept - object_kept;
                let frac = |kept: usize, total: usize| {
                    if total == 0 {
                        serde_json::Value::Null
                    } else {
                        json!(kept as f64 / total as f64)
                    }
                };
                summary["object_retention"] = frac(object_kept, object_total);
                summary["noise_retention"] = frac(noise_kept, noise_total);
            }
            writeln!(writer, "{summary}")?;
        }
        println!(
            "window {w}: {kept}/{n} retained (rate {rate})",
            rate = sampled.rate
        );
        offset += n;
        total_in += n;
        total_kept += kept;
    }

    out.flush()?;
    if let Some(mut writer) = diag {
        writer.flush()?;
    }
    if let Some(mut writer) = labels_out {
        writer.flush()?;
    }
    println!(
        "{} windows, {total_kept}/{total_in} events retained",
        windows.len()
    );
    Ok(())
}
