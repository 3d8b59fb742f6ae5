//! `ehg synth`: Poisson scene synthesis. Either a single scene spec
//! (events plus per-event emitter labels) or a whole labelled dataset
//! directory with train/test splits.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use ehgcn::event::{self, synthesize_scene_labeled, SceneSpec, NOISE_LABEL};

use crate::config::seeds;
use crate::dataset::{self, DatasetMeta, DatasetSpec, DATASET_VERSION};
use crate::error::{CliError, CliResult};

use super::create_file;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec TOML; writes events.csv, labels.csv, meta.toml.
    #[arg(long, conflicts_with = "dataset")]
    pub spec: Option<PathBuf>,
    /// Dataset spec TOML; writes train/ and test/ splits of labelled
    /// windows.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Global seed overriding the one in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    match (&args.spec, &args.dataset) {
        (Some(spec), None) => run_scene(spec, args),
        (None, Some(spec)) => run_dataset(spec, args),
        _ => Err(CliError::config("exactly one of --spec or --dataset is required")),
    }
}

fn read_spec(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn run_scene(path: &PathBuf, args: &SynthArgs) -> CliResult<()> {
    let mut spec = SceneSpec::from_toml_str(&read_spec(path)?)?;
    if let Some(seed) = args.seed {
        spec.seed = seeds::scene(seed, 0);
    }
    let (events, labels) = synthesize_scene_labeled(&spec)?;

    fs::create_dir_all(&args.out_dir)?;
    let mut ev_file = create_file(&args.out_dir.join("events.csv"))?;
    event::write_events_csv(&mut ev_file, &events)?;
    ev_file.flush()?;
    let mut label_file = create_file(&args.out_dir.join("labels.csv"))?;
    for l in &labels {
        writeln!(label_file, "{l}")?;
    }
    label_file.flush()?;
    DatasetMeta {
        version: DATASET_VERSION,
        width: spec.width,
        height: spec.height,
        window_us: (spec.duration_s * 1e6).round() as u64,
        classes: Vec::new(),
    }
    .write(&args.out_dir)?;

    let noise = labels.iter().filter(|&&l| l == NOISE_LABEL).count();
    println!(
        "events.csv: {} events ({} from {} objects, {} noise)",
        events.len(),
        events.len() - noise,
        spec.objects.len(),
        noise
    );
    println!("labels.csv: {} lines", labels.len());
    Ok(())
}

fn run_dataset(path: &PathBuf, args: &SynthArgs) -> CliResult<()> {
    let mut spec = DatasetSpec::from_toml_str(&read_spec(path)?)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let summaries = dataset::generate(&spec, &args.out_dir, spec.seed)?;
    for s in summaries {
        println!("{}: {} windows, {} events", s.split, s.windows, s.events);
    }
    println!(
        "classes: {}",
        spec.classes
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}
