//! Labelled synthetic datasets on disk: a dataset directory holds a
//! `meta.toml`, plus `train/` and `test/` splits. Each split has a
//! `labels.csv` (`file,label` with header) and a `windows/` directory
//! with one `x,y,t,p` CSV per window alongside a `.labels.csv` sidecar
//! carrying the per-event emitter id (-1 for noise).

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ehgcn::event::{
    self, synthesize_scene_labeled, EventWindow, ObjectSpec, PolarityEncoding, SceneSpec,
};
use ehgcn::SensorGeometry;

use crate::config::seeds;
use crate::error::{CliError, CliResult};

pub const DATASET_VERSION: u32 = 1;
pub const SPLITS: [&str; 2] = ["train", "test"];

/// Sidecar describing the directory; written once by `synth`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub width: u16,
    pub height: u16,
    pub window_us: u64,
    /// Class names in label order; empty for single-scene output.
    #[serde(default)]
    pub classes: Vec<String>,
}

impl DatasetMeta {
    pub fn sensor(&self) -> SensorGeometry {
        SensorGeometry::new(self.width, self.height)
    }

    pub fn load(dir: &Path) -> CliResult<DatasetMeta> {
        let path = dir.join("meta.toml");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let meta: DatasetMeta = toml::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if meta.version != DATASET_VERSION {
            return Err(CliError::data(format!(
                "{}: unsupported dataset version {}",
                path.display(),
                meta.version
            )));
        }
        Ok(meta)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = toml::to_string(self)
            .map_err(|e| CliError::data(format!("meta serialisation: {e}")))?;
        fs::write(dir.join("meta.toml"), text)?;
        Ok(())
    }
}

/// One motion class: objects drawn around a base velocity with uniform
/// jitter on speed (relative) and heading (radians).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    /// Base speed, pixels per second.
    pub speed: f64,
    /// Base heading, radians; 0 points along +x.
    pub angle: f64,
    #[serde(default)]
    pub speed_jitter: f64,
    #[serde(default)]
    pub angle_jitter: f64,
    /// Mean emission rate per object, events per second.
    pub rate: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_objects")]
    pub objects: usize,
}

fn default_radius() -> f64 {
    3.0
}

fn default_objects() -> usize {
    1
}

/// Declarative spec for a whole labelled dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default = "default_dim")]
    pub width: u16,
    #[serde(default = "default_dim")]
    pub height: u16,
    #[serde(default = "default_window_us")]
    pub window_us: u64,
    /// Background noise over the whole sensor, events per second.
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default = "default_train_per_class")]
    pub train_per_class: usize,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
    #[serde(default = "default_spec_seed")]
    pub seed: u64,
    pub classes: Vec<ClassSpec>,
}

fn default_dim() -> u16 {
    64
}

fn default_window_us() -> u64 {
    100_000
}

fn default_train_per_class() -> usize {
    20
}

fn default_test_per_class() -> usize {
    8
}

fn default_spec_seed() -> u64 {
    7
}

impl DatasetSpec {
    pub fn from_toml_str(text: &str) -> CliResult<DatasetSpec> {
        let spec: DatasetSpec = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Config(format!("dataset spec: {msg}")));
        if self.width == 0 || self.height == 0 {
            return fail("sensor dimensions must be at least 1x1".into());
        }
        if self.window_us == 0 {
            return fail("window_us must be positive".into());
        }
        if self.classes.len() < 2 {
            return fail(format!("{} classes given, at least 2 required", self.classes.len()));
        }
        if self.train_per_class == 0 {
            return fail("train_per_class must be positive".into());
        }
        if !(self.noise_rate.is_finite() && (0.0..=1e7).contains(&self.noise_rate)) {
            return fail(format!("noise_rate {} out of [0, 1e7]", self.noise_rate));
        }
        for (i, class) in self.classes.iter().enumerate() {
            if class.name.is_empty() {
                return fail(format!("class {i}: empty name"));
            }
            if !(class.speed.is_finite() && class.speed >= 0.0) {
                return fail(format!("class {i}: speed {} invalid", class.speed));
            }
            if !class.angle.is_finite() {
                return fail(format!("class {i}: angle must be finite"));
            }
            if !(class.speed_jitter.is_finite() && (0.0..=1.0).contains(&class.speed_jitter)) {
                return fail(format!("class {i}: speed_jitter {} out of [0, 1]", class.speed_jitter));
            }
            if !(class.angle_jitter.is_finite() && class.angle_jitter >= 0.0) {
                return fail(format!("class {i}: angle_jitter {} invalid", class.angle_jitter));
            }
            if !(class.rate.is_finite() && (0.0..=1e7).contains(&class.rate)) {
                return fail(format!("class {i}: rate {} out of [0, 1e7]", class.rate));
            }
            if !(class.radius.is_finite() && class.radius >= 0.0) {
                return fail(format!("class {i}: radius {} invalid", class.radius));
            }
            if class.objects == 0 {
                return fail(format!("class {i}: objects must be positive"));
            }
        }
        Ok(())
    }
}

/// Uniform draw from `[lo, hi]`, or the midpoint when the interval is
/// degenerate or inverted (trajectory longer than the sensor).
fn spawn_coord(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        (lo + hi) / 2.0
    }
}

/// Draws one object of `class`, placed so its whole trajectory stays
/// on-sensor whenever that is geometrically possible.
fn draw_object(rng: &mut ChaCha8Rng, class: &ClassSpec, spec: &DatasetSpec) -> ObjectSpec {
    let jit = class.speed_jitter;
    let speed = class.speed * (1.0 + rng.random_range(-jit..=jit));
    let angle = class.angle + rng.random_range(-class.angle_jitter..=class.angle_jitter);
    let vx = speed * angle.cos();
    let vy = speed * angle.sin();
    let duration_s = spec.window_us as f64 / 1e6;
    let margin = class.radius + 1.0;
    let x_span = vx * duration_s;
    let y_span = vy * duration_s;
    let x0 = spawn_coord(
        rng,
        margin - x_span.min(0.0),
        (f64::from(spec.width) - 1.0 - margin) - x_span.max(0.0),
    );
    let y0 = spawn_coord(
        rng,
        margin - y_span.min(0.0),
        (f64::from(spec.height) - 1.0 - margin) - y_span.max(0.0),
    );
    ObjectSpec {
        x0,
        y0,
        vx,
        vy,
        radius: class.radius,
        rate: class.rate,
    }
}

/// Scene for window `index` of class `label`; deterministic in
/// `(base_seed, index)`.
pub fn window_scene(spec: &DatasetSpec, label: usize, base_seed: u64, index: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::scene(base_seed, index));
    let class = &spec.classes[label];
    let objects = (0..class.objects)
        .map(|_| draw_object(&mut rng, class, spec))
        .collect();
    SceneSpec {
        width: spec.width,
        height: spec.height,
        duration_s: spec.window_us as f64 / 1e6,
        noise_rate: spec.noise_rate,
        seed: rng.random(),
        objects,
    }
}

pub struct SplitSummary {
    pub split: &'static str,
    pub windows: usize,
    pub events: usize,
}

/// Writes the full dataset directory. Window seeds are consumed in a
/// single global sequence across splits and classes, so per-window
/// content is independent of how the counts are partitioned.
pub fn generate(spec: &DatasetSpec, out_dir: &Path, base_seed: u64) -> CliResult<Vec<SplitSummary>> {
    spec.validate()?;
    let mut summaries = Vec::new();
    let mut index = 0u64;
    for split in SPLITS {
        let per_class = match split {
            "train" => spec.train_per_class,
            _ => spec.test_per_class,
        };
        let split_dir = out_dir.join(split);
        let windows_dir = split_dir.join("windows");
        fs::create_dir_all(&windows_dir)?;
        let mut labels = BufWriter::new(fs::File::create(split_dir.join("labels.csv"))?);
        writeln!(labels, "file,label")?;
        let mut total_events = 0usize;
        let mut windows = 0usize;
        for _ in 0..per_class {
            for (label, _) in spec.classes.iter().enumerate() {
                let scene = window_scene(spec, label, base_seed, index);
                let (events, event_labels) = synthesize_scene_labeled(&scene)
                    .map_err(|e| CliError::data(e.to_string()))?;
                let name = format!("{index:05}.csv");
                let mut file = BufWriter::new(fs::File::create(windows_dir.join(&name))?);
                event::write_events_csv(&mut file, &events)
                    .map_err(|e| CliError::data(e.to_string()))?;
                file.flush()?;
                let mut sidecar =
                    BufWriter::new(fs::File::create(windows_dir.join(format!("{:05}.labels.csv", index)))?);
                for l in &event_labels {
                    writeln!(sidecar, "{l}")?;
                }
                sidecar.flush()?;
                writeln!(labels, "windows/{name},{label}")?;
                total_events += events.len();
                windows += 1;
                index += 1;
            }
        }
        labels.flush()?;
        summaries.push(SplitSummary {
            split,
            windows,
            events: total_events,
        });
    }
    let meta = DatasetMeta {
        version: DATASET_VERSION,
        width: spec.width,
        height: spec.height,
        window_us: spec.window_us,
        classes: spec.classes.iter().map(|c| c.name.clone()).collect(),
    };
    meta.write(out_dir)?;
    Ok(summaries)
}

/// One labelled window loaded back from disk.
pub struct LoadedWindow {
    pub window: EventWindow,
    pub label: usize,
}

/// Reads a split in `labels.csv` order.
pub fn load_split(dir: &Path, split: &str, meta: &DatasetMeta) -> CliResult<Vec<LoadedWindow>> {
    let split_dir = dir.join(split);
    let labels_path = split_dir.join("labels.csv");
    let text = fs::read_to_string(&labels_path)
        .map_err(|e| CliError::data(format!("{}: {e}", labels_path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "file,label" {
                return Err(CliError::data(format!(
                    "{}: expected header 'file,label'",
                    labels_path.display()
                )));
            }
            continue;
        }
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        let (file, label) = row.split_once(',').ok_or_else(|| {
            CliError::data(format!("{}:{}: expected 'file,label'", labels_path.display(), lineno + 1))
        })?;
        let label: usize = label.trim().parse().map_err(|_| {
            CliError::data(format!("{}:{}: bad label '{label}'", labels_path.display(), lineno + 1))
        })?;
        if label >= meta.classes.len() {
            return Err(CliError::data(format!(
                "{}:{}: label {label} out of range for {} classes",
                labels_path.display(),
                lineno + 1,
                meta.classes.len()
            )));
        }
        let path = split_dir.join(file.trim());
        let reader = BufReader::new(
            fs::File::open(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
        );
        let events = event::parse_events_csv(reader, PolarityEncoding::SignedUnit)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let t_end = events
            .last()
            .map(|ev| ev.t + 1)
            .unwrap_or(meta.window_us)
            .max(meta.window_us);
        out.push(LoadedWindow {
            window: EventWindow {
                t_start: 0,
                t_end,
                sensor: meta.sensor(),
                events,
            },
            label,
        });
    }
    Ok(out)
}
