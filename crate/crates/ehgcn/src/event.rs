//! Event-camera primitives: the event type, fixed-width time windows, and
//! a seeded synthetic scene generator.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label attached to generator noise events (objects are labelled 0, 1, ...).
pub const NOISE_LABEL: i32 = -1;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("event at ({x}, {y}) outside {width}x{height} sensor")]
    OutOfBounds {
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("window length must be positive")]
    ZeroWindow,
    #[error("scene spec: {0}")]
    Scene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How polarity is encoded in an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityEncoding {
    /// `p` is -1 or +1. A literal 0 is rejected rather than remapped.
    SignedUnit,
    /// `p` is 0 or 1; 0 maps to -1 and 1 to +1 on ingest.
    ZeroOne,
}

/// A single camera event.
///
/// Ordering is lexicographic on `(t, x, y, p)` so streams sort
/// deterministically even when timestamps collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Pixel column.
    pub x: u16,
    /// Pixel row.
    pub y: u16,
    /// Timestamp in microseconds.
    pub t: u64,
    /// Polarity, -1 or +1.
    pub p: i8,
}

impl Event {
    fn key(&self) -> (u64, u16, u16, i8) {
        (self.t, self.x, self.y, self.p)
    }

    pub fn polarity_f64(&self) -> f64 {
        f64::from(self.p)
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Sensor pixel dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Self {
        Self { width, height }
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width).hypot(f64::from(self.height))
    }

    fn contains(&self, ev: &Event) -> bool {
        ev.x < self.width && ev.y < self.height
    }
}

/// Events falling in one half-open time interval `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventWindow {
    pub t_start: u64,
    pub t_end: u64,
    pub sensor: SensorGeometry,
    /// Events in `(t, x, y, p)` order.
    pub events: Vec<Event>,
}

impl EventWindow {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_us(&self) -> u64 {
        self.t_end - self.t_start
    }
}

fn parse_field<T: std::str::FromStr>(
    raw: Option<&str>,
    name: &str,
    line: usize,
) -> Result<T, EventError> {
    let raw = raw.ok_or_else(|| EventError::Parse {
        line,
        msg: format!("missing {name} field"),
    })?;
    raw.trim().parse().map_err(|_| EventError::Parse {
        line,
        msg: format!("invalid {name} field {raw:?}"),
    })
}

fn decode_polarity(p: i64, encoding: PolarityEncoding, line: usize) -> Result<i8, EventError> {
    match (encoding, p) {
        (PolarityEncoding::SignedUnit, -1) => Ok(-1),
        (PolarityEncoding::SignedUnit, 1) => Ok(1),
        (PolarityEncoding::ZeroOne, 0) => Ok(-1),
        (PolarityEncoding::ZeroOne, 1) => Ok(1),
        _ => Err(EventError::Parse {
            line,
            msg: format!("polarity {p} not valid for {encoding:?} encoding"),
        }),
    }
}

fn narrow_u16(value: u64, name: &str, line: usize) -> Result<u16, EventError> {
    u16::try_from(value).map_err(|_| EventError::Parse {
        line,
        msg: format!("{name} value {value} exceeds u16 range"),
    })
}

/// Parses `x,y,t,p` CSV rows (no header, one event per line). Blank lines
/// are skipped. The result is sorted by `(t, x, y, p)`.
pub fn parse_events_csv<R: BufRead>(
    reader: R,
    encoding: PolarityEncoding,
) -> Result<Vec<Event>, EventError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut parts = row.split(',');
        let x: u64 = parse_field(parts.next(), "x", lineno)?;
        let y: u64 = parse_field(parts.next(), "y", lineno)?;
        let t: u64 = parse_field(parts.next(), "t", lineno)?;
        let p: i64 = parse_field(parts.next(), "p", lineno)?;
        if parts.next().is_some() {
            return Err(EventError::Parse {
                line: lineno,
                msg: "expected exactly 4 comma-separated fields".into(),
            });
        }
        events.push(Event {
            x: narrow_u16(x, "x", lineno)?,
            y: narrow_u16(y, "y", lineno)?,
            t,
            p: decode_polarity(p, encoding, lineno)?,
        });
    }
    events.sort_unstable();
    Ok(events)
}

#[derive(Deserialize)]
struct RawEvent {
    x: u64,
    y: u64,
    t: u64,
    p: i64,
}

/// Parses one JSON object per line with fields `x`, `y`, `t`, `p`.
pub fn parse_events_jsonl<R: BufRead>(
    reader: R,
    encoding: PolarityEncoding,
) -> Result<Vec<Event>, EventError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let row = line.trim();
        if row.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let raw: RawEvent = serde_json::from_str(row).map_err(|e| EventError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        events.push(Event {
            x: narrow_u16(raw.x, "x", lineno)?,
            y: narrow_u16(raw.y, "y", lineno)?,
            t: raw.t,
            p: decode_polarity(raw.p, encoding, lineno)?,
        });
    }
    events.sort_unstable();
    Ok(events)
}

/// Writes `x,y,t,p` CSV rows with `\n` line endings.
pub fn write_events_csv<W: Write>(writer: &mut W, events: &[Event]) -> Result<(), EventError> {
    for ev in events {
        writeln!(writer, "{},{},{},{}", ev.x, ev.y, ev.t, ev.p)?;
    }
    Ok(())
}

/// Tiles an event stream into consecutive `[t0 + i*len, t0 + (i+1)*len)`
/// windows starting at the earliest timestamp. Interior windows with no
/// events are kept so window indices map linearly onto time.
pub fn window_stream(
    events: &[Event],
    window_us: u64,
    sensor: SensorGeometry,
) -> Result<Vec<EventWindow>, EventError> {
    if window_us == 0 {
        return Err(EventError::ZeroWindow);
    }
    for ev in events {
        if !sensor.contains(ev) {
            return Err(EventError::OutOfBounds {
                x: ev.x,
                y: ev.y,
                width: sensor.width,
                height: sensor.height,
            });
        }
    }
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted = events.to_vec();
    sorted.sort_unstable();
    let t0 = sorted[0].t;
    let span = sorted[sorted.len() - 1].t - t0;
    let count = (span / window_us + 1) as usize;
    let mut windows: Vec<EventWindow> = (0..count)
        .map(|i| EventWindow {
            t_start: t0 + i as u64 * window_us,
            t_end: t0 + (i as u64 + 1) * window_us,
            sensor,
            events: Vec::new(),
        })
        .collect();
    for ev in sorted {
        let idx = ((ev.t - t0) / window_us) as usize;
        windows[idx].events.push(ev);
    }
    Ok(windows)
}

/// One moving emitter in a synthetic scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// Start position of the shape centre, pixels.
    pub x0: f64,
    pub y0: f64,
    /// Velocity, pixels per second.
    pub vx: f64,
    pub vy: f64,
    /// Shape radius, pixels; events scatter uniformly inside it.
    pub radius: f64,
    /// Mean emission rate, events per second.
    pub rate: f64,
}

/// Declarative synthetic scene: moving emitters over uniform noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u16,
    pub height: u16,
    /// Scene length in seconds.
    pub duration_s: f64,
    /// Uniform background noise over the whole sensor, events per second.
    #[serde(default)]
    pub noise_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, EventError> {
        let spec: SceneSpec =
            toml::from_str(text).map_err(|e| EventError::Scene(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EventError> {
        let fail = |msg: String| Err(EventError::Scene(msg));
        if self.width == 0 || self.height == 0 {
            return fail("sensor dimensions must be at least 1x1".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0 && self.duration_s <= 3600.0) {
            return fail(format!("duration_s {} out of (0, 3600]", self.duration_s));
        }
        if !(self.noise_rate.is_finite() && (0.0..=1e7).contains(&self.noise_rate)) {
            return fail(format!("noise_rate {} out of [0, 1e7]", self.noise_rate));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            let finite = obj.x0.is_finite()
                && obj.y0.is_finite()
                && obj.vx.is_finite()
                && obj.vy.is_finite();
            if !finite {
                return fail(format!("object {i}: non-finite position or velocity"));
            }
            if !(obj.radius.is_finite() && obj.radius >= 0.0) {
                return fail(format!("object {i}: radius {} invalid", obj.radius));
            }
            if !(obj.rate.is_finite() && (0.0..=1e7).contains(&obj.rate)) {
                return fail(format!("object {i}: rate {} out of [0, 1e7]", obj.rate));
            }
        }
        Ok(())
    }

    pub fn sensor(&self) -> SensorGeometry {
        SensorGeometry::new(self.width, self.height)
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("validated rate");
    dist.sample(rng) as u64
}

/// Generates a labelled event stream: per-event emitter index, or
/// [`NOISE_LABEL`] for background noise. Events landing outside the sensor
/// are discarded. Output is sorted by `(t, x, y, p)` with labels kept
/// aligned; identical events order by label.
pub fn synthesize_scene_labeled(spec: &SceneSpec) -> Result<(Vec<Event>, Vec<i32>), EventError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let duration_us = (spec.duration_s * 1e6).round().max(1.0) as u64;
    let mut tagged: Vec<(Event, i32)> = Vec::new();

    for (oi, obj) in spec.objects.iter().enumerate() {
        let count = poisson_count(&mut rng, obj.rate * spec.duration_s);
        for _ in 0..count {
            let t = rng.random_range(0..duration_us);
            let t_s = t as f64 / 1e6;
            let cx = obj.x0 + obj.vx * t_s;
            let cy = obj.y0 + obj.vy * t_s;
            let r = obj.radius * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let px = (cx + r * theta.cos()).round();
            let py = (cy + r * theta.sin()).round();
            let p = if rng.random::<bool>() { 1 } else { -1 };
            if px < 0.0 || py < 0.0 || px >= f64::from(spec.width) || py >= f64::from(spec.height)
            {
                continue;
            }
            let ev = Event {
                x: px as u16,
                y: py as u16,
                t,
                p,
            };
            tagged.push((ev, oi as i32));
        }
    }

    let noise_count = poisson_count(&mut rng, spec.noise_rate * spec.duration_s);
    for _ in 0..noise_count {
        let ev = Event {
            x: rng.random_range(0..spec.width),
            y: rng.random_range(0..spec.height),
            t: rng.random_range(0..duration_us),
            p: if rng.random::<bool>() { 1 } else { -1 },
        };
        tagged.push((ev, NOISE_LABEL));
    }

    tagged.sort_unstable_by(|a, b| a.0.key().cmp(&b.0.key()).then(a.1.cmp(&b.1)));
    Ok(tagged.into_iter().unzip())
}

/// [`synthesize_scene_labeled`] without the label channel.
pub fn synthesize_scene(spec: &SceneSpec) -> Result<Vec<Event>, EventError> {
    Ok(synthesize_scene_labeled(spec)?.0)
}
