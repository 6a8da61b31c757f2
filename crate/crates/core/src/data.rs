//! Event and dataset types, on-disk formats, and stratified splitting.
//!
//! On disk an event is a CSV file with the header `timestamp_s,angle_deg`
//! and one row per sample. A manifest is a JSON array of
//! `{"path", "label", "event_id"}` objects; relative paths resolve against
//! the manifest's directory. Values are written with 17 significant digits
//! so a save/load cycle is bit-exact.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::NUM_CLASSES;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;
pub const CSV_HEADER: &str = "timestamp_s,angle_deg";

/// Disturbance class. The discriminant is the class index used by every
/// classifier and in one-hot vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    GenerationTrip = 0,
    LoadShedding = 1,
    Oscillation = 2,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] =
        [Label::GenerationTrip, Label::LoadShedding, Label::Oscillation];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::GenerationTrip => "generation_trip",
            Label::LoadShedding => "load_shedding",
            Label::Oscillation => "oscillation",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// One labeled angle series (degrees) sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesEvent {
    event_id: String,
    label: Label,
    sample_rate_hz: f64,
    samples: Vec<f64>,
}

impl TimeSeriesEvent {
    pub fn new(
        event_id: impl Into<String>,
        label: Label,
        sample_rate_hz: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let event_id = event_id.into();
        let invalid = |message: String| Error::InvalidEvent {
            id: event_id.clone(),
            message,
        };
        if samples.is_empty() {
            return Err(invalid("no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            event_id,
            label,
            sample_rate_hz,
            samples,
        })
    }

    pub fn event_id(&self) -> &str {
        &self.event_id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Keep the first `floor(seconds * rate)` samples.
pub fn truncate_window(event: &TimeSeriesEvent, seconds: f64) -> Result<TimeSeriesEvent> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window length {seconds} s must be positive"
        )));
    }
    let exact = seconds * event.sample_rate_hz;
    // 30 s * 10 Hz must give 300 even when the product lands a few ulps low.
    let requested = (exact + 1e-9 * exact.max(1.0)).floor() as usize;
    if requested > event.len() {
        return Err(Error::WindowTooLong {
            requested,
            available: event.len(),
        });
    }
    if requested == 0 {
        return Err(Error::InvalidArgument(format!(
            "window of {seconds} s holds no samples at {} Hz",
            event.sample_rate_hz
        )));
    }
    TimeSeriesEvent::new(
        event.event_id.clone(),
        event.label,
        event.sample_rate_hz,
        event.samples[..requested].to_vec(),
    )
}

/// A set of events with unique ids and a per-class tally.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    events: Vec<TimeSeriesEvent>,
    class_counts: BTreeMap<Label, usize>,
}

impl Dataset {
    pub fn new(events: Vec<TimeSeriesEvent>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(events.len());
        for e in &events {
            if !seen.insert(e.event_id.as_str()) {
                return Err(Error::DuplicateEventId(e.event_id.clone()));
            }
        }
        let class_counts = count_labels(events.iter().map(|e| e.label));
        Ok(Self {
            events,
            class_counts,
        })
    }

    pub fn events(&self) -> &[TimeSeriesEvent] {
        &self.events
    }

    /// Count per label; labels with no events are present with count 0.
    pub fn class_counts(&self) -> &BTreeMap<Label, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.event_id.as_str())
    }
}

fn count_labels(labels: impl Iterator<Item = Label>) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub fraction: f64,
    pub seed: u64,
}

/// Number of training events drawn from a class of `count` events.
pub fn train_count(fraction: f64, count: usize) -> usize {
    let exact = fraction * count as f64;
    // 2/3 * 87 evaluates to 57.999..., which must still floor to 58.
    let n = (exact + 1e-9).floor() as usize;
    n.min(count)
}

/// Per-class seeded shuffle; the first `floor(fraction * count)` events of
/// each class go to train, the rest to test. Both partitions keep the
/// original event order.
pub fn stratified_split(data: &Dataset, fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    for (&label, &count) in &data.class_counts {
        if count < 2 {
            return Err(Error::EmptyClass {
                label: label.to_string(),
                count,
                required: 2,
            });
        }
    }

    let mut in_train = vec![false; data.len()];
    for label in Label::ALL {
        let mut members: Vec<usize> = data
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect();
        let mut rng = rng::stream(seed, Purpose::Split, label.index() as u64);
        members.shuffle(&mut rng);
        for &i in &members[..train_count(fraction, members.len())] {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = data
        .events
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok(SplitResult {
        train: Dataset::new(train.into_iter().map(|(e, _)| e).collect())?,
        test: Dataset::new(test.into_iter().map(|(e, _)| e).collect())?,
        fraction,
        seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    path: String,
    label: String,
    event_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_rate_hz: Option<f64>,
}

/// Load every event referenced by a JSON manifest.
pub fn load_events(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: manifest_path.to_path_buf(),
            message: e.to_string(),
        })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut events = Vec::with_capacity(entries.len());
    for entry in entries {
        let label: Label = entry.label.parse()?;
        let csv_path = base.join(&entry.path);
        let (timestamps, samples) = read_event_csv(&csv_path)?;
        let rate = entry
            .sample_rate_hz
            .unwrap_or_else(|| infer_sample_rate(&timestamps));
        events.push(TimeSeriesEvent::new(entry.event_id, label, rate, samples)?);
    }
    Dataset::new(events)
}

fn infer_sample_rate(timestamps: &[f64]) -> f64 {
    let n = timestamps.len();
    if n < 2 {
        return DEFAULT_SAMPLE_RATE_HZ;
    }
    let span = timestamps[n - 1] - timestamps[0];
    if !(span > 0.0) {
        return DEFAULT_SAMPLE_RATE_HZ;
    }
    let rate = (n - 1) as f64 / span;
    let nearest = rate.round();
    if nearest > 0.0 && (rate - nearest).abs() <= 1e-9 * nearest {
        nearest
    } else {
        rate
    }
}

/// Parse an event CSV into (timestamps, angles).
pub fn read_event_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => return Err(malformed(1, format!("expected header `{CSV_HEADER}`, got `{h}`"))),
        None => return Err(malformed(1, "empty file".into())),
    }

    let mut timestamps = Vec::new();
    let mut angles = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (Some(t), Some(a), None) = (cells.next(), cells.next(), cells.next()) else {
            return Err(malformed(lineno, format!("expected 2 columns in `{line}`")));
        };
        let parse = |cell: &str, what: &str| -> Result<f64> {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(lineno, format!("non-numeric {what} `{}`", cell.trim()))),
            }
        };
        timestamps.push(parse(t, "timestamp")?);
        angles.push(parse(a, "angle")?);
    }
    if angles.is_empty() {
        return Err(malformed(1, "no sample rows".into()));
    }
    Ok((timestamps, angles))
}

pub fn write_event_csv(event: &TimeSeriesEvent, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(48 * (event.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, v) in event.samples.iter().enumerate() {
        let t = i as f64 / event.sample_rate_hz;
        out.push_str(&format!("{t:.16e},{v:.16e}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write one CSV per event under `dir/events/` plus `dir/manifest.json`.
/// Returns the manifest path.
pub fn save_events(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    let events_dir = dir.join("events");
    fs::create_dir_all(&events_dir).map_err(|e| Error::io(&events_dir, e))?;
    let mut entries = Vec::with_capacity(data.len());
    for event in &data.events {
        let rel = format!("events/{}.csv", event.event_id);
        write_event_csv(event, &dir.join(&rel))?;
        entries.push(ManifestEntry {
            path: rel,
            label: event.label.as_str().to_string(),
            event_id: event.event_id.clone(),
            sample_rate_hz: (event.sample_rate_hz != DEFAULT_SAMPLE_RATE_HZ)
                .then_some(event.sample_rate_hz),
        });
    }
    let manifest = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&entries)?;
    fs::write(&manifest, json + "\n").map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}
