//! On-disk dataset layout and the labeled synthetic dataset builder.
//!
//! A dataset directory is flat:
//!
//! ```text
//! ds/
//!   000000.bin ...   binary event records, raw microseconds
//!   labels.json      {"000000": 2, ...}
//!   geometry.json    {"width": 32, "height": 32}
//!   flags.json       poisoned sets only: mode, target, trigger spec,
//!                    flagged ids, and the pre-relabel ("original") labels
//! ```

use crate::event::codec::{parse_bin, write_bin, CodecError};
use crate::event::{
    synthesize, EventError, EventStream, SceneConfig, SensorGeometry, ShapeKind, ShapeSpec,
};
use crate::train::PoisonMode;
use crate::trigger::TriggerSpec;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Codec { path: PathBuf, source: CodecError },
    #[error(transparent)]
    Event(#[from] EventError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One stored sample: id, raw-microsecond stream, class label.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    pub stream: EventStream,
    pub label: usize,
}

/// Poisoning metadata sidecar (`flags.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoisonFlags {
    pub mode: PoisonMode,
    pub target: usize,
    pub spec: TriggerSpec,
    /// Ids whose streams/labels were poisoned.
    pub flagged: Vec<String>,
    /// Labels before relabeling, for every flagged id.
    pub original_labels: BTreeMap<String, usize>,
}

/// Write bytes via a temp file and an atomic rename, so interrupted runs
/// leave no partially written artifacts.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

/// Save items (raw-microsecond streams) plus `labels.json` and
/// `geometry.json` into `dir`, creating it if needed.
pub fn save_dataset(
    dir: &Path,
    items: &[DatasetItem],
    geometry: SensorGeometry,
) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut labels = BTreeMap::new();
    for item in items {
        let path = dir.join(format!("{}.bin", item.id));
        let bytes = write_bin(&item.stream).map_err(|source| DatasetError::Codec {
            path: path.clone(),
            source,
        })?;
        atomic_write(&path, &bytes)?;
        labels.insert(item.id.clone(), item.label);
    }
    write_json(&dir.join("labels.json"), &labels)?;
    write_json(&dir.join("geometry.json"), &geometry)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load a dataset directory; items come back sorted by id.
pub fn load_dataset(dir: &Path) -> Result<(Vec<DatasetItem>, SensorGeometry), DatasetError> {
    let labels: BTreeMap<String, usize> = read_json(&dir.join("labels.json"))?;
    let geometry: SensorGeometry = read_json(&dir.join("geometry.json"))?;
    let mut items = Vec::with_capacity(labels.len());
    for (id, label) in labels {
        let path = dir.join(format!("{id}.bin"));
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let stream = parse_bin(&bytes, Some(geometry)).map_err(|source| DatasetError::Codec {
            path: path.clone(),
            source,
        })?;
        items.push(DatasetItem { id, stream, label });
    }
    Ok((items, geometry))
}

pub fn load_flags(dir: &Path) -> Result<Option<PoisonFlags>, DatasetError> {
    let path = dir.join("flags.json");
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(read_json(&path)?))
}

fn default_classes() -> Vec<ShapeKind> {
    ShapeKind::ALL.to_vec()
}

fn default_size_range() -> (u16, u16) {
    (9, 12)
}

fn default_speed_range() -> (f64, f64) {
    (0.8, 1.2)
}

fn default_start_jitter() -> f64 {
    2.0
}

fn default_directions() -> Vec<f64> {
    vec![0.0]
}

fn default_direction_jitter_deg() -> f64 {
    10.0
}

/// Configuration for generating a labeled synthetic dataset (the `synth`
/// command's `scene.json`). Scene `i` gets class `i % classes.len()` with a
/// randomized size, direction, speed, and start position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthDatasetConfig {
    pub width: u16,
    pub height: u16,
    pub frames: u32,
    pub sigma: f64,
    #[serde(default = "crate::event::synth::default_noise_rate_field")]
    pub noise_rate: f64,
    pub count: usize,
    #[serde(default = "default_classes")]
    pub classes: Vec<ShapeKind>,
    #[serde(default = "default_size_range")]
    pub size_range: (u16, u16),
    #[serde(default = "default_speed_range")]
    pub speed_range: (f64, f64),
    /// Shapes start centered, displaced uniformly by at most this many
    /// pixels per axis. Small values keep the task learnable by a dense
    /// classifier; large values approach position-free placement.
    #[serde(default = "default_start_jitter")]
    pub start_jitter: f64,
    /// Candidate motion directions in degrees; one is drawn per scene.
    #[serde(default = "default_directions")]
    pub directions: Vec<f64>,
    /// Uniform jitter applied to the drawn direction.
    #[serde(default = "default_direction_jitter_deg")]
    pub direction_jitter_deg: f64,
}

impl SynthDatasetConfig {
    pub fn desk_default(count: usize) -> Self {
        SynthDatasetConfig {
            width: 32,
            height: 32,
            frames: 15,
            sigma: 0.4,
            noise_rate: 0.001,
            count,
            classes: default_classes(),
            size_range: default_size_range(),
            speed_range: default_speed_range(),
            start_jitter: default_start_jitter(),
            directions: default_directions(),
            direction_jitter_deg: default_direction_jitter_deg(),
        }
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if self.classes.is_empty() {
            return Err(EventError::ConfigInvalid("classes must be nonempty".into()));
        }
        if self.size_range.0 < 1 || self.size_range.0 > self.size_range.1 {
            return Err(EventError::ConfigInvalid("bad size_range".into()));
        }
        if !self.speed_range.0.is_finite()
            || self.speed_range.0 <= 0.0
            || self.speed_range.0 > self.speed_range.1
        {
            return Err(EventError::ConfigInvalid("bad speed_range".into()));
        }
        if self.directions.is_empty() {
            return Err(EventError::ConfigInvalid("directions must be nonempty".into()));
        }
        Ok(())
    }
}

/// Generate `count` labeled normalized streams. The label is the class's
/// position in `classes`. Deterministic given the seed.
pub fn synth_dataset(
    cfg: &SynthDatasetConfig,
    seed: u64,
) -> Result<Vec<(EventStream, usize)>, EventError> {
    cfg.validate()?;
    let geometry = SensorGeometry::new(cfg.width, cfg.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let class = i % cfg.classes.len();
        let kind = cfg.classes[class];
        let size = rng.random_range(cfg.size_range.0..=cfg.size_range.1);
        let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
        let base = cfg.directions[rng.random_range(0..cfg.directions.len())];
        let j = cfg.direction_jitter_deg;
        let angle = (base + rng.random_range(-j..=j)).to_radians();
        let j = cfg.start_jitter;
        let start = (
            cfg.width as f64 / 2.0 + rng.random_range(-j..=j),
            cfg.height as f64 / 2.0 + rng.random_range(-j..=j),
        );
        let scene = SceneConfig {
            geometry,
            shapes: vec![ShapeSpec {
                kind,
                size,
                velocity: (speed * angle.cos(), speed * angle.sin()),
                start,
            }],
            frames: cfg.frames,
            sigma: cfg.sigma,
            noise_rate: cfg.noise_rate,
            seed: rng.next_u64(),
        };
        let (stream, _) = synthesize(&scene)?;
        out.push((stream, class));
    }
    Ok(out)
}

/// Seeded 60/20/20 split of `0..n` into (train, val, test) index sets.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = n * 60 / 100;
    let n_val = n * 20 / 100;
    let train = order[..n_train].to_vec();
    let val = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..].to_vec();
    (train, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::TimeDomain;

    #[test]
    fn synth_dataset_is_deterministic_and_labeled() {
        let cfg = SynthDatasetConfig::desk_default(12);
        let a = synth_dataset(&cfg, 5).unwrap();
        let b = synth_dataset(&cfg, 5).unwrap();
        assert_eq!(a, b);
        for (i, (stream, label)) in a.iter().enumerate() {
            assert_eq!(*label, i % 4);
            assert!(!stream.is_empty());
            assert!(stream.validate().is_empty());
        }
    }

    #[test]
    fn desk_default_streams_have_a_few_hundred_events() {
        let cfg = SynthDatasetConfig::desk_default(16);
        let items = synth_dataset(&cfg, 1).unwrap();
        let mean = items.iter().map(|(s, _)| s.len()).sum::<usize>() as f64 / 16.0;
        assert!(
            (100.0..600.0).contains(&mean),
            "mean events per stream {mean}"
        );
    }

    #[test]
    fn save_load_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = SynthDatasetConfig::desk_default(6);
        let items: Vec<DatasetItem> = synth_dataset(&cfg, 2)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, (stream, label))| DatasetItem {
                id: sample_id(i),
                stream: stream
                    .denormalize_time((cfg.frames - 1) * 1000)
                    .unwrap(),
                label,
            })
            .collect();
        let geometry = items[0].stream.geometry;
        save_dataset(tmp.path(), &items, geometry).unwrap();
        let (back, geo) = load_dataset(tmp.path()).unwrap();
        assert_eq!(geo, geometry);
        assert_eq!(back.len(), items.len());
        for (a, b) in items.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            assert_eq!(a.stream.events, b.stream.events);
            assert_eq!(b.stream.time_domain, TimeDomain::RawMicroseconds);
        }
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let (tr, va, te) = split_indices(100, 9);
        assert_eq!((tr.len(), va.len(), te.len()), (60, 20, 20));
        let again = split_indices(100, 9);
        assert_eq!((tr.clone(), va.clone(), te.clone()), again);
        let mut all: Vec<usize> = tr.into_iter().chain(va).chain(te).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
