//! Implementations behind the `evpoison` binary's subcommands. The binary
//! itself only parses flags and dispatches here.
//!
//! Conventions shared by every command: exit 0 on success, 1 on runtime
//! failure, 2 on usage/config errors (the binary maps [`CliError`] variants
//! to codes); outputs are written via temp-file-plus-rename; every output
//! directory gets a `manifest.json`; re-running a command with identical
//! inputs and seed reproduces identical bytes except for wall-clock fields
//! in manifests and `times.json`.

pub mod manifest;
pub mod svg;

use crate::dataset::{
    atomic_write, load_dataset, load_flags, read_json, sample_id, save_dataset, split_indices,
    synth_dataset, write_json, DatasetError, DatasetItem, PoisonFlags, SynthDatasetConfig,
};
use crate::eval::{
    asr_detailed, asr_patched, cda_detailed, psnr, ssim, stc_filter, MetricReport,
    PerSampleBreakdown, StcConfig,
};
use crate::event::codec::write_bin;
use crate::event::{EventStream, SensorGeometry, TimeDomain};
use crate::neural::ModelParams;
use crate::repr::dump::{read_dump, write_dump};
use crate::repr::{convert, ReprConfig, ReprMethod};
use crate::train::{build_poisoned_dataset, train_backdoor, PoisonMode, PoisonPolicy, TrainConfig};
use crate::trigger::{GeneratorParams, TriggerSpec};
use manifest::RunManifest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an invalid/missing config: exit code 2.
    Usage(String),
    /// Failure while doing the work: exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Read a JSON config file; parse problems are usage errors.
fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "config {} does not exist",
            path.display()
        )));
    }
    read_json(path).map_err(usage)
}

/// Worker count: `EVT_THREADS` if set, else the machine's parallelism.
pub fn num_threads() -> usize {
    std::env::var("EVT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Order-preserving parallel map over items with at most [`num_threads`]
/// workers.
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = num_threads().min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut out: Vec<Option<R>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest = out.as_mut_slice();
        for chunk_items in items.chunks(chunk) {
            let (head, tail) = rest.split_at_mut(chunk_items.len());
            rest = tail;
            scope.spawn(move || {
                for (slot, item) in head.iter_mut().zip(chunk_items) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    out.into_iter().map(|r| r.unwrap()).collect()
}

/// Normalized view of a raw stream plus the affine map back: raw `t` equals
/// `offset + t' * span`, rounded to whole microseconds.
struct RawMapping {
    offset: f64,
    span: f64,
}

fn normalize_raw(stream: &EventStream) -> Result<(EventStream, RawMapping), CliError> {
    if stream.is_empty() {
        return Ok((
            EventStream::empty(stream.geometry, TimeDomain::NormalizedUnit),
            RawMapping {
                offset: 0.0,
                span: 1_000_000.0,
            },
        ));
    }
    let t_min = stream.events.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
    let t_max = stream
        .events
        .iter()
        .map(|e| e.t)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = stream.normalize_time().map_err(runtime)?;
    let span = if t_max > t_min {
        t_max - t_min
    } else {
        1_000_000.0
    };
    Ok((
        norm,
        RawMapping {
            offset: t_min,
            span,
        },
    ))
}

fn to_raw(stream: &EventStream, mapping: &RawMapping) -> EventStream {
    let events = stream
        .events
        .iter()
        .map(|e| crate::event::Event {
            t: (mapping.offset + e.t * mapping.span).round(),
            ..*e
        })
        .collect();
    EventStream::new(events, stream.geometry, TimeDomain::RawMicroseconds)
}

fn normalized_set(items: &[DatasetItem]) -> Result<Vec<(EventStream, usize)>, CliError> {
    items
        .iter()
        .map(|item| Ok((normalize_raw(&item.stream)?.0, item.label)))
        .collect()
}

// ---------------------------------------------------------------- synth --

/// Generate a labeled synthetic dataset and split it 60/20/20 into
/// `train/`, `val/`, and `test/` under the output directory.
pub fn cmd_synth(config_path: &Path, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let cfg: SynthDatasetConfig = read_config(config_path)?;
    cfg.validate().map_err(usage)?;
    let items = synth_dataset(&cfg, seed).map_err(usage)?;
    let duration_us = (cfg.frames - 1) * 1000;
    let raw: Vec<DatasetItem> = items
        .into_iter()
        .enumerate()
        .map(|(i, (stream, label))| {
            Ok(DatasetItem {
                id: sample_id(i),
                stream: stream.denormalize_time(duration_us).map_err(runtime)?,
                label,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let geometry = SensorGeometry::new(cfg.width, cfg.height);
    let (train, val, test) = split_indices(raw.len(), seed);
    for (name, indices) in [("train", train), ("val", val), ("test", test)] {
        let subset: Vec<DatasetItem> = indices.iter().map(|&i| raw[i].clone()).collect();
        save_dataset(&out_dir.join(name), &subset, geometry)?;
    }
    RunManifest::new("synth", &cfg, Some(seed))
        .input(config_path)
        .output(out_dir)
        .finish(out_dir)?;
    Ok(())
}

// --------------------------------------------------------------- poison --

pub struct PoisonArgs {
    pub mode: String,
    pub spec: Option<PathBuf>,
    pub input: PathBuf,
    pub out: PathBuf,
    pub generator: Option<PathBuf>,
    pub rho: f64,
    pub target: usize,
    pub seed: u64,
}

/// Poison a seeded fraction of a dataset on disk. Flagged samples get the
/// trigger injected (stream bytes rewritten) and their label set to the
/// target; clean samples are copied byte-for-byte. `flags.json` records the
/// flagged ids and their original labels.
pub fn cmd_poison(args: &PoisonArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_str() {
        "immutable" => PoisonMode::Immutable,
        "mutable" => PoisonMode::Mutable,
        "patch" => PoisonMode::PatchBaseline,
        other => return Err(CliError::Usage(format!("unknown poison mode `{other}`"))),
    };
    let mut spec: TriggerSpec = match &args.spec {
        Some(path) => read_config(path)?,
        None => TriggerSpec::default(),
    };
    spec.mode = match mode {
        PoisonMode::Mutable => crate::trigger::TriggerMode::Mutable,
        _ => crate::trigger::TriggerMode::Immutable,
    };
    let generator = match (mode, &args.generator) {
        (PoisonMode::Mutable, Some(path)) => {
            let bytes = fs::read(path).map_err(runtime)?;
            Some(GeneratorParams::from_checkpoint(&bytes).map_err(usage)?)
        }
        (PoisonMode::Mutable, None) => {
            return Err(CliError::Usage(
                "--generator is required in mutable mode".into(),
            ))
        }
        _ => None,
    };
    let policy = PoisonPolicy {
        rho: args.rho,
        target: args.target,
        mode,
        spec,
        seed: args.seed,
    };

    let (items, geometry) = load_dataset(&args.input)?;
    let mut mappings = Vec::with_capacity(items.len());
    let mut normalized = Vec::with_capacity(items.len());
    for item in &items {
        let (norm, mapping) = normalize_raw(&item.stream)?;
        normalized.push((norm, item.label));
        mappings.push(mapping);
    }
    let poisoned = build_poisoned_dataset(&normalized, &policy, generator.as_ref())
        .map_err(|e| match e {
            crate::train::TrainError::ConfigInvalid(m) => CliError::Usage(m),
            other => runtime(other),
        })?;

    fs::create_dir_all(&args.out).map_err(runtime)?;
    let mut labels = BTreeMap::new();
    let mut flagged = Vec::new();
    let mut original_labels = BTreeMap::new();
    for ((item, sample), mapping) in items.iter().zip(&poisoned).zip(&mappings) {
        let dst = args.out.join(format!("{}.bin", item.id));
        if sample.poisoned {
            // patch-baseline streams are untouched by design; immutable and
            // mutable streams carry the injected trigger
            let raw = to_raw(&sample.stream, mapping);
            let bytes = write_bin(&raw).map_err(runtime)?;
            atomic_write(&dst, &bytes)?;
            flagged.push(item.id.clone());
            original_labels.insert(item.id.clone(), item.label);
        } else {
            let src = args.input.join(format!("{}.bin", item.id));
            let bytes = fs::read(&src).map_err(runtime)?;
            atomic_write(&dst, &bytes)?;
        }
        labels.insert(item.id.clone(), sample.label);
    }
    write_json(&args.out.join("labels.json"), &labels)?;
    write_json(&args.out.join("geometry.json"), &geometry)?;
    write_json(
        &args.out.join("flags.json"),
        &PoisonFlags {
            mode,
            target: args.target,
            spec: policy.spec,
            flagged,
            original_labels,
        },
    )?;
    RunManifest::new("poison", &policy, Some(args.seed))
        .input(&args.input)
        .output(&args.out)
        .finish(&args.out)?;
    Ok(())
}

// ------------------------------------------------------------ represent --

/// Convert every stream of a dataset into a representation dump (`.evtr`),
/// recording per-stream conversion wall time in `times.json`.
pub fn cmd_represent(
    method_name: &str,
    bins: usize,
    input: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let method = ReprMethod::parse(method_name)
        .ok_or_else(|| CliError::Usage(format!("unknown method `{method_name}`")))?;
    let cfg = ReprConfig::with_bins(bins);
    cfg.validate().map_err(usage)?;
    if !input.join("labels.json").exists() {
        eprintln!(
            "warning: {} has no labels.json; nothing to convert",
            input.display()
        );
        fs::create_dir_all(out_dir).map_err(runtime)?;
        write_json(&out_dir.join("times.json"), &BTreeMap::<String, f64>::new())?;
        RunManifest::new("represent", &cfg, None)
            .input(input)
            .output(out_dir)
            .finish(out_dir)?;
        return Ok(());
    }
    let (items, _) = load_dataset(input)?;
    let results = map_parallel(&items, |item| -> Result<(String, Vec<u8>, f64), CliError> {
        let started = Instant::now();
        let (norm, _) = normalize_raw(&item.stream)?;
        let rep = convert(&norm, method, &cfg).map_err(runtime)?;
        let bytes = write_dump(&rep).map_err(runtime)?;
        Ok((item.id.clone(), bytes, started.elapsed().as_secs_f64()))
    });
    fs::create_dir_all(out_dir).map_err(runtime)?;
    let mut times = BTreeMap::new();
    for result in results {
        let (id, bytes, secs) = result?;
        atomic_write(&out_dir.join(format!("{id}.evtr")), &bytes)?;
        times.insert(id, secs);
    }
    write_json(&out_dir.join("times.json"), &times)?;
    RunManifest::new("represent", &cfg, None)
        .input(input)
        .output(out_dir)
        .finish(out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------- train --

/// `train.json`: a [`TrainConfig`] plus the dataset directory to train on
/// (overridable with `--data`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainJob {
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(flatten)]
    pub config: TrainConfig,
}

/// Run the training loop and write `model.ckpt`, `generator.ckpt` (mutable
/// mode), `history.jsonl`, and the resolved `config.json`.
pub fn cmd_train(config_path: &Path, data: Option<&Path>, out_dir: &Path) -> Result<(), CliError> {
    let job: TrainJob = read_config(config_path)?;
    let data_dir = data
        .map(Path::to_path_buf)
        .or_else(|| job.data.clone())
        .ok_or_else(|| CliError::Usage("no dataset: pass --data or set `data` in the config".into()))?;
    let (items, _) = load_dataset(&data_dir)?;
    let dataset = normalized_set(&items)?;
    let output = train_backdoor(&dataset, &job.config).map_err(|e| match e {
        crate::train::TrainError::ConfigInvalid(m) => CliError::Usage(m),
        other => runtime(other),
    })?;
    fs::create_dir_all(out_dir).map_err(runtime)?;
    atomic_write(&out_dir.join("model.ckpt"), &output.model.to_checkpoint())?;
    if let Some(gen) = &output.generator {
        atomic_write(&out_dir.join("generator.ckpt"), &gen.to_checkpoint())?;
    }
    let mut history = String::new();
    for record in &output.history {
        history.push_str(&serde_json::to_string(record).map_err(runtime)?);
        history.push('\n');
    }
    atomic_write(&out_dir.join("history.jsonl"), history.as_bytes())?;
    write_json(&out_dir.join("config.json"), &job.config)?;
    RunManifest::new("train", &job.config, Some(job.config.seed))
        .input(&data_dir)
        .output(out_dir)
        .finish(out_dir)?;
    Ok(())
}

// ----------------------------------------------------------------- eval --

/// Evaluate a checkpoint: CDA over the clean set, ASR over the poisoned
/// set's flagged samples (true labels from `flags.json`), written as a
/// [`MetricReport`].
pub fn cmd_eval(
    ckpt_dir: &Path,
    clean_dir: &Path,
    poisoned_dir: &Path,
    target_flag: Option<usize>,
    out_path: &Path,
) -> Result<(), CliError> {
    let model_bytes = fs::read(ckpt_dir.join("model.ckpt")).map_err(runtime)?;
    let model = ModelParams::from_checkpoint(&model_bytes).map_err(runtime)?;
    let config: TrainConfig = read_config(&ckpt_dir.join("config.json"))?;
    let method = config.method;
    let repr_cfg = &config.repr;

    let (clean_items, _) = load_dataset(clean_dir)?;
    let clean_set = normalized_set(&clean_items)?;
    let (cda_value, clean_correct) =
        cda_detailed(&model, method, repr_cfg, &clean_set).map_err(runtime)?;

    let (poisoned_items, _) = load_dataset(poisoned_dir)?;
    let flags = load_flags(poisoned_dir)?;
    let (eval_items, target, patch_spec): (Vec<(EventStream, usize)>, usize, Option<TriggerSpec>) =
        match &flags {
            Some(flags) => {
                let mut subset = Vec::new();
                for item in &poisoned_items {
                    if let Some(orig) = flags.original_labels.get(&item.id) {
                        subset.push((normalize_raw(&item.stream)?.0, *orig));
                    }
                }
                let patch = (flags.mode == PoisonMode::PatchBaseline).then_some(flags.spec);
                (subset, target_flag.unwrap_or(flags.target), patch)
            }
            None => {
                let target = target_flag.ok_or_else(|| {
                    CliError::Usage(
                        "--target is required when the poisoned set has no flags.json".into(),
                    )
                })?;
                (normalized_set(&poisoned_items)?, target, None)
            }
        };
    let (asr_value, poisoned_hit) = match patch_spec {
        Some(spec) => {
            let v = asr_patched(&model, method, repr_cfg, &eval_items, &spec, target)
                .map_err(runtime)?;
            (v, Vec::new())
        }
        None => asr_detailed(&model, method, repr_cfg, &eval_items, target).map_err(runtime)?,
    };

    let report = MetricReport {
        cda: cda_value,
        asr: asr_value,
        psnr_db: None,
        ssim: None,
        n_clean: clean_set.len(),
        n_poisoned: eval_items.len(),
        target_class: target,
        per_sample: PerSampleBreakdown {
            clean_correct,
            poisoned_hit,
        },
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    write_json(out_path, &report)?;
    Ok(())
}

// --------------------------------------------------------------- filter --

/// Apply the STC denoiser to every stream, writing the surviving subset.
pub fn cmd_filter(
    algorithm: &str,
    input: &Path,
    out_dir: &Path,
    radius: u16,
    window: f64,
) -> Result<(), CliError> {
    if algorithm != "stc" {
        return Err(CliError::Usage(format!(
            "unknown filter `{algorithm}` (supported: stc)"
        )));
    }
    if radius < 1 || !window.is_finite() || window <= 0.0 {
        return Err(CliError::Usage("radius must be >= 1 and window > 0".into()));
    }
    let cfg = StcConfig { radius, window };
    let (items, geometry) = load_dataset(input)?;
    let filtered = map_parallel(&items, |item| -> Result<DatasetItem, CliError> {
        let (norm, _) = normalize_raw(&item.stream)?;
        let kept = stc_filter(&norm, &cfg);
        // map survivors back to their original raw events by position
        let mut raw_events = Vec::with_capacity(kept.len());
        let mut cursor = 0usize;
        for survivor in &kept.events {
            while norm.events[cursor] != *survivor {
                cursor += 1;
            }
            raw_events.push(item.stream.events[cursor]);
            cursor += 1;
        }
        Ok(DatasetItem {
            id: item.id.clone(),
            stream: EventStream::new(raw_events, item.stream.geometry, TimeDomain::RawMicroseconds),
            label: item.label,
        })
    });
    let filtered: Vec<DatasetItem> = filtered.into_iter().collect::<Result<_, _>>()?;
    save_dataset(out_dir, &filtered, geometry)?;
    if input.join("flags.json").exists() {
        let bytes = fs::read(input.join("flags.json")).map_err(runtime)?;
        atomic_write(&out_dir.join("flags.json"), &bytes)?;
    }
    RunManifest::new("filter", &cfg, None)
        .input(input)
        .output(out_dir)
        .finish(out_dir)?;
    Ok(())
}

// -------------------------------------------------------------- stealth --

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairStealth {
    pub id: String,
    /// Null means the pair is identical (infinite PSNR).
    pub psnr_db: Option<f64>,
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StealthReport {
    pub n_pairs: usize,
    /// Pairs with infinite PSNR (bit-identical after rendering).
    pub n_identical: usize,
    /// Mean over pairs with finite PSNR; null when every pair is identical.
    pub mean_psnr_db: Option<f64>,
    pub mean_ssim: f64,
    pub per_pair: Vec<PairStealth>,
}

/// PSNR/SSIM over paired representation dumps (matched by file name).
pub fn cmd_stealth(clean_dir: &Path, poisoned_dir: &Path, out_path: &Path) -> Result<(), CliError> {
    let mut ids: Vec<String> = fs::read_dir(clean_dir)
        .map_err(runtime)?
        .filter_map(|entry| {
            let name = entry.ok()?.file_name().into_string().ok()?;
            name.strip_suffix(".evtr").map(str::to_string)
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::Runtime(format!(
            "no .evtr dumps in {}",
            clean_dir.display()
        )));
    }
    let mut per_pair = Vec::with_capacity(ids.len());
    let mut psnr_sum = 0.0;
    let mut psnr_n = 0usize;
    let mut identical = 0usize;
    let mut ssim_sum = 0.0;
    for id in &ids {
        let a = read_dump(&fs::read(clean_dir.join(format!("{id}.evtr"))).map_err(runtime)?)
            .map_err(runtime)?;
        let b = read_dump(&fs::read(poisoned_dir.join(format!("{id}.evtr"))).map_err(runtime)?)
            .map_err(runtime)?;
        let p = psnr(&a, &b).map_err(runtime)?;
        let s = ssim(&a, &b).map_err(runtime)?;
        ssim_sum += s;
        if p.is_finite() {
            psnr_sum += p;
            psnr_n += 1;
        } else {
            identical += 1;
        }
        per_pair.push(PairStealth {
            id: id.clone(),
            psnr_db: p.is_finite().then_some(p),
            ssim: s,
        });
    }
    let report = StealthReport {
        n_pairs: ids.len(),
        n_identical: identical,
        mean_psnr_db: (psnr_n > 0).then(|| psnr_sum / psnr_n as f64),
        mean_ssim: ssim_sum / ids.len() as f64,
        per_pair,
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    write_json(out_path, &report)?;
    Ok(())
}

// --------------------------------------------------------------- report --

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyReport {
    Metric(MetricReport),
    Stealth(StealthReport),
}

/// Render CDA/ASR and PSNR bar charts across runs as SVG files. Inputs may
/// be evaluation reports or stealthiness reports.
pub fn cmd_report(inputs: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("pass at least one report with --in".into()));
    }
    let mut rate_groups = Vec::new();
    let mut psnr_groups = Vec::new();
    let mut max_psnr = 0.0f64;
    for path in inputs {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        let parsed: AnyReport = read_config(path)?;
        match parsed {
            AnyReport::Metric(m) => {
                rate_groups.push(svg::BarGroup {
                    label: label.clone(),
                    values: vec![Some(m.cda), Some(m.asr)],
                });
                if let Some(p) = m.psnr_db {
                    max_psnr = max_psnr.max(p);
                    psnr_groups.push(svg::BarGroup {
                        label,
                        values: vec![Some(p)],
                    });
                }
            }
            AnyReport::Stealth(s) => {
                if let Some(p) = s.mean_psnr_db {
                    max_psnr = max_psnr.max(p);
                    psnr_groups.push(svg::BarGroup {
                        label,
                        values: vec![Some(p)],
                    });
                }
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(runtime)?;
    let rates = svg::grouped_bar_chart("clean accuracy / attack success", &["cda", "asr"], &rate_groups, 1.0);
    atomic_write(&out_dir.join("cda_asr.svg"), rates.as_bytes())?;
    let y_max = if max_psnr > 0.0 { (max_psnr / 10.0).ceil() * 10.0 } else { 1.0 };
    let psnr_chart = svg::grouped_bar_chart("stealthiness (PSNR dB)", &["psnr"], &psnr_groups, y_max);
    atomic_write(&out_dir.join("psnr.svg"), psnr_chart.as_bytes())?;
    let input_names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    RunManifest::new("report", &input_names, None)
        .output(out_dir)
        .finish(out_dir)?;
    Ok(())
}
