//! Event-to-tensor conversions.
//!
//! Five classic image-like representations of an event stream, all computed
//! over a fixed normalized time window `[0, 1]` so that conversion is
//! additive over stream concatenation and injected events land in
//! predictable temporal bins:
//!
//! - event spike tensor (`est`): polarity-separated trilinear binning with a
//!   triangular temporal kernel, 2B channels;
//! - event frame (`event_frame`): sign of accumulated polarity, 1 channel;
//! - time surface (`time_surface`): exponentially decayed timestamp of the
//!   last event per pixel, 1 channel;
//! - voxel grid (`voxel_grid`): signed space-time histogram, B channels;
//! - `tencode`: RGB encoding of last-event polarity and age, 3 channels.
//!
//! All conversions require normalized streams and are deterministic.

pub mod dump;

use crate::event::{EventStream, TimeDomain};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReprMethod {
    Est,
    EventFrame,
    TimeSurface,
    VoxelGrid,
    Tencode,
}

impl ReprMethod {
    pub const ALL: [ReprMethod; 5] = [
        ReprMethod::Est,
        ReprMethod::EventFrame,
        ReprMethod::TimeSurface,
        ReprMethod::VoxelGrid,
        ReprMethod::Tencode,
    ];

    pub fn id(self) -> u8 {
        match self {
            ReprMethod::Est => 0,
            ReprMethod::EventFrame => 1,
            ReprMethod::TimeSurface => 2,
            ReprMethod::VoxelGrid => 3,
            ReprMethod::Tencode => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "est" => Some(ReprMethod::Est),
            "ef" | "event_frame" => Some(ReprMethod::EventFrame),
            "ts" | "time_surface" => Some(ReprMethod::TimeSurface),
            "vg" | "voxel_grid" => Some(ReprMethod::VoxelGrid),
            "tencode" => Some(ReprMethod::Tencode),
            _ => None,
        }
    }

    /// Channel count produced with `bins` temporal bins.
    pub fn channels(self, bins: usize) -> usize {
        match self {
            ReprMethod::Est => 2 * bins,
            ReprMethod::EventFrame | ReprMethod::TimeSurface => 1,
            ReprMethod::VoxelGrid => bins,
            ReprMethod::Tencode => 3,
        }
    }
}

/// What each event contributes to the spike tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    /// The event's (normalized) timestamp.
    #[default]
    Timestamp,
    /// Constant 1 per event.
    Count,
    /// |p| per event; the sign already lives in the polarity channel split,
    /// so for valid streams this coincides with `Count`.
    Polarity,
}

/// Conversion parameters. The temporal window is fixed to `[0, 1]` with
/// `t_0 = 0` and bin size `1 / bins`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReprConfig {
    pub bins: usize,
    /// Time-surface decay constant, in normalized time.
    pub tau: f64,
    /// Tencode temporal resolution, in normalized time.
    pub tencode_dt: f64,
    pub measurement: Measurement,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            bins: 4,
            tau: 0.3,
            tencode_dt: 1.0,
            measurement: Measurement::Timestamp,
        }
    }
}

impl ReprConfig {
    pub fn with_bins(bins: usize) -> Self {
        ReprConfig {
            bins,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReprError> {
        if self.bins < 1 {
            return Err(ReprError::InvalidConfig("bins must be >= 1".into()));
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(ReprError::InvalidConfig("tau must be > 0".into()));
        }
        if !self.tencode_dt.is_finite() || self.tencode_dt <= 0.0 || self.tencode_dt > 1.0 {
            return Err(ReprError::InvalidConfig("tencode_dt must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Dense `C x H x W` tensor, row-major `(c, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationTensor {
    pub data: Vec<f64>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub method: ReprMethod,
    /// Parameters the tensor was produced with.
    pub meta: ReprConfig,
}

impl RepresentationTensor {
    pub fn zeros(
        channels: usize,
        height: usize,
        width: usize,
        method: ReprMethod,
        meta: ReprConfig,
    ) -> Self {
        RepresentationTensor {
            data: vec![0.0; channels * height * width],
            channels,
            height,
            width,
            method,
            meta,
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReprError {
    #[error("stream must be in the normalized time domain")]
    WrongTimeDomain,
    #[error("operation requires a nonempty stream")]
    EmptyStream,
    #[error("invalid representation config: {0}")]
    InvalidConfig(String),
    #[error("dump io: {0}")]
    Dump(String),
}

fn check_normalized(stream: &EventStream) -> Result<(), ReprError> {
    if stream.time_domain != TimeDomain::NormalizedUnit {
        return Err(ReprError::WrongTimeDomain);
    }
    Ok(())
}

/// Convert with the given method; thin dispatcher over the five conversions.
pub fn convert(
    stream: &EventStream,
    method: ReprMethod,
    cfg: &ReprConfig,
) -> Result<RepresentationTensor, ReprError> {
    match method {
        ReprMethod::Est => est(stream, cfg),
        ReprMethod::EventFrame => event_frame(stream, cfg),
        ReprMethod::TimeSurface => time_surface(stream, cfg),
        ReprMethod::VoxelGrid => voxel_grid(stream, cfg),
        ReprMethod::Tencode => tencode(stream, cfg),
    }
}

/// Event spike tensor.
///
/// Per event, the measurement value is spread over the temporal bins with a
/// triangular kernel `max(0, 1 - |t_n - t_k| / dt)` at the event's exact
/// pixel. Bin centers sit at `n / bins` for `n in 0..bins`; positive events
/// fill channels `0..bins`, negative events channels `bins..2*bins`.
pub fn est(stream: &EventStream, cfg: &ReprConfig) -> Result<RepresentationTensor, ReprError> {
    cfg.validate()?;
    check_normalized(stream)?;
    let b = cfg.bins;
    let (w, h) = (stream.geometry.width as usize, stream.geometry.height as usize);
    let mut out = RepresentationTensor::zeros(2 * b, h, w, ReprMethod::Est, cfg.clone());
    let dt = 1.0 / b as f64;
    for e in &stream.events {
        let f = match cfg.measurement {
            Measurement::Timestamp => e.t,
            Measurement::Count => 1.0,
            Measurement::Polarity => e.p.abs(),
        };
        let c_base = if e.p > 0.0 { 0 } else { b };
        // triangular kernel support: |t_n - t| < dt, i.e. n in (t/dt - 1, t/dt + 1)
        let n_lo = ((e.t / dt - 1.0).ceil().max(0.0)) as usize;
        let n_hi = ((e.t / dt + 1.0).floor()).min((b - 1) as f64) as usize;
        for n in n_lo..=n_hi.min(b - 1) {
            let t_n = n as f64 * dt;
            let wgt = 1.0 - ((t_n - e.t) / dt).abs();
            if wgt > 0.0 {
                let i = out.idx(c_base + n, e.y as usize, e.x as usize);
                out.data[i] += f * wgt;
            }
        }
    }
    Ok(out)
}

/// Event frame: sign of the per-pixel accumulated polarity, values in
/// `{-1, 0, +1}`.
pub fn event_frame(
    stream: &EventStream,
    cfg: &ReprConfig,
) -> Result<RepresentationTensor, ReprError> {
    cfg.validate()?;
    check_normalized(stream)?;
    let (w, h) = (stream.geometry.width as usize, stream.geometry.height as usize);
    let mut acc = vec![0.0f64; w * h];
    for e in &stream.events {
        acc[e.y as usize * w + e.x as usize] += e.p;
    }
    let mut out = RepresentationTensor::zeros(1, h, w, ReprMethod::EventFrame, cfg.clone());
    for (i, a) in acc.iter().enumerate() {
        out.data[i] = if *a > 0.0 {
            1.0
        } else if *a < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    Ok(out)
}

/// Time surface: `p * exp(-(t_max - t) / tau)` of the most recent event at
/// each pixel (later stream index wins ties); pixels without events are 0.
pub fn time_surface(
    stream: &EventStream,
    cfg: &ReprConfig,
) -> Result<RepresentationTensor, ReprError> {
    cfg.validate()?;
    check_normalized(stream)?;
    if stream.is_empty() {
        return Err(ReprError::EmptyStream);
    }
    let (w, h) = (stream.geometry.width as usize, stream.geometry.height as usize);
    let t_max = stream.events.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
    let mut last: Vec<Option<(f64, f64)>> = vec![None; w * h];
    for e in &stream.events {
        last[e.y as usize * w + e.x as usize] = Some((e.t, e.p));
    }
    let mut out = RepresentationTensor::zeros(1, h, w, ReprMethod::TimeSurface, cfg.clone());
    for (i, cell) in last.iter().enumerate() {
        if let Some((t, p)) = cell {
            out.data[i] = p * (-(t_max - t) / cfg.tau).exp();
        }
    }
    Ok(out)
}

/// Voxel grid: signed trilinear space-time histogram with `bins` temporal
/// channels. Event timestamps are rescaled to `t* = (B-1)(t - t_1)/(t_N - t_1)`
/// (all zero when the stream's time span is degenerate) and spread over the
/// two straddling integer bins with weight `max(0, 1 - |n - t*|)`.
pub fn voxel_grid(
    stream: &EventStream,
    cfg: &ReprConfig,
) -> Result<RepresentationTensor, ReprError> {
    cfg.validate()?;
    check_normalized(stream)?;
    let b = cfg.bins;
    let (w, h) = (stream.geometry.width as usize, stream.geometry.height as usize);
    let mut out = RepresentationTensor::zeros(b, h, w, ReprMethod::VoxelGrid, cfg.clone());
    if stream.is_empty() {
        return Ok(out);
    }
    let t1 = stream.events.first().unwrap().t;
    let tn = stream.events.last().unwrap().t;
    let span = tn - t1;
    for e in &stream.events {
        let t_star = if span > 0.0 {
            (b - 1) as f64 * (e.t - t1) / span
        } else {
            0.0
        };
        let n0 = t_star.floor() as usize;
        for n in n0..=(n0 + 1).min(b - 1) {
            let wgt = 1.0 - (n as f64 - t_star).abs();
            if wgt > 0.0 {
                let i = out.idx(n, e.y as usize, e.x as usize);
                out.data[i] += e.p * wgt;
            }
        }
    }
    Ok(out)
}

/// Tencode: 3-channel RGB in `[0, 255]`. For each pixel's most recent event
/// within the trailing window `[t_max - dt, t_max]`, positive polarity maps
/// to `(255, g, 0)` and negative to `(0, g, 255)` with
/// `g = 255 (t_max - t) / dt` clamped to `[0, 255]`; untouched pixels stay
/// `(0, 0, 0)`.
pub fn tencode(
    stream: &EventStream,
    cfg: &ReprConfig,
) -> Result<RepresentationTensor, ReprError> {
    cfg.validate()?;
    check_normalized(stream)?;
    if stream.is_empty() {
        return Err(ReprError::EmptyStream);
    }
    let (w, h) = (stream.geometry.width as usize, stream.geometry.height as usize);
    let t_max = stream.events.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
    let dt = cfg.tencode_dt;
    let mut last: Vec<Option<(f64, f64)>> = vec![None; w * h];
    for e in &stream.events {
        if e.t >= t_max - dt {
            last[e.y as usize * w + e.x as usize] = Some((e.t, e.p));
        }
    }
    let mut out = RepresentationTensor::zeros(3, h, w, ReprMethod::Tencode, cfg.clone());
    for (i, cell) in last.iter().enumerate() {
        if let Some((t, p)) = cell {
            let g = (255.0 * (t_max - t) / dt).clamp(0.0, 255.0);
            let (r, bl) = if *p > 0.0 { (255.0, 0.0) } else { (0.0, 255.0) };
            out.data[i] = r;
            out.data[h * w + i] = g;
            out.data[2 * h * w + i] = bl;
        }
    }
    Ok(out)
}
