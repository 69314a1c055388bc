//! Event triggers: fixed ("immutable") and learned-timestamp ("mutable")
//! malicious event patterns, stream injection, the trigger generation loss,
//! and a constant-patch baseline applied to representations.
//!
//! Both trigger kinds place `m` events on a fixed `h x w` pixel grid so
//! their spatial footprint is identical across streams; they differ only in
//! timestamps. The immutable trigger shares a single timestamp `alpha`; the
//! mutable trigger runs timestamps sampled from the victim stream through
//! the generator in [`generator`].

pub mod generator;

pub use generator::{GeneratorCache, GeneratorGrads, GeneratorParams};

use crate::event::{Event, EventStream, SensorGeometry, TimeDomain};
use crate::repr::RepresentationTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    Immutable,
    Mutable,
}

/// Trigger configuration: where the event block sits, how many events it
/// holds, and the immutable-mode timestamp/polarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerSpec {
    /// Top-left pixel of the trigger region.
    pub origin: (u16, u16),
    /// `(h, w)` of the region; `h * w` must equal `m`.
    pub shape: (u16, u16),
    /// Number of trigger events.
    pub m: usize,
    /// Shared normalized timestamp in immutable mode.
    pub alpha: f64,
    /// Trigger polarity.
    pub beta: f64,
    pub mode: TriggerMode,
}

impl Default for TriggerSpec {
    fn default() -> Self {
        TriggerSpec {
            origin: (0, 0),
            shape: (10, 10),
            m: 100,
            alpha: 0.01,
            beta: 1.0,
            mode: TriggerMode::Immutable,
        }
    }
}

impl TriggerSpec {
    pub fn validate(&self) -> Result<(), TriggerError> {
        let (h, w) = self.shape;
        if h as usize * w as usize != self.m {
            return Err(TriggerError::ShapeCountMismatch {
                h,
                w,
                m: self.m,
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TriggerError::InvalidSpec("alpha must be in [0, 1]".into()));
        }
        if self.beta != 1.0 && self.beta != -1.0 {
            return Err(TriggerError::InvalidSpec("beta must be +1 or -1".into()));
        }
        Ok(())
    }
}

/// Weights of the two trigger-loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 1.0,
            lambda2: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriggerError {
    #[error("trigger region ({h}x{w} at {x},{y}) exceeds geometry {gw}x{gh}")]
    RegionOutOfBounds {
        x: u16,
        y: u16,
        h: u16,
        w: u16,
        gw: u16,
        gh: u16,
    },
    #[error("shape {h}x{w} does not hold m = {m} events")]
    ShapeCountMismatch { h: u16, w: u16, m: usize },
    #[error("spec mode does not match the requested operation")]
    WrongTriggerMode,
    #[error("invalid trigger spec: {0}")]
    InvalidSpec(String),
    #[error("operation requires a nonempty stream")]
    EmptyStream,
    #[error("streams have different geometries")]
    GeometryMismatch,
    #[error("streams have different time domains")]
    TimeDomainMismatch,
    #[error("vector has zero norm")]
    ZeroNormVector,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("need at least 2 elements")]
    TooFewElements,
    #[error("generator checkpoint: {0}")]
    Checkpoint(String),
}

/// Row-major pixel coordinates of the trigger grid, after bounds checks.
fn grid_coords(spec: &TriggerSpec, geometry: SensorGeometry) -> Result<Vec<(u16, u16)>, TriggerError> {
    spec.validate()?;
    let (h, w) = spec.shape;
    let (x0, y0) = spec.origin;
    let fits = x0 as u32 + w as u32 <= geometry.width as u32
        && y0 as u32 + h as u32 <= geometry.height as u32;
    if !fits {
        return Err(TriggerError::RegionOutOfBounds {
            x: x0,
            y: y0,
            h,
            w,
            gw: geometry.width,
            gh: geometry.height,
        });
    }
    let mut coords = Vec::with_capacity(spec.m);
    for gy in 0..h {
        for gx in 0..w {
            coords.push((x0 + gx, y0 + gy));
        }
    }
    Ok(coords)
}

/// Build the immutable trigger: `m` events filling the spec's grid, all with
/// timestamp `alpha` and polarity `beta`. Independent of any input stream.
pub fn make_immutable_trigger(
    spec: &TriggerSpec,
    geometry: SensorGeometry,
) -> Result<EventStream, TriggerError> {
    if spec.mode != TriggerMode::Immutable {
        return Err(TriggerError::WrongTriggerMode);
    }
    let events = grid_coords(spec, geometry)?
        .into_iter()
        .map(|(x, y)| Event::new(x, y, spec.alpha, spec.beta))
        .collect();
    Ok(EventStream::new(
        events,
        geometry,
        TimeDomain::NormalizedUnit,
    ))
}

/// Draw `m` timestamps from the stream: uniformly without replacement when
/// the stream has at least `m` events, with replacement otherwise.
/// Deterministic given the seed.
pub fn sample_timestamps(
    stream: &EventStream,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>, TriggerError> {
    if stream.is_empty() {
        return Err(TriggerError::EmptyStream);
    }
    let n = stream.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = if n >= m {
        rand::seq::index::sample(&mut rng, n, m).into_vec()
    } else {
        (0..m).map(|_| rng.random_range(0..n)).collect()
    };
    Ok(idx.into_iter().map(|i| stream.events[i].t).collect())
}

/// Lay explicit timestamps onto the trigger grid (row-major), polarity
/// `beta`, and sort by time. Shared by mutable-trigger generation and the
/// training loop, which produces the timestamps itself to keep the forward
/// cache for backprop.
pub fn trigger_from_timestamps(
    spec: &TriggerSpec,
    geometry: SensorGeometry,
    timestamps: &[f64],
) -> Result<EventStream, TriggerError> {
    if timestamps.len() != spec.m {
        return Err(TriggerError::LengthMismatch {
            expected: spec.m,
            found: timestamps.len(),
        });
    }
    let events = grid_coords(spec, geometry)?
        .into_iter()
        .zip(timestamps)
        .map(|((x, y), &t)| Event::new(x, y, t, spec.beta))
        .collect();
    let mut stream = EventStream::new(events, geometry, TimeDomain::NormalizedUnit);
    stream.sort_by_time();
    Ok(stream)
}

/// Build the mutable trigger: the same spatial grid as the immutable layout,
/// timestamps produced by the generator from the sampled vector, polarity
/// `beta`. The result is sorted by time.
pub fn generate_mutable(
    params: &GeneratorParams,
    sampled: &[f64],
    spec: &TriggerSpec,
    geometry: SensorGeometry,
) -> Result<EventStream, TriggerError> {
    if spec.mode != TriggerMode::Mutable {
        return Err(TriggerError::WrongTriggerMode);
    }
    if sampled.len() != spec.m {
        return Err(TriggerError::LengthMismatch {
            expected: spec.m,
            found: sampled.len(),
        });
    }
    let ts = params.forward(sampled)?;
    trigger_from_timestamps(spec, geometry, &ts)
}

/// Concatenate trigger events into a stream and restore time order with a
/// stable sort. Original events are never modified or dropped.
pub fn inject(stream: &EventStream, trigger: &EventStream) -> Result<EventStream, TriggerError> {
    if stream.geometry != trigger.geometry {
        return Err(TriggerError::GeometryMismatch);
    }
    if stream.time_domain != trigger.time_domain {
        return Err(TriggerError::TimeDomainMismatch);
    }
    let mut events = Vec::with_capacity(stream.len() + trigger.len());
    events.extend(stream.events.iter().copied());
    events.extend(trigger.events.iter().copied());
    let mut out = EventStream::new(events, stream.geometry, stream.time_domain);
    out.sort_by_time();
    Ok(out)
}

/// Trigger generation loss and its gradient with respect to the generated
/// timestamps:
///
/// `L = lambda1 * cos(t', t) + lambda2 * [(mean(t')-mean(t))^2 + (var(t')-var(t))^2]`
///
/// with population variance. Minimizing pushes the generated vector away
/// from the benign one in direction while matching its first two moments.
pub fn trigger_loss(
    generated: &[f64],
    original: &[f64],
    w: &LossWeights,
) -> Result<(f64, Vec<f64>), TriggerError> {
    if generated.len() != original.len() {
        return Err(TriggerError::LengthMismatch {
            expected: original.len(),
            found: generated.len(),
        });
    }
    let m = generated.len();
    if m < 2 {
        return Err(TriggerError::TooFewElements);
    }
    let mf = m as f64;
    let dot: f64 = generated.iter().zip(original).map(|(a, b)| a * b).sum();
    let nu = generated.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nv = original.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(TriggerError::ZeroNormVector);
    }
    let cos = dot / (nu * nv);

    let mean_u = generated.iter().sum::<f64>() / mf;
    let mean_v = original.iter().sum::<f64>() / mf;
    let var_u = generated.iter().map(|v| v * v).sum::<f64>() / mf - mean_u * mean_u;
    let var_v = original.iter().map(|v| v * v).sum::<f64>() / mf - mean_v * mean_v;
    let d_mean = mean_u - mean_v;
    let d_var = var_u - var_v;
    let psi = d_mean * d_mean + d_var * d_var;

    let loss = w.lambda1 * cos + w.lambda2 * psi;

    let grad = generated
        .iter()
        .zip(original)
        .map(|(&u, &v)| {
            let d_cos = v / (nu * nv) - dot * u / (nu * nu * nu * nv);
            let d_psi = 2.0 * d_mean / mf + 2.0 * d_var * (2.0 / mf) * (u - mean_u);
            w.lambda1 * d_cos + w.lambda2 * d_psi
        })
        .collect();
    Ok((loss, grad))
}

/// Write a constant block into every channel of a representation: the
/// image-domain patch baseline.
pub fn inject_patch(
    rep: &RepresentationTensor,
    origin: (u16, u16),
    shape: (u16, u16),
    value: f64,
) -> Result<RepresentationTensor, TriggerError> {
    let (x0, y0) = (origin.0 as usize, origin.1 as usize);
    let (h, w) = (shape.0 as usize, shape.1 as usize);
    if x0 + w > rep.width || y0 + h > rep.height {
        return Err(TriggerError::RegionOutOfBounds {
            x: origin.0,
            y: origin.1,
            h: shape.0,
            w: shape.1,
            gw: rep.width as u16,
            gh: rep.height as u16,
        });
    }
    let mut out = rep.clone();
    for c in 0..rep.channels {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                out.set(c, y, x, value);
            }
        }
    }
    Ok(out)
}

/// Patch value used by the poisoning pipeline: the tensor's maximum (a
/// bright block), falling back to 1.0 for non-positive tensors.
pub fn patch_value_for(rep: &RepresentationTensor) -> f64 {
    let max = rep.max_value();
    if max > 0.0 {
        max
    } else {
        1.0
    }
}
