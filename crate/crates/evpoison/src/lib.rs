//! Desk-scale toolkit for studying data-poisoning backdoor attacks on
//! asynchronous event-camera streams.
//!
//! Event streams are sequences of per-pixel records `(x, y, t, p)` emitted
//! when the log brightness at a pixel changes by more than a threshold.
//! Vision models consume them through dense image-like representations, and
//! an attacker who can touch the raw stream can hide a handful of synthetic
//! events in it that later flip the model's prediction. This crate builds
//! that whole pipeline at a size where every piece can be checked against a
//! brute-force oracle:
//!
//! - [`event`] — data model, bit-exact binary and CSV codecs, time
//!   normalization, validation, and a threshold-based synthetic scene
//!   generator.
//! - [`repr`] — five event-to-tensor conversions: event spike tensor,
//!   event frame, time surface, voxel grid, and Tencode.
//! - [`trigger`] — immutable (fixed) and mutable (learned-timestamp)
//!   event triggers, stream injection, the trigger generation loss, and a
//!   representation-patch baseline.
//! - [`neural`] — a small dense classifier over pooled representations
//!   with analytic gradients, SGD with momentum, and finite-difference
//!   gradient checking.
//! - [`train`] — dataset poisoning and the joint training loop that
//!   learns the classifier, the per-channel representation weighting, and
//!   the trigger generator together.
//! - [`eval`] — clean accuracy and attack success rate, PSNR/SSIM
//!   stealthiness metrics, and a spatio-temporal correlation denoiser.
//! - [`dataset`] / [`cli`] — on-disk dataset layout and the command
//!   implementations behind the `evpoison` binary.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `evpoison` binary chains them into file-to-file pipeline stages.

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod event;
pub mod neural;
pub mod repr;
pub mod train;
pub mod trigger;

pub use event::{Event, EventStream, SensorGeometry, TimeDomain};
pub use repr::{ReprConfig, ReprMethod, RepresentationTensor};
pub use trigger::{GeneratorParams, LossWeights, TriggerMode, TriggerSpec};
