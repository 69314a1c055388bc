//! Minimal differentiable building blocks: a dense classifier over pooled
//! representations, a per-channel affine representation weighting, softmax
//! cross-entropy with analytic gradients, SGD with momentum, and a
//! finite-difference gradient checker.
//!
//! Everything is 64-bit and sequential, so gradient checks are tight and
//! training runs are bit-reproducible.

// index loops here mirror the row-major matrix layout
#![allow(clippy::needless_range_loop)]

pub mod gradcheck;

pub use gradcheck::{grad_check, GradCheckConfig};

use crate::repr::RepresentationTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MODEL_MAGIC: &[u8; 4] = b"EVTM";
pub const MODEL_VERSION: u32 = 1;

/// Fixed spatial size representations are average-pooled to before the
/// classifier.
pub const POOLED_SIDE: usize = 8;
/// Default hidden width of the classifier.
pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub channels: usize,
    pub pooled_h: usize,
    pub pooled_w: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Arch {
    pub fn new(channels: usize, classes: usize) -> Self {
        Arch {
            channels,
            pooled_h: POOLED_SIDE,
            pooled_w: POOLED_SIDE,
            hidden: DEFAULT_HIDDEN,
            classes,
        }
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.pooled_h * self.pooled_w
    }
}

/// Classifier parameters `theta` (dense stack) plus the representation
/// weighting `omega` (per-channel affine applied to the pooled tensor).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub omega_scale: Vec<f64>,
    pub omega_bias: Vec<f64>,
    /// `hidden x input_len`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `classes x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients with the same shapes as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub omega_scale: Vec<f64>,
    pub omega_bias: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("model checkpoint: {0}")]
    Checkpoint(String),
}

impl ModelParams {
    /// Zero-initialized parameters with identity omega.
    pub fn zeros(arch: Arch) -> Self {
        ModelParams {
            arch,
            omega_scale: vec![1.0; arch.channels],
            omega_bias: vec![0.0; arch.channels],
            w1: vec![0.0; arch.hidden * arch.input_len()],
            b1: vec![0.0; arch.hidden],
            w2: vec![0.0; arch.classes * arch.hidden],
            b2: vec![0.0; arch.classes],
        }
    }

    /// Seeded Glorot-uniform weights, zero biases, identity omega.
    pub fn init(arch: Arch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        let s1 = (6.0 / (arch.input_len() + arch.hidden) as f64).sqrt();
        for v in p.w1.iter_mut() {
            *v = rng.random_range(-s1..s1);
        }
        let s2 = (6.0 / (arch.hidden + arch.classes) as f64).sqrt();
        for v in p.w2.iter_mut() {
            *v = rng.random_range(-s2..s2);
        }
        p
    }

    /// Parameter buffers in checkpoint/declaration order.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.omega_scale.as_mut_slice(),
            self.omega_bias.as_mut_slice(),
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.omega_scale);
        v.extend_from_slice(&self.omega_bias);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn from_flat(&self, flat: &[f64]) -> ModelParams {
        let mut out = self.clone();
        let mut off = 0;
        for dst in [
            &mut out.omega_scale,
            &mut out.omega_bias,
            &mut out.w1,
            &mut out.b1,
            &mut out.w2,
            &mut out.b2,
        ] {
            let n = dst.len();
            dst.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        assert_eq!(off, flat.len());
        out
    }

    /// Serialize: `"EVTM" | u32 version | dims (u32 x5)` then all parameter
    /// arrays as little-endian f64 in declaration order.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        for d in [
            self.arch.channels,
            self.arch.pooled_h,
            self.arch.pooled_w,
            self.arch.hidden,
            self.arch.classes,
        ] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.to_flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<ModelParams, NeuralError> {
        let bad = |m: &str| NeuralError::Checkpoint(m.to_string());
        if bytes.len() < 4 + 4 + 20 {
            return Err(bad("truncated header"));
        }
        if &bytes[0..4] != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 5];
        for (i, d) in dims.iter_mut().enumerate() {
            let off = 8 + 4 * i;
            *d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        }
        let arch = Arch {
            channels: dims[0],
            pooled_h: dims[1],
            pooled_w: dims[2],
            hidden: dims[3],
            classes: dims[4],
        };
        let proto = ModelParams::zeros(arch);
        let n = proto.to_flat().len();
        let payload = &bytes[28..];
        if payload.len() != n * 8 {
            return Err(bad(&format!(
                "payload size mismatch: expected {} f64s",
                n
            )));
        }
        let flat: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(proto.from_flat(&flat))
    }
}

impl ModelGrads {
    pub fn zeros(arch: &Arch) -> Self {
        ModelGrads {
            omega_scale: vec![0.0; arch.channels],
            omega_bias: vec![0.0; arch.channels],
            w1: vec![0.0; arch.hidden * arch.input_len()],
            b1: vec![0.0; arch.hidden],
            w2: vec![0.0; arch.classes * arch.hidden],
            b2: vec![0.0; arch.classes],
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (dst, src) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.groups_mut() {
            for v in g.iter_mut() {
                *v *= k;
            }
        }
    }

    pub fn groups(&self) -> Vec<&[f64]> {
        vec![
            &self.omega_scale,
            &self.omega_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.omega_scale.as_mut_slice(),
            self.omega_bias.as_mut_slice(),
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.groups().into_iter().flatten().copied().collect()
    }

    /// Zero the omega gradients; used when the representation weighting is
    /// frozen.
    pub fn freeze_omega(&mut self) {
        self.omega_scale.iter_mut().for_each(|v| *v = 0.0);
        self.omega_bias.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Average-pool each channel to `ph x pw` cells. Cell `(i, j)` averages input
/// rows `floor(i*H/ph) .. ceil((i+1)*H/ph)` (and likewise columns), which
/// handles sizes that do not divide evenly.
pub fn adaptive_avg_pool(rep: &RepresentationTensor, ph: usize, pw: usize) -> Vec<f64> {
    let (c_n, h, w) = (rep.channels, rep.height, rep.width);
    let mut out = vec![0.0; c_n * ph * pw];
    for c in 0..c_n {
        for i in 0..ph {
            let y0 = i * h / ph;
            let y1 = ((i + 1) * h).div_ceil(ph);
            for j in 0..pw {
                let x0 = j * w / pw;
                let x1 = ((j + 1) * w).div_ceil(pw);
                let mut acc = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += rep.get(c, y, x);
                    }
                }
                out[(c * ph + i) * pw + j] = acc / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    }
    out
}

struct ForwardCache {
    pooled: Vec<f64>,
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    logits: Vec<f64>,
}

fn forward_cached(params: &ModelParams, rep: &RepresentationTensor) -> Result<ForwardCache, NeuralError> {
    let arch = &params.arch;
    if rep.channels != arch.channels {
        return Err(NeuralError::ShapeMismatch(format!(
            "representation has {} channels, model expects {}",
            rep.channels, arch.channels
        )));
    }
    let p = arch.pooled_h * arch.pooled_w;
    let pooled = adaptive_avg_pool(rep, arch.pooled_h, arch.pooled_w);
    let mut x = vec![0.0; arch.input_len()];
    for c in 0..arch.channels {
        for j in 0..p {
            x[c * p + j] = params.omega_scale[c] * pooled[c * p + j] + params.omega_bias[c];
        }
    }
    let mut z1 = params.b1.clone();
    for (hid, z) in z1.iter_mut().enumerate() {
        let row = &params.w1[hid * x.len()..(hid + 1) * x.len()];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(&x) {
            acc += wi * xi;
        }
        *z += acc;
    }
    let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
    let mut logits = params.b2.clone();
    for (k, l) in logits.iter_mut().enumerate() {
        let row = &params.w2[k * a1.len()..(k + 1) * a1.len()];
        let mut acc = 0.0;
        for (wi, ai) in row.iter().zip(&a1) {
            acc += wi * ai;
        }
        *l += acc;
    }
    Ok(ForwardCache {
        pooled,
        x,
        z1,
        a1,
        logits,
    })
}

/// Class scores for a representation: pool, apply omega, dense-ReLU-dense.
pub fn forward(params: &ModelParams, rep: &RepresentationTensor) -> Result<Vec<f64>, NeuralError> {
    Ok(forward_cached(params, rep)?.logits)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy from raw logits, with its gradient.
pub fn softmax_ce(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NeuralError> {
    if label >= logits.len() {
        return Err(NeuralError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Cross-entropy loss of one sample and exact analytic gradients over theta
/// and omega.
pub fn ce_loss_backward(
    params: &ModelParams,
    rep: &RepresentationTensor,
    label: usize,
) -> Result<(f64, ModelGrads), NeuralError> {
    let arch = &params.arch;
    if label >= arch.classes {
        return Err(NeuralError::LabelOutOfRange {
            label,
            classes: arch.classes,
        });
    }
    let cache = forward_cached(params, rep)?;
    let (loss, dlogits) = softmax_ce(&cache.logits, label)?;
    let mut g = ModelGrads::zeros(arch);
    // second dense layer
    for k in 0..arch.classes {
        g.b2[k] = dlogits[k];
        for j in 0..arch.hidden {
            g.w2[k * arch.hidden + j] = dlogits[k] * cache.a1[j];
        }
    }
    // back through ReLU
    let mut dz1 = vec![0.0; arch.hidden];
    for j in 0..arch.hidden {
        if cache.z1[j] > 0.0 {
            let mut acc = 0.0;
            for k in 0..arch.classes {
                acc += params.w2[k * arch.hidden + j] * dlogits[k];
            }
            dz1[j] = acc;
        }
    }
    // first dense layer
    let n_in = arch.input_len();
    for j in 0..arch.hidden {
        g.b1[j] = dz1[j];
        if dz1[j] != 0.0 {
            for i in 0..n_in {
                g.w1[j * n_in + i] = dz1[j] * cache.x[i];
            }
        }
    }
    // back to the affined input, then to omega
    let p = arch.pooled_h * arch.pooled_w;
    for c in 0..arch.channels {
        let mut ds = 0.0;
        let mut db = 0.0;
        for i in 0..p {
            let col = c * p + i;
            let mut dx = 0.0;
            for j in 0..arch.hidden {
                if dz1[j] != 0.0 {
                    dx += params.w1[j * n_in + col] * dz1[j];
                }
            }
            ds += dx * cache.pooled[col];
            db += dx;
        }
        g.omega_scale[c] = ds;
        g.omega_bias[c] = db;
    }
    Ok((loss, g))
}

/// SGD-with-momentum state: `v <- momentum * v + g; p <- p - lr * v`.
///
/// Velocity buffers are created on the first step and must keep their shapes
/// afterwards. The learning rate is passed per step so callers can schedule
/// it.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub lr0: f64,
    pub momentum: f64,
    /// Per-epoch exponential decay factor.
    pub gamma: f64,
    velocity: Option<Vec<Vec<f64>>>,
}

impl OptimState {
    pub fn new(lr0: f64) -> Self {
        OptimState {
            lr0,
            momentum: 0.9,
            gamma: 0.5,
            velocity: None,
        }
    }

    /// Scheduled learning rate at an epoch: `lr0 * gamma^epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.gamma.powi(epoch as i32)
    }

    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        lr: f64,
    ) -> Result<(), NeuralError> {
        if params.len() != grads.len() {
            return Err(NeuralError::ShapeMismatch(
                "parameter/gradient group count differs".into(),
            ));
        }
        if self.velocity.is_none() {
            self.velocity = Some(params.iter().map(|p| vec![0.0; p.len()]).collect());
        }
        let velocity = self.velocity.as_mut().unwrap();
        if velocity.len() != params.len() {
            return Err(NeuralError::ShapeMismatch("velocity group count".into()));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
            if p.len() != g.len() || p.len() != v.len() {
                return Err(NeuralError::ShapeMismatch("group length".into()));
            }
            for i in 0..p.len() {
                v[i] = self.momentum * v[i] + g[i];
                p[i] -= lr * v[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::{ReprConfig, ReprMethod};
    use rand::{Rng, SeedableRng};

    fn random_rep(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> RepresentationTensor {
        let mut rep = RepresentationTensor::zeros(c, h, w, ReprMethod::Est, ReprConfig::default());
        for v in rep.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        rep
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Arch::new(4, 3);
        let mut p = ModelParams::zeros(arch);
        p.omega_scale.iter_mut().for_each(|v| *v = 0.0);
        let rep = random_rep(&mut rng, 4, 16, 16);
        let logits = forward(&p, &rep).unwrap();
        assert!(logits.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn identity_omega_equals_skipping_the_affine_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Arch::new(2, 4);
        let p = ModelParams::init(arch, 3);
        let rep = random_rep(&mut rng, 2, 12, 12);
        let logits = forward(&p, &rep).unwrap();
        // reference that feeds the pooled tensor straight into the stack
        let pooled = adaptive_avg_pool(&rep, arch.pooled_h, arch.pooled_w);
        let n_in = arch.input_len();
        let mut z1 = p.b1.clone();
        for j in 0..arch.hidden {
            for i in 0..n_in {
                z1[j] += p.w1[j * n_in + i] * pooled[i];
            }
        }
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let mut want = p.b2.clone();
        for k in 0..arch.classes {
            for j in 0..arch.hidden {
                want[k] += p.w2[k * arch.hidden + j] * a1[j];
            }
        }
        for (a, b) in logits.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    /// Independent full-forward oracle, including its own pooling.
    #[allow(clippy::manual_div_ceil)]
    fn forward_oracle(p: &ModelParams, rep: &RepresentationTensor) -> Vec<f64> {
        let arch = &p.arch;
        let (ph, pw) = (arch.pooled_h, arch.pooled_w);
        let mut x = Vec::new();
        for c in 0..arch.channels {
            for i in 0..ph {
                for j in 0..pw {
                    let y0 = i * rep.height / ph;
                    let y1 = ((i + 1) * rep.height + ph - 1) / ph;
                    let x0 = j * rep.width / pw;
                    let x1 = ((j + 1) * rep.width + pw - 1) / pw;
                    let mut acc = 0.0;
                    let mut cnt = 0usize;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            acc += rep.get(c, yy, xx);
                            cnt += 1;
                        }
                    }
                    x.push(p.omega_scale[c] * (acc / cnt as f64) + p.omega_bias[c]);
                }
            }
        }
        let n_in = x.len();
        let mut a1 = vec![0.0; arch.hidden];
        for j in 0..arch.hidden {
            let mut z = p.b1[j];
            for i in 0..n_in {
                z += p.w1[j * n_in + i] * x[i];
            }
            a1[j] = z.max(0.0);
        }
        let mut logits = vec![0.0; arch.classes];
        for k in 0..arch.classes {
            let mut z = p.b2[k];
            for j in 0..arch.hidden {
                z += p.w2[k * arch.hidden + j] * a1[j];
            }
            logits[k] = z;
        }
        logits
    }

    #[test]
    fn forward_matches_oracle_and_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..10 {
            let arch = Arch::new(3, 5);
            let mut p = ModelParams::init(arch, seed);
            for v in p.omega_scale.iter_mut() {
                *v = rng.random_range(0.5..1.5);
            }
            for v in p.omega_bias.iter_mut() {
                *v = rng.random_range(-0.2..0.2);
            }
            let rep = random_rep(&mut rng, 3, 20, 14);
            let a = forward(&p, &rep).unwrap();
            let b = forward_oracle(&p, &rep);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12);
            }
            let again = forward(&p, &rep).unwrap();
            assert_eq!(a, again, "forward must be bit-identical on repeat calls");
        }
    }

    #[test]
    fn forward_rejects_channel_mismatch() {
        let p = ModelParams::zeros(Arch::new(4, 2));
        let rep = RepresentationTensor::zeros(3, 8, 8, ReprMethod::Est, ReprConfig::default());
        assert!(matches!(
            forward(&p, &rep).unwrap_err(),
            NeuralError::ShapeMismatch(_)
        ));
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        for k in [2usize, 4, 10] {
            let (loss, _) = softmax_ce(&vec![0.0; k], 0).unwrap();
            assert!((loss - (k as f64).ln()).abs() <= 1e-12);
        }
    }

    #[test]
    fn saturated_correct_logit_loss_vanishes() {
        let mut logits = vec![0.0; 4];
        logits[1] = 50.0;
        let (loss, _) = softmax_ce(&logits, 1).unwrap();
        assert!(loss < 1e-15, "loss {loss}");
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..6).map(|_| rng.random_range(-30.0..30.0)).collect();
            let s: f64 = softmax(&logits).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(matches!(
            softmax_ce(&[0.0, 0.0], 2).unwrap_err(),
            NeuralError::LabelOutOfRange { .. }
        ));
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let arch = Arch {
            channels: 2,
            pooled_h: 4,
            pooled_w: 4,
            hidden: 16,
            classes: 3,
        };
        for seed in 0..5 {
            let p = ModelParams::init(arch, seed);
            let rep = random_rep(&mut rng, 2, 10, 10);
            let label = (seed % 3) as usize;
            let (_, grads) = ce_loss_backward(&p, &rep, label).unwrap();
            let flat0 = p.to_flat();
            let f = |flat: &[f64]| {
                let q = p.from_flat(flat);
                ce_loss_backward(&q, &rep, label).unwrap().0
            };
            let cfg = GradCheckConfig {
                max_coords: usize::MAX, // small model: check every coordinate
                ..Default::default()
            };
            let err = grad_check(&f, &flat0, &grads.to_flat(), &cfg);
            assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn sgd_zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut opt = OptimState::new(0.1);
        opt.step(&mut [p.as_mut_slice()], &[&g], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn sgd_momentum_unrolls_as_expected() {
        let mut p = vec![1.0];
        let g = vec![0.5];
        let lr = 0.1;
        let mut opt = OptimState::new(lr);
        opt.step(&mut [p.as_mut_slice()], &[&g], lr).unwrap();
        assert!((p[0] - (1.0 - lr * 0.5)).abs() <= 1e-15);
        opt.step(&mut [p.as_mut_slice()], &[&g], lr).unwrap();
        // two steps of constant g: p0 - lr*g - lr*1.9*g
        assert!((p[0] - (1.0 - lr * 0.5 - lr * 1.9 * 0.5)).abs() <= 1e-15);
    }

    #[test]
    fn sgd_rejects_shape_changes() {
        let mut p = vec![0.0; 3];
        let mut opt = OptimState::new(0.1);
        opt.step(&mut [p.as_mut_slice()], &[&[1.0, 1.0, 1.0][..]], 0.1)
            .unwrap();
        let mut q = vec![0.0; 2];
        assert!(opt
            .step(&mut [q.as_mut_slice()], &[&[1.0, 1.0][..]], 0.1)
            .is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let p = ModelParams::init(Arch::new(6, 4), 11);
        let bytes = p.to_checkpoint();
        assert_eq!(&bytes[0..4], b"EVTM");
        let back = ModelParams::from_checkpoint(&bytes).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let p = ModelParams::init(Arch::new(2, 2), 0);
        let mut bytes = p.to_checkpoint();
        bytes[5] ^= 0xff;
        assert!(ModelParams::from_checkpoint(&bytes).is_err());
        let mut bytes = p.to_checkpoint();
        bytes.truncate(bytes.len() - 1);
        assert!(ModelParams::from_checkpoint(&bytes).is_err());
    }
}
