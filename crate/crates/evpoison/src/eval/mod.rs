//! Attack metrics (clean-data accuracy, attack success rate), stealthiness
//! metrics (PSNR, SSIM) over representations, and the spatio-temporal
//! correlation denoising filter.

use crate::event::{Event, EventStream};
use crate::neural::{forward, ModelParams, NeuralError};
use crate::repr::{convert, ReprConfig, ReprError, ReprMethod, RepresentationTensor};
use crate::train::{patched_representation, TrainError};
use crate::trigger::TriggerSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("every sample already carries the target class")]
    AllSamplesTargetClass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("image {h}x{w} is smaller than the 11x11 SSIM window")]
    ImageTooSmall { h: usize, w: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Evaluation report, serialized with fixed field names. `psnr_db` and
/// `ssim` are null unless a stealthiness pass filled them; an infinite PSNR
/// (identical inputs) also serializes as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cda: f64,
    pub asr: f64,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub n_clean: usize,
    pub n_poisoned: usize,
    pub target_class: usize,
    pub per_sample: PerSampleBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PerSampleBreakdown {
    /// Per clean sample: prediction equals the true label.
    pub clean_correct: Vec<bool>,
    /// Per poisoned sample (true label != target): prediction equals the
    /// target.
    pub poisoned_hit: Vec<bool>,
}

/// Argmax with ties broken toward the lowest class index.
pub fn predict(model: &ModelParams, rep: &RepresentationTensor) -> Result<usize, EvalError> {
    let logits = forward(model, rep)?;
    let mut best = 0;
    for (k, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Clean-data accuracy with the per-sample breakdown.
pub fn cda_detailed(
    model: &ModelParams,
    method: ReprMethod,
    cfg: &ReprConfig,
    clean_set: &[(EventStream, usize)],
) -> Result<(f64, Vec<bool>), EvalError> {
    if clean_set.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut correct = Vec::with_capacity(clean_set.len());
    for (stream, label) in clean_set {
        let rep = convert(stream, method, cfg)?;
        correct.push(predict(model, &rep)? == *label);
    }
    let frac = correct.iter().filter(|c| **c).count() as f64 / correct.len() as f64;
    Ok((frac, correct))
}

/// Fraction of clean samples classified as their true label.
pub fn cda(
    model: &ModelParams,
    method: ReprMethod,
    cfg: &ReprConfig,
    clean_set: &[(EventStream, usize)],
) -> Result<f64, EvalError> {
    Ok(cda_detailed(model, method, cfg, clean_set)?.0)
}

fn asr_over<F>(
    poisoned_set: &[(EventStream, usize)],
    target: usize,
    mut classify: F,
) -> Result<(f64, Vec<bool>), EvalError>
where
    F: FnMut(&EventStream) -> Result<usize, EvalError>,
{
    if poisoned_set.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut hits = Vec::new();
    for (stream, true_label) in poisoned_set {
        if *true_label == target {
            continue;
        }
        hits.push(classify(stream)? == target);
    }
    if hits.is_empty() {
        return Err(EvalError::AllSamplesTargetClass);
    }
    let frac = hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64;
    Ok((frac, hits))
}

/// Attack success rate with the per-sample breakdown.
///
/// Every sample must already carry a trigger; pairs whose true label equals
/// the target are excluded from the denominator.
pub fn asr_detailed(
    model: &ModelParams,
    method: ReprMethod,
    cfg: &ReprConfig,
    poisoned_set: &[(EventStream, usize)],
    target: usize,
) -> Result<(f64, Vec<bool>), EvalError> {
    asr_over(poisoned_set, target, |stream| {
        let rep = convert(stream, method, cfg)?;
        predict(model, &rep)
    })
}

/// Fraction of triggered samples (true label != target) classified as the
/// target class.
pub fn asr(
    model: &ModelParams,
    method: ReprMethod,
    cfg: &ReprConfig,
    poisoned_set: &[(EventStream, usize)],
    target: usize,
) -> Result<f64, EvalError> {
    Ok(asr_detailed(model, method, cfg, poisoned_set, target)?.0)
}

/// ASR for the patch baseline: streams stay clean and the constant block is
/// written into each representation before classification.
pub fn asr_patched(
    model: &ModelParams,
    method: ReprMethod,
    cfg: &ReprConfig,
    clean_set: &[(EventStream, usize)],
    spec: &TriggerSpec,
    target: usize,
) -> Result<f64, EvalError> {
    let (frac, _) = asr_over(clean_set, target, |stream| {
        let rep = patched_representation(stream, method, cfg, spec)?;
        predict(model, &rep)
    })?;
    Ok(frac)
}

fn check_same_shape(a: &RepresentationTensor, b: &RepresentationTensor) -> Result<(), EvalError> {
    if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
        return Err(EvalError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    Ok(())
}

/// Render both tensors to `[0, 255]` with a single min-max over the pair, so
/// neither side gets an artificially favorable scale.
fn joint_render(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = a
        .iter()
        .chain(b)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = a
        .iter()
        .chain(b)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return (vec![0.0; a.len()], vec![0.0; b.len()]);
    }
    let scale = 255.0 / (hi - lo);
    (
        a.iter().map(|v| (v - lo) * scale).collect(),
        b.iter().map(|v| (v - lo) * scale).collect(),
    )
}

/// Peak signal-to-noise ratio in dB over jointly `[0, 255]`-rendered
/// tensors: `10 log10(255^2 / MSE)`. Identical inputs return infinity.
pub fn psnr(a: &RepresentationTensor, b: &RepresentationTensor) -> Result<f64, EvalError> {
    check_same_shape(a, b)?;
    let (ra, rb) = joint_render(&a.data, &b.data);
    let mse: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / ra.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn gaussian_kernel_1d() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-window separable Gaussian filter of one `h x w` plane; output is
/// `(h-10) x (w-10)`.
fn gauss_valid(img: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x0 in 0..ow {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += kj * img[y * w + x0 + j];
            }
            tmp[y * ow + x0] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y0 in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, ki) in k.iter().enumerate() {
                acc += ki * tmp[(y0 + i) * ow + x];
            }
            out[y0 * ow + x] = acc;
        }
    }
    out
}

/// Structural similarity over jointly rendered tensors: Gaussian-weighted
/// 11x11 windows (sigma 1.5), averaged over all valid window positions and
/// channels.
pub fn ssim(a: &RepresentationTensor, b: &RepresentationTensor) -> Result<f64, EvalError> {
    check_same_shape(a, b)?;
    let (h, w) = (a.height, a.width);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(EvalError::ImageTooSmall { h, w });
    }
    let (ra, rb) = joint_render(&a.data, &b.data);
    let k = gaussian_kernel_1d();
    let plane = h * w;
    let mut total = 0.0;
    for c in 0..a.channels {
        let pa = &ra[c * plane..(c + 1) * plane];
        let pb = &rb[c * plane..(c + 1) * plane];
        let sq = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * x).collect() };
        let prod: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
        let mu_a = gauss_valid(pa, h, w, &k);
        let mu_b = gauss_valid(pb, h, w, &k);
        let e_aa = gauss_valid(&sq(pa), h, w, &k);
        let e_bb = gauss_valid(&sq(pb), h, w, &k);
        let e_ab = gauss_valid(&prod, h, w, &k);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / a.channels as f64)
}

/// Spatio-temporal correlation filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StcConfig {
    /// Chebyshev spatial neighborhood radius in pixels.
    pub radius: u16,
    /// Temporal window, in the stream's time units (normalized time for the
    /// defaults).
    pub window: f64,
}

impl Default for StcConfig {
    fn default() -> Self {
        StcConfig {
            radius: 1,
            window: 0.05,
        }
    }
}

/// Denoise by spatio-temporal correlation: an event survives iff some other
/// event of the original stream sits within `radius` (Chebyshev) pixels and
/// `window` time units. Order is preserved; expects a time-sorted stream.
pub fn stc_filter(stream: &EventStream, cfg: &StcConfig) -> EventStream {
    let events = &stream.events;
    let n = events.len();
    let r = cfg.radius as i32;
    let close = |a: &Event, b: &Event| {
        (a.x as i32 - b.x as i32).abs() <= r && (a.y as i32 - b.y as i32).abs() <= r
    };
    let mut kept = Vec::new();
    for i in 0..n {
        let e = &events[i];
        let mut survive = false;
        for other in events[i + 1..].iter() {
            if other.t - e.t > cfg.window {
                break;
            }
            if close(e, other) {
                survive = true;
                break;
            }
        }
        if !survive {
            for other in events[..i].iter().rev() {
                if e.t - other.t > cfg.window {
                    break;
                }
                if close(e, other) {
                    survive = true;
                    break;
                }
            }
        }
        if survive {
            kept.push(*e);
        }
    }
    EventStream::new(kept, stream.geometry, stream.time_domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{SensorGeometry, TimeDomain};
    use crate::neural::Arch;
    use crate::repr::ReprMethod;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(16, 16)
    }

    fn stream_of(events: Vec<Event>) -> EventStream {
        let mut s = EventStream::new(events, geom(), TimeDomain::NormalizedUnit);
        s.sort_by_time();
        s
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<(EventStream, usize)> {
        (0..n)
            .map(|_| {
                let events = (0..rng.random_range(1..40))
                    .map(|_| {
                        Event::new(
                            rng.random_range(0..16),
                            rng.random_range(0..16),
                            rng.random_range(0.0..=1.0),
                            if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                        )
                    })
                    .collect();
                (stream_of(events), rng.random_range(0..classes))
            })
            .collect()
    }

    fn biased_model(classes: usize, favored: usize) -> ModelParams {
        let arch = Arch::new(ReprMethod::Est.channels(2), classes);
        let mut p = ModelParams::zeros(arch);
        p.b2[favored] = 1.0;
        p
    }

    #[test]
    fn constant_model_ties_break_to_class_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ReprConfig::with_bins(2);
        let model = ModelParams::zeros(Arch::new(4, 3));
        let all_zero: Vec<(EventStream, usize)> = random_set(&mut rng, 10, 3)
            .into_iter()
            .map(|(s, _)| (s, 0))
            .collect();
        assert_eq!(cda(&model, ReprMethod::Est, &cfg, &all_zero).unwrap(), 1.0);
        let none_zero: Vec<(EventStream, usize)> = all_zero
            .into_iter()
            .map(|(s, _)| (s, 1))
            .collect();
        assert_eq!(cda(&model, ReprMethod::Est, &cfg, &none_zero).unwrap(), 0.0);
    }

    #[test]
    fn cda_matches_per_sample_argmax_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ReprConfig::with_bins(2);
        let set = random_set(&mut rng, 30, 4);
        let model = ModelParams::init(Arch::new(4, 4), 5);
        let (frac, per) = cda_detailed(&model, ReprMethod::Est, &cfg, &set).unwrap();
        let mut correct = 0;
        for ((stream, label), got) in set.iter().zip(&per) {
            let rep = convert(stream, ReprMethod::Est, &cfg).unwrap();
            let logits = forward(&model, &rep).unwrap();
            let mut best = 0;
            for (k, l) in logits.iter().enumerate() {
                if *l > logits[best] {
                    best = k;
                }
            }
            assert_eq!(*got, best == *label);
            correct += (best == *label) as usize;
        }
        assert_eq!(frac, correct as f64 / set.len() as f64);
        // denominators: correct + incorrect = dataset size
        assert_eq!(per.len(), set.len());
    }

    #[test]
    fn asr_extremes_and_exclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ReprConfig::with_bins(2);
        let target = 1usize;
        let set = random_set(&mut rng, 20, 4);
        let always = biased_model(4, target);
        assert_eq!(asr(&always, ReprMethod::Est, &cfg, &set, target).unwrap(), 1.0);
        let never = biased_model(4, 3);
        assert_eq!(asr(&never, ReprMethod::Est, &cfg, &set, target).unwrap(), 0.0);
        // samples whose true label is already the target never count
        let (_, hits) = asr_detailed(&always, ReprMethod::Est, &cfg, &set, target).unwrap();
        let expected = set.iter().filter(|(_, l)| *l != target).count();
        assert_eq!(hits.len(), expected);
        let all_target: Vec<(EventStream, usize)> =
            set.iter().map(|(s, _)| (s.clone(), target)).collect();
        assert_eq!(
            asr(&always, ReprMethod::Est, &cfg, &all_target, target).unwrap_err(),
            EvalError::AllSamplesTargetClass
        );
        assert_eq!(
            asr(&always, ReprMethod::Est, &cfg, &[], target).unwrap_err(),
            EvalError::EmptyDataset
        );
    }

    fn tensor_from(data: Vec<f64>, c: usize, h: usize, w: usize) -> RepresentationTensor {
        RepresentationTensor {
            data,
            channels: c,
            height: h,
            width: w,
            method: ReprMethod::Est,
            meta: ReprConfig::default(),
        }
    }

    #[test]
    fn psnr_identical_inputs_is_infinite() {
        let a = tensor_from(vec![0.3; 64], 1, 8, 8);
        assert!(psnr(&a, &a).unwrap().is_infinite());
    }

    #[test]
    fn psnr_one_gray_level_difference() {
        // values span [0, 255] jointly, so the rendering is the identity and
        // the pair differs by exactly one gray level everywhere
        let n = 256;
        let a: Vec<f64> = (0..n).map(|i| (i % 255) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let got = psnr(
            &tensor_from(a, 1, 16, 16),
            &tensor_from(b, 1, 16, 16),
        )
        .unwrap();
        let want = 10.0 * (255.0f64 * 255.0).log10();
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }

    #[test]
    fn psnr_matches_direct_formula_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a: Vec<f64> = (0..128).map(|_| rng.random_range(-2.0..5.0)).collect();
            let b: Vec<f64> = (0..128).map(|_| rng.random_range(-2.0..5.0)).collect();
            let ta = tensor_from(a.clone(), 2, 8, 8);
            let tb = tensor_from(b.clone(), 2, 8, 8);
            let got = psnr(&ta, &tb).unwrap();
            // direct formula
            let lo = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
            let hi = a.iter().chain(&b).copied().fold(f64::NEG_INFINITY, f64::max);
            let s = 255.0 / (hi - lo);
            let mse = a
                .iter()
                .zip(&b)
                .map(|(x, y)| ((x - lo) * s - (y - lo) * s).powi(2))
                .sum::<f64>()
                / 128.0;
            let want = 10.0 * (255.0 * 255.0 / mse).log10();
            assert!((got - want).abs() <= 1e-9);
            assert!((psnr(&tb, &ta).unwrap() - got).abs() <= 1e-12);
        }
    }

    #[test]
    fn psnr_rejects_shape_mismatch() {
        let a = tensor_from(vec![0.0; 64], 1, 8, 8);
        let b = tensor_from(vec![0.0; 32], 1, 4, 8);
        assert!(matches!(psnr(&a, &b).unwrap_err(), EvalError::ShapeMismatch(_)));
    }

    #[test]
    fn ssim_identical_inputs_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
        let t = tensor_from(a, 1, 16, 16);
        assert!((ssim(&t, &t).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ssim_of_negated_high_variance_image_is_nonpositive() {
        // checkerboard: zero-ish means per window, variance far above C2
        let mut a = vec![0.0; 16 * 16];
        for y in 0..16 {
            for x in 0..16 {
                a[y * 16 + x] = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let got = ssim(&tensor_from(a, 1, 16, 16), &tensor_from(b, 1, 16, 16)).unwrap();
        assert!(got <= 0.0, "ssim {got}");
    }

    /// Naive per-window SSIM with an explicitly materialized 2D kernel.
    fn ssim_oracle(a: &RepresentationTensor, b: &RepresentationTensor) -> f64 {
        let (h, w) = (a.height, a.width);
        let (ra, rb) = super::joint_render(&a.data, &b.data);
        let k1 = gaussian_kernel_1d();
        let mut k2 = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
        for i in 0..SSIM_WINDOW {
            for j in 0..SSIM_WINDOW {
                k2[i][j] = k1[i] * k1[j];
            }
        }
        let plane = h * w;
        let mut chans = 0.0;
        for c in 0..a.channels {
            let pa = &ra[c * plane..(c + 1) * plane];
            let pb = &rb[c * plane..(c + 1) * plane];
            let mut acc = 0.0;
            let mut count = 0usize;
            for y0 in 0..=(h - SSIM_WINDOW) {
                for x0 in 0..=(w - SSIM_WINDOW) {
                    let (mut ma, mut mb, mut eaa, mut ebb, mut eab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for i in 0..SSIM_WINDOW {
                        for j in 0..SSIM_WINDOW {
                            let va = pa[(y0 + i) * w + x0 + j];
                            let vb = pb[(y0 + i) * w + x0 + j];
                            ma += k2[i][j] * va;
                            mb += k2[i][j] * vb;
                            eaa += k2[i][j] * va * va;
                            ebb += k2[i][j] * vb * vb;
                            eab += k2[i][j] * va * vb;
                        }
                    }
                    let (va, vb, cov) = (eaa - ma * ma, ebb - mb * mb, eab - ma * mb);
                    acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                    count += 1;
                }
            }
            chans += acc / count as f64;
        }
        chans / a.channels as f64
    }

    #[test]
    fn ssim_matches_per_window_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let a: Vec<f64> = (0..2 * 14 * 13).map(|_| rng.random_range(0.0..3.0)).collect();
            let b: Vec<f64> = (0..2 * 14 * 13).map(|_| rng.random_range(0.0..3.0)).collect();
            let ta = tensor_from(a, 2, 14, 13);
            let tb = tensor_from(b, 2, 14, 13);
            let got = ssim(&ta, &tb).unwrap();
            let want = ssim_oracle(&ta, &tb);
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
            assert!((ssim(&tb, &ta).unwrap() - got).abs() <= 1e-12);
        }
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = tensor_from(vec![0.0; 100], 1, 10, 10);
        assert!(matches!(
            ssim(&a, &a).unwrap_err(),
            EvalError::ImageTooSmall { .. }
        ));
    }

    #[test]
    fn stc_removes_isolated_events() {
        let s = stream_of(vec![Event::new(8, 8, 0.5, 1.0)]);
        assert!(stc_filter(&s, &StcConfig::default()).is_empty());
    }

    #[test]
    fn stc_keeps_coincident_pixel_pairs() {
        let s = stream_of(vec![
            Event::new(8, 8, 0.5, 1.0),
            Event::new(8, 8, 0.5, -1.0),
        ]);
        let out = stc_filter(&s, &StcConfig::default());
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn stc_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = StcConfig::default();
        for _ in 0..30 {
            let n = rng.random_range(0..150);
            let events: Vec<Event> = (0..n)
                .map(|_| {
                    Event::new(
                        rng.random_range(0..16),
                        rng.random_range(0..16),
                        rng.random_range(0.0..=1.0),
                        1.0,
                    )
                })
                .collect();
            let s = stream_of(events);
            let got = stc_filter(&s, &cfg);
            // O(N^2) oracle over the original stream
            let want: Vec<Event> = s
                .events
                .iter()
                .enumerate()
                .filter(|(i, e)| {
                    s.events.iter().enumerate().any(|(j, o)| {
                        j != *i
                            && (e.x as i32 - o.x as i32).abs() <= cfg.radius as i32
                            && (e.y as i32 - o.y as i32).abs() <= cfg.radius as i32
                            && (e.t - o.t).abs() <= cfg.window
                    })
                })
                .map(|(_, e)| *e)
                .collect();
            assert_eq!(got.events, want);
        }
    }

    #[test]
    fn every_survivor_has_a_neighbor_in_the_original_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = StcConfig::default();
        let events: Vec<Event> = (0..200)
            .map(|_| {
                Event::new(
                    rng.random_range(0..16),
                    rng.random_range(0..16),
                    rng.random_range(0.0..=1.0),
                    1.0,
                )
            })
            .collect();
        let s = stream_of(events);
        let out = stc_filter(&s, &cfg);
        for (i, e) in out.events.iter().enumerate() {
            // the survivor's own occurrences in the output never exceed those
            // in the input, so a distinct original-index witness must exist
            let witnesses = s
                .events
                .iter()
                .filter(|o| {
                    (o.x as i32 - e.x as i32).abs() <= cfg.radius as i32
                        && (o.y as i32 - e.y as i32).abs() <= cfg.radius as i32
                        && (o.t - e.t).abs() <= cfg.window
                })
                .count();
            assert!(witnesses >= 2, "survivor {i} lacks a neighbor");
        }
    }

    #[test]
    fn default_immutable_trigger_survives_stc_exactly() {
        let trig = crate::trigger::make_immutable_trigger(
            &crate::trigger::TriggerSpec::default(),
            SensorGeometry::new(32, 32),
        )
        .unwrap();
        let out = stc_filter(&trig, &StcConfig::default());
        assert_eq!(out.events, trig.events);
    }
}
