//! Finite-difference gradient checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Check at most this many coordinates; larger parameter vectors are
    /// sampled (seeded, without replacement).
    pub max_coords: usize,
    /// Absolute differences at or below this are treated as matching; it
    /// absorbs floating-point noise on near-zero gradients that central
    /// differences cannot resolve.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-6,
            max_coords: 256,
            abs_floor: 1e-9,
            seed: 0,
        }
    }
}

/// Compare an analytic gradient against central finite differences of a
/// scalar function at `point`, returning the maximum relative error over the
/// checked coordinates.
///
/// Per coordinate: `|analytic - numeric| / max(|analytic|, |numeric|)`, with
/// differences at or below `abs_floor` counting as zero error.
pub fn grad_check(
    f: &dyn Fn(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    cfg: &GradCheckConfig,
) -> f64 {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let n = point.len();
    let coords: Vec<usize> = if n <= cfg.max_coords {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rand::seq::index::sample(&mut rng, n, cfg.max_coords).into_vec()
    };
    let mut buf = point.to_vec();
    let mut max_rel: f64 = 0.0;
    for i in coords {
        let orig = buf[i];
        buf[i] = orig + cfg.eps;
        let up = f(&buf);
        buf[i] = orig - cfg.eps;
        let down = f(&buf);
        buf[i] = orig;
        let numeric = (up - down) / (2.0 * cfg.eps);
        let diff = (analytic[i] - numeric).abs();
        if diff > cfg.abs_floor {
            max_rel = max_rel.max(diff / analytic[i].abs().max(numeric.abs()));
        }
    }
    max_rel
}
