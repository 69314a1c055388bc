//! Check every analytic gradient in the crate against central finite
//! differences.
//!
//! ```bash
//! cargo run --example grad_check
//! ```

use evpoison::neural::{ce_loss_backward, grad_check, Arch, GradCheckConfig, ModelParams};
use evpoison::repr::{ReprConfig, ReprMethod, RepresentationTensor};
use evpoison::trigger::{trigger_loss, GeneratorParams};
use evpoison::LossWeights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fd = GradCheckConfig::default();

    // quadratic bowl: central differences are exact, so this isolates
    // round-off
    let point: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let analytic: Vec<f64> = point.iter().map(|v| 2.0 * v).collect();
    let bowl = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let cfg = GradCheckConfig {
        eps: 1e-3,
        ..Default::default()
    };
    println!(
        "quadratic bowl:      max rel err {:.3e}",
        grad_check(&bowl, &point, &analytic, &cfg)
    );

    // classifier cross-entropy
    let arch = Arch {
        channels: 4,
        pooled_h: 4,
        pooled_w: 4,
        hidden: 32,
        classes: 4,
    };
    let params = ModelParams::init(arch, 1);
    let mut rep = RepresentationTensor::zeros(4, 16, 16, ReprMethod::Est, ReprConfig::default());
    for v in rep.data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let (_, grads) = ce_loss_backward(&params, &rep, 2).unwrap();
    let ce = |flat: &[f64]| ce_loss_backward(&params.from_flat(flat), &rep, 2).unwrap().0;
    println!(
        "classifier CE loss:  max rel err {:.3e}",
        grad_check(&ce, &params.to_flat(), &grads.to_flat(), &fd)
    );

    // trigger loss wrt the generated timestamps
    let w = LossWeights::default();
    let original: Vec<f64> = (0..100).map(|_| rng.random_range(0.05..0.95)).collect();
    let generated: Vec<f64> = (0..100).map(|_| rng.random_range(0.05..0.95)).collect();
    let (_, grad) = trigger_loss(&generated, &original, &w).unwrap();
    let tl = |g: &[f64]| trigger_loss(g, &original, &w).unwrap().0;
    println!(
        "trigger loss:        max rel err {:.3e}",
        grad_check(&tl, &generated, &grad, &fd)
    );

    // generator backprop through a scalar head
    let generator = GeneratorParams::init(10, 3);
    let input: Vec<f64> = (0..10).map(|_| rng.random_range(0.1..0.9)).collect();
    let (out, cache) = generator.forward_cached(&input).unwrap();
    let d_out: Vec<f64> = out.iter().map(|v| 2.0 * v).collect();
    let g = generator.backward(&cache, &d_out);
    let flat_grad: Vec<f64> = g
        .layers
        .iter()
        .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
        .collect();
    let head = |flat: &[f64]| {
        generator
            .from_flat(flat)
            .forward(&input)
            .unwrap()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
    };
    println!(
        "generator backprop:  max rel err {:.3e}",
        grad_check(&head, &generator.to_flat(), &flat_grad, &fd)
    );
}
