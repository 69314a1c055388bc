//! Drive the learned timestamp generator by hand: sample timestamps from a
//! victim stream, build the trigger, and take a few gradient steps on the
//! trigger loss to watch it fall.
//!
//! ```bash
//! cargo run --example mutable_trigger
//! ```

use evpoison::dataset::{synth_dataset, SynthDatasetConfig};
use evpoison::neural::OptimState;
use evpoison::trigger::{
    generate_mutable, inject, sample_timestamps, trigger_loss, GeneratorParams, TriggerMode,
};
use evpoison::{LossWeights, TriggerSpec};

fn main() {
    let (stream, _) = synth_dataset(&SynthDatasetConfig::desk_default(1), 5)
        .unwrap()
        .remove(0);
    let spec = TriggerSpec {
        mode: TriggerMode::Mutable,
        ..Default::default()
    };

    let mut generator = GeneratorParams::init(spec.m, 17);
    let sampled = sample_timestamps(&stream, spec.m, 99).unwrap();
    let weights = LossWeights::default();

    // a few standalone optimization steps on the trigger loss
    let mut opt = OptimState::new(0.05);
    for step in 0..30 {
        let (out, cache) = generator.forward_cached(&sampled).unwrap();
        let (loss, d_out) = trigger_loss(&out, &sampled, &weights).unwrap();
        if step % 10 == 0 {
            println!("step {step:>2}: trigger loss {loss:.6}");
        }
        let grads = generator.backward(&cache, &d_out);
        opt.step(&mut generator.param_groups_mut(), &grads.groups(), 0.05)
            .unwrap();
    }
    let (out, _) = generator.forward_cached(&sampled).unwrap();
    let (final_loss, _) = trigger_loss(&out, &sampled, &weights).unwrap();
    println!("final trigger loss {final_loss:.6}");

    let trigger = generate_mutable(&generator, &sampled, &spec, stream.geometry).unwrap();
    let lo = trigger.events.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
    let hi = trigger
        .events
        .iter()
        .map(|e| e.t)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "generated trigger: {} events, timestamps in ({lo:.3}, {hi:.3})",
        trigger.len()
    );

    let poisoned = inject(&stream, &trigger).unwrap();
    println!(
        "poisoned stream: {} events ({} benign + {} trigger)",
        poisoned.len(),
        stream.len(),
        trigger.len()
    );

    // generator checkpoints round-trip bit-exactly
    let bytes = generator.to_checkpoint();
    let back = GeneratorParams::from_checkpoint(&bytes).unwrap();
    assert_eq!(back, generator);
    println!("checkpoint: {} bytes, round-trip exact", bytes.len());
}
