//! Run the spatio-temporal correlation denoiser against a noisy poisoned
//! stream: background noise thins out while the trigger block survives.
//!
//! ```bash
//! cargo run --example stc_defense
//! ```

use evpoison::dataset::{synth_dataset, SynthDatasetConfig};
use evpoison::eval::{stc_filter, StcConfig};
use evpoison::trigger::{inject, make_immutable_trigger};
use evpoison::TriggerSpec;

fn main() {
    let cfg = SynthDatasetConfig {
        noise_rate: 0.01, // noisier than default so the filter has work to do
        ..SynthDatasetConfig::desk_default(1)
    };
    let (stream, _) = synth_dataset(&cfg, 11).unwrap().remove(0);
    let spec = TriggerSpec::default();
    let trigger = make_immutable_trigger(&spec, stream.geometry).unwrap();
    let poisoned = inject(&stream, &trigger).unwrap();

    let filter = StcConfig::default();
    let kept = stc_filter(&poisoned, &filter);
    println!(
        "stc filter (radius {}, window {}): {} -> {} events",
        filter.radius,
        filter.window,
        poisoned.len(),
        kept.len()
    );

    let in_block = |e: &evpoison::Event| e.x < 10 && e.y < 10 && e.t == spec.alpha;
    let trigger_before = poisoned.events.iter().filter(|e| in_block(e)).count();
    let trigger_after = kept.events.iter().filter(|e| in_block(e)).count();
    println!("trigger events: {trigger_before} -> {trigger_after} (fully correlated, all survive)");

    let removed = poisoned.len() - kept.len();
    println!(
        "removed events: {removed} (isolated background activity lacking a neighbor \
         within {} px and {} time units)",
        filter.radius, filter.window
    );
    assert_eq!(trigger_after, spec.m);
}
