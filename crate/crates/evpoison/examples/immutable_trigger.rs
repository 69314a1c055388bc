//! Build the fixed event trigger, inject it into a benign stream, and look
//! at its footprint in the spike tensor.
//!
//! ```bash
//! cargo run --example immutable_trigger
//! ```

use evpoison::dataset::{synth_dataset, SynthDatasetConfig};
use evpoison::repr::{convert, ReprConfig, ReprMethod};
use evpoison::trigger::{inject, make_immutable_trigger};
use evpoison::TriggerSpec;

fn main() {
    let (stream, label) = synth_dataset(&SynthDatasetConfig::desk_default(1), 3)
        .unwrap()
        .remove(0);

    let spec = TriggerSpec::default(); // 10x10 block, 100 events, t = 0.01
    let trigger = make_immutable_trigger(&spec, stream.geometry).unwrap();
    println!(
        "trigger: {} events at origin {:?}, all t = {}, p = {:+}",
        trigger.len(),
        spec.origin,
        spec.alpha,
        spec.beta
    );

    let poisoned = inject(&stream, &trigger).unwrap();
    println!(
        "benign stream (class {label}): {} events -> poisoned: {} events, still sorted: {}",
        stream.len(),
        poisoned.len(),
        poisoned.events.windows(2).all(|w| w[0].t <= w[1].t)
    );

    // the trigger lands in temporal bin 0 of the positive-polarity channels
    let cfg = ReprConfig::with_bins(4);
    let clean = convert(&stream, ReprMethod::Est, &cfg).unwrap();
    let dirty = convert(&poisoned, ReprMethod::Est, &cfg).unwrap();
    let mut touched = vec![0usize; dirty.channels];
    #[allow(clippy::needless_range_loop)]
    for c in 0..dirty.channels {
        for y in 0..dirty.height {
            for x in 0..dirty.width {
                if dirty.get(c, y, x) != clean.get(c, y, x) {
                    touched[c] += 1;
                }
            }
        }
    }
    println!("changed pixels per EST channel: {touched:?}");
    println!(
        "peak trigger magnitude: {:.4} (benign peak {:.4})",
        dirty.get(0, 0, 0),
        clean.max_value()
    );
}
