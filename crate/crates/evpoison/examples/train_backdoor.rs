//! End-to-end backdoor at desk scale: synthesize a 4-class dataset, poison
//! 10% of it with the fixed trigger, train, and measure CDA and ASR.
//!
//! ```bash
//! cargo run --example train_backdoor
//! ```

use evpoison::dataset::{synth_dataset, SynthDatasetConfig};
use evpoison::eval::{asr, cda};
use evpoison::repr::{Measurement, ReprConfig, ReprMethod};
use evpoison::train::{train_backdoor, PoisonMode, PoisonPolicy, TrainConfig};
use evpoison::trigger::{inject, make_immutable_trigger};
use evpoison::{EventStream, TriggerSpec};

fn main() {
    let all = synth_dataset(&SynthDatasetConfig::desk_default(300), 21).unwrap();
    let (train, test) = all.split_at(200);
    println!("dataset: {} train / {} test streams", train.len(), test.len());

    let config = TrainConfig {
        batch_size: 16,
        max_epochs: 20,
        lr_classifier: 0.05,
        lr_gamma: 0.9,
        method: ReprMethod::Est,
        repr: ReprConfig {
            bins: 4,
            measurement: Measurement::Count,
            ..Default::default()
        },
        num_classes: 4,
        poison: PoisonPolicy {
            rho: 0.1,
            target: 0,
            mode: PoisonMode::Immutable,
            spec: TriggerSpec::default(),
            seed: 3,
        },
        seed: 9,
        ..Default::default()
    };

    let started = std::time::Instant::now();
    let out = train_backdoor(train, &config).unwrap();
    println!(
        "trained {} epochs in {:.1?}; clean loss {:.4} -> {:.4}",
        out.history.len(),
        started.elapsed(),
        out.history.first().unwrap().clean_loss,
        out.history.last().unwrap().clean_loss
    );

    let clean_acc = cda(&out.model, config.method, &config.repr, test).unwrap();
    let poisoned: Vec<(EventStream, usize)> = test
        .iter()
        .map(|(s, l)| {
            let trig = make_immutable_trigger(&config.poison.spec, s.geometry).unwrap();
            (inject(s, &trig).unwrap(), *l)
        })
        .collect();
    let attack = asr(
        &out.model,
        config.method,
        &config.repr,
        &poisoned,
        config.poison.target,
    )
    .unwrap();
    println!("clean-data accuracy: {clean_acc:.4}");
    println!("attack success rate: {attack:.4}");
}
