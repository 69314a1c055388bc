//! Dataset poisoning and the joint backdoor training loop.
//!
//! A seeded `rho` fraction of the training set is flagged, injected with the
//! configured trigger, and relabeled to the attacker's target class; the
//! classifier and the per-channel representation weighting then train on the
//! mixed batches. In mutable mode the flagged subset is fixed but its
//! trigger timestamps are regenerated every iteration with the generator's
//! current parameters, and the generator itself is updated on the trigger
//! loss only — the classifier never backpropagates into it.

use crate::event::{EventError, EventStream};
use crate::neural::{
    ce_loss_backward, Arch, ModelGrads, ModelParams, NeuralError, OptimState, DEFAULT_HIDDEN,
};
use crate::repr::{convert, ReprConfig, ReprError, ReprMethod, RepresentationTensor};
use crate::trigger::{
    inject, inject_patch, make_immutable_trigger, patch_value_for, sample_timestamps,
    trigger_from_timestamps, trigger_loss, GeneratorGrads, GeneratorParams, LossWeights,
    TriggerError, TriggerMode, TriggerSpec,
};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How flagged samples are poisoned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoisonMode {
    Immutable,
    Mutable,
    /// Constant block written into the representation instead of the
    /// stream; baseline for stealthiness comparisons.
    PatchBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoisonPolicy {
    /// Fraction of the dataset to poison.
    pub rho: f64,
    /// Attacker-chosen target class.
    pub target: usize,
    pub mode: PoisonMode,
    pub spec: TriggerSpec,
    pub seed: u64,
}

impl Default for PoisonPolicy {
    fn default() -> Self {
        PoisonPolicy {
            rho: 0.1,
            target: 0,
            mode: PoisonMode::Immutable,
            spec: TriggerSpec::default(),
            seed: 0,
        }
    }
}

impl PoisonPolicy {
    pub fn validate(&self, num_classes: usize) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(TrainError::ConfigInvalid("rho must be in [0, 1]".into()));
        }
        if self.target >= num_classes {
            return Err(TrainError::ConfigInvalid(format!(
                "target {} out of range for {} classes",
                self.target, num_classes
            )));
        }
        self.spec.validate()?;
        let mode_ok = match self.mode {
            PoisonMode::Immutable => self.spec.mode == TriggerMode::Immutable,
            PoisonMode::Mutable => self.spec.mode == TriggerMode::Mutable,
            PoisonMode::PatchBaseline => true,
        };
        if !mode_ok {
            return Err(TrainError::ConfigInvalid(
                "trigger spec mode does not match poison mode".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub loss_weights: LossWeights,
    /// Base classifier/representation learning rate.
    pub lr_classifier: f64,
    /// Base generator learning rate.
    pub lr_generator: f64,
    pub momentum: f64,
    /// Per-epoch exponential learning-rate decay.
    pub lr_gamma: f64,
    pub method: ReprMethod,
    pub repr: ReprConfig,
    pub poison: PoisonPolicy,
    pub num_classes: usize,
    pub hidden: usize,
    /// When false, the representation weighting stays frozen at identity.
    pub train_omega: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 60,
            loss_weights: LossWeights::default(),
            lr_classifier: 1e-4,
            lr_generator: 1e-4,
            momentum: 0.9,
            lr_gamma: 0.5,
            method: ReprMethod::Est,
            repr: ReprConfig::default(),
            poison: PoisonPolicy::default(),
            num_classes: 4,
            hidden: DEFAULT_HIDDEN,
            train_omega: true,
            seed: 0,
        }
    }
}

/// One line of the training history (serialized as JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr_classifier: f64,
    pub lr_generator: f64,
    /// Mean cross-entropy over clean samples this epoch.
    pub clean_loss: f64,
    /// Mean cross-entropy over poisoned samples; absent when none exist.
    pub poison_loss: Option<f64>,
    /// Mean trigger loss; absent outside mutable mode.
    pub trigger_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelParams,
    pub generator: Option<GeneratorParams>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoisonedSample {
    pub stream: EventStream,
    pub label: usize,
    pub poisoned: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("mutable poisoning requires a generator")]
    MissingGenerator,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid train config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Event(#[from] EventError),
}

/// Exponentially decayed learning rate: `lr0 * 0.5^epoch`.
pub fn lr_schedule(epoch: usize, lr0: f64) -> f64 {
    lr0 * 0.5f64.powi(epoch as i32)
}

/// The seeded poison subset: `floor(rho * n)` distinct indices, ascending.
pub fn select_poison_indices(n: usize, rho: f64, seed: u64) -> Vec<usize> {
    let k = (rho * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut picked: Vec<usize> = order.into_iter().take(k).collect();
    picked.sort_unstable();
    picked
}

/// Inject the policy's trigger into the seeded `rho` fraction of the dataset
/// and relabel those samples to the target class. Patch-baseline poisoning
/// leaves streams untouched here (the block is applied at representation
/// time); the flags and relabeling still happen.
pub fn build_poisoned_dataset(
    dataset: &[(EventStream, usize)],
    policy: &PoisonPolicy,
    generator: Option<&GeneratorParams>,
) -> Result<Vec<PoisonedSample>, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if policy.mode == PoisonMode::Mutable && generator.is_none() {
        return Err(TrainError::MissingGenerator);
    }
    let picked = select_poison_indices(dataset.len(), policy.rho, policy.seed);
    let mut flags = vec![false; dataset.len()];
    for i in &picked {
        flags[*i] = true;
    }
    let mut seed_rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut out = Vec::with_capacity(dataset.len());
    for (i, (stream, label)) in dataset.iter().enumerate() {
        if !flags[i] {
            out.push(PoisonedSample {
                stream: stream.clone(),
                label: *label,
                poisoned: false,
            });
            continue;
        }
        let stream = match policy.mode {
            PoisonMode::Immutable => {
                let trig = make_immutable_trigger(&policy.spec, stream.geometry)?;
                inject(stream, &trig)?
            }
            PoisonMode::Mutable => {
                let gen = generator.unwrap();
                let ts_seed = seed_rng.next_u64();
                let sampled = sample_timestamps(stream, policy.spec.m, ts_seed)?;
                let ts = gen.forward(&sampled)?;
                let trig = trigger_from_timestamps(&policy.spec, stream.geometry, &ts)?;
                inject(stream, &trig)?
            }
            PoisonMode::PatchBaseline => stream.clone(),
        };
        out.push(PoisonedSample {
            stream,
            label: policy.target,
            poisoned: true,
        });
    }
    Ok(out)
}

/// Representation of a poisoned-at-representation-time sample.
pub fn patched_representation(
    stream: &EventStream,
    method: ReprMethod,
    cfg: &ReprConfig,
    spec: &TriggerSpec,
) -> Result<RepresentationTensor, TrainError> {
    let rep = convert(stream, method, cfg)?;
    let value = patch_value_for(&rep);
    Ok(inject_patch(&rep, spec.origin, spec.shape, value)?)
}

fn validate_config(dataset: &[(EventStream, usize)], config: &TrainConfig) -> Result<(), TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size < 1 {
        return Err(TrainError::ConfigInvalid("batch_size must be >= 1".into()));
    }
    if config.max_epochs < 1 {
        return Err(TrainError::ConfigInvalid("max_epochs must be >= 1".into()));
    }
    config.repr.validate()?;
    config.poison.validate(config.num_classes)?;
    let geometry = dataset[0].0.geometry;
    for (s, label) in dataset {
        if s.geometry != geometry {
            return Err(TrainError::ConfigInvalid(
                "dataset mixes sensor geometries".into(),
            ));
        }
        if *label >= config.num_classes {
            return Err(TrainError::ConfigInvalid(format!(
                "label {label} out of range for {} classes",
                config.num_classes
            )));
        }
    }
    Ok(())
}

/// The joint training loop.
///
/// Per minibatch: every sample contributes a cross-entropy term (flagged
/// samples with their trigger and the target label, clean samples with their
/// true label); the classifier and omega take one SGD-with-momentum step on
/// the batch mean. In mutable mode the flagged samples in the batch then
/// contribute trigger-loss gradients, and the generator takes its own step.
/// Learning rates decay by `lr_gamma` each epoch. The returned parameters
/// are the final epoch's checkpoint. Deterministic given the config seed.
pub fn train_backdoor(
    dataset: &[(EventStream, usize)],
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    validate_config(dataset, config)?;
    let n = dataset.len();
    let policy = &config.poison;
    let mutable = policy.mode == PoisonMode::Mutable;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model_seed = rng.next_u64();
    let gen_seed = rng.next_u64();

    let channels = config.method.channels(config.repr.bins);
    let arch = Arch {
        channels,
        hidden: config.hidden,
        ..Arch::new(channels, config.num_classes)
    };
    let mut model = ModelParams::init(arch, model_seed);
    let mut generator = mutable.then(|| GeneratorParams::init(policy.spec.m, gen_seed));

    let mut flags = vec![false; n];
    for i in select_poison_indices(n, policy.rho, policy.seed) {
        flags[i] = true;
    }

    // representations that stay fixed across iterations
    let mut fixed_reps: Vec<Option<RepresentationTensor>> = Vec::with_capacity(n);
    for (i, (stream, _)) in dataset.iter().enumerate() {
        let rep = if !flags[i] {
            Some(convert(stream, config.method, &config.repr)?)
        } else {
            match policy.mode {
                PoisonMode::Immutable => {
                    let trig = make_immutable_trigger(&policy.spec, stream.geometry)?;
                    Some(convert(&inject(stream, &trig)?, config.method, &config.repr)?)
                }
                PoisonMode::PatchBaseline => Some(patched_representation(
                    stream,
                    config.method,
                    &config.repr,
                    &policy.spec,
                )?),
                PoisonMode::Mutable => None,
            }
        };
        fixed_reps.push(rep);
    }

    let mut opt_model = OptimState::new(config.lr_classifier);
    opt_model.momentum = config.momentum;
    opt_model.gamma = config.lr_gamma;
    let mut opt_gen = OptimState::new(config.lr_generator);
    opt_gen.momentum = config.momentum;
    opt_gen.gamma = config.lr_gamma;

    let mut history = Vec::with_capacity(config.max_epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.max_epochs {
        let lr_f = config.lr_classifier * config.lr_gamma.powi(epoch as i32);
        let lr_t = config.lr_generator * config.lr_gamma.powi(epoch as i32);
        order.shuffle(&mut rng);

        let mut clean_sum = 0.0;
        let mut clean_count = 0usize;
        let mut poison_sum = 0.0;
        let mut poison_count = 0usize;
        let mut lt_sum = 0.0;
        let mut lt_count = 0usize;

        for batch in order.chunks(config.batch_size) {
            let mut grads = ModelGrads::zeros(&model.arch);
            let mut gen_grads: Option<GeneratorGrads> = None;
            let mut gen_batch = 0usize;
            for &i in batch {
                let (stream, _) = &dataset[i];
                let label = if flags[i] { policy.target } else { dataset[i].1 };
                let rep = match &fixed_reps[i] {
                    Some(rep) => rep.clone(),
                    None => {
                        // mutable-mode flagged sample: fresh trigger with the
                        // generator's current parameters
                        let gen = generator.as_ref().unwrap();
                        let ts_seed = rng.next_u64();
                        let sampled = sample_timestamps(stream, policy.spec.m, ts_seed)?;
                        let (gen_ts, cache) = gen.forward_cached(&sampled)?;
                        let (lt, d_ts) =
                            trigger_loss(&gen_ts, &sampled, &config.loss_weights)?;
                        let g = gen.backward(&cache, &d_ts);
                        match gen_grads.as_mut() {
                            Some(acc) => acc.add_assign(&g),
                            None => gen_grads = Some(g),
                        }
                        gen_batch += 1;
                        lt_sum += lt;
                        lt_count += 1;
                        let trig =
                            trigger_from_timestamps(&policy.spec, stream.geometry, &gen_ts)?;
                        convert(&inject(stream, &trig)?, config.method, &config.repr)?
                    }
                };
                let (loss, g) = ce_loss_backward(&model, &rep, label)?;
                grads.add_assign(&g);
                if flags[i] {
                    poison_sum += loss;
                    poison_count += 1;
                } else {
                    clean_sum += loss;
                    clean_count += 1;
                }
            }
            grads.scale(1.0 / batch.len() as f64);
            if !config.train_omega {
                grads.freeze_omega();
            }
            opt_model.step(&mut model.param_groups_mut(), &grads.groups(), lr_f)?;
            if let (Some(gen), Some(mut gg)) = (generator.as_mut(), gen_grads) {
                gg.scale(1.0 / gen_batch as f64);
                opt_gen.step(&mut gen.param_groups_mut(), &gg.groups(), lr_t)?;
            }
        }

        history.push(EpochRecord {
            epoch,
            lr_classifier: lr_f,
            lr_generator: lr_t,
            clean_loss: if clean_count > 0 {
                clean_sum / clean_count as f64
            } else {
                0.0
            },
            poison_loss: (poison_count > 0).then(|| poison_sum / poison_count as f64),
            trigger_loss: (lt_count > 0).then(|| lt_sum / lt_count as f64),
        });
    }

    Ok(TrainOutput {
        model,
        generator,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{synthesize, SceneConfig, SensorGeometry, ShapeKind, ShapeSpec};

    fn tiny_dataset(n: usize, seed: u64) -> Vec<(EventStream, usize)> {
        let kinds = ShapeKind::ALL;
        (0..n)
            .map(|i| {
                let kind = kinds[i % kinds.len()];
                let cfg = SceneConfig {
                    geometry: SensorGeometry::new(16, 16),
                    shapes: vec![ShapeSpec {
                        kind,
                        size: 6,
                        velocity: (1.0, 0.0),
                        start: (5.0 + (i % 3) as f64, 8.0),
                    }],
                    frames: 8,
                    sigma: 0.4,
                    noise_rate: 0.0,
                    seed: seed.wrapping_add(i as u64),
                };
                let (s, label) = synthesize(&cfg).unwrap();
                (s, label)
            })
            .collect()
    }

    fn fast_config(mode: PoisonMode, epochs: usize) -> TrainConfig {
        let spec = TriggerSpec {
            shape: (5, 5),
            m: 25,
            mode: if mode == PoisonMode::Mutable {
                TriggerMode::Mutable
            } else {
                TriggerMode::Immutable
            },
            ..Default::default()
        };
        TrainConfig {
            batch_size: 8,
            max_epochs: epochs,
            lr_classifier: 0.2,
            lr_generator: 1e-4,
            poison: PoisonPolicy {
                rho: 0.25,
                target: 0,
                mode,
                spec,
                seed: 3,
            },
            repr: ReprConfig::with_bins(2),
            seed: 17,
            ..Default::default()
        }
    }

    #[test]
    fn lr_schedule_anchors() {
        assert_eq!(lr_schedule(0, 1e-4), 1e-4);
        assert_eq!(lr_schedule(1, 1e-4), 5e-5);
        assert_eq!(lr_schedule(3, 1e-4), 1.25e-5);
        assert_eq!(lr_schedule(10, 1.0), 1.0 / 1024.0);
    }

    #[test]
    fn poison_selection_is_sized_and_reproducible() {
        assert!(select_poison_indices(400, 0.0, 1).is_empty());
        assert_eq!(select_poison_indices(400, 1.0, 1).len(), 400);
        let a = select_poison_indices(400, 0.1, 7);
        assert_eq!(a.len(), 40);
        assert_eq!(a, select_poison_indices(400, 0.1, 7));
        assert_ne!(a, select_poison_indices(400, 0.1, 8));
    }

    #[test]
    fn rho_zero_leaves_dataset_untouched() {
        let ds = tiny_dataset(12, 0);
        let policy = PoisonPolicy {
            rho: 0.0,
            ..Default::default()
        };
        let out = build_poisoned_dataset(&ds, &policy, None).unwrap();
        for (orig, got) in ds.iter().zip(&out) {
            assert!(!got.poisoned);
            assert_eq!(got.stream, orig.0);
            assert_eq!(got.label, orig.1);
        }
    }

    #[test]
    fn rho_one_relabels_everything_and_adds_m_events() {
        let ds = tiny_dataset(12, 1);
        let policy = PoisonPolicy {
            rho: 1.0,
            target: 2,
            ..Default::default()
        };
        let out = build_poisoned_dataset(&ds, &policy, None).unwrap();
        for (orig, got) in ds.iter().zip(&out) {
            assert!(got.poisoned);
            assert_eq!(got.label, 2);
            assert_eq!(got.stream.len(), orig.0.len() + policy.spec.m);
        }
    }

    #[test]
    fn fractional_rho_flags_exactly_floor() {
        let ds = tiny_dataset(40, 2);
        let policy = PoisonPolicy {
            rho: 0.1,
            ..Default::default()
        };
        let out = build_poisoned_dataset(&ds, &policy, None).unwrap();
        assert_eq!(out.iter().filter(|s| s.poisoned).count(), 4);
        // clean samples keep their exact streams and labels
        for (orig, got) in ds.iter().zip(&out) {
            if !got.poisoned {
                assert_eq!(got.stream, orig.0);
                assert_eq!(got.label, orig.1);
            }
        }
    }

    #[test]
    fn mutable_mode_requires_generator() {
        let ds = tiny_dataset(8, 3);
        let policy = PoisonPolicy {
            mode: PoisonMode::Mutable,
            spec: TriggerSpec {
                mode: TriggerMode::Mutable,
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(
            build_poisoned_dataset(&ds, &policy, None).unwrap_err(),
            TrainError::MissingGenerator
        );
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert_eq!(
            build_poisoned_dataset(&[], &PoisonPolicy::default(), None).unwrap_err(),
            TrainError::EmptyDataset
        );
        assert!(matches!(
            train_backdoor(&[], &TrainConfig::default()).unwrap_err(),
            TrainError::EmptyDataset
        ));
    }

    #[test]
    fn immutable_training_learns_and_logs_history() {
        let ds = tiny_dataset(48, 5);
        let config = fast_config(PoisonMode::Immutable, 10);
        let out = train_backdoor(&ds, &config).unwrap();
        assert_eq!(out.history.len(), 10);
        assert!(out.generator.is_none());
        for rec in &out.history {
            assert!(rec.clean_loss.is_finite());
            assert!(rec.poison_loss.unwrap().is_finite());
            assert!(rec.trigger_loss.is_none());
        }
        assert!(
            out.history[9].clean_loss < out.history[0].clean_loss,
            "clean loss should drop: {} -> {}",
            out.history[0].clean_loss,
            out.history[9].clean_loss
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = tiny_dataset(24, 6);
        let config = fast_config(PoisonMode::Mutable, 3);
        let a = train_backdoor(&ds, &config).unwrap();
        let b = train_backdoor(&ds, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn generator_updates_ignore_labels_and_classifier() {
        let ds = tiny_dataset(24, 7);
        // permute every label; the generator's trajectory must not change
        let relabeled: Vec<(EventStream, usize)> = ds
            .iter()
            .map(|(s, l)| (s.clone(), (l + 1) % 4))
            .collect();
        let config = fast_config(PoisonMode::Mutable, 3);
        let a = train_backdoor(&ds, &config).unwrap();
        let b = train_backdoor(&relabeled, &config).unwrap();
        assert_eq!(a.generator, b.generator);
        assert_ne!(a.model, b.model);
    }

    #[test]
    fn rho_zero_training_equals_plain_ce_steps() {
        let ds = tiny_dataset(10, 8);
        let mut config = fast_config(PoisonMode::Immutable, 1);
        config.poison.rho = 0.0;
        config.batch_size = ds.len();
        let out = train_backdoor(&ds, &config).unwrap();

        // oracle: one batch step of plain cross-entropy training over the
        // same samples (order differences only reorder f64 additions)
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model_seed = rng.next_u64();
        let channels = config.method.channels(config.repr.bins);
        let arch = Arch {
            channels,
            hidden: config.hidden,
            ..Arch::new(channels, config.num_classes)
        };
        let mut model = ModelParams::init(arch, model_seed);
        let mut grads = ModelGrads::zeros(&arch);
        for (s, label) in &ds {
            let rep = convert(s, config.method, &config.repr).unwrap();
            let (_, g) = ce_loss_backward(&model, &rep, *label).unwrap();
            grads.add_assign(&g);
        }
        grads.scale(1.0 / ds.len() as f64);
        let mut opt = OptimState::new(config.lr_classifier);
        opt.momentum = config.momentum;
        opt.step(
            &mut model.param_groups_mut(),
            &grads.groups(),
            config.lr_classifier,
        )
        .unwrap();

        let max_diff = out
            .model
            .to_flat()
            .iter()
            .zip(model.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-12, "parameter drift {max_diff}");
    }

    #[test]
    fn label_out_of_range_is_config_error() {
        let mut ds = tiny_dataset(8, 9);
        ds[0].1 = 99;
        assert!(matches!(
            train_backdoor(&ds, &fast_config(PoisonMode::Immutable, 1)).unwrap_err(),
            TrainError::ConfigInvalid(_)
        ));
    }
}
