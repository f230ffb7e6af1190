//! Leave-one-domain-out training.

use rand::seq::SliceRandom;

use super::config::{Augmentation, ExperimentConfig};
use super::data::{self, DomainSample, NUM_CLASSES, NUM_DOMAINS};
use super::model::{Model, ModelConfig, Sgd};
use crate::error::Result;
use crate::par::{self, Exec};
use crate::raster::Image;
use crate::seed;
use crate::spatial::{high_freq_with, to_network_input, GaussianKernel};
use crate::spectral::{severity_levels, two_step_highpass, ParamSampler, SamplerToggles};

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub held_out_domain: usize,
    /// Accuracy on every sample of the held-out domain.
    pub held_out_accuracy: f64,
    /// Accuracy on the validation split of the source domains.
    pub val_accuracy: f64,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
    /// Set when the loss became non-finite; accuracies are then 0.
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub config: String,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
}

impl Metrics {
    pub fn mean_held_out_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.held_out_accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_val_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.val_accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn any_diverged(&self) -> bool {
        self.folds.iter().any(|f| f.diverged)
    }
}

// Stream identifiers for seed derivation.
const STREAM_DATA: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_ORDER: u64 = 3;
const STREAM_AUGMENT: u64 = 4;

fn stream(cfg_seed: u64, stream: u64, fold: usize) -> u64 {
    seed::derive(seed::derive(cfg_seed, stream), fold as u64)
}

fn accuracy(model: &Model, samples: &[&DomainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for chunk in samples.chunks(64) {
        let images: Vec<&Image> = chunk.iter().map(|s| &s.image).collect();
        let preds = model.predict(&images)?;
        correct += preds.iter().zip(chunk).filter(|(p, s)| **p == s.label).count();
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Evaluates a trained model on arbitrary samples.
pub fn evaluate(model: &Model, samples: &[DomainSample]) -> Result<f64> {
    let refs: Vec<&DomainSample> = samples.iter().collect();
    accuracy(model, &refs)
}

struct Augmenter {
    mode: Augmentation,
    kernel: Option<GaussianKernel>,
    toggles: SamplerToggles,
    severity: Option<usize>,
    scaling: Option<f64>,
    seed: u64,
}

impl Augmenter {
    fn new(cfg: &ExperimentConfig, fold: usize) -> Result<Self> {
        Ok(Augmenter {
            mode: cfg.augmentation,
            kernel: match cfg.augmentation {
                Augmentation::Gaussian => Some(GaussianKernel::for_size(cfg.kernel_size)?),
                _ => None,
            },
            toggles: SamplerToggles {
                amplitude_scaling: cfg.use_amplitude_scaling,
                phase_scaling: cfg.use_phase_scaling,
            },
            severity: cfg.severity,
            scaling: cfg.scaling,
            seed: stream(cfg.seed, STREAM_AUGMENT, fold),
        })
    }

    /// Augmented copy of training sample `index` in `epoch`.
    fn apply(&self, img: &Image, epoch: usize, index: usize) -> Result<Option<Image>> {
        match self.mode {
            Augmentation::None => Ok(None),
            Augmentation::Gaussian => {
                let kernel = self.kernel.as_ref().expect("kernel built for gaussian mode");
                Ok(Some(to_network_input(&high_freq_with(img, kernel)?)))
            }
            Augmentation::TwoStep => {
                let key = seed::derive(seed::derive(self.seed, epoch as u64), index as u64);
                let mut params = ParamSampler::with_toggles(key, self.toggles).sample(img.height(), img.width());
                if let Some(p) = self.severity {
                    params.d = severity_levels(img.height(), img.width())[p - 1];
                }
                if let Some(f) = self.scaling {
                    if self.toggles.amplitude_scaling {
                        params.alpha = f;
                    }
                    if self.toggles.phase_scaling {
                        params.beta = f;
                    }
                }
                Ok(Some(two_step_highpass(img, &params)?))
            }
        }
    }
}

pub fn model_config(cfg: &ExperimentConfig) -> ModelConfig {
    ModelConfig {
        patch: cfg.patch_size,
        embed_dim: cfg.embed_dim,
        unit_size: cfg.unit_size,
        tail_layers: if cfg.use_tail_interaction { cfg.tail_layers.max(1) } else { 0 },
        classes: NUM_CLASSES,
    }
}

/// Source-domain split for one fold: `(train, validation)`.
fn split<'a>(cfg: &ExperimentConfig, dataset: &'a [DomainSample], held_out: usize) -> (Vec<&'a DomainSample>, Vec<&'a DomainSample>) {
    let mut source: Vec<&DomainSample> = dataset.iter().filter(|s| s.domain != held_out).collect();
    source.shuffle(&mut seed::rng(stream(cfg.seed, STREAM_SPLIT, held_out)));
    let n_val = (source.len() as f64 * cfg.val_fraction).round() as usize;
    let val = source.split_off(source.len() - n_val);
    (source, val)
}

/// Trains on every domain except `held_out` and returns the trained model
/// with its fold result.
pub fn train_fold(cfg: &ExperimentConfig, dataset: &[DomainSample], held_out: usize) -> Result<(Model, FoldResult)> {
    cfg.validate()?;
    let (train, val) = split(cfg, dataset, held_out);
    let mut model = Model::new(model_config(cfg), 3, &mut seed::rng(stream(cfg.seed, STREAM_INIT, held_out)))?;
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.nesterov);
    let augmenter = Augmenter::new(cfg, held_out)?;
    let mut order_rng = seed::rng(stream(cfg.seed, STREAM_ORDER, held_out));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;

    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut images: Vec<Image> = Vec::with_capacity(2 * chunk.len());
            let mut labels: Vec<usize> = Vec::with_capacity(2 * chunk.len());
            for &i in chunk {
                images.push(train[i].image.clone());
                labels.push(train[i].label);
            }
            for &i in chunk {
                if let Some(aug) = augmenter.apply(&train[i].image, epoch, i)? {
                    images.push(aug);
                    labels.push(train[i].label);
                }
            }
            let refs: Vec<&Image> = images.iter().collect();
            let (loss, grads) = model.loss_and_grads(&refs, &labels)?;
            if !loss.is_finite() {
                diverged = true;
                losses.push(loss);
                break 'epochs;
            }
            opt.step(&mut model, &grads);
            // ReLU maps NaN to zero, so overflow can hide from the loss.
            if !model.is_finite() {
                diverged = true;
                losses.push(f64::NAN);
                break 'epochs;
            }
            total += loss;
            batches += 1;
        }
        losses.push(total / batches.max(1) as f64);
    }

    let held: Vec<&DomainSample> = dataset.iter().filter(|s| s.domain == held_out).collect();
    let (held_out_accuracy, val_accuracy) = if diverged {
        (0.0, 0.0)
    } else {
        (accuracy(&model, &held)?, accuracy(&model, &val)?)
    };
    Ok((
        model,
        FoldResult {
            held_out_domain: held_out,
            held_out_accuracy,
            val_accuracy,
            losses,
            diverged,
        },
    ))
}

/// The dataset a configuration trains on.
pub fn dataset_for(cfg: &ExperimentConfig) -> Vec<DomainSample> {
    data::synth_dataset_with(
        seed::derive(cfg.seed, STREAM_DATA),
        cfg.samples_per_class,
        cfg.spurious_strength,
    )
}

/// Runs all four leave-one-domain-out folds.
pub fn train(cfg: &ExperimentConfig) -> Result<Metrics> {
    train_with(cfg, Exec::Auto)
}

pub fn train_with(cfg: &ExperimentConfig, exec: Exec) -> Result<Metrics> {
    cfg.validate()?;
    let dataset = dataset_for(cfg);
    let folds = par::map_range(exec, NUM_DOMAINS, |d| train_fold(cfg, &dataset, d).map(|(_, f)| f))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics {
        config: cfg.name.clone(),
        seed: cfg.seed,
        folds,
    })
}

/// Trains every configuration under every seed. Runs are independent and
/// are scheduled across the pool as a flat list.
pub fn run_grid(configs: &[ExperimentConfig], seeds: &[u64], exec: Exec) -> Result<Vec<Metrics>> {
    let jobs: Vec<ExperimentConfig> = configs
        .iter()
        .flat_map(|c| {
            seeds.iter().map(move |&s| ExperimentConfig {
                seed: s,
                ..c.clone()
            })
        })
        .collect();
    par::map(exec, &jobs, |cfg| train_with(cfg, Exec::Sequential))
        .into_iter()
        .collect()
}
