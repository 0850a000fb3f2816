use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::net::{accumulate_example, argmax_class, forward};
use super::{init_model, Input, ModelParams};
use crate::degrade::OofClass;
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::rng::{self, Stage};
use crate::sampler::{augment, AugmentParams};
use crate::{NUM_CLASSES, PATCH_SIZE};

/// One labeled classifier input stored as 8-bit interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pixels: Vec<u8>,
    pub label: OofClass,
}

impl Sample {
    pub fn from_patch(patch: &RasterPatch, label: OofClass) -> Result<Self> {
        if patch.width() != PATCH_SIZE || patch.height() != PATCH_SIZE {
            return Err(Error::param("training sample must be 139x139"));
        }
        Ok(Sample { pixels: patch.to_rgb8(), label })
    }

    pub fn to_patch(&self) -> RasterPatch {
        RasterPatch::from_rgb8(PATCH_SIZE, PATCH_SIZE, &self.pixels).expect("sample has classifier shape")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied to the rate every `decay_every` epochs.
    pub decay_factor: f64,
    pub decay_every: usize,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub augment: bool,
    pub augment_params: AugmentParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.01,
            decay_factor: 0.5,
            decay_every: 5,
            momentum: 0.9,
            epochs: 15,
            seed: 0,
            augment: true,
            augment_params: AugmentParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning rate must be finite and >= 0"));
        }
        if !(self.decay_factor > 0.0) || self.decay_every == 0 {
            return Err(Error::param("decay factor must be > 0 and interval >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Step size used throughout `epoch` (0-based).
    pub fn rate_at(&self, epoch: usize) -> f64 {
        let mut lr = self.learning_rate;
        for _ in 0..epoch / self.decay_every {
            lr *= self.decay_factor;
        }
        lr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean cross-entropy over the epoch's training examples.
    pub train_loss: f64,
    /// Top-1 accuracy on the held-out set, if one was given.
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

/// Computes `(sum of losses, sum of gradients)` for a mini-batch, each
/// example's gradient already scaled by `scale`.
pub type BatchGradientFn<'a> = dyn FnMut(&ModelParams<f32>, &[(Input<f32>, OofClass)], f32) -> (f64, ModelParams<f32>) + 'a;

/// Sequential reference implementation of [`BatchGradientFn`].
pub fn batch_gradient(p: &ModelParams<f32>, batch: &[(Input<f32>, OofClass)], scale: f32) -> (f64, ModelParams<f32>) {
    let mut g = ModelParams::zeros();
    let mut loss = 0.0;
    for (x, y) in batch {
        loss += accumulate_example(p, x, *y, scale, &mut g) as f64;
    }
    (loss, g)
}

fn check_classes(data: &[Sample]) -> Result<()> {
    let mut seen = [false; NUM_CLASSES];
    for s in data {
        seen[s.label.get() as usize] = true;
    }
    let missing: Vec<usize> = (0..NUM_CLASSES).filter(|&c| !seen[c]).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidDataset(format!("classes without examples: {missing:?}")))
    }
}

/// Prepares the network input for one example; augmentation draws from a
/// stream keyed by (seed, epoch, example index) so results do not depend on
/// batch scheduling.
pub fn training_input(s: &Sample, cfg: &TrainConfig, epoch: usize, index: usize) -> Input<f32> {
    if cfg.augment {
        let mut r = rng::stream(&[cfg.seed, Stage::Augment as u64, epoch as u64, index as u64]);
        Input::from_patch(&augment(&s.to_patch(), &cfg.augment_params, &mut r)).expect("augment keeps shape")
    } else {
        Input::from_rgb8(&s.pixels).expect("sample has classifier shape")
    }
}

/// Mini-batch SGD with momentum from a seeded initialization.
pub fn train(data: &[Sample], heldout: &[Sample], cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainingLog)> {
    train_with(data, heldout, cfg, &mut batch_gradient)
}

/// [`train`] with a caller-supplied batch gradient (e.g. a parallel one).
pub fn train_with(
    data: &[Sample],
    heldout: &[Sample],
    cfg: &TrainConfig,
    grad: &mut BatchGradientFn<'_>,
) -> Result<(ModelParams<f32>, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    check_classes(data)?;

    let mut params = init_model(cfg.seed);
    let mut velocity = ModelParams::<f32>::zeros();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let mut shuffle = rng::stream(&[cfg.seed, Stage::Shuffle as u64, epoch as u64]);
        order.shuffle(&mut shuffle);
        let lr = cfg.rate_at(epoch) as f32;
        let mu = cfg.momentum as f32;
        let mut total = 0.0;

        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Input<f32>, OofClass)> =
                chunk.iter().map(|&i| (training_input(&data[i], cfg, epoch, i), data[i].label)).collect();
            let (loss, g) = grad(&params, &batch, 1.0 / batch.len() as f32);
            total += loss;
            if lr == 0.0 {
                continue;
            }
            for ((p, v), g) in params.tensors_mut().into_iter().zip(velocity.tensors_mut()).zip(g.tensors()) {
                for ((pi, vi), &gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = mu * *vi + gi;
                    *pi -= lr * *vi;
                }
            }
        }

        let heldout_accuracy = if heldout.is_empty() { None } else { Some(evaluate_accuracy(&params, heldout)) };
        log.epochs.push(EpochStats {
            epoch,
            learning_rate: lr as f64,
            train_loss: total / data.len() as f64,
            heldout_accuracy,
        });
    }
    Ok((params, log))
}

/// Fraction of samples whose argmax class equals the label.
pub fn evaluate_accuracy(p: &ModelParams<f32>, data: &[Sample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .iter()
        .filter(|s| {
            let x = Input::from_rgb8(&s.pixels).expect("sample has classifier shape");
            argmax_class(&forward(p, &x)) == s.label
        })
        .count();
    hits as f64 / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::gaussian_blur;
    use rand::Rng;

    /// Ten examples per class: a random texture blurred by the class index.
    fn toy_set(seed: u64, per_class: usize) -> Vec<Sample> {
        let mut r = rng::stream(&[seed, 99]);
        let mut out = Vec::new();
        for c in 0..NUM_CLASSES as u8 {
            for _ in 0..per_class {
                let base = RasterPatch::from_fn(PATCH_SIZE, PATCH_SIZE, |_, _| {
                    let v: f64 = r.random();
                    [v, 0.6 * v, 0.8 * v]
                });
                let p = gaussian_blur(&base, c as f64 * 0.15).unwrap();
                out.push(Sample::from_patch(&p, OofClass::new(c).unwrap()).unwrap());
            }
        }
        out
    }

    #[test]
    fn loss_decreases_on_toy_set() {
        let data = toy_set(1, 10);
        let cfg = TrainConfig { epochs: 5, batch_size: 16, augment: false, ..TrainConfig::default() };
        let (_, log) = train(&data, &[], &cfg).unwrap();
        assert_eq!(log.epochs.len(), 5);
        assert!(log.epochs[4].train_loss < log.epochs[0].train_loss, "{log:?}");
    }

    #[test]
    fn zero_rate_keeps_params() {
        let data = toy_set(2, 2);
        let cfg = TrainConfig { epochs: 2, learning_rate: 0.0, ..TrainConfig::default() };
        let (p, log) = train(&data, &data[..5], &cfg).unwrap();
        assert_eq!(p, init_model(cfg.seed));
        let (a, b) = (log.epochs[0].train_loss, log.epochs[1].train_loss);
        // Same examples, different augmentation draws: only the no-augment run is exactly constant.
        assert!(a.is_finite() && b.is_finite());
        let cfg = TrainConfig { augment: false, ..cfg };
        let (_, log) = train(&data, &[], &cfg).unwrap();
        assert!((log.epochs[0].train_loss - log.epochs[1].train_loss).abs() < 1e-6);
    }

    #[test]
    fn missing_class_is_rejected() {
        let mut data = toy_set(3, 1);
        data.retain(|s| s.label.get() != 17);
        let err = train(&data, &[], &TrainConfig { epochs: 1, ..TrainConfig::default() }).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn schedule_halves_every_interval() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.rate_at(0), 0.01);
        assert_eq!(cfg.rate_at(4), 0.01);
        assert_eq!(cfg.rate_at(5), 0.005);
        assert_eq!(cfg.rate_at(12), 0.0025);
        assert!(TrainConfig { batch_size: 0, ..cfg.clone() }.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_set(4, 1);
        let cfg = TrainConfig { epochs: 1, batch_size: 8, ..TrainConfig::default() };
        assert_eq!(train(&data, &[], &cfg).unwrap().0, train(&data, &[], &cfg).unwrap().0);
    }
}
