//! Central finite-difference check of the analytic gradients.

use alloc::vec::Vec;

use super::net::{forward_trace, loss_and_gradients, softmax, Input};
use super::{ModelParams, FEATURES};
use crate::degrade::OofClass;
use crate::error::Result;
use crate::{NUM_CLASSES, PATCH_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Tensor index and offset of the worst coordinate.
    pub worst: (usize, usize),
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn batch_loss(p: &ModelParams<f64>, batch: &[(Input<f64>, OofClass)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| {
            let t = forward_trace(p, x);
            -libm::log(t.probs[y.get() as usize])
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Compares every gradient coordinate with `(L(w+eps) - L(w-eps)) / 2eps`.
///
/// Convolution parameters and head biases are perturbed through full
/// forward passes. Head weights enter only their own logit, linearly, so
/// their differences are taken on cached pooled features, which makes the
/// check over all ~200k coordinates affordable. Relative errors use
/// `max(|a|, |b|, floor)` as denominator.
pub fn finite_difference_check(
    params: &ModelParams<f64>,
    batch: &[(Input<f64>, OofClass)],
    eps: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = loss_and_gradients(params, batch)?;
    let mut report = GradCheckReport { coordinates: 0, max_rel_error: 0.0, worst: (0, 0) };
    let mut record = |t: usize, i: usize, num: f64, ana: f64| {
        let e = rel_err(num, ana, floor);
        report.coordinates += 1;
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = (t, i);
        }
    };

    let mut p = params.clone();
    let grads = analytic.tensors().map(|g| g.to_vec());
    const HEAD_W: usize = 6;
    for (t, g) in grads.iter().enumerate() {
        if t == HEAD_W {
            continue;
        }
        for i in 0..g.len() {
            let orig = p.tensors()[t][i];
            p.tensors_mut()[t][i] = orig + eps;
            let up = batch_loss(&p, batch);
            p.tensors_mut()[t][i] = orig - eps;
            let down = batch_loss(&p, batch);
            p.tensors_mut()[t][i] = orig;
            record(t, i, (up - down) / (2.0 * eps), g[i]);
        }
    }

    let cached: Vec<(Vec<f64>, Vec<f64>, usize)> = batch
        .iter()
        .map(|(x, y)| {
            let tr = forward_trace(params, x);
            (tr.pooled, tr.logits, y.get() as usize)
        })
        .collect();
    let loss_with = |k: usize, delta_of: &dyn Fn(&[f64]) -> f64| -> f64 {
        cached
            .iter()
            .map(|(f, logits, y)| {
                let mut l = logits.clone();
                l[k] += delta_of(f);
                -libm::log(softmax(&l)[*y])
            })
            .sum::<f64>()
            / batch.len() as f64
    };
    for k in 0..NUM_CLASSES {
        for j in 0..FEATURES {
            let up = loss_with(k, &|f| eps * f[j]);
            let down = loss_with(k, &|f| -eps * f[j]);
            record(HEAD_W, k * FEATURES + j, (up - down) / (2.0 * eps), grads[HEAD_W][k * FEATURES + j]);
        }
    }
    Ok(report)
}

/// A test point at which the loss is smooth within any small neighbourhood:
/// non-negative convolution weights and positive biases keep every rectifier
/// active, and monotone colour ramps give each pooling window a unique
/// maximum at its bottom-right corner. Finite differences with a coarse step
/// are only meaningful away from rectifier and pooling kinks.
pub fn smooth_probe(seed: u64) -> (ModelParams<f64>, Vec<(Input<f64>, OofClass)>) {
    let mut p = super::init_model(seed).cast::<f64>();
    p.head_w.iter_mut().for_each(|w| *w *= 10.0);
    for t in p.tensors_mut().into_iter().take(6) {
        t.iter_mut().for_each(|w| *w = w.abs() + 0.05);
    }
    let n = PATCH_SIZE;
    let batch = (0..2usize)
        .map(|k| {
            let bytes: Vec<u8> = (0..n * n)
                .flat_map(|i| {
                    let (y, x) = (i / n, i % n);
                    [(20 + x + y / (2 + k)) as u8, (10 + (x + y) * 3 / (4 + k)) as u8, (30 + y + x / (3 + k)) as u8]
                })
                .collect();
            let label = OofClass::new(7 + 11 * k as u8).expect("label in range");
            (Input::from_rgb8(&bytes).expect("ramp has classifier shape"), label)
        })
        .collect();
    (p, batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, init_model};
    use crate::PATCH_SIZE;
    use crate::rng;
    use rand::Rng;

    fn random_batch(seed: u64, n: usize) -> Vec<(Input<f64>, OofClass)> {
        let mut r = rng::stream(&[seed]);
        (0..n)
            .map(|_| {
                let bytes: Vec<u8> = (0..3 * PATCH_SIZE * PATCH_SIZE).map(|_| r.random()).collect();
                (Input::from_rgb8(&bytes).unwrap(), OofClass::new(r.random_range(0..30)).unwrap())
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (p, batch) = smooth_probe(11);
        let rep = finite_difference_check(&p, &batch, 1e-3, 1e-6).unwrap();
        assert_eq!(rep.coordinates, p.num_parameters());
        assert!(rep.max_rel_error <= 1e-3, "{rep:?}");
    }

    #[test]
    fn conv_gradients_at_random_point() {
        // Generic weights and noise inputs: a tiny step keeps kink crossings rare.
        let p = init_model(12).cast::<f64>();
        let batch = random_batch(6, 2);
        let (_, g) = loss_and_gradients(&p, &batch).unwrap();
        let eps = 1e-7;
        for t in 0..6 {
            for i in 0..g.tensors()[t].len().min(8) {
                let mut q = p.clone();
                q.tensors_mut()[t][i] += eps;
                let up = batch_loss(&q, &batch);
                q.tensors_mut()[t][i] -= 2.0 * eps;
                let down = batch_loss(&q, &batch);
                let num = (up - down) / (2.0 * eps);
                assert!(rel_err(num, g.tensors()[t][i], 1e-4) < 1e-3, "tensor {t} index {i}: {num} vs {}", g.tensors()[t][i]);
            }
        }
    }

    #[test]
    fn mean_softmax_near_uniform_at_init() {
        let p = init_model(21);
        let mut r = rng::stream(&[8]);
        let mut mean = [0.0f64; NUM_CLASSES];
        let n = 1000;
        let mut bytes = alloc::vec![0u8; 3 * PATCH_SIZE * PATCH_SIZE];
        for _ in 0..n {
            r.fill(&mut bytes[..]);
            let probs = forward(&p, &Input::<f32>::from_rgb8(&bytes).unwrap());
            assert!(probs.iter().all(|v| v.is_finite()));
            for (m, v) in mean.iter_mut().zip(probs) {
                *m += v as f64 / n as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 30.0).abs() <= 0.02, "{mean:?}");
        }
    }
}
