use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{ModelParams, C1, C2, C3, FEATURES, IN_CHANNELS, K, S1, S2, S3, S_POOL};
use crate::degrade::OofClass;
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::{NUM_CLASSES, PATCH_SIZE};

/// Classifier input: channel-major `[3][139][139]` plane stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Input<T>(Vec<T>);

impl<T: Float> Input<T> {
    pub fn from_patch(patch: &RasterPatch) -> Result<Self> {
        if patch.width() != PATCH_SIZE || patch.height() != PATCH_SIZE {
            return Err(Error::param("classifier input must be 139x139"));
        }
        let n = PATCH_SIZE * PATCH_SIZE;
        let mut v = vec![T::zero(); 3 * n];
        for (i, px) in patch.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                v[c * n + i] = T::from(px[c]).expect("finite channel");
            }
        }
        Ok(Input(v))
    }

    /// From interleaved 8-bit RGB, scaled by 1/255.
    pub fn from_rgb8(bytes: &[u8]) -> Result<Self> {
        let n = PATCH_SIZE * PATCH_SIZE;
        if bytes.len() != 3 * n {
            return Err(Error::param("classifier input must be 139x139x3"));
        }
        let scale = T::from(1.0 / 255.0).unwrap();
        let mut v = vec![T::zero(); 3 * n];
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            for c in 0..3 {
                v[c * n + i] = T::from(px[c]).unwrap() * scale;
            }
        }
        Ok(Input(v))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Intermediate activations kept for back-propagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub a1: Vec<T>,
    pub a2: Vec<T>,
    pub a3: Vec<T>,
    pub pooled: Vec<T>,
    /// Index into `a3` of each pooled maximum.
    pub pool_arg: Vec<u32>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

struct ConvShape {
    ic: usize,
    ih: usize,
    iw: usize,
    oc: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvShape {
    /// Output columns `ox` whose input column `ox * stride + kx - pad` is in range.
    #[inline]
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let lo = if self.pad > kx { (self.pad - kx).div_ceil(self.stride) } else { 0 };
        let hi = ((self.iw + self.pad - 1 - kx) / self.stride + 1).min(self.ow);
        (lo, hi)
    }

    #[inline]
    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
        (iy >= 0 && (iy as usize) < self.ih).then_some(iy as usize)
    }
}

const SHAPE1: ConvShape = ConvShape { ic: IN_CHANNELS, ih: PATCH_SIZE, iw: PATCH_SIZE, oc: C1, oh: S1, ow: S1, stride: 2, pad: 0 };
const SHAPE2: ConvShape = ConvShape { ic: C1, ih: S1, iw: S1, oc: C2, oh: S2, ow: S2, stride: 1, pad: 0 };
const SHAPE3: ConvShape = ConvShape { ic: C2, ih: S2, iw: S2, oc: C3, oh: S3, ow: S3, stride: 1, pad: 1 };

fn conv_forward<T: Float>(s: &ConvShape, input: &[T], w: &[T], b: &[T]) -> Vec<T> {
    let plane = s.oh * s.ow;
    let mut out = vec![T::zero(); s.oc * plane];
    for o in 0..s.oc {
        out[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v = b[o]);
        for c in 0..s.ic {
            let src = &input[c * s.ih * s.iw..(c + 1) * s.ih * s.iw];
            for ky in 0..K {
                for kx in 0..K {
                    let wt = w[((o * s.ic + c) * K + ky) * K + kx];
                    let (lo, hi) = s.col_range(kx);
                    for oy in 0..s.oh {
                        let Some(iy) = s.in_row(oy, ky) else { continue };
                        let ix0 = lo * s.stride + kx - s.pad;
                        let dst = &mut out[o * plane + oy * s.ow + lo..o * plane + oy * s.ow + hi];
                        let row = &src[iy * s.iw + ix0..];
                        if s.stride == 1 {
                            for (d, &x) in dst.iter_mut().zip(row) {
                                *d = *d + wt * x;
                            }
                        } else {
                            for (d, &x) in dst.iter_mut().zip(row.iter().step_by(s.stride)) {
                                *d = *d + wt * x;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and, if requested, the input gradient.
fn conv_backward<T: Float>(
    s: &ConvShape,
    input: &[T],
    w: &[T],
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    mut din: Option<&mut [T]>,
) {
    let plane = s.oh * s.ow;
    for o in 0..s.oc {
        let g = &dout[o * plane..(o + 1) * plane];
        db[o] = db[o] + g.iter().fold(T::zero(), |a, &v| a + v);
        for c in 0..s.ic {
            let in_off = c * s.ih * s.iw;
            for ky in 0..K {
                for kx in 0..K {
                    let wi = ((o * s.ic + c) * K + ky) * K + kx;
                    let wt = w[wi];
                    let (lo, hi) = s.col_range(kx);
                    let ix0 = lo * s.stride + kx - s.pad;
                    let mut acc = T::zero();
                    for oy in 0..s.oh {
                        let Some(iy) = s.in_row(oy, ky) else { continue };
                        let grow = &g[oy * s.ow + lo..oy * s.ow + hi];
                        let start = in_off + iy * s.iw + ix0;
                        if s.stride == 1 {
                            let xrow = &input[start..start + grow.len()];
                            acc = acc + grow.iter().zip(xrow).fold(T::zero(), |a, (&gv, &xv)| a + gv * xv);
                            if let Some(d) = din.as_deref_mut() {
                                for (dv, &gv) in d[start..start + grow.len()].iter_mut().zip(grow) {
                                    *dv = *dv + wt * gv;
                                }
                            }
                        } else {
                            for (j, &gv) in grow.iter().enumerate() {
                                acc = acc + gv * input[start + j * s.stride];
                            }
                            if let Some(d) = din.as_deref_mut() {
                                for (j, &gv) in grow.iter().enumerate() {
                                    d[start + j * s.stride] = d[start + j * s.stride] + wt * gv;
                                }
                            }
                        }
                    }
                    dw[wi] = dw[wi] + acc;
                }
            }
        }
    }
}

fn relu_in_place<T: Float>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn max_pool<T: Float>(a: &[T]) -> (Vec<T>, Vec<u32>) {
    let mut out = Vec::with_capacity(C3 * S_POOL * S_POOL);
    let mut arg = Vec::with_capacity(C3 * S_POOL * S_POOL);
    for c in 0..C3 {
        for py in 0..S_POOL {
            for px in 0..S_POOL {
                let mut best = T::neg_infinity();
                let mut bi = 0usize;
                for ky in 0..K {
                    for kx in 0..K {
                        let i = c * S3 * S3 + (2 * py + ky) * S3 + 2 * px + kx;
                        if a[i] > best {
                            best = a[i];
                            bi = i;
                        }
                    }
                }
                out.push(best);
                arg.push(bi as u32);
            }
        }
    }
    (out, arg)
}

/// Numerically stable softmax.
pub fn softmax<T: Float>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z = e.iter().fold(T::zero(), |a, &b| a + b);
    e.into_iter().map(|v| v / z).collect()
}

pub(crate) fn forward_trace<T: Float>(p: &ModelParams<T>, x: &Input<T>) -> ForwardTrace<T> {
    let mut a1 = conv_forward(&SHAPE1, &x.0, &p.conv1_w, &p.conv1_b);
    relu_in_place(&mut a1);
    let mut a2 = conv_forward(&SHAPE2, &a1, &p.conv2_w, &p.conv2_b);
    relu_in_place(&mut a2);
    let mut a3 = conv_forward(&SHAPE3, &a2, &p.conv3_w, &p.conv3_b);
    relu_in_place(&mut a3);
    let (pooled, pool_arg) = max_pool(&a3);
    let logits: Vec<T> = (0..NUM_CLASSES)
        .map(|k| {
            let row = &p.head_w[k * FEATURES..(k + 1) * FEATURES];
            row.iter().zip(&pooled).fold(p.head_b[k], |a, (&w, &f)| a + w * f)
        })
        .collect();
    let probs = softmax(&logits);
    ForwardTrace { a1, a2, a3, pooled, pool_arg, logits, probs }
}

/// Class probabilities for one input.
pub fn forward<T: Float>(p: &ModelParams<T>, x: &Input<T>) -> Vec<T> {
    forward_trace(p, x).probs
}

/// Argmax of the probabilities; ties resolve to the lower class index.
pub fn predict_class<T: Float>(p: &ModelParams<T>, x: &Input<T>) -> OofClass {
    argmax_class(&forward(p, x))
}

pub(crate) fn argmax_class<T: Float>(probs: &[T]) -> OofClass {
    let mut best = 0;
    for (i, &v) in probs.iter().enumerate() {
        if v > probs[best] {
            best = i;
        }
    }
    OofClass::new(best as u8).expect("NUM_CLASSES == 30")
}

/// Accumulates the gradient of `scale * CE(x, label)` into `g` and returns
/// the unscaled cross-entropy.
pub(crate) fn accumulate_example<T: Float>(
    p: &ModelParams<T>,
    x: &Input<T>,
    label: OofClass,
    scale: T,
    g: &mut ModelParams<T>,
) -> T {
    let t = forward_trace(p, x);
    let y = label.get() as usize;
    let loss = -(t.probs[y].max(T::min_positive_value())).ln();

    let dlogits: Vec<T> = t
        .probs
        .iter()
        .enumerate()
        .map(|(k, &pk)| scale * if k == y { pk - T::one() } else { pk })
        .collect();

    let mut dpool = vec![T::zero(); FEATURES];
    for (k, &dl) in dlogits.iter().enumerate() {
        g.head_b[k] = g.head_b[k] + dl;
        let row = &p.head_w[k * FEATURES..(k + 1) * FEATURES];
        let grow = &mut g.head_w[k * FEATURES..(k + 1) * FEATURES];
        for j in 0..FEATURES {
            grow[j] = grow[j] + dl * t.pooled[j];
            dpool[j] = dpool[j] + dl * row[j];
        }
    }

    let mut d3 = vec![T::zero(); t.a3.len()];
    for (j, &ai) in t.pool_arg.iter().enumerate() {
        d3[ai as usize] = d3[ai as usize] + dpool[j];
    }
    mask_relu(&mut d3, &t.a3);

    let mut d2 = vec![T::zero(); t.a2.len()];
    conv_backward(&SHAPE3, &t.a2, &p.conv3_w, &d3, &mut g.conv3_w, &mut g.conv3_b, Some(&mut d2));
    mask_relu(&mut d2, &t.a2);

    let mut d1 = vec![T::zero(); t.a1.len()];
    conv_backward(&SHAPE2, &t.a1, &p.conv2_w, &d2, &mut g.conv2_w, &mut g.conv2_b, Some(&mut d1));
    mask_relu(&mut d1, &t.a1);

    conv_backward(&SHAPE1, &x.0, &p.conv1_w, &d1, &mut g.conv1_w, &mut g.conv1_b, None);
    loss
}

/// Zeroes gradient entries whose activation was clipped by the ReLU.
fn mask_relu<T: Float>(grad: &mut [T], act: &[T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Mean softmax cross-entropy over the batch and its gradient.
pub fn loss_and_gradients<T: Float>(p: &ModelParams<T>, batch: &[(Input<T>, OofClass)]) -> Result<(T, ModelParams<T>)> {
    if batch.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let mut g = ModelParams::zeros();
    let scale = T::one() / T::from(batch.len()).unwrap();
    let mut total = T::zero();
    for (x, label) in batch {
        total = total + accumulate_example(p, x, *label, scale, &mut g);
    }
    Ok((total * scale, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;
    use crate::rng;
    use rand::Rng;

    fn random_input<T: Float>(seed: u64) -> Input<T> {
        let mut r = rng::stream(&[seed, 1234]);
        let bytes: Vec<u8> = (0..3 * PATCH_SIZE * PATCH_SIZE).map(|_| r.random()).collect();
        Input::from_rgb8(&bytes).unwrap()
    }

    #[test]
    fn probabilities_are_normalized_and_pure() {
        let p = init_model(1);
        for s in 0..4 {
            let x = random_input::<f32>(s);
            let probs = forward(&p, &x);
            assert_eq!(probs.len(), NUM_CLASSES);
            let sum: f32 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(probs.iter().all(|v| *v >= 0.0 && v.is_finite()));
            assert_eq!(forward(&p, &x), probs);
        }
    }

    #[test]
    fn shifted_input_changes_output() {
        let p = init_model(2);
        let mut r = rng::stream(&[77]);
        let src = RasterPatch::from_fn(PATCH_SIZE + 1, PATCH_SIZE, |_, _| [r.random(), r.random(), r.random()]);
        let a = Input::<f32>::from_patch(&src.crop(0, 0, PATCH_SIZE, PATCH_SIZE).unwrap()).unwrap();
        let b = Input::<f32>::from_patch(&src.crop(1, 0, PATCH_SIZE, PATCH_SIZE).unwrap()).unwrap();
        assert_ne!(forward(&p, &a), forward(&p, &b));
    }

    #[test]
    fn wrong_shape_rejected() {
        let small = RasterPatch::filled(100, 139, [0.5; 3]);
        assert!(Input::<f32>::from_patch(&small).is_err());
        assert!(Input::<f32>::from_rgb8(&[0u8; 10]).is_err());
    }

    #[test]
    fn loss_extremes() {
        let x = random_input::<f64>(0);
        // Zero parameters give a uniform prediction.
        let p = ModelParams::<f64>::zeros();
        let (loss, _) = loss_and_gradients(&p, &[(x.clone(), OofClass::new(4).unwrap())]).unwrap();
        assert!((loss - 30f64.ln()).abs() < 1e-12);
        assert!((loss - 3.4012).abs() < 1e-4);
        // A huge bias on the true class drives the loss to zero.
        let mut q = p.clone();
        q.head_b[4] = 60.0;
        let (loss, _) = loss_and_gradients(&q, &[(x, OofClass::new(4).unwrap())]).unwrap();
        assert!(loss < 1e-20);
        assert!(loss_and_gradients::<f64>(&p, &[]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        let mut logits = vec![0.0f64; NUM_CLASSES];
        logits[7] = 5.0;
        assert_eq!(argmax_class(&softmax(&logits)).get(), 7);
        let mut tie = vec![0.0f64; NUM_CLASSES];
        tie[3] = 2.0;
        tie[9] = 2.0;
        assert_eq!(argmax_class(&tie).get(), 3);
        let mut p = ModelParams::<f64>::zeros();
        p.head_b[3] = 1.0;
        p.head_b[9] = 1.0;
        assert_eq!(predict_class(&p, &random_input(5)).get(), 3);
    }
}
