use rand::Rng;

use crate::raster::RasterPatch;
use crate::rng;

/// Ranges of the training-time perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    /// Apply a random one of the 8 dihedral orientations.
    pub orientations: bool,
    /// Additive brightness delta drawn from `[-b, b]`.
    pub brightness: f64,
    /// Contrast factor range about the per-channel mean.
    pub contrast: (f64, f64),
    /// Hue rotation drawn from `[-h, h]`, in turns.
    pub hue: f64,
    /// Saturation factor range.
    pub saturation: (f64, f64),
    /// Translation drawn from `[-j, j]` pixels on each axis, mirror-filled.
    pub jitter: u32,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            orientations: true,
            brightness: 0.1,
            contrast: (0.8, 1.25),
            hue: 0.04,
            saturation: (0.75, 1.33),
            jitter: 8,
        }
    }
}

impl AugmentParams {
    /// Parameters under which every draw is the identity.
    pub fn identity() -> Self {
        AugmentParams {
            orientations: false,
            brightness: 0.0,
            contrast: (1.0, 1.0),
            hue: 0.0,
            saturation: (1.0, 1.0),
            jitter: 0,
        }
    }
}

/// One concrete set of perturbations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    /// `0..4` counter-clockwise quarter turns, `4..8` the same followed by a
    /// horizontal flip.
    pub orientation: u8,
    pub shift: (i32, i32),
    pub brightness: f64,
    pub contrast: f64,
    pub hue: f64,
    pub saturation: f64,
}

impl AugmentDraw {
    pub const IDENTITY: AugmentDraw =
        AugmentDraw { orientation: 0, shift: (0, 0), brightness: 0.0, contrast: 1.0, hue: 0.0, saturation: 1.0 };
}

pub fn draw_augmentation<R: Rng + ?Sized>(params: &AugmentParams, rng: &mut R) -> AugmentDraw {
    let orientation = if params.orientations { rng.random_range(0..8u8) } else { 0 };
    let j = params.jitter as i32;
    let shift = (rng.random_range(-j..=j), rng.random_range(-j..=j));
    AugmentDraw {
        orientation,
        shift,
        brightness: rng::uniform(rng, -params.brightness, params.brightness),
        contrast: rng::uniform(rng, params.contrast.0, params.contrast.1),
        hue: rng::uniform(rng, -params.hue, params.hue),
        saturation: rng::uniform(rng, params.saturation.0, params.saturation.1),
    }
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        rem_euclid((g - b) / d, 6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn rem_euclid(a: f64, m: f64) -> f64 {
    let r = libm::fmod(a, m);
    if r < 0.0 { r + m } else { r }
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = rem_euclid(h, 1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - libm::fabs(h6 % 2.0 - 1.0));
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Applies orientation, translation, brightness, contrast, hue and
/// saturation in that order, then clamps to `[0, 1]`.
pub fn apply_augmentation(patch: &RasterPatch, d: &AugmentDraw) -> RasterPatch {
    let mut out = patch.clone();
    for _ in 0..d.orientation % 4 {
        out = out.rotate90();
    }
    if d.orientation >= 4 {
        out = out.flip_horizontal();
    }
    if d.shift != (0, 0) {
        out = out.window_reflect(d.shift.0 as isize, d.shift.1 as isize, out.width(), out.height());
    }

    if d.brightness != 0.0 {
        out.data_mut().iter_mut().for_each(|v| *v += d.brightness);
    }
    if d.contrast != 1.0 {
        let n = (out.width() * out.height()) as f64;
        let mut mean = [0.0; 3];
        for px in out.data().chunks_exact(3) {
            for c in 0..3 {
                mean[c] += px[c] / n;
            }
        }
        for px in out.data_mut().chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = mean[c] + d.contrast * (px[c] - mean[c]);
            }
        }
    }
    if d.hue != 0.0 || d.saturation != 1.0 {
        for px in out.data_mut().chunks_exact_mut(3) {
            let [h, s, v] = rgb_to_hsv([px[0], px[1], px[2]]);
            if s == 0.0 {
                continue;
            }
            let rgb = hsv_to_rgb([h + d.hue, (s * d.saturation).clamp(0.0, 1.0), v]);
            px.copy_from_slice(&rgb);
        }
    }
    out.clamp_unit();
    out
}

/// Random training-time perturbation; the label of the patch is unaffected.
pub fn augment<R: Rng + ?Sized>(patch: &RasterPatch, params: &AugmentParams, rng: &mut R) -> RasterPatch {
    apply_augmentation(patch, &draw_augmentation(params, rng))
}
