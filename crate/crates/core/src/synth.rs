//! Procedural stand-ins for sharp histology fields.
//!
//! Pink stroma with fibre texture, dark nuclei with granular chromatin and
//! pale lumina. Edges are one pixel wide, so the images carry energy up to
//! the sampling limit like an in-focus 40x scan.

use alloc::vec::Vec;

use rand::Rng;

use crate::raster::RasterPatch;
use crate::rng;

const STROMA: [f64; 3] = [0.90, 0.62, 0.78];
const FIBRE: [f64; 3] = [0.80, 0.45, 0.66];
const NUCLEUS: [f64; 3] = [0.33, 0.20, 0.52];
const LUMEN: [f64; 3] = [0.96, 0.93, 0.96];

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn random<R: Rng + ?Sized>(r: &mut R, w: usize, h: usize, size: (f64, f64), elong: f64) -> Self {
        let a = r.random_range(size.0..size.1);
        let t = r.random_range(0.0..core::f64::consts::PI);
        Ellipse {
            cx: r.random_range(-10.0..w as f64 + 10.0),
            cy: r.random_range(-10.0..h as f64 + 10.0),
            a,
            b: a * r.random_range(elong..1.0),
            cos: libm::cos(t),
            sin: libm::sin(t),
        }
    }

    /// Signed distance proxy: < 0 inside, in units of roughly one pixel.
    fn level(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        (libm::sqrt(u * u + v * v) - 1.0) * self.b
    }

    fn bbox(&self, w: usize, h: usize) -> (usize, usize, usize, usize) {
        let m = self.a + 2.0;
        let clampi = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
        (clampi(self.cx - m, w), clampi(self.cx + m + 1.0, w), clampi(self.cy - m, h), clampi(self.cy + m + 1.0, h))
    }
}

fn mix(dst: &mut [f64], color: [f64; 3], alpha: f64) {
    for c in 0..3 {
        dst[c] = dst[c] * (1.0 - alpha) + color[c] * alpha;
    }
}

/// Nuclear morphology of a generated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueStyle {
    /// Nuclei per 450 square pixels; random in `[0.6, 1.6)` when `None`.
    pub density: Option<f64>,
    /// Range of the nuclear semi-major axis, in pixels.
    pub nucleus_size: (f64, f64),
}

impl Default for TissueStyle {
    fn default() -> Self {
        TissueStyle { density: None, nucleus_size: (2.5, 8.0) }
    }
}

impl TissueStyle {
    /// Crowded small nuclei.
    pub fn tumor() -> Self {
        TissueStyle { density: Some(2.2), nucleus_size: (2.0, 4.5) }
    }

    /// Sparse large nuclei with roughly the same stained area as [`tumor`](Self::tumor).
    pub fn benign() -> Self {
        TissueStyle { density: Some(0.45), nucleus_size: (5.0, 9.0) }
    }
}

/// Deterministic tissue-like RGB image in `[0, 1]`.
pub fn tissue_image(width: usize, height: usize, seed: u64) -> RasterPatch {
    styled_tissue_image(width, height, seed, &TissueStyle::default())
}

pub fn styled_tissue_image(width: usize, height: usize, seed: u64, style: &TissueStyle) -> RasterPatch {
    let mut r = rng::stream(&[seed, rng::Stage::Fixture as u64]);
    let area = (width * height) as f64;

    // Stroma: oriented fibre waves plus pixel grain.
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let t: f64 = r.random_range(0.0..core::f64::consts::PI);
            let f: f64 = r.random_range(0.05..0.6);
            (f * libm::cos(t), f * libm::sin(t), r.random_range(0.0..6.3), r.random_range(0.2..1.0))
        })
        .collect();
    let tint = r.random_range(-0.06..0.06);
    let mut img = RasterPatch::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let s: f64 = waves.iter().map(|&(fx, fy, ph, amp)| amp * libm::sin(fx * xf + fy * yf + ph)).sum::<f64>();
        let t = (0.5 + 0.2 * s).clamp(0.0, 1.0);
        let mut px = [0.0; 3];
        for c in 0..3 {
            px[c] = STROMA[c] * (1.0 - t) + FIBRE[c] * t + tint;
        }
        px
    });
    for v in img.data_mut() {
        *v += r.random_range(-0.05..0.05);
    }

    let (w, h) = (width, height);
    let lumina = (area / 40_000.0 * r.random_range(0.5..2.0)) as usize;
    for _ in 0..lumina {
        let e = Ellipse::random(&mut r, w, h, (12.0, 45.0), 0.4);
        paint(&mut img, &e, |_, _| LUMEN, &mut r, 0.02);
    }
    let drawn = r.random_range(0.6..1.6);
    let nuclei = (area / 450.0 * style.density.unwrap_or(drawn)) as usize;
    for _ in 0..nuclei {
        let e = Ellipse::random(&mut r, w, h, style.nucleus_size, 0.5);
        let shade = r.random_range(0.75..1.15);
        paint(&mut img, &e, |_, _| NUCLEUS.map(|v| v * shade), &mut r, 0.12);
    }
    img.clamp_unit();
    img
}

/// Fills an ellipse with an anti-aliased one-pixel rim and per-pixel grain.
fn paint<R: Rng + ?Sized>(
    img: &mut RasterPatch,
    e: &Ellipse,
    color: impl Fn(usize, usize) -> [f64; 3],
    r: &mut R,
    grain: f64,
) {
    let (w, h) = (img.width(), img.height());
    let (x0, x1, y0, y1) = e.bbox(w, h);
    let data = img.data_mut();
    for y in y0..y1 {
        for x in x0..x1 {
            let alpha = (0.5 - e.level(x as f64 + 0.5, y as f64 + 0.5)).clamp(0.0, 1.0);
            if alpha <= 0.0 {
                continue;
            }
            let mut c = color(x, y);
            let g = r.random_range(-grain..=grain);
            c.iter_mut().for_each(|v| *v += g);
            mix(&mut data[3 * (y * w + x)..3 * (y * w + x) + 3], c, alpha);
        }
    }
}
