//! Blur kernels: sampled Gaussians and anti-aliased disks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Rim pixels are supersampled on a `DISK_SUPERSAMPLE x DISK_SUPERSAMPLE` grid.
pub const DISK_SUPERSAMPLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Gaussian { sigma: f64 },
    Disk { radius: f64 },
}

/// Square, odd-sized, normalized 2-D kernel stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    weights: Vec<f64>,
    kind: KernelKind,
}

impl BlurKernel {
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Offset from the center tap to the border.
    #[inline]
    pub fn half(&self) -> usize {
        self.size / 2
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Weight at offset `(dx, dy)` from the center tap.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let h = self.half() as isize;
        if dx.abs() > h || dy.abs() > h {
            return 0.0;
        }
        self.weights[((dy + h) as usize) * self.size + (dx + h) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Half-width of the sampled Gaussian: `ceil(4 sigma)`.
pub fn gaussian_half_width(sigma: f64) -> usize {
    libm::ceil(4.0 * sigma) as usize
}

/// 1-D Gaussian taps sampled at integer offsets, truncated at
/// `+-ceil(4 sigma)` and normalized. `sigma = 0` yields the unit tap.
pub fn gaussian_taps(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("gaussian sigma must be finite and >= 0"));
    }
    if sigma == 0.0 {
        return Ok(vec![1.0]);
    }
    let half = gaussian_half_width(sigma) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| libm::exp(-((i * i) as f64) / denom))
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(taps)
}

/// Separable Gaussian as an explicit 2-D kernel (outer product of the taps).
pub fn gaussian_kernel(sigma: f64) -> Result<BlurKernel> {
    let taps = gaussian_taps(sigma)?;
    let size = taps.len();
    let mut weights = Vec::with_capacity(size * size);
    for &ty in &taps {
        for &tx in &taps {
            weights.push(ty * tx);
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(BlurKernel { size, weights, kind: KernelKind::Gaussian { sigma } })
}

/// Fraction of the unit pixel square centred at `(cx, cy)` that lies inside
/// the disk of the given radius around the origin.
fn pixel_coverage(cx: f64, cy: f64, radius: f64) -> f64 {
    let ax = libm::fabs(cx);
    let ay = libm::fabs(cy);
    let near_x = (ax - 0.5).max(0.0);
    let near_y = (ay - 0.5).max(0.0);
    let far_x = ax + 0.5;
    let far_y = ay + 0.5;
    let r2 = radius * radius;
    if near_x * near_x + near_y * near_y >= r2 {
        return 0.0;
    }
    if far_x * far_x + far_y * far_y <= r2 {
        return 1.0;
    }
    let n = DISK_SUPERSAMPLE;
    let step = 1.0 / n as f64;
    let mut inside = 0usize;
    for sy in 0..n {
        let py = cy - 0.5 + (sy as f64 + 0.5) * step;
        for sx in 0..n {
            let px = cx - 0.5 + (sx as f64 + 0.5) * step;
            if px * px + py * py <= r2 {
                inside += 1;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

/// Disk ("Bokeh") kernel. Each tap is weighted by the fraction of its pixel
/// square covered by the disk; the result is normalized to sum 1.
pub fn disk_kernel(radius: f64) -> Result<BlurKernel> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::param("disk radius must be finite and >= 0"));
    }
    let kind = KernelKind::Disk { radius };
    if radius == 0.0 {
        return Ok(BlurKernel { size: 1, weights: vec![1.0], kind });
    }
    // Taps beyond r + 1/2 along an axis cannot touch the disk.
    let half = libm::floor(radius + 0.5) as isize;
    let size = (2 * half + 1) as usize;
    let mut weights = Vec::with_capacity(size * size);
    for dy in -half..=half {
        for dx in -half..=half {
            weights.push(pixel_coverage(dx as f64, dy as f64, radius));
        }
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        // Radius so small no sample landed inside: behaves as identity.
        return Ok(BlurKernel { size: 1, weights: vec![1.0], kind });
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(BlurKernel { size, weights, kind })
}
