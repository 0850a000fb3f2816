//! Convolution engines for the Gaussian and disk ("Bokeh") blurs.
//!
//! Borders are reflect-padded (edge pixels duplicated). Channel values are
//! not clamped here; convolution stays linear.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::kernel::{self, BlurKernel};
use crate::raster::{reflect_index, RasterPatch};

/// Largest disk radius convolved directly in the spatial domain.
pub const DIRECT_MAX_RADIUS: f64 = 15.0;
/// Largest Gaussian sigma convolved directly in the spatial domain.
pub const DIRECT_MAX_SIGMA: f64 = 4.0;

/// Separable Gaussian blur. `sigma = 0` returns the input unchanged.
pub fn gaussian_blur(patch: &RasterPatch, sigma: f64) -> Result<RasterPatch> {
    let taps = kernel::gaussian_taps(sigma)?;
    if taps.len() == 1 {
        return Ok(patch.clone());
    }
    #[cfg(feature = "fft")]
    if sigma > DIRECT_MAX_SIGMA {
        return Ok(fft::convolve(patch, &kernel::gaussian_kernel(sigma)?));
    }
    Ok(convolve_separable(patch, &taps))
}

/// Disk blur. `radius = 0` returns the input unchanged.
pub fn bokeh_blur(patch: &RasterPatch, radius: f64) -> Result<RasterPatch> {
    let k = kernel::disk_kernel(radius)?;
    if k.size() == 1 {
        return Ok(patch.clone());
    }
    #[cfg(feature = "fft")]
    if radius > DIRECT_MAX_RADIUS {
        return Ok(fft::convolve(patch, &k));
    }
    Ok(convolve_direct(patch, &k))
}

/// Reflect-pads the interleaved raster by `pad` pixels on every side.
fn pad_interleaved(patch: &RasterPatch, pad: usize) -> (Vec<f64>, usize) {
    let (w, h) = (patch.width(), patch.height());
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let src = patch.data();
    let mut out = vec![0.0; pw * ph * 3];
    for py in 0..ph {
        let sy = reflect_index(py as isize - pad as isize, h);
        let row = &mut out[3 * py * pw..3 * (py + 1) * pw];
        for px in 0..pw {
            let sx = reflect_index(px as isize - pad as isize, w);
            let s = 3 * (sy * w + sx);
            row[3 * px..3 * px + 3].copy_from_slice(&src[s..s + 3]);
        }
    }
    (out, pw)
}

/// Direct spatial convolution with an arbitrary square kernel.
pub fn convolve_direct(patch: &RasterPatch, k: &BlurKernel) -> RasterPatch {
    let (w, h) = (patch.width(), patch.height());
    let half = k.half();
    let size = k.size();
    let (padded, pw) = pad_interleaved(patch, half);
    let mut out = vec![0.0; w * h * 3];
    let row_len = 3 * w;
    for ky in 0..size {
        for kx in 0..size {
            let wgt = k.weights()[ky * size + kx];
            if wgt == 0.0 {
                continue;
            }
            for y in 0..h {
                let src_start = 3 * ((y + ky) * pw + kx);
                let src = &padded[src_start..src_start + row_len];
                let dst = &mut out[y * row_len..(y + 1) * row_len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wgt * s;
                }
            }
        }
    }
    RasterPatch::new(w, h, out)
        .map(|mut r| {
            r.pixel_size_um = patch.pixel_size_um;
            r
        })
        .expect("dimensions preserved")
}

/// Horizontal then vertical pass with the same 1-D taps.
pub fn convolve_separable(patch: &RasterPatch, taps: &[f64]) -> RasterPatch {
    let (w, h) = (patch.width(), patch.height());
    let half = taps.len() / 2;
    let src = patch.data();

    let mut tmp = vec![0.0; w * h * 3];
    let mut row = vec![0.0; 3 * (w + 2 * half)];
    for y in 0..h {
        for px in 0..w + 2 * half {
            let sx = reflect_index(px as isize - half as isize, w);
            let s = 3 * (y * w + sx);
            row[3 * px..3 * px + 3].copy_from_slice(&src[s..s + 3]);
        }
        let dst = &mut tmp[3 * y * w..3 * (y + 1) * w];
        for (t, &wgt) in taps.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&row[3 * t..3 * (t + w)]) {
                *d += wgt * s;
            }
        }
    }

    let mut out = vec![0.0; w * h * 3];
    let row_len = 3 * w;
    for y in 0..h {
        let dst = &mut out[y * row_len..(y + 1) * row_len];
        for (t, &wgt) in taps.iter().enumerate() {
            let sy = reflect_index(y as isize + t as isize - half as isize, h);
            for (d, s) in dst.iter_mut().zip(&tmp[sy * row_len..(sy + 1) * row_len]) {
                *d += wgt * s;
            }
        }
    }
    let mut r = RasterPatch::new(w, h, out).expect("dimensions preserved");
    r.pixel_size_um = patch.pixel_size_um;
    r
}

/// Frequency-domain convolution. Used for large kernels.
#[cfg(feature = "fft")]
pub mod fft {
    use alloc::vec;

    use rustfft::num_complex::Complex64;
    use rustfft::{Fft, FftPlanner};

    use crate::kernel::BlurKernel;
    use crate::raster::{reflect_index, RasterPatch};

    /// Smallest integer >= n whose prime factors are all in {2, 3, 5, 7}.
    pub fn smooth_size(n: usize) -> usize {
        let mut m = n.max(1);
        loop {
            let mut r = m;
            for p in [2, 3, 5, 7] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
            m += 1;
        }
    }

    struct Plan2d {
        nx: usize,
        ny: usize,
        row_fwd: alloc::sync::Arc<dyn Fft<f64>>,
        col_fwd: alloc::sync::Arc<dyn Fft<f64>>,
        row_inv: alloc::sync::Arc<dyn Fft<f64>>,
        col_inv: alloc::sync::Arc<dyn Fft<f64>>,
    }

    impl Plan2d {
        fn new(nx: usize, ny: usize) -> Self {
            let mut planner = FftPlanner::new();
            Plan2d {
                nx,
                ny,
                row_fwd: planner.plan_fft_forward(nx),
                col_fwd: planner.plan_fft_forward(ny),
                row_inv: planner.plan_fft_inverse(nx),
                col_inv: planner.plan_fft_inverse(ny),
            }
        }

        fn run(&self, buf: &mut [Complex64], inverse: bool) {
            let (nx, ny) = (self.nx, self.ny);
            let (rows, cols) = if inverse {
                (&self.row_inv, &self.col_inv)
            } else {
                (&self.row_fwd, &self.col_fwd)
            };
            rows.process(buf);
            let mut t = vec![Complex64::default(); nx * ny];
            transpose(buf, &mut t, nx, ny);
            cols.process(&mut t);
            transpose(&t, buf, ny, nx);
        }
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
        for y in 0..h {
            for x in 0..w {
                dst[x * h + y] = src[y * w + x];
            }
        }
    }

    /// Convolution of every channel with `k`, reflect-padded at the borders.
    ///
    /// Two real channels are packed into the real and imaginary parts of one
    /// complex transform; the kernel is real, so they separate exactly.
    pub fn convolve(patch: &RasterPatch, k: &BlurKernel) -> RasterPatch {
        let (w, h) = (patch.width(), patch.height());
        let half = k.half();
        let nx = smooth_size(w + 2 * half);
        let ny = smooth_size(h + 2 * half);
        let plan = Plan2d::new(nx, ny);

        let mut kspec = vec![Complex64::default(); nx * ny];
        let size = k.size();
        for ky in 0..size {
            for kx in 0..size {
                let wgt = k.weights()[ky * size + kx];
                if wgt == 0.0 {
                    continue;
                }
                let ix = (kx as isize - half as isize).rem_euclid(nx as isize) as usize;
                let iy = (ky as isize - half as isize).rem_euclid(ny as isize) as usize;
                kspec[iy * nx + ix].re += wgt;
            }
        }
        plan.run(&mut kspec, false);

        let data = patch.data();
        let fill = |buf: &mut [Complex64], re_ch: usize, im_ch: Option<usize>| {
            for py in 0..ny {
                let sy = reflect_index(py as isize - half as isize, h);
                for px in 0..nx {
                    let sx = reflect_index(px as isize - half as isize, w);
                    let s = 3 * (sy * w + sx);
                    buf[py * nx + px] =
                        Complex64::new(data[s + re_ch], im_ch.map_or(0.0, |c| data[s + c]));
                }
            }
        };

        let scale = 1.0 / (nx * ny) as f64;
        let mut out = vec![0.0; w * h * 3];
        let mut buf = vec![Complex64::default(); nx * ny];
        for (re_ch, im_ch) in [(0usize, Some(1usize)), (2, None)] {
            fill(&mut buf, re_ch, im_ch);
            plan.run(&mut buf, false);
            for (b, kv) in buf.iter_mut().zip(&kspec) {
                *b *= kv;
            }
            plan.run(&mut buf, true);
            for y in 0..h {
                for x in 0..w {
                    let v = buf[(y + half) * nx + x + half] * scale;
                    out[3 * (y * w + x) + re_ch] = v.re;
                    if let Some(c) = im_ch {
                        out[3 * (y * w + x) + c] = v.im;
                    }
                }
            }
        }
        let mut r = RasterPatch::new(w, h, out).expect("dimensions preserved");
        r.pixel_size_um = patch.pixel_size_um;
        r
    }

}
