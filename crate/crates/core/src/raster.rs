use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Luma weights applied to linear R, G, B in `[0, 1]`.
pub const LUMA_WEIGHTS: [f64; 3] = [0.212, 0.715, 0.072];

/// Row-major RGB raster with channels stored as reals in `[0, 1]`.
///
/// Pixels are interleaved: the value of channel `ch` at `(x, y)` lives at
/// `3 * (y * width + x) + ch`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterPatch {
    width: usize,
    height: usize,
    data: Vec<f64>,
    /// Micrometers per pixel, if known.
    pub pixel_size_um: Option<f64>,
}

impl RasterPatch {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("raster dimensions must be at least 1x1"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::param("raster data length does not match 3 * width * height"));
        }
        Ok(RasterPatch { width, height, data, pixel_size_um: None })
    }

    /// Constant-color raster.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be at least 1x1");
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RasterPatch { width, height, data, pixel_size_um: None }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be at least 1x1");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RasterPatch { width, height, data, pixel_size_um: None }
    }

    /// Decodes interleaved 8-bit RGB (`v / 255`).
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::param("rgb8 buffer length does not match 3 * width * height"));
        }
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Encodes to interleaved 8-bit RGB (`round(v * 255)`, saturating).
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Pixel at possibly out-of-range coordinates, mirrored at the borders.
    #[inline]
    pub fn get_reflect(&self, x: isize, y: isize) -> [f64; 3] {
        self.get(reflect_index(x, self.width), reflect_index(y, self.height))
    }

    /// One channel as a dense row-major plane.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.data.iter().skip(ch).step_by(3).copied().collect()
    }

    pub fn from_channels(width: usize, height: usize, planes: [&[f64]; 3]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::param("channel plane length mismatch"));
        }
        let mut data = Vec::with_capacity(3 * n);
        for i in 0..n {
            data.extend_from_slice(&[planes[0][i], planes[1][i], planes[2][i]]);
        }
        Self::new(width, height, data)
    }

    /// Clamps every channel into `[0, 1]`.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Per-pixel luma plane and its mean.
    pub fn luma(&self) -> (Vec<f64>, f64) {
        let plane: Vec<f64> = self.data.chunks_exact(3).map(luma_of).collect();
        let mean = plane.iter().sum::<f64>() / plane.len() as f64;
        (plane, mean)
    }

    pub fn mean_luma(&self) -> f64 {
        self.luma().1
    }

    /// Mean luma of a sub-rectangle, without allocating.
    pub fn region_mean_luma(&self, x0: usize, y0: usize, w: usize, h: usize) -> f64 {
        let mut sum = 0.0;
        for y in y0..y0 + h {
            let row = &self.data[3 * (y * self.width + x0)..3 * (y * self.width + x0 + w)];
            sum += row.chunks_exact(3).map(luma_of).sum::<f64>();
        }
        sum / (w * h) as f64
    }

    /// Rectangular crop. The rectangle must lie inside the raster.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::param("crop rectangle outside raster"));
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = 3 * (y * self.width + x0);
            data.extend_from_slice(&self.data[start..start + 3 * w]);
        }
        Ok(RasterPatch { width: w, height: h, data, pixel_size_um: self.pixel_size_um })
    }

    /// Window of size `w x h` whose top-left corner may lie outside the
    /// raster; out-of-range pixels are mirrored.
    pub fn window_reflect(&self, x0: isize, y0: isize, w: usize, h: usize) -> Self {
        let inside = x0 >= 0
            && y0 >= 0
            && x0 as usize + w <= self.width
            && y0 as usize + h <= self.height;
        if inside {
            return self.crop(x0 as usize, y0 as usize, w, h).expect("window checked inside");
        }
        let mut out = RasterPatch::from_fn(w, h, |x, y| self.get_reflect(x0 + x as isize, y0 + y as isize));
        out.pixel_size_um = self.pixel_size_um;
        out
    }

    /// Centered crop; an odd remainder drops the extra row/column at the
    /// bottom/right.
    pub fn crop_center(&self, out_w: usize, out_h: usize) -> Result<Self> {
        if out_w > self.width || out_h > self.height {
            return Err(Error::param("center crop larger than input"));
        }
        self.crop((self.width - out_w) / 2, (self.height - out_h) / 2, out_w, out_h)
    }

    /// Rotates by 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = RasterPatch::from_fn(h, w, |x, y| self.get(w - 1 - y, x));
        out.pixel_size_um = self.pixel_size_um;
        out
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        let mut out = RasterPatch::from_fn(w, self.height, |x, y| self.get(w - 1 - x, y));
        out.pixel_size_um = self.pixel_size_um;
        out
    }

    /// Per-channel population variance, averaged over channels.
    pub fn variance(&self) -> f64 {
        let mut total = 0.0;
        for ch in 0..3 {
            let plane = self.channel(ch);
            let n = plane.len() as f64;
            let mean = plane.iter().sum::<f64>() / n;
            total += plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        }
        total / 3.0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Mean absolute value of the 4-neighbour Laplacian of luma over the
    /// interior pixels. A simple high-frequency energy measure.
    pub fn mean_abs_laplacian(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return 0.0;
        }
        let (y, _) = self.luma();
        let mut sum = 0.0;
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let i = r * w + c;
                let lap = y[i - 1] + y[i + 1] + y[i - w] + y[i + w] - 4.0 * y[i];
                sum += libm::fabs(lap);
            }
        }
        sum / ((w - 2) * (h - 2)) as f64
    }
}

#[inline]
fn luma_of(px: &[f64]) -> f64 {
    LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2]
}

/// `round(v * 255)` clamped to the byte range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

/// Mirrors an index into `[0, n)` with edge duplication
/// (`-1 -> 0`, `n -> n - 1`). Works for offsets of any size.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_of_reference_colors() {
        let white = RasterPatch::filled(4, 4, [1.0; 3]);
        assert!((white.mean_luma() - 0.999).abs() < 1e-12);
        let black = RasterPatch::filled(4, 4, [0.0; 3]);
        assert_eq!(black.mean_luma(), 0.0);
        let green = RasterPatch::filled(4, 4, [0.0, 1.0, 0.0]);
        assert!((green.mean_luma() - 0.715).abs() < 1e-12);
    }

    #[test]
    fn crop_center_offsets() {
        let src = RasterPatch::from_fn(300, 300, |x, y| [x as f64 / 300.0, y as f64 / 300.0, 0.0]);
        let c = src.crop_center(139, 139).unwrap();
        assert_eq!((c.width(), c.height()), (139, 139));
        assert_eq!(c.get(0, 0), src.get(80, 80));

        let small = RasterPatch::from_fn(10, 10, |x, y| [x as f64 / 10.0, y as f64 / 10.0, 0.5]);
        assert_eq!(small.crop_center(10, 10).unwrap(), small);

        let five = RasterPatch::from_fn(5, 5, |x, y| [x as f64 / 5.0, y as f64 / 5.0, 0.0]);
        let three = five.crop_center(3, 3).unwrap();
        assert_eq!(three.get(0, 0), five.get(1, 1));
        assert_eq!(three.get(2, 2), five.get(3, 3));
    }

    #[test]
    fn crop_center_oversize_is_rejected() {
        let p = RasterPatch::filled(5, 5, [0.5; 3]);
        assert!(matches!(p.crop_center(6, 5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn reflect_index_handles_large_offsets() {
        assert_eq!(reflect_index(-1, 5), 0);
        assert_eq!(reflect_index(-2, 5), 1);
        assert_eq!(reflect_index(5, 5), 4);
        assert_eq!(reflect_index(6, 5), 3);
        assert_eq!(reflect_index(-7, 3), 0);
        assert_eq!(reflect_index(-4, 3), 2);
        assert_eq!(reflect_index(1000, 1), 0);
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let p = RasterPatch::from_fn(7, 4, |x, y| [x as f64 / 7.0, y as f64 / 4.0, ((x * y) % 3) as f64 / 3.0]);
        let r = p.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(r, p);
        assert_ne!(p.rotate90().width(), p.width());
    }

    #[test]
    fn rgb8_round_trip() {
        let bytes: Vec<u8> = (0..48).map(|i| (i * 5) as u8).collect();
        let p = RasterPatch::from_rgb8(4, 4, &bytes).unwrap();
        assert_eq!(p.to_rgb8(), bytes);
    }

    #[test]
    fn rejects_empty_raster() {
        assert!(RasterPatch::new(0, 3, Vec::new()).is_err());
    }
}
