use alloc::format;
use alloc::vec::Vec;

use crate::blur::{bokeh_blur, gaussian_blur};
use crate::error::{Error, Result};
use crate::raster::RasterPatch;

/// Stop the radius search once the bracket is narrower than this (pixels).
pub const RADIUS_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub sigma: f64,
    /// Best-matching disk radius, averaged over images.
    pub radius: f64,
    /// Mean SSD between the Gaussian and the disk blur at `radius`.
    pub ssd_at_radius: f64,
    /// Mean SSD at twice the radius.
    pub ssd_at_double: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub probes: Vec<ProbeResult>,
    /// Least-squares slope of matched radius against sigma (through 0).
    pub ratio: f64,
    /// `ratio * gauss_scale`.
    pub bokeh_scale: f64,
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
/// Returns the abscissa and value of the best evaluated point.
pub fn golden_section_min(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

fn ssd(a: &RasterPatch, b: &RasterPatch) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Aligns disk radii to Gaussian sigmas by minimizing the RGB sum of squared
/// differences between the two blurs of each image, then fits a single
/// radius/sigma ratio.
pub fn calibrate_blur_scale(images: &[RasterPatch], sigma_probes: &[f64], gauss_scale: f64) -> Result<CalibrationReport> {
    if images.iter().any(|im| im.variance() < 1e-12) {
        return Err(Error::DegenerateInput("constant image gives a flat SSD objective".into()));
    }
    if images.len() < 3 {
        return Err(Error::param("calibration needs at least 3 images"));
    }
    if sigma_probes.is_empty() || sigma_probes.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::param("sigma probes must be a non-empty list of values >= 0"));
    }

    let mut probes = Vec::with_capacity(sigma_probes.len());
    for &sigma in sigma_probes {
        if sigma == 0.0 {
            probes.push(ProbeResult { sigma, radius: 0.0, ssd_at_radius: 0.0, ssd_at_double: 0.0 });
            continue;
        }
        let targets: Vec<RasterPatch> = images.iter().map(|im| gaussian_blur(im, sigma)).collect::<Result<_>>()?;
        let mut radius = 0.0;
        for (im, target) in images.iter().zip(&targets) {
            let (r, _) = golden_section_min(
                |r| Ok(ssd(target, &bokeh_blur(im, r)?)),
                sigma / 2.0,
                4.0 * sigma,
                RADIUS_TOLERANCE,
            )?;
            radius += r;
        }
        radius /= images.len() as f64;
        let mean_ssd = |r: f64| -> Result<f64> {
            let mut total = 0.0;
            for (im, target) in images.iter().zip(&targets) {
                total += ssd(target, &bokeh_blur(im, r)?);
            }
            Ok(total / images.len() as f64)
        };
        probes.push(ProbeResult {
            sigma,
            radius,
            ssd_at_radius: mean_ssd(radius)?,
            ssd_at_double: mean_ssd(2.0 * radius)?,
        });
    }

    let sxx: f64 = probes.iter().map(|p| p.sigma * p.sigma).sum();
    if sxx == 0.0 {
        return Err(Error::param(format!("need at least one positive sigma probe, got {sigma_probes:?}")));
    }
    let sxy: f64 = probes.iter().map(|p| p.sigma * p.radius).sum();
    let ratio = sxy / sxx;
    Ok(CalibrationReport { probes, ratio, bokeh_scale: ratio * gauss_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| Ok((x - 2.3) * (x - 2.3) + 1.0), 0.0, 10.0, 1e-6).unwrap();
        assert!((x - 2.3).abs() < 1e-5);
        assert!((fx - 1.0).abs() < 1e-9);
    }

    fn blobs(seed: u64) -> RasterPatch {
        let mut r = crate::rng::stream(&[seed]);
        let centers: Vec<(f64, f64, f64)> =
            (0..40).map(|_| (r.random_range(0.0..64.0), r.random_range(0.0..64.0), r.random_range(1.5..5.0))).collect();
        RasterPatch::from_fn(64, 64, |x, y| {
            let inside = centers
                .iter()
                .any(|&(cx, cy, rad)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= rad * rad);
            if inside { [0.35, 0.2, 0.5] } else { [0.9, 0.7, 0.8] }
        })
    }

    #[test]
    fn probe_zero_and_argmin_property() {
        let imgs: Vec<RasterPatch> = (0..3).map(blobs).collect();
        let rep = calibrate_blur_scale(&imgs, &[0.0, 1.0, 2.0], 0.926).unwrap();
        assert_eq!(rep.probes.len(), 3);
        assert_eq!(rep.probes[0].radius, 0.0);
        for p in &rep.probes[1..] {
            assert!(p.ssd_at_radius < p.ssd_at_double, "{p:?}");
            assert!(p.radius >= p.sigma / 2.0 && p.radius <= 4.0 * p.sigma);
        }
        assert!((rep.bokeh_scale - rep.ratio * 0.926).abs() < 1e-12);
    }

    #[test]
    fn constant_images_are_degenerate() {
        let imgs = alloc::vec![RasterPatch::filled(16, 16, [0.5; 3]), blobs(1), blobs(2)];
        assert!(matches!(calibrate_blur_scale(&imgs, &[1.0], 0.926), Err(Error::DegenerateInput(_))));
        assert!(calibrate_blur_scale(&[blobs(1), blobs(2)], &[1.0], 0.926).is_err());
    }
}
