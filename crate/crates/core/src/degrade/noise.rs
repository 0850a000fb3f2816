use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::rng;

/// Means at or above this use the normal approximation.
const INVERSION_MAX_MEAN: f64 = 30.0;

/// Poisson draw. Sequential-search inversion for small means, normal
/// approximation with continuity correction otherwise.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < INVERSION_MAX_MEAN {
        let u: f64 = rng.random();
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        let mut k = 0u64;
        // p underflows long before this bound for means below 30.
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        let z = rng::standard_normal(rng);
        let v = libm::floor(mean + libm::sqrt(mean) * z + 0.5);
        if v < 0.0 {
            0
        } else {
            v as u64
        }
    }
}

/// Shot-noise model `x' = s * Poisson(x / s)` applied to every channel,
/// followed by clamping to `[0, 1]`. Smaller `s` means less noise.
pub fn poisson_noise<R: Rng + ?Sized>(patch: &RasterPatch, s: f64, rng: &mut R) -> Result<RasterPatch> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::param("noise scale s must be > 0"));
    }
    let mut out = patch.clone();
    for v in out.data_mut() {
        let mean = v.max(0.0) / s;
        *v = (s * sample_poisson(mean, rng) as f64).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(p: &RasterPatch) -> (f64, f64) {
        let d = p.data();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_stays_zero() {
        let p = RasterPatch::filled(32, 32, [0.0; 3]);
        let mut r = rng::stream(&[1]);
        for s in [0.01, 1.0, 64.0] {
            assert!(poisson_noise(&p, s, &mut r).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn moments_at_small_scale() {
        // 192 x 192 x 3 > 1e5 samples.
        let p = RasterPatch::filled(192, 192, [0.5; 3]);
        let mut r = rng::stream(&[2]);
        let out = poisson_noise(&p, 0.01, &mut r).unwrap();
        let (mean, var) = moments(&out);
        assert!((mean - 0.5).abs() <= 0.003, "mean {mean}");
        // Var = s * x = 0.005; clamping at 1 sits 7 sigma away.
        assert!((var - 0.005).abs() <= 0.15 * 0.005, "var {var}");
    }

    #[test]
    fn inversion_branch_moments() {
        // mean x / s = 4 uses the inversion sampler.
        let p = RasterPatch::filled(128, 128, [0.2; 3]);
        let mut r = rng::stream(&[3]);
        let out = poisson_noise(&p, 0.05, &mut r).unwrap();
        let (mean, var) = moments(&out);
        assert!((mean - 0.2).abs() < 3.0 * (0.01f64 / out.data().len() as f64).sqrt() + 1e-3);
        assert!((var - 0.01).abs() < 0.1 * 0.01);
    }

    #[test]
    fn vanishing_scale_approaches_identity() {
        let p = RasterPatch::from_fn(64, 64, |x, y| [x as f64 / 64.0, y as f64 / 64.0, 0.5]);
        let mut r = rng::stream(&[4]);
        // Deviation scale is sqrt(s * x): at s = 1e-8 it is <= 1e-4 per pixel.
        let out = poisson_noise(&p, 1e-8, &mut r).unwrap();
        let close = p.data().iter().zip(out.data()).filter(|(a, b)| (*a - *b).abs() <= 0.001).count();
        assert!(close as f64 >= 0.999 * p.data().len() as f64);
        // At s = 1e-6 the per-pixel spread follows sqrt(s * x).
        let out = poisson_noise(&p, 1e-6, &mut r).unwrap();
        for (a, b) in p.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 6.0 * (1e-6 * a).sqrt() + 1e-6);
        }
    }

    #[test]
    fn mean_preserved_for_small_scales() {
        let mut r = rng::stream(&[6]);
        // Cases where the clamp at 1 sits at least 3 sigma above x.
        for (x, s) in [(0.1, 0.1), (0.3, 0.05), (0.5, 0.01), (0.9, 0.001)] {
            let p = RasterPatch::filled(100, 100, [x; 3]);
            let out = poisson_noise(&p, s, &mut r).unwrap();
            let n = out.data().len() as f64;
            let (mean, _) = moments(&out);
            assert!((mean - x).abs() <= 3.0 * (s * x / n).sqrt(), "x={x} s={s} mean={mean}");
        }
    }

    #[test]
    fn invalid_scale() {
        let p = RasterPatch::filled(2, 2, [0.5; 3]);
        let mut r = rng::stream(&[1]);
        assert!(poisson_noise(&p, 0.0, &mut r).is_err());
        assert!(poisson_noise(&p, -1.0, &mut r).is_err());
    }
}
