use rand::Rng;

use crate::blur;
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::rng::{self, Stage};
use crate::PATCH_SIZE;

use super::{jpeg_roundtrip, poisson_noise, version_magnitude, BlurMethod, DegradationSpec, OofClass};

/// Everything needed to reproduce one degraded version.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRecord {
    pub class: OofClass,
    pub method: BlurMethod,
    /// Gaussian sigma or disk radius, in pixels.
    pub magnitude: f64,
    pub noise_s: Option<f64>,
    pub jpeg_quality: Option<u8>,
}

#[derive(Debug, Clone)]
pub struct DegradedPatch {
    pub patch: RasterPatch,
    pub record: DegradationRecord,
}

pub fn blur_with(patch: &RasterPatch, method: BlurMethod, magnitude: f64) -> Result<RasterPatch> {
    match method {
        BlurMethod::Gaussian => blur::gaussian_blur(patch, magnitude),
        BlurMethod::Bokeh => blur::bokeh_blur(patch, magnitude),
    }
}

impl DegradationRecord {
    /// Draws the magnitude, noise scale and JPEG quality of one version.
    pub fn plan(class: OofClass, spec: &DegradationSpec, patch_id: u64) -> Self {
        let magnitude = version_magnitude(class, spec, patch_id);
        let noise_s = spec.add_poisson.then(|| {
            let mut r = rng::patch_stream(spec.seed, patch_id, class.get(), Stage::Noise);
            rng::uniform(&mut r, spec.noise_s_range.0, spec.noise_s_range.1)
        });
        let jpeg_quality = spec.add_jpeg.then(|| {
            let mut r = rng::patch_stream(spec.seed, patch_id, class.get(), Stage::Jpeg);
            r.random_range(spec.jpeg_quality_range.0..=spec.jpeg_quality_range.1)
        });
        DegradationRecord { class, method: spec.blur_method, magnitude, noise_s, jpeg_quality }
    }

    /// Runs blur, noise and JPEG on the full source, then crops the center
    /// `PATCH_SIZE` square. Channels are clamped at the end of each stage.
    pub fn apply<R: Rng + ?Sized>(&self, source: &RasterPatch, noise_rng: &mut R) -> Result<RasterPatch> {
        if source.width() < PATCH_SIZE || source.height() < PATCH_SIZE {
            return Err(Error::param("source patch smaller than the classifier input"));
        }
        let mut img = blur_with(source, self.method, self.magnitude)?;
        img.clamp_unit();
        if let Some(s) = self.noise_s {
            img = poisson_noise(&img, s, noise_rng)?;
        }
        if let Some(q) = self.jpeg_quality {
            img = jpeg_roundtrip(&img, q)?;
        }
        img.crop_center(PATCH_SIZE, PATCH_SIZE)
    }
}

/// Produces the class-`c` version of `source` for dataset entry `patch_id`.
/// Deterministic in `(spec.seed, patch_id, c)`.
pub fn degrade_patch(
    source: &RasterPatch,
    c: OofClass,
    spec: &DegradationSpec,
    patch_id: u64,
) -> Result<DegradedPatch> {
    let record = DegradationRecord::plan(c, spec, patch_id);
    let mut noise_rng = rng::patch_stream(spec.seed, patch_id, c.get(), Stage::NoisePixels);
    let patch = record.apply(source, &mut noise_rng)?;
    Ok(DegradedPatch { patch, record })
}
