//! Semi-synthetic out-of-focus degradation.
//!
//! A sharp source patch is turned into one of 30 graded versions by
//! blurring it with a class-dependent magnitude, optionally re-adding sensor
//! noise and JPEG artifacts that blurring removes, and cropping the center.

mod calibrate;
mod jpeg;
mod magnitude;
mod noise;
mod pipeline;

pub use calibrate::{calibrate_blur_scale, golden_section_min, CalibrationReport, ProbeResult};
pub use jpeg::jpeg_roundtrip;
pub use magnitude::{
    class_to_magnitude_interval, sample_blur_magnitude, version_magnitude, BlurMethod, MagnitudeMapping,
    OofClass, MAX_CLASS,
};
pub use noise::{poisson_noise, sample_poisson};
pub use pipeline::{blur_with, degrade_patch, DegradationRecord, DegradedPatch};

use crate::error::{Error, Result};

/// Full parameter set of the degradation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    pub blur_method: BlurMethod,
    pub magnitude_mapping: MagnitudeMapping,
    pub gauss_scale: f64,
    pub bokeh_scale: f64,
    pub gauss_max: f64,
    pub bokeh_max: f64,
    pub add_poisson: bool,
    /// Noise scale `s` is drawn uniformly from this closed interval.
    pub noise_s_range: (f64, f64),
    pub add_jpeg: bool,
    /// JPEG quality is drawn uniformly from this closed integer interval.
    pub jpeg_quality_range: (u8, u8),
    pub seed: u64,
}

impl Default for DegradationSpec {
    /// Bokeh blur, exponential mapping, Poisson noise and JPEG artifacts.
    fn default() -> Self {
        DegradationSpec {
            blur_method: BlurMethod::Bokeh,
            magnitude_mapping: MagnitudeMapping::Exponential,
            gauss_scale: 0.926,
            bokeh_scale: 1.4,
            gauss_max: 132.0,
            bokeh_max: 200.0,
            add_poisson: true,
            noise_s_range: (0.01, 64.0),
            add_jpeg: true,
            jpeg_quality_range: (70, 90),
            seed: 0,
        }
    }
}

/// Ablation configurations: 1 = Gaussian blur only, 2 = + Poisson noise,
/// 3 = + JPEG artifacts, 4 = Bokeh blur + noise + JPEG.
pub const ABLATION_CONFIGS: [u8; 4] = [1, 2, 3, 4];

impl DegradationSpec {
    /// Preset for one of the four ablation configurations.
    pub fn ablation(config: u8) -> Result<Self> {
        let base = DegradationSpec::default();
        let gaussian = BlurMethod::Gaussian;
        Ok(match config {
            1 => DegradationSpec { blur_method: gaussian, add_poisson: false, add_jpeg: false, ..base },
            2 => DegradationSpec { blur_method: gaussian, add_poisson: true, add_jpeg: false, ..base },
            3 => DegradationSpec { blur_method: gaussian, ..base },
            4 => base,
            _ => return Err(Error::param("ablation configuration must be 1, 2, 3 or 4")),
        })
    }

    /// Bokeh model trained with a linear class-to-radius ramp.
    pub fn linear_bokeh() -> Self {
        DegradationSpec { magnitude_mapping: MagnitudeMapping::Linear, ..Default::default() }
    }

    pub fn scale_and_max(&self, method: BlurMethod) -> (f64, f64) {
        match method {
            BlurMethod::Gaussian => (self.gauss_scale, self.gauss_max),
            BlurMethod::Bokeh => (self.bokeh_scale, self.bokeh_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for method in [BlurMethod::Gaussian, BlurMethod::Bokeh] {
            let (scale, max) = self.scale_and_max(method);
            if !(scale > 0.0 && max > 0.0) || !scale.is_finite() || !max.is_finite() {
                return Err(Error::param("blur scales and maxima must be positive"));
            }
            if !(scale * libm::exp(3.0) < max) {
                return Err(Error::param("blur maximum must exceed scale * e^3"));
            }
        }
        let (lo, hi) = self.noise_s_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::param("noise range must be non-empty with a positive lower bound"));
        }
        let (qlo, qhi) = self.jpeg_quality_range;
        if !(1..=100).contains(&qlo) || !(1..=100).contains(&qhi) || qlo > qhi {
            return Err(Error::param("JPEG quality range must lie within [1, 100]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for c in ABLATION_CONFIGS {
            DegradationSpec::ablation(c).unwrap().validate().unwrap();
        }
        DegradationSpec::linear_bokeh().validate().unwrap();
        assert!(DegradationSpec::ablation(5).is_err());
    }

    #[test]
    fn preset_flags() {
        let c1 = DegradationSpec::ablation(1).unwrap();
        assert_eq!((c1.blur_method, c1.add_poisson, c1.add_jpeg), (BlurMethod::Gaussian, false, false));
        let c4 = DegradationSpec::ablation(4).unwrap();
        assert_eq!((c4.blur_method, c4.add_poisson, c4.add_jpeg), (BlurMethod::Bokeh, true, true));
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = DegradationSpec::default();
        assert!(DegradationSpec { noise_s_range: (0.0, 1.0), ..base.clone() }.validate().is_err());
        assert!(DegradationSpec { noise_s_range: (2.0, 1.0), ..base.clone() }.validate().is_err());
        assert!(DegradationSpec { jpeg_quality_range: (0, 90), ..base.clone() }.validate().is_err());
        assert!(DegradationSpec { jpeg_quality_range: (90, 101), ..base.clone() }.validate().is_err());
        assert!(DegradationSpec { bokeh_max: 20.0, ..base.clone() }.validate().is_err());
        assert!(DegradationSpec { gauss_scale: -1.0, ..base }.validate().is_err());
    }
}
