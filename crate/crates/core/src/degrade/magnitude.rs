use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::DegradationSpec;

/// Highest model focus class.
pub const MAX_CLASS: u8 = 29;

/// Classes `1..=28` share the exponential ramp `scale * exp(3 c / 28)`.
const RAMP_CLASSES: f64 = 28.0;
const RAMP_EXPONENT: f64 = 3.0;

/// Fine-grained out-of-focus class, 0 (sharp) to 29 (strongest blur).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OofClass(u8);

impl OofClass {
    pub const IN_FOCUS: OofClass = OofClass(0);

    pub fn new(value: u8) -> Result<Self> {
        if value > MAX_CLASS {
            return Err(Error::param("OOF class must lie in [0, 29]"));
        }
        Ok(OofClass(value))
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = OofClass> {
        (0..=MAX_CLASS).map(OofClass)
    }
}

impl TryFrom<i64> for OofClass {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        if !(0..=MAX_CLASS as i64).contains(&v) {
            return Err(Error::param("OOF class must lie in [0, 29]"));
        }
        Ok(OofClass(v as u8))
    }
}

impl fmt::Display for OofClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlurMethod {
    Gaussian,
    Bokeh,
}

impl BlurMethod {
    pub fn name(self) -> &'static str {
        match self {
            BlurMethod::Gaussian => "gaussian",
            BlurMethod::Bokeh => "bokeh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Some(BlurMethod::Gaussian),
            "bokeh" => Some(BlurMethod::Bokeh),
            _ => None,
        }
    }
}

/// How class index maps to blur magnitude inside `[scale, scale * e^3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MagnitudeMapping {
    Exponential,
    Linear,
}

impl MagnitudeMapping {
    pub fn name(self) -> &'static str {
        match self {
            MagnitudeMapping::Exponential => "exponential",
            MagnitudeMapping::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" => Some(MagnitudeMapping::Exponential),
            "linear" => Some(MagnitudeMapping::Linear),
            _ => None,
        }
    }
}

/// Upper boundary of class `c` for `c` in `0..=28`.
///
/// Boundaries are shared between neighbours so adjacent intervals meet
/// exactly, and `boundary(28)` is exactly `scale * e^3`.
fn boundary(c: u8, scale: f64, mapping: MagnitudeMapping) -> f64 {
    let top = scale * libm::exp(RAMP_EXPONENT);
    if c as f64 == RAMP_CLASSES {
        return top;
    }
    match mapping {
        MagnitudeMapping::Exponential => scale * libm::exp(RAMP_EXPONENT * c as f64 / RAMP_CLASSES),
        MagnitudeMapping::Linear => scale + (top - scale) * c as f64 / RAMP_CLASSES,
    }
}

/// Interval `[lo, hi]` from which the blur magnitude (Gaussian sigma or disk
/// radius, in pixels) of class `c` is drawn.
pub fn class_to_magnitude_interval(
    c: OofClass,
    method: BlurMethod,
    mapping: MagnitudeMapping,
    spec: &DegradationSpec,
) -> (f64, f64) {
    let (scale, max) = spec.scale_and_max(method);
    match c.get() {
        0 => (0.0, 0.0),
        MAX_CLASS => (boundary(28, scale, mapping), max),
        k => (boundary(k - 1, scale, mapping), boundary(k, scale, mapping)),
    }
}

/// Uniform draw from the class interval.
pub fn sample_blur_magnitude<R: Rng + ?Sized>(c: OofClass, spec: &DegradationSpec, rng: &mut R) -> f64 {
    let (lo, hi) = class_to_magnitude_interval(c, spec.blur_method, spec.magnitude_mapping, spec);
    rng::uniform(rng, lo, hi)
}

/// Magnitude for one generated version, from its dedicated seeded stream.
pub fn version_magnitude(c: OofClass, spec: &DegradationSpec, patch_id: u64) -> f64 {
    let mut r = rng::patch_stream(spec.seed, patch_id, c.get(), rng::Stage::Magnitude);
    sample_blur_magnitude(c, spec, &mut r)
}
