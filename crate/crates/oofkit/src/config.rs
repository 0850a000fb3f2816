//! TOML run configuration with `key=value` overrides.
//!
//! A configuration is assembled from config files and inline `key=value`
//! snippets (dotted keys allowed), later sources winning, and then
//! deserialized with unknown keys rejected. Command-line flags are applied on
//! top by the caller.

use std::path::{Path, PathBuf};

use oofkit_core::degrade::{BlurMethod, DegradationSpec, MagnitudeMapping};
use oofkit_core::model::TrainConfig;
use oofkit_core::sampler::AugmentParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Table;

use crate::error::{Error, Result};

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Renames accepted aliases to their canonical keys so that sources using
/// different spellings still override each other.
fn canonicalize(t: &mut Table) {
    if let Some(toml::Value::Table(d)) = t.get_mut("degradation") {
        if let Some(v) = d.remove("table2") {
            d.insert("preset".into(), v);
        }
    }
}

/// Parses every source (a file path, or an inline `key=value`) and merges.
pub fn load_sources(sources: &[String]) -> Result<Table> {
    let mut table = Table::new();
    for src in sources {
        let path = Path::new(src);
        let text = if path.is_file() {
            std::fs::read_to_string(path).map_err(Error::io(path))?
        } else if src.contains('=') {
            src.clone()
        } else {
            return Err(Error::Usage(format!("config file not found: {src}")));
        };
        let mut t: Table = text.parse().map_err(|e| Error::Usage(format!("config {src}: {e}")))?;
        canonicalize(&mut t);
        merge(&mut table, t);
    }
    Ok(table)
}

pub fn parse_config<T: DeserializeOwned>(table: Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::Usage(format!("config: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Gaussian,
    Bokeh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingName {
    Exponential,
    Linear,
}

/// Mirrors `DegradationSpec`; `preset` (alias `table2`) selects ablation
/// configuration 1-4, which the remaining keys then override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationConfig {
    pub preset: Option<u8>,
    pub blur_method: Option<MethodName>,
    pub magnitude_mapping: Option<MappingName>,
    pub gauss_scale: Option<f64>,
    pub bokeh_scale: Option<f64>,
    pub gauss_max: Option<f64>,
    pub bokeh_max: Option<f64>,
    pub add_poisson: Option<bool>,
    pub noise_s_range: Option<(f64, f64)>,
    pub add_jpeg: Option<bool>,
    pub jpeg_quality_range: Option<(u8, u8)>,
    pub seed: Option<u64>,
}

impl DegradationConfig {
    pub fn to_spec(&self) -> Result<DegradationSpec> {
        let mut s = match self.preset {
            Some(c) => DegradationSpec::ablation(c).map_err(|e| Error::Usage(e.to_string()))?,
            None => DegradationSpec::default(),
        };
        if let Some(m) = self.blur_method {
            s.blur_method = match m {
                MethodName::Gaussian => BlurMethod::Gaussian,
                MethodName::Bokeh => BlurMethod::Bokeh,
            };
        }
        if let Some(m) = self.magnitude_mapping {
            s.magnitude_mapping = match m {
                MappingName::Exponential => MagnitudeMapping::Exponential,
                MappingName::Linear => MagnitudeMapping::Linear,
            };
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        set!(gauss_scale, bokeh_scale, gauss_max, bokeh_max, add_poisson, noise_s_range, add_jpeg, jpeg_quality_range, seed);
        s.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub decay_factor: Option<f64>,
    pub decay_every: Option<usize>,
    pub momentum: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub augment: Option<bool>,
    pub orientations: Option<bool>,
    pub brightness: Option<f64>,
    pub contrast: Option<(f64, f64)>,
    pub hue: Option<f64>,
    pub saturation: Option<(f64, f64)>,
    pub jitter: Option<u32>,
}

impl TrainSection {
    pub fn to_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        let mut a = AugmentParams::default();
        macro_rules! set {
            ($t:ident: $($f:ident),*) => { $(if let Some(v) = self.$f { $t.$f = v; })* };
        }
        set!(c: batch_size, learning_rate, decay_factor, decay_every, momentum, epochs, seed, augment);
        set!(a: orientations, brightness, contrast, hue, saturation, jitter);
        c.augment_params = a;
        c.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub degradation: DegradationConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub images: Vec<PathBuf>,
    pub probes: Option<Vec<f64>>,
    pub gauss_scale: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub dataset: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapConfig {
    pub model: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub z: Option<String>,
    pub tissue_only: Option<bool>,
    pub out_csv: Option<PathBuf>,
    pub out_png: Option<PathBuf>,
    pub upscale: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideInput {
    pub grid: PathBuf,
    pub annotations: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub slides: Vec<SlideInput>,
    pub per_grade: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZStackEvalConfig {
    pub model: Option<PathBuf>,
    pub stack: Option<PathBuf>,
    /// `[row0, col0, rows, cols]`; whole grid when absent.
    pub roi: Option<[usize; 4]>,
    pub tissue_only: Option<bool>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AucConfig {
    pub records: Option<PathBuf>,
    /// `[[lo, hi], ...]` inclusive class ranges.
    pub buckets: Option<Vec<(u8, u8)>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthZStackConfig {
    /// Base image; a procedural tissue image when absent.
    pub source: Option<PathBuf>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub seed: Option<u64>,
    pub z_levels: Option<Vec<f64>>,
    pub px_per_um: Option<f64>,
    pub out: Option<PathBuf>,
}
