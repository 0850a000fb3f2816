//! Downstream-detector performance stratified by focus quality.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::stats::auc;
use crate::blur::bokeh_blur;
use crate::degrade::OofClass;
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::rng::{self, Stage};

/// Inclusive class range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucket {
    pub lo: u8,
    pub hi: u8,
}

impl Bucket {
    pub fn contains(self, c: OofClass) -> bool {
        (self.lo..=self.hi).contains(&c.get())
    }
}

impl core::fmt::Display for Bucket {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

pub const DEFAULT_BUCKETS: [Bucket; 5] = [
    Bucket { lo: 0, hi: 4 },
    Bucket { lo: 5, hi: 9 },
    Bucket { lo: 10, hi: 14 },
    Bucket { lo: 15, hi: 19 },
    Bucket { lo: 20, hi: 29 },
];

pub const BOOTSTRAP_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub slide_id: String,
    pub row: usize,
    pub col: usize,
    pub score: f64,
    pub label: bool,
    pub oof_class: OofClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketAuc {
    pub bucket: Bucket,
    pub patches: usize,
    pub positives: usize,
    /// `None` when the bucket lacks one of the labels.
    pub auc: Option<f64>,
    /// Percentile 2.5 / 97.5 over the bootstrap replicates where the AUC
    /// was defined.
    pub ci: Option<(f64, f64)>,
    pub replicates: usize,
}

/// Records grouped by slide in a fixed (sorted) slide order.
pub struct SlideBootstrap<'a> {
    buckets: Vec<Bucket>,
    slides: Vec<Vec<&'a PatchRecord>>,
}

fn bucket_auc<'r>(records: impl Iterator<Item = &'r PatchRecord>, b: Bucket) -> Option<f64> {
    let (scores, labels): (Vec<f64>, Vec<bool>) =
        records.filter(|r| b.contains(r.oof_class)).map(|r| (r.score, r.label)).unzip();
    auc(&scores, &labels).ok()
}

impl<'a> SlideBootstrap<'a> {
    pub fn new(records: &'a [PatchRecord], buckets: &[Bucket]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::param("no patch records"));
        }
        if buckets.iter().any(|b| b.lo > b.hi || b.hi > crate::degrade::MAX_CLASS) {
            return Err(Error::param("bucket bounds must satisfy lo <= hi <= 29"));
        }
        let mut by_slide: BTreeMap<&str, Vec<&PatchRecord>> = BTreeMap::new();
        for r in records {
            by_slide.entry(r.slide_id.as_str()).or_default().push(r);
        }
        Ok(SlideBootstrap { buckets: buckets.to_vec(), slides: by_slide.into_values().collect() })
    }

    pub fn slide_count(&self) -> usize {
        self.slides.len()
    }

    /// AUC per bucket on the full data.
    pub fn point(&self) -> Vec<Option<f64>> {
        self.buckets.iter().map(|&b| bucket_auc(self.slides.iter().flatten().copied(), b)).collect()
    }

    /// Replicate `index`: slides drawn with replacement, all patches of a
    /// drawn slide included with multiplicity.
    pub fn replicate(&self, seed: u64, index: usize) -> Vec<Option<f64>> {
        let mut r = rng::stream(&[seed, Stage::Bootstrap as u64, index as u64]);
        let n = self.slides.len();
        let picks: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        self.buckets
            .iter()
            .map(|&b| bucket_auc(picks.iter().flat_map(|&i| self.slides[i].iter().copied()), b))
            .collect()
    }

    pub fn summarize(&self, point: &[Option<f64>], replicates: &[Vec<Option<f64>>]) -> Vec<BucketAuc> {
        let all: Vec<&PatchRecord> = self.slides.iter().flatten().copied().collect();
        self.buckets
            .iter()
            .enumerate()
            .map(|(i, &bucket)| {
                let members: Vec<&&PatchRecord> = all.iter().filter(|r| bucket.contains(r.oof_class)).collect();
                let mut reps: Vec<f64> = replicates.iter().filter_map(|r| r[i]).collect();
                reps.sort_by(f64::total_cmp);
                let ci = (point[i].is_some() && !reps.is_empty())
                    .then(|| (percentile(&reps, 2.5), percentile(&reps, 97.5)));
                BucketAuc {
                    bucket,
                    patches: members.len(),
                    positives: members.iter().filter(|r| r.label).count(),
                    auc: point[i],
                    ci,
                    replicates: reps.len(),
                }
            })
            .collect()
    }
}

/// Linear-interpolated percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-bucket AUC with slide-level bootstrap confidence intervals.
pub fn stratified_auc(records: &[PatchRecord], buckets: &[Bucket], samples: usize, seed: u64) -> Result<Vec<BucketAuc>> {
    let boot = SlideBootstrap::new(records, buckets)?;
    let point = boot.point();
    let reps: Vec<Vec<Option<f64>>> = (0..samples).map(|i| boot.replicate(seed, i)).collect();
    Ok(boot.summarize(&point, &reps))
}

/// AUC of `scorer` after disk-blurring every patch with each radius.
pub fn synthetic_blur_sweep(
    scorer: &dyn Fn(&RasterPatch) -> f64,
    patches: &[(RasterPatch, bool)],
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    radii
        .iter()
        .map(|&r| {
            let scores = patches.iter().map(|(p, _)| Ok(scorer(&bokeh_blur(p, r)?))).collect::<Result<Vec<f64>>>()?;
            let labels: Vec<bool> = patches.iter().map(|p| p.1).collect();
            Ok((r, auc(&scores, &labels)?))
        })
        .collect()
}

const TOY_FEATURES: usize = 5;

/// Logistic regression on mean R, G, B and the mean absolute Laplacian at
/// full and half resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer {
    pub mean: [f64; TOY_FEATURES],
    pub scale: [f64; TOY_FEATURES],
    pub weights: [f64; TOY_FEATURES],
    pub bias: f64,
}

pub fn toy_features(p: &RasterPatch) -> [f64; TOY_FEATURES] {
    let n = (p.width() * p.height()) as f64;
    let mut f = [0.0; TOY_FEATURES];
    for px in p.data().chunks_exact(3) {
        for c in 0..3 {
            f[c] += px[c] / n;
        }
    }
    f[3] = p.mean_abs_laplacian();
    f[4] = half_resolution(p).mean_abs_laplacian();
    f
}

/// 2x2 box average; a trailing odd row or column is dropped.
fn half_resolution(p: &RasterPatch) -> RasterPatch {
    RasterPatch::from_fn(p.width() / 2, p.height() / 2, |x, y| {
        let mut px = [0.0; 3];
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let v = p.get(2 * x + dx, 2 * y + dy);
            for c in 0..3 {
                px[c] += v[c] / 4.0;
            }
        }
        px
    })
}

impl ToyScorer {
    /// Full-batch gradient descent on the standardized features with a small
    /// ridge penalty.
    pub fn fit(patches: &[(RasterPatch, bool)]) -> Result<Self> {
        if !patches.iter().any(|p| p.1) || !patches.iter().any(|p| !p.1) {
            return Err(Error::UndefinedAuc("training set needs both labels".into()));
        }
        let feats: Vec<[f64; TOY_FEATURES]> = patches.iter().map(|p| toy_features(&p.0)).collect();
        let n = feats.len() as f64;
        let mut mean = [0.0; TOY_FEATURES];
        let mut scale = [0.0; TOY_FEATURES];
        for f in &feats {
            for k in 0..TOY_FEATURES {
                mean[k] += f[k] / n;
            }
        }
        for f in &feats {
            for k in 0..TOY_FEATURES {
                scale[k] += (f[k] - mean[k]) * (f[k] - mean[k]) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { libm::sqrt(*s) } else { 1.0 };
        }
        let z: Vec<[f64; TOY_FEATURES]> =
            feats.iter().map(|f| core::array::from_fn(|k| (f[k] - mean[k]) / scale[k])).collect();
        let mut w = [0.0; TOY_FEATURES];
        let mut b = 0.0;
        const RIDGE: f64 = 1e-3;
        for _ in 0..2000 {
            let mut gw = [0.0; TOY_FEATURES];
            let mut gb = 0.0;
            for (x, (_, y)) in z.iter().zip(patches) {
                let logit = b + (0..TOY_FEATURES).map(|k| w[k] * x[k]).sum::<f64>();
                let err = 1.0 / (1.0 + libm::exp(-logit)) - if *y { 1.0 } else { 0.0 };
                for k in 0..TOY_FEATURES {
                    gw[k] += err * x[k] / n;
                }
                gb += err / n;
            }
            for k in 0..TOY_FEATURES {
                w[k] -= 0.5 * (gw[k] + RIDGE * w[k]);
            }
            b -= 0.5 * gb;
        }
        Ok(ToyScorer { mean, scale, weights: w, bias: b })
    }

    /// Tumor probability of one patch.
    pub fn score(&self, p: &RasterPatch) -> f64 {
        let f = toy_features(p);
        let logit = self.bias + (0..TOY_FEATURES).map(|k| self.weights[k] * (f[k] - self.mean[k]) / self.scale[k]).sum::<f64>();
        1.0 / (1.0 + libm::exp(-logit))
    }
}

pub fn describe_bucket(b: &BucketAuc) -> String {
    match (b.auc, b.ci) {
        (Some(a), Some((lo, hi))) => format!("{}: AUC {a:.3} [{lo:.3}, {hi:.3}] n={}", b.bucket, b.patches),
        (Some(a), None) => format!("{}: AUC {a:.3} n={}", b.bucket, b.patches),
        _ => format!("{}: not evaluable n={}", b.bucket, b.patches),
    }
}
