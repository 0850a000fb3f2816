use alloc::vec::Vec;

use super::stats::spearman;
use crate::blur::bokeh_blur;
use crate::error::{Error, Result};
use crate::heatmap::HeatmapGrid;
use crate::raster::RasterPatch;

/// Focal planes from +4 um to -4 um in 0.4 um steps.
pub fn default_z_levels() -> Vec<f64> {
    (0..21).map(|i| (40 - 4 * i) as f64 / 10.0).collect()
}

/// Default defocus blur per micrometre of focal offset.
pub const DEFAULT_PX_PER_UM: f64 = 2.0;

/// One image per focal plane, blurred with a disk of radius `k * |z|`.
pub fn synthetic_zstack(base: &RasterPatch, z_levels: &[f64], px_per_um: f64) -> Result<Vec<RasterPatch>> {
    if !(px_per_um >= 0.0) {
        return Err(Error::param("blur per micrometre must be >= 0"));
    }
    z_levels.iter().map(|z| bokeh_blur(base, px_per_um * libm::fabs(*z))).collect()
}

/// Inclusive-exclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub z_levels: Vec<f64>,
    /// Predicted class against z for every ROI cell with tissue at all levels.
    pub curves: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    /// z of each curve's minimum (first occurrence).
    pub cell_argmin_z: Vec<f64>,
    pub argmin_index: usize,
    pub argmin_z: f64,
    /// Spearman rho between `|z - argmin_z|` and the mean curve on the levels
    /// before and including the minimum; `None` if undefined there.
    pub left_rho: Option<f64>,
    pub right_rho: Option<f64>,
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn branch_rho(z: &[f64], curve: &[f64], z_min: f64) -> Option<f64> {
    let d: Vec<f64> = z.iter().map(|v| libm::fabs(v - z_min)).collect();
    spearman(&d, curve).ok().map(|c| c.rho)
}

/// Focus curve statistics over a cell rectangle of a z-stack of heatmaps.
pub fn zstack_profile(grids: &[(f64, HeatmapGrid)], roi: CellRect) -> Result<ZProfile> {
    if grids.len() < 3 {
        return Err(Error::param("need at least 3 focal planes"));
    }
    let z: Vec<f64> = grids.iter().map(|g| g.0).collect();
    let increasing = z.windows(2).all(|w| w[1] > w[0]);
    let decreasing = z.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::param("z levels must be strictly monotone"));
    }
    let (rows, cols) = (grids[0].1.rows, grids[0].1.cols);
    if grids.iter().any(|g| (g.1.rows, g.1.cols) != (rows, cols)) {
        return Err(Error::param("heatmap geometry differs between planes"));
    }
    if roi.rows == 0 || roi.cols == 0 || roi.row0 + roi.rows > rows || roi.col0 + roi.cols > cols {
        return Err(Error::param("region of interest outside the grid"));
    }

    let mut curves = Vec::new();
    for r in roi.row0..roi.row0 + roi.rows {
        for c in roi.col0..roi.col0 + roi.cols {
            let curve: Option<Vec<f64>> = grids.iter().map(|g| g.1.get(r, c).map(|k| k.get() as f64)).collect();
            if let Some(curve) = curve {
                curves.push(curve);
            }
        }
    }
    if curves.is_empty() {
        return Err(Error::param("no cell in the region has tissue at every level"));
    }
    let n = curves.len() as f64;
    let mean_curve: Vec<f64> = (0..z.len()).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / n).collect();
    let cell_argmin_z = curves.iter().map(|c| z[argmin(c)]).collect();
    let k = argmin(&mean_curve);
    Ok(ZProfile {
        left_rho: branch_rho(&z[..=k], &mean_curve[..=k], z[k]),
        right_rho: branch_rho(&z[k..], &mean_curve[k..], z[k]),
        z_levels: z.clone(),
        curves,
        argmin_index: k,
        argmin_z: z[k],
        mean_curve,
        cell_argmin_z,
    })
}
