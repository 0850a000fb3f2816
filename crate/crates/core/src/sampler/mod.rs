//! Tissue detection, candidate patch selection, training-set assembly and
//! training-time augmentation.

mod augment;

use alloc::vec::Vec;

use rand::Rng;

pub use augment::{apply_augmentation, augment, draw_augmentation, AugmentDraw, AugmentParams};

use crate::degrade::{degrade_patch, DegradationRecord, DegradationSpec, OofClass};
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::{CELL_SIZE, SOURCE_SIZE};

/// Upper luma bound of tissue; brighter cells are background glass.
pub const TISSUE_MAX_LUMA: f64 = 0.8;

/// `0 < Y <= 0.8`: black (no signal) and near-white cells are excluded.
#[inline]
pub fn is_tissue(mean_luma: f64) -> bool {
    mean_luma > 0.0 && mean_luma <= TISSUE_MAX_LUMA
}

/// Per-cell tissue flags over the full cells of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueGrid {
    pub cell_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<bool>,
    pub mean_luma: Vec<f64>,
}

impl TissueGrid {
    pub fn is_tissue(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn tissue_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Tissue flags for every full `cell` x `cell` block; partial blocks at the
/// right and bottom edges are ignored.
pub fn tissue_mask(image: &RasterPatch, cell: usize) -> Result<TissueGrid> {
    if cell == 0 || image.width() < cell || image.height() < cell {
        return Err(Error::param("image smaller than one grid cell"));
    }
    let (cols, rows) = (image.width() / cell, image.height() / cell);
    let mut mean_luma = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            mean_luma.push(image.region_mean_luma(c * cell, r * cell, cell, cell));
        }
    }
    let cells = mean_luma.iter().map(|&y| is_tissue(y)).collect();
    Ok(TissueGrid { cell_size: cell, cols, rows, cells, mean_luma })
}

/// A square window cut from a larger image.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Top-left corner in image pixels.
    pub x: usize,
    pub y: usize,
    pub patch: RasterPatch,
}

impl Candidate {
    pub fn mean_luma(&self) -> f64 {
        self.patch.mean_luma()
    }
}

/// Draws `n` windows of side `size` whose centers lie inside tissue cells
/// and whose extent fits within the image. Cells are chosen uniformly among
/// those that can host a center, then the center uniformly within the cell.
pub fn sample_candidates<R: Rng + ?Sized>(
    image: &RasterPatch,
    tissue: &TissueGrid,
    n: usize,
    size: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    if size == 0 || image.width() < size || image.height() < size {
        return Err(Error::param("image smaller than the candidate window"));
    }
    // Center (cx, cy) = top-left + size / 2; valid tops are 0..=W - size.
    let half = size / 2;
    let (cx_lo, cx_hi) = (half, image.width() - size + half);
    let (cy_lo, cy_hi) = (half, image.height() - size + half);
    let cell = tissue.cell_size;
    let mut hosts = Vec::new();
    for r in 0..tissue.rows {
        for c in 0..tissue.cols {
            if !tissue.is_tissue(r, c) {
                continue;
            }
            let x0 = (c * cell).max(cx_lo);
            let x1 = ((c + 1) * cell - 1).min(cx_hi);
            let y0 = (r * cell).max(cy_lo);
            let y1 = ((r + 1) * cell - 1).min(cy_hi);
            if x0 <= x1 && y0 <= y1 {
                hosts.push((x0, x1, y0, y1));
            }
        }
    }
    if hosts.is_empty() {
        return Err(Error::EmptyResult);
    }
    (0..n)
        .map(|_| {
            let (x0, x1, y0, y1) = hosts[rng.random_range(0..hosts.len())];
            let cx = rng.random_range(x0..=x1);
            let cy = rng.random_range(y0..=y1);
            let (x, y) = (cx - half, cy - half);
            Ok(Candidate { x, y, patch: image.crop(x, y, size, size)? })
        })
        .collect()
}

/// The `k` candidates with the lowest mean luma, ascending; equal lumas are
/// ordered by (row, column) of the top-left corner.
pub fn select_densest(mut candidates: Vec<Candidate>, k: usize) -> Result<Vec<Candidate>> {
    if k > candidates.len() {
        return Err(Error::param("k exceeds the number of candidates"));
    }
    let mut keyed: Vec<(f64, Candidate)> = candidates.drain(..).map(|c| (c.mean_luma(), c)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1.y, a.1.x).cmp(&(b.1.y, b.1.x))));
    Ok(keyed.into_iter().take(k).map(|(_, c)| c).collect())
}

/// Per-rater focus vote in a source manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rating {
    InFocus,
    OutFocus,
    Undecided,
}

impl Rating {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "in_focus" => Some(Rating::InFocus),
            "out_focus" => Some(Rating::OutFocus),
            "undecided" => Some(Rating::Undecided),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rating::InFocus => "in_focus",
            Rating::OutFocus => "out_focus",
            Rating::Undecided => "undecided",
        }
    }
}

/// A source enters training only if every rater called it in focus.
pub fn consensus_in_focus(ratings: &[Rating]) -> bool {
    !ratings.is_empty() && ratings.iter().all(|&r| r == Rating::InFocus)
}

/// One degraded version of a source, ready for training.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub patch: RasterPatch,
    pub label: OofClass,
    pub source_id: u64,
    pub record: DegradationRecord,
}

/// All 30 versions (classes 0..=29) of one source.
pub fn source_examples(source: &RasterPatch, source_id: u64, spec: &DegradationSpec) -> Result<Vec<TrainingExample>> {
    spec.validate()?;
    if source.width() < SOURCE_SIZE || source.height() < SOURCE_SIZE {
        return Err(Error::param("source smaller than 300x300"));
    }
    OofClass::all()
        .map(|c| {
            let d = degrade_patch(source, c, spec, source_id)?;
            Ok(TrainingExample { patch: d.patch, label: c, source_id, record: d.record })
        })
        .collect()
}

/// Default cell size for tissue detection.
pub const DEFAULT_CELL: usize = CELL_SIZE;
