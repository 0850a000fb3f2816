//! Sliding-window focus inference over large images and jet rendering.

use alloc::vec::Vec;

use crate::degrade::OofClass;
use crate::error::{Error, Result};
use crate::model::{predict_class, Input, ModelParams};
use crate::raster::RasterPatch;
use crate::sampler::is_tissue;
use crate::{CELL_SIZE, PATCH_SIZE};

/// CSV code of a masked cell.
pub const NO_TISSUE: i16 = -1;

/// Offset from a cell's top-left corner to the classifier window's corner:
/// the 139-pixel window is centered on the 128-pixel cell.
pub const WINDOW_OFFSET: isize = -(((PATCH_SIZE - CELL_SIZE) / 2) as isize);

/// Per-cell predicted classes; `None` marks cells outside tissue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapGrid {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    /// Pixel offset of cell (0, 0).
    pub origin: (usize, usize),
    pub cells: Vec<Option<OofClass>>,
}

impl HeatmapGrid {
    pub fn new(rows: usize, cols: usize, cells: Vec<Option<OofClass>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("empty heatmap grid"));
        }
        if cells.len() != rows * cols {
            return Err(Error::param("cell count does not match grid shape"));
        }
        Ok(HeatmapGrid { rows, cols, stride: CELL_SIZE, origin: (0, 0), cells })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<OofClass> {
        self.cells[row * self.cols + col]
    }

    /// Class index, or [`NO_TISSUE`].
    pub fn code(&self, row: usize, col: usize) -> i16 {
        self.get(row, col).map_or(NO_TISSUE, |c| c.get() as i16)
    }

    pub fn from_codes(rows: usize, cols: usize, codes: &[i16]) -> Result<Self> {
        let cells = codes
            .iter()
            .map(|&v| match v {
                NO_TISSUE => Ok(None),
                v if v >= 0 => OofClass::try_from(v as i64).map(Some),
                _ => Err(Error::param("cell code must be -1 or a class in 0..=29")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, cells)
    }
}

/// Random-access RGB source. Reads may extend past the borders, in which
/// case pixels are mirrored with edge duplication.
pub trait TiledImage {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn read_region(&self, x0: isize, y0: isize, w: usize, h: usize) -> Result<RasterPatch>;
}

impl TiledImage for RasterPatch {
    fn width(&self) -> usize {
        RasterPatch::width(self)
    }

    fn height(&self) -> usize {
        RasterPatch::height(self)
    }

    fn read_region(&self, x0: isize, y0: isize, w: usize, h: usize) -> Result<RasterPatch> {
        Ok(self.window_reflect(x0, y0, w, h))
    }
}

/// `(rows, cols)` of the full-cell grid.
pub fn grid_shape(image: &(impl TiledImage + ?Sized)) -> Result<(usize, usize)> {
    if image.width() < PATCH_SIZE || image.height() < PATCH_SIZE {
        return Err(Error::param("image smaller than the classifier input"));
    }
    Ok((image.height() / CELL_SIZE, image.width() / CELL_SIZE))
}

/// Prediction for one grid cell.
pub fn classify_cell(
    params: &ModelParams<f32>,
    image: &(impl TiledImage + ?Sized),
    row: usize,
    col: usize,
    tissue_only: bool,
) -> Result<Option<OofClass>> {
    let (x, y) = ((col * CELL_SIZE) as isize, (row * CELL_SIZE) as isize);
    if tissue_only {
        let cell = image.read_region(x, y, CELL_SIZE, CELL_SIZE)?;
        if !is_tissue(cell.mean_luma()) {
            return Ok(None);
        }
    }
    let window = image.read_region(x + WINDOW_OFFSET, y + WINDOW_OFFSET, PATCH_SIZE, PATCH_SIZE)?;
    Ok(Some(predict_class(params, &Input::from_patch(&window)?)))
}

/// Classifies every full 128-pixel cell of the image.
pub fn infer_heatmap(
    params: &ModelParams<f32>,
    image: &(impl TiledImage + ?Sized),
    tissue_only: bool,
) -> Result<HeatmapGrid> {
    let (rows, cols) = grid_shape(image)?;
    if rows == 0 || cols == 0 {
        return Err(Error::param("image has no full grid cell"));
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            cells.push(classify_cell(params, image, r, c, tissue_only)?);
        }
    }
    HeatmapGrid::new(rows, cols, cells)
}

/// Classic piecewise-linear jet map of `v` in `[0, 1]`.
pub fn jet(v: f64) -> [f64; 3] {
    let f = |k: f64| (1.5 - libm::fabs(4.0 * v - k)).clamp(0.0, 1.0);
    [f(3.0), f(2.0), f(1.0)]
}

/// Color of one cell: jet of `class / 29`, black for masked cells.
pub fn class_color(cell: Option<OofClass>) -> [f64; 3] {
    match cell {
        Some(c) => jet(c.get() as f64 / crate::degrade::MAX_CLASS as f64),
        None => [0.0; 3],
    }
}

/// Renders `scale` x `scale` pixels per cell.
pub fn render_jet(grid: &HeatmapGrid, scale: usize) -> Result<RasterPatch> {
    if scale == 0 {
        return Err(Error::param("render scale must be >= 1"));
    }
    Ok(RasterPatch::from_fn(grid.cols * scale, grid.rows * scale, |x, y| {
        class_color(grid.get(y / scale, x / scale))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    #[test]
    fn window_is_centered_on_cell() {
        assert_eq!(WINDOW_OFFSET, -5);
        // 5 pixels of context on the left/top, 6 on the right/bottom.
        assert_eq!(PATCH_SIZE as isize + WINDOW_OFFSET - CELL_SIZE as isize, 6);
    }

    #[test]
    fn jet_endpoints_and_midpoint() {
        assert_eq!(jet(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(jet(1.0), [0.5, 0.0, 0.0]);
        assert_eq!(jet(0.5), [0.5, 1.0, 0.5]);
        assert_eq!(jet(0.25), [0.0, 0.5, 1.0]);
        assert_eq!(class_color(None), [0.0; 3]);
    }

    #[test]
    fn jet_is_injective_over_classes() {
        let colors: Vec<[f64; 3]> = OofClass::all().map(|c| class_color(Some(c))).collect();
        for i in 0..colors.len() {
            for j in 0..i {
                assert_ne!(colors[i], colors[j], "classes {i} and {j}");
            }
        }
    }

    #[test]
    fn grid_shape_and_white_mask() {
        let img = RasterPatch::filled(1280, 1280, [1.0; 3]);
        assert_eq!(grid_shape(&img).unwrap(), (10, 10));
        assert_eq!(grid_shape(&RasterPatch::filled(300, 139, [1.0; 3])).unwrap(), (1, 2));
        assert!(grid_shape(&RasterPatch::filled(138, 500, [1.0; 3])).is_err());
        let small = RasterPatch::filled(300, 260, [1.0; 3]);
        let g = infer_heatmap(&init_model(0), &small, true).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        assert!(g.cells.iter().all(|c| c.is_none()));
    }

    #[test]
    fn periodic_image_gives_constant_interior() {
        use crate::rng;
        use rand::Rng;
        let mut r = rng::stream(&[3]);
        // Period 128 so every cell sees the same window content.
        let tile = RasterPatch::from_fn(128, 128, |_, _| [r.random_range(0.2..0.7), r.random(), r.random()]);
        let img = RasterPatch::from_fn(128 * 4, 128 * 3, |x, y| tile.get(x % 128, y % 128));
        let p = init_model(4);
        let g = infer_heatmap(&p, &img, false).unwrap();
        let window = img.crop(128 - 5, 128 - 5, PATCH_SIZE, PATCH_SIZE).unwrap();
        let expected = predict_class(&p, &Input::from_patch(&window).unwrap());
        for row in 1..g.rows - 1 {
            for col in 1..g.cols - 1 {
                assert_eq!(g.get(row, col), Some(expected));
            }
        }
    }

    #[test]
    fn codes_roundtrip() {
        let g = HeatmapGrid::from_codes(2, 2, &[0, 29, -1, 5]).unwrap();
        assert_eq!(g.code(0, 1), 29);
        assert_eq!(g.code(1, 0), NO_TISSUE);
        assert!(HeatmapGrid::from_codes(2, 2, &[0, 30, -1, 5]).is_err());
        assert!(HeatmapGrid::from_codes(0, 0, &[]).is_err());
        let img = render_jet(&g, 3).unwrap();
        assert_eq!((img.width(), img.height()), (6, 6));
        assert_eq!(img.get(4, 1), [0.5, 0.0, 0.0]);
        assert_eq!(img.get(0, 5), [0.0; 3]);
    }
}
