use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Annotation grade on the 0..=6 scale in half steps (13 values).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OofGrade(f64);

impl OofGrade {
    pub const MAX: f64 = 6.0;

    pub fn new(v: f64) -> Result<Self> {
        let twice = v * 2.0;
        if !(0.0..=Self::MAX).contains(&v) || twice != libm::round(twice) {
            return Err(Error::InvalidAnnotation(format!("grade {v} is not a multiple of 0.5 in [0, 6]")));
        }
        Ok(OofGrade(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Index in `0..13`.
    pub fn index(self) -> usize {
        (self.0 * 2.0) as usize
    }

    pub fn all() -> impl Iterator<Item = OofGrade> {
        (0..13).map(|i| OofGrade(i as f64 / 2.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRegion {
    pub polygon: Vec<[f64; 2]>,
    pub grade: OofGrade,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledCell {
    pub row: usize,
    pub col: usize,
    pub grade: OofGrade,
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    orient(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(q1, q2, p1) || on_segment(q1, q2, p2) || on_segment(p1, p2, q1) || on_segment(p1, p2, q2)
}

/// True if no two non-adjacent edges touch and no vertex repeats.
pub fn is_simple_polygon(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if poly[i + 1..].contains(&poly[i]) {
            return false;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a1, a2) = (poly[i], poly[(i + 1) % n]);
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if j == i + 1 || (i == 0 && j == n - 1) {
                // Adjacent edges may only share their common vertex.
                let (shared, p, q) = if j == i + 1 { (a2, a1, b2) } else { (a1, a2, b1) };
                if on_segment(shared, q, p) || on_segment(shared, p, q) {
                    return false;
                }
            } else if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Point-in-polygon by crossing number; points on the boundary count as
/// inside.
pub fn contains_point(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if on_segment(a, b, p) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Cell is taken as fully inside when its 4 corners and 4 edge midpoints
/// are. Exact for convex polygons.
fn cell_inside(poly: &[[f64; 2]], x0: f64, y0: f64, s: f64) -> bool {
    let h = s / 2.0;
    [[0.0, 0.0], [h, 0.0], [s, 0.0], [s, h], [s, s], [h, s], [0.0, s], [0.0, h]]
        .iter()
        .all(|d| contains_point(poly, [x0 + d[0], y0 + d[1]]))
}

/// Labels every full grid cell that lies completely inside exactly one
/// region. Cells covered by two or more regions are dropped.
pub fn rasterize_annotations(
    regions: &[AnnotatedRegion],
    width: usize,
    height: usize,
    cell: usize,
) -> Result<Vec<LabeledCell>> {
    if cell == 0 {
        return Err(Error::param("cell size must be >= 1"));
    }
    for (i, r) in regions.iter().enumerate() {
        if r.polygon.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidAnnotation(format!("region {i}: non-finite vertex")));
        }
        if !is_simple_polygon(&r.polygon) {
            return Err(Error::InvalidAnnotation(format!("region {i}: polygon is not simple")));
        }
        if r.polygon.iter().any(|p| p[0] < 0.0 || p[1] < 0.0 || p[0] > width as f64 || p[1] > height as f64) {
            return Err(Error::InvalidAnnotation(format!("region {i}: vertex outside the image")));
        }
    }
    let (rows, cols) = (height / cell, width / cell);
    let mut hits: Vec<(u32, Option<OofGrade>)> = vec![(0, None); rows * cols];
    let s = cell as f64;
    for r in regions {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &r.polygon {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let c0 = libm::ceil(xmin / s) as usize;
        let r0 = libm::ceil(ymin / s) as usize;
        let c1 = ((libm::floor(xmax / s) as usize).min(cols)).max(c0);
        let r1 = ((libm::floor(ymax / s) as usize).min(rows)).max(r0);
        for row in r0..r1 {
            for col in c0..c1 {
                if cell_inside(&r.polygon, col as f64 * s, row as f64 * s, s) {
                    let h = &mut hits[row * cols + col];
                    h.0 += 1;
                    h.1 = Some(r.grade);
                }
            }
        }
    }
    Ok(hits
        .iter()
        .enumerate()
        .filter_map(|(i, &(n, g))| (n == 1).then(|| LabeledCell { row: i / cols, col: i % cols, grade: g.unwrap() }))
        .collect())
}
