//! Grid CSV, heatmap PNG, annotation JSON, patch-record CSV and report JSON.

use std::fmt::Write as _;
use std::path::Path;

use oofkit_core::degrade::{CalibrationReport, OofClass};
use oofkit_core::eval::{AnnotatedRegion, BucketAuc, Correlation, LinearFit, OofGrade, PatchRecord, ZProfile};
use oofkit_core::heatmap::{render_jet, HeatmapGrid};
use oofkit_core::model::{decode_params, encode_params, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{require_input, Error, Result};
use crate::io::write_png;

/// `row,col,class` in row-major order; masked cells are written as -1.
pub fn export_grid(grid: &HeatmapGrid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    w.write_record(["row", "col", "class"]).map_err(|e| Error::parse(path, e))?;
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            w.write_record([r.to_string(), c.to_string(), grid.code(r, c).to_string()])
                .map_err(|e| Error::parse(path, e))?;
        }
    }
    w.flush().map_err(Error::io(path))
}

pub fn import_grid(path: &Path) -> Result<HeatmapGrid> {
    require_input(path, "grid CSV")?;
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut cells: Vec<(usize, usize, i16)> = Vec::new();
    for rec in rd.deserialize::<(usize, usize, i16)>() {
        cells.push(rec.map_err(|e| Error::parse(path, e))?);
    }
    let rows = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != rows * cols || cells.iter().enumerate().any(|(i, c)| (c.0, c.1) != (i / cols, i % cols)) {
        return Err(Error::parse(path, "grid rows must cover every cell once in row-major order"));
    }
    let codes: Vec<i16> = cells.iter().map(|c| c.2).collect();
    HeatmapGrid::from_codes(rows, cols, &codes).map_err(|e| Error::parse(path, e))
}

/// Jet rendering with `scale` x `scale` pixels per cell.
pub fn write_heatmap_png(grid: &HeatmapGrid, path: &Path, scale: usize) -> Result<()> {
    write_png(path, &render_jet(grid, scale)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionJson {
    polygon: Vec<[f64; 2]>,
    grade: f64,
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotatedRegion>> {
    require_input(path, "annotations")?;
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let raw: Vec<RegionJson> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    raw.into_iter()
        .map(|r| Ok(AnnotatedRegion { polygon: r.polygon, grade: OofGrade::new(r.grade).map_err(|e| Error::parse(path, e))? }))
        .collect()
}

pub fn write_annotations(path: &Path, regions: &[AnnotatedRegion]) -> Result<()> {
    let raw: Vec<RegionJson> =
        regions.iter().map(|r| RegionJson { polygon: r.polygon.clone(), grade: r.grade.value() }).collect();
    write_json(path, &raw)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordRow {
    slide_id: String,
    row: usize,
    col: usize,
    score: f64,
    label: u8,
    oof_class: u8,
}

pub fn read_patch_records(path: &Path) -> Result<Vec<PatchRecord>> {
    require_input(path, "patch records")?;
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    rd.deserialize::<RecordRow>()
        .map(|r| {
            let r = r.map_err(|e| Error::parse(path, e))?;
            if r.label > 1 || !r.score.is_finite() {
                return Err(Error::parse(path, "label must be 0 or 1 and score finite"));
            }
            Ok(PatchRecord {
                slide_id: r.slide_id,
                row: r.row,
                col: r.col,
                score: r.score,
                label: r.label == 1,
                oof_class: OofClass::new(r.oof_class).map_err(|e| Error::parse(path, e))?,
            })
        })
        .collect()
}

pub fn write_patch_records(path: &Path, records: &[PatchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for r in records {
        w.serialize(RecordRow {
            slide_id: r.slide_id.clone(),
            row: r.row,
            col: r.col,
            score: r.score,
            label: r.label as u8,
            oof_class: r.oof_class.get(),
        })
        .map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn save_model(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    std::fs::write(path, encode_params(params)).map_err(Error::io(path))
}

pub fn load_model(path: &Path) -> Result<ModelParams<f32>> {
    require_input(path, "model")?;
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode_params(&bytes).map_err(|e| Error::parse(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketJson {
    pub bucket: String,
    pub patches: usize,
    pub positives: usize,
    pub auc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub replicates: usize,
}

impl From<&BucketAuc> for BucketJson {
    fn from(b: &BucketAuc) -> Self {
        BucketJson {
            bucket: b.bucket.to_string(),
            patches: b.patches,
            positives: b.positives,
            auc: b.auc,
            ci_low: b.ci.map(|c| c.0),
            ci_high: b.ci.map(|c| c.1),
            replicates: b.replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZProfileJson {
    pub z_levels: Vec<f64>,
    pub mean_curve: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub cell_argmin_z: Vec<f64>,
    pub argmin_z: f64,
    /// `None` when the branch correlation is undefined (flat curve).
    pub left_rho: Option<f64>,
    pub right_rho: Option<f64>,
}

impl From<&ZProfile> for ZProfileJson {
    fn from(p: &ZProfile) -> Self {
        ZProfileJson {
            z_levels: p.z_levels.clone(),
            mean_curve: p.mean_curve.clone(),
            curves: p.curves.clone(),
            cell_argmin_z: p.cell_argmin_z.clone(),
            argmin_z: p.argmin_z,
            left_rho: p.left_rho,
            right_rho: p.right_rho,
        }
    }
}

/// Summary statistics written by `evaluate` and `auc-stratify`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub regression_slope: Option<f64>,
    pub regression_intercept: Option<f64>,
    pub reference_slope: Option<f64>,
    pub pairs: Option<usize>,
    pub labeled_cells: Option<usize>,
    pub represented_grades: Option<Vec<f64>>,
    pub missing_grades: Option<Vec<f64>>,
    pub buckets: Option<Vec<BucketJson>>,
    pub zprofile: Option<ZProfileJson>,
}

impl EvalReport {
    pub fn with_correlation(mut self, c: &Correlation, fit: &LinearFit) -> Self {
        self.spearman_rho = Some(c.rho);
        self.spearman_p = Some(c.p_value);
        self.pairs = Some(c.n);
        self.regression_slope = Some(fit.slope);
        self.regression_intercept = Some(fit.intercept);
        self.reference_slope = Some(fit.reference_slope);
        self
    }

    /// Human-readable table of the populated fields.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(s, "{k:<22}{v}");
            }
        };
        line("pairs", self.pairs.map(|v| v.to_string()));
        line("labeled cells", self.labeled_cells.map(|v| v.to_string()));
        line("spearman rho", self.spearman_rho.map(|v| format!("{v:.4}")));
        line("spearman p", self.spearman_p.map(|v| format!("{v:.3e}")));
        line("regression slope", self.regression_slope.map(|v| format!("{v:.4}")));
        line("regression intercept", self.regression_intercept.map(|v| format!("{v:.4}")));
        line("reference slope", self.reference_slope.map(|v| format!("{v:.4}")));
        line("missing grades", self.missing_grades.as_ref().filter(|m| !m.is_empty()).map(|m| format!("{m:?}")));
        if let Some(z) = &self.zprofile {
            line("z argmin", Some(format!("{}", z.argmin_z)));
            line("left branch rho", Some(fmt_opt(z.left_rho)));
            line("right branch rho", Some(fmt_opt(z.right_rho)));
        }
        if let Some(b) = &self.buckets {
            let _ = writeln!(s, "{:<8}{:>8}{:>8}{:>8}  95% CI", "bucket", "patches", "pos", "AUC");
            for r in b {
                let ci = match (r.ci_low, r.ci_high) {
                    (Some(l), Some(h)) => format!("[{l:.3}, {h:.3}]"),
                    _ => "-".into(),
                };
                let auc = r.auc.map_or("n/a".into(), |a| format!("{a:.3}"));
                let _ = writeln!(s, "{:<8}{:>8}{:>8}{:>8}  {ci}", r.bucket, r.patches, r.positives, auc);
            }
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |v| format!("{v:.4}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationJson {
    pub gauss_scale: f64,
    pub ratio: f64,
    pub bokeh_scale: f64,
    pub probes: Vec<ProbeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeJson {
    pub sigma: f64,
    pub radius: f64,
    pub ssd_at_radius: f64,
    pub ssd_at_double: f64,
}

impl CalibrationJson {
    pub fn new(report: &CalibrationReport, gauss_scale: f64) -> Self {
        CalibrationJson {
            gauss_scale,
            ratio: report.ratio,
            bokeh_scale: report.bokeh_scale,
            probes: report.probes.iter().map(|p| ProbeJson {
                    sigma: p.sigma,
                    radius: p.radius,
                    ssd_at_radius: p.ssd_at_radius,
                    ssd_at_double: p.ssd_at_double,
                }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let g = HeatmapGrid::from_codes(2, 2, &[0, 29, -1, 5]).unwrap();
        export_grid(&g, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "row,col,class\n0,0,0\n0,1,29\n1,0,-1\n1,1,5\n");
        assert_eq!(import_grid(&p).unwrap(), g);
        std::fs::write(&p, "row,col,class\n").unwrap();
        assert!(import_grid(&p).is_err());
        std::fs::write(&p, "row,col,class\n0,1,3\n0,0,2\n").unwrap();
        assert!(import_grid(&p).is_err());
    }

    #[test]
    fn heatmap_png_upscales() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        let g = HeatmapGrid::from_codes(1, 2, &[0, -1]).unwrap();
        write_heatmap_png(&g, &p, 128).unwrap();
        let img = crate::io::read_png(&p).unwrap();
        assert_eq!((img.width(), img.height()), (256, 128));
        assert_eq!(img.get(200, 5), [0.0; 3]);
    }

    #[test]
    fn annotations_and_records_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        std::fs::write(&a, r#"[{"polygon": [[0,0],[256,0],[256,256],[0,256]], "grade": 2.5}]"#).unwrap();
        let regions = read_annotations(&a).unwrap();
        assert_eq!(regions[0].grade.value(), 2.5);
        std::fs::write(&a, r#"[{"polygon": [[0,0],[1,0],[1,1]], "grade": 2.25}]"#).unwrap();
        assert!(read_annotations(&a).is_err());

        let r = dir.path().join("r.csv");
        let recs = vec![PatchRecord {
            slide_id: "s1".into(),
            row: 1,
            col: 2,
            score: 0.25,
            label: true,
            oof_class: OofClass::new(7).unwrap(),
        }];
        write_patch_records(&r, &recs).unwrap();
        assert_eq!(read_patch_records(&r).unwrap(), recs);
    }
}
