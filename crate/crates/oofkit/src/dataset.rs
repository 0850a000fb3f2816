//! Source manifests, dataset generation and the dataset index.

use std::path::{Path, PathBuf};

use oofkit_core::degrade::{BlurMethod, DegradationSpec, OofClass};
use oofkit_core::model::Sample;
use oofkit_core::sampler::{consensus_in_focus, source_examples, Rating, TrainingExample};
use oofkit_core::{RasterPatch, NUM_CLASSES, SOURCE_SIZE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_input, Error, Result};
use crate::io::{read_png, write_png};

pub const INDEX_FILE: &str = "index.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Resolved against the manifest's directory.
    pub path: PathBuf,
    /// As written in the manifest.
    pub raw_path: String,
    pub ratings: [Rating; 3],
}

#[derive(Deserialize)]
struct ManifestRow {
    path: String,
    rater1: String,
    rater2: String,
    rater3: String,
}

/// Reads a `path,rater1,rater2,rater3` CSV.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    require_input(path, "manifest")?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rd.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, e))?;
        let rating = |s: &str| {
            Rating::parse(s.trim()).ok_or_else(|| Error::parse(path, format!("row {}: unknown rating {s:?}", i + 1)))
        };
        let ratings = [rating(&row.rater1)?, rating(&row.rater2)?, rating(&row.rater3)?];
        out.push(ManifestEntry { path: base.join(&row.path), raw_path: row.path, ratings });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[(String, [Rating; 3])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    w.write_record(["path", "rater1", "rater2", "rater3"]).map_err(|e| Error::parse(path, e))?;
    for (p, r) in entries {
        w.write_record([p.as_str(), r[0].name(), r[1].name(), r[2].name()]).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// One line of the dataset index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub patch_id: u64,
    pub class: u8,
    pub method: String,
    pub magnitude: f64,
    /// Empty when noise was not added.
    pub s: Option<f64>,
    pub quality: Option<u8>,
    pub source_path: String,
}

impl IndexRow {
    pub fn file_name(&self) -> String {
        example_file_name(self.patch_id, self.class)
    }
}

pub fn example_file_name(patch_id: u64, class: u8) -> String {
    format!("{patch_id}_c{class}.png")
}

fn index_row(ex: &TrainingExample, source_path: &str) -> IndexRow {
    IndexRow {
        patch_id: ex.source_id,
        class: ex.label.get(),
        method: ex.record.method.name().to_string(),
        magnitude: ex.record.magnitude,
        s: ex.record.noise_s,
        quality: ex.record.jpeg_quality,
        source_path: source_path.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildSummary {
    pub sources: usize,
    pub examples: usize,
    pub per_class: Vec<usize>,
    /// Entries without a unanimous in-focus rating.
    pub not_in_focus: Vec<String>,
    /// `(path, reason)` of entries that could not be used.
    pub skipped: Vec<(String, String)>,
}

/// Loads a source and reduces it to its central 300x300 square.
pub fn load_source(path: &Path) -> Result<RasterPatch> {
    let img = read_png(path)?;
    if img.width() < SOURCE_SIZE || img.height() < SOURCE_SIZE {
        return Err(Error::Core(oofkit_core::Error::InvalidParameter(format!(
            "source is {}x{}, needs at least 300x300",
            img.width(),
            img.height()
        ))));
    }
    Ok(img.crop_center(SOURCE_SIZE, SOURCE_SIZE)?)
}

/// Degrades every consensus in-focus source into its 30 versions, writes
/// `{patch_id}_c{class}.png` files plus the index into `out_dir`. Sources
/// are processed in parallel on the current rayon pool; the patch id of a
/// source is its manifest row number, so output is independent of the
/// worker count. Unreadable or undersized sources are skipped and reported.
pub fn build_training_set(entries: &[ManifestEntry], spec: &DegradationSpec, out_dir: &Path) -> Result<BuildSummary> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let mut summary = BuildSummary { per_class: vec![0; NUM_CLASSES], ..Default::default() };

    let usable: Vec<(u64, &ManifestEntry)> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            let ok = consensus_in_focus(&e.ratings);
            if !ok {
                summary.not_in_focus.push(e.raw_path.clone());
            }
            ok
        })
        .map(|(i, e)| (i as u64, e))
        .collect();

    let results: Vec<std::result::Result<Vec<IndexRow>, String>> = usable
        .par_iter()
        .map(|&(id, e)| {
            let run = || -> Result<Vec<IndexRow>> {
                let src = load_source(&e.path)?;
                let examples = source_examples(&src, id, spec)?;
                examples
                    .iter()
                    .map(|ex| {
                        let row = index_row(ex, &e.raw_path);
                        write_png(&out_dir.join(row.file_name()), &ex.patch)?;
                        Ok(row)
                    })
                    .collect()
            };
            run().map_err(|err| err.to_string())
        })
        .collect();

    let index_path = out_dir.join(INDEX_FILE);
    let mut w = csv::Writer::from_path(&index_path).map_err(|e| Error::parse(&index_path, e))?;
    for ((_, e), res) in usable.iter().zip(results) {
        match res {
            Ok(rows) => {
                summary.sources += 1;
                for row in rows {
                    summary.per_class[row.class as usize] += 1;
                    summary.examples += 1;
                    w.serialize(&row).map_err(|err| Error::parse(&index_path, err))?;
                }
            }
            Err(reason) => {
                log::warn!("skipping {}: {reason}", e.raw_path);
                summary.skipped.push((e.raw_path.clone(), reason));
            }
        }
    }
    w.flush().map_err(Error::io(&index_path))?;
    Ok(summary)
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>> {
    require_input(path, "dataset index")?;
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    rd.deserialize().map(|r| r.map_err(|e| Error::parse(path, e))).collect()
}

/// Loads the training samples listed in a dataset index.
pub fn load_dataset(index: &Path) -> Result<Vec<Sample>> {
    let dir = index.parent().unwrap_or(Path::new("."));
    read_index(index)?
        .par_iter()
        .map(|row| {
            let label = OofClass::new(row.class).map_err(|e| Error::parse(index, e))?;
            Ok(Sample::from_patch(&read_png(&dir.join(row.file_name()))?, label)?)
        })
        .collect()
}

pub fn parse_method(s: &str) -> Option<BlurMethod> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Some(BlurMethod::Gaussian),
        "bokeh" => Some(BlurMethod::Bokeh),
        _ => None,
    }
}
