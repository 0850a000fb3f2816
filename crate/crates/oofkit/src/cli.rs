//! The `oofkit` command-line tool.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use oofkit_core::degrade::calibrate_blur_scale;
use oofkit_core::eval::{
    balanced_resample, default_z_levels, linreg, rasterize_annotations, spearman, synthetic_zstack, zstack_profile,
    Bucket, CellRect, OofGrade, DEFAULT_BUCKETS, DEFAULT_PX_PER_UM, PER_GRADE, BOOTSTRAP_SAMPLES,
};
use oofkit_core::heatmap::HeatmapGrid;
use oofkit_core::synth::tissue_image;
use oofkit_core::CELL_SIZE;
use serde::{Deserialize, Serialize};

use crate::config::*;
use crate::dataset::{build_training_set, load_dataset, read_manifest, INDEX_FILE};
use crate::error::{require_input, Error, Result};
use crate::formats::*;
use crate::io::{read_png, write_png, SlideImage};
use crate::manifest::{manifest_path_for, RunManifest, Staging};
use crate::parallel;

/// Default sigma probes, spanning the Gaussian range of the lower classes.
pub const DEFAULT_PROBES: [f64; 5] = [0.9, 2.0, 4.0, 8.0, 19.0];

#[derive(Parser, Debug)]
#[command(name = "oofkit", version, about = "Out-of-focus synthesis, classification and evaluation")]
pub struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// TOML config file or inline `key=value`; repeatable, later wins.
    #[arg(short, long = "config")]
    pub config: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Degrade manifest sources into a 30-class dataset.
    GenerateData {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ablation preset 1-4.
        #[arg(long, alias = "table2")]
        preset: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the disk-radius / Gaussian-sigma ratio on sharp images.
    CalibrateBlur {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "image")]
        images: Vec<PathBuf>,
        /// Comma-separated sigma probes.
        #[arg(long, value_delimiter = ',')]
        probes: Option<Vec<f64>>,
        #[arg(long)]
        gauss_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the classifier on a generated dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Dataset index CSV.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// Weight file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify every 128-pixel cell of a large image.
    InferHeatmap {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// PNG or tile-directory descriptor (.json).
        #[arg(long)]
        image: Option<PathBuf>,
        /// Focal-plane subdirectory of a tile directory.
        #[arg(long)]
        z: Option<String>,
        /// Classify non-tissue cells too.
        #[arg(long)]
        all_cells: bool,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_png: Option<PathBuf>,
        /// Pixels per cell in the PNG (128 for overlays).
        #[arg(long)]
        upscale: Option<usize>,
    },
    /// Correlate predicted classes with annotated grades.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `grid.csv:annotations.json`; repeatable.
        #[arg(long = "slide")]
        slides: Vec<String>,
        #[arg(long)]
        per_grade: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Focus curves of a z-stack.
    ZstackEval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// `stack.json` written by synth-zstack.
        #[arg(long)]
        stack: Option<PathBuf>,
        /// `row0,col0,rows,cols`.
        #[arg(long, value_delimiter = ',')]
        roi: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Downstream AUC per focus-class bucket with bootstrap intervals.
    AucStratify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        records: Option<PathBuf>,
        /// e.g. `0-4,5-9,10-14,15-19,20-29`.
        #[arg(long)]
        buckets: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a synthetic z-stack by disk-blurring a sharp image.
    SynthZstack {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        px_per_um: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match parallel::with_workers(cli.workers, || dispatch(cli.command)).and_then(|r| r) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Usage(format!("missing required setting `{name}`")))
}

fn load<T: serde::de::DeserializeOwned>(cfg: &ConfigArgs) -> Result<T> {
    parse_config(load_sources(&cfg.config)?)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenerateData { cfg, manifest, out, preset, seed } => {
            let mut c: GenerateConfig = load(&cfg)?;
            c.manifest = manifest.or(c.manifest);
            c.out = out.or(c.out);
            c.degradation.preset = preset.or(c.degradation.preset);
            c.degradation.seed = seed.or(c.degradation.seed);
            generate_data(&c)
        }
        Command::CalibrateBlur { cfg, images, probes, gauss_scale, out } => {
            let mut c: CalibrateConfig = load(&cfg)?;
            if !images.is_empty() {
                c.images = images;
            }
            c.probes = probes.or(c.probes);
            c.gauss_scale = gauss_scale.or(c.gauss_scale);
            c.out = out.or(c.out);
            calibrate(&c)
        }
        Command::Train { cfg, dataset, heldout, out, epochs, seed } => {
            let mut c: TrainRunConfig = load(&cfg)?;
            c.dataset = dataset.or(c.dataset);
            c.heldout = heldout.or(c.heldout);
            c.out = out.or(c.out);
            c.train.epochs = epochs.or(c.train.epochs);
            c.train.seed = seed.or(c.train.seed);
            train(&c)
        }
        Command::InferHeatmap { cfg, model, image, z, all_cells, out_csv, out_png, upscale } => {
            let mut c: HeatmapConfig = load(&cfg)?;
            c.model = model.or(c.model);
            c.image = image.or(c.image);
            c.z = z.or(c.z);
            if all_cells {
                c.tissue_only = Some(false);
            }
            c.out_csv = out_csv.or(c.out_csv);
            c.out_png = out_png.or(c.out_png);
            c.upscale = upscale.or(c.upscale);
            infer_heatmap(&c)
        }
        Command::Evaluate { cfg, slides, per_grade, seed, out } => {
            let mut c: EvaluateConfig = load(&cfg)?;
            if !slides.is_empty() {
                c.slides = slides.iter().map(|s| parse_slide(s)).collect::<Result<_>>()?;
            }
            c.per_grade = per_grade.or(c.per_grade);
            c.seed = seed.or(c.seed);
            c.out = out.or(c.out);
            evaluate(&c)
        }
        Command::ZstackEval { cfg, model, stack, roi, out } => {
            let mut c: ZStackEvalConfig = load(&cfg)?;
            c.model = model.or(c.model);
            c.stack = stack.or(c.stack);
            if let Some(r) = roi {
                c.roi = Some(
                    r.try_into().map_err(|_| Error::Usage("--roi takes exactly row0,col0,rows,cols".into()))?,
                );
            }
            c.out = out.or(c.out);
            zstack_eval(&c)
        }
        Command::AucStratify { cfg, records, buckets, samples, seed, out } => {
            let mut c: AucConfig = load(&cfg)?;
            c.records = records.or(c.records);
            if let Some(b) = buckets {
                c.buckets = Some(parse_buckets(&b)?);
            }
            c.samples = samples.or(c.samples);
            c.seed = seed.or(c.seed);
            c.out = out.or(c.out);
            auc_stratify(&c)
        }
        Command::SynthZstack { cfg, source, seed, px_per_um, out } => {
            let mut c: SynthZStackConfig = load(&cfg)?;
            c.source = source.or(c.source);
            c.seed = seed.or(c.seed);
            c.px_per_um = px_per_um.or(c.px_per_um);
            c.out = out.or(c.out);
            synth_zstack(&c)
        }
    }
}

fn parse_slide(s: &str) -> Result<SlideInput> {
    let (g, a) = s.rsplit_once(':').ok_or_else(|| Error::Usage(format!("--slide expects grid.csv:annotations.json, got {s}")))?;
    Ok(SlideInput { grid: g.into(), annotations: a.into() })
}

pub fn parse_buckets(s: &str) -> Result<Vec<(u8, u8)>> {
    s.split(',')
        .map(|b| {
            let (lo, hi) = b.trim().split_once('-').ok_or_else(|| Error::Usage(format!("bucket {b:?} is not lo-hi")))?;
            let p = |v: &str| v.trim().parse::<u8>().map_err(|_| Error::Usage(format!("bad bucket bound {v:?}")));
            Ok((p(lo)?, p(hi)?))
        })
        .collect()
}

fn generate_data(c: &GenerateConfig) -> Result<()> {
    let manifest = required(c.manifest.as_ref(), "manifest")?;
    let out = required(c.out.as_ref(), "out")?;
    let spec = c.degradation.to_spec()?;
    let entries = read_manifest(manifest)?;
    let mut stage = Staging::new();
    let tmp = stage.dir(out)?;
    let summary = build_training_set(&entries, &spec, &tmp)?;
    if summary.examples == 0 {
        return Err(Error::Core(oofkit_core::Error::InvalidDataset("no usable source in the manifest".into())));
    }

    let mut run = RunManifest::new("generate-data", c);
    run.input(manifest)?;
    for e in &entries {
        if e.path.exists() {
            run.input(&e.path)?;
        }
    }
    run.output(&tmp.join(INDEX_FILE), &out.join(INDEX_FILE))?;
    run.write(&tmp.join("run_manifest.json"))?;
    write_json(&tmp.join("summary.json"), &summary)?;
    stage.commit()?;

    println!("{} sources -> {} examples in {}", summary.sources, summary.examples, out.display());
    println!("per class: {:?}", summary.per_class);
    for (p, why) in &summary.skipped {
        println!("skipped {p}: {why}");
    }
    if !summary.not_in_focus.is_empty() {
        println!("{} entries without unanimous in-focus rating ignored", summary.not_in_focus.len());
    }
    Ok(())
}

fn calibrate(c: &CalibrateConfig) -> Result<()> {
    let out = required(c.out.as_ref(), "out")?;
    let images = c.images.iter().map(|p| read_png(p)).collect::<Result<Vec<_>>>()?;
    let probes = c.probes.clone().unwrap_or(DEFAULT_PROBES.to_vec());
    let gauss_scale = c.gauss_scale.unwrap_or(0.926);
    let report = calibrate_blur_scale(&images, &probes, gauss_scale)?;
    let json = CalibrationJson::new(&report, gauss_scale);

    let mut stage = Staging::new();
    let tmp = stage.file(out)?;
    write_json(&tmp, &json)?;
    let mut run = RunManifest::new("calibrate-blur", c);
    for p in &c.images {
        run.input(p)?;
    }
    run.output(&tmp, out)?;
    let mtmp = stage.file(&manifest_path_for(out))?;
    run.write(&mtmp)?;
    stage.commit()?;
    println!("ratio {:.4}, bokeh scale {:.4} ({} probes)", json.ratio, json.bokeh_scale, json.probes.len());
    Ok(())
}

fn train(c: &TrainRunConfig) -> Result<()> {
    let dataset = required(c.dataset.as_ref(), "dataset")?;
    let out = required(c.out.as_ref(), "out")?;
    let cfg = c.train.to_config()?;
    let data = load_dataset(dataset)?;
    let heldout = match &c.heldout {
        Some(h) => load_dataset(h)?,
        None => Vec::new(),
    };
    let (params, log) = parallel::train(&data, &heldout, &cfg)?;

    let mut stage = Staging::new();
    let tmp = stage.file(out)?;
    save_model(&tmp, &params)?;
    let log_path = out.with_extension("log.json");
    let ltmp = stage.file(&log_path)?;
    let epochs: Vec<serde_json::Value> = log
        .epochs
        .iter()
        .map(|e| {
            serde_json::json!({
                "epoch": e.epoch, "learning_rate": e.learning_rate,
                "train_loss": e.train_loss, "heldout_accuracy": e.heldout_accuracy,
            })
        })
        .collect();
    write_json(&ltmp, &epochs)?;
    let mut run = RunManifest::new("train", c);
    run.input(dataset)?;
    if let Some(h) = &c.heldout {
        run.input(h)?;
    }
    run.output(&tmp, out)?;
    run.output(&ltmp, &log_path)?;
    let mtmp = stage.file(&manifest_path_for(out))?;
    run.write(&mtmp)?;
    stage.commit()?;
    if let Some(last) = log.epochs.last() {
        println!("epoch {}: loss {:.4}, held-out accuracy {:?}", last.epoch, last.train_loss, last.heldout_accuracy);
    }
    Ok(())
}

fn infer_heatmap(c: &HeatmapConfig) -> Result<()> {
    let model = required(c.model.as_ref(), "model")?;
    let image = required(c.image.as_ref(), "image")?;
    if c.out_csv.is_none() && c.out_png.is_none() {
        return Err(Error::Usage("nothing to write: give out_csv and/or out_png".into()));
    }
    let params = load_model(model)?;
    let slide = SlideImage::open(image, c.z.as_deref().unwrap_or("0"))?;
    let grid = parallel::infer_heatmap(&params, slide.as_tiled(), c.tissue_only.unwrap_or(true))?;

    let mut stage = Staging::new();
    let mut run = RunManifest::new("infer-heatmap", c);
    run.input(model)?;
    run.input(image)?;
    let mut primary = None;
    if let Some(p) = &c.out_csv {
        let tmp = stage.file(p)?;
        export_grid(&grid, &tmp)?;
        run.output(&tmp, p)?;
        primary = Some(p.clone());
    }
    if let Some(p) = &c.out_png {
        let tmp = stage.file(p)?;
        write_heatmap_png(&grid, &tmp, c.upscale.unwrap_or(1))?;
        run.output(&tmp, p)?;
        primary = primary.or(Some(p.clone()));
    }
    let mtmp = stage.file(&manifest_path_for(&primary.expect("an output was requested")))?;
    run.write(&mtmp)?;
    stage.commit()?;
    let tissue = grid.cells.iter().filter(|c| c.is_some()).count();
    println!("{}x{} cells, {tissue} classified", grid.rows, grid.cols);
    Ok(())
}

/// Grade / predicted-class pairs from one slide.
pub fn labeled_pairs(grid: &HeatmapGrid, regions: &[oofkit_core::eval::AnnotatedRegion]) -> Result<Vec<(OofGrade, f64)>> {
    let cells = rasterize_annotations(regions, grid.cols * CELL_SIZE, grid.rows * CELL_SIZE, CELL_SIZE)?;
    Ok(cells.iter().filter_map(|c| grid.get(c.row, c.col).map(|k| (c.grade, k.get() as f64))).collect())
}

fn evaluate(c: &EvaluateConfig) -> Result<()> {
    let out = required(c.out.as_ref(), "out")?;
    if c.slides.is_empty() {
        return Err(Error::Usage("no slides given".into()));
    }
    let mut run = RunManifest::new("evaluate", c);
    let mut labeled = Vec::new();
    for s in &c.slides {
        let grid = import_grid(&s.grid)?;
        let regions = read_annotations(&s.annotations)?;
        labeled.extend(labeled_pairs(&grid, &regions)?);
        run.input(&s.grid)?;
        run.input(&s.annotations)?;
    }
    let res = balanced_resample(&labeled, c.per_grade.unwrap_or(PER_GRADE), c.seed.unwrap_or(0))?;
    let (x, y): (Vec<f64>, Vec<f64>) = res.pairs.iter().copied().unzip();
    let corr = spearman(&x, &y)?;
    let fit = linreg(&x, &y)?;
    let report = EvalReport {
        labeled_cells: Some(labeled.len()),
        represented_grades: Some(res.represented.iter().map(|g| g.value()).collect()),
        missing_grades: Some(res.missing.iter().map(|g| g.value()).collect()),
        ..Default::default()
    }
    .with_correlation(&corr, &fit);
    finish_report(&mut run, &report, out)
}

fn finish_report(run: &mut RunManifest, report: &EvalReport, out: &Path) -> Result<()> {
    let mut stage = Staging::new();
    let tmp = stage.file(out)?;
    write_json(&tmp, report)?;
    let text_path = out.with_extension("txt");
    let ttmp = stage.file(&text_path)?;
    std::fs::write(&ttmp, report.to_text()).map_err(Error::io(&ttmp))?;
    run.output(&tmp, out)?;
    run.output(&ttmp, &text_path)?;
    let mtmp = stage.file(&manifest_path_for(out))?;
    run.write(&mtmp)?;
    stage.commit()?;
    print!("{}", report.to_text());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackLevel {
    pub z: f64,
    pub image: PathBuf,
}

/// `stack.json`: focal planes and their images (relative to the file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackDescriptor {
    pub px_per_um: f64,
    pub levels: Vec<StackLevel>,
}

fn zstack_eval(c: &ZStackEvalConfig) -> Result<()> {
    let model = required(c.model.as_ref(), "model")?;
    let stack_path = required(c.stack.as_ref(), "stack")?;
    let out = required(c.out.as_ref(), "out")?;
    require_input(stack_path, "stack descriptor")?;
    let params = load_model(model)?;
    let text = std::fs::read_to_string(stack_path).map_err(Error::io(stack_path))?;
    let stack: StackDescriptor = serde_json::from_str(&text).map_err(|e| Error::parse(stack_path, e))?;
    let base = stack_path.parent().unwrap_or(Path::new("."));

    let mut run = RunManifest::new("zstack-eval", c);
    run.input(model)?;
    run.input(stack_path)?;
    let mut grids = Vec::with_capacity(stack.levels.len());
    for l in &stack.levels {
        let p = base.join(&l.image);
        let img = read_png(&p)?;
        run.input(&p)?;
        grids.push((l.z, parallel::infer_heatmap(&params, &img, c.tissue_only.unwrap_or(true))?));
    }
    let (rows, cols) = grids.first().map(|g| (g.1.rows, g.1.cols)).ok_or_else(|| Error::Usage("empty stack".into()))?;
    let roi = match c.roi {
        Some([r0, c0, r, k]) => CellRect { row0: r0, col0: c0, rows: r, cols: k },
        None => CellRect { row0: 0, col0: 0, rows, cols },
    };
    let profile = zstack_profile(&grids, roi)?;
    let report = EvalReport { zprofile: Some((&profile).into()), ..Default::default() };
    finish_report(&mut run, &report, out)
}

fn auc_stratify(c: &AucConfig) -> Result<()> {
    let records_path = required(c.records.as_ref(), "records")?;
    let out = required(c.out.as_ref(), "out")?;
    let records = read_patch_records(records_path)?;
    let buckets: Vec<Bucket> = match &c.buckets {
        Some(b) => b.iter().map(|&(lo, hi)| Bucket { lo, hi }).collect(),
        None => DEFAULT_BUCKETS.to_vec(),
    };
    let res = parallel::stratified_auc(&records, &buckets, c.samples.unwrap_or(BOOTSTRAP_SAMPLES), c.seed.unwrap_or(0))?;
    let mut run = RunManifest::new("auc-stratify", c);
    run.input(records_path)?;
    let report = EvalReport { buckets: Some(res.iter().map(BucketJson::from).collect()), ..Default::default() };
    finish_report(&mut run, &report, out)
}

fn synth_zstack(c: &SynthZStackConfig) -> Result<()> {
    let out = required(c.out.as_ref(), "out")?;
    let base = match &c.source {
        Some(p) => read_png(p)?,
        None => tissue_image(c.width.unwrap_or(640), c.height.unwrap_or(512), c.seed.unwrap_or(0)),
    };
    let z = c.z_levels.clone().unwrap_or_else(default_z_levels);
    let k = c.px_per_um.unwrap_or(DEFAULT_PX_PER_UM);
    let planes = synthetic_zstack(&base, &z, k)?;

    let mut stage = Staging::new();
    let tmp = stage.dir(out)?;
    let mut levels = Vec::new();
    for (i, (z, img)) in z.iter().zip(&planes).enumerate() {
        let name = format!("level_{i:02}.png");
        write_png(&tmp.join(&name), img)?;
        levels.push(StackLevel { z: *z, image: name.into() });
    }
    let desc = StackDescriptor { px_per_um: k, levels };
    write_json(&tmp.join("stack.json"), &desc)?;
    let mut run = RunManifest::new("synth-zstack", c);
    if let Some(p) = &c.source {
        run.input(p)?;
    }
    run.output(&tmp.join("stack.json"), &out.join("stack.json"))?;
    run.write(&tmp.join("run_manifest.json"))?;
    stage.commit()?;
    println!("{} planes written to {}", desc.levels.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_and_slide_parsing() {
        assert_eq!(parse_buckets("0-4, 5-9").unwrap(), [(0, 4), (5, 9)]);
        assert!(parse_buckets("0-4,x").is_err());
        let s = parse_slide("a/g.csv:b/a.json").unwrap();
        assert_eq!((s.grid, s.annotations), (PathBuf::from("a/g.csv"), PathBuf::from("b/a.json")));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["oofkit", "no-such-command"]), 2);
        assert_eq!(run(["oofkit", "generate-data", "--manifest", "/nonexistent/m.csv", "--out", "/tmp/x"]), 2);
        assert_eq!(run(["oofkit", "generate-data", "-c", "degradation.bogus=1", "--manifest", "m", "--out", "o"]), 2);
    }
}
