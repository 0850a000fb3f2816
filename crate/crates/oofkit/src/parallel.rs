//! Worker-count independent parallel drivers.
//!
//! Every driver partitions work into fixed units whose results are combined
//! in a fixed order, so outputs do not depend on the number of threads.

use oofkit_core::degrade::OofClass;
use oofkit_core::eval::{BucketAuc, Bucket, PatchRecord, SlideBootstrap};
use oofkit_core::heatmap::{classify_cell, grid_shape, HeatmapGrid, TiledImage};
use oofkit_core::model::{batch_gradient, train_with, Input, ModelParams, Sample, TrainConfig, TrainingLog};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `workers` threads (0 = all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Examples per gradient work unit.
pub const GRADIENT_CHUNK: usize = 8;

/// Batch gradient summed over fixed chunks of [`GRADIENT_CHUNK`] examples.
pub fn chunked_batch_gradient(
    p: &ModelParams<f32>,
    batch: &[(Input<f32>, OofClass)],
    scale: f32,
) -> (f64, ModelParams<f32>) {
    let parts: Vec<(f64, ModelParams<f32>)> =
        batch.par_chunks(GRADIENT_CHUNK).map(|c| batch_gradient(p, c, scale)).collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut g) = iter.next().unwrap_or_else(|| (0.0, ModelParams::zeros()));
    for (l, part) in iter {
        loss += l;
        for (a, b) in g.tensors_mut().into_iter().zip(part.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    (loss, g)
}

/// [`oofkit_core::model::train`] with the chunked parallel gradient.
pub fn train(data: &[Sample], heldout: &[Sample], cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainingLog)> {
    Ok(train_with(data, heldout, cfg, &mut chunked_batch_gradient)?)
}

/// Sliding-window inference with cells classified in parallel.
pub fn infer_heatmap(
    params: &ModelParams<f32>,
    image: &(dyn TiledImage + Sync),
    tissue_only: bool,
) -> Result<HeatmapGrid> {
    let (rows, cols) = grid_shape(image)?;
    let cells = (0..rows * cols)
        .into_par_iter()
        .map(|i| classify_cell(params, image, i / cols, i % cols, tissue_only))
        .collect::<oofkit_core::Result<Vec<_>>>()?;
    Ok(HeatmapGrid::new(rows, cols, cells)?)
}

/// Slide-level bootstrap with replicates evaluated in parallel.
pub fn stratified_auc(records: &[PatchRecord], buckets: &[Bucket], samples: usize, seed: u64) -> Result<Vec<BucketAuc>> {
    let boot = SlideBootstrap::new(records, buckets)?;
    let point = boot.point();
    let reps: Vec<_> = (0..samples).into_par_iter().map(|i| boot.replicate(seed, i)).collect();
    Ok(boot.summarize(&point, &reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use oofkit_core::model::init_model;
    use oofkit_core::synth::tissue_image;

    #[test]
    fn heatmap_matches_sequential_for_any_worker_count() {
        let img = tissue_image(400, 300, 5);
        let p = init_model(1);
        let seq = oofkit_core::heatmap::infer_heatmap(&p, &img, true).unwrap();
        for w in [1, 3] {
            assert_eq!(with_workers(w, || infer_heatmap(&p, &img, true)).unwrap().unwrap(), seq);
        }
    }

    #[test]
    fn chunked_gradient_is_worker_independent() {
        let p = init_model(2);
        let batch: Vec<(Input<f32>, OofClass)> = (0..20)
            .map(|i| {
                let img = tissue_image(139, 139, i);
                (Input::from_patch(&img).unwrap(), OofClass::new((i % 30) as u8).unwrap())
            })
            .collect();
        let a = with_workers(1, || chunked_batch_gradient(&p, &batch, 0.05)).unwrap();
        let b = with_workers(4, || chunked_batch_gradient(&p, &batch, 0.05)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let (l, g) = batch_gradient(&p, &batch, 0.05);
        assert!((a.0 - l).abs() < 1e-6 * l.abs());
        for (x, y) in a.1.tensors().iter().zip(g.tensors()) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() <= 1e-5 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn bootstrap_matches_sequential() {
        let records: Vec<PatchRecord> = (0..60)
            .map(|i| PatchRecord {
                slide_id: format!("s{}", i % 6),
                row: 0,
                col: i,
                score: ((i * 37) % 11) as f64,
                label: i % 3 == 0,
                oof_class: OofClass::new((i % 30) as u8).unwrap(),
            })
            .collect();
        let buckets = oofkit_core::eval::DEFAULT_BUCKETS;
        let seq = oofkit_core::eval::stratified_auc(&records, &buckets, 40, 3).unwrap();
        assert_eq!(with_workers(2, || stratified_auc(&records, &buckets, 40, 3)).unwrap().unwrap(), seq);
    }
}
