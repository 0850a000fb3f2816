//! Evaluation statistics: annotation rasterization, balanced resampling,
//! rank correlation and regression, z-stack focus profiles and
//! focus-stratified AUC of a downstream scorer.

mod annotations;
mod downstream;
mod resample;
mod stats;
mod zstack;

pub use annotations::{contains_point, is_simple_polygon, rasterize_annotations, AnnotatedRegion, LabeledCell, OofGrade};
pub use downstream::{
    describe_bucket, percentile, stratified_auc, synthetic_blur_sweep, toy_features, Bucket, BucketAuc, PatchRecord,
    SlideBootstrap, ToyScorer, BOOTSTRAP_SAMPLES, DEFAULT_BUCKETS,
};
pub use resample::{balanced_resample, Resampled, PER_GRADE};
pub use stats::{
    auc, average_ranks, correlation_p_value, linreg, pearson, regularized_incomplete_beta, spearman,
    student_t_two_sided, Correlation, LinearFit, REFERENCE_SLOPE,
};
pub use zstack::{default_z_levels, synthetic_zstack, zstack_profile, CellRect, ZProfile, DEFAULT_PX_PER_UM};
