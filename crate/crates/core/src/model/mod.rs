//! The 30-class focus classifier.
//!
//! A truncated Inception-v3 stem (three 3x3 convolutions and a 3x3/2 max
//! pool) with every filter count scaled by a depth multiplier of 0.1,
//! followed by a dense layer to 30 logits.
//!
//! ```text
//! 139x139x3 -conv 3x3/2 valid-> 69x69x3 -conv 3x3/1 valid-> 67x67x3
//!   -conv 3x3/1 same-> 67x67x6 -maxpool 3x3/2-> 33x33x6 -dense-> 30
//! ```

mod format;
mod gradcheck;
mod net;
mod train;

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

pub use format::{decode_params, encode_params, MAGIC, VERSION};
pub use gradcheck::{finite_difference_check, smooth_probe, GradCheckReport};
pub use net::{forward, loss_and_gradients, predict_class, softmax, ForwardTrace, Input};
pub use train::{
    batch_gradient, evaluate_accuracy, train, train_with, training_input, BatchGradientFn, EpochStats, Sample, TrainConfig,
    TrainingLog,
};

use crate::rng::{self, Stage};
use crate::{NUM_CLASSES, PATCH_SIZE};

/// Filter counts of the reference stem layers before depth scaling.
pub const REFERENCE_FILTERS: [usize; 3] = [32, 32, 64];
pub const DEPTH_MULTIPLIER: f64 = 0.1;

/// `max(1, round(multiplier * filters))`.
pub const fn scaled_filters(filters: usize) -> usize {
    // round(0.1 * f) == (f + 5) / 10 for non-negative integers.
    let n = (filters + 5) / 10;
    if n == 0 {
        1
    } else {
        n
    }
}

pub const C1: usize = scaled_filters(REFERENCE_FILTERS[0]);
pub const C2: usize = scaled_filters(REFERENCE_FILTERS[1]);
pub const C3: usize = scaled_filters(REFERENCE_FILTERS[2]);

pub const IN_CHANNELS: usize = 3;
pub const K: usize = 3;

/// Spatial side lengths after each stage for a `PATCH_SIZE` input.
pub const S1: usize = (PATCH_SIZE - K) / 2 + 1;
pub const S2: usize = S1 - K + 1;
pub const S3: usize = S2;
pub const S_POOL: usize = (S3 - K) / 2 + 1;
pub const FEATURES: usize = S_POOL * S_POOL * C3;

/// Weights and biases, generic over the scalar so the same code runs in
/// `f32` for training and `f64` for gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// `[C1][IN_CHANNELS][K][K]`
    pub conv1_w: Vec<T>,
    pub conv1_b: Vec<T>,
    /// `[C2][C1][K][K]`
    pub conv2_w: Vec<T>,
    pub conv2_b: Vec<T>,
    /// `[C3][C2][K][K]`
    pub conv3_w: Vec<T>,
    pub conv3_b: Vec<T>,
    /// `[NUM_CLASSES][FEATURES]`, features flattened channel-major.
    pub head_w: Vec<T>,
    pub head_b: Vec<T>,
}

/// Names and shapes of the parameter tensors, in storage order.
pub fn tensor_layout() -> [(&'static str, Vec<usize>); 8] {
    [
        ("conv1/weight", vec![C1, IN_CHANNELS, K, K]),
        ("conv1/bias", vec![C1]),
        ("conv2/weight", vec![C2, C1, K, K]),
        ("conv2/bias", vec![C2]),
        ("conv3/weight", vec![C3, C2, K, K]),
        ("conv3/bias", vec![C3]),
        ("head/weight", vec![NUM_CLASSES, FEATURES]),
        ("head/bias", vec![NUM_CLASSES]),
    ]
}

impl<T: Float> ModelParams<T> {
    pub fn zeros() -> Self {
        let z = |n| vec![T::zero(); n];
        ModelParams {
            conv1_w: z(C1 * IN_CHANNELS * K * K),
            conv1_b: z(C1),
            conv2_w: z(C2 * C1 * K * K),
            conv2_b: z(C2),
            conv3_w: z(C3 * C2 * K * K),
            conv3_b: z(C3),
            head_w: z(NUM_CLASSES * FEATURES),
            head_b: z(NUM_CLASSES),
        }
    }

    pub fn tensors(&self) -> [&[T]; 8] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.conv3_w,
            &self.conv3_b,
            &self.head_w,
            &self.head_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 8] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.conv3_w,
            &mut self.conv3_b,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Float>(&self) -> ModelParams<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from(*x).expect("finite parameter")).collect();
        ModelParams {
            conv1_w: c(&self.conv1_w),
            conv1_b: c(&self.conv1_b),
            conv2_w: c(&self.conv2_w),
            conv2_b: c(&self.conv2_b),
            conv3_w: c(&self.conv3_w),
            conv3_b: c(&self.conv3_b),
            head_w: c(&self.head_w),
            head_b: c(&self.head_b),
        }
    }
}

/// Fan-in scaled normal weights (He for the ReLU convolutions, LeCun with an
/// extra 0.1 factor for the dense head) and zero biases.
pub fn init_model(seed: u64) -> ModelParams<f32> {
    let mut p = ModelParams::<f32>::zeros();
    let mut r = rng::stream(&[seed, Stage::Init as u64]);
    let mut fill = |w: &mut Vec<f32>, std: f64| {
        for v in w.iter_mut() {
            *v = (rng::standard_normal(&mut r) * std) as f32;
        }
    };
    let he = |fan_in: usize| libm::sqrt(2.0 / fan_in as f64);
    fill(&mut p.conv1_w, he(IN_CHANNELS * K * K));
    fill(&mut p.conv2_w, he(C1 * K * K));
    fill(&mut p.conv3_w, he(C2 * K * K));
    fill(&mut p.head_w, 0.1 * libm::sqrt(1.0 / FEATURES as f64));
    p
}
