//! Class-imbalance machinery: loss weights, weighted sampling, SMOTE,
//! k-means cluster oversampling, hard triplet mining with the class
//! rectification loss, and MixUp on encoded features.

mod counts;
mod crl;
mod kmeans;
mod mixup;
mod resample;
mod sampler;
mod smote;

pub use counts::{class_counts, class_weights, minority_classes, ClassCounts, WeightKind, WeightScheme};
pub use crl::{alpha_schedule, crl_loss, crl_loss_and_gradients, hard_mine_triplets, Triplet};
pub use kmeans::{kmeans, KMeans, KMEANS_MAX_ITER, KMEANS_TOL};
pub use mixup::{mixup, LabeledBatch};
pub use resample::{
    cluster_oversample, random_oversample, random_undersample, smote_oversample, PlanEntry, PlanKind, PlanSource,
    ResamplePlan,
};
pub use sampler::{per_sample_weights, weighted_sampler, WeightedDraws};
pub use smote::{smote, SmoteOutput, SyntheticPoint, DEFAULT_SMOTE_K};

/// Per-class seed so classes can be processed in any order with the same result.
pub(crate) fn class_seed(seed: u64, class: usize) -> u64 {
    seed.wrapping_add(class as u64)
}
