//! Self-paced training of linear models.

mod data;
mod fit;
mod linalg;
mod schedule;
mod synth;

pub use data::{loss_vector, Dataset, LossKind};
pub use fit::{
    latent_descent_fit, latent_gradient, latent_objective, spl_fit, v_step, w_step, DescentResult, TraceEntry,
    TrainConfig, TrainState,
};
pub use schedule::{
    kumar_initial, kumar_sequence, portion_lambda, positive_weight_reach, Schedule, FULL_WEIGHT, POSITIVE_WEIGHT,
};
pub use synth::{compare_suite, outlier_regression, CompareRow, CompareSpec, CompareSummary, OutlierSpec, Synthetic};
