//! Concave conjugacy toolkit for self-paced learning.
//!
//! * [`conjugate`]: grid concave conjugates, sup-convolutions, hulls and
//!   superdifferentials of sampled functions.
//! * [`regularizers`]: the catalog of SP-regularizers and the two design
//!   pipelines, with validation.
//! * [`curriculum`]: curriculum regions and their action on latent
//!   objectives.
//! * [`trainer`]: alternating self-paced fitting of linear models.
//! * [`oracle`]: brute-force references used by the tests.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below fix the common case.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod conjugate;
pub mod curriculum;
pub mod error;
pub mod oracle;
pub mod regularizers;
pub mod sampled;
pub mod scalar;
pub mod trainer;

pub use error::{ConjugacyError, CurriculumError, OracleError, RegularizerError, TrainError};
pub use regularizers::{CatalogKind, SPRegularizer};
pub use sampled::SampledFunction;
pub use scalar::Scalar;

pub type SampledFunctionF64 = SampledFunction<f64>;
pub type SampledFunctionF32 = SampledFunction<f32>;
pub type SpRegularizerF64 = SPRegularizer<f64>;
pub type SpRegularizerF32 = SPRegularizer<f32>;
pub type HalfspaceF64 = conjugate::Halfspace<f64>;
pub type CurriculumRegionF64 = curriculum::CurriculumRegion<f64>;
pub type DatasetF64 = trainer::Dataset<f64>;
pub type TrainConfigF64 = trainer::TrainConfig<f64>;
pub type TrainStateF64 = trainer::TrainState<f64>;
