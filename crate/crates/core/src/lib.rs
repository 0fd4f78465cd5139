//! Label-decorrelating data augmentation for additive spectra.
//!
//! The crate simulates batch cultivations, turns their concentrations into
//! noisy Raman-like spectra, and remixes training mini-batches so that the
//! labels a model sees are independent of each other. The numerical core is
//! generic over [`Real`] (`f32` or `f64`); the `*F64` aliases below are what
//! the pipeline uses.

pub mod cultivation;
pub mod dataset;
pub mod decorrelation;
pub mod error;
pub mod fixtures;
pub mod kv;
pub mod linalg;
pub mod optim;
pub mod rng;
mod scalar;
pub mod spectra;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CultivationParamsF64 = cultivation::CultivationParams<f64>;
pub type CultivationStateF64 = cultivation::CultivationState<f64>;
pub type TrajectoryF64 = cultivation::Trajectory<f64>;
pub type ComponentLibraryF64 = spectra::ComponentLibrary<f64>;
pub type LabeledBatchF64 = decorrelation::LabeledBatch<f64>;
pub type MixingMatrixF64 = decorrelation::MixingMatrix<f64>;
pub type DatasetF64 = dataset::Dataset<f64>;
pub type LinearRegressorF64 = train::LinearRegressor<f64>;

pub type LabeledBatchF32 = decorrelation::LabeledBatch<f32>;
pub type MixingMatrixF32 = decorrelation::MixingMatrix<f32>;
pub type ComponentLibraryF32 = spectra::ComponentLibrary<f32>;
pub type LinearRegressorF32 = train::LinearRegressor<f32>;
