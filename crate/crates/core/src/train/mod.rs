//! Reference regressor, training loop with augmentation hooks, and the
//! four-setup × six-validation-set experiment.

mod experiment;
mod fit;
mod regressor;

pub use experiment::{
    build_experiment_data, run_experiment_matrix, run_seed, summarize, EvalReport, ExperimentConfig, ExperimentData,
    SeedGrid, TrainingSetup,
};
pub use fit::{augmentation_stats, evaluate, fit_model, mse, train, TrainConfig, TrainOutcome};
pub use regressor::{Gradient, GradientModel, LinearRegressor, Regressor};
