//! Batch cultivation model of a PHA-producing organism on fructose and oil.

mod fit;
mod integrate;
mod model;
mod params;
mod perturb;
mod state;

pub use fit::{fit_params, fit_params_joint, FitConfig, FitReport, Observations};
pub use integrate::{integrate, simulate, Trajectory, DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_INTERVAL};
pub use model::derivatives;
pub use params::{CultivationParams, PARAM_COUNT, PARAM_NAMES, PHI_HHX};
pub use perturb::{perturb, perturb_initial, PerturbationConfig};
pub use state::{CultivationState, STATE_COLUMNS, STATE_DIM};
