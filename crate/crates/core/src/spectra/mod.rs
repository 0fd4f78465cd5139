//! Component spectra and spectrum synthesis.

mod grid;
mod library;

pub use grid::WavenumberGrid;
pub use library::{
    extract_components, generate_components, synthesize, synthesize_into, ComponentLibrary, Extraction, NoiseModel,
    Peak, PeakTable, Spectrum, SubstancePeaks, SUBSTANCES,
};

/// Default measurement noise standard deviation (components peak at 1).
pub const DEFAULT_SIGMA: f64 = 0.01;
