use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Evenly spaced wavenumber axis (1/cm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavenumberGrid {
    pub start: f64,
    pub end: f64,
    #[serde(rename = "channels")]
    pub m: usize,
}

impl Default for WavenumberGrid {
    fn default() -> Self {
        WavenumberGrid {
            start: 400.0,
            end: 3200.0,
            m: 1024,
        }
    }
}

impl WavenumberGrid {
    pub fn new(start: f64, end: f64, m: usize) -> Result<Self> {
        let g = WavenumberGrid { start, end, m };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.end) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid start ({}) must be below end ({})",
                self.start, self.end
            )));
        }
        if self.m < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 channels, got {}",
                self.m
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.m - 1) as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        if i + 1 == self.m {
            self.end
        } else {
            self.start + self.step() * i as f64
        }
    }

    pub fn positions<T: Real>(&self) -> Array1<T> {
        Array1::from_shape_fn(self.m, |i| T::lit(self.position(i)))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end
    }

    /// Channel closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.start) / self.step()).round();
        i.clamp(0.0, (self.m - 1) as f64) as usize
    }
}
