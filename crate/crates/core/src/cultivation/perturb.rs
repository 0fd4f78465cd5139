use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::params::{CultivationParams, PARAM_COUNT, PHI_HHX};
use super::state::CultivationState;
use crate::error::{Error, Result};
use crate::Real;

/// Multiplicative gamma noise `w ~ Γ(shape = alpha, rate = beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            alpha: 5.0,
            beta: 5.0,
            seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gamma shape and rate must be > 0 (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn distribution(&self) -> Gamma<f64> {
        Gamma::new(self.alpha, 1.0 / self.beta).expect("validated gamma parameters")
    }

    /// Draws one weight.
    pub fn weight<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.distribution().sample(rng)
    }
}

/// Scales every kinetic and yield parameter by an independent gamma weight.
///
/// `phi_hhx` is a copolymer composition, not a rate, and is left untouched so
/// that oil-only cultures keep their fixed HHx share.
pub fn perturb<T: Real, R: Rng + ?Sized>(
    params: &CultivationParams<T>,
    config: &PerturbationConfig,
    rng: &mut R,
) -> CultivationParams<T> {
    let dist = config.distribution();
    let mut v = params.to_array();
    for (i, slot) in v.iter_mut().enumerate().take(PARAM_COUNT) {
        if i == PHI_HHX {
            continue;
        }
        *slot *= T::lit(dist.sample(rng));
    }
    CultivationParams::from_array(v)
}

/// Same mechanism applied to each initial concentration.
pub fn perturb_initial<T: Real, R: Rng + ?Sized>(
    y0: &CultivationState<T>,
    config: &PerturbationConfig,
    rng: &mut R,
) -> CultivationState<T> {
    let dist = config.distribution();
    CultivationState::from_array(y0.to_array().map(|v| v * T::lit(dist.sample(rng))))
}
