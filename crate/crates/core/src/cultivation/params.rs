use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;
use crate::Real;

/// Kinetic and stoichiometric parameters of the batch model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CultivationParams<T> {
    /// Maximum specific growth rate on fructose (1/h).
    pub mu_max_f: T,
    /// Maximum specific growth rate on oil (1/h).
    pub mu_max_o: T,
    /// Half-saturation constant for fructose (g/L).
    pub k_f: T,
    /// Half-saturation constant for oil (g/L).
    pub k_o: T,
    /// Half-saturation constant for urea (g/L).
    pub k_n: T,
    /// Maximum specific PHA production rate on fructose (g/g/h).
    pub q_max_f: T,
    /// Maximum specific PHA production rate on oil (g/g/h).
    pub q_max_o: T,
    /// Nitrogen inhibition constant of PHA synthesis (g/L).
    pub k_i: T,
    /// Biomass yield on fructose (g/g).
    pub y_xf: T,
    /// Biomass yield on oil (g/g).
    pub y_xo: T,
    /// Biomass yield on urea (g/g).
    pub y_xn: T,
    /// PHA yield on fructose (g/g).
    pub y_pf: T,
    /// PHA yield on oil (g/g).
    pub y_po: T,
    /// HHx fraction of the PHA made from oil.
    pub phi_hhx: T,
}

pub const PARAM_COUNT: usize = 14;

/// Fixture keys in field order.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "mu_max_f", "mu_max_o", "K_f", "K_o", "K_N", "q_max_f", "q_max_o", "K_I", "Y_xf", "Y_xo", "Y_xn", "Y_pf", "Y_po",
    "phi_hhx",
];

/// Index of `phi_hhx` in [`PARAM_NAMES`].
pub const PHI_HHX: usize = 13;

impl<T: Real> CultivationParams<T> {
    pub fn to_array(&self) -> [T; PARAM_COUNT] {
        [
            self.mu_max_f,
            self.mu_max_o,
            self.k_f,
            self.k_o,
            self.k_n,
            self.q_max_f,
            self.q_max_o,
            self.k_i,
            self.y_xf,
            self.y_xo,
            self.y_xn,
            self.y_pf,
            self.y_po,
            self.phi_hhx,
        ]
    }

    pub fn from_array(v: [T; PARAM_COUNT]) -> Self {
        let [mu_max_f, mu_max_o, k_f, k_o, k_n, q_max_f, q_max_o, k_i, y_xf, y_xo, y_xn, y_pf, y_po, phi_hhx] = v;
        CultivationParams {
            mu_max_f,
            mu_max_o,
            k_f,
            k_o,
            k_n,
            q_max_f,
            q_max_o,
            k_i,
            y_xf,
            y_xo,
            y_xn,
            y_pf,
            y_po,
            phi_hhx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.phi_hhx > T::one() {
            return Err(Error::InvalidInput(format!(
                "phi_hhx must lie in [0, 1], got {}",
                self.phi_hhx
            )));
        }
        Ok(())
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut v = [T::zero(); PARAM_COUNT];
        for (slot, name) in v.iter_mut().zip(PARAM_NAMES) {
            let raw = map
                .get(name)
                .ok_or_else(|| Error::InvalidInput(format!("missing parameter `{name}`")))?;
            *slot = T::lit(*raw);
        }
        let p = Self::from_array(v);
        p.validate()?;
        Ok(p)
    }

    /// Parses a flat `key = value` parameter file. Unknown keys are rejected.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let map = kv::parse(text, origin)?;
        if let Some(extra) = map.keys().find(|k| !PARAM_NAMES.contains(&k.as_str())) {
            return Err(Error::InvalidInput(format!("{origin}: unknown parameter `{extra}`")));
        }
        Self::from_map(&map)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            let _ = writeln!(out, "{name} = {}", v.as_f64());
        }
        out
    }

    pub fn cast<U: Real>(&self) -> CultivationParams<U> {
        CultivationParams::from_array(self.to_array().map(|v| U::lit(v.as_f64())))
    }
}
