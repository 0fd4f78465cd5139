//! Committed reference data: nominal model parameters, initial conditions and
//! the default component peak table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cultivation::{CultivationParams, CultivationState, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::{kv, Real};

pub const NOMINAL_TEXT: &str = include_str!("../fixtures/nominal.txt");
pub const PEAKS_TOML: &str = include_str!("../fixtures/peaks.toml");
pub const FIG1_OBSERVATIONS_CSV: &str = include_str!("../fixtures/fig1_observations.csv");

const INITIAL_KEYS: [&str; 3] = ["S_total", "N_0", "X_r_0"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions<T> {
    /// Total carbon substrate at inoculation (g/L), split by the mix.
    pub substrate_total: T,
    pub urea: T,
    pub biomass: T,
}

impl<T: Real> InitialConditions<T> {
    /// Initial state with `oil_pct` percent of the carbon given as oil.
    pub fn state_for_mix(&self, oil_pct: f64) -> CultivationState<T> {
        let oil_frac = T::lit(oil_pct / 100.0);
        CultivationState {
            fructose: self.substrate_total * (T::one() - oil_frac),
            oil: self.substrate_total * oil_frac,
            urea: self.urea,
            biomass: self.biomass,
            hb: T::zero(),
            hhx: T::zero(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CultivationFixture<T> {
    pub params: CultivationParams<T>,
    pub initial: InitialConditions<T>,
}

impl<T: Real> CultivationFixture<T> {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> = kv::parse(text, origin)?;
        if let Some(extra) = map
            .keys()
            .find(|k| !PARAM_NAMES.contains(&k.as_str()) && !INITIAL_KEYS.contains(&k.as_str()))
        {
            return Err(Error::InvalidInput(format!("{origin}: unknown key `{extra}`")));
        }
        let params = CultivationParams::from_map(&map)?;
        let get = |k: &str| -> Result<T> {
            let v = *map
                .get(k)
                .ok_or_else(|| Error::InvalidInput(format!("{origin}: missing `{k}`")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{origin}: `{k}` must be > 0")));
            }
            Ok(T::lit(v))
        };
        Ok(CultivationFixture {
            params,
            initial: InitialConditions {
                substrate_total: get("S_total")?,
                urea: get("N_0")?,
                biomass: get("X_r_0")?,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FixtureMissing(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "{}S_total = {}\nN_0 = {}\nX_r_0 = {}\n",
            self.params.to_kv_string(),
            self.initial.substrate_total.as_f64(),
            self.initial.urea.as_f64(),
            self.initial.biomass.as_f64()
        )
    }
}

/// The committed nominal parameter set.
pub fn nominal<T: Real>() -> CultivationFixture<T> {
    CultivationFixture::parse(NOMINAL_TEXT, "fixtures/nominal.txt").expect("committed fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_round_trips() {
        let fx: CultivationFixture<f64> = nominal();
        let again = CultivationFixture::parse(&fx.to_kv_string(), "mem").unwrap();
        assert_eq!(fx, again);
        assert_eq!(fx.params.phi_hhx, 0.2);
    }

    #[test]
    fn missing_file_is_fixture_missing() {
        let err = CultivationFixture::<f64>::load(Path::new("/nonexistent/params.txt")).unwrap_err();
        assert!(matches!(err, Error::FixtureMissing(_)));
    }

    #[test]
    fn mix_split() {
        let fx: CultivationFixture<f64> = nominal();
        let y = fx.initial.state_for_mix(40.0);
        assert!((y.oil - 12.0).abs() < 1e-12);
        assert!((y.fructose - 18.0).abs() < 1e-12);
    }
}
