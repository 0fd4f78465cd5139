use serde::{Deserialize, Serialize};

use crate::Real;

pub const STATE_DIM: usize = 6;

/// Column names of the trajectory CSV, in state order.
pub const STATE_COLUMNS: [&str; STATE_DIM] = ["S_f", "S_o", "N", "X_r", "P_hb", "P_hhx"];

/// Concentrations (g/L) of the batch culture.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CultivationState<T> {
    pub fructose: T,
    pub oil: T,
    pub urea: T,
    /// Residual cell dry weight (biomass without PHA).
    pub biomass: T,
    pub hb: T,
    pub hhx: T,
}

impl<T: Real> CultivationState<T> {
    pub fn zero() -> Self {
        Self::from_array([T::zero(); STATE_DIM])
    }

    pub fn to_array(&self) -> [T; STATE_DIM] {
        [self.fructose, self.oil, self.urea, self.biomass, self.hb, self.hhx]
    }

    pub fn from_array([fructose, oil, urea, biomass, hb, hhx]: [T; STATE_DIM]) -> Self {
        CultivationState {
            fructose,
            oil,
            urea,
            biomass,
            hb,
            hhx,
        }
    }

    /// Cell dry weight, `X_r + P_hb + P_hhx`.
    pub fn cdw(&self) -> T {
        self.biomass + self.hb + self.hhx
    }

    pub fn pha(&self) -> T {
        self.hb + self.hhx
    }

    /// HHx share of the polymer in wt.% (zero when no polymer is present).
    pub fn hhx_wt_pct(&self) -> T {
        let pha = self.pha();
        if pha > T::zero() {
            T::lit(100.0) * self.hhx / pha
        } else {
            T::zero()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn clamp_non_negative(&self) -> Self {
        // NaN passes through so the integrator can report it.
        Self::from_array(self.to_array().map(|v| if v < T::zero() { T::zero() } else { v }))
    }

    pub(crate) fn axpy(&self, h: T, rate: &Self) -> Self {
        let (a, r) = (self.to_array(), rate.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + h * r[i]))
    }

    /// The five spectroscopically visible labels: fructose, urea, biomass, HB, HHx.
    pub fn labels(&self) -> [T; 5] {
        [self.fructose, self.urea, self.biomass, self.hb, self.hhx]
    }
}
