use super::params::CultivationParams;
use super::state::CultivationState;
use crate::Real;

/// Right-hand side of the batch model.
///
/// Growth is Monod-limited by carbon and urea; PHA synthesis is carbon-limited
/// and repressed by urea. The two carbon sources compete for uptake:
/// `sat_s = (S_s/K_s) / (1 + S_f/K_f + S_o/K_o)`, which is `S_s/(K_s + S_s)` in
/// single-substrate cultures. Negative inputs are treated as zero.
pub fn derivatives<T: Real>(state: &CultivationState<T>, p: &CultivationParams<T>) -> CultivationState<T> {
    let s = state.clamp_non_negative();
    let rf = s.fructose / p.k_f;
    let ro = s.oil / p.k_o;
    let denom = T::one() + rf + ro;
    let (sat_f, sat_o) = (rf / denom, ro / denom);

    let n_limit = s.urea / (p.k_n + s.urea);
    let n_inhibit = p.k_i / (p.k_i + s.urea);

    let mu_f = p.mu_max_f * sat_f * n_limit;
    let mu_o = p.mu_max_o * sat_o * n_limit;
    let q_f = p.q_max_f * sat_f * n_inhibit;
    let q_o = p.q_max_o * sat_o * n_inhibit;
    let x = s.biomass;

    CultivationState {
        fructose: -(mu_f / p.y_xf + q_f / p.y_pf) * x,
        oil: -(mu_o / p.y_xo + q_o / p.y_po) * x,
        urea: -(mu_f + mu_o) * x / p.y_xn,
        biomass: (mu_f + mu_o) * x,
        hb: (q_f + (T::one() - p.phi_hhx) * q_o) * x,
        hhx: p.phi_hhx * q_o * x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn nominal() -> CultivationParams<f64> {
        fixtures::nominal().params
    }

    #[test]
    fn no_substrate_no_flux() {
        let s = CultivationState {
            fructose: 0.0,
            oil: 0.0,
            urea: 1.0,
            biomass: 2.0,
            hb: 1.0,
            hhx: 0.2,
        };
        let d = derivatives(&s, &nominal());
        assert_eq!(d.to_array(), [0.0; 6]);
    }

    #[test]
    fn nitrogen_free_accumulates_pha() {
        let s = CultivationState {
            fructose: 10.0,
            oil: 5.0,
            urea: 0.0,
            biomass: 2.0,
            hb: 0.0,
            hhx: 0.0,
        };
        let d = derivatives(&s, &nominal());
        assert_eq!(d.biomass, 0.0);
        assert_eq!(d.urea, 0.0);
        assert!(d.hb > 0.0 && d.hhx > 0.0);
    }

    #[test]
    fn start_of_run_signs() {
        let fx = fixtures::nominal::<f64>();
        let y0 = fx.initial.state_for_mix(50.0);
        let d = derivatives(&y0, &fx.params);
        assert!(d.fructose < 0.0);
        assert!(d.oil < 0.0);
        assert!(d.urea < 0.0);
        assert!(d.biomass > 0.0);
    }

    #[test]
    fn competitive_uptake_reduces_to_monod() {
        let p = nominal();
        let s = CultivationState {
            fructose: 3.0,
            oil: 0.0,
            urea: 0.0,
            biomass: 1.0,
            hb: 0.0,
            hhx: 0.0,
        };
        let d = derivatives(&s, &p);
        let q = p.q_max_f * 3.0 / (p.k_f + 3.0);
        assert!((d.hb - q).abs() < 1e-14);
    }
}
