//! Key leakage to an eavesdropper performing the beam-splitting attack.
//!
//! Eve replaces the lossy fiber with a lossless one and a variable beam
//! splitter that diverts the fraction `1 - eta_t` of each of Alice's pulses
//! into a quantum memory. After the basis announcement she applies an
//! unambiguous state discrimination (USD) measurement; its success
//! probability bounds the fraction of key bits she learns.

use serde::{Deserialize, Serialize};

use crate::numeric::bisect;
use crate::optics::coherent_overlap;
use crate::{Error, Result};

/// Source intensity and the transmittance Eve mimics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapParams {
    pub mu: f64,
    pub eta_t: f64,
}

impl TapParams {
    pub fn new(mu: f64, eta_t: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::domain("mu", mu));
        }
        if !(0.0..=1.0).contains(&eta_t) {
            return Err(Error::domain("eta_t", eta_t));
        }
        Ok(Self { mu, eta_t })
    }

    /// Mean photon number Eve holds per tapped pulse.
    pub fn tapped(&self) -> f64 {
        (1.0 - self.eta_t) * self.mu
    }
}

/// A finite set of pure states with preparation probabilities and the
/// magnitudes of their pairwise overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    probabilities: Vec<f64>,
    overlaps: Vec<Vec<f64>>,
}

impl StateEnsemble {
    #[allow(clippy::needless_range_loop)]
    pub fn new(probabilities: Vec<f64>, overlaps: Vec<Vec<f64>>) -> Result<Self> {
        let n = probabilities.len();
        if overlaps.len() != n || overlaps.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParams("overlap matrix must be N x N".into()));
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParams("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("probabilities sum to {total}, not 1")));
        }
        for i in 0..n {
            if (overlaps[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams("overlap diagonal must be 1".into()));
            }
            for j in 0..n {
                let o = overlaps[i][j];
                if !(0.0..=1.0 + 1e-12).contains(&o) || (o - overlaps[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParams(format!("overlap ({i},{j}) = {o} not symmetric within [0, 1]")));
                }
            }
        }
        Ok(Self { probabilities, overlaps })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.overlaps[i][j]
    }
}

/// Upper bound on the success probability of unambiguously discriminating
/// the states of `ensemble`:
/// `1 - (1/(N-1)) Σ_{i≠j} √(p_i p_j) |<ψ_i|ψ_j>|`, clamped to `[0, 1]`.
pub fn usd_bound(ensemble: &StateEnsemble) -> Result<f64> {
    let n = ensemble.len();
    if n < 2 {
        return Err(Error::domain("ensemble size", n as f64));
    }
    let p = ensemble.probabilities();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += (p[i] * p[j]).sqrt() * ensemble.overlap(i, j);
            }
        }
    }
    Ok((1.0 - sum / (n - 1) as f64).clamp(0.0, 1.0))
}

/// The four diagonal-basis states in Eve's memory, written as products of
/// H and V coherent states with amplitude `√((1-eta_t)μ/2)` and signs
/// `(+,+), (−,−), (+,−), (−,+)`.
pub fn dual_dof_ensemble(tp: TapParams) -> StateEnsemble {
    let a = (tp.tapped() / 2.0).sqrt();
    let states = [(a, a), (-a, -a), (a, -a), (-a, a)];
    let overlaps = states
        .iter()
        .map(|&(hi, vi)| {
            states.iter().map(|&(hj, vj)| (coherent_overlap(hi, hj) * coherent_overlap(vi, vj)).abs()).collect()
        })
        .collect();
    StateEnsemble::new(vec![0.25; 4], overlaps).expect("dual-DOF ensemble is well formed")
}

/// Leakage of the dual-DOF protocol:
/// `1 - [e^{-2x} + 2e^{-x}]/3` with `x = (1-eta_t)μ`.
pub fn ie_dual(tp: TapParams) -> f64 {
    let x = tp.tapped();
    (1.0 - ((-2.0 * x).exp() + 2.0 * (-x).exp()) / 3.0).clamp(0.0, 1.0)
}

/// Leakage of phase-encoded WCP secret sharing: `1 - e^{-2(1-eta_t)μ}`.
pub fn ie_wcp_ph(tp: TapParams) -> f64 {
    (-(-2.0 * tp.tapped()).exp_m1()).clamp(0.0, 1.0)
}

/// Leakage of polarization-encoded WCP secret sharing (equal to MDI-QKD):
/// `1 - e^{-(1-eta_t)μ}`.
pub fn ie_wcp_pol(tp: TapParams) -> f64 {
    (-(-tp.tapped()).exp_m1()).clamp(0.0, 1.0)
}

/// Collision-probability leakage of DPS twin-field secret sharing,
/// `2μ(1-eta_t)`, clamped at 1.
pub fn ie_dps_tf(tp: TapParams) -> f64 {
    (2.0 * tp.tapped()).clamp(0.0, 1.0)
}

/// Intensity at which the DPS twin-field leakage bound reaches 1.
pub fn dps_intensity_threshold(eta_t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta_t) {
        return Err(Error::domain("eta_t", eta_t));
    }
    let hi = 1.0 / (1.0 - eta_t) + 1.0;
    bisect(|mu| 2.0 * mu * (1.0 - eta_t) - 1.0, 0.0, hi, 1e-12)
}

/// Leakage of all four protocols at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageSet {
    pub dual: f64,
    pub wcp_ph: f64,
    pub wcp_pol: f64,
    pub dps_tf: f64,
}

impl LeakageSet {
    pub fn at(tp: TapParams) -> Self {
        Self { dual: ie_dual(tp), wcp_ph: ie_wcp_ph(tp), wcp_pol: ie_wcp_pol(tp), dps_tf: ie_dps_tf(tp) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(mu: f64, eta_t: f64) -> TapParams {
        TapParams::new(mu, eta_t).unwrap()
    }

    #[test]
    fn usd_extremes() {
        let orth = StateEnsemble::new(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(usd_bound(&orth).unwrap(), 1.0);
        let same = StateEnsemble::new(vec![0.5, 0.5], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(usd_bound(&same).unwrap(), 0.0);
        let single = StateEnsemble::new(vec![1.0], vec![vec![1.0]]).unwrap();
        assert!(usd_bound(&single).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(StateEnsemble::new(vec![0.6, 0.6], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(StateEnsemble::new(vec![0.5, 0.5], vec![vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(StateEnsemble::new(vec![0.5, 0.5], vec![vec![1.0, 0.2]]).is_err());
    }

    #[test]
    fn dual_ensemble_overlaps() {
        let t = tp(0.7, 0.2);
        let e = dual_dof_ensemble(t);
        let x = t.tapped();
        assert!((e.overlap(0, 1) - (-2.0 * x).exp()).abs() < 1e-15);
        assert!((e.overlap(0, 2) - (-x).exp()).abs() < 1e-15);
        let vac = dual_dof_ensemble(tp(0.0, 0.3));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(vac.overlap(i, j), 1.0);
            }
        }
    }

    #[test]
    fn reference_leakage_values() {
        let t = tp(0.4, 0.0145);
        assert!((ie_dual(t) - 0.399).abs() < 1e-3);
        assert!((ie_wcp_ph(t) - 0.545).abs() < 1e-3);
        assert!((ie_dps_tf(t) - 0.789).abs() < 1e-3);
        assert_eq!(ie_dual(tp(0.0, 0.5)), 0.0);
        assert_eq!(ie_dual(tp(3.0, 1.0)), 0.0);
        assert_eq!(ie_wcp_pol(tp(0.0, 0.2)), 0.0);
        assert_eq!(ie_dps_tf(tp(0.0, 0.2)), 0.0);
        assert_eq!(ie_dps_tf(tp(5.0, 0.0)), 1.0);
    }

    #[test]
    fn dps_threshold() {
        let mu = dps_intensity_threshold(0.0145).unwrap();
        assert!((mu - 1.0 / (2.0 * (1.0 - 0.0145))).abs() < 1e-10);
        assert!((mu - 0.5074).abs() < 5e-4);
        assert!(dps_intensity_threshold(1.0).is_err());
    }

    #[test]
    fn tap_params_validation() {
        assert!(TapParams::new(-0.1, 0.5).is_err());
        assert!(TapParams::new(0.1, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn usd_route_matches_closed_form(mu in 0.0f64..5.0, eta in 0.0f64..=1.0) {
            let t = tp(mu, eta);
            let via_usd = usd_bound(&dual_dof_ensemble(t)).unwrap();
            prop_assert!((via_usd - ie_dual(t)).abs() < 1e-12);
        }

        #[test]
        fn leakage_ordering(mu in 1e-3f64..5.0, eta in 1e-3f64..0.999) {
            let t = tp(mu, eta);
            prop_assert!(ie_wcp_pol(t) < ie_dual(t));
            prop_assert!(ie_dual(t) < ie_wcp_ph(t));
        }

        #[test]
        fn pol_ph_identity(mu in 0.0f64..5.0, eta in 0.0f64..=1.0) {
            let t = tp(mu, eta);
            prop_assert!((ie_wcp_pol(t) - (1.0 - (1.0 - ie_wcp_ph(t)).sqrt())).abs() < 1e-12);
        }

        #[test]
        fn leakage_monotone(mu in 0.0f64..4.0, dmu in 0.0f64..1.0, eta in 0.0f64..0.9, deta in 0.0f64..0.1) {
            let base = LeakageSet::at(tp(mu, eta));
            let more_mu = LeakageSet::at(tp(mu + dmu, eta));
            let more_eta = LeakageSet::at(tp(mu, eta + deta));
            for (b, m, e) in [
                (base.dual, more_mu.dual, more_eta.dual),
                (base.wcp_ph, more_mu.wcp_ph, more_eta.wcp_ph),
                (base.wcp_pol, more_mu.wcp_pol, more_eta.wcp_pol),
                (base.dps_tf, more_mu.dps_tf, more_eta.dps_tf),
            ] {
                prop_assert!(m >= b - 1e-15);
                prop_assert!(e <= b + 1e-15);
                prop_assert!((0.0..=1.0).contains(&b));
            }
        }
    }
}
