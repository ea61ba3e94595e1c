use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical and protocol parameters of one operating point.
///
/// Defaults are the reference working point: 0.145 detector efficiency,
/// 0.2 dB/km fiber, 8e-8 dark counts per gate, error-correction
/// efficiency 1.15, μ = 0.84 at 400 km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mean photon number per pulse at each source.
    pub mu: f64,
    /// Fiber attenuation in dB/km.
    pub alpha: f64,
    /// Total sender-to-sender distance in km; each arm is half of it.
    pub length_km: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per detector per gate.
    pub p_d: f64,
    /// Error-correction efficiency (≥ 1).
    pub f: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { mu: 0.84, alpha: 0.2, length_km: 400.0, eta_d: 0.145, p_d: 8e-8, f: 1.15 }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |what: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{what} must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("mu", self.mu)?;
        finite_nonneg("alpha", self.alpha)?;
        finite_nonneg("L", self.length_km)?;
        finite_nonneg("eta_d", self.eta_d)?;
        finite_nonneg("p_d", self.p_d)?;
        finite_nonneg("f", self.f)?;
        if self.eta_d > 1.0 {
            return Err(Error::InvalidParams(format!("eta_d must be <= 1, got {}", self.eta_d)));
        }
        if self.p_d > 1.0 {
            return Err(Error::InvalidParams(format!("p_d must be <= 1, got {}", self.p_d)));
        }
        if self.f < 1.0 {
            return Err(Error::InvalidParams(format!("f must be >= 1, got {}", self.f)));
        }
        Ok(())
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_length(self, length_km: f64) -> Self {
        Self { length_km, ..self }
    }

    /// End-to-end per-arm efficiency: detector efficiency times the fiber
    /// transmittance over half the total distance.
    pub fn eta_t(&self) -> f64 {
        self.eta_d * 10f64.powf(-self.alpha * self.length_km / 20.0)
    }

    /// Mean photon number of each sender's pulse as seen by the detectors.
    pub fn mu_arm(&self) -> f64 {
        self.eta_t() * self.mu
    }
}
