//! Asymptotic key-rate analysis for dual degrees-of-freedom (polarization +
//! phase) weak-coherent-pulse quantum secret sharing under the
//! beam-splitting attack.
//!
//! The crate is layered bottom-up:
//!
//! * [`optics`]: coherent-state algebra at the untrusted measurement node.
//! * [`attack`]: Eve's key leakage bounds.
//! * [`detector`]: threshold-detector click probabilities with dark counts.
//! * [`rates`]: per-event gains, error rates and the key-rate formula.
//! * [`montecarlo`]: round-by-round protocol simulation used as an oracle.
//! * [`optimize`]: intensity optimisation, maximum distance and sweeps.
//!
//! With the default `parallel` feature, sweeps and simulations fan out over
//! rayon. Disabling it yields a purely sequential build with identical
//! results.

pub mod attack;
pub mod detector;
mod error;
pub mod montecarlo;
pub mod numeric;
pub mod optics;
pub mod optimize;
pub mod par;
pub mod params;
pub mod rates;

pub use error::{Error, Result};
pub use params::SystemParams;
