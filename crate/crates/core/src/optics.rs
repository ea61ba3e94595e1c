//! Coherent-state algebra for the measurement node.
//!
//! Each sender prepares a weak coherent pulse whose polarization and global
//! phase carry one bit each. At the node the two pulses meet on a 50:50 beam
//! splitter; polarizing beam splitters behind each output port route H and V
//! light to four threshold detectors `D1H, D2H, D1V, D2V`.
//!
//! Only real amplitudes appear: every encoding uses phases 0 or π.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::{Error, Result};

/// One of the four detector modes behind the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    H1,
    H2,
    V1,
    V2,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::H1, Mode::H2, Mode::V1, Mode::V2];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The mode reached when the relative phase between senders flips,
    /// i.e. output port 1 and 2 swap within the same polarization.
    pub fn port_swapped(self) -> Mode {
        match self {
            Mode::H1 => Mode::H2,
            Mode::H2 => Mode::H1,
            Mode::V1 => Mode::V2,
            Mode::V2 => Mode::V1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::H1 => "H1",
            Mode::H2 => "H2",
            Mode::V1 => "V1",
            Mode::V2 => "V2",
        }
    }
}

/// Encoding basis chosen by one sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear dual basis: polarization bit picks H or V.
    Z,
    /// Diagonal dual basis: polarization bit picks + or −. Used for keys.
    X,
}

/// The four classical bits of one round: phase and polarization bit of
/// each sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EncodingPair {
    pub ka_ph: u8,
    pub ka_pol: u8,
    pub kb_ph: u8,
    pub kb_pol: u8,
}

impl EncodingPair {
    pub fn new(ka_ph: u8, ka_pol: u8, kb_ph: u8, kb_pol: u8) -> Result<Self> {
        for (what, b) in [("ka_ph", ka_ph), ("ka_pol", ka_pol), ("kb_ph", kb_ph), ("kb_pol", kb_pol)] {
            if b > 1 {
                return Err(Error::domain(what, b as f64));
            }
        }
        Ok(Self { ka_ph, ka_pol, kb_ph, kb_pol })
    }

    /// Decodes the low four bits of `code` as `(ka_ph, ka_pol, kb_ph, kb_pol)`,
    /// most significant first.
    pub fn from_index(code: u8) -> Self {
        Self { ka_ph: (code >> 3) & 1, ka_pol: (code >> 2) & 1, kb_ph: (code >> 1) & 1, kb_pol: code & 1 }
    }

    pub fn index(self) -> u8 {
        (self.ka_ph << 3) | (self.ka_pol << 2) | (self.kb_ph << 1) | self.kb_pol
    }

    /// All sixteen encodings in index order.
    pub fn all() -> impl Iterator<Item = EncodingPair> {
        (0u8..16).map(Self::from_index)
    }

    pub fn phase_xor(self) -> u8 {
        self.ka_ph ^ self.kb_ph
    }

    pub fn pol_xor(self) -> u8 {
        self.ka_pol ^ self.kb_pol
    }

    pub fn pairing(self) -> PolPairing {
        if self.pol_xor() == 0 {
            PolPairing::PlusPlus
        } else {
            PolPairing::PlusMinus
        }
    }
}

/// Representative sign combination of the two senders' diagonal
/// polarizations. `++`/`−−` behave identically, as do `+−`/`−+`, so each
/// variant stands for half of all rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolPairing {
    PlusPlus,
    PlusMinus,
}

impl PolPairing {
    pub const BOTH: [PolPairing; 2] = [PolPairing::PlusPlus, PolPairing::PlusMinus];
    pub const WEIGHT: f64 = 0.5;

    /// Reference encoding for this pairing: both phase bits 0, Alice's
    /// polarization bit 0.
    pub fn reference_pair(self) -> EncodingPair {
        match self {
            PolPairing::PlusPlus => EncodingPair::new(0, 0, 0, 0).unwrap(),
            PolPairing::PlusMinus => EncodingPair::new(0, 0, 0, 1).unwrap(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            PolPairing::PlusPlus => "++",
            PolPairing::PlusMinus => "+-",
        }
    }
}

/// Coherent amplitudes (in √photons) arriving at the four detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeAmplitudes {
    pub a_h1: f64,
    pub a_h2: f64,
    pub a_v1: f64,
    pub a_v2: f64,
}

impl ModeAmplitudes {
    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::H1 => self.a_h1,
            Mode::H2 => self.a_h2,
            Mode::V1 => self.a_v1,
            Mode::V2 => self.a_v2,
        }
    }

    pub fn intensities(&self) -> ModeIntensities {
        ModeIntensities {
            i_h1: self.a_h1 * self.a_h1,
            i_h2: self.a_h2 * self.a_h2,
            i_v1: self.a_v1 * self.a_v1,
            i_v2: self.a_v2 * self.a_v2,
        }
    }
}

/// Mean photon numbers arriving at the four detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeIntensities {
    pub i_h1: f64,
    pub i_h2: f64,
    pub i_v1: f64,
    pub i_v2: f64,
}

impl ModeIntensities {
    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::H1 => self.i_h1,
            Mode::H2 => self.i_h2,
            Mode::V1 => self.i_v1,
            Mode::V2 => self.i_v2,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.i_h1, self.i_h2, self.i_v1, self.i_v2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { i_h1: a[0], i_h2: a[1], i_v1: a[2], i_v2: a[3] }
    }

    pub fn total(&self) -> f64 {
        self.i_h1 + self.i_h2 + self.i_v1 + self.i_v2
    }
}

/// Squares each amplitude.
pub fn intensities(amps: &ModeAmplitudes) -> ModeIntensities {
    amps.intensities()
}

/// Output amplitudes for two diagonal-basis pulses, each carrying
/// `mu_arm` photons on average when it reaches the beam splitter.
pub fn detector_amplitudes(pair: EncodingPair, mu_arm: f64) -> Result<ModeAmplitudes> {
    amplitudes_in_bases(Basis::X, Basis::X, pair, mu_arm)
}

/// Per-polarization input amplitudes `(a_H, a_V)` of one sender.
fn sender_amplitudes(basis: Basis, ph: u8, pol: u8, mu_arm: f64) -> (f64, f64) {
    let sign = if ph == 0 { 1.0 } else { -1.0 };
    match basis {
        Basis::X => {
            let r = (mu_arm / 2.0).sqrt();
            let pol_sign = if pol == 0 { 1.0 } else { -1.0 };
            (sign * r, sign * pol_sign * r)
        }
        Basis::Z => {
            let r = mu_arm.sqrt();
            if pol == 0 {
                (sign * r, 0.0)
            } else {
                (0.0, sign * r)
            }
        }
    }
}

/// Output amplitudes for arbitrary sender bases. Mixed-basis rounds are
/// physically valid, they are simply sifted away afterwards.
pub fn amplitudes_in_bases(basis_a: Basis, basis_b: Basis, pair: EncodingPair, mu_arm: f64) -> Result<ModeAmplitudes> {
    if !mu_arm.is_finite() || mu_arm < 0.0 {
        return Err(Error::domain("mu_arm", mu_arm));
    }
    let (ah, av) = sender_amplitudes(basis_a, pair.ka_ph, pair.ka_pol, mu_arm);
    let (bh, bv) = sender_amplitudes(basis_b, pair.kb_ph, pair.kb_pol, mu_arm);
    Ok(ModeAmplitudes {
        a_h1: (ah + bh) * FRAC_1_SQRT_2,
        a_h2: (ah - bh) * FRAC_1_SQRT_2,
        a_v1: (av + bv) * FRAC_1_SQRT_2,
        a_v2: (av - bv) * FRAC_1_SQRT_2,
    })
}

/// `cosh(i) - 1` without cancellation for small `i`.
pub(crate) fn cosh_m1(i: f64) -> f64 {
    let s = (0.5 * i).sinh();
    2.0 * s * s
}

/// Probability that a Poisson(`i`) count is even and non-zero:
/// `e^{-i}(cosh i - 1)`.
pub fn poisson_even_mass(i: f64) -> Result<f64> {
    if i.is_nan() || i < 0.0 {
        return Err(Error::domain("intensity", i));
    }
    Ok((-i).exp() * cosh_m1(i))
}

/// Probability that a Poisson(`i`) count is odd: `e^{-i} sinh i`.
pub fn poisson_odd_mass(i: f64) -> Result<f64> {
    if i.is_nan() || i < 0.0 {
        return Err(Error::domain("intensity", i));
    }
    // e^{-i} sinh i = (1 - e^{-2i}) / 2
    Ok(-0.5 * (-2.0 * i).exp_m1())
}

/// Overlap `<alpha|beta>` of two real coherent states.
pub fn coherent_overlap(alpha: f64, beta: f64) -> f64 {
    (-0.5 * alpha * alpha - 0.5 * beta * beta + alpha * beta).exp()
}

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`. Arguments are
/// clamped into `[0, 1]`.
pub fn binary_entropy(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}
