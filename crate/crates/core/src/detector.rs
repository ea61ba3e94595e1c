//! Click statistics of the four threshold detectors.
//!
//! Detector efficiency is already folded into the mode intensities. A
//! detector clicks when it receives at least one photon or fires a dark
//! count. Clicks are classified by the parity of the photon number that
//! caused them; a click with zero photons (dark count only) counts as
//! [`ClickParity::Even`].

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::optics::{cosh_m1, Mode, ModeIntensities};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClickParity {
    Odd,
    Even,
}

impl ClickParity {
    pub const BOTH: [ClickParity; 2] = [ClickParity::Odd, ClickParity::Even];

    pub fn of_count(photons: u64) -> Self {
        if photons % 2 == 1 {
            ClickParity::Odd
        } else {
            ClickParity::Even
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            ClickParity::Odd => 'o',
            ClickParity::Even => 'e',
        }
    }
}

/// Set of detectors that clicked in one gate, as a 4-bit mask indexed by
/// [`Mode::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ClickPattern(pub u8);

impl ClickPattern {
    pub const NONE: ClickPattern = ClickPattern(0);

    pub fn of(modes: &[Mode]) -> Self {
        ClickPattern(modes.iter().fold(0, |acc, m| acc | (1 << m.index())))
    }

    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0u8..16).map(ClickPattern)
    }

    pub fn contains(self, mode: Mode) -> bool {
        self.0 & (1 << mode.index()) != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn modes(self) -> impl Iterator<Item = Mode> {
        Mode::ALL.into_iter().filter(move |&m| self.contains(m))
    }

    pub fn with(self, mode: Mode) -> Self {
        ClickPattern(self.0 | (1 << mode.index()))
    }

    /// Swaps output ports 1 and 2 in both polarizations.
    pub fn port_swapped(self) -> Self {
        ClickPattern::of(&self.modes().map(Mode::port_swapped).collect::<Vec<_>>())
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("none");
        }
        let labels: Vec<_> = self.modes().map(Mode::label).collect();
        f.write_str(&labels.join("+"))
    }
}

fn check_intensities(ints: &ModeIntensities, p_d: f64) -> Result<()> {
    for m in Mode::ALL {
        let i = ints.get(m);
        if !i.is_finite() || i < 0.0 {
            return Err(Error::domain("intensity", i));
        }
    }
    if !(0.0..=1.0).contains(&p_d) {
        return Err(Error::domain("p_d", p_d));
    }
    Ok(())
}

/// Probability that a detector receiving mean intensity `i` clicks:
/// `1 - (1 - p_d) e^{-i}`.
pub fn click_prob(i: f64, p_d: f64) -> f64 {
    -(-i).exp_m1() + p_d * (-i).exp()
}

/// Probability that a detector stays silent: `(1 - p_d) e^{-i}`.
fn silent_prob(i: f64, p_d: f64) -> f64 {
    (1.0 - p_d) * (-i).exp()
}

/// `e^{-i} g(i)` where `g` is the click weight of the given parity
/// (`cosh i - 1 + p_d` for even, `sinh i` for odd, their sum for any).
fn weighted_click(i: f64, parity: Option<ClickParity>, p_d: f64) -> f64 {
    let even = (-i).exp() * (cosh_m1(i) + p_d);
    let odd = -0.5 * (-2.0 * i).exp_m1();
    match parity {
        Some(ClickParity::Even) => even,
        Some(ClickParity::Odd) => odd,
        None => even + odd,
    }
}

/// Probability that exactly `target` clicks, with the click caused by a
/// photon number of the given parity (`None` for either).
pub fn exclusive_single_click(
    target: Mode,
    parity: Option<ClickParity>,
    ints: &ModeIntensities,
    p_d: f64,
) -> Result<f64> {
    check_intensities(ints, p_d)?;
    let others: f64 = Mode::ALL.into_iter().filter(|&m| m != target).map(|m| silent_prob(ints.get(m), p_d)).product();
    Ok(others * weighted_click(ints.get(target), parity, p_d))
}

/// Probability that exactly the two `targets` click, with photon-number
/// parities `parities` at the first and second target respectively.
pub fn exclusive_double_click(
    targets: (Mode, Mode),
    parities: (ClickParity, ClickParity),
    ints: &ModeIntensities,
    p_d: f64,
) -> Result<f64> {
    double_click(targets, Some(parities), ints, p_d)
}

/// Probability that exactly the two `targets` click, any parities.
pub fn exclusive_double_click_any(targets: (Mode, Mode), ints: &ModeIntensities, p_d: f64) -> Result<f64> {
    double_click(targets, None, ints, p_d)
}

fn double_click(
    (x, y): (Mode, Mode),
    parities: Option<(ClickParity, ClickParity)>,
    ints: &ModeIntensities,
    p_d: f64,
) -> Result<f64> {
    if x == y {
        return Err(Error::InvalidParams(format!("double click needs distinct detectors, got {} twice", x.label())));
    }
    check_intensities(ints, p_d)?;
    let others: f64 =
        Mode::ALL.into_iter().filter(|&m| m != x && m != y).map(|m| silent_prob(ints.get(m), p_d)).product();
    let (px, py) = match parities {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    Ok(others * weighted_click(ints.get(x), px, p_d) * weighted_click(ints.get(y), py, p_d))
}

/// Probability that exactly the detectors in `pattern` click.
pub fn pattern_prob(pattern: ClickPattern, ints: &ModeIntensities, p_d: f64) -> Result<f64> {
    check_intensities(ints, p_d)?;
    Ok(Mode::ALL
        .into_iter()
        .map(|m| {
            let i = ints.get(m);
            if pattern.contains(m) {
                click_prob(i, p_d)
            } else {
                silent_prob(i, p_d)
            }
        })
        .product())
}
