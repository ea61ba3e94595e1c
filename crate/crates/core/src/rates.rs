//! Per-event gains and error rates, and the asymptotic key rate.
//!
//! Three detector responses yield key material:
//!
//! * Event 1: only `D1H` or only `D2H` clicks (one phase bit).
//! * Event 2: exactly `(D1H, D1V)` or `(D2H, D2V)` click (phase and
//!   polarization bit).
//! * Event 3: exactly `(D1H, D2V)` or `(D2H, D1V)` click (both bits).
//!
//! By symmetry every rate is evaluated with both phase bits 0 and the two
//! representative polarization pairings `++` and `+−`, each weighing 1/2.
//! The bookkeeping of which detector responses count as gain, bit errors
//! and phase errors lives in [`EventDefinition`] term tables; the same
//! tables are evaluated against Monte-Carlo tallies in
//! [`crate::montecarlo`].
//!
//! Gains are probabilities per emitted pulse pair. Error rates are per key
//! bit, and the rate contribution of an event is
//! `bits · Q · [1 − I_E − H(E_ph) − f·H(E_bit)]`, clamped below at zero.

use serde::{Deserialize, Serialize};

use crate::attack::{ie_dual, LeakageSet, TapParams};
use crate::detector::{
    exclusive_double_click, exclusive_double_click_any, exclusive_single_click, ClickParity, ClickPattern,
};
use crate::numeric::bisect;
use crate::optics::{binary_entropy, detector_amplitudes, Mode, ModeIntensities, PolPairing};
use crate::{Error, Result, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Event {
    One,
    Two,
    Three,
}

impl Event {
    pub const ALL: [Event; 3] = [Event::One, Event::Two, Event::Three];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Key bits Charlie extracts from one occurrence.
    pub fn bits(self) -> u32 {
        match self {
            Event::One => 1,
            Event::Two | Event::Three => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Event::One => "event1",
            Event::Two => "event2",
            Event::Three => "event3",
        }
    }

    /// Classifies a click pattern. Returns the event and Charlie's
    /// `(phase, polarization)` bits; Event 1 carries no polarization bit.
    pub fn classify(pattern: ClickPattern) -> Option<(Event, u8, Option<u8>)> {
        use Mode::*;
        let modes: Vec<Mode> = pattern.modes().collect();
        match modes.as_slice() {
            [H1] => Some((Event::One, 0, None)),
            [H2] => Some((Event::One, 1, None)),
            [H1, V1] => Some((Event::Two, 0, Some(0))),
            [H2, V2] => Some((Event::Two, 1, Some(0))),
            [H1, V2] => Some((Event::Three, 0, Some(1))),
            [H2, V1] => Some((Event::Three, 1, Some(1))),
            _ => None,
        }
    }
}

/// A detector response in the reference frame, optionally resolved by
/// photon-number parity. Double responses list the H detector first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Single(Mode, Option<ClickParity>),
    Double((Mode, Mode), Option<(ClickParity, ClickParity)>),
}

impl Outcome {
    pub fn pattern(self) -> ClickPattern {
        match self {
            Outcome::Single(m, _) => ClickPattern::of(&[m]),
            Outcome::Double((x, y), _) => ClickPattern::of(&[x, y]),
        }
    }

    pub fn probability(self, ints: &ModeIntensities, p_d: f64) -> Result<f64> {
        match self {
            Outcome::Single(m, par) => exclusive_single_click(m, par, ints, p_d),
            Outcome::Double(t, Some(par)) => exclusive_double_click(t, par, ints, p_d),
            Outcome::Double(t, None) => exclusive_double_click_any(t, ints, p_d),
        }
    }
}

/// One weighted contribution `coef · P(outcome | pairing)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub pairing: PolPairing,
    pub outcome: Outcome,
    pub coef: f64,
}

const fn term(pairing: PolPairing, outcome: Outcome, coef: f64) -> Term {
    Term { pairing, outcome, coef }
}

/// Which reference-frame responses make up an event's gain, its bit
/// errors (weighted by wrong bits) and its phase errors (weighted by the
/// number of phase flips).
#[derive(Debug, Clone, PartialEq)]
pub struct EventDefinition {
    pub event: Event,
    pub gain: Vec<Term>,
    pub bit_errors: Vec<Term>,
    pub phase_errors: Vec<Term>,
}

pub fn event_definition(event: Event) -> EventDefinition {
    use ClickParity::{Even as E, Odd as O};
    use Mode::*;
    use Outcome::{Double, Single};
    use PolPairing::{PlusMinus as PM, PlusPlus as PP};

    let dbl = |x, y, p: Option<(ClickParity, ClickParity)>| Double((x, y), p);
    match event {
        Event::One => EventDefinition {
            event,
            gain: vec![
                term(PP, Single(H1, None), 1.0),
                term(PM, Single(H1, None), 1.0),
                term(PP, Single(H2, None), 1.0),
                term(PM, Single(H2, None), 1.0),
            ],
            bit_errors: vec![term(PP, Single(H2, None), 1.0), term(PM, Single(H2, None), 1.0)],
            phase_errors: vec![term(PP, Single(H1, Some(E)), 1.0), term(PM, Single(H1, Some(E)), 1.0)],
        },
        Event::Two => EventDefinition {
            event,
            gain: vec![
                term(PP, dbl(H1, V1, None), 1.0),
                term(PM, dbl(H1, V1, None), 1.0),
                term(PP, dbl(H2, V2, None), 1.0),
                term(PM, dbl(H2, V2, None), 1.0),
            ],
            bit_errors: vec![
                term(PM, dbl(H1, V1, None), 1.0),
                term(PP, dbl(H2, V2, None), 1.0),
                term(PM, dbl(H2, V2, None), 2.0),
            ],
            phase_errors: vec![
                term(PP, dbl(H1, V1, Some((O, E))), 2.0),
                term(PP, dbl(H1, V1, Some((E, O))), 1.0),
                term(PP, dbl(H1, V1, Some((E, E))), 1.0),
                term(PM, dbl(H1, V1, Some((E, O))), 1.0),
                term(PM, dbl(H1, V1, Some((O, E))), 1.0),
                term(PP, dbl(H2, V2, Some((E, E))), 1.0),
                term(PP, dbl(H2, V2, Some((O, E))), 1.0),
            ],
        },
        Event::Three => EventDefinition {
            event,
            gain: vec![
                term(PP, dbl(H1, V2, None), 1.0),
                term(PM, dbl(H1, V2, None), 1.0),
                term(PP, dbl(H2, V1, None), 1.0),
                term(PM, dbl(H2, V1, None), 1.0),
            ],
            bit_errors: vec![
                term(PP, dbl(H1, V2, None), 1.0),
                term(PP, dbl(H2, V1, None), 2.0),
                term(PM, dbl(H2, V1, None), 1.0),
            ],
            phase_errors: vec![
                term(PP, dbl(H1, V2, Some((O, E))), 1.0),
                term(PP, dbl(H1, V2, Some((E, O))), 1.0),
                term(PM, dbl(H1, V2, Some((E, O))), 1.0),
                term(PM, dbl(H1, V2, Some((O, E))), 2.0),
                term(PM, dbl(H1, V2, Some((E, E))), 1.0),
                term(PP, dbl(H2, V1, Some((E, E))), 1.0),
                term(PP, dbl(H2, V1, Some((O, E))), 1.0),
            ],
        },
    }
}

/// Reference-frame intensities of both pairings at a given operating point.
pub fn pairing_intensities(sp: &SystemParams) -> Result<[ModeIntensities; 2]> {
    let mu_arm = sp.mu_arm();
    let pp = detector_amplitudes(PolPairing::PlusPlus.reference_pair(), mu_arm)?.intensities();
    let pm = detector_amplitudes(PolPairing::PlusMinus.reference_pair(), mu_arm)?.intensities();
    Ok([pp, pm])
}

/// First and second moments of a term table per pulse pair:
/// `(Σ w·c·P, Σ w·c²·P)` with pairing weight `w = 1/2`. The outcomes in
/// one table are mutually exclusive, so the second moment is exact.
pub fn term_moments(terms: &[Term], ints: &[ModeIntensities; 2], p_d: f64) -> Result<(f64, f64)> {
    let mut first = 0.0;
    let mut second = 0.0;
    for t in terms {
        let p = PolPairing::WEIGHT * t.outcome.probability(&ints[t.pairing.index()], p_d)?;
        first += t.coef * p;
        second += t.coef * t.coef * p;
    }
    Ok((first, second))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventRates {
    /// Probability per pulse pair that the event occurs.
    pub q: f64,
    /// Bit error rate per key bit.
    pub e_bit: f64,
    /// Phase error rate per key bit.
    pub e_ph: f64,
}

fn event_rates_for(event: Event, sp: &SystemParams) -> Result<EventRates> {
    sp.validate()?;
    let ints = pairing_intensities(sp)?;
    let def = event_definition(event);
    let (q, _) = term_moments(&def.gain, &ints, sp.p_d)?;
    if q <= 0.0 {
        return Ok(EventRates::default());
    }
    let (bit, _) = term_moments(&def.bit_errors, &ints, sp.p_d)?;
    let (ph, _) = term_moments(&def.phase_errors, &ints, sp.p_d)?;
    let key_bits = event.bits() as f64 * q;
    Ok(EventRates { q, e_bit: (bit / key_bits).clamp(0.0, 1.0), e_ph: (ph / key_bits).clamp(0.0, 1.0) })
}

pub fn event1_rates(sp: &SystemParams) -> Result<EventRates> {
    event_rates_for(Event::One, sp)
}

pub fn event2_rates(sp: &SystemParams) -> Result<EventRates> {
    event_rates_for(Event::Two, sp)
}

pub fn event3_rates(sp: &SystemParams) -> Result<EventRates> {
    event_rates_for(Event::Three, sp)
}

pub fn event_rates(event: Event, sp: &SystemParams) -> Result<EventRates> {
    event_rates_for(event, sp)
}

/// Secret fraction per key bit before weighting by the gain; may be
/// negative.
pub fn secret_fraction(er: &EventRates, i_e: f64, f: f64) -> f64 {
    1.0 - i_e - binary_entropy(er.e_ph) - f * binary_entropy(er.e_bit)
}

/// Unclamped key-rate contribution of one event, in bits per pulse pair.
pub fn event_contribution(event: Event, er: &EventRates, i_e: f64, f: f64) -> f64 {
    event.bits() as f64 * er.q * secret_fraction(er, i_e, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub length_km: f64,
    pub mu: f64,
    /// Key rate in bits per pulse pair.
    pub r: f64,
    /// Leakage used in the rate (dual-DOF protocol).
    pub i_e: f64,
    pub events: [EventRates; 3],
    /// Clamped per-event contributions; they sum to `r`.
    pub r_events: [f64; 3],
    pub leakage: LeakageSet,
    pub plob: f64,
}

/// Key rate at `sp` with the dual-DOF leakage bound.
pub fn key_rate(sp: &SystemParams) -> Result<RatePoint> {
    sp.validate()?;
    let tap = TapParams::new(sp.mu, sp.eta_t())?;
    key_rate_with_leakage(sp, ie_dual(tap))
}

/// Key rate at `sp` with an externally supplied leakage `i_e`.
pub fn key_rate_with_leakage(sp: &SystemParams, i_e: f64) -> Result<RatePoint> {
    sp.validate()?;
    if !(0.0..=1.0).contains(&i_e) {
        return Err(Error::domain("i_e", i_e));
    }
    let tap = TapParams::new(sp.mu, sp.eta_t())?;
    let mut events = [EventRates::default(); 3];
    let mut r_events = [0.0; 3];
    for ev in Event::ALL {
        let er = event_rates_for(ev, sp)?;
        events[ev.index()] = er;
        r_events[ev.index()] = event_contribution(ev, &er, i_e, sp.f).max(0.0);
    }
    Ok(RatePoint {
        length_km: sp.length_km,
        mu: sp.mu,
        r: r_events.iter().sum(),
        i_e,
        events,
        r_events,
        leakage: LeakageSet::at(tap),
        plob: plob_bound(sp.length_km, sp.alpha),
    })
}

/// Repeaterless secret-key capacity `−log2(1 − η)` of a fiber of length
/// `length_km`, with `η = 10^{−αL/10}`. Infinite at zero loss.
pub fn plob_bound(length_km: f64, alpha: f64) -> f64 {
    let ln_eta = -alpha * length_km / 10.0 * std::f64::consts::LN_10;
    if ln_eta >= 0.0 {
        return f64::INFINITY;
    }
    -(-ln_eta.exp()).ln_1p() / std::f64::consts::LN_2
}

/// Error rate `e` at which `(1 + f)·H(e) = 1 − i_e`, i.e. the QBER beyond
/// which a single-click key bit with equal bit and phase error rates
/// stops contributing.
pub fn qber_threshold(i_e: f64, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&i_e) {
        return Err(Error::domain("i_e", i_e));
    }
    let budget = 1.0 - i_e;
    if budget <= 0.0 {
        return Err(Error::NoRoot("leakage leaves no room for error correction".into()));
    }
    if budget >= 1.0 + f {
        return Err(Error::NoRoot(format!("(1 + f)·H(e) = {budget} has no root below e = 0.5")));
    }
    bisect(|e| budget - (1.0 + f) * binary_entropy(e), 0.0, 0.5, 1e-14)
}

/// Event 1 QBER threshold at `sp.mu`, taking the long-distance leakage
/// (`eta_t → 0`).
pub fn qber_threshold_event1(sp: &SystemParams) -> Result<f64> {
    sp.validate()?;
    let tap = TapParams::new(sp.mu, 0.0)?;
    qber_threshold(ie_dual(tap), sp.f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn classify_patterns() {
        use Mode::*;
        assert_eq!(Event::classify(ClickPattern::of(&[H2])), Some((Event::One, 1, None)));
        assert_eq!(Event::classify(ClickPattern::of(&[V1])), None);
        assert_eq!(Event::classify(ClickPattern::of(&[V1, H2])), Some((Event::Three, 1, Some(1))));
        assert_eq!(Event::classify(ClickPattern::of(&[H1, H2])), None);
        assert_eq!(Event::classify(ClickPattern::of(&[H1, H2, V1])), None);
        assert_eq!(Event::classify(ClickPattern::NONE), None);
    }

    #[test]
    fn no_light_no_gain() {
        let sp = SystemParams { mu: 0.0, p_d: 0.0, ..reference() };
        for ev in Event::ALL {
            assert_eq!(event_rates(ev, &sp).unwrap().q, 0.0);
        }
    }

    #[test]
    fn gain_terms_cover_the_event_patterns() {
        for ev in Event::ALL {
            let def = event_definition(ev);
            for pairing in PolPairing::BOTH {
                let mut pats: Vec<_> =
                    def.gain.iter().filter(|t| t.pairing == pairing).map(|t| t.outcome.pattern()).collect();
                pats.sort();
                let mut want: Vec<_> =
                    ClickPattern::all().filter(|&p| Event::classify(p).map(|c| c.0) == Some(ev)).collect();
                want.sort();
                assert_eq!(pats, want);
            }
        }
    }

    #[test]
    fn bit_error_terms_agree_with_bit_comparison() {
        // Wrong bits for each reference-frame response, from Charlie's
        // decoding against the true XOR of the encodings.
        for ev in Event::ALL {
            let def = event_definition(ev);
            for pairing in PolPairing::BOTH {
                let truth_pol = pairing.reference_pair().pol_xor();
                for pattern in ClickPattern::all() {
                    let Some((e, ph, pol)) = Event::classify(pattern) else { continue };
                    if e != ev {
                        continue;
                    }
                    let wrong = (ph != 0) as u32 + pol.map_or(0, |p| (p != truth_pol) as u32);
                    let coef: f64 = def
                        .bit_errors
                        .iter()
                        .filter(|t| t.pairing == pairing && t.outcome.pattern() == pattern)
                        .map(|t| t.coef)
                        .sum();
                    assert_eq!(coef, wrong as f64, "{ev:?} {pairing:?} {pattern}");
                }
            }
        }
    }

    #[test]
    fn phase_error_with_no_dark_counts_is_even_mass_ratio() {
        let sp = SystemParams { p_d: 0.0, ..reference().with_length(50.0) };
        let er = event1_rates(&sp).unwrap();
        let i = sp.mu_arm();
        // With p_d = 0 the clicking detector sees `i` in both pairings,
        // and the other lit detector (V1 or V2) must stay dark.
        let expect = (-i).exp() * (i.cosh() - 1.0) / (1.0 - (-i).exp());
        assert!((er.e_ph - expect).abs() < 1e-12);
        assert!(er.e_bit.abs() < 1e-15);
    }

    #[test]
    fn reference_key_rates() {
        let r = key_rate(&reference()).unwrap();
        assert!((r.r - 2.83e-6).abs() / 2.83e-6 < 0.1, "{}", r.r);
        let r15 = key_rate(&reference().with_mu(1.5)).unwrap();
        assert!((r15.r - 1.99e-6).abs() / 1.99e-6 < 0.1, "{}", r15.r);
        assert!((r.r - r.r_events.iter().sum::<f64>()).abs() < 1e-20);
    }

    #[test]
    fn full_leakage_kills_the_rate() {
        let r = key_rate_with_leakage(&reference().with_length(50.0), 1.0).unwrap();
        assert_eq!(r.r, 0.0);
        assert!(r.r_events.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn plob_values() {
        assert_eq!(plob_bound(0.0, 0.2), f64::INFINITY);
        let p = plob_bound(400.0, 0.2);
        assert!((p - 1.442_695_048_102_4e-8).abs() < 1e-18, "{p:e}");
        let mut prev = f64::INFINITY;
        for l in (1..=600).step_by(7) {
            let v = plob_bound(l as f64, 0.2);
            assert!(v < prev && v.is_finite());
            prev = v;
        }
    }

    #[test]
    fn thresholds() {
        let e1 = qber_threshold_event1(&reference()).unwrap();
        assert!((e1 - 0.0239).abs() < 5e-4, "{e1}");
        let e = qber_threshold(0.0, 1.0).unwrap();
        assert!((binary_entropy(e) - 0.5).abs() < 1e-12);
        assert!((e - 0.1100).abs() < 1e-4);
        assert!(qber_threshold(0.9999, 1.15).unwrap() < 1e-3);
        assert!(qber_threshold(1.0, 1.15).is_err());
        // μ = 0: no leakage, (1+f)H(e) = 1
        let e0 = qber_threshold_event1(&reference().with_mu(0.0)).unwrap();
        assert!(((1.0 + 1.15) * binary_entropy(e0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rates_stay_in_range_over_distance() {
        for l in (0..=600).step_by(25) {
            let rp = key_rate(&reference().with_length(l as f64)).unwrap();
            assert!(rp.r >= 0.0);
            for er in rp.events {
                assert!(er.q >= 0.0 && (0.0..=1.0).contains(&er.e_bit) && (0.0..=1.0).contains(&er.e_ph));
            }
        }
    }
}
