//! Round-by-round simulation of the protocol, used as an independent
//! oracle for the analytic gains and error rates.
//!
//! Each round draws both senders' bases and bits, propagates the coherent
//! amplitudes through the beam splitter, samples an independent Poisson
//! photon number per detector mode and adds dark counts. Click patterns are
//! classified into events, Charlie's bits are decoded and compared with the
//! XOR of the senders' bits.
//!
//! For the oracle, every diagonal-basis round is also mapped into the
//! reference frame used by [`crate::rates`] (phase bits 0, pairing `++` or
//! `+−`): a relative phase flip swaps output ports 1 and 2. Pattern counts
//! and photon-parity tallies are kept per pairing in that frame.
//!
//! Rounds are processed in fixed blocks of [`BLOCK_ROUNDS`]. Every block
//! owns three ChaCha streams derived from `(seed, block)`: one for the
//! physics, one for Eve's measurement and one for the announcement phase
//! (check sampling and a dishonest player's flips). Attacks therefore never
//! perturb the physical outcomes of a paired run, and the result does not
//! depend on how blocks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::attack::{ie_dual, TapParams};
use crate::detector::{ClickParity, ClickPattern};
use crate::optics::{amplitudes_in_bases, Basis, EncodingPair, Mode, ModeIntensities, PolPairing};
use crate::par;
use crate::rates::{event_definition, event_rates, pairing_intensities, term_moments, Event, Outcome, Term};
use crate::{Error, Result, SystemParams};

pub const BLOCK_ROUNDS: u64 = 1 << 16;

/// Deviation (in standard errors) tolerated by [`OracleCheck::pass`].
pub const ORACLE_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attack {
    None,
    /// Eve taps `1 - eta_t` of Alice's pulses and runs a USD measurement
    /// on announced key rounds.
    BeamSplit,
    /// Bob flips each announced bit with probability `flip`.
    DishonestBob {
        flip: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sp: SystemParams,
    pub rounds: u64,
    pub seed: u64,
    /// Probability that each sender picks the diagonal (key) basis.
    pub basis_policy: f64,
    /// Fraction of sifted diagonal-basis event rounds disclosed for checking.
    pub check_fraction: f64,
    pub attack: Attack,
    /// Worker threads: 0 for the global pool, 1 for inline execution.
    pub workers: usize,
}

impl SimConfig {
    pub fn new(sp: SystemParams, rounds: u64, seed: u64) -> Self {
        Self { sp, rounds, seed, basis_policy: 0.5, check_fraction: 1.0, attack: Attack::None, workers: 0 }
    }

    pub fn with_attack(self, attack: Attack) -> Self {
        Self { attack, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.sp.validate()?;
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.basis_policy) {
            return Err(Error::InvalidConfig(format!("basis_policy {} not in [0, 1]", self.basis_policy)));
        }
        if !(0.0..=1.0).contains(&self.check_fraction) {
            return Err(Error::InvalidConfig(format!("check_fraction {} not in [0, 1]", self.check_fraction)));
        }
        if let Attack::DishonestBob { flip } = self.attack {
            if !(0.0..=1.0).contains(&flip) {
                return Err(Error::InvalidConfig(format!("flip fraction {flip} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The six unordered detector pairs, H detectors first.
const PAIRS: [(Mode, Mode); 6] = [
    (Mode::H1, Mode::H2),
    (Mode::H1, Mode::V1),
    (Mode::H1, Mode::V2),
    (Mode::H2, Mode::V1),
    (Mode::H2, Mode::V2),
    (Mode::V1, Mode::V2),
];

fn pair_index(x: Mode, y: Mode) -> Option<(usize, bool)> {
    PAIRS.iter().enumerate().find_map(|(k, &(a, b))| {
        if (a, b) == (x, y) {
            Some((k, false))
        } else if (a, b) == (y, x) {
            Some((k, true))
        } else {
            None
        }
    })
}

/// Raw counters of one block; merged by element-wise addition.
#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    rounds: u64,
    mismatched: u64,
    x_rounds: u64,
    z_rounds: u64,
    /// Per basis (X, Z): event1, event2, event3, failure.
    outcomes: [[u64; 4]; 2],
    /// Per basis and event: key bits, wrong bits, wrong phase bits, wrong polarization bits.
    bits: [[u64; 3]; 2],
    bit_errors: [[u64; 3]; 2],
    phase_bit_errors: [[u64; 3]; 2],
    pol_bit_errors: [[u64; 3]; 2],
    pairing_rounds: [u64; 2],
    patterns: [[u64; 16]; 2],
    /// `[pairing][mode][parity]`
    single_parity: [[[u64; 2]; 4]; 2],
    /// `[pairing][pair][2 * parity_first + parity_second]`
    double_parity: [[[u64; 4]; 6]; 2],
    /// Y1 (event1) and Y2 (event2 + event3).
    check_bits: [u64; 2],
    check_errors: [u64; 2],
    eve_trials: u64,
    eve_successes: u64,
}

impl Tally {
    fn merge(&mut self, o: &Tally) {
        fn add<const N: usize>(a: &mut [u64; N], b: &[u64; N]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.rounds += o.rounds;
        self.mismatched += o.mismatched;
        self.x_rounds += o.x_rounds;
        self.z_rounds += o.z_rounds;
        for b in 0..2 {
            add(&mut self.outcomes[b], &o.outcomes[b]);
            add(&mut self.bits[b], &o.bits[b]);
            add(&mut self.bit_errors[b], &o.bit_errors[b]);
            add(&mut self.phase_bit_errors[b], &o.phase_bit_errors[b]);
            add(&mut self.pol_bit_errors[b], &o.pol_bit_errors[b]);
        }
        add(&mut self.pairing_rounds, &o.pairing_rounds);
        for p in 0..2 {
            add(&mut self.patterns[p], &o.patterns[p]);
            for m in 0..4 {
                add(&mut self.single_parity[p][m], &o.single_parity[p][m]);
            }
            for k in 0..6 {
                add(&mut self.double_parity[p][k], &o.double_parity[p][k]);
            }
        }
        add(&mut self.check_bits, &o.check_bits);
        add(&mut self.check_errors, &o.check_errors);
        self.eve_trials += o.eve_trials;
        self.eve_successes += o.eve_successes;
    }

    /// Count of a reference-frame outcome under `pairing`.
    fn outcome_count(&self, pairing: PolPairing, outcome: Outcome) -> u64 {
        let p = pairing.index();
        match outcome {
            Outcome::Single(m, None) => self.patterns[p][ClickPattern::of(&[m]).0 as usize],
            Outcome::Single(m, Some(par)) => self.single_parity[p][m.index()][par.index()],
            Outcome::Double((x, y), None) => self.patterns[p][ClickPattern::of(&[x, y]).0 as usize],
            Outcome::Double((x, y), Some((px, py))) => {
                let (k, flipped) = pair_index(x, y).expect("distinct detectors");
                let (a, b) = if flipped { (py, px) } else { (px, py) };
                self.double_parity[p][k][2 * a.index() + b.index()]
            }
        }
    }
}

/// Per-mode photon samplers for one encoding.
#[derive(Clone)]
struct Source {
    samplers: [Option<Poisson<f64>>; 4],
}

impl Source {
    fn new(ints: &ModeIntensities) -> Result<Self> {
        let mut samplers = [None, None, None, None];
        for m in Mode::ALL {
            let i = ints.get(m);
            if i > 0.0 {
                samplers[m.index()] =
                    Some(Poisson::new(i).map_err(|e| Error::InvalidParams(format!("poisson mean {i}: {e}")))?);
            }
        }
        Ok(Self { samplers })
    }

    /// Samples the clicked pattern and the photon parity at each detector.
    fn detect<R: Rng>(&self, p_d: f64, rng: &mut R) -> (ClickPattern, [ClickParity; 4]) {
        let mut pattern = ClickPattern::NONE;
        let mut parity = [ClickParity::Even; 4];
        for m in Mode::ALL {
            let photons = match &self.samplers[m.index()] {
                Some(d) => d.sample(rng) as u64,
                None => 0,
            };
            let dark = p_d > 0.0 && rng.random::<f64>() < p_d;
            if photons > 0 || dark {
                pattern = pattern.with(m);
                parity[m.index()] = ClickParity::of_count(photons);
            }
        }
        (pattern, parity)
    }
}

struct Engine {
    cfg: SimConfig,
    x_sources: Vec<Source>,
    z_sources: Vec<Source>,
    leak: f64,
}

fn block_rng(seed: u64, block: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block.wrapping_mul(3).wrapping_add(stream));
    rng
}

impl Engine {
    fn new(cfg: SimConfig) -> Result<Self> {
        let mu_arm = cfg.sp.mu_arm();
        let sources = |basis: Basis| -> Result<Vec<Source>> {
            EncodingPair::all()
                .map(|pair| Source::new(&amplitudes_in_bases(basis, basis, pair, mu_arm)?.intensities()))
                .collect()
        };
        let leak = ie_dual(TapParams::new(cfg.sp.mu, cfg.sp.eta_t())?);
        Ok(Self { x_sources: sources(Basis::X)?, z_sources: sources(Basis::Z)?, leak, cfg })
    }

    fn run_block(&self, block: u64) -> Tally {
        let cfg = &self.cfg;
        let start = block * BLOCK_ROUNDS;
        let n = BLOCK_ROUNDS.min(cfg.rounds - start);
        let mut phys = block_rng(cfg.seed, block, 0);
        let mut eve = block_rng(cfg.seed, block, 1);
        let mut announce = block_rng(cfg.seed, block, 2);
        let flip = match cfg.attack {
            Attack::DishonestBob { flip } => flip,
            _ => 0.0,
        };
        let p_d = cfg.sp.p_d;

        let mut t = Tally { rounds: n, ..Tally::default() };
        for _ in 0..n {
            let x_a = phys.random::<f64>() < cfg.basis_policy;
            let x_b = phys.random::<f64>() < cfg.basis_policy;
            let pair = EncodingPair::from_index(phys.random::<u8>() & 0x0f);
            if x_a != x_b {
                t.mismatched += 1;
                continue;
            }
            let (basis, source) = if x_a {
                t.x_rounds += 1;
                (0, &self.x_sources[pair.index() as usize])
            } else {
                t.z_rounds += 1;
                (1, &self.z_sources[pair.index() as usize])
            };
            let (pattern, parity) = source.detect(p_d, &mut phys);

            if basis == 0 {
                let pairing = pair.pairing().index();
                t.pairing_rounds[pairing] += 1;
                let swapped = pair.phase_xor() == 1;
                let canon = if swapped { pattern.port_swapped() } else { pattern };
                let canon_parity = |m: Mode| {
                    let actual = if swapped { m.port_swapped() } else { m };
                    parity[actual.index()]
                };
                t.patterns[pairing][canon.0 as usize] += 1;
                let modes: Vec<Mode> = canon.modes().collect();
                match modes.as_slice() {
                    [m] => t.single_parity[pairing][m.index()][canon_parity(*m).index()] += 1,
                    [x, y] => {
                        let (k, _) = pair_index(*x, *y).expect("distinct detectors");
                        let (a, b) = PAIRS[k];
                        t.double_parity[pairing][k][2 * canon_parity(a).index() + canon_parity(b).index()] += 1;
                    }
                    _ => {}
                }
            }

            let Some((event, c_ph, c_pol)) = Event::classify(pattern) else {
                t.outcomes[basis][3] += 1;
                continue;
            };
            let e = event.index();
            t.outcomes[basis][e] += 1;
            let ph_wrong = (c_ph != pair.phase_xor()) as u64;
            let pol_wrong = c_pol.map_or(0, |p| (p != pair.pol_xor()) as u64);
            t.bits[basis][e] += event.bits() as u64;
            t.bit_errors[basis][e] += ph_wrong + pol_wrong;
            t.phase_bit_errors[basis][e] += ph_wrong;
            t.pol_bit_errors[basis][e] += pol_wrong;

            if basis != 0 {
                continue;
            }
            if cfg.attack == Attack::BeamSplit {
                t.eve_trials += 1;
                if eve.random::<f64>() < self.leak {
                    t.eve_successes += 1;
                }
            }
            // Fixed draw pattern so that the check selection is the same
            // whatever the attack.
            let u_check = announce.random::<f64>();
            let u_ph = announce.random::<f64>();
            let u_pol = announce.random::<f64>();
            if u_check < cfg.check_fraction {
                let kb_ph = pair.kb_ph ^ (u_ph < flip) as u8;
                let kb_pol = pair.kb_pol ^ (u_pol < flip) as u8;
                let y = if event == Event::One { 0 } else { 1 };
                let wrong_ph = (c_ph != pair.ka_ph ^ kb_ph) as u64;
                let wrong_pol = c_pol.map_or(0, |p| (p != pair.ka_pol ^ kb_pol) as u64);
                t.check_bits[y] += event.bits() as u64;
                t.check_errors[y] += wrong_ph + wrong_pol;
            }
        }
        t
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub event1: u64,
    pub event2: u64,
    pub event3: u64,
    pub failure: u64,
}

impl OutcomeCounts {
    fn from(a: &[u64; 4]) -> Self {
        Self { event1: a[0], event2: a[1], event3: a[2], failure: a[3] }
    }

    pub fn total(&self) -> u64 {
        self.event1 + self.event2 + self.event3 + self.failure
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTally {
    pub event: Event,
    pub count: u64,
    /// Empirical gain per sifted round of this basis.
    pub q: f64,
    pub q_se: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub qber: Option<f64>,
    pub qber_se: Option<f64>,
    /// Error rate of the phase bit alone.
    pub qber_phase_dof: Option<f64>,
    /// Error rate of the polarization bit alone (events 2 and 3).
    pub qber_pol_dof: Option<f64>,
}

fn event_tallies(t: &Tally, basis: usize, rounds: u64) -> Vec<EventTally> {
    Event::ALL
        .into_iter()
        .map(|ev| {
            let e = ev.index();
            let count = t.outcomes[basis][e];
            let q = ratio(count, rounds).unwrap_or(0.0);
            let qber = ratio(t.bit_errors[basis][e], t.bits[basis][e]);
            EventTally {
                event: ev,
                count,
                q,
                q_se: binomial_se(q, rounds),
                bits: t.bits[basis][e],
                bit_errors: t.bit_errors[basis][e],
                qber,
                qber_se: qber.map(|p| binomial_se(p, t.bits[basis][e])),
                qber_phase_dof: ratio(t.phase_bit_errors[basis][e], count),
                qber_pol_dof: if ev == Event::One { None } else { ratio(t.pol_bit_errors[basis][e], count) },
            }
        })
        .collect()
}

/// Reference-frame counts for one polarization pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingTally {
    pub pairing: String,
    pub rounds: u64,
    /// Exact click pattern → count, keyed like `"H1+V1"`.
    pub patterns: BTreeMap<String, u64>,
    /// Single and double clicks by photon parity, keyed like `"H1+V1:o,e"`.
    pub parity: BTreeMap<String, u64>,
}

fn pairing_tallies(t: &Tally) -> Vec<PairingTally> {
    PolPairing::BOTH
        .into_iter()
        .map(|pairing| {
            let p = pairing.index();
            let patterns = ClickPattern::all().map(|pat| (pat.to_string(), t.patterns[p][pat.0 as usize])).collect();
            let mut parity = BTreeMap::new();
            for m in Mode::ALL {
                for par in ClickParity::BOTH {
                    parity
                        .insert(format!("{}:{}", m.label(), par.symbol()), t.single_parity[p][m.index()][par.index()]);
                }
            }
            for (k, (x, y)) in PAIRS.iter().enumerate() {
                for a in ClickParity::BOTH {
                    for b in ClickParity::BOTH {
                        parity.insert(
                            format!("{}+{}:{},{}", x.label(), y.label(), a.symbol(), b.symbol()),
                            t.double_parity[p][k][2 * a.index() + b.index()],
                        );
                    }
                }
            }
            PairingTally { pairing: pairing.label().to_string(), rounds: t.pairing_rounds[p], patterns, parity }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub bits: u64,
    pub errors: u64,
    pub qber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckingReport {
    /// Single-click rounds (event 1).
    pub y1: CheckTally,
    /// Double-click rounds (events 2 and 3).
    pub y2: CheckTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    pub key_rounds: u64,
    pub successes: u64,
    pub leakage: Option<f64>,
    pub leakage_se: Option<f64>,
    /// Success probability Eve's measurement was sampled with.
    pub usd_bound: f64,
}

/// Result of one simulation. Field order is the JSON order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub rounds: u64,
    pub x_rounds: u64,
    pub z_rounds: u64,
    pub mismatched_basis_rounds: u64,
    pub x_outcomes: OutcomeCounts,
    pub z_outcomes: OutcomeCounts,
    pub x_events: Vec<EventTally>,
    pub z_events: Vec<EventTally>,
    pub pairings: Vec<PairingTally>,
    pub checking: CheckingReport,
    pub eve: Option<EveReport>,
    #[serde(skip)]
    raw: Tally,
}

impl SimReport {
    fn build(cfg: SimConfig, t: Tally, leak: f64) -> Self {
        let check = |y: usize| CheckTally {
            bits: t.check_bits[y],
            errors: t.check_errors[y],
            qber: ratio(t.check_errors[y], t.check_bits[y]),
        };
        let eve = (cfg.attack == Attack::BeamSplit).then(|| {
            let leakage = ratio(t.eve_successes, t.eve_trials);
            EveReport {
                key_rounds: t.eve_trials,
                successes: t.eve_successes,
                leakage,
                leakage_se: leakage.map(|p| binomial_se(p, t.eve_trials)),
                usd_bound: leak,
            }
        });
        Self {
            config: cfg,
            rounds: t.rounds,
            x_rounds: t.x_rounds,
            z_rounds: t.z_rounds,
            mismatched_basis_rounds: t.mismatched,
            x_outcomes: OutcomeCounts::from(&t.outcomes[0]),
            z_outcomes: OutcomeCounts::from(&t.outcomes[1]),
            x_events: event_tallies(&t, 0, t.x_rounds),
            z_events: event_tallies(&t, 1, t.z_rounds),
            pairings: pairing_tallies(&t),
            checking: CheckingReport { y1: check(0), y2: check(1) },
            eve,
            raw: t,
        }
    }

    pub fn x_event(&self, event: Event) -> &EventTally {
        &self.x_events[event.index()]
    }

    /// Count of a reference-frame outcome in diagonal-basis rounds.
    pub fn outcome_count(&self, pairing: PolPairing, outcome: Outcome) -> u64 {
        self.raw.outcome_count(pairing, outcome)
    }

    /// Per-round mean of a term table evaluated on the tallies.
    pub fn empirical_moment(&self, terms: &[Term]) -> f64 {
        if self.x_rounds == 0 {
            return 0.0;
        }
        terms.iter().map(|t| t.coef * self.outcome_count(t.pairing, t.outcome) as f64).sum::<f64>()
            / self.x_rounds as f64
    }

    /// Phase error rate of an event estimated from the parity tallies.
    pub fn phase_error_rate(&self, event: Event) -> Option<f64> {
        let ev = self.x_event(event);
        if ev.count == 0 {
            return None;
        }
        let def = event_definition(event);
        Some(self.empirical_moment(&def.phase_errors) * self.x_rounds as f64 / ev.bits as f64)
    }
}

/// Runs the simulation described by `cfg`.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let engine = Engine::new(*cfg)?;
    let blocks: Vec<u64> = (0..cfg.rounds.div_ceil(BLOCK_ROUNDS)).collect();
    let tallies = par::map(&blocks, cfg.workers, |&b| engine.run_block(b))?;
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    Ok(SimReport::build(*cfg, total, engine.leak))
}

/// [`simulate`] with the beam-splitting attack active.
pub fn simulate_beam_split(cfg: &SimConfig) -> Result<SimReport> {
    if cfg.attack != Attack::BeamSplit {
        return Err(Error::InvalidConfig("simulate_beam_split needs attack = beam-split".into()));
    }
    simulate(cfg)
}

/// [`simulate`] with a dishonest Bob flipping announced bits.
pub fn simulate_dishonest_bob(cfg: &SimConfig) -> Result<SimReport> {
    if !matches!(cfg.attack, Attack::DishonestBob { .. }) {
        return Err(Error::InvalidConfig("simulate_dishonest_bob needs attack = dishonest-bob".into()));
    }
    simulate(cfg)
}

/// One empirical-vs-analytic comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub empirical: Option<f64>,
    pub analytic: f64,
    pub std_error: f64,
    /// Deviation in standard errors.
    pub z: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: String, empirical: Option<f64>, analytic: f64, deviation: f64, std_error: f64) -> Self {
        let z = if std_error > 0.0 {
            deviation / std_error
        } else if deviation.abs() < 1e-15 {
            0.0
        } else {
            f64::INFINITY.copysign(deviation)
        };
        Self { name, empirical, analytic, std_error, z, pass: z.abs() < ORACLE_SIGMAS }
    }

    fn proportion(name: String, count: u64, n: u64, p: f64) -> Self {
        let emp = ratio(count, n);
        Self::new(name, emp, p, emp.unwrap_or(p) - p, binomial_se(p, n))
    }
}

/// Compares a diagonal-basis report against the analytic formulas at the
/// same operating point. Standard errors are those of the analytic
/// (null-hypothesis) distribution.
pub fn oracle_checks(report: &SimReport) -> Result<Vec<OracleCheck>> {
    let sp = report.config.sp;
    let ints = pairing_intensities(&sp)?;
    let n = report.x_rounds;
    let nf = n.max(1) as f64;
    let mut checks = Vec::new();

    for ev in Event::ALL {
        let def = event_definition(ev);
        let tally = report.x_event(ev);
        let analytic = event_rates(ev, &sp)?;
        let bits = ev.bits() as f64;
        checks.push(OracleCheck::proportion(format!("{}.q", ev.label()), tally.count, n, analytic.q));

        // Ratio estimators E = N/(bits·Q), linearised:
        // z = (N̂ − E·bits·Q̂) / sd(W − E·bits·1{event}) with W the per-round weight.
        let q_hat = tally.count as f64 / nf;
        let mut ratio_check = |name: &str, terms: &[Term], rate: f64, n_hat: f64| -> Result<()> {
            let (m1, m2) = term_moments(terms, &ints, sp.p_d)?;
            let var = (m2 - 2.0 * rate * bits * m1 + rate * rate * bits * bits * analytic.q).max(0.0);
            let se_round = (var / nf).sqrt();
            let deviation = n_hat - rate * bits * q_hat;
            let emp = (tally.count > 0).then(|| n_hat / (bits * q_hat));
            let scale = bits * analytic.q;
            let (dev, se) = if scale > 0.0 { (deviation / scale, se_round / scale) } else { (deviation, se_round) };
            checks.push(OracleCheck::new(format!("{}.{}", ev.label(), name), emp, rate, dev, se));
            Ok(())
        };
        ratio_check("e_bit", &def.bit_errors, analytic.e_bit, tally.bit_errors as f64 / nf)?;
        ratio_check("e_ph", &def.phase_errors, analytic.e_ph, report.empirical_moment(&def.phase_errors))?;
    }

    for pairing in PolPairing::BOTH {
        let n_p = report.raw.pairing_rounds[pairing.index()];
        let ints_p = &ints[pairing.index()];
        for pattern in ClickPattern::all() {
            let p = crate::detector::pattern_prob(pattern, ints_p, sp.p_d)?;
            let count = report.raw.patterns[pairing.index()][pattern.0 as usize];
            checks.push(OracleCheck::proportion(format!("{}.pattern.{}", pairing.label(), pattern), count, n_p, p));
        }
        for m in Mode::ALL {
            for par in ClickParity::BOTH {
                let o = Outcome::Single(m, Some(par));
                let p = o.probability(ints_p, sp.p_d)?;
                let count = report.outcome_count(pairing, o);
                checks.push(OracleCheck::proportion(
                    format!("{}.parity.{}:{}", pairing.label(), m.label(), par.symbol()),
                    count,
                    n_p,
                    p,
                ));
            }
        }
        for (x, y) in PAIRS {
            for a in ClickParity::BOTH {
                for b in ClickParity::BOTH {
                    let o = Outcome::Double((x, y), Some((a, b)));
                    let p = o.probability(ints_p, sp.p_d)?;
                    let count = report.outcome_count(pairing, o);
                    checks.push(OracleCheck::proportion(
                        format!("{}.parity.{}+{}:{},{}", pairing.label(), x.label(), y.label(), a.symbol(), b.symbol()),
                        count,
                        n_p,
                        p,
                    ));
                }
            }
        }
    }

    if let Some(eve) = &report.eve {
        checks.push(OracleCheck::proportion("eve.leakage".into(), eve.successes, eve.key_rounds, eve.usd_bound));
    }
    Ok(checks)
}
