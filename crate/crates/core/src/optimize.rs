//! Intensity optimisation, maximum distance search and parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::numeric::{bisect_bracket, golden_max};
use crate::par;
use crate::rates::{event_contribution, event_rates, key_rate, Event, RatePoint};
use crate::{Error, Result, SystemParams};

/// Rates below this are treated as zero.
pub const ZERO_RATE: f64 = 1e-12;

/// Resolution of [`max_distance`] in km.
pub const DISTANCE_TOL_KM: f64 = 0.1;

const GRID_POINTS: usize = 201;
const GOLDEN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    /// Standard deviation of the Gaussian mutation, in photons.
    pub mutation_sigma: f64,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self { population: 32, generations: 60, mutation_sigma: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptMethod {
    /// Uniform grid followed by golden-section refinement around the best
    /// grid point. Deterministic default.
    Grid,
    /// Golden-section search over the whole interval.
    GoldenSection,
    Genetic(GaParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Grid,
    GoldenSection,
    Genetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_mu: f64,
    pub best_rate: f64,
    pub evaluations: usize,
    pub method: MethodKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Finds the μ in `bounds` maximising the key rate at `length_km`.
/// Ties resolve to the smaller μ.
pub fn optimize_mu(length_km: f64, sp: &SystemParams, bounds: (f64, f64), method: OptMethod) -> Result<OptResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParams(format!("mu bounds ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    let base = sp.with_length(length_km);
    base.validate()?;
    let rate = |mu: f64| key_rate(&base.with_mu(mu)).map(|p| p.r).unwrap_or(f64::NEG_INFINITY);

    let (best_mu, best_rate, evaluations, seed) = match method {
        OptMethod::Grid => {
            let step = (hi - lo) / (GRID_POINTS - 1) as f64;
            let mut best = (lo, rate(lo));
            for i in 1..GRID_POINTS {
                let mu = if i == GRID_POINTS - 1 { hi } else { lo + i as f64 * step };
                let r = rate(mu);
                if r > best.1 {
                    best = (mu, r);
                }
            }
            let a = (best.0 - step).max(lo);
            let b = (best.0 + step).min(hi);
            let (x, fx, n) = golden_max(rate, a, b, GOLDEN_TOL);
            if fx > best.1 {
                best = (x, fx);
            }
            (best.0, best.1, GRID_POINTS + n, None)
        }
        OptMethod::GoldenSection => {
            let (x, fx, n) = golden_max(rate, lo, hi, GOLDEN_TOL);
            // Endpoints are never probed by the search itself.
            let candidates = [(lo, rate(lo)), (x, fx), (hi, rate(hi))];
            let mut best = candidates[0];
            for c in &candidates[1..] {
                if c.1 > best.1 {
                    best = *c;
                }
            }
            (best.0, best.1, n + 2, None)
        }
        OptMethod::Genetic(ga) => {
            let (x, fx, n) = genetic_max(rate, lo, hi, &ga)?;
            (x, fx, n, Some(ga.seed))
        }
    };
    let method = match method {
        OptMethod::Grid => MethodKind::Grid,
        OptMethod::GoldenSection => MethodKind::GoldenSection,
        OptMethod::Genetic(_) => MethodKind::Genetic,
    };
    Ok(OptResult { best_mu, best_rate, evaluations, method, seed })
}

/// Real-coded GA: binary tournaments, blend crossover, Gaussian mutation
/// and single-individual elitism.
fn genetic_max<F>(f: F, lo: f64, hi: f64, ga: &GaParams) -> Result<(f64, f64, usize)>
where
    F: Fn(f64) -> f64,
{
    if ga.population < 2 || ga.generations == 0 {
        return Err(Error::InvalidConfig("genetic search needs population >= 2 and generations >= 1".into()));
    }
    let mutation = Normal::new(0.0, ga.mutation_sigma)
        .map_err(|e| Error::InvalidConfig(format!("mutation sigma {}: {e}", ga.mutation_sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);

    let mut pop: Vec<(f64, f64)> = (0..ga.population)
        .map(|_| {
            let x = rng.random_range(lo..=hi);
            (x, f(x))
        })
        .collect();
    let mut evals = pop.len();
    let fitter = |a: &(f64, f64), b: &(f64, f64)| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);

    for _ in 0..ga.generations {
        let elite = *pop.iter().reduce(|a, b| if fitter(b, a) { b } else { a }).expect("non-empty");
        let mut next = Vec::with_capacity(pop.len());
        next.push(elite);
        while next.len() < pop.len() {
            let pick = |rng: &mut ChaCha8Rng| {
                let a = &pop[rng.random_range(0..pop.len())];
                let b = &pop[rng.random_range(0..pop.len())];
                if fitter(b, a) {
                    b.0
                } else {
                    a.0
                }
            };
            let p1 = pick(&mut rng);
            let p2 = pick(&mut rng);
            let w: f64 = rng.random();
            let x = (w * p1 + (1.0 - w) * p2 + mutation.sample(&mut rng)).clamp(lo, hi);
            next.push((x, f(x)));
            evals += 1;
        }
        pop = next;
    }
    let best = pop.into_iter().reduce(|a, b| if fitter(&b, &a) { b } else { a }).expect("non-empty");
    Ok((best.0, best.1, evals))
}

/// Largest `L` in `[0, l_hi]` with `g(L) > 0`, to [`DISTANCE_TOL_KM`].
/// Scans down from `l_hi` on a 1 km grid so that functions which are
/// negative at short range are handled, then bisects the last sign change.
fn last_positive<G>(g: G, l_hi: f64, what: &str) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if !(l_hi > 0.0 && l_hi.is_finite()) {
        return Err(Error::domain("L_hi", l_hi));
    }
    if g(l_hi) > 0.0 {
        return Err(Error::NoRoot(format!("{what} is still positive at L_hi = {l_hi} km")));
    }
    let steps = l_hi.ceil() as usize;
    let dx = l_hi / steps as f64;
    for i in (0..steps).rev() {
        let a = i as f64 * dx;
        if g(a) > 0.0 {
            let (lo, _) = bisect_bracket(&g, a, a + dx, DISTANCE_TOL_KM)?;
            return Ok(lo);
        }
    }
    Err(Error::NoRoot(format!("{what} is not positive anywhere on [0, {l_hi}] km")))
}

/// Largest total distance at which the key rate at intensity `mu` exceeds
/// [`ZERO_RATE`].
///
/// At large μ the rate can vanish at short range (multiphoton phase
/// errors) and only turn positive further out, so the search does not
/// require a positive rate at `L = 0`; it fails only when the rate is
/// zero on the whole of `[0, l_hi]`.
pub fn max_distance(mu: f64, sp: &SystemParams, l_hi: f64) -> Result<f64> {
    let base = sp.with_mu(mu);
    base.validate()?;
    let r = |l: f64| key_rate(&base.with_length(l)).map(|p| p.r).unwrap_or(0.0);
    last_positive(|l| r(l) - ZERO_RATE, l_hi, "key rate")
}

/// Largest distance at which one event's secret fraction is positive.
///
/// The sign of the unclamped contribution is used rather than
/// [`ZERO_RATE`]: double-click events yield rates near 1e-12 long before
/// their cutoff. Their secret fraction is also negative at very short
/// range, so no condition is placed on `L = 0`.
pub fn max_distance_event(event: Event, mu: f64, sp: &SystemParams, l_hi: f64) -> Result<f64> {
    let base = sp.with_mu(mu);
    base.validate()?;
    let g = |l: f64| -> f64 {
        let s = base.with_length(l);
        let Ok(rp) = key_rate(&s) else { return f64::NAN };
        event_rates(event, &s).map(|er| event_contribution(event, &er, rp.i_e, s.f)).unwrap_or(f64::NAN)
    };
    last_positive(g, l_hi, event.label())
}

/// Cutoff distance of `event` together with its bit error rate there,
/// the largest QBER at which the event still yields key.
pub fn qber_at_cutoff(event: Event, mu: f64, sp: &SystemParams, l_hi: f64) -> Result<(f64, f64)> {
    let l = max_distance_event(event, mu, sp, l_hi)?;
    let er = event_rates(event, &sp.with_mu(mu).with_length(l))?;
    Ok((l, er.e_bit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Distance,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Values of all other parameters; the swept field is overwritten.
    pub fixed: SystemParams,
    pub workers: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidConfig(format!("sweep range [{}, {}] is invalid", self.lo, self.hi)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("sweep step {} must be > 0", self.step)));
        }
        Ok(())
    }

    /// Grid values `lo + i·step`, `i = 0..=⌊(hi − lo)/step⌋`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn point(&self, v: f64) -> SystemParams {
        match self.variable {
            SweepVar::Distance => self.fixed.with_length(v),
            SweepVar::Mu => self.fixed.with_mu(v),
        }
    }
}

/// Evaluates the key rate at every grid value, in grid order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<RatePoint>> {
    spec.validate()?;
    let values = spec.values();
    for &v in values.first().into_iter().chain(values.last()) {
        spec.point(v).validate()?;
    }
    par::map(&values, spec.workers, |&v| key_rate(&spec.point(v)))?.into_iter().collect()
}

/// First distance in a distance sweep at which the key rate exceeds the
/// repeaterless bound, provided it started below it.
pub fn plob_crossing(points: &[RatePoint]) -> Option<f64> {
    let mut was_below = false;
    for p in points {
        if p.r > p.plob {
            if was_below {
                return Some(p.length_km);
            }
        } else {
            was_below = true;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_counts_and_order() {
        let spec = SweepSpec {
            variable: SweepVar::Distance,
            lo: 0.0,
            hi: 500.0,
            step: 1.0,
            fixed: SystemParams::default(),
            workers: 0,
        };
        let pts = sweep(&spec).unwrap();
        assert_eq!(pts.len(), 501);
        assert!(pts.windows(2).all(|w| w[0].length_km < w[1].length_km));
        let odd = SweepSpec { lo: 0.0, hi: 0.3, step: 0.1, variable: SweepVar::Mu, ..spec };
        assert_eq!(odd.values().len(), 4);
        let empty = SweepSpec { lo: 5.0, hi: 5.5, step: 1.0, ..spec };
        let pts = sweep(&empty).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].length_km, 5.0);
        assert!(sweep(&SweepSpec { step: 0.0, ..spec }).is_err());
        assert!(sweep(&SweepSpec { lo: 3.0, hi: 1.0, ..spec }).is_err());
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let spec = SweepSpec {
            variable: SweepVar::Mu,
            lo: 0.01,
            hi: 2.0,
            step: 0.01,
            fixed: SystemParams::default().with_length(100.0),
            workers: 1,
        };
        let a = sweep(&spec).unwrap();
        let b = sweep(&SweepSpec { workers: 4, ..spec }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_break_low() {
        // Far above the useful range every rate clamps to zero.
        let sp = SystemParams { p_d: 0.0, ..SystemParams::default() };
        for m in [OptMethod::Grid, OptMethod::GoldenSection, OptMethod::Genetic(GaParams::default())] {
            let r = optimize_mu(0.0, &sp, (60.0, 60.5), m).unwrap();
            assert_eq!(r.best_rate, 0.0);
            if m != OptMethod::Genetic(GaParams::default()) {
                assert_eq!(r.best_mu, 60.0, "{m:?}");
            }
        }
    }

    #[test]
    fn optimizer_rejects_bad_bounds() {
        let sp = SystemParams::default();
        assert!(optimize_mu(400.0, &sp, (0.0, 1.0), OptMethod::Grid).is_err());
        assert!(optimize_mu(400.0, &sp, (1.0, 0.5), OptMethod::Grid).is_err());
    }

    #[test]
    fn methods_agree() {
        let sp = SystemParams::default();
        let g = optimize_mu(300.0, &sp, (0.05, 2.0), OptMethod::Grid).unwrap();
        let s = optimize_mu(300.0, &sp, (0.05, 2.0), OptMethod::GoldenSection).unwrap();
        let ga = GaParams { seed: 7, ..GaParams::default() };
        let e = optimize_mu(300.0, &sp, (0.05, 2.0), OptMethod::Genetic(ga)).unwrap();
        assert!((g.best_rate - s.best_rate).abs() / g.best_rate < 1e-6);
        assert!((g.best_rate - e.best_rate).abs() / g.best_rate < 0.01);
        assert_eq!(e, optimize_mu(300.0, &sp, (0.05, 2.0), OptMethod::Genetic(ga)).unwrap());
        let direct = key_rate(&sp.with_length(300.0).with_mu(g.best_mu)).unwrap().r;
        assert_eq!(direct, g.best_rate);
    }

    #[test]
    fn max_distance_brackets() {
        let sp = SystemParams::default();
        let l = max_distance(0.84, &sp, 800.0).unwrap();
        let r = |l: f64| key_rate(&sp.with_length(l)).unwrap().r;
        assert!(r(l) > ZERO_RATE);
        assert!(r(l + DISTANCE_TOL_KM) <= ZERO_RATE);
        assert!(max_distance(0.84, &sp, 300.0).is_err());
        assert!(max_distance(0.0, &sp, 800.0).is_err());
        // zero at short range, positive further out
        assert_eq!(key_rate(&sp.with_mu(1.5).with_length(0.0)).unwrap().r, 0.0);
        let l15 = max_distance(1.5, &sp, 800.0).unwrap();
        assert!(l15 > 400.0 && l15 < l);
    }

    #[test]
    fn double_click_cutoff_is_shorter() {
        let sp = SystemParams::default();
        let e1 = max_distance_event(Event::One, 0.84, &sp, 800.0).unwrap();
        let e2 = max_distance_event(Event::Two, 0.84, &sp, 800.0).unwrap();
        assert!(e2 < e1);
        let (l, q) = qber_at_cutoff(Event::Two, 0.84, &sp, 800.0).unwrap();
        assert_eq!(l, e2);
        assert!(q > 0.0 && q < 0.5);
    }

    #[test]
    fn crossing_detection() {
        let spec = SweepSpec {
            variable: SweepVar::Distance,
            lo: 0.0,
            hi: 400.0,
            step: 1.0,
            fixed: SystemParams::default(),
            workers: 0,
        };
        let l = plob_crossing(&sweep(&spec).unwrap()).unwrap();
        assert!(l > 0.0 && l < 400.0);
    }
}
