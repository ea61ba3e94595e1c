//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dualqss::attack::{
    dps_intensity_threshold, dual_dof_ensemble, ie_dps_tf, ie_dual, ie_wcp_ph, usd_bound, TapParams,
};
use dualqss::detector::{exclusive_single_click, pattern_prob, ClickParity, ClickPattern};
use dualqss::montecarlo::{oracle_checks, simulate, simulate_beam_split, simulate_dishonest_bob, Attack, SimConfig};
use dualqss::optics::{poisson_even_mass, poisson_odd_mass, Mode, ModeIntensities};
use dualqss::optimize::{
    max_distance, max_distance_event, optimize_mu, plob_crossing, qber_at_cutoff, sweep, OptMethod, SweepSpec, SweepVar,
};
use dualqss::rates::{key_rate, plob_bound, qber_threshold_event1, Event};
use dualqss::SystemParams;

const L_HI: f64 = 800.0;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn reference() -> SystemParams {
    SystemParams::default()
}

fn c1_leakage() -> Outcome {
    let eta_t = reference().with_length(100.0).eta_t();
    let tp = TapParams::new(0.4, eta_t).unwrap();
    let (dps, ph, dual) = (ie_dps_tf(tp), ie_wcp_ph(tp), ie_dual(tp));
    let pass = within(dps, 0.789, 1e-3) && within(ph, 0.545, 1e-3) && within(dual, 0.399, 1e-3);
    check(pass, format!("eta_t={eta_t:.4} ie_dps={dps:.6} ie_wcp_ph={ph:.6} ie_dual={dual:.6}"))
}

fn c2_dps_threshold() -> Outcome {
    let mu = dps_intensity_threshold(reference().with_length(100.0).eta_t()).unwrap();
    check(within(mu, 0.5074, 5e-4), format!("mu={mu:.6} (target 0.5074 ± 0.0005)"))
}

fn c3_key_rates() -> Outcome {
    let r084 = key_rate(&reference()).unwrap().r;
    let r15 = key_rate(&reference().with_mu(1.5)).unwrap().r;
    let pass = within(r084 / 2.83e-6, 1.0, 0.1) && within(r15 / 1.99e-6, 1.0, 0.1);
    check(pass, format!("R(0.84,400)={r084:.4e} (2.83e-6 ± 10%) R(1.5,400)={r15:.4e} (1.99e-6 ± 10%)"))
}

fn c4_max_distances() -> Outcome {
    let sp = reference();
    let l084 = max_distance(0.84, &sp, L_HI).unwrap();
    let l15 = max_distance(1.5, &sp, L_HI).unwrap();
    let e1 = max_distance_event(Event::One, 0.84, &sp, L_HI).unwrap();
    let e2 = max_distance_event(Event::Two, 0.84, &sp, L_HI).unwrap();
    let e3 = max_distance_event(Event::Three, 0.84, &sp, L_HI).unwrap();
    let pass = within(l084, 458.3, 3.0)
        && within(l15, 441.7, 3.0)
        && within(e1, 458.3, 3.0)
        && within(e2, 434.3, 3.0)
        && within(e3, 434.3, 3.0);
    check(pass, format!("L(0.84)={l084:.1} L(1.5)={l15:.1} event1={e1:.1} event2={e2:.1} event3={e3:.1} km (± 3 km)"))
}

fn c5_optimal_mu() -> Outcome {
    let r = optimize_mu(400.0, &reference(), (0.01, 2.0), OptMethod::Grid).unwrap();
    let r084 = key_rate(&reference()).unwrap().r;
    check(
        (0.79..=0.89).contains(&r.best_mu),
        format!("best_mu={:.4} best_rate={:.5e} (R at 0.84 = {r084:.5e}) target [0.79, 0.89]", r.best_mu, r.best_rate),
    )
}

fn c6_plob() -> Outcome {
    let r = key_rate(&reference()).unwrap().r;
    let plob = plob_bound(400.0, 0.2);
    let spec =
        SweepSpec { variable: SweepVar::Distance, lo: 0.0, hi: 400.0, step: 1.0, fixed: reference(), workers: 0 };
    let crossing = plob_crossing(&sweep(&spec).unwrap());
    let pass = r > plob && within(plob, 1.4427e-8, 5e-13) && crossing.is_some_and(|l| l < 400.0);
    check(pass, format!("R(400)={r:.4e} PLOB(400)={plob:.5e} crossing at L*={crossing:?} km"))
}

fn c7_thresholds() -> Outcome {
    let e1 = qber_threshold_event1(&reference()).unwrap();
    let (l2, q2) = qber_at_cutoff(Event::Two, 0.84, &reference(), L_HI).unwrap();
    let (l3, q3) = qber_at_cutoff(Event::Three, 0.84, &reference(), L_HI).unwrap();
    check(
        within(e1, 0.0239, 5e-4),
        format!(
            "event1={e1:.6} (0.0239 ± 0.0005); event2/3 reported 0.0208 [unverified]; \
             diagnostic bit QBER at cutoff: event2={q2:.5} @ {l2:.1} km, event3={q3:.5} @ {l3:.1} km"
        ),
    )
}

fn c8_oracle() -> Outcome {
    // Seeds fixed in advance, one per configuration.
    let configs = [
        (0.4, 100.0, 8101),
        (0.4, 400.0, 8102),
        (0.84, 100.0, 8103),
        (0.84, 400.0, 8104),
        (1.5, 100.0, 8105),
        (1.5, 400.0, 8106),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (mu, l, seed) in configs {
        let t = Instant::now();
        let cfg = SimConfig::new(reference().with_mu(mu).with_length(l), 10_000_000, seed);
        let report = simulate(&cfg).unwrap();
        let checks = oracle_checks(&report).unwrap();
        let worst = checks.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs())).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        pass &= failed.is_empty();
        parts.push(format!(
            "mu={mu} L={l}: {}/{} ok, max|z|={:.2} ({}), {:.1}s{}",
            checks.len() - failed.len(),
            checks.len(),
            worst.z.abs(),
            worst.name,
            t.elapsed().as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!(" FAILED {failed:?}") }
        ));
    }
    check(pass, parts.join("; "))
}

fn c9_closed_forms() -> Outcome {
    let mut worst = [0.0f64; 4];
    for i in 0..20 {
        for j in 0..20 {
            let mu = 0.1 * (i + 1) as f64;
            let eta = j as f64 / 19.0;
            let tp = TapParams::new(mu, eta).unwrap();
            worst[0] = worst[0].max((usd_bound(&dual_dof_ensemble(tp)).unwrap() - ie_dual(tp)).abs());
        }
    }
    let p_d = 8e-8;
    for k in 0..50 {
        let x = 0.05 * k as f64;
        worst[1] =
            worst[1].max((poisson_even_mass(x).unwrap() + poisson_odd_mass(x).unwrap() - (1.0 - (-x).exp())).abs());
        let ints = ModeIntensities::from_array([x, 0.3 * x, 0.7, 0.01 * k as f64]);
        for m in Mode::ALL {
            let all = exclusive_single_click(m, None, &ints, p_d).unwrap();
            let split: f64 =
                ClickParity::BOTH.into_iter().map(|p| exclusive_single_click(m, Some(p), &ints, p_d).unwrap()).sum();
            worst[2] = worst[2].max((all - split).abs());
        }
        let total: f64 = ClickPattern::all().map(|p| pattern_prob(p, &ints, p_d).unwrap()).sum();
        worst[3] = worst[3].max((total - 1.0).abs());
    }
    check(
        worst.iter().all(|&w| w <= 1e-12),
        format!(
            "max errors: usd-vs-closed-form={:.1e} parity-partition={:.1e} single-click-parity-sum={:.1e} completeness={:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c10_attacks() -> Outcome {
    let base = SimConfig::new(reference().with_length(100.0), 4_000_000, 9101);
    let honest = simulate(&base).unwrap();
    let tapped = simulate_beam_split(&base.with_attack(Attack::BeamSplit)).unwrap();
    let unchanged = honest.x_outcomes == tapped.x_outcomes && honest.x_events == tapped.x_events;
    let eve = tapped.eve.as_ref().unwrap();
    let leak = eve.leakage.unwrap();
    let z_leak = (leak - eve.usd_bound) / ((eve.usd_bound * (1.0 - eve.usd_bound)) / eve.key_rounds as f64).sqrt();

    let bob = simulate_dishonest_bob(&base.with_attack(Attack::DishonestBob { flip: 0.05 })).unwrap();
    let threshold = qber_threshold_event1(&reference()).unwrap();
    let y1 = bob.checking.y1.qber.unwrap();
    let y2 = bob.checking.y2.qber.unwrap();
    let pass = unchanged && z_leak.abs() < 5.0 && y1 > threshold && y2 > threshold;
    check(
        pass,
        format!(
            "Q/QBER unchanged under tap: {unchanged}; leakage={leak:.5} vs ie_dual={:.5} (z={z_leak:.2}); \
             flip 0.05 checking QBER Y1={y1:.4} Y2={y2:.4} vs threshold {threshold:.4}",
            eve.usd_bound
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("leakage triple at mu=0.4, L=100 km", c1_leakage),
        ("DPS intensity threshold", c2_dps_threshold),
        ("key rate points at 400 km", c3_key_rates),
        ("maximum distances", c4_max_distances),
        ("optimal intensity at 400 km", c5_optimal_mu),
        ("PLOB crossing", c6_plob),
        ("event1 QBER threshold", c7_thresholds),
        ("Monte-Carlo oracle equivalence at 1e7 rounds", c8_oracle),
        ("closed-form cross-checks", c9_closed_forms),
        ("attack semantics", c10_attacks),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!("[{}] criterion {:>2}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
