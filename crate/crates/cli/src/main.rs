//! `dualqss`: key-rate curves, intensity optimisation, maximum distances,
//! QBER thresholds and Monte-Carlo runs for dual-DOF WCP secret sharing.
//!
//! Tables are written as CSV, scalar results as JSON. Every command accepts
//! `--config FILE` (flat `key = value`) and `--out FILE`; flags override
//! the file. `DUALQSS_THREADS` sets the worker-thread count.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::ConfigFile;
use dualqss::montecarlo::{oracle_checks, simulate, Attack, SimConfig, ORACLE_SIGMAS};
use dualqss::optimize::{
    max_distance, max_distance_event, optimize_mu, qber_at_cutoff, sweep, GaParams, OptMethod, SweepSpec, SweepVar,
    DISTANCE_TOL_KM,
};
use dualqss::rates::{qber_threshold, qber_threshold_event1, Event, RatePoint};
use dualqss::SystemParams;

/// Double-click QBER threshold quoted for the protocol; not reproduced by
/// any closed form here.
const EVENT23_REPORTED: f64 = 0.0208;

#[derive(Parser, Debug)]
#[command(name = "dualqss", version, about = "Key-rate analysis of dual-DOF WCP quantum secret sharing")]
struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the result to FILE (atomically) instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate over a range of distances or intensities (CSV).
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Sweep with the leakage of all four protocols appended (CSV).
    #[command(allow_negative_numbers = true)]
    IeCompare(SweepArgs),
    /// Intensity maximising the key rate at a distance (JSON).
    #[command(allow_negative_numbers = true)]
    Optimize(OptimizeArgs),
    /// Largest distance with a positive key rate, total and per event (JSON).
    #[command(allow_negative_numbers = true)]
    MaxDistance(MaxDistanceArgs),
    /// Monte-Carlo run compared against the analytic formulas (JSON).
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// QBER thresholds (JSON).
    #[command(allow_negative_numbers = true)]
    Thresholds(ThresholdArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct PhysArgs {
    /// Mean photon number per pulse [default: 0.84]
    #[arg(long)]
    mu: Option<f64>,
    /// Total distance between the senders in km [default: 400]
    #[arg(long = "L", alias = "length")]
    length: Option<f64>,
    /// Fiber loss in dB/km [default: 0.2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Detector efficiency [default: 0.145]
    #[arg(long)]
    eta_d: Option<f64>,
    /// Dark-count probability per gate [default: 8e-8]
    #[arg(long)]
    p_d: Option<f64>,
    /// Error-correction efficiency [default: 1.15]
    #[arg(long)]
    f: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Swept variable: L or mu [default: L]
    #[arg(long)]
    var: Option<VarArg>,
    /// First grid value [default: 0]
    #[arg(long)]
    lo: Option<f64>,
    /// Last grid value [default: 500 for L, 2 for mu]
    #[arg(long)]
    hi: Option<f64>,
    /// Grid spacing [default: 1 for L, 0.01 for mu]
    #[arg(long)]
    step: Option<f64>,
    /// Append IE_dual, IE_ph, IE_pol and IE_dps columns.
    #[arg(long)]
    ie_compare: bool,
    /// Worker threads, 0 = all [default: 0]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Lower bound of the search [default: 0.01]
    #[arg(long)]
    mu_lo: Option<f64>,
    /// Upper bound of the search [default: 2]
    #[arg(long)]
    mu_hi: Option<f64>,
    /// grid, golden or genetic [default: grid]
    #[arg(long)]
    method: Option<MethodArg>,
    /// Seed of the genetic algorithm [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Genetic population size [default: 32]
    #[arg(long)]
    population: Option<usize>,
    /// Genetic generations [default: 60]
    #[arg(long)]
    generations: Option<usize>,
    /// Gaussian mutation width in photons [default: 0.05]
    #[arg(long)]
    mutation_sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct MaxDistanceArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Upper end of the distance search in km [default: 800]
    #[arg(long)]
    l_hi: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Number of pulse pairs [default: 1000000]
    #[arg(long)]
    rounds: Option<u64>,
    /// RNG seed [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Probability each sender picks the key basis [default: 0.5]
    #[arg(long)]
    basis_policy: Option<f64>,
    /// Fraction of key-basis event rounds disclosed for checking [default: 1]
    #[arg(long)]
    check_fraction: Option<f64>,
    /// none, beam-split or dishonest-bob [default: none]
    #[arg(long)]
    attack: Option<AttackArg>,
    /// Bit-flip probability of a dishonest Bob [default: 0.05]
    #[arg(long)]
    flip: Option<f64>,
    /// Worker threads, 0 = all [default: 0]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Use this leakage instead of the long-distance bound at mu.
    #[arg(long)]
    ie: Option<f64>,
    /// Upper end of the cutoff search in km [default: 800]
    #[arg(long)]
    l_hi: Option<f64>,
}

macro_rules! str_enum {
    ($name:ident { $($variant:ident => [$($s:literal),+]),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        enum $name { $($variant),+ }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim() {
                    $($($s)|+ => Ok($name::$variant),)+
                    other => Err(format!("unrecognised value {other:?}")),
                }
            }
        }
    };
}

str_enum!(VarArg { L => ["L", "l", "distance"], Mu => ["mu"] });
str_enum!(MethodArg { Grid => ["grid"], Golden => ["golden", "golden-section"], Genetic => ["genetic", "ga"] });
str_enum!(AttackArg { None => ["none"], BeamSplit => ["beam-split", "beam_split"], DishonestBob => ["dishonest-bob", "dishonest_bob"] });

fn system_params(cfg: &ConfigFile, a: &PhysArgs) -> Result<SystemParams> {
    let d = SystemParams::default();
    let sp = SystemParams {
        mu: cfg.or(a.mu, "mu", d.mu)?,
        length_km: cfg.or(a.length, "L", d.length_km)?,
        alpha: cfg.or(a.alpha, "alpha", d.alpha)?,
        eta_d: cfg.or(a.eta_d, "eta_d", d.eta_d)?,
        p_d: cfg.or(a.p_d, "p_d", d.p_d)?,
        f: cfg.or(a.f, "f", d.f)?,
    };
    sp.validate()?;
    Ok(sp)
}

fn params_json(sp: &SystemParams) -> Value {
    json!({
        "mu": sp.mu,
        "L": sp.length_km,
        "alpha": sp.alpha,
        "eta_d": sp.eta_d,
        "p_d": sp.p_d,
        "f": sp.f,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.9e}")
}

fn run_sweep(cfg: &ConfigFile, a: &SweepArgs, force_ie: bool) -> Result<String> {
    let fixed = system_params(cfg, &a.phys)?;
    let var = cfg.or(a.var, "var", VarArg::L)?;
    let (lo_d, hi_d, step_d) = match var {
        VarArg::L => (0.0, 500.0, 1.0),
        VarArg::Mu => (0.0, 2.0, 0.01),
    };
    let ie_compare = force_ie || a.ie_compare || cfg.or(None, "ie_compare", false)?;
    let spec = SweepSpec {
        variable: match var {
            VarArg::L => SweepVar::Distance,
            VarArg::Mu => SweepVar::Mu,
        },
        lo: cfg.or(a.lo, "lo", lo_d)?,
        hi: cfg.or(a.hi, "hi", hi_d)?,
        step: cfg.or(a.step, "step", step_d)?,
        fixed,
        workers: cfg.or(a.workers, "workers", 0)?,
    };
    let points = sweep(&spec)?;

    let mut out = format!(
        "# params: mu={} L={} alpha={} eta_d={} p_d={} f={} var={} lo={} hi={} step={} ie_compare={}\n",
        fixed.mu,
        fixed.length_km,
        fixed.alpha,
        fixed.eta_d,
        fixed.p_d,
        fixed.f,
        if var == VarArg::L { "L" } else { "mu" },
        spec.lo,
        spec.hi,
        spec.step,
        ie_compare
    );
    out.push_str("L_km,mu,R,R_event1,R_event2,R_event3,I_E,PLOB");
    if ie_compare {
        out.push_str(",IE_dual,IE_ph,IE_pol,IE_dps");
    }
    out.push('\n');
    for p in &points {
        out.push_str(&csv_row(p, ie_compare));
    }
    Ok(out)
}

fn csv_row(p: &RatePoint, ie_compare: bool) -> String {
    let mut cols = vec![p.length_km, p.mu, p.r, p.r_events[0], p.r_events[1], p.r_events[2], p.i_e, p.plob];
    if ie_compare {
        cols.extend([p.leakage.dual, p.leakage.wcp_ph, p.leakage.wcp_pol, p.leakage.dps_tf]);
    }
    let mut line = cols.into_iter().map(fmt).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn run_optimize(cfg: &ConfigFile, a: &OptimizeArgs) -> Result<Value> {
    let sp = system_params(cfg, &a.phys)?;
    let bounds = (cfg.or(a.mu_lo, "mu_lo", 0.01)?, cfg.or(a.mu_hi, "mu_hi", 2.0)?);
    let method = match cfg.or(a.method, "method", MethodArg::Grid)? {
        MethodArg::Grid => OptMethod::Grid,
        MethodArg::Golden => OptMethod::GoldenSection,
        MethodArg::Genetic => {
            let d = GaParams::default();
            OptMethod::Genetic(GaParams {
                population: cfg.or(a.population, "population", d.population)?,
                generations: cfg.or(a.generations, "generations", d.generations)?,
                mutation_sigma: cfg.or(a.mutation_sigma, "mutation_sigma", d.mutation_sigma)?,
                seed: cfg.or(a.seed, "seed", d.seed)?,
            })
        }
    };
    let r = optimize_mu(sp.length_km, &sp, bounds, method)?;
    let mut v = serde_json::to_value(r)?;
    v["L_km"] = json!(sp.length_km);
    v["bounds"] = json!([bounds.0, bounds.1]);
    v["params"] = params_json(&sp);
    Ok(v)
}

fn run_max_distance(cfg: &ConfigFile, a: &MaxDistanceArgs) -> Result<Value> {
    let sp = system_params(cfg, &a.phys)?;
    let l_hi = cfg.or(a.l_hi, "l_hi", 800.0)?;
    let total = max_distance(sp.mu, &sp, l_hi)?;
    let per_event = |ev| max_distance_event(ev, sp.mu, &sp, l_hi).ok();
    Ok(json!({
        "mu": sp.mu,
        "max_distance_km": total,
        "event1_km": per_event(Event::One),
        "event2_km": per_event(Event::Two),
        "event3_km": per_event(Event::Three),
        "resolution_km": DISTANCE_TOL_KM,
        "params": params_json(&sp),
    }))
}

fn run_simulate(cfg: &ConfigFile, a: &SimulateArgs) -> Result<Value> {
    let sp = system_params(cfg, &a.phys)?;
    let attack = match cfg.or(a.attack, "attack", AttackArg::None)? {
        AttackArg::None => Attack::None,
        AttackArg::BeamSplit => Attack::BeamSplit,
        AttackArg::DishonestBob => Attack::DishonestBob { flip: cfg.or(a.flip, "flip", 0.05)? },
    };
    let mut sim = SimConfig::new(sp, cfg.or(a.rounds, "rounds", 1_000_000)?, cfg.or(a.seed, "seed", 1)?);
    sim.basis_policy = cfg.or(a.basis_policy, "basis_policy", sim.basis_policy)?;
    sim.check_fraction = cfg.or(a.check_fraction, "check_fraction", sim.check_fraction)?;
    sim.workers = cfg.or(a.workers, "workers", 0)?;
    sim.attack = attack;
    let report = simulate(&sim)?;
    let checks = oracle_checks(&report)?;
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(json!({
        "report": report,
        "oracle": {
            "sigma_limit": ORACLE_SIGMAS,
            "all_within_limit": all_pass,
            "checks": checks,
        },
    }))
}

fn run_thresholds(cfg: &ConfigFile, a: &ThresholdArgs) -> Result<Value> {
    let sp = system_params(cfg, &a.phys)?;
    let l_hi = cfg.or(a.l_hi, "l_hi", 800.0)?;
    let (event1, leakage) = match cfg.pick(a.ie, "ie")? {
        Some(ie) => (qber_threshold(ie, sp.f)?, ie),
        None => {
            let tap = dualqss::attack::TapParams::new(sp.mu, 0.0)?;
            (qber_threshold_event1(&sp)?, dualqss::attack::ie_dual(tap))
        }
    };
    let cutoff = |ev| qber_at_cutoff(ev, sp.mu, &sp, l_hi).ok();
    let (c2, c3) = (cutoff(Event::Two), cutoff(Event::Three));
    Ok(json!({
        "event1": event1,
        "event1_leakage": leakage,
        "event23_paper": EVENT23_REPORTED,
        "event23_status": "unverified",
        "event2_bit_qber_at_cutoff": c2.map(|c| c.1),
        "event2_cutoff_km": c2.map(|c| c.0),
        "event3_bit_qber_at_cutoff": c3.map(|c| c.1),
        "event3_cutoff_km": c3.map(|c| c.0),
        "params": params_json(&sp),
    }))
}

/// Writes `text` to `path` via a temporary file in the same directory.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<String> {
    dualqss::par::init_global_pool()?;
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let json = |v: Value| -> Result<String> { Ok(serde_json::to_string_pretty(&v)? + "\n") };
    match &cli.command {
        Command::Sweep(a) => run_sweep(&cfg, a, false),
        Command::IeCompare(a) => run_sweep(&cfg, a, true),
        Command::Optimize(a) => json(run_optimize(&cfg, a)?),
        Command::MaxDistance(a) => json(run_max_distance(&cfg, a)?),
        Command::Simulate(a) => json(run_simulate(&cfg, a)?),
        Command::Thresholds(a) => json(run_thresholds(&cfg, a)?),
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => write_atomic(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
