//! `bfr`: experiments on Boolean functions under random restrictions.
//!
//! Every subcommand echoes its resolved configuration, stamps the crate
//! version, and emits one record per result row (JSON lines by default,
//! CSV with --format csv). Exit codes: 0 success, 1 usage error,
//! 2 a checked inequality failed -- that last one is a finding, and the
//! payload is still written.

mod record;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use bfr_core::fourier::level1_report;
use bfr_core::process::run_controlled;
use bfr_core::rng::substream;
use bfr_core::{
    beta_tail, bs_exact, bs_partition_estimate, default_parameters, discrete_beta_tail, dt_exact,
    hc_check, kl_exact_small_n, kl_ledger_audit, osss_check, prop51_check, scan, stopping_stats,
    BitPoint, BooleanFunction, FourierCoefficients, InfluenceKind, MultilinearFunction, PiConfig,
    ScanMode, TruthTable,
};
use record::Format;

#[derive(Parser)]
#[command(name = "bfr", version, about = "Boolean functions under random restrictions")]
struct Cli {
    /// Root RNG seed; trial k draws from substream (seed, k).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials for estimating subcommands.
    #[arg(long, global = true, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact summary: mean, variance, influences, monotonicity.
    Analyze {
        #[arg(long = "fn")]
        spec: String,
    },
    /// Restriction survival scan over a grid of alive fractions.
    RestrictScan {
        #[arg(long = "fn")]
        spec: String,
        /// Comma-separated alive fractions in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        /// fixed: exactly ceil(rho n) alive; indep: each alive with prob rho.
        #[arg(long, default_value = "fixed")]
        mode: String,
    },
    /// One controlled-process run with its KL ledger.
    PiRun {
        #[arg(long = "fn")]
        spec: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        /// Condition on f = 0 instead of f = 1.
        #[arg(long)]
        complement: bool,
        /// Include the full state paths in the payload.
        #[arg(long)]
        emit_path: bool,
    },
    /// Stopping-time tail and ledger statistics over many runs.
    PiStats {
        #[arg(long = "fn")]
        spec: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Derive (eps, delta) from the alive fraction rho (and --p).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Audit one run's ledger; --exhaustive adds the exact small-n oracle.
    KlAudit {
        #[arg(long = "fn")]
        spec: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        /// Ledger horizon; defaults to (1 - eps) n.
        #[arg(long)]
        m: Option<usize>,
        /// Enumerate the exact endpoint KL for this run's environment.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Block sensitivity: exact certificate, or --partition M estimate.
    Bs {
        #[arg(long = "fn")]
        spec: String,
        /// Point as a hex index, or "random".
        #[arg(long, default_value = "random")]
        x: String,
        /// Random-partition estimator with M blocks instead of exact bs.
        #[arg(long)]
        partition: Option<usize>,
    },
    /// Exact decision-tree depth.
    Dt {
        #[arg(long = "fn")]
        spec: String,
    },
    /// mINF(f) * DT(f) >= Var[f].
    Osss {
        #[arg(long = "fn")]
        spec: String,
        /// flip is the asserted form; spectral is reported as an experiment.
        #[arg(long, default_value = "flip")]
        influence: String,
    },
    /// Hypercontractive margin sweep on random multilinear functions.
    HcCheck {
        #[arg(long)]
        n: usize,
        /// Grid step for the (t, T) sweep.
        #[arg(long, default_value_t = 0.1)]
        grid: f64,
        /// All 256 Boolean tables at n = 3 instead of random functions.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Gradient and per-coordinate moment bounds at chosen times.
    Prop51 {
        #[arg(long = "fn")]
        spec: String,
        /// Comma-separated times in [0, 1).
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// Derivative tail along the revelation process
    /// (--t: continuous clock; --eps: discrete clock to (1-eps)n).
    BetaTail {
        #[arg(long = "fn")]
        spec: String,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        theta: f64,
    },
    /// Level-1 diagnostic: |grad f(0)|^2 against alpha^2 ln(e/alpha).
    Level1 {
        #[arg(long = "fn")]
        spec: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    match run(cli) {
        Ok(false) => {}
        Ok(true) => std::process::exit(2),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.downcast_ref::<bfr_core::Error>() {
                Some(bfr_core::Error::Invariant(_)) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<bool, AnyError> {
    let started = Instant::now();
    let (seed, trials) = (cli.seed, cli.trials);
    let globals = json!({ "seed": seed, "trials": trials });

    let (name, config, rows, violated): (&str, Value, Vec<Value>, bool) = match &cli.command {
        Command::Analyze { spec } => {
            let f = BooleanFunction::from_spec(spec)?;
            (
                "analyze",
                json!({ "spec": spec, "globals": globals }),
                vec![analyze_payload(&f, spec)?],
                false,
            )
        }
        Command::RestrictScan { spec, rho, mode } => {
            let f = BooleanFunction::from_spec(spec)?;
            let mode = parse_mode(mode)?;
            let results = scan(&f, rho, trials, seed, mode)?;
            let rows = results.iter().map(|r| serde_json::to_value(r)).collect::<Result<_, _>>()?;
            (
                "restrict-scan",
                json!({ "spec": spec, "rho": rho, "mode": mode_name(mode), "globals": globals }),
                rows,
                false,
            )
        }
        Command::PiRun { spec, eps, delta, complement, emit_path } => {
            let f = BooleanFunction::from_spec(spec)?;
            let mut cfg = PiConfig::new(*eps, *delta, seed);
            cfg.complement = *complement;
            let run = run_controlled(&f, &cfg)?;
            let mut payload = serde_json::to_value(&run)?;
            if !emit_path {
                let map = payload.as_object_mut().unwrap();
                map.remove("y_path");
                map.remove("x_path");
            }
            (
                "pi-run",
                json!({
                    "spec": spec, "eps": eps, "delta": delta,
                    "complement": complement, "globals": globals,
                }),
                vec![payload],
                false,
            )
        }
        Command::PiStats { spec, eps, delta, rho, p } => {
            let f = BooleanFunction::from_spec(spec)?;
            let (eps, delta, derived) = resolve_eps_delta(&f, *eps, *delta, *rho, *p)?;
            let cfg = PiConfig::new(eps, delta, seed);
            let stats = stopping_stats(&f, &cfg, trials)?;
            let bad = !stats.bound_holds_3sigma || !stats.z_range_ok || !stats.entropy_bound_ok;
            (
                "pi-stats",
                json!({
                    "spec": spec, "eps": eps, "delta": delta,
                    "derived_from": derived, "globals": globals,
                }),
                vec![serde_json::to_value(&stats)?],
                bad,
            )
        }
        Command::KlAudit { spec, eps, delta, m, exhaustive } => {
            let f = BooleanFunction::from_spec(spec)?;
            let cfg = PiConfig::new(*eps, *delta, seed);
            let run = run_controlled(&f, &cfg)?;
            let m = m.unwrap_or(run.m_default);
            let audit = kl_ledger_audit(&run, m)?;
            let mut payload = serde_json::to_value(&audit)?;
            let mut bad = !audit.z_range_ok || !audit.entropy_bound_ok;
            if *exhaustive {
                let t_set: Vec<usize> =
                    run.control_times.iter().copied().filter(|&t| t <= m).collect();
                let exact = kl_exact_small_n(&f, *eps, *delta, &run.pi, &t_set, &run.z, m)?;
                if exact.decomposition_exact
                    && (exact.chain_total_bits - exact.kl_bits).abs() > 1e-9
                {
                    bad = true;
                }
                payload
                    .as_object_mut()
                    .unwrap()
                    .insert("exact".into(), serde_json::to_value(&exact)?);
            }
            (
                "kl-audit",
                json!({
                    "spec": spec, "eps": eps, "delta": delta, "m": m,
                    "exhaustive": exhaustive, "globals": globals,
                }),
                vec![payload],
                bad,
            )
        }
        Command::Bs { spec, x, partition } => {
            let f = BooleanFunction::from_spec(spec)?;
            match partition {
                Some(m) => {
                    let est = bs_partition_estimate(&f, *m, trials, seed)?;
                    let bad = !est.double_count_holds;
                    (
                        "bs",
                        json!({ "spec": spec, "partition": m, "globals": globals }),
                        vec![serde_json::to_value(&est)?],
                        bad,
                    )
                }
                None => {
                    let point = parse_point(x, f.n(), seed)?;
                    let (bs, cert) = bs_exact(&f, &point)?;
                    let payload = json!({
                        "spec": spec,
                        "n": f.n(),
                        "x_index": point.index(),
                        "bs": bs,
                        "blocks": cert.blocks,
                        "sensitivity": bfr_core::sensitivity(&f, &point)?,
                    });
                    (
                        "bs",
                        json!({ "spec": spec, "x": x, "globals": globals }),
                        vec![payload],
                        false,
                    )
                }
            }
        }
        Command::Dt { spec } => {
            let f = BooleanFunction::from_spec(spec)?;
            let depth = dt_exact(&f)?;
            (
                "dt",
                json!({ "spec": spec, "globals": globals }),
                vec![json!({ "spec": spec, "n": f.n(), "dt": depth })],
                false,
            )
        }
        Command::Osss { spec, influence } => {
            let f = BooleanFunction::from_spec(spec)?;
            let kind = parse_influence(influence)?;
            let check = osss_check(&f, kind)?;
            let bad = kind == InfluenceKind::Flip && !check.holds;
            (
                "osss",
                json!({ "spec": spec, "influence": influence, "globals": globals }),
                vec![serde_json::to_value(&check)?],
                bad,
            )
        }
        Command::HcCheck { n, grid, exhaustive } => {
            let (payload, bad) = hc_sweep(*n, *grid, *exhaustive, trials, seed)?;
            (
                "hc-check",
                json!({
                    "n": n, "grid": grid, "exhaustive": exhaustive, "globals": globals,
                }),
                vec![payload],
                bad,
            )
        }
        Command::Prop51 { spec, t } => {
            let f = BooleanFunction::from_spec(spec)?;
            let ml = MultilinearFunction::from_boolean(&f)?;
            let mut rows = Vec::new();
            let mut bad = false;
            for &time in t {
                let check = prop51_check(&ml, time)?;
                bad |= !check.holds;
                rows.push(serde_json::to_value(&check)?);
            }
            ("prop51", json!({ "spec": spec, "t": t, "globals": globals }), rows, bad)
        }
        Command::BetaTail { spec, t, eps, theta } => {
            let f = BooleanFunction::from_spec(spec)?;
            let (payload, bad) = match (t, eps) {
                (Some(t), None) => {
                    let tail = beta_tail(&f, *t, *theta, trials, seed)?;
                    (serde_json::to_value(&tail)?, !tail.holds_3sigma)
                }
                (None, Some(eps)) => {
                    let tail = discrete_beta_tail(&f, *eps, *theta, trials, seed)?;
                    (serde_json::to_value(&tail)?, !tail.holds_3sigma)
                }
                _ => return Err("pass exactly one of --t (continuous) or --eps (discrete)".into()),
            };
            (
                "beta-tail",
                json!({ "spec": spec, "t": t, "eps": eps, "theta": theta, "globals": globals }),
                vec![payload],
                bad,
            )
        }
        Command::Level1 { spec } => {
            let f = BooleanFunction::from_spec(spec)?;
            let table = f.to_table()?;
            let coeffs = FourierCoefficients::from_table(&table);
            let report = level1_report(f.mean(), &coeffs.gradient_at_zero());
            (
                "level1",
                json!({ "spec": spec, "globals": globals }),
                vec![serde_json::to_value(&report)?],
                false,
            )
        }
    };

    record::write_records(cli.format, cli.out.as_deref(), name, &config, &rows, started)?;
    Ok(violated)
}

fn analyze_payload(f: &BooleanFunction, spec: &str) -> Result<Value, AnyError> {
    let flip = f.influences_flip()?;
    let spectral: Vec<f64> = flip.iter().map(|v| v / 4.0).collect();
    let mut payload = json!({
        "spec": spec,
        "n": f.n(),
        "mean": f.mean(),
        "variance": f.variance(),
        "is_monotone": f.is_monotone(),
        "influence_flip": flip,
        "influence_spectral": spectral,
        "m_inf_flip": f.max_influence_flip()?,
        "m_inf_spectral": f.max_influence_spectral()?,
        "avg_sensitivity": f.influences_flip()?.iter().sum::<f64>(),
    });
    if f.n() <= 16 && f.mean() > 0.0 {
        let coeffs = FourierCoefficients::from_table(&f.to_table()?);
        let report = level1_report(f.mean(), &coeffs.gradient_at_zero());
        payload
            .as_object_mut()
            .unwrap()
            .insert("level1".into(), serde_json::to_value(&report)?);
    }
    Ok(payload)
}

fn hc_sweep(
    n: usize,
    grid: f64,
    exhaustive: bool,
    trials: u64,
    seed: u64,
) -> Result<(Value, bool), AnyError> {
    if !(grid > 0.0 && grid <= 1.0) {
        return Err("grid step must lie in (0, 1]".into());
    }
    let mut ticks = Vec::new();
    let mut t = 0.0;
    while t < 1.0 - 1e-12 {
        ticks.push(t);
        t += grid;
    }
    ticks.push(1.0);

    let functions: Vec<MultilinearFunction> = if exhaustive {
        if n != 3 {
            return Err("--exhaustive sweeps all 256 tables and requires --n 3".into());
        }
        (0..256u32)
            .map(|bits| {
                let table = TruthTable::from_fn(3, |k| bits >> k & 1 == 1).unwrap();
                MultilinearFunction::from_table(&table)
            })
            .collect::<Result<_, _>>()?
    } else {
        (0..trials)
            .map(|k| MultilinearFunction::random(n, &mut substream(seed, k)))
            .collect::<Result<_, _>>()?
    };

    let mut checks = 0u64;
    let mut violations = 0u64;
    let mut min_margin = f64::INFINITY;
    let mut worst = (0usize, 0.0f64, 0.0f64);
    for (idx, f) in functions.iter().enumerate() {
        for (a, &lo) in ticks.iter().enumerate() {
            for &hi in &ticks[a..] {
                let r = hc_check(f, lo, hi)?;
                checks += 1;
                if r.margin < min_margin {
                    min_margin = r.margin;
                    worst = (idx, lo, hi);
                }
                if !r.holds {
                    violations += 1;
                }
            }
        }
    }
    let payload = json!({
        "n": n,
        "functions": functions.len(),
        "grid_step": grid,
        "exhaustive": exhaustive,
        "checks": checks,
        "violations": violations,
        "min_margin": min_margin,
        "worst_function": worst.0,
        "worst_t": worst.1,
        "worst_t_upper": worst.2,
    });
    Ok((payload, violations > 0))
}

fn resolve_eps_delta(
    f: &BooleanFunction,
    eps: Option<f64>,
    delta: Option<f64>,
    rho: Option<f64>,
    p: Option<f64>,
) -> Result<(f64, f64, Value), AnyError> {
    match (eps, delta, rho) {
        (Some(e), Some(d), None) => Ok((e, d, Value::Null)),
        (None, None, Some(r)) => {
            let defaults = default_parameters(r, p.unwrap_or(0.5), f)?;
            let echo = serde_json::to_value(&defaults)?;
            Ok((defaults.epsilon, defaults.delta, echo))
        }
        _ => Err("pass either --eps and --delta, or --rho (with optional --p)".into()),
    }
}

fn parse_mode(text: &str) -> Result<ScanMode, AnyError> {
    match text {
        "fixed" => Ok(ScanMode::Fixed),
        "indep" | "independent" => Ok(ScanMode::Independent),
        other => Err(format!("unknown mode `{other}` (expected fixed | indep)").into()),
    }
}

fn mode_name(mode: ScanMode) -> &'static str {
    match mode {
        ScanMode::Fixed => "fixed",
        ScanMode::Independent => "independent",
    }
}

fn parse_influence(text: &str) -> Result<InfluenceKind, AnyError> {
    match text {
        "flip" => Ok(InfluenceKind::Flip),
        "spectral" => Ok(InfluenceKind::Spectral),
        other => Err(format!("unknown influence `{other}` (expected flip | spectral)").into()),
    }
}

fn parse_point(text: &str, n: usize, seed: u64) -> Result<BitPoint, AnyError> {
    if text == "random" {
        return Ok(BitPoint::random(n, &mut substream(seed, 0)));
    }
    let digits = text.strip_prefix("0x").unwrap_or(text);
    let index = u64::from_str_radix(digits, 16)
        .map_err(|e| format!("--x expects a hex index or `random`: {e}"))?;
    if n < 64 && index >= 1u64 << n {
        return Err(format!("--x index {index:#x} out of range for n = {n}").into());
    }
    Ok(BitPoint::from_index(n, index))
}
