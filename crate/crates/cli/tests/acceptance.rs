//! Acceptance runner: fourteen end-to-end checks, one test per criterion,
//! each printing a single `criterion N: PASS/FAIL` verdict line with the
//! measured numbers. Verdicts write to stdout directly so they survive
//! the harness capture and show up in a plain `cargo test` run.
//!
//! Criterion 6 exercises an asymptotic tail bound whose hypotheses are
//! violated at every arity this suite can enumerate; its verdict line
//! reports the measured gap honestly and the test asserts only that the
//! hypothesis violation is detected and reported.

use std::collections::HashMap;
use std::process::Command;

use rand::Rng;
use rayon::prelude::*;

use bfr_core::process::run_conditioned_with;
use bfr_core::rng::substream;
use bfr_core::{
    beta_tail, bs_exact, bs_partition_estimate, discrete_beta_tail, dt_exact, dt_naive, hc_check,
    kl_exact_small_n, kl_ledger_audit, kl_to_mean, kl_to_mean_verify, osss_check, prop51_check,
    run_controlled, scan_one, stopping_stats, tribes_survival_formula, BitPoint, BooleanFunction,
    FourierCoefficients, InfluenceKind, MultilinearFunction, PartialPoint, PiConfig, ScanMode,
    TruthTable,
};

macro_rules! verdict {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let mut line = format!($($t)*);
        line.push('\n');
        std::io::stdout().write_all(line.as_bytes()).unwrap();
    }};
}

fn random_partial(n: usize, seed: u64, k: u64) -> PartialPoint {
    let mut rng = substream(seed, k);
    let mut p = PartialPoint::all_alive(n);
    for i in 0..n {
        match rng.random_range(0..3u8) {
            1 => p.fix(i, 1),
            2 => p.fix(i, -1),
            _ => {}
        }
    }
    p
}

#[test]
fn c01_fourier_identities() {
    let mut worst_parseval = 0.0f64;
    for k in 0..100u64 {
        let n = (k as usize % 12) + 1;
        let t = TruthTable::random(n, 0.5, &mut substream(101, k)).unwrap();
        let c = FourierCoefficients::from_table(&t);
        let back = c.inverse();
        for idx in 0..t.size() as u32 {
            let want = if t.get(idx) { 1.0 } else { 0.0 };
            assert_eq!(back[idx as usize], want, "round trip must be bit-exact");
        }
        let residual = (c.total_weight() - t.ones() as f64 / t.size() as f64).abs();
        worst_parseval = worst_parseval.max(residual);
        assert!(residual <= 1e-10);
    }
    verdict!(
        "criterion 1: PASS - 100 tables (n <= 12) round-trip bit-exact, \
         worst Parseval residual {worst_parseval:.2e}"
    );
}

#[test]
fn c02_influence_bridge() {
    let mut tables: Vec<TruthTable> = (0..60u64)
        .map(|k| TruthTable::random((k as usize % 10) + 1, 0.5, &mut substream(102, k)).unwrap())
        .collect();
    for f in [
        BooleanFunction::majority(5, false).unwrap(),
        BooleanFunction::tribes(2).unwrap(),
        BooleanFunction::parity(6),
        BooleanFunction::and(5).unwrap(),
        BooleanFunction::dictator(4, 2).unwrap(),
    ] {
        tables.push(f.to_table().unwrap());
    }
    let mut checked = 0u64;
    for t in &tables {
        let f = BooleanFunction::table(t.clone());
        let c = FourierCoefficients::from_table(t);
        for i in 0..f.n() {
            // flip influence from counting, spectral from the transform.
            assert_eq!(
                f.influence_flip(i).unwrap(),
                4.0 * c.influence(i),
                "bridge must be exact (dyadic) at coordinate {i}"
            );
            checked += 1;
        }
    }
    let maj3 = BooleanFunction::majority(3, false).unwrap();
    for i in 0..3 {
        assert_eq!(maj3.influence_flip(i).unwrap(), 0.5);
    }
    verdict!(
        "criterion 2: PASS - influence_flip = 4 x spectral exactly at {checked} coordinates; \
         MAJ3 flip influence = 1/2 per coordinate"
    );
}

#[test]
fn c03_closed_forms_match_brute_force() {
    let mut funcs = vec![BooleanFunction::tribes(1).unwrap(), BooleanFunction::tribes(2).unwrap()];
    for n in [1usize, 3, 5, 7, 9, 11] {
        funcs.push(BooleanFunction::majority(n, false).unwrap());
    }
    let mut points = 0u64;
    for f in &funcs {
        let t = f.to_table().unwrap();
        for k in 0..10_000u64 {
            let p = random_partial(f.n(), 103, k);
            let (ones, total) = t.subcube_ones(&p);
            assert_eq!(
                f.cond_mean(&p),
                ones as f64 / total as f64,
                "closed form must equal the subcube count exactly"
            );
            points += 1;
        }
    }
    verdict!(
        "criterion 3: PASS - closed-form conditional means equal subcube counts \
         on {points} random partial points across {} functions",
        funcs.len()
    );
}

fn preimage(f: &BooleanFunction) -> Vec<u64> {
    let t = f.to_table().unwrap();
    (0..t.size()).filter(|&k| t.get(k as u32)).collect()
}

fn tv_to_uniform(counts: &HashMap<u64, u64>, pre: &[u64], trials: u64) -> f64 {
    let p = 1.0 / pre.len() as f64;
    let tf = trials as f64;
    let inside: f64 =
        pre.iter().map(|x| (counts.get(x).copied().unwrap_or(0) as f64 / tf - p).abs()).sum();
    let outside: f64 = counts
        .iter()
        .filter(|(x, _)| !pre.contains(*x))
        .map(|(_, c)| *c as f64 / tf)
        .sum();
    (inside + outside) / 2.0
}

#[test]
fn c04_conditioned_process_law() {
    let trials = 200_000u64;
    let mut report = Vec::new();
    for (name, f) in [
        ("maj3", BooleanFunction::majority(3, false).unwrap()),
        ("tribes2", BooleanFunction::tribes(2).unwrap()),
    ] {
        let endpoints: Vec<u64> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let run = run_conditioned_with(&f, &mut substream(104, k)).unwrap();
                run.path.last().unwrap().to_bitpoint().index()
            })
            .collect();
        let mut counts = HashMap::new();
        for x in endpoints {
            *counts.entry(x).or_insert(0u64) += 1;
        }
        let tv = tv_to_uniform(&counts, &preimage(&f), trials);
        assert!(tv <= 0.01, "{name}: TV {tv} exceeds 0.01");

        let worst_rn: f64 = (0..10_000u64)
            .into_par_iter()
            .map(|k| {
                let run = run_conditioned_with(&f, &mut substream(105, k)).unwrap();
                bfr_core::process::rn_check(&f, &run.pi, &run.path).unwrap()
            })
            .reduce(|| 0.0, f64::max);
        assert!(worst_rn <= 1e-9, "{name}: telescoping residual {worst_rn}");
        report.push(format!("{name} TV {tv:.4}, max RN residual {worst_rn:.1e}"));
    }
    verdict!(
        "criterion 4: PASS - endpoint law uniform on the preimage at 2e5 runs ({})",
        report.join("; ")
    );
}

#[test]
fn c05_controlled_process_equivalence() {
    let f = BooleanFunction::majority(7, false).unwrap();
    let trials = 200_000u64;

    // Phase-1-active parameters: the root satisfies the stopping condition,
    // so early steps genuinely mix the aggressive law.
    let eps = 3.0 / 7.0;
    let delta = 0.45;
    let runs: Vec<(u64, f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let cfg = PiConfig::new(eps, delta, 106_000_000 + k);
            let run = run_controlled(&f, &cfg).unwrap();
            (run.y_final().index(), run.max_mixture_residual, run.flagged)
        })
        .collect();
    assert_eq!(runs.iter().filter(|r| r.2).count(), 0, "no run may need clamping");
    let max_residual = runs.iter().map(|r| r.1).fold(0.0f64, f64::max);
    assert!(max_residual <= 1e-12, "mixture identity residual {max_residual}");
    let mut counts = HashMap::new();
    for (x, _, _) in &runs {
        *counts.entry(*x).or_insert(0u64) += 1;
    }
    let tv = tv_to_uniform(&counts, &preimage(&f), trials);
    assert!(tv <= 0.01, "controlled endpoint TV {tv} exceeds 0.01");

    // Flag rate at the derived default parameters.
    let defaults = bfr_core::default_parameters(0.5, 0.5, &f).unwrap();
    let flagged: u64 = (0..trials)
        .into_par_iter()
        .map(|k| {
            let cfg = PiConfig::new(defaults.epsilon, defaults.delta, 107_000_000 + k);
            run_controlled(&f, &cfg).unwrap().flagged as u64
        })
        .sum();
    let flag_rate = flagged as f64 / trials as f64;
    assert!(flag_rate < 0.01, "flag rate {flag_rate}");
    verdict!(
        "criterion 5: PASS - MAJ7: mixture residual {max_residual:.1e}, endpoint TV {tv:.4} \
         vs the conditioned law, flagged rate {flag_rate:.5} at defaults"
    );
}

#[test]
fn c06_stopping_time_tail_desk_scale() {
    let trials = 10_000u64;
    let mut lines = Vec::new();
    let mut all_pass = true;
    for (name, f, rho) in [
        ("tribes4", BooleanFunction::tribes(4).unwrap(), 0.25),
        ("maj25", BooleanFunction::majority(25, false).unwrap(), 0.2),
    ] {
        let defaults = bfr_core::default_parameters(rho, 0.5, &f).unwrap();
        let cfg = PiConfig::new(defaults.epsilon, defaults.delta, 108);
        let stats = stopping_stats(&f, &cfg, trials).unwrap();
        all_pass &= stats.bound_holds_3sigma;
        // The tail bound's hypothesis on eps vs mINF must be reported as
        // violated at these arities; that detection is the asserted part.
        assert!(
            !defaults.side_conditions.eps_ok,
            "{name}: the eps side condition cannot hold at n = {}",
            f.n()
        );
        lines.push(format!(
            "{name}: P[tau <= {}] = {:.4} vs 3 delta / f(0) = {:.4}, \
             eps condition {:.0} <= {:.2} violated",
            stats.m,
            stats.empirical,
            stats.bound,
            defaults.side_conditions.eps_lhs,
            defaults.side_conditions.eps_rhs,
        ));
    }
    let verdict = if all_pass { "PASS" } else { "FAIL" };
    verdict!(
        "criterion 6: {verdict} - Lemma-scale stopping-time tail at desk arity ({}); \
         the bound's hypotheses are unsatisfiable here and the suite records the gap",
        lines.join("; ")
    );
}

#[test]
fn c07_kl_audit() {
    // Part 1: exact chain-rule equality on admissible instances.
    let mut found = 0u64;
    let mut attempts = 0u64;
    let mut worst_gap = 0.0f64;
    let mut rng = substream(109, 0);
    while found < 100 {
        attempts += 1;
        assert!(attempts < 60_000, "admissible instances should not be this rare");
        let n = 4 + (rng.random_range(0..4u8) as usize);
        let t = TruthTable::random(n, 0.75, &mut rng).unwrap();
        let f = BooleanFunction::table(t);
        if f.mean() <= 0.0 {
            continue;
        }
        let m = 1 + rng.random_range(0..3u8) as usize;
        let mut pi: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            pi.swap(i, rng.random_range(0..=i as u32) as usize);
        }
        let controlled: Vec<usize> = (1..=m).filter(|_| rng.random_bool(0.5)).collect();
        let mut z = vec![0i8; n];
        for t_step in 1..=m {
            if !controlled.contains(&t_step) {
                z[t_step - 1] = if rng.random_bool(0.5) { 1 } else { -1 };
            }
        }
        // Enumerate every state reachable by time m and pick (eps, delta)
        // so that no branch breaks, making the decomposition provably exact.
        let mut states = vec![PartialPoint::all_alive(n)];
        let mut frontier = states.clone();
        let mut dead = false;
        for t_step in 1..=m {
            let coord = pi[t_step - 1];
            let mut next = Vec::new();
            for s in &frontier {
                let signs: &[i8] =
                    if controlled.contains(&t_step) { &[1, -1] } else { &z[t_step - 1..t_step] };
                for &sign in signs {
                    let mut child = s.clone();
                    child.fix(coord, sign);
                    if f.cond_mean(&child) <= 0.0 {
                        dead = true;
                    }
                    next.push(child);
                }
            }
            states.extend(next.iter().cloned());
            frontier = next;
        }
        if dead {
            continue;
        }
        let min_mean = states.iter().map(|s| f.cond_mean(s)).fold(f64::INFINITY, f64::min);
        let max_der = states.iter().map(|s| f.max_abs_derivative(s)).fold(0.0f64, f64::max);
        if min_mean < 0.05 {
            continue;
        }
        let delta = 0.995 * min_mean;
        let eps = if max_der == 0.0 { 0.5 } else { max_der / delta + 1e-3 };
        if eps >= 1.0 {
            continue;
        }
        let eps = eps.max(0.05);
        let report = kl_exact_small_n(&f, eps, delta, &pi, &controlled, &z, m).unwrap();
        assert!(report.decomposition_exact, "construction rules out breaking");
        let gap = (report.chain_total_bits - report.kl_bits).abs();
        assert!(gap <= 1e-9, "chain rule vs enumeration gap {gap}");
        worst_gap = worst_gap.max(gap);
        found += 1;
    }

    // Part 2: ledger bounds and the terminal term on sampled runs.
    let mut audited = 0u64;
    for (f, eps, delta) in [
        (BooleanFunction::majority(5, false).unwrap(), 0.4, 0.4),
        (BooleanFunction::tribes(2).unwrap(), 0.5, 0.2),
        (BooleanFunction::majority(7, false).unwrap(), 3.0 / 7.0, 0.45),
    ] {
        for k in 0..50u64 {
            let cfg = PiConfig::new(eps, delta, 110_000_000 + k);
            let run = run_controlled(&f, &cfg).unwrap();
            let audit = kl_ledger_audit(&run, run.m_default).unwrap();
            assert!(audit.z_range_ok, "Z_t <= eps^2 must hold entrywise");
            assert!(audit.entropy_bound_ok, "step KL <= Z_t / eps^2 must hold entrywise");
            let idx = audit.tau_prime.saturating_sub(1);
            assert_eq!(audit.terminal_kl, (1.0 / run.f_path[idx]).log2());
            audited += 1;
        }
    }
    verdict!(
        "criterion 7: PASS - chain rule = enumerated KL within 1e-9 on {found} instances \
         ({attempts} sampled, worst gap {worst_gap:.1e}); ledger bounds and terminal term \
         exact on {audited} runs"
    );
}

#[test]
fn c08_kl_to_mean() {
    let mut rng = substream(111, 0);
    let mut checked = 0u64;
    let mut special = 0u64;
    for case in 0..1000u64 {
        let n = 2 + (case % 5) as usize;
        let t = TruthTable::random(n, 0.5, &mut rng).unwrap();
        let f = BooleanFunction::table(t.clone());
        let size = 1usize << n;
        let gamma: Vec<f64> = if case % 4 == 0 && t.ones() > 0 {
            // Support inside the preimage: gamma(f) = 1, so the implication
            // becomes mu(f) >= 2^{-(KL + H(1)) / 1} = 2^-KL.
            let mut g = vec![0.0; size];
            let ones: Vec<usize> = (0..size).filter(|&k| t.get(k as u32)).collect();
            let mut total = 0.0;
            for &k in &ones {
                let w: f64 = rng.random::<f64>() + 1e-3;
                g[k] = w;
                total += w;
            }
            g.iter_mut().for_each(|w| *w /= total);
            special += 1;
            g
        } else {
            let mut g: Vec<f64> = (0..size).map(|_| rng.random::<f64>() + 1e-6).collect();
            let total: f64 = g.iter().sum();
            g.iter_mut().for_each(|w| *w /= total);
            g
        };
        let check = kl_to_mean_verify(&f, &gamma).unwrap();
        assert!(check.holds, "violation: gamma_f={} kl={} mu={}", check.gamma_f, check.kl_bits, check.mu_f);
        if (check.gamma_f - 1.0).abs() < 1e-12 {
            assert!(check.mu_f + 1e-12 >= (-check.kl_bits.max(0.0)).exp2());
        }
        checked += 1;
    }
    assert_eq!(kl_to_mean(0.0, 1.0).unwrap(), 1.0);
    assert!((kl_to_mean(1.0, 0.5).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    verdict!(
        "criterion 8: PASS - no violations over {checked} random (gamma, f) pairs \
         ({special} with gamma supported inside the preimage)"
    );
}

#[test]
fn c09_tribes_survival() {
    let trials = 100_000u64;
    let mut parts = Vec::new();
    for w in [4usize, 5] {
        let f = BooleanFunction::tribes(w).unwrap();
        let n = f.n();
        let exact = tribes_survival_formula(w, n).unwrap();
        let scan = scan_one(&f, 1.0 / w as f64, trials, 112, 0, ScanMode::Independent).unwrap();
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        let dev = (scan.p_one - exact).abs();
        assert!(
            dev <= 3.0 * se,
            "w={w}: |{} - {exact}| = {dev} > 3se = {}",
            scan.p_one,
            3.0 * se
        );
        parts.push(format!("w={w}: {:.5} vs {exact:.5} ({:.1} se)", scan.p_one, dev / se));
    }
    verdict!(
        "criterion 9: PASS - survival probability matches the closed form at 1e5 trials ({})",
        parts.join("; ")
    );
}

#[test]
fn c10_phase_transition() {
    let f = BooleanFunction::tribes(5).unwrap();
    let trials = 10_000u64;
    let w = 5.0;
    let dense = scan_one(&f, 2.0 / w, trials, 113, 0, ScanMode::Fixed).unwrap();
    let sparse = scan_one(&f, 1.0 / (4.0 * w), trials, 113, trials, ScanMode::Fixed).unwrap();
    let gap = (1.0 - dense.p_constant) - (1.0 - sparse.p_constant);
    assert!(gap >= 0.2, "nonconstant-probability gap {gap} below 0.2");
    verdict!(
        "criterion 10: PASS - tribes(5) nonconstant probability {:.4} at rho=2/w vs {:.4} \
         at rho=1/(4w), gap {gap:.4} >= 0.2",
        1.0 - dense.p_constant,
        1.0 - sparse.p_constant
    );
}

#[test]
fn c11_hypercontractivity_sweep() {
    let ticks: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();

    let exhaustive: Vec<(f64, f64)> = (0..256u32)
        .into_par_iter()
        .map(|bits| {
            let t = TruthTable::from_fn(3, |k| bits >> k & 1 == 1).unwrap();
            let f = MultilinearFunction::from_table(&t).unwrap();
            sweep_one(&f, &ticks)
        })
        .collect();

    let random: Vec<(f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let n = 2 + (k % 7) as usize;
            let f = MultilinearFunction::random(n, &mut substream(114, k)).unwrap();
            sweep_one(&f, &ticks)
        })
        .collect();

    let min_margin = exhaustive
        .iter()
        .chain(&random)
        .map(|r| r.0)
        .fold(f64::INFINITY, f64::min);
    let min_slack = exhaustive
        .iter()
        .chain(&random)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min);
    assert!(min_margin >= -1e-9, "hypercontractive margin {min_margin}");
    assert!(min_slack >= -1e-9, "Prop 5.1 slack {min_slack}");
    verdict!(
        "criterion 11: PASS - 256 exhaustive n=3 tables + 1000 random multilinear (n <= 8) \
         over the grid: min margin {min_margin:.2e}, min moment-bound slack {min_slack:.2e}"
    );
}

fn sweep_one(f: &MultilinearFunction, ticks: &[f64]) -> (f64, f64) {
    let mut min_margin = f64::INFINITY;
    for (a, &lo) in ticks.iter().enumerate() {
        for &hi in &ticks[a..] {
            min_margin = min_margin.min(hc_check(f, lo, hi).unwrap().margin);
        }
    }
    let mut min_slack = f64::INFINITY;
    for &t in ticks.iter().filter(|t| **t < 1.0) {
        let p = prop51_check(f, t).unwrap();
        min_slack = min_slack.min(p.grad_slack.min(p.min_coord_slack));
    }
    (min_margin, min_slack)
}

#[test]
fn c12_beta_tails() {
    let trials = 10_000u64;
    let mut lines = Vec::new();
    for (name, f) in [
        ("tribes4", BooleanFunction::tribes(4).unwrap()),
        ("maj25", BooleanFunction::majority(25, false).unwrap()),
    ] {
        let m_inf = f.max_influence_spectral().unwrap();
        let settings_ct = [(0.75, m_inf.powf(0.25 / 30.0) - 1e-9), (0.5, 0.3)];
        for (t, theta) in settings_ct {
            let r = beta_tail(&f, t, theta, trials, 115).unwrap();
            assert!(
                r.holds_3sigma,
                "{name} continuous (t={t}, theta={theta}): {} > {}",
                r.empirical,
                r.bound
            );
            lines.push(format!(
                "{name} t={t} th={theta:.3}: {:.4} <= {:.3}",
                r.empirical, r.bound
            ));
        }
        let settings_disc = [(0.25, 0.3), (0.5, 0.45)];
        for (eps, theta) in settings_disc {
            let r = discrete_beta_tail(&f, eps, theta, trials, 116).unwrap();
            assert!(
                r.holds_3sigma,
                "{name} discrete (eps={eps}, theta={theta}): {} > {}",
                r.empirical,
                r.bound
            );
            lines.push(format!(
                "{name} eps={eps} th={theta}: {:.4} <= {:.3}",
                r.empirical, r.bound
            ));
        }
    }
    verdict!(
        "criterion 12: PASS - empirical derivative tails within bounds at 1e4 paths ({})",
        lines.join("; ")
    );
}

#[test]
fn c13_complexity_measures() {
    for n in 1..=8usize {
        assert_eq!(dt_exact(&BooleanFunction::parity(n)).unwrap(), n);
    }
    assert_eq!(dt_exact(&BooleanFunction::majority(3, false).unwrap()).unwrap(), 3);

    // All 65536 functions at n = 4: memoized DT equals the naive solver,
    // and the OSSS inequality (flip influence) holds.
    let osss_violations: u64 = (0..65_536u32)
        .into_par_iter()
        .map(|bits| {
            let t = TruthTable::from_fn(4, |k| bits >> k & 1 == 1).unwrap();
            let f = BooleanFunction::table(t);
            let memo = dt_exact(&f).unwrap();
            assert_eq!(memo, dt_naive(&f).unwrap(), "bits = {bits:#06x}");
            let check = osss_check(&f, InfluenceKind::Flip).unwrap();
            (!check.holds) as u64
        })
        .sum();
    assert_eq!(osss_violations, 0, "OSSS must hold for every n=4 function");

    for n in [2usize, 4, 6, 8] {
        let f = BooleanFunction::parity(n);
        let x = BitPoint::random(n, &mut substream(117, n as u64));
        let (bs, cert) = bs_exact(&f, &x).unwrap();
        assert_eq!(bs, n);
        assert!(cert.blocks.iter().all(|b| b.len() == 1));
    }
    let and4 = BooleanFunction::and(4).unwrap();
    let all_true = BitPoint::from_index(4, 0b1111);
    assert_eq!(bs_exact(&and4, &all_true).unwrap().0, 4);
    let two_plus = BitPoint::from_index(4, 0b1010);
    let (bs, cert) = bs_exact(&and4, &two_plus).unwrap();
    assert_eq!((bs, cert.blocks.len()), (1, 1));
    assert_eq!(cert.blocks[0], vec![0, 2]);

    let est = bs_partition_estimate(&BooleanFunction::tribes(4).unwrap(), 8, 2000, 118).unwrap();
    assert!(est.double_count_holds);
    verdict!(
        "criterion 13: PASS - DT pins exact, memo = naive and OSSS clean on all 65536 n=4 \
         functions, parity/AND block certificates exact, partition double counting holds \
         ({:.4} <= {:.4})",
        est.double_count_lhs, est.double_count_rhs
    );
}

#[test]
fn c14_cli_determinism() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["analyze", "--fn", "tribes:w=3"],
        vec!["restrict-scan", "--fn", "tribes:w=2", "--rho", "0.2,0.5,0.8", "--trials", "400"],
        vec!["pi-run", "--fn", "maj:n=5", "--eps", "0.4", "--delta", "0.45", "--emit-path"],
        vec!["pi-stats", "--fn", "maj:n=5", "--eps", "0.4", "--delta", "0.4", "--trials", "300"],
        vec!["kl-audit", "--fn", "maj:n=5", "--eps", "0.4", "--delta", "0.4", "--exhaustive"],
        vec!["bs", "--fn", "maj:n=5", "--x", "random"],
        vec!["bs", "--fn", "tribes:w=2", "--partition", "3", "--trials", "500"],
        vec!["dt", "--fn", "tribes:w=2"],
        vec!["osss", "--fn", "maj:n=5", "--influence", "flip"],
        vec!["hc-check", "--n", "5", "--trials", "20", "--grid", "0.25"],
        vec!["prop51", "--fn", "maj:n=5", "--t", "0,0.5,0.9"],
        vec!["beta-tail", "--fn", "tribes:w=2", "--t", "0.6", "--theta", "0.25", "--trials", "400"],
        vec!["beta-tail", "--fn", "maj:n=7", "--eps", "0.3", "--theta", "0.3", "--trials", "400"],
        vec!["level1", "--fn", "tribes:w=2"],
    ];
    for args in &cases {
        let run = |threads: &str| {
            let out = Command::new(env!("CARGO_BIN_EXE_bfr"))
                .args(args)
                .args(["--seed", "7"])
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .expect("spawn bfr");
            assert!(
                out.status.code() == Some(0) || out.status.code() == Some(2),
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            let payloads: Vec<String> = String::from_utf8(out.stdout)
                .unwrap()
                .lines()
                .map(|line| {
                    let v: serde_json::Value = serde_json::from_str(line).unwrap();
                    v["payload"].to_string()
                })
                .collect();
            payloads
        };
        let a = run("4");
        let b = run("4");
        let c = run("1");
        assert_eq!(a, b, "payload drift on identical config: {args:?}");
        assert_eq!(a, c, "payload depends on worker count: {args:?}");
        assert!(!a.is_empty());
    }
    verdict!(
        "criterion 14: PASS - {} subcommand invocations byte-identical across repeats \
         and worker counts",
        cases.len()
    );
}
