//! The three revelation processes on a Boolean function f with f(0) > 0,
//! where f(y) denotes the conditional mean at a partially revealed point.
//!
//! Uniform: coordinates are revealed in a random order pi and set by fair
//! coins; f(X(t)) is a martingale.
//!
//! Conditioned (Q): each revealed sign is biased by the Q law
//! P[+1] = 1/2 + d_i f(y)/(2 f(y)), which is exactly the uniform law
//! conditioned on ending in f^{-1}(1); the endpoint is uniform on the
//! preimage.
//!
//! Controlled (Pi): an environment draws the order pi, a control set T
//! (each time controlled independently with probability epsilon) and signs
//! z for uncontrolled times. Phase 1 plays the amplified law
//! P[+1] = 1/2 + d/(2 eps f) at controlled times and z elsewhere, until the
//! breaking condition fires at the first t (t = 0 included) with
//! max_i |d_i f(Y(t))| > eps*delta or f(Y(t)) < delta; from then on every
//! step follows Q. While the condition holds, |d| <= eps*f, so the
//! amplified probabilities are valid and the marginal law of each step is
//! exactly Q:
//!     (1-eps)/2 + eps*(1/2 + d/(2 eps f)) = 1/2 + d/(2 f).
//! Checking the condition at Y(0) before the first step matters: a state
//! that already violates it can have one-step children of zero mean, which
//! only the Q law is guaranteed to avoid.
//!
//! The KL accounting (per-step ledger, stopping-time statistics, the exact
//! small-n oracle, and the KL-to-mean bound) lives here too. All KL values
//! and entropies are in bits; natural logs appear only inside reported
//! reference bounds and are converted explicitly.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::bits::{BitPoint, PartialPoint};
use crate::error::{Error, Result};
use crate::family::BooleanFunction;
use crate::fourier::binary_entropy;
use crate::rng::{root, substream};

/// Slack for "integral" and probability-band checks.
const BAND: f64 = 1e-12;

fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if !(-BAND..=1.0 + BAND).contains(&p) {
        return Err(Error::Invariant(format!("{what} probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The Q step law at an alive coordinate: (P[+1], P[-1]).
pub fn step_distribution_q(
    f: &BooleanFunction,
    y: &PartialPoint,
    i: usize,
) -> Result<(f64, f64)> {
    let mean = f.cond_mean(y);
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let d = f.cond_derivative(y, i)?;
    let p_plus = clamp_probability(0.5 + d / (2.0 * mean), "conditioned step")?;
    Ok((p_plus, 1.0 - p_plus))
}

fn draw_sign<R: Rng>(rng: &mut R, p_plus: f64) -> i8 {
    if rng.random::<f64>() < p_plus {
        1
    } else {
        -1
    }
}

fn uniform_sign<R: Rng>(rng: &mut R) -> i8 {
    if rng.random_bool(0.5) {
        -1
    } else {
        1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformRun {
    pub pi: Vec<usize>,
    /// States X(0)..X(n).
    pub path: Vec<PartialPoint>,
}

pub fn run_uniform_with<R: Rng>(n: usize, rng: &mut R) -> UniformRun {
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    let mut state = PartialPoint::all_alive(n);
    let mut path = Vec::with_capacity(n + 1);
    path.push(state.clone());
    for &i in &pi {
        state.fix(i, uniform_sign(rng));
        path.push(state.clone());
    }
    UniformRun { pi, path }
}

pub fn run_uniform(f: &BooleanFunction, seed: u64) -> UniformRun {
    run_uniform_with(f.n(), &mut root(seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionedRun {
    pub pi: Vec<usize>,
    /// States Y(0)..Y(n); the endpoint is uniform on f^{-1}(1).
    pub path: Vec<PartialPoint>,
}

pub fn run_conditioned_with<R: Rng>(
    f: &BooleanFunction,
    rng: &mut R,
) -> Result<ConditionedRun> {
    if f.mean() == 0.0 {
        return Err(Error::ZeroMean);
    }
    let n = f.n();
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    let mut state = PartialPoint::all_alive(n);
    let mut path = Vec::with_capacity(n + 1);
    path.push(state.clone());
    for &i in &pi {
        let (p_plus, _) = step_distribution_q(f, &state, i)?;
        state.fix(i, draw_sign(rng, p_plus));
        path.push(state.clone());
    }
    Ok(ConditionedRun { pi, path })
}

pub fn run_conditioned(f: &BooleanFunction, seed: u64) -> Result<ConditionedRun> {
    run_conditioned_with(f, &mut root(seed))
}

/// Telescoping check of the change-of-measure product along a Q path
/// prefix: prod_t (1 + y_{pi(t)} d f / f) at the prior states equals
/// f(end)/f(start). Returns the absolute residual.
pub fn rn_check(f: &BooleanFunction, pi: &[usize], path: &[PartialPoint]) -> Result<f64> {
    assert!(!path.is_empty(), "path must contain the starting state");
    let steps = path.len() - 1;
    let mut product = 1.0;
    for t in 0..steps {
        let prev = &path[t];
        let mean = f.cond_mean(prev);
        if mean == 0.0 {
            return Err(Error::ZeroMean);
        }
        let i = pi[t];
        let d = f.derivative_at(prev, i);
        let sign = path[t + 1].state(i);
        assert!(sign != 0, "step {t} did not fix coordinate {i}");
        product *= 1.0 + sign as f64 * d / mean;
    }
    let start = f.cond_mean(&path[0]);
    if start == 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok((product - f.cond_mean(&path[steps]) / start).abs())
}

// ════════════════════════════════════════════════════════════════════
// Procedure Pi
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct PiConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Run against 1 - f instead of f.
    pub complement: bool,
    pub seed: u64,
}

impl PiConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        PiConfig { epsilon, delta, complement: false, seed }
    }

    /// Resolves the target function and validates (epsilon, delta) against
    /// it; returns the target and the integer eps*n.
    pub fn resolve(&self, f: &BooleanFunction) -> Result<(BooleanFunction, usize)> {
        let n = f.n();
        if !(0.0 < self.epsilon && self.epsilon < 1.0) {
            return Err(Error::BadParameter {
                name: "epsilon",
                value: self.epsilon,
                reason: "must lie in (0, 1)".into(),
            });
        }
        let en = self.epsilon * n as f64;
        if (en - en.round()).abs() > 1e-9 || en.round() < 1.0 {
            return Err(Error::BadParameter {
                name: "epsilon",
                value: self.epsilon,
                reason: format!("epsilon * n = {en} is not a positive integer"),
            });
        }
        let target =
            if self.complement { f.clone().negated() } else { f.clone() };
        let f0 = target.mean();
        if f0 == 0.0 {
            return Err(Error::ZeroMean);
        }
        if self.delta <= 0.0 || self.delta > f0 {
            return Err(Error::BadParameter {
                name: "delta",
                value: self.delta,
                reason: format!("must lie in (0, f(0)] with f(0) = {f0}"),
            });
        }
        Ok((target, en.round() as usize))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KLLedgerEntry {
    /// Step index, 1-based.
    pub t: usize,
    pub controlled: bool,
    /// d_{pi(t)} f(Y(t-1)) / f(Y(t-1)).
    pub ratio: f64,
    /// 1 - H(1/2 + ratio/(2 eps)) in bits at controlled pre-break steps,
    /// else 0 (beyond the stopping time the amplified law is not in play).
    pub step_kl: f64,
    /// ratio^2 gated by {t in T} and {t < tau'} at the run's default m.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PiRun {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub complement: bool,
    pub seed: u64,
    /// Default ledger horizon m = (1 - eps) n.
    pub m_default: usize,
    /// pi[t-1] is the coordinate revealed at step t.
    pub pi: Vec<usize>,
    /// Controlled times, 1-based, ascending.
    pub control_times: Vec<usize>,
    /// z[t-1] is the environment sign at uncontrolled time t (0 at
    /// controlled times).
    pub z: Vec<i8>,
    /// First t in 0..=n whose state violates each piece of the breaking
    /// condition; n+1 means it never fired. tau = min(tau1, tau2, n+1).
    pub tau: usize,
    pub tau1: usize,
    pub tau2: usize,
    /// True if an amplified-step probability needed clamping (unreachable
    /// while the pre-break guarantee |d| <= eps f holds).
    pub flagged: bool,
    pub max_mixture_residual: f64,
    /// f(Y(t)) for t = 0..n.
    pub f_path: Vec<f64>,
    /// log2(1/f(Y(tau'-1))) at the default m, the tail term of the ledger.
    pub terminal_kl: f64,
    pub ledger: Vec<KLLedgerEntry>,
    pub y_path: Vec<PartialPoint>,
    pub x_path: Vec<PartialPoint>,
}

impl PiRun {
    pub fn y_final(&self) -> BitPoint {
        self.y_path.last().unwrap().to_bitpoint()
    }

    pub fn x_final(&self) -> BitPoint {
        self.x_path.last().unwrap().to_bitpoint()
    }
}

const NEVER: usize = usize::MAX;

struct CoreRun {
    pi: Vec<usize>,
    control: Vec<bool>,
    z: Vec<i8>,
    tau1: usize,
    tau2: usize,
    flagged: bool,
    max_mixture_residual: f64,
    f_path: Vec<f64>,
    ratios: Vec<f64>,
    step_kls: Vec<f64>,
    y_path: Vec<PartialPoint>,
    x_path: Vec<PartialPoint>,
}

impl CoreRun {
    fn tau(&self, n: usize) -> usize {
        self.tau1.min(self.tau2).min(n + 1)
    }
}

fn run_core<R: Rng>(
    f: &BooleanFunction,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
    store_paths: bool,
) -> CoreRun {
    let n = f.n();
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    let control: Vec<bool> = (0..n).map(|_| rng.random_bool(epsilon)).collect();
    let z: Vec<i8> = control
        .iter()
        .map(|&c| if c { 0 } else { uniform_sign(rng) })
        .collect();

    let mut state = PartialPoint::all_alive(n);
    let mut f_path = Vec::with_capacity(n + 1);
    let mut ratios = Vec::with_capacity(n);
    let mut step_kls = Vec::with_capacity(n);
    let mut y_path = Vec::new();
    let mut x_path = Vec::new();
    let mut x_state = PartialPoint::all_alive(n);
    if store_paths {
        y_path.push(state.clone());
        x_path.push(x_state.clone());
    }

    let mut tau1 = NEVER;
    let mut tau2 = NEVER;
    let threshold = epsilon * delta;
    let check = |state: &PartialPoint, mean: f64, t: usize, tau1: &mut usize, tau2: &mut usize| {
        if *tau1 == NEVER && f.max_abs_derivative(state) > threshold {
            *tau1 = t;
        }
        if *tau2 == NEVER && mean < delta {
            *tau2 = t;
        }
    };

    let mut mean = f.mean();
    f_path.push(mean);
    check(&state, mean, 0, &mut tau1, &mut tau2);

    let mut flagged = false;
    let mut max_residual = 0.0f64;
    for t in 1..=n {
        let i = pi[t - 1];
        let ratio = f.derivative_at(&state, i) / mean;
        ratios.push(ratio);
        let broken = tau1.min(tau2) < t;
        let sign;
        let mut step_kl = 0.0;
        if broken {
            // Every post-break step is assigned by the player per Q.
            let q_plus = clamp_probability(0.5 + ratio / 2.0, "phase-2 step")
                .expect("post-break states keep f > 0, so the Q step stays in band");
            sign = draw_sign(rng, q_plus);
        } else {
            let p_plus = 0.5 + ratio / (2.0 * epsilon);
            let q_plus = 0.5 + ratio / 2.0;
            max_residual = max_residual
                .max(((1.0 - epsilon) * 0.5 + epsilon * p_plus - q_plus).abs());
            if control[t - 1] {
                let p = if (-BAND..=1.0 + BAND).contains(&p_plus) {
                    p_plus.clamp(0.0, 1.0)
                } else {
                    flagged = true;
                    p_plus.clamp(0.0, 1.0)
                };
                step_kl = 1.0 - binary_entropy(p);
                sign = draw_sign(rng, p);
            } else {
                sign = z[t - 1];
            }
        }
        step_kls.push(step_kl);
        state.fix(i, sign);
        mean = f.cond_mean(&state);
        f_path.push(mean);
        check(&state, mean, t, &mut tau1, &mut tau2);

        let x_sign = if control[t - 1] { uniform_sign(rng) } else { z[t - 1] };
        x_state.fix(i, x_sign);
        if store_paths {
            y_path.push(state.clone());
            x_path.push(x_state.clone());
        }
    }

    CoreRun {
        pi,
        control,
        z,
        tau1,
        tau2,
        flagged,
        max_mixture_residual: max_residual,
        f_path,
        ratios,
        step_kls,
        y_path,
        x_path,
    }
}

fn ledger_z(core: &CoreRun, n: usize, m: usize) -> Vec<f64> {
    let tau_prime = core.tau(n).min(m + 1);
    (1..=n)
        .map(|t| {
            if core.control[t - 1] && t < tau_prime {
                core.ratios[t - 1] * core.ratios[t - 1]
            } else {
                0.0
            }
        })
        .collect()
}

fn terminal_kl(core: &CoreRun, n: usize, m: usize) -> f64 {
    let tau_prime = core.tau(n).min(m + 1);
    let idx = tau_prime.saturating_sub(1);
    (1.0 / core.f_path[idx]).log2()
}

pub fn run_controlled(f: &BooleanFunction, cfg: &PiConfig) -> Result<PiRun> {
    let (target, en) = cfg.resolve(f)?;
    let n = target.n();
    let m_default = n - en;
    let mut rng = root(cfg.seed);
    let core = run_core(&target, cfg.epsilon, cfg.delta, &mut rng, true);
    let zs = ledger_z(&core, n, m_default);
    let ledger = (1..=n)
        .map(|t| KLLedgerEntry {
            t,
            controlled: core.control[t - 1],
            ratio: core.ratios[t - 1],
            step_kl: core.step_kls[t - 1],
            z: zs[t - 1],
        })
        .collect();
    Ok(PiRun {
        n,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        complement: cfg.complement,
        seed: cfg.seed,
        m_default,
        control_times: (1..=n).filter(|&t| core.control[t - 1]).collect(),
        tau: core.tau(n),
        tau1: core.tau1.min(n + 1),
        tau2: core.tau2.min(n + 1),
        flagged: core.flagged,
        max_mixture_residual: core.max_mixture_residual,
        terminal_kl: terminal_kl(&core, n, m_default),
        ledger,
        pi: core.pi,
        z: core.z,
        f_path: core.f_path,
        y_path: core.y_path,
        x_path: core.x_path,
    })
}

// ════════════════════════════════════════════════════════════════════
// Aggregate statistics and the ledger audit
// ════════════════════════════════════════════════════════════════════

/// The two parameter conditions of the stopping-time lemma, reported with
/// their measured sides (never enforced). mINF is the spectral influence
/// max_i E[(d_i f)^2].
#[derive(Debug, Clone, Serialize)]
pub struct SideConditions {
    pub m_inf: f64,
    /// (16/eps) ln(4/eps) <= ln(1/mINF)
    pub eps_lhs: f64,
    pub eps_rhs: f64,
    pub eps_ok: bool,
    /// delta >= mINF^{eps/80} / eps
    pub delta_lhs: f64,
    pub delta_rhs: f64,
    pub delta_ok: bool,
}

pub fn side_conditions(f: &BooleanFunction, epsilon: f64, delta: f64) -> Result<SideConditions> {
    let m_inf = f.max_influence_spectral()?;
    let eps_lhs = (16.0 / epsilon) * (4.0 / epsilon).ln();
    let eps_rhs = (1.0 / m_inf).ln();
    let delta_rhs = m_inf.powf(epsilon / 80.0) / epsilon;
    Ok(SideConditions {
        m_inf,
        eps_lhs,
        eps_rhs,
        eps_ok: eps_lhs <= eps_rhs,
        delta_lhs: delta,
        delta_rhs,
        delta_ok: delta >= delta_rhs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppingStats {
    pub trials: u64,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// The horizon (1 - eps) n.
    pub m: usize,
    pub f0: f64,
    /// Empirical P[tau <= (1 - eps) n] with standard error.
    pub empirical: f64,
    pub empirical_se: f64,
    /// 3 delta / f(0).
    pub bound: f64,
    pub bound_holds_3sigma: bool,
    pub flagged_runs: u64,
    pub mean_tau: f64,
    pub mean_z_sum: f64,
    pub mean_step_kl_sum: f64,
    pub mean_terminal_kl: f64,
    pub mean_kl_estimate: f64,
    pub max_z: f64,
    /// Z_t <= eps^2 entrywise before tau'.
    pub z_range_ok: bool,
    /// step-kl <= Z_t / eps^2 entrywise before tau'.
    pub entropy_bound_ok: bool,
    pub lambda_ref: f64,
    pub mean_z_to_lambda: f64,
    /// 3 lambda / eps^2 + log2(1/delta).
    pub composite_bound: f64,
    pub preconditions: SideConditions,
}

/// lambda at C = 1: eps * ln(e n / (n - m + 1)) * log2(e/delta).
pub fn lambda_reference(n: usize, m: usize, epsilon: f64, delta: f64) -> f64 {
    epsilon
        * (std::f64::consts::E * n as f64 / (n - m + 1) as f64).ln()
        * (std::f64::consts::E / delta).log2()
}

pub fn stopping_stats(f: &BooleanFunction, cfg: &PiConfig, trials: u64) -> Result<StoppingStats> {
    use rayon::prelude::*;
    let (target, en) = cfg.resolve(f)?;
    if target.variance() == 0.0 {
        return Err(Error::BadParameter {
            name: "f",
            value: target.mean(),
            reason: "constant function: stopping-time statistics are vacuous".into(),
        });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let n = target.n();
    let m = n - en;
    let eps = cfg.epsilon;
    let delta = cfg.delta;

    struct Acc {
        stopped: u64,
        flagged: u64,
        tau_sum: f64,
        z_sum: f64,
        step_sum: f64,
        term_sum: f64,
        max_z: f64,
        z_ok: bool,
        ent_ok: bool,
    }
    // Collected in trial order and folded sequentially so the float sums do
    // not depend on how rayon splits the range.
    let per_trial: Vec<Acc> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(cfg.seed, k);
            let core = run_core(&target, eps, delta, &mut rng, false);
            let tau = core.tau(n);
            let zs = ledger_z(&core, n, m);
            let tau_prime = tau.min(m + 1);
            let mut z_sum = 0.0;
            let mut step_sum = 0.0;
            let mut max_z = 0.0f64;
            let mut z_ok = true;
            let mut ent_ok = true;
            for t in 1..=n {
                let z = zs[t - 1];
                z_sum += z;
                max_z = max_z.max(z);
                if core.control[t - 1] && t < tau_prime {
                    step_sum += core.step_kls[t - 1];
                    if z > eps * eps * (1.0 + 1e-9) {
                        z_ok = false;
                    }
                    if core.step_kls[t - 1] > z / (eps * eps) + 1e-12 {
                        ent_ok = false;
                    }
                }
            }
            Acc {
                stopped: u64::from(tau <= m),
                flagged: u64::from(core.flagged),
                tau_sum: tau.min(n + 1) as f64,
                z_sum,
                step_sum,
                term_sum: terminal_kl(&core, n, m),
                max_z,
                z_ok,
                ent_ok,
            }
        })
        .collect();
    let acc = per_trial.into_iter().fold(
        Acc {
            stopped: 0,
            flagged: 0,
            tau_sum: 0.0,
            z_sum: 0.0,
            step_sum: 0.0,
            term_sum: 0.0,
            max_z: 0.0,
            z_ok: true,
            ent_ok: true,
        },
        |a, b| Acc {
            stopped: a.stopped + b.stopped,
            flagged: a.flagged + b.flagged,
            tau_sum: a.tau_sum + b.tau_sum,
            z_sum: a.z_sum + b.z_sum,
            step_sum: a.step_sum + b.step_sum,
            term_sum: a.term_sum + b.term_sum,
            max_z: a.max_z.max(b.max_z),
            z_ok: a.z_ok && b.z_ok,
            ent_ok: a.ent_ok && b.ent_ok,
        },
    );

    let tf = trials as f64;
    let empirical = acc.stopped as f64 / tf;
    let se = (empirical * (1.0 - empirical) / tf).sqrt();
    let f0 = target.mean();
    let bound = 3.0 * delta / f0;
    let lambda = lambda_reference(n, m, eps, delta);
    Ok(StoppingStats {
        trials,
        n,
        epsilon: eps,
        delta,
        seed: cfg.seed,
        m,
        f0,
        empirical,
        empirical_se: se,
        bound,
        bound_holds_3sigma: empirical <= bound + 3.0 * se,
        flagged_runs: acc.flagged,
        mean_tau: acc.tau_sum / tf,
        mean_z_sum: acc.z_sum / tf,
        mean_step_kl_sum: acc.step_sum / tf,
        mean_terminal_kl: acc.term_sum / tf,
        mean_kl_estimate: (acc.step_sum + acc.term_sum) / tf,
        max_z: acc.max_z,
        z_range_ok: acc.z_ok,
        entropy_bound_ok: acc.ent_ok,
        lambda_ref: lambda,
        mean_z_to_lambda: acc.z_sum / tf / lambda,
        composite_bound: 3.0 * lambda / (eps * eps) + (1.0 / delta).log2(),
        preconditions: side_conditions(&target, eps, delta)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerAudit {
    pub m: usize,
    pub tau_prime: usize,
    pub z_sum: f64,
    pub step_kl_sum: f64,
    pub terminal_kl: f64,
    /// step_kl_sum + terminal_kl, the single-run analogue of the KL bound.
    pub kl_estimate: f64,
    pub z_range_ok: bool,
    pub entropy_bound_ok: bool,
    pub lambda_ref: f64,
    pub z_to_lambda: f64,
    pub composite_bound: f64,
}

/// Re-evaluates one run's ledger at an arbitrary horizon m.
pub fn kl_ledger_audit(run: &PiRun, m: usize) -> Result<LedgerAudit> {
    let n = run.n;
    if m > n {
        return Err(Error::BadParameter {
            name: "m",
            value: m as f64,
            reason: format!("exceeds n = {n}"),
        });
    }
    let eps = run.epsilon;
    let tau_prime = run.tau.min(m + 1);
    let mut z_sum = 0.0;
    let mut step_sum = 0.0;
    let mut z_ok = true;
    let mut ent_ok = true;
    for e in &run.ledger {
        if e.controlled && e.t < tau_prime {
            let z = e.ratio * e.ratio;
            z_sum += z;
            step_sum += e.step_kl;
            if z > eps * eps * (1.0 + 1e-9) {
                z_ok = false;
            }
            if e.step_kl > z / (eps * eps) + 1e-12 {
                ent_ok = false;
            }
        }
    }
    let terminal = (1.0 / run.f_path[tau_prime.saturating_sub(1)]).log2();
    let lambda = lambda_reference(n, m, eps, run.delta);
    Ok(LedgerAudit {
        m,
        tau_prime,
        z_sum,
        step_kl_sum: step_sum,
        terminal_kl: terminal,
        kl_estimate: step_sum + terminal,
        z_range_ok: z_ok,
        entropy_bound_ok: ent_ok,
        lambda_ref: lambda,
        z_to_lambda: z_sum / lambda,
        composite_bound: 3.0 * lambda / (eps * eps) + (1.0 / run.delta).log2(),
    })
}

// ════════════════════════════════════════════════════════════════════
// Exact small-n KL oracle
// ════════════════════════════════════════════════════════════════════

pub const MAX_KL_FREE_COORDS: usize = 16;
const MAX_KL_N: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct KlExactReport {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub free_coords: usize,
    pub branch_count: u64,
    /// Exact KL(Y(n) | G_m over the reference pinning z on the revealed
    /// uncontrolled coordinates and uniform on the rest), in bits. Infinite
    /// when a positive-probability branch escapes the pinned slice.
    pub kl_bits: f64,
    pub chain_step_bits: f64,
    pub chain_terminal_bits: f64,
    pub chain_total_bits: f64,
    /// True when the chain-rule decomposition provably equals kl_bits:
    /// m = 0, or no branch breaks at any t <= m.
    pub decomposition_exact: bool,
    pub any_branch_broke: bool,
}

struct KlEnv<'a> {
    f: &'a BooleanFunction,
    pi: &'a [usize],
    controlled: Vec<bool>,
    z: &'a [i8],
    m: usize,
    epsilon: f64,
    delta: f64,
    mu: Vec<f64>,
    chain_step: f64,
    chain_terminal: f64,
    branches: u64,
    any_broke: bool,
}

impl KlEnv<'_> {
    fn violates(&self, state: &PartialPoint, mean: f64) -> bool {
        self.f.max_abs_derivative(state) > self.epsilon * self.delta || mean < self.delta
    }

    /// `broken_mean` is f at the state preceding the breaking step
    /// (f(Y(tau-1)), or f(0) when the root itself violates).
    fn descend(
        &mut self,
        state: &mut PartialPoint,
        t: usize,
        prob: f64,
        step_acc: f64,
        broken_mean: Option<f64>,
        mean: f64,
    ) {
        if prob == 0.0 {
            return;
        }
        if t > self.m {
            self.branches += 1;
            self.any_broke |= broken_mean.is_some();
            let terminal = match broken_mean {
                Some(b) => (1.0 / b).log2(),
                None => (1.0 / mean).log2(),
            };
            self.chain_step += prob * step_acc;
            self.chain_terminal += prob * terminal;
            let alive: Vec<usize> = state.alive_iter().collect();
            let mut points = Vec::new();
            for k in 0..1u64 << alive.len() {
                let mut probe = state.clone();
                for (j, &i) in alive.iter().enumerate() {
                    probe.fix(i, if k >> j & 1 == 1 { -1 } else { 1 });
                }
                let x = probe.to_bitpoint();
                if self.f.eval(&x) {
                    points.push(x.index());
                }
            }
            let w = prob / points.len() as f64;
            for idx in points {
                self.mu[idx as usize] += w;
            }
            return;
        }
        let i = self.pi[t - 1];
        let ratio = self.f.derivative_at(state, i) / mean;
        let branch = |env: &mut Self, state: &mut PartialPoint, sign: i8, p: f64, kl_add: f64| {
            if p <= 0.0 {
                return;
            }
            state.fix(i, sign);
            let child_mean = env.f.cond_mean(state);
            let (child_broken, kl_add) = match broken_mean {
                Some(_) => (broken_mean, kl_add),
                None => {
                    if env.violates(state, child_mean) {
                        // Break fires at this t: the step's own KL is not
                        // counted (t < tau' fails) and the tail is charged
                        // at the pre-step state.
                        (Some(mean), 0.0)
                    } else {
                        (None, kl_add)
                    }
                }
            };
            env.descend(state, t + 1, prob * p, step_acc + kl_add, child_broken, child_mean);
            state.release(i);
        };
        if broken_mean.is_some() {
            let p_plus = (0.5 + ratio / 2.0).clamp(0.0, 1.0);
            branch(self, state, 1, p_plus, 0.0);
            branch(self, state, -1, 1.0 - p_plus, 0.0);
        } else if self.controlled[t - 1] {
            let p_plus = (0.5 + ratio / (2.0 * self.epsilon)).clamp(0.0, 1.0);
            let step_kl = 1.0 - binary_entropy(p_plus);
            branch(self, state, 1, p_plus, step_kl);
            branch(self, state, -1, 1.0 - p_plus, step_kl);
        } else {
            let sign = self.z[t - 1];
            assert!(sign == 1 || sign == -1, "z must be set at uncontrolled times <= m");
            branch(self, state, sign, 1.0, 0.0);
        }
    }
}

/// Exact endpoint KL of the controlled process given the environment data
/// revealed by time m: the full revelation order `pi`, the controlled
/// times within [m] (`t_set`, 1-based), and the environment signs
/// `z[t-1]` at uncontrolled times t <= m. Branches over the first m steps
/// explicitly; the tail beyond m is exactly Q (the mixture identity
/// marginalizes the unrevealed control/environment data), so each leaf
/// contributes a uniform endpoint law on its surviving preimage.
pub fn kl_exact_small_n(
    f: &BooleanFunction,
    epsilon: f64,
    delta: f64,
    pi: &[usize],
    t_set: &[usize],
    z: &[i8],
    m: usize,
) -> Result<KlExactReport> {
    let n = f.n();
    if n > MAX_KL_N {
        return Err(Error::ArityCap { n, cap: MAX_KL_N, what: "exact KL enumeration" });
    }
    if m > n {
        return Err(Error::BadParameter {
            name: "m",
            value: m as f64,
            reason: format!("exceeds n = {n}"),
        });
    }
    {
        let mut seen = vec![false; n];
        if pi.len() != n || !pi.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Invariant("pi is not a permutation of the coordinates".into()));
        }
    }
    let mut controlled = vec![false; n.max(1)];
    for &t in t_set {
        if t == 0 || t > m {
            return Err(Error::BadParameter {
                name: "t",
                value: t as f64,
                reason: format!("control times must lie in 1..={m}"),
            });
        }
        controlled[t - 1] = true;
    }
    if z.len() < m {
        return Err(Error::Invariant(format!("z must cover the first {m} steps")));
    }
    let free = t_set.len() + (n - m);
    if free > MAX_KL_FREE_COORDS {
        return Err(Error::ArityCap {
            n: free,
            cap: MAX_KL_FREE_COORDS,
            what: "free coordinates in exact KL enumeration",
        });
    }
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::BadParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1)".into(),
        });
    }
    let f0 = f.mean();
    if f0 == 0.0 {
        return Err(Error::ZeroMean);
    }
    if delta <= 0.0 || delta > f0 {
        return Err(Error::BadParameter {
            name: "delta",
            value: delta,
            reason: format!("must lie in (0, f(0)] with f(0) = {f0}"),
        });
    }

    let mut env = KlEnv {
        f,
        pi,
        controlled,
        z,
        m,
        epsilon,
        delta,
        mu: vec![0.0; 1 << n],
        chain_step: 0.0,
        chain_terminal: 0.0,
        branches: 0,
        any_broke: false,
    };
    let mut state = PartialPoint::all_alive(n);
    let root_mean = f0;
    let root_broken = if env.violates(&state, root_mean) { Some(root_mean) } else { None };
    env.descend(&mut state, 1, 1.0, 0.0, root_broken, root_mean);

    // Reference: z pinned on the coordinates of uncontrolled times <= m,
    // uniform on the rest.
    let mut pin_mask = 0u64;
    let mut pin_bits = 0u64;
    for t in 1..=m {
        if !env.controlled[t - 1] {
            let i = pi[t - 1];
            pin_mask |= 1 << i;
            if z[t - 1] == -1 {
                pin_bits |= 1 << i;
            }
        }
    }
    let nu = 1.0 / (1u64 << free) as f64;
    let mut kl = 0.0;
    for (idx, &p) in env.mu.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if idx as u64 & pin_mask != pin_bits {
            kl = f64::INFINITY;
            break;
        }
        kl += p * (p / nu).log2();
    }

    Ok(KlExactReport {
        n,
        m,
        epsilon,
        delta,
        free_coords: free,
        branch_count: env.branches,
        kl_bits: kl,
        chain_step_bits: env.chain_step,
        chain_terminal_bits: env.chain_terminal,
        chain_total_bits: env.chain_step + env.chain_terminal,
        decomposition_exact: m == 0 || !env.any_broke,
        any_branch_broke: env.any_broke,
    })
}

// ════════════════════════════════════════════════════════════════════
// KL to mean
// ════════════════════════════════════════════════════════════════════

/// A distribution gamma with gamma(f) >= delta and KL(gamma || uniform) <= K
/// forces mean(f) >= 2^{-(K + H(delta))/delta}.
pub fn kl_to_mean(k: f64, delta: f64) -> Result<f64> {
    if !(0.0 < delta && delta <= 1.0) {
        return Err(Error::BadParameter {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1]".into(),
        });
    }
    if k < 0.0 {
        return Err(Error::BadParameter { name: "k", value: k, reason: "KL must be >= 0".into() });
    }
    Ok((-(k + binary_entropy(delta)) / delta).exp2())
}

#[derive(Debug, Clone, Serialize)]
pub struct KlToMeanCheck {
    pub gamma_f: f64,
    pub kl_bits: f64,
    pub mu_f: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Evaluates the implication on an explicit distribution gamma over the
/// 2^n points (index convention of BitPoint).
pub fn kl_to_mean_verify(f: &BooleanFunction, gamma: &[f64]) -> Result<KlToMeanCheck> {
    let n = f.n();
    if gamma.len() != 1 << n {
        return Err(Error::Invariant(format!(
            "gamma has {} entries, expected {}",
            gamma.len(),
            1u64 << n
        )));
    }
    let total: f64 = gamma.iter().sum();
    if gamma.iter().any(|&g| g < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant("gamma is not a probability distribution".into()));
    }
    let mut gamma_f = 0.0;
    let mut kl = 0.0;
    let size = (1u64 << n) as f64;
    for (idx, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        kl += g * (g * size).log2();
        if f.eval(&BitPoint::from_index(n, idx as u64)) {
            gamma_f += g;
        }
    }
    let mu_f = f.mean();
    let bound = if gamma_f > 0.0 { kl_to_mean(kl.max(0.0), gamma_f.min(1.0))? } else { 0.0 };
    Ok(KlToMeanCheck { gamma_f, kl_bits: kl, mu_f, bound, holds: mu_f + 1e-12 >= bound })
}

// ════════════════════════════════════════════════════════════════════
// Default parameters
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct DefaultParameters {
    pub epsilon: f64,
    /// epsilon * n.
    pub eps_steps: usize,
    pub delta: f64,
    pub side_conditions: SideConditions,
}

/// epsilon = the largest multiple of 1/n at or below rho/3;
/// delta = p Var[f] / 8.
pub fn default_parameters(rho: f64, p: f64, f: &BooleanFunction) -> Result<DefaultParameters> {
    if !(0.0 < rho && rho <= 1.0) {
        return Err(Error::BadParameter { name: "rho", value: rho, reason: "must lie in (0, 1]".into() });
    }
    if !(0.0 < p && p <= 1.0) {
        return Err(Error::BadParameter { name: "p", value: p, reason: "must lie in (0, 1]".into() });
    }
    let n = f.n();
    let k = (rho * n as f64 / 3.0 + 1e-9).floor();
    if k < 1.0 {
        return Err(Error::BadParameter {
            name: "rho",
            value: rho,
            reason: format!("no positive multiple of 1/n at or below rho/3; need rho >= {}", 3.0 / n as f64),
        });
    }
    let epsilon = k / n as f64;
    let delta = p * f.variance() / 8.0;
    Ok(DefaultParameters {
        epsilon,
        eps_steps: k as usize,
        delta,
        side_conditions: side_conditions(f, epsilon, delta)?,
    })
}

// ════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::BooleanFunction;

    #[test]
    fn q_law_pins() {
        let and2 = BooleanFunction::and(2).unwrap();
        let y = PartialPoint::all_alive(2);
        let (p_plus, p_minus) = step_distribution_q(&and2, &y, 0).unwrap();
        assert_eq!((p_plus, p_minus), (0.0, 1.0));

        let parity = BooleanFunction::parity(4);
        let (p, q) = step_distribution_q(&parity, &PartialPoint::all_alive(4), 2).unwrap();
        assert_eq!((p, q), (0.5, 0.5));

        let dict = BooleanFunction::dictator(3, 0).unwrap();
        let (p, q) = step_distribution_q(&dict, &PartialPoint::all_alive(3), 0).unwrap();
        assert_eq!((p, q), (0.0, 1.0));

        let mut dead = PartialPoint::all_alive(2);
        dead.fix(0, 1);
        assert!(matches!(step_distribution_q(&and2, &dead, 1), Err(Error::ZeroMean)));
        assert!(step_distribution_q(&and2, &dead, 0).is_err());
    }

    #[test]
    fn uniform_martingale_is_exact() {
        let f = BooleanFunction::from_spec("random:n=6,seed=3").unwrap();
        for seed in 0..20 {
            let run = run_uniform(&f, seed);
            for t in 0..6 {
                let prev = &run.path[t];
                let i = run.pi[t];
                let mut hi = prev.clone();
                hi.fix(i, 1);
                let mut lo = prev.clone();
                lo.fix(i, -1);
                assert_eq!((f.cond_mean(&hi) + f.cond_mean(&lo)) / 2.0, f.cond_mean(prev));
            }
        }
        let parity = BooleanFunction::parity(6);
        let run = run_uniform(&parity, 1);
        for t in 0..6 {
            assert_eq!(parity.cond_mean(&run.path[t]), 0.5);
        }
        let end = parity.cond_mean(&run.path[6]);
        assert!(end == 0.0 || end == 1.0);
    }

    #[test]
    fn conditioned_and2_hits_the_preimage() {
        let f = BooleanFunction::and(2).unwrap();
        for seed in 0..10 {
            let run = run_conditioned(&f, seed).unwrap();
            assert_eq!(run.path[2].to_bitpoint().signs(), &[-1, -1]);
        }
        let mut p = PartialPoint::all_alive(2);
        p.fix(0, 1);
        let dead = BooleanFunction::and(2).unwrap().restricted(&p);
        assert_eq!(dead.mean(), 0.0);
        assert!(run_conditioned(&dead, 0).is_err());
    }

    #[test]
    fn rn_residual_small_on_q_paths() {
        let f = BooleanFunction::majority(3, false).unwrap();
        for seed in 0..50 {
            let run = run_conditioned(&f, seed).unwrap();
            assert!(rn_check(&f, &run.pi, &run.path).unwrap() <= 1e-9);
            for s in 0..=3 {
                assert!(rn_check(&f, &run.pi, &run.path[..=s]).unwrap() <= 1e-9);
            }
        }
        let t = crate::table::TruthTable::from_fn(3, |_| true).unwrap();
        let g = BooleanFunction::Table(t);
        let run = run_conditioned(&g, 4).unwrap();
        assert_eq!(rn_check(&g, &run.pi, &run.path).unwrap(), 0.0);
    }

    #[test]
    fn controlled_run_invariants() {
        let f = BooleanFunction::majority(3, false).unwrap();
        let cfg = PiConfig::new(1.0 / 3.0, 0.1, 5);
        for seed in 0..100 {
            let run = run_controlled(&f, &PiConfig { seed, ..cfg.clone() }).unwrap();
            assert_eq!(run.tau, run.tau1.min(run.tau2).min(4));
            assert!(f.eval(&run.y_final()), "endpoint in preimage");
            assert!(!run.flagged);
            assert!(run.max_mixture_residual <= 1e-12);
            for e in &run.ledger {
                assert!(e.z >= 0.0 && e.z <= run.epsilon * run.epsilon + 1e-12);
                if e.z > 0.0 {
                    assert!(e.step_kl <= e.z / (run.epsilon * run.epsilon) + 1e-12);
                }
            }
            // Pre-break, uncontrolled Y steps and X both read z.
            for t in 1..=run.n {
                if !run.control_times.contains(&t) && t <= run.tau.min(run.n) {
                    let i = run.pi[t - 1];
                    assert_eq!(run.y_path[t].state(i), run.z[t - 1]);
                    assert_eq!(run.x_path[t].state(i), run.z[t - 1]);
                }
            }
        }
    }

    #[test]
    fn controlled_parity_tau_fires_late() {
        let f = BooleanFunction::parity(5);
        let cfg = PiConfig { epsilon: 0.2, delta: 0.4, complement: false, seed: 9 };
        for seed in 0..50 {
            let run = run_controlled(&f, &PiConfig { seed, ..cfg.clone() }).unwrap();
            assert_eq!(run.tau1, 4, "all derivatives vanish until one coordinate is left");
            assert_eq!(run.tau2, 6);
        }
    }

    #[test]
    fn config_validation() {
        let f = BooleanFunction::majority(3, false).unwrap();
        assert!(PiConfig::new(0.25, 0.1, 0).resolve(&f).is_err());
        assert!(PiConfig::new(1.0 / 3.0, 0.6, 0).resolve(&f).is_err());
        assert!(PiConfig::new(1.0 / 3.0, 0.5, 0).resolve(&f).is_ok());
        let c = PiConfig { complement: true, ..PiConfig::new(1.0 / 3.0, 0.2, 0) };
        let (target, en) = c.resolve(&f).unwrap();
        assert_eq!(en, 1);
        assert_eq!(target.mean(), 0.5);
    }

    #[test]
    fn stopping_stats_shape() {
        let f = BooleanFunction::majority(7, false).unwrap();
        let cfg = PiConfig::new(1.0 / 7.0, 1.0 / 64.0, 17);
        let stats = stopping_stats(&f, &cfg, 400).unwrap();
        assert_eq!(stats.m, 6);
        assert!(stats.z_range_ok);
        assert!(stats.entropy_bound_ok);
        assert_eq!(stats.flagged_runs, 0);
        assert!(stats.empirical >= 0.0 && stats.empirical <= 1.0);
        let again = stopping_stats(&f, &cfg, 400).unwrap();
        assert_eq!(stats.empirical, again.empirical);
        assert_eq!(stats.mean_z_sum, again.mean_z_sum);

        let one = BooleanFunction::Table(
            crate::table::TruthTable::from_fn(3, |_| true).unwrap(),
        );
        assert!(stopping_stats(&one, &PiConfig::new(1.0 / 3.0, 0.5, 0), 10).is_err());
    }

    #[test]
    fn ledger_audit_consistent_with_run() {
        let f = BooleanFunction::majority(7, false).unwrap();
        let cfg = PiConfig::new(2.0 / 7.0, 0.05, 23);
        let run = run_controlled(&f, &cfg).unwrap();
        let audit = kl_ledger_audit(&run, run.m_default).unwrap();
        assert_eq!(audit.terminal_kl, run.terminal_kl);
        let z_sum: f64 = run.ledger.iter().map(|e| e.z).sum();
        assert_eq!(audit.z_sum, z_sum);
        assert!(kl_ledger_audit(&run, run.n + 1).is_err());
    }

    #[test]
    fn kl_exact_and2_is_two_bits() {
        let f = BooleanFunction::and(2).unwrap();
        let r = kl_exact_small_n(&f, 0.5, 0.25, &[0, 1], &[], &[], 0).unwrap();
        assert!((r.kl_bits - 2.0).abs() < 1e-12, "{}", r.kl_bits);
        assert!((r.chain_total_bits - 2.0).abs() < 1e-12);
        assert!(r.decomposition_exact);
    }

    #[test]
    fn kl_exact_constant_one_is_zero() {
        let one = BooleanFunction::Table(
            crate::table::TruthTable::from_fn(3, |_| true).unwrap(),
        );
        let r = kl_exact_small_n(&one, 1.0 / 3.0, 0.9, &[2, 0, 1], &[1], &[0, 1, 1], 2).unwrap();
        assert!(r.kl_bits.abs() < 1e-12);
        assert!(r.chain_total_bits.abs() < 1e-12);
        assert!(r.decomposition_exact);
    }

    #[test]
    fn kl_exact_matches_chain_when_no_break() {
        // Gentle target: parity never breaks until few coordinates remain.
        let f = BooleanFunction::parity(5);
        let pi = [3usize, 1, 4, 0, 2];
        let r = kl_exact_small_n(&f, 0.4, 0.45, &pi, &[2], &[1, 0, -1], 2).unwrap();
        assert!(!r.any_branch_broke);
        assert!(r.decomposition_exact);
        assert!(r.kl_bits.is_finite());
        assert!(
            (r.kl_bits - r.chain_total_bits).abs() < 1e-9,
            "{} vs {}",
            r.kl_bits,
            r.chain_total_bits
        );
    }

    #[test]
    fn kl_exact_reports_infinity_on_pinned_escape() {
        // eps*delta = 0.2 < max|df(0)| = 1/4, so the root itself breaks and
        // step 1 follows Q; the posterior then escapes the slice pinned by
        // the uncontrolled z at t = 1.
        let f = BooleanFunction::majority(3, false).unwrap();
        let r = kl_exact_small_n(&f, 2.0 / 3.0, 0.3, &[0, 1, 2], &[], &[-1, 0, 0], 1).unwrap();
        assert!(r.any_branch_broke);
        assert!(!r.decomposition_exact);
        assert!(r.kl_bits.is_infinite());
    }

    #[test]
    fn kl_to_mean_values() {
        assert_eq!(kl_to_mean(0.0, 1.0).unwrap(), 1.0);
        assert!((kl_to_mean(1.0, 0.5).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(kl_to_mean(1.0, 0.0).is_err());
        let f = BooleanFunction::and(2).unwrap();
        let gamma = vec![0.0, 0.0, 0.0, 1.0];
        let check = kl_to_mean_verify(&f, &gamma).unwrap();
        assert_eq!(check.gamma_f, 1.0);
        assert!((check.kl_bits - 2.0).abs() < 1e-12);
        assert!((check.bound - 0.25).abs() < 1e-12);
        assert!(check.holds);
    }

    #[test]
    fn default_parameter_values() {
        let f = BooleanFunction::Table(
            crate::table::TruthTable::from_fn(10, |k| k.count_ones() % 2 == 1).unwrap(),
        );
        let d = default_parameters(0.3, 1.0, &f).unwrap();
        assert_eq!(d.epsilon, 0.1);
        assert_eq!(d.eps_steps, 1);
        assert_eq!(d.delta, 1.0 / 32.0);
        assert!(default_parameters(0.2, 1.0, &BooleanFunction::parity(15)).is_ok());
        assert!(default_parameters(0.2, 1.0, &BooleanFunction::parity(14)).is_err());
    }

    #[test]
    fn lambda_reference_shape() {
        let l = lambda_reference(10, 9, 0.1, 0.125);
        assert!(l > 0.0 && l.is_finite());
    }
}
