//! The continuous revelation process, exact moment oracles for it, the
//! hypercontractive inequality between reveal times, and the derivative
//! tail bounds it yields (continuous and discrete clocks).

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{BitPoint, PartialPoint};
use crate::error::{Error, Result};
use crate::family::BooleanFunction;
use crate::fourier::{wht_in_place, FourierCoefficients};
use crate::process::run_uniform_with;
use crate::rng::substream;
use crate::table::TruthTable;

/// Moment oracles enumerate all (revealed set, values) pairs.
pub const MAX_MULTILINEAR_N: usize = 12;

// ════════════════════════════════════════════════════════════════════
// Multilinear functions
// ════════════════════════════════════════════════════════════════════

/// Dense multilinear function f(x) = sum_S c_S prod_{i in S} x_i on [-1,1]^n.
/// Coefficients are indexed by subset mask.
#[derive(Debug, Clone)]
pub struct MultilinearFunction {
    n: usize,
    coeffs: Vec<f64>,
}

impl MultilinearFunction {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n > MAX_MULTILINEAR_N {
            return Err(Error::ArityCap { n, cap: MAX_MULTILINEAR_N, what: "multilinear oracle" });
        }
        if coeffs.len() != 1 << n {
            return Err(Error::BadParameter {
                name: "coeffs",
                value: coeffs.len() as f64,
                reason: format!("expected 2^{n} coefficients"),
            });
        }
        Ok(MultilinearFunction { n, coeffs })
    }

    pub fn from_table(t: &TruthTable) -> Result<Self> {
        MultilinearFunction::new(t.n(), FourierCoefficients::from_table(t).coeffs().to_vec())
    }

    pub fn from_boolean(f: &BooleanFunction) -> Result<Self> {
        MultilinearFunction::from_table(&f.to_table()?)
    }

    /// Random coefficients c_S ~ N(0, 1) * 2^(-|S|/2), so no level dominates.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let coeffs = (0..1usize << n)
            .map(|s| {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                g * 0.5f64.powi(s.count_ones() as i32).sqrt()
            })
            .collect();
        MultilinearFunction::new(n, coeffs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, s: u32) -> f64 {
        self.coeffs[s as usize]
    }

    pub fn eval(&self, x: &BitPoint) -> f64 {
        let idx = x.index() as u32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, c)| if (s as u32 & idx).count_ones() % 2 == 0 { *c } else { -c })
            .sum()
    }

    /// Evaluate at a partial point: alive coordinates sit at 0, so only
    /// subsets of the fixed set contribute.
    pub fn eval_partial(&self, p: &PartialPoint) -> f64 {
        let fixed = p.fixed_mask_u32();
        let signs = p.sign_index_u32();
        crate::bits::submasks(fixed)
            .map(|s| {
                let c = self.coeffs[s as usize];
                if (s & signs).count_ones() % 2 == 0 { c } else { -c }
            })
            .sum()
    }

    /// The multilinear derivative in direction i (coefficients shift down).
    pub fn derivative(&self, i: usize) -> MultilinearFunction {
        let bit = 1usize << i;
        let mut d = vec![0.0; self.coeffs.len()];
        for (s, slot) in d.iter_mut().enumerate() {
            if s & bit == 0 {
                *slot = self.coeffs[s | bit];
            }
        }
        MultilinearFunction { n: self.n, coeffs: d }
    }

    /// Values over all cube vertices (inverse transform, exact).
    pub fn values(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        wht_in_place(&mut v);
        v
    }

    /// Max |f| over [-1,1]^n; multilinear extrema sit at vertices.
    pub fn sup_norm(&self) -> f64 {
        self.values().into_iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Spectral influence sum_{S : i in S} c_S^2.
    pub fn influence(&self, i: usize) -> f64 {
        let bit = 1usize << i;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| s & bit != 0)
            .map(|(_, c)| c * c)
            .sum()
    }

    pub fn l2_squared(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// E[f(X(t))^2] = sum_S c_S^2 t^|S|, exactly.
    pub fn second_moment_closed(&self, t: f64) -> f64 {
        let tp = powers(t, self.n);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, c)| c * c * tp[s.count_ones() as usize])
            .sum()
    }

    /// E[|grad f(X(t))|^2] = sum_S |S| c_S^2 t^(|S|-1), exactly.
    pub fn gradient_second_moment(&self, t: f64) -> f64 {
        let tp = powers(t, self.n);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != 0)
            .map(|(s, c)| {
                let k = s.count_ones() as usize;
                k as f64 * c * c * tp[k - 1]
            })
            .sum()
    }
}

fn powers(t: f64, n: usize) -> Vec<f64> {
    let mut p = vec![1.0; n + 1];
    for k in 1..=n {
        p[k] = p[k - 1] * t;
    }
    p
}

// ════════════════════════════════════════════════════════════════════
// Exact moments of the revelation process at a fixed time
// ════════════════════════════════════════════════════════════════════

/// E|f(X(t))|^p under the fixed-t marginal: each coordinate is revealed
/// independently with probability t and set uniformly. Exact enumeration
/// over (revealed set, revealed values).
pub fn exact_moment(f: &MultilinearFunction, t: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::BadParameter { name: "t", value: t, reason: "must lie in [0, 1]".into() });
    }
    if p < 1.0 {
        return Err(Error::BadParameter { name: "p", value: p, reason: "must be >= 1".into() });
    }
    let n = f.n();
    let tp = powers(t, n);
    let up = powers(1.0 - t, n);
    let mut buf = vec![0.0f64; 1 << n];
    let mut bits = [0usize; MAX_MULTILINEAR_N];
    let mut total = 0.0;
    for s in 0..1u32 << n {
        let k = s.count_ones() as usize;
        let mut j = 0;
        for i in 0..n {
            if s >> i & 1 == 1 {
                bits[j] = i;
                j += 1;
            }
        }
        // Sub-coefficients of subsets of s, compressed to k bits, then a
        // small transform gives f at every assignment of the revealed set.
        for c in 0..1usize << k {
            let mut t_mask = 0usize;
            for (jj, &b) in bits[..k].iter().enumerate() {
                if c >> jj & 1 == 1 {
                    t_mask |= 1 << b;
                }
            }
            buf[c] = f.coeffs[t_mask];
        }
        wht_in_place(&mut buf[..1 << k]);
        let sum: f64 = if p == 2.0 {
            buf[..1 << k].iter().map(|v| v * v).sum()
        } else {
            buf[..1 << k].iter().map(|v| v.abs().powf(p)).sum()
        };
        total += tp[k] * up[n - k] / (1u64 << k) as f64 * sum;
    }
    Ok(total)
}

// ════════════════════════════════════════════════════════════════════
// Hypercontractivity between reveal times
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct HcCheck {
    pub t: f64,
    pub t_upper: f64,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// (E|f(X(t))|^(2+eps))^(1/(2+eps)) <= (E|f(X(T))|^2)^(1/2) with eps = T - t.
pub fn hc_check(f: &MultilinearFunction, t: f64, t_upper: f64) -> Result<HcCheck> {
    if !(0.0 <= t && t <= t_upper && t_upper <= 1.0) {
        return Err(Error::BadParameter {
            name: "t",
            value: t,
            reason: format!("need 0 <= t <= T <= 1, got t = {t}, T = {t_upper}"),
        });
    }
    let epsilon = t_upper - t;
    let p = 2.0 + epsilon;
    let lhs = exact_moment(f, t, p)?.powf(1.0 / p);
    let rhs = exact_moment(f, t_upper, 2.0)?.sqrt();
    let margin = rhs - lhs;
    Ok(HcCheck { t, t_upper, epsilon, lhs, rhs, margin, holds: margin >= -1e-9 })
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop51Check {
    pub t: f64,
    pub sup_norm: f64,
    pub grad_moment: f64,
    pub grad_bound: f64,
    pub grad_slack: f64,
    pub coord_slacks: Vec<f64>,
    pub min_coord_slack: f64,
    pub holds: bool,
}

/// E[|grad f(X(t))|^2] <= sup|f|^2 / (1-t), and per coordinate
/// E[d_i f(X(t))^2] <= INF_i[f]. Both sides exact.
pub fn prop51_check(f: &MultilinearFunction, t: f64) -> Result<Prop51Check> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::BadParameter { name: "t", value: t, reason: "must lie in [0, 1)".into() });
    }
    let sup = f.sup_norm();
    let grad_moment = f.gradient_second_moment(t);
    let grad_bound = sup * sup / (1.0 - t);
    let tp = powers(t, f.n());
    let coord_slacks: Vec<f64> = (0..f.n())
        .map(|i| {
            let bit = 1usize << i;
            let mut moment = 0.0;
            let mut inf = 0.0;
            for (s, c) in f.coeffs.iter().enumerate() {
                if s & bit != 0 {
                    let k = s.count_ones() as usize;
                    moment += c * c * tp[k - 1];
                    inf += c * c;
                }
            }
            inf - moment
        })
        .collect();
    let min_coord_slack = coord_slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let grad_slack = grad_bound - grad_moment;
    Ok(Prop51Check {
        t,
        sup_norm: sup,
        grad_moment,
        grad_bound,
        grad_slack,
        coord_slacks,
        min_coord_slack,
        holds: grad_slack >= -1e-9 && min_coord_slack >= -1e-9,
    })
}

// ════════════════════════════════════════════════════════════════════
// The continuous revelation process
// ════════════════════════════════════════════════════════════════════

/// Coordinate i is revealed at time tau_i ~ U[0,1] with value x_i.
#[derive(Debug, Clone)]
pub struct RevealPath {
    pub taus: Vec<f64>,
    pub x: BitPoint,
}

impl RevealPath {
    pub fn sample<R: Rng>(n: usize, rng: &mut R) -> Self {
        let taus = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = BitPoint::random(n, rng);
        RevealPath { taus, x }
    }

    /// X(t): coordinates with tau_i <= t are pinned to x_i.
    pub fn revealed_at(&self, t: f64) -> PartialPoint {
        let mut p = PartialPoint::all_alive(self.taus.len());
        for (i, &tau) in self.taus.iter().enumerate() {
            if tau <= t {
                p.fix(i, self.x.sign(i));
            }
        }
        p
    }

    /// Reveal events in time order.
    pub fn events(&self) -> Vec<(f64, usize)> {
        let mut ev: Vec<(f64, usize)> =
            self.taus.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        ev
    }

    /// The coupled discrete process: reveal order as a permutation.
    pub fn to_discrete(&self) -> Vec<usize> {
        self.events().into_iter().map(|(_, i)| i).collect()
    }
}

// ════════════════════════════════════════════════════════════════════
// Derivative tail along the process
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct BetaTail {
    pub t: f64,
    pub theta: f64,
    pub trials: u64,
    pub seed: u64,
    pub m_inf: f64,
    /// P[sup_{s<=t} beta(s) >= theta], beta the max over all coordinates.
    pub empirical: f64,
    pub empirical_se: f64,
    /// Same tail for beta* (alive coordinates only); beta* <= beta pointwise.
    pub empirical_star: f64,
    /// theta^-3 mINF^((1-t)/8).
    pub bound: f64,
    pub holds_3sigma: bool,
    /// (8/(1-t)) ln(2/(1-t)) <= ln(1/mINF), reported not enforced.
    pub precondition_lhs: f64,
    pub precondition_rhs: f64,
    pub precondition_ok: bool,
    /// The sharper commented-out form: threshold mINF^((1-t)/30),
    /// bound mINF^((1-t)/40). Diagnostic only.
    pub sharp_threshold: f64,
    pub sharp_bound: f64,
    pub empirical_at_sharp: f64,
}

/// Tail of the running maximum derivative along the continuous process,
/// sampled at reveal events (beta is constant in between).
pub fn beta_tail(
    f: &BooleanFunction,
    t: f64,
    theta: f64,
    trials: u64,
    seed: u64,
) -> Result<BetaTail> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::BadParameter { name: "t", value: t, reason: "must lie in [0, 1]".into() });
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::BadParameter {
            name: "theta",
            value: theta,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let n = f.n();
    let m_inf = f.max_influence_spectral()?;
    let sharp_threshold = m_inf.powf((1.0 - t) / 30.0);
    let sups: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let path = RevealPath::sample(n, &mut rng);
            let mut p = PartialPoint::all_alive(n);
            let mut sup = f.max_abs_derivative(&p);
            let mut sup_star = f.max_abs_derivative_alive(&p);
            for (tau, i) in path.events() {
                if tau > t {
                    break;
                }
                p.fix(i, path.x.sign(i));
                sup = sup.max(f.max_abs_derivative(&p));
                sup_star = sup_star.max(f.max_abs_derivative_alive(&p));
            }
            (sup, sup_star)
        })
        .collect();
    let tf = trials as f64;
    let empirical = sups.iter().filter(|(b, _)| *b >= theta).count() as f64 / tf;
    let empirical_star = sups.iter().filter(|(_, b)| *b >= theta).count() as f64 / tf;
    let empirical_at_sharp = sups.iter().filter(|(b, _)| *b >= sharp_threshold).count() as f64 / tf;
    let se = (empirical * (1.0 - empirical) / tf).sqrt();
    let bound = theta.powi(-3) * m_inf.powf((1.0 - t) / 8.0);
    let precondition_lhs = 8.0 / (1.0 - t) * (2.0 / (1.0 - t)).ln();
    let precondition_rhs = (1.0 / m_inf).ln();
    Ok(BetaTail {
        t,
        theta,
        trials,
        seed,
        m_inf,
        empirical,
        empirical_se: se,
        empirical_star,
        bound,
        holds_3sigma: empirical <= bound + 3.0 * se,
        precondition_lhs,
        precondition_rhs,
        precondition_ok: precondition_lhs <= precondition_rhs,
        sharp_threshold,
        sharp_bound: m_inf.powf((1.0 - t) / 40.0),
        empirical_at_sharp,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingCheck {
    pub epsilon: f64,
    pub t_tilde: f64,
    pub trials: u64,
    pub seed: u64,
    /// P[|S(t_tilde)| < (1-eps) n] at t_tilde = 1 - eps/2.
    pub empirical_short: f64,
    pub empirical_short_se: f64,
    pub chernoff_bound: f64,
    pub holds_3sigma: bool,
    /// The revealed endpoint is uniform: E[f(x)] should match f's mean.
    pub endpoint_mean: f64,
    pub endpoint_mean_se: f64,
    pub f0: f64,
    pub endpoint_ok_3sigma: bool,
}

/// Couple the continuous process to the discrete one by reveal order and
/// check the Chernoff count at t_tilde = 1 - eps/2.
pub fn couple_to_discrete(
    f: &BooleanFunction,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<CouplingCheck> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1]".into(),
        });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let n = f.n();
    let t_tilde = 1.0 - epsilon / 2.0;
    let cutoff = (1.0 - epsilon) * n as f64;
    let per: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let path = RevealPath::sample(n, &mut rng);
            let revealed = path.taus.iter().filter(|&&tau| tau <= t_tilde).count();
            let short = (revealed as f64) < cutoff;
            let end = if f.eval(&path.x) { 1.0 } else { 0.0 };
            (short, end)
        })
        .collect();
    let tf = trials as f64;
    let empirical_short = per.iter().filter(|(s, _)| *s).count() as f64 / tf;
    let short_se = (empirical_short * (1.0 - empirical_short) / tf).sqrt();
    let endpoint_mean = per.iter().map(|(_, e)| e).sum::<f64>() / tf;
    let end_se = (endpoint_mean * (1.0 - endpoint_mean) / tf).sqrt();
    let chernoff_bound = (-epsilon * n as f64 / 8.0).exp();
    let f0 = f.mean();
    Ok(CouplingCheck {
        epsilon,
        t_tilde,
        trials,
        seed,
        empirical_short,
        empirical_short_se: short_se,
        chernoff_bound,
        holds_3sigma: empirical_short <= chernoff_bound + 3.0 * short_se,
        endpoint_mean,
        endpoint_mean_se: end_se,
        f0,
        endpoint_ok_3sigma: (endpoint_mean - f0).abs() <= 3.0 * end_se.max(1e-9),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteBetaTail {
    pub epsilon: f64,
    pub theta: f64,
    pub steps: usize,
    pub trials: u64,
    pub seed: u64,
    pub m_inf: f64,
    pub empirical: f64,
    pub empirical_se: f64,
    /// theta^-3 mINF^(eps/16) + exp(-eps n / 8).
    pub bound: f64,
    pub holds_3sigma: bool,
    /// (16/eps) ln(4/eps) <= ln(1/mINF), reported not enforced.
    pub precondition_lhs: f64,
    pub precondition_rhs: f64,
    pub precondition_ok: bool,
}

/// Tail of max_{t <= (1-eps)n} max_i |d_i f(X(t))| on the discrete clock.
pub fn discrete_beta_tail(
    f: &BooleanFunction,
    epsilon: f64,
    theta: f64,
    trials: u64,
    seed: u64,
) -> Result<DiscreteBetaTail> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::BadParameter {
            name: "theta",
            value: theta,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let n = f.n();
    let steps = (((1.0 - epsilon) * n as f64 + 1e-9).floor() as usize).min(n);
    let m_inf = f.max_influence_spectral()?;
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let run = run_uniform_with(n, &mut rng);
            run.path[..=steps].iter().any(|p| f.max_abs_derivative(p) >= theta)
        })
        .collect();
    let tf = trials as f64;
    let empirical = hits.iter().filter(|h| **h).count() as f64 / tf;
    let se = (empirical * (1.0 - empirical) / tf).sqrt();
    let bound = theta.powi(-3) * m_inf.powf(epsilon / 16.0) + (-epsilon * n as f64 / 8.0).exp();
    let precondition_lhs = 16.0 / epsilon * (4.0 / epsilon).ln();
    Ok(DiscreteBetaTail {
        epsilon,
        theta,
        steps,
        trials,
        seed,
        m_inf,
        empirical,
        empirical_se: se,
        bound,
        holds_3sigma: empirical <= bound + 3.0 * se,
        precondition_lhs,
        precondition_rhs: (1.0 / m_inf).ln(),
        precondition_ok: precondition_lhs <= (1.0 / m_inf).ln(),
    })
}

// ════════════════════════════════════════════════════════════════════
