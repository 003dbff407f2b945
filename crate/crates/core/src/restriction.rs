//! Random restrictions and restriction scans.
//!
//! A restriction is a pair (S, y): the coordinates in S are fixed to the
//! signs y, the rest stay alive. Two samplers: `sample_fixed_alive` keeps
//! exactly k coordinates alive (a uniform subset), `sample_independent`
//! fixes each coordinate independently. `scan` estimates constancy
//! probabilities and variance quantiles of f restricted at a grid of alive
//! fractions; constancy is decided combinatorially through `constant_on`,
//! never by thresholding a float.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::bits::PartialPoint;
use crate::error::{Error, Result};
use crate::family::BooleanFunction;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    n: usize,
    /// Fixed indices, ascending.
    s: Vec<usize>,
    /// Signs aligned with `s`.
    y: Vec<i8>,
}

impl Restriction {
    pub fn new(n: usize, mut pairs: Vec<(usize, i8)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut s = Vec::with_capacity(pairs.len());
        let mut y = Vec::with_capacity(pairs.len());
        for (i, sign) in pairs {
            if i >= n {
                return Err(Error::CoordRange { i, n });
            }
            if s.last() == Some(&i) {
                return Err(Error::Invariant(format!("coordinate {i} fixed twice")));
            }
            assert!(sign == 1 || sign == -1, "sign must be ±1");
            s.push(i);
            y.push(sign);
        }
        Ok(Restriction { n, s, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fixed(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.s.iter().copied().zip(self.y.iter().copied())
    }

    pub fn fixed_count(&self) -> usize {
        self.s.len()
    }

    pub fn alive(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.s.len());
        let mut it = self.s.iter().peekable();
        for i in 0..self.n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn to_partial_point(&self) -> PartialPoint {
        let mut states = vec![0i8; self.n];
        for (&i, &sign) in self.s.iter().zip(&self.y) {
            states[i] = sign;
        }
        PartialPoint::from_states(states)
    }

    pub fn from_partial_point(x: &PartialPoint) -> Self {
        Restriction {
            n: x.n(),
            s: x.fixed_iter().map(|(i, _)| i).collect(),
            y: x.fixed_iter().map(|(_, s)| s).collect(),
        }
    }

    /// The single restriction equivalent to applying `self` and then `inner`,
    /// where `inner` lives on self's alive coordinates (ascending reindex).
    pub fn then(&self, inner: &Restriction) -> Result<Restriction> {
        let alive = self.alive();
        if inner.n != alive.len() {
            return Err(Error::ArityMismatch { expected: alive.len(), got: inner.n });
        }
        let mut pairs: Vec<(usize, i8)> = self.fixed().collect();
        for (j, sign) in inner.fixed() {
            pairs.push((alive[j], sign));
        }
        Restriction::new(self.n, pairs)
    }
}

/// Keeps exactly `k_alive` coordinates alive: S is a uniform
/// (n - k_alive)-subset and y is uniform on S.
pub fn sample_fixed_alive<R: Rng>(n: usize, k_alive: usize, rng: &mut R) -> Result<Restriction> {
    if k_alive > n {
        return Err(Error::BadParameter {
            name: "k_alive",
            value: k_alive as f64,
            reason: format!("exceeds n = {n}"),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let pairs = idx[..n - k_alive]
        .iter()
        .map(|&i| (i, if rng.random_bool(0.5) { -1 } else { 1 }))
        .collect();
    Restriction::new(n, pairs)
}

/// Fixes each coordinate independently with probability `p_fix`.
pub fn sample_independent<R: Rng>(n: usize, p_fix: f64, rng: &mut R) -> Result<Restriction> {
    if !(0.0..=1.0).contains(&p_fix) {
        return Err(Error::BadParameter {
            name: "p_fix",
            value: p_fix,
            reason: "outside [0, 1]".into(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        if rng.random_bool(p_fix) {
            pairs.push((i, if rng.random_bool(0.5) { -1i8 } else { 1 }));
        }
    }
    Restriction::new(n, pairs)
}

/// f restricted by R: tables materialize on the alive coordinates
/// (ascending original index), closed-form families wrap.
pub fn restrict(f: &BooleanFunction, r: &Restriction) -> Result<BooleanFunction> {
    if r.n() != f.n() {
        return Err(Error::ArityMismatch { expected: f.n(), got: r.n() });
    }
    let pp = r.to_partial_point();
    match f {
        BooleanFunction::Table(t) => Ok(BooleanFunction::Table(t.restrict(&pp)?)),
        other => Ok(other.restricted(&pp)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Fixed,
    Independent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub rho: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: ScanMode,
    /// P[f restricted is constant], with the two one-sided pieces.
    pub p_constant: f64,
    pub p_constant_se: f64,
    pub p_one: f64,
    pub p_zero: f64,
    /// Average restricted mean; equals f's mean in expectation.
    pub mean_of_means: f64,
    pub mean_se: f64,
    /// Quantiles of Var[f restricted] across trials.
    pub var_min: f64,
    pub var_q05: f64,
    pub var_q50: f64,
    pub var_q95: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// One grid point of `scan`. Trial t of grid point g draws from RNG
/// substream g * trials + t, so results are order- and worker-independent.
pub fn scan_one(
    f: &BooleanFunction,
    rho: f64,
    trials: u64,
    seed: u64,
    stream_base: u64,
    mode: ScanMode,
) -> Result<ScanResult> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::BadParameter { name: "rho", value: rho, reason: "outside [0, 1]".into() });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let n = f.n();
    let k_alive = (rho * n as f64).ceil() as usize;
    let mut ones = 0u64;
    let mut zeros = 0u64;
    let mut mean_sum = 0.0;
    let mut mean_sq_sum = 0.0;
    let mut variances = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let mut rng = substream(seed, stream_base + t);
        let r = match mode {
            ScanMode::Fixed => sample_fixed_alive(n, k_alive, &mut rng)?,
            ScanMode::Independent => sample_independent(n, 1.0 - rho, &mut rng)?,
        };
        let pp = r.to_partial_point();
        match f.constant_on(&pp) {
            Some(true) => ones += 1,
            Some(false) => zeros += 1,
            None => {}
        }
        let m = f.cond_mean(&pp);
        mean_sum += m;
        mean_sq_sum += m * m;
        variances.push(m * (1.0 - m));
    }
    variances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tf = trials as f64;
    let p_constant = (ones + zeros) as f64 / tf;
    let mean = mean_sum / tf;
    let mean_var = (mean_sq_sum / tf - mean * mean).max(0.0);
    Ok(ScanResult {
        rho,
        trials,
        seed,
        mode,
        p_constant,
        p_constant_se: (p_constant * (1.0 - p_constant) / tf).sqrt(),
        p_one: ones as f64 / tf,
        p_zero: zeros as f64 / tf,
        mean_of_means: mean,
        mean_se: (mean_var / tf).sqrt(),
        var_min: variances[0],
        var_q05: quantile(&variances, 0.05),
        var_q50: quantile(&variances, 0.50),
        var_q95: quantile(&variances, 0.95),
    })
}

pub fn scan(
    f: &BooleanFunction,
    rho_grid: &[f64],
    trials: u64,
    seed: u64,
    mode: ScanMode,
) -> Result<Vec<ScanResult>> {
    rho_grid
        .iter()
        .enumerate()
        .map(|(g, &rho)| scan_one(f, rho, trials, seed, g as u64 * trials, mode))
        .collect()
}

/// P[TR ≡ 1 after a restriction that fixes each variable with probability
/// 1 - 1/w]: (1 - (1/2 + 1/(2w))^w)^{n/w}, exact.
pub fn tribes_survival_formula(w: usize, n: usize) -> Result<f64> {
    if w == 0 || n % w != 0 {
        return Err(Error::BadParameter {
            name: "n",
            value: n as f64,
            reason: format!("not a multiple of w = {w}"),
        });
    }
    let per_var = 0.5 + 0.5 / w as f64;
    Ok((1.0 - per_var.powi(w as i32)).powi((n / w) as i32))
}
