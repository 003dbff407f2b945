//! Pointwise complexity measures: sensitivity, block sensitivity (exact
//! packing and the random-partition estimator), decision-tree depth, the
//! OSSS inequality, and the restricted-influence tail for monotone targets.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{submasks, BitPoint, PartialPoint};
use crate::error::{Error, Result};
use crate::family::BooleanFunction;
use crate::restriction::sample_fixed_alive;
use crate::rng::substream;
use crate::table::TruthTable;

/// Block-sensitivity search materializes the table and scans all 2^n blocks.
pub const MAX_BS_N: usize = 14;
/// Decision-tree search memoizes over at most 3^n subcubes.
pub const MAX_DT_N: usize = 12;
/// The naive (memo-free) recursion is an oracle for tiny n only.
pub const MAX_DT_NAIVE_N: usize = 6;
/// Per-block subset enumeration in the partition estimator.
pub const MAX_PARTITION_BLOCK: usize = 20;

// ════════════════════════════════════════════════════════════════════
// Sensitivity and block sensitivity
// ════════════════════════════════════════════════════════════════════

/// Number of Hamming neighbors of `x` on which `f` differs from `f(x)`.
pub fn sensitivity(f: &BooleanFunction, x: &BitPoint) -> Result<usize> {
    let n = f.n();
    if x.n() != n {
        return Err(Error::ArityMismatch { expected: n, got: x.n() });
    }
    let fx = f.eval(x);
    Ok((0..n).filter(|&i| f.eval(&x.flipped(i)) != fx).count())
}

/// A witness for a block-sensitivity lower bound: pairwise disjoint blocks,
/// each of which flips the value of `f` at `x`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCertificate {
    pub x: BitPoint,
    pub blocks: Vec<Vec<usize>>,
}

impl BlockCertificate {
    pub fn verify(&self, f: &BooleanFunction) -> Result<()> {
        let n = f.n();
        if self.x.n() != n {
            return Err(Error::ArityMismatch { expected: n, got: self.x.n() });
        }
        let fx = f.eval(&self.x);
        let mut used = 0u64;
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::Invariant("certificate contains an empty block".into()));
            }
            let mut mask = 0u64;
            for &c in b {
                if c >= n {
                    return Err(Error::CoordRange { i: c, n });
                }
                mask |= 1u64 << c;
            }
            if mask & used != 0 {
                return Err(Error::Invariant("certificate blocks overlap".into()));
            }
            used |= mask;
            if f.eval(&self.x.flipped_mask(mask)) == fx {
                return Err(Error::Invariant(format!("block {b:?} is not sensitive")));
            }
        }
        Ok(())
    }
}

/// Exact block sensitivity at `x`, with a verified maximum packing.
///
/// Every sensitive block contains a minimal one, so a maximum packing of
/// minimal sensitive blocks attains bs. Minimal blocks are found by one
/// ascending sweep over subsets; the packing is branch-and-bound seeded
/// with a greedy smallest-first solution.
pub fn bs_exact(f: &BooleanFunction, x: &BitPoint) -> Result<(usize, BlockCertificate)> {
    let n = f.n();
    if n > MAX_BS_N {
        return Err(Error::ArityCap { n, cap: MAX_BS_N, what: "block sensitivity search" });
    }
    if x.n() != n {
        return Err(Error::ArityMismatch { expected: n, got: x.n() });
    }
    let t = f.to_table()?;
    let xi = x.index() as u32;
    let fx = t.get(xi);
    let full = 1u32 << n;

    // reach[s]: some nonempty subset of s (possibly s itself) is sensitive.
    let mut reach = vec![false; full as usize];
    let mut minimal: Vec<u32> = Vec::new();
    for s in 1..full {
        let sens = t.get(xi ^ s) != fx;
        let mut sub = false;
        let mut rest = s;
        while rest != 0 {
            let b = rest & rest.wrapping_neg();
            if reach[(s ^ b) as usize] {
                sub = true;
                break;
            }
            rest ^= b;
        }
        reach[s as usize] = sens || sub;
        if sens && !sub {
            minimal.push(s);
        }
    }
    minimal.sort_by_key(|b| b.count_ones());

    let (bs, set) = pack_blocks(&minimal);
    let blocks = set
        .iter()
        .map(|&m| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>())
        .collect();
    let cert = BlockCertificate { x: x.clone(), blocks };
    cert.verify(f)?;
    Ok((bs, cert))
}

fn pack_blocks(blocks: &[u32]) -> (usize, Vec<u32>) {
    let mut best_set = Vec::new();
    let mut used = 0u32;
    for &b in blocks {
        if b & used == 0 {
            best_set.push(b);
            used |= b;
        }
    }
    let mut best = best_set.len();
    let mut chosen = Vec::new();
    pack_dfs(blocks, 0, &mut chosen, &mut best, &mut best_set);
    (best, best_set)
}

fn pack_dfs(cands: &[u32], used: u32, chosen: &mut Vec<u32>, best: &mut usize, best_set: &mut Vec<u32>) {
    if chosen.len() > *best {
        *best = chosen.len();
        best_set.clone_from(chosen);
    }
    let live: Vec<u32> = cands.iter().copied().filter(|b| b & used == 0).collect();
    if live.is_empty() {
        return;
    }
    let min_size = live.iter().map(|b| b.count_ones()).min().unwrap() as usize;
    let coverable: u32 = live.iter().fold(0, |a, b| a | b);
    let ub = chosen.len() + (coverable.count_ones() as usize / min_size).min(live.len());
    if ub <= *best {
        return;
    }
    // Branch on the lowest coverable coordinate: either some block takes it
    // or it stays uncovered for good.
    let cbit = 1u32 << coverable.trailing_zeros();
    for &b in live.iter().filter(|b| *b & cbit != 0) {
        chosen.push(b);
        pack_dfs(&live, used | b, chosen, best, best_set);
        chosen.pop();
    }
    pack_dfs(&live, used | cbit, chosen, best, best_set);
}

// ════════════════════════════════════════════════════════════════════
// Random-partition block sensitivity estimator
// ════════════════════════════════════════════════════════════════════

/// Shuffle coordinates and deal them round-robin: the first n mod m blocks
/// get one extra element.
pub fn equipartition<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut coords: Vec<usize> = (0..n).collect();
    coords.shuffle(rng);
    let mut blocks = vec![Vec::new(); m];
    for (j, c) in coords.into_iter().enumerate() {
        blocks[j % m].push(c);
    }
    blocks
}

/// Number of blocks S_i that contain a flipping subset at `x`, i.e. blocks
/// on which the restriction (S_i, x) is non-constant.
pub fn partition_count_at(f: &BooleanFunction, x: &BitPoint, blocks: &[Vec<usize>]) -> Result<usize> {
    let fx = f.eval(x);
    let mut count = 0;
    for b in blocks {
        if b.len() > MAX_PARTITION_BLOCK {
            return Err(Error::ArityCap {
                n: b.len(),
                cap: MAX_PARTITION_BLOCK,
                what: "partition block enumeration",
            });
        }
        let mut hit = false;
        for sub in 1u32..1u32 << b.len() {
            let mut mask = 0u64;
            for (j, &c) in b.iter().enumerate() {
                if sub >> j & 1 == 1 {
                    mask |= 1u64 << c;
                }
            }
            if f.eval(&x.flipped_mask(mask)) != fx {
                hit = true;
                break;
            }
        }
        count += usize::from(hit);
    }
    Ok(count)
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionEstimate {
    pub m_blocks: usize,
    pub trials: u64,
    pub seed: u64,
    pub block_size_max: usize,
    /// Mean number of sensitive blocks; each count lower-bounds bs at its x.
    pub mean_count: f64,
    pub p_count_ge_half: f64,
    pub p_count_ge_half_se: f64,
    pub p_count_lt_half: f64,
    /// Probability that a uniformly chosen block restriction is constant.
    pub p_restricted_constant: f64,
    pub double_count_lhs: f64,
    pub double_count_rhs: f64,
    pub double_count_holds: bool,
}

/// For each trial, sample x and a fresh equipartition into `m` blocks, and
/// count sensitive blocks. Reports the tail P[count >= m/2] and the
/// double-counting comparison (1/2) P[count < m/2] <= P[restriction constant],
/// which holds pointwise per trial.
pub fn bs_partition_estimate(
    f: &BooleanFunction,
    m: usize,
    trials: u64,
    seed: u64,
) -> Result<PartitionEstimate> {
    let n = f.n();
    if m == 0 || m > n {
        return Err(Error::BadParameter {
            name: "m_blocks",
            value: m as f64,
            reason: format!("must lie in [1, {n}]"),
        });
    }
    let block_size_max = n.div_ceil(m);
    if block_size_max > MAX_PARTITION_BLOCK {
        return Err(Error::ArityCap {
            n: block_size_max,
            cap: MAX_PARTITION_BLOCK,
            what: "partition block enumeration",
        });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    let counts: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let x = BitPoint::random(n, &mut rng);
            let blocks = equipartition(n, m, &mut rng);
            partition_count_at(f, &x, &blocks).expect("block size checked above")
        })
        .collect();
    let tf = trials as f64;
    let mean_count = counts.iter().sum::<usize>() as f64 / tf;
    let ge = counts.iter().filter(|&&c| 2 * c >= m).count() as f64 / tf;
    let lt = 1.0 - ge;
    let p_const = counts.iter().map(|&c| (m - c) as f64 / m as f64).sum::<f64>() / tf;
    Ok(PartitionEstimate {
        m_blocks: m,
        trials,
        seed,
        block_size_max,
        mean_count,
        p_count_ge_half: ge,
        p_count_ge_half_se: (ge * (1.0 - ge) / tf).sqrt(),
        p_count_lt_half: lt,
        p_restricted_constant: p_const,
        double_count_lhs: lt / 2.0,
        double_count_rhs: p_const,
        double_count_holds: lt / 2.0 <= p_const + 1e-12,
    })
}

// ════════════════════════════════════════════════════════════════════
// Decision-tree depth
// ════════════════════════════════════════════════════════════════════

/// Exact deterministic decision-tree depth, memoized on the reached subcube.
pub fn dt_exact(f: &BooleanFunction) -> Result<usize> {
    let n = f.n();
    if n > MAX_DT_N {
        return Err(Error::ArityCap { n, cap: MAX_DT_N, what: "decision tree search" });
    }
    let t = f.to_table()?;
    let mut memo: HashMap<(u32, u32), u8> = HashMap::new();
    Ok(dt_rec(&t, 0, 0, &mut memo) as usize)
}

fn subcube_constant(t: &TruthTable, fixed: u32, signs: u32) -> bool {
    let free = !fixed & ((1u32 << t.n()) - 1);
    let first = t.get(signs);
    submasks(free).all(|s| t.get(signs | s) == first)
}

fn dt_rec(t: &TruthTable, fixed: u32, signs: u32, memo: &mut HashMap<(u32, u32), u8>) -> u8 {
    if let Some(&v) = memo.get(&(fixed, signs)) {
        return v;
    }
    let v = if subcube_constant(t, fixed, signs) {
        0
    } else {
        let mut best = u8::MAX;
        for i in 0..t.n() {
            let bit = 1u32 << i;
            if fixed & bit != 0 {
                continue;
            }
            let hi = dt_rec(t, fixed | bit, signs, memo);
            let lo = dt_rec(t, fixed | bit, signs | bit, memo);
            best = best.min(1 + hi.max(lo));
            if best == 1 {
                break;
            }
        }
        best
    };
    memo.insert((fixed, signs), v);
    v
}

/// Memo-free recursion over partial points, using the combinatorial
/// constancy test instead of table scans. Oracle for `dt_exact`.
pub fn dt_naive(f: &BooleanFunction) -> Result<usize> {
    let n = f.n();
    if n > MAX_DT_NAIVE_N {
        return Err(Error::ArityCap { n, cap: MAX_DT_NAIVE_N, what: "naive decision tree search" });
    }
    fn rec(f: &BooleanFunction, p: &mut PartialPoint) -> usize {
        if f.constant_on(p).is_some() {
            return 0;
        }
        let alive: Vec<usize> = p.alive_iter().collect();
        let mut best = usize::MAX;
        for i in alive {
            p.fix(i, 1);
            let hi = rec(f, p);
            p.fix(i, -1);
            let lo = rec(f, p);
            p.release(i);
            best = best.min(1 + hi.max(lo));
        }
        best
    }
    Ok(rec(f, &mut PartialPoint::all_alive(n)))
}

// ════════════════════════════════════════════════════════════════════
// OSSS inequality
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceKind {
    Flip,
    Spectral,
}

#[derive(Debug, Clone, Serialize)]
pub struct OsssCheck {
    pub influence: InfluenceKind,
    pub m_inf: f64,
    pub dt: usize,
    pub lhs: f64,
    pub variance: f64,
    pub holds: bool,
}

/// mINF(f) * DT(f) >= Var[f]. Provable for the flip influence; the spectral
/// variant is a reported experiment.
pub fn osss_check(f: &BooleanFunction, kind: InfluenceKind) -> Result<OsssCheck> {
    let dt = dt_exact(f)?;
    let m_inf = match kind {
        InfluenceKind::Flip => f.max_influence_flip()?,
        InfluenceKind::Spectral => f.max_influence_spectral()?,
    };
    let variance = f.variance();
    let lhs = m_inf * dt as f64;
    Ok(OsssCheck { influence: kind, m_inf, dt, lhs, variance, holds: lhs + 1e-12 >= variance })
}

// ════════════════════════════════════════════════════════════════════
// Restricted influence of monotone functions
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct RestrictedInfluenceTail {
    pub rho: f64,
    pub k_alive: usize,
    pub trials: u64,
    pub seed: u64,
    /// Spectral max influence of the unrestricted function.
    pub m_inf: f64,
    /// Event threshold m_inf^(rho/30).
    pub threshold: f64,
    pub empirical: f64,
    pub empirical_se: f64,
    /// m_inf^(rho/40) + exp(-rho n / 8).
    pub bound: f64,
    pub holds_3sigma: bool,
    pub mean_restricted_m_inf: f64,
    /// Monotonicity known structurally rather than verified on a table.
    pub monotone_assumed: bool,
}

/// Tail estimate of P[mINF(f|R) >= mINF(f)^(rho/30)] over restrictions that
/// keep exactly ceil(rho n) coordinates alive.
///
/// For monotone f the derivative has one sign, so by the tower property the
/// spectral influence of the restricted function is exactly half the
/// conditional derivative at the restriction: INF_i(f|R) = |d_i f(Y)| / 2
/// for every alive i. That identity makes the per-trial max influence exact
/// without materializing the restricted table.
pub fn monotone_restricted_influence(
    f: &BooleanFunction,
    rho: f64,
    trials: u64,
    seed: u64,
) -> Result<RestrictedInfluenceTail> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BadParameter { name: "rho", value: rho, reason: "must lie in (0, 1)".into() });
    }
    if trials == 0 {
        return Err(Error::BadParameter { name: "trials", value: 0.0, reason: "must be >= 1".into() });
    }
    if f.variance() == 0.0 {
        return Err(Error::BadParameter {
            name: "f",
            value: f.mean(),
            reason: "constant function: restricted influence is identically zero".into(),
        });
    }
    if !f.is_monotone() {
        return Err(Error::BadParameter {
            name: "f",
            value: f.mean(),
            reason: "requires a monotone function".into(),
        });
    }
    let n = f.n();
    let k = ((rho * n as f64).ceil() as usize).clamp(1, n);
    let m_inf = f.max_influence_spectral()?;
    let threshold = m_inf.powf(rho / 30.0);
    let per_trial: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let r = sample_fixed_alive(n, k, &mut rng).expect("1 <= k <= n");
            let p = r.to_partial_point();
            let max_der = f.gradient(&p).into_iter().fold(0.0f64, |a, (_, d)| a.max(d.abs()));
            let restricted_m_inf = max_der / 2.0;
            (restricted_m_inf, restricted_m_inf >= threshold)
        })
        .collect();
    let tf = trials as f64;
    let empirical = per_trial.iter().filter(|(_, hit)| *hit).count() as f64 / tf;
    let se = (empirical * (1.0 - empirical) / tf).sqrt();
    let bound = m_inf.powf(rho / 40.0) + (-(rho * n as f64) / 8.0).exp();
    Ok(RestrictedInfluenceTail {
        rho,
        k_alive: k,
        trials,
        seed,
        m_inf,
        threshold,
        empirical,
        empirical_se: se,
        bound,
        holds_3sigma: empirical <= bound + 3.0 * se,
        mean_restricted_m_inf: per_trial.iter().map(|(v, _)| v).sum::<f64>() / tf,
        monotone_assumed: !matches!(f, BooleanFunction::Table(_)),
    })
}

// ════════════════════════════════════════════════════════════════════
// Average sensitivity diagnostic
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone, Serialize)]
pub struct KklDiagnostic {
    /// E_x[s_f(x)] = total flip influence, exactly.
    pub avg_sensitivity: f64,
    pub variance: f64,
    pub m_inf_flip: f64,
    pub log2_var_over_m_inf: f64,
    /// avg_sensitivity / log2(Var/mINF), when the denominator is positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

pub fn kkl_diagnostic(f: &BooleanFunction) -> Result<KklDiagnostic> {
    let infl = f.influences_flip()?;
    let avg_sensitivity: f64 = infl.iter().sum();
    let m_inf_flip = infl.iter().fold(0.0f64, |a, &b| a.max(b));
    let variance = f.variance();
    if variance == 0.0 || m_inf_flip == 0.0 {
        return Err(Error::BadParameter {
            name: "f",
            value: f.mean(),
            reason: "constant function has no sensitivity diagnostic".into(),
        });
    }
    let log2 = (variance / m_inf_flip).log2();
    Ok(KklDiagnostic {
        avg_sensitivity,
        variance,
        m_inf_flip,
        log2_var_over_m_inf: log2,
        ratio: (log2 > 0.0).then(|| avg_sensitivity / log2),
    })
}

// ════════════════════════════════════════════════════════════════════
