//! Function families and the unified function handle.
//!
//! `BooleanFunction` is the one type the rest of the crate works with. It
//! wraps either a materialized truth table or one of the closed-form
//! families, and exposes evaluation together with the multilinear extension:
//! cond_mean at a partial point is the exact average of f over all
//! completions of the alive coordinates, and cond_derivative is
//! (f(x, i -> +1) - f(x, i -> -1)) / 2.
//!
//! Families:
//!   tribes(w, c)  AND of c disjoint OR-clauses of width w; clause j holds
//!                 coordinates jw..(j+1)w-1. When c is not given, n = wc is
//!                 sized as the smallest multiple of w with
//!                 (1 - 2^-w)^c <= 1/2.
//!   majority(n)   1 iff sum x_i <= 0 (ties map to 1); odd n unless opted in.
//!   parity(n)     1 iff the number of -1 coordinates is odd.
//!   and(n)/or(n)  all of / at least one -1; both are tribes corner cases.
//!   dictator(n,i) copies coordinate i.
//!
//! Closed-form cond_mean: tribes multiplies per-clause satisfaction
//! probabilities (1 if the clause holds a fixed -1, else 1 - 2^-a for a
//! alive slots); majority takes an exact binomial upper tail over the alive
//! coordinates. Both are dyadic rationals and stay exact in f64 at the
//! arities where the table oracle can double-check them.

use std::fmt;
use std::sync::OnceLock;

use rand::SeedableRng;

use crate::bits::{BitPoint, PartialPoint};
use crate::error::{Error, Result};
use crate::table::{TruthTable, MAX_TABLE_N};

// ════════════════════════════════════════════════════════════════════
// Exact binomial tails (for majority)
// ════════════════════════════════════════════════════════════════════

const BINOM_EXACT_MAX: usize = 120;

/// cum[a][r] = sum_{m >= r} C(a, m), rows a = 0..=BINOM_EXACT_MAX.
fn binom_upper_sums() -> &'static Vec<Vec<u128>> {
    static SUMS: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    SUMS.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(BINOM_EXACT_MAX + 1);
        let mut row: Vec<u128> = vec![1];
        for a in 0..=BINOM_EXACT_MAX {
            if a > 0 {
                let mut next = vec![1u128; a + 1];
                for m in 1..a {
                    next[m] = row[m - 1] + row[m];
                }
                row = next;
            }
            let mut cum = vec![0u128; a + 2];
            for m in (0..=a).rev() {
                cum[m] = cum[m + 1] + row[m];
            }
            rows.push(cum);
        }
        rows
    })
}

/// P[Bin(a, 1/2) >= r], exact for a <= BINOM_EXACT_MAX.
fn binom_tail(a: usize, r: i64) -> f64 {
    if r <= 0 {
        return 1.0;
    }
    if r as usize > a {
        return 0.0;
    }
    let r = r as usize;
    if a <= BINOM_EXACT_MAX {
        let cum = &binom_upper_sums()[a];
        return cum[r] as f64 / (a as f64).exp2();
    }
    // Large-arity fallback: stable pmf recurrence, relative error ~1e-15.
    let mut p = (-(a as f64)).exp2();
    let mut acc = 0.0;
    for m in 0..=a {
        if m >= r {
            acc += p;
        }
        if m < a {
            p *= (a - m) as f64 / (m + 1) as f64;
        }
    }
    acc
}

/// P[Bin(a, 1/2) = m].
fn binom_pmf(a: usize, m: i64) -> f64 {
    if m < 0 || m as usize > a {
        return 0.0;
    }
    binom_tail(a, m) - binom_tail(a, m + 1)
}

// ════════════════════════════════════════════════════════════════════
// BooleanFunction
// ════════════════════════════════════════════════════════════════════

#[derive(Debug, Clone)]
pub enum BooleanFunction {
    Table(TruthTable),
    Tribes { width: usize, clauses: usize },
    Majority { n: usize },
    Parity { n: usize },
    And { n: usize },
    Or { n: usize },
    Dictator { n: usize, coord: usize },
    Not(Box<BooleanFunction>),
    /// `inner` with `base`'s fixed coordinates threaded through; coordinate j
    /// of the restricted function is inner coordinate `alive[j]` (ascending).
    Restricted { inner: Box<BooleanFunction>, base: PartialPoint, alive: Vec<usize> },
}

/// Smallest c >= 1 with (1 - 2^-w)^c <= 1/2.
pub fn tribes_clause_count(width: usize) -> usize {
    assert!(width >= 1);
    let factor = 1.0 - (-(width as f64)).exp2();
    let mut acc = 1.0;
    let mut c = 0;
    loop {
        acc *= factor;
        c += 1;
        if acc <= 0.5 {
            return c;
        }
    }
}

impl BooleanFunction {
    pub fn table(t: TruthTable) -> Self {
        BooleanFunction::Table(t)
    }

    /// Tribes sized by the rule above: n is the smallest multiple of w with
    /// mean (1 - 2^-w)^{n/w} <= 1/2.
    pub fn tribes(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::BadParameter {
                name: "w",
                value: 0.0,
                reason: "tribes width must be at least 1".into(),
            });
        }
        Ok(BooleanFunction::Tribes { width, clauses: tribes_clause_count(width) })
    }

    pub fn tribes_with(width: usize, clauses: usize) -> Result<Self> {
        if width == 0 || clauses == 0 {
            return Err(Error::BadParameter {
                name: "w",
                value: 0.0,
                reason: "tribes width and clause count must be at least 1".into(),
            });
        }
        Ok(BooleanFunction::Tribes { width, clauses })
    }

    /// Majority with ties mapping to 1; even n is rejected unless `allow_even`.
    pub fn majority(n: usize, allow_even: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParameter {
                name: "n",
                value: 0.0,
                reason: "majority needs at least one coordinate".into(),
            });
        }
        if n % 2 == 0 && !allow_even {
            return Err(Error::BadParameter {
                name: "n",
                value: n as f64,
                reason: "even n rejected by default; pass even=true to opt in (ties map to 1)"
                    .into(),
            });
        }
        Ok(BooleanFunction::Majority { n })
    }

    pub fn parity(n: usize) -> Self {
        BooleanFunction::Parity { n }
    }

    pub fn and(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParameter {
                name: "n",
                value: 0.0,
                reason: "and needs at least one coordinate".into(),
            });
        }
        Ok(BooleanFunction::And { n })
    }

    pub fn or(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParameter {
                name: "n",
                value: 0.0,
                reason: "or needs at least one coordinate".into(),
            });
        }
        Ok(BooleanFunction::Or { n })
    }

    /// `coord` is 0-based here; the spec grammar uses 1-based `i`.
    pub fn dictator(n: usize, coord: usize) -> Result<Self> {
        if coord >= n {
            return Err(Error::CoordRange { i: coord, n });
        }
        Ok(BooleanFunction::Dictator { n, coord })
    }

    pub fn negated(self) -> Self {
        match self {
            BooleanFunction::Not(inner) => *inner,
            other => BooleanFunction::Not(Box::new(other)),
        }
    }

    /// The restricted function on `base`'s alive coordinates.
    pub fn restricted(&self, base: &PartialPoint) -> Self {
        assert_eq!(base.n(), self.n(), "restriction arity mismatch");
        BooleanFunction::Restricted {
            inner: Box::new(self.clone()),
            base: base.clone(),
            alive: base.alive_iter().collect(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            BooleanFunction::Table(t) => t.n(),
            BooleanFunction::Tribes { width, clauses } => width * clauses,
            BooleanFunction::Majority { n }
            | BooleanFunction::Parity { n }
            | BooleanFunction::And { n }
            | BooleanFunction::Or { n }
            | BooleanFunction::Dictator { n, .. } => *n,
            BooleanFunction::Not(inner) => inner.n(),
            BooleanFunction::Restricted { alive, .. } => alive.len(),
        }
    }

    // ── evaluation ────────────────────────────────────────────────────

    pub fn eval(&self, x: &BitPoint) -> bool {
        assert_eq!(x.n(), self.n(), "arity mismatch");
        match self {
            BooleanFunction::Table(t) => t.eval(x),
            BooleanFunction::Tribes { width, clauses } => (0..*clauses).all(|j| {
                (j * width..(j + 1) * width).any(|i| x.sign(i) == -1)
            }),
            BooleanFunction::Majority { n } => {
                let minus = (0..*n).filter(|&i| x.sign(i) == -1).count();
                2 * minus >= *n
            }
            BooleanFunction::Parity { n } => {
                (0..*n).filter(|&i| x.sign(i) == -1).count() % 2 == 1
            }
            BooleanFunction::And { n } => (0..*n).all(|i| x.sign(i) == -1),
            BooleanFunction::Or { n } => (0..*n).any(|i| x.sign(i) == -1),
            BooleanFunction::Dictator { coord, .. } => x.sign(*coord) == -1,
            BooleanFunction::Not(inner) => !inner.eval(x),
            BooleanFunction::Restricted { inner, base, alive } => {
                let mut signs: Vec<i8> = base.states().to_vec();
                for (j, &orig) in alive.iter().enumerate() {
                    signs[orig] = x.sign(j);
                }
                inner.eval(&BitPoint::from_signs(signs))
            }
        }
    }

    // ── multilinear extension ─────────────────────────────────────────

    /// Exact average of f over all completions of the alive coordinates.
    pub fn cond_mean(&self, x: &PartialPoint) -> f64 {
        assert_eq!(x.n(), self.n(), "arity mismatch");
        match self {
            BooleanFunction::Table(t) => {
                let (ones, size) = t.subcube_ones(x);
                ones as f64 / size as f64
            }
            BooleanFunction::Tribes { width, clauses } => {
                tribes_mean(*width, *clauses, x.states())
            }
            BooleanFunction::Majority { n } => {
                let (minus, al) = minus_alive_counts(x.states());
                majority_mean(*n, minus, al)
            }
            BooleanFunction::Parity { n } => {
                if x.alive_count() > 0 {
                    0.5
                } else {
                    let minus = (0..*n).filter(|&i| x.state(i) == -1).count();
                    (minus % 2) as f64
                }
            }
            BooleanFunction::And { n } => tribes_mean(1, *n, x.states()),
            BooleanFunction::Or { n } => tribes_mean(*n, 1, x.states()),
            BooleanFunction::Dictator { coord, .. } => match x.state(*coord) {
                0 => 0.5,
                -1 => 1.0,
                _ => 0.0,
            },
            BooleanFunction::Not(inner) => 1.0 - inner.cond_mean(x),
            BooleanFunction::Restricted { inner, base, alive } => {
                inner.cond_mean(&compose(base, alive, x))
            }
        }
    }

    /// Derivative of the multilinear extension in coordinate i, regardless of
    /// whether i is alive or fixed in x.
    pub fn derivative_at(&self, x: &PartialPoint, i: usize) -> f64 {
        assert_eq!(x.n(), self.n(), "arity mismatch");
        assert!(i < self.n(), "coordinate out of range");
        match self {
            BooleanFunction::Tribes { width, clauses } => {
                tribes_derivative(*width, *clauses, x.states(), i)
            }
            BooleanFunction::And { n } => tribes_derivative(1, *n, x.states(), i),
            BooleanFunction::Or { n } => tribes_derivative(*n, 1, x.states(), i),
            BooleanFunction::Majority { n } => {
                let (minus, al) = minus_alive_counts(x.states());
                let (m, a) = counts_without(x.state(i), minus, al);
                (majority_mean(*n, m, a) - majority_mean(*n, m + 1, a)) / 2.0
            }
            BooleanFunction::Parity { n } => {
                let other_alive = x.alive_count() - usize::from(x.is_alive(i));
                if other_alive > 0 {
                    0.0
                } else {
                    let minus_others = (0..*n)
                        .filter(|&j| j != i && x.state(j) == -1)
                        .count();
                    if minus_others % 2 == 0 {
                        -0.5
                    } else {
                        0.5
                    }
                }
            }
            BooleanFunction::Dictator { coord, .. } => {
                if i == *coord {
                    -0.5
                } else {
                    0.0
                }
            }
            BooleanFunction::Not(inner) => -inner.derivative_at(x, i),
            BooleanFunction::Restricted { inner, base, alive } => {
                inner.derivative_at(&compose(base, alive, x), alive[i])
            }
            BooleanFunction::Table(_) => {
                let mut hi = x.clone();
                hi.fix(i, 1);
                let mut lo = x.clone();
                lo.fix(i, -1);
                (self.cond_mean(&hi) - self.cond_mean(&lo)) / 2.0
            }
        }
    }

    /// The spec'd derivative: only defined on alive coordinates.
    pub fn cond_derivative(&self, x: &PartialPoint, i: usize) -> Result<f64> {
        if i >= self.n() {
            return Err(Error::CoordRange { i, n: self.n() });
        }
        if !x.is_alive(i) {
            return Err(Error::BadParameter {
                name: "i",
                value: i as f64,
                reason: "coordinate already fixed".into(),
            });
        }
        Ok(self.derivative_at(x, i))
    }

    /// Gradient over alive coordinates; fixed coordinates are absent.
    pub fn gradient(&self, x: &PartialPoint) -> Vec<(usize, f64)> {
        x.alive_iter().map(|i| (i, self.derivative_at(x, i))).collect()
    }

    /// max over all i in [n] of |d_i f(x)|, the breaking-condition quantity.
    pub fn max_abs_derivative(&self, x: &PartialPoint) -> f64 {
        assert_eq!(x.n(), self.n(), "arity mismatch");
        match self {
            BooleanFunction::Tribes { width, clauses } => {
                tribes_max_abs_derivative(*width, *clauses, x.states())
            }
            BooleanFunction::And { n } => tribes_max_abs_derivative(1, *n, x.states()),
            BooleanFunction::Or { n } => tribes_max_abs_derivative(*n, 1, x.states()),
            BooleanFunction::Majority { n } => {
                let (minus, al) = minus_alive_counts(x.states());
                let r = required_minus(*n) as i64 - minus as i64;
                let mut best = 0.0f64;
                if al > 0 {
                    best = best.max(binom_pmf(al - 1, r - 1) / 2.0);
                }
                if minus > 0 {
                    best = best.max(binom_pmf(al, r) / 2.0);
                }
                if minus + al < *n {
                    best = best.max(binom_pmf(al, r - 1) / 2.0);
                }
                best
            }
            BooleanFunction::Not(inner) => inner.max_abs_derivative(x),
            _ => (0..self.n())
                .map(|i| self.derivative_at(x, i).abs())
                .fold(0.0, f64::max),
        }
    }

    /// max over alive i of |d_i f(x)| (the beta* variant); 0 if none alive.
    pub fn max_abs_derivative_alive(&self, x: &PartialPoint) -> f64 {
        x.alive_iter()
            .map(|i| self.derivative_at(x, i).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.cond_mean(&PartialPoint::all_alive(self.n()))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        m * (1.0 - m)
    }

    /// Some(v) iff f is the constant v on the subcube of x, decided
    /// combinatorially, never through floating point.
    pub fn constant_on(&self, x: &PartialPoint) -> Option<bool> {
        assert_eq!(x.n(), self.n(), "arity mismatch");
        match self {
            BooleanFunction::Table(t) => {
                let (ones, size) = t.subcube_ones(x);
                if ones == 0 {
                    Some(false)
                } else if ones == size {
                    Some(true)
                } else {
                    None
                }
            }
            BooleanFunction::Tribes { width, clauses } => {
                tribes_constant(*width, *clauses, x.states())
            }
            BooleanFunction::And { n } => tribes_constant(1, *n, x.states()),
            BooleanFunction::Or { n } => tribes_constant(*n, 1, x.states()),
            BooleanFunction::Majority { n } => {
                let (minus, al) = minus_alive_counts(x.states());
                let r = required_minus(*n);
                if minus >= r {
                    Some(true)
                } else if minus + al < r {
                    Some(false)
                } else {
                    None
                }
            }
            BooleanFunction::Parity { n } => {
                if x.alive_count() > 0 {
                    None
                } else {
                    let minus = (0..*n).filter(|&i| x.state(i) == -1).count();
                    Some(minus % 2 == 1)
                }
            }
            BooleanFunction::Dictator { coord, .. } => match x.state(*coord) {
                0 => None,
                s => Some(s == -1),
            },
            BooleanFunction::Not(inner) => inner.constant_on(x).map(|b| !b),
            BooleanFunction::Restricted { inner, base, alive } => {
                inner.constant_on(&compose(base, alive, x))
            }
        }
    }

    pub fn constant_value(&self) -> Option<bool> {
        self.constant_on(&PartialPoint::all_alive(self.n()))
    }

    // ── influences ────────────────────────────────────────────────────

    /// P[f(x) != f(x with coordinate i flipped)] under uniform x.
    pub fn influence_flip(&self, i: usize) -> Result<f64> {
        let n = self.n();
        if i >= n {
            return Err(Error::CoordRange { i, n });
        }
        match self {
            BooleanFunction::Table(t) => {
                let bit = 1u64 << i;
                let mut count = 0u64;
                for k in 0..t.size() {
                    if k & bit == 0
                        && t.get(k as u32) != t.get((k | bit) as u32)
                    {
                        count += 1;
                    }
                }
                Ok(count as f64 / (t.size() / 2) as f64)
            }
            BooleanFunction::Tribes { width, clauses } => {
                let s = 1.0 - (-(*width as f64)).exp2();
                Ok((1.0 - *width as f64).exp2() * s.powi(*clauses as i32 - 1))
            }
            BooleanFunction::Majority { n } => {
                Ok(binom_pmf(*n - 1, required_minus(*n) as i64 - 1))
            }
            BooleanFunction::Parity { .. } => Ok(1.0),
            BooleanFunction::And { n } | BooleanFunction::Or { n } => {
                Ok((1.0 - *n as f64).exp2())
            }
            BooleanFunction::Dictator { coord, .. } => {
                Ok(if i == *coord { 1.0 } else { 0.0 })
            }
            BooleanFunction::Not(inner) => inner.influence_flip(i),
            BooleanFunction::Restricted { .. } => {
                let t = self.to_table()?;
                BooleanFunction::Table(t).influence_flip(i)
            }
        }
    }

    /// E[(d_i f)^2]; one quarter of the flip influence for {0,1}-valued f.
    pub fn influence_spectral(&self, i: usize) -> Result<f64> {
        Ok(self.influence_flip(i)? / 4.0)
    }

    pub fn influences_flip(&self) -> Result<Vec<f64>> {
        (0..self.n()).map(|i| self.influence_flip(i)).collect()
    }

    pub fn max_influence_flip(&self) -> Result<f64> {
        Ok(self
            .influences_flip()?
            .into_iter()
            .fold(0.0, f64::max))
    }

    pub fn max_influence_spectral(&self) -> Result<f64> {
        Ok(self.max_influence_flip()? / 4.0)
    }

    // ── structure ─────────────────────────────────────────────────────

    /// Monotone: flipping any coordinate from +1 to -1 never decreases f.
    pub fn is_monotone(&self) -> bool {
        match self {
            BooleanFunction::Table(t) => table_monotone(t),
            BooleanFunction::Tribes { .. }
            | BooleanFunction::Majority { .. }
            | BooleanFunction::And { .. }
            | BooleanFunction::Or { .. }
            | BooleanFunction::Dictator { .. } => true,
            BooleanFunction::Parity { n } => *n <= 1,
            BooleanFunction::Not(_) => match self.to_table() {
                Ok(t) => table_monotone(&t),
                Err(_) => false,
            },
            BooleanFunction::Restricted { inner, .. } => {
                inner.is_monotone()
                    || match self.to_table() {
                        Ok(t) => table_monotone(&t),
                        Err(_) => false,
                    }
            }
        }
    }

    pub fn to_table(&self) -> Result<TruthTable> {
        if let BooleanFunction::Table(t) = self {
            return Ok(t.clone());
        }
        let n = self.n();
        if n > MAX_TABLE_N {
            return Err(Error::ArityCap { n, cap: MAX_TABLE_N, what: "table materialization" });
        }
        TruthTable::from_fn(n, |k| self.eval(&BitPoint::from_index(n, k as u64)))
    }
}

fn compose(base: &PartialPoint, alive: &[usize], x: &PartialPoint) -> PartialPoint {
    let mut states = base.states().to_vec();
    for (j, &orig) in alive.iter().enumerate() {
        states[orig] = x.state(j);
    }
    PartialPoint::from_states(states)
}

fn table_monotone(t: &TruthTable) -> bool {
    for i in 0..t.n() {
        let bit = 1u64 << i;
        for k in 0..t.size() {
            if k & bit == 0 && t.get(k as u32) && !t.get((k | bit) as u32) {
                return false;
            }
        }
    }
    true
}

fn minus_alive_counts(states: &[i8]) -> (usize, usize) {
    let mut minus = 0;
    let mut alive = 0;
    for &s in states {
        match s {
            -1 => minus += 1,
            0 => alive += 1,
            _ => {}
        }
    }
    (minus, alive)
}

/// Counts with coordinate of state `s` removed, for force-and-recompute.
fn counts_without(s: i8, minus: usize, alive: usize) -> (usize, usize) {
    match s {
        -1 => (minus - 1, alive),
        0 => (minus, alive - 1),
        _ => (minus, alive),
    }
}

fn required_minus(n: usize) -> usize {
    n.div_ceil(2)
}

/// P[MAJ_n = 1 | `minus` fixed -1s, `alive` alive coordinates].
fn majority_mean(n: usize, minus: usize, alive: usize) -> f64 {
    binom_tail(alive, required_minus(n) as i64 - minus as i64)
}

// ── tribes closed forms (AND of ORs; clause j = coords jw..(j+1)w-1) ──

/// Satisfaction probability of one clause: 1 with a fixed -1 present, else
/// 1 - 2^-alive (0 when fully fixed to +1).
fn clause_state(states: &[i8], lo: usize, hi: usize) -> f64 {
    let mut alive = 0usize;
    for &s in &states[lo..hi] {
        if s == -1 {
            return 1.0;
        }
        if s == 0 {
            alive += 1;
        }
    }
    1.0 - (-(alive as f64)).exp2()
}

fn tribes_mean(w: usize, c: usize, states: &[i8]) -> f64 {
    (0..c).map(|j| clause_state(states, j * w, (j + 1) * w)).product()
}

fn tribes_derivative(w: usize, c: usize, states: &[i8], i: usize) -> f64 {
    let j = i / w;
    let mut alive_others = 0usize;
    for k in j * w..(j + 1) * w {
        if k == i {
            continue;
        }
        match states[k] {
            -1 => return 0.0,
            0 => alive_others += 1,
            _ => {}
        }
    }
    let rest: f64 = (0..c)
        .filter(|&j2| j2 != j)
        .map(|j2| clause_state(states, j2 * w, (j2 + 1) * w))
        .product();
    -(-(alive_others as f64 + 1.0)).exp2() * rest
}

fn tribes_constant(w: usize, c: usize, states: &[i8]) -> Option<bool> {
    let mut all_have_minus = true;
    for j in 0..c {
        let clause = &states[j * w..(j + 1) * w];
        let has_minus = clause.iter().any(|&s| s == -1);
        if !has_minus && clause.iter().all(|&s| s == 1) {
            return Some(false);
        }
        all_have_minus &= has_minus;
    }
    if all_have_minus {
        Some(true)
    } else {
        None
    }
}

fn tribes_max_abs_derivative(w: usize, c: usize, states: &[i8]) -> f64 {
    let s: Vec<f64> = (0..c).map(|j| clause_state(states, j * w, (j + 1) * w)).collect();
    let mut prefix = vec![1.0f64; c + 1];
    for j in 0..c {
        prefix[j + 1] = prefix[j] * s[j];
    }
    let mut suffix = vec![1.0f64; c + 1];
    for j in (0..c).rev() {
        suffix[j] = suffix[j + 1] * s[j];
    }
    let mut best = 0.0f64;
    for j in 0..c {
        let clause = &states[j * w..(j + 1) * w];
        let minus = clause.iter().filter(|&&v| v == -1).count();
        if minus >= 2 {
            continue;
        }
        let alive = clause.iter().filter(|&&v| v == 0).count();
        let rest = prefix[j] * suffix[j + 1];
        let exp = if minus == 1 {
            alive + 1
        } else if alive >= 1 {
            alive
        } else {
            1
        };
        best = best.max((-(exp as f64)).exp2() * rest);
    }
    best
}

// ════════════════════════════════════════════════════════════════════
// FunctionSpec: the `name:key=val,...` mini-grammar
// ════════════════════════════════════════════════════════════════════

/// Parsed form of a function spec string such as `tribes:w=5`,
/// `maj:n=101`, `dict:n=6,i=2` (i is 1-based), or `table:path=f.tt`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Table { path: String },
    Tribes { w: usize, c: Option<usize> },
    Majority { n: usize, even: bool },
    Parity { n: usize },
    And { n: usize },
    Or { n: usize },
    Dictator { n: usize, i: usize },
    Random { n: usize, seed: u64, bias: f64 },
}

impl FunctionSpec {
    pub fn parse(text: &str) -> Result<FunctionSpec> {
        let bad = |reason: String| Error::BadSpec { spec: text.to_string(), reason };
        let (name, rest) = match text.split_once(':') {
            Some((a, b)) => (a, b),
            None => (text, ""),
        };
        let mut keys: Vec<(&str, &str)> = Vec::new();
        if !rest.is_empty() {
            for piece in rest.split(',') {
                let (k, v) = piece
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=val, got `{piece}`")))?;
                keys.push((k, v));
            }
        }
        let lookup = |key: &str| keys.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let parse_usize = |key: &str| -> Result<usize> {
            let v = lookup(key).ok_or_else(|| bad(format!("missing key `{key}`")))?;
            v.parse().map_err(|_| bad(format!("key `{key}`: `{v}` is not a positive integer")))
        };
        let known = |allowed: &[&str]| -> Result<()> {
            for (k, _) in &keys {
                if !allowed.contains(k) {
                    return Err(bad(format!("unknown key `{k}`")));
                }
            }
            Ok(())
        };
        match name {
            "table" => {
                known(&["path"])?;
                let path = lookup("path").ok_or_else(|| bad("missing key `path`".into()))?;
                Ok(FunctionSpec::Table { path: path.to_string() })
            }
            "tribes" => {
                known(&["w", "c"])?;
                let w = parse_usize("w")?;
                let c = if lookup("c").is_some() { Some(parse_usize("c")?) } else { None };
                Ok(FunctionSpec::Tribes { w, c })
            }
            "maj" | "majority" => {
                known(&["n", "even"])?;
                let n = parse_usize("n")?;
                let even = match lookup("even") {
                    None => false,
                    Some("true") | Some("1") => true,
                    Some("false") | Some("0") => false,
                    Some(v) => return Err(bad(format!("key `even`: `{v}` is not a boolean"))),
                };
                Ok(FunctionSpec::Majority { n, even })
            }
            "parity" => {
                known(&["n"])?;
                Ok(FunctionSpec::Parity { n: parse_usize("n")? })
            }
            "and" => {
                known(&["n"])?;
                Ok(FunctionSpec::And { n: parse_usize("n")? })
            }
            "or" => {
                known(&["n"])?;
                Ok(FunctionSpec::Or { n: parse_usize("n")? })
            }
            "dict" | "dictator" => {
                known(&["n", "i"])?;
                let n = parse_usize("n")?;
                let i = parse_usize("i")?;
                if i == 0 || i > n {
                    return Err(bad(format!("key `i`: {i} out of range 1..={n}")));
                }
                Ok(FunctionSpec::Dictator { n, i })
            }
            "random" => {
                known(&["n", "seed", "bias"])?;
                let n = parse_usize("n")?;
                let seed = lookup("seed")
                    .ok_or_else(|| bad("missing key `seed`".into()))?
                    .parse()
                    .map_err(|_| bad("key `seed`: not an integer".into()))?;
                let bias = match lookup("bias") {
                    None => 0.5,
                    Some(v) => v
                        .parse()
                        .map_err(|_| bad(format!("key `bias`: `{v}` is not a number")))?,
                };
                if !(0.0..=1.0).contains(&bias) {
                    return Err(bad(format!("key `bias`: {bias} outside [0, 1]")));
                }
                Ok(FunctionSpec::Random { n, seed, bias })
            }
            other => Err(bad(format!("unknown family `{other}`"))),
        }
    }

    pub fn build(&self) -> Result<BooleanFunction> {
        match self {
            FunctionSpec::Table { path } => {
                Ok(BooleanFunction::Table(TruthTable::read_file(path.as_ref())?))
            }
            FunctionSpec::Tribes { w, c: Some(c) } => BooleanFunction::tribes_with(*w, *c),
            FunctionSpec::Tribes { w, c: None } => BooleanFunction::tribes(*w),
            FunctionSpec::Majority { n, even } => BooleanFunction::majority(*n, *even),
            FunctionSpec::Parity { n } => Ok(BooleanFunction::parity(*n)),
            FunctionSpec::And { n } => BooleanFunction::and(*n),
            FunctionSpec::Or { n } => BooleanFunction::or(*n),
            FunctionSpec::Dictator { n, i } => BooleanFunction::dictator(*n, i - 1),
            FunctionSpec::Random { n, seed, bias } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                Ok(BooleanFunction::Table(TruthTable::random(*n, *bias, &mut rng)?))
            }
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Table { path } => write!(f, "table:path={path}"),
            FunctionSpec::Tribes { w, c: Some(c) } => write!(f, "tribes:w={w},c={c}"),
            FunctionSpec::Tribes { w, c: None } => write!(f, "tribes:w={w}"),
            FunctionSpec::Majority { n, even: false } => write!(f, "maj:n={n}"),
            FunctionSpec::Majority { n, even: true } => write!(f, "maj:n={n},even=true"),
            FunctionSpec::Parity { n } => write!(f, "parity:n={n}"),
            FunctionSpec::And { n } => write!(f, "and:n={n}"),
            FunctionSpec::Or { n } => write!(f, "or:n={n}"),
            FunctionSpec::Dictator { n, i } => write!(f, "dict:n={n},i={i}"),
            FunctionSpec::Random { n, seed, bias } => {
                write!(f, "random:n={n},seed={seed},bias={bias}")
            }
        }
    }
}

impl BooleanFunction {
    pub fn from_spec(text: &str) -> Result<BooleanFunction> {
        FunctionSpec::parse(text)?.build()
    }
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BooleanFunction::Table(t) => write!(f, "table:n={}", t.n()),
            BooleanFunction::Tribes { width, clauses } => {
                write!(f, "tribes:w={width},c={clauses}")
            }
            BooleanFunction::Majority { n } => write!(f, "maj:n={n}"),
            BooleanFunction::Parity { n } => write!(f, "parity:n={n}"),
            BooleanFunction::And { n } => write!(f, "and:n={n}"),
            BooleanFunction::Or { n } => write!(f, "or:n={n}"),
            BooleanFunction::Dictator { n, coord } => write!(f, "dict:n={n},i={}", coord + 1),
            BooleanFunction::Not(inner) => write!(f, "not({inner})"),
            BooleanFunction::Restricted { inner, alive, .. } => {
                write!(f, "restricted({inner},alive={})", alive.len())
            }
        }
    }
}

// ════════════════════════════════════════════════════════════════════
