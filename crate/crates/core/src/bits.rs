//! Points of the discrete cube and of its ternary extension.
//!
//! Sign convention used throughout: a logical `true` for coordinate `i` is the
//! value x_i = -1, and bit i of a truth-table index is 1 exactly when
//! x_i = -1. Alive (unrevealed) coordinates of a partial point read as 0, so a
//! `PartialPoint` is a point of {-1, 0, 1}^n and plugging it into the
//! multilinear extension of f averages f over the alive coordinates.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A full assignment in {-1,+1}^n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitPoint {
    signs: Vec<i8>,
}

impl BitPoint {
    /// Builds the point whose bit pattern is the little-endian index `k`
    /// (bit i of k set means x_i = -1).
    pub fn from_index(n: usize, k: u64) -> Self {
        let signs = (0..n).map(|i| if (k >> i) & 1 == 1 { -1 } else { 1 }).collect();
        BitPoint { signs }
    }

    pub fn from_signs(signs: Vec<i8>) -> Self {
        debug_assert!(signs.iter().all(|&s| s == 1 || s == -1));
        BitPoint { signs }
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let signs = (0..n).map(|_| if rng.random::<bool>() { -1 } else { 1 }).collect();
        BitPoint { signs }
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    /// Sign of coordinate i, +1 or -1.
    pub fn sign(&self, i: usize) -> i8 {
        self.signs[i]
    }

    /// Logical bit b_i, true iff x_i = -1.
    pub fn bit(&self, i: usize) -> bool {
        self.signs[i] == -1
    }

    pub fn flip(&mut self, i: usize) {
        self.signs[i] = -self.signs[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut p = self.clone();
        p.flip(i);
        p
    }

    /// Flips every coordinate in `mask` (little-endian, n <= 64).
    pub fn flipped_mask(&self, mask: u64) -> Self {
        let mut p = self.clone();
        for i in 0..self.n() {
            if (mask >> i) & 1 == 1 {
                p.flip(i);
            }
        }
        p
    }

    /// Little-endian truth-table index; requires n <= 63.
    pub fn index(&self) -> u64 {
        assert!(self.n() <= 63, "index requires n <= 63");
        let mut k = 0u64;
        for i in 0..self.n() {
            if self.bit(i) {
                k |= 1 << i;
            }
        }
        k
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }
}

/// A partial assignment in {-1, 0, +1}^n; 0 marks an alive coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialPoint {
    states: Vec<i8>,
}

impl PartialPoint {
    pub fn all_alive(n: usize) -> Self {
        PartialPoint { states: vec![0; n] }
    }

    pub fn from_states(states: Vec<i8>) -> Self {
        debug_assert!(states.iter().all(|&s| s >= -1 && s <= 1));
        PartialPoint { states }
    }

    pub fn from_bitpoint(p: &BitPoint) -> Self {
        PartialPoint { states: p.signs().to_vec() }
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Ternary state of coordinate i: -1, 0 (alive), or +1.
    pub fn state(&self, i: usize) -> i8 {
        self.states[i]
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.states[i] == 0
    }

    pub fn fix(&mut self, i: usize, sign: i8) {
        debug_assert!(sign == 1 || sign == -1);
        self.states[i] = sign;
    }

    pub fn release(&mut self, i: usize) {
        self.states[i] = 0;
    }

    pub fn alive_count(&self) -> usize {
        self.states.iter().filter(|&&s| s == 0).count()
    }

    pub fn fixed_count(&self) -> usize {
        self.n() - self.alive_count()
    }

    pub fn alive_iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.states.iter().enumerate().filter(|(_, &s)| s == 0).map(|(i, _)| i)
    }

    pub fn fixed_iter(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(i, &s)| (i, s))
    }

    /// Fixed-coordinate mask, for table indexing; requires n <= 32.
    pub fn fixed_mask_u32(&self) -> u32 {
        assert!(self.n() <= 32);
        let mut m = 0u32;
        for (i, &s) in self.states.iter().enumerate() {
            if s != 0 {
                m |= 1 << i;
            }
        }
        m
    }

    /// Index bits contributed by the fixed coordinates (bit set iff fixed to -1).
    pub fn sign_index_u32(&self) -> u32 {
        assert!(self.n() <= 32);
        let mut m = 0u32;
        for (i, &s) in self.states.iter().enumerate() {
            if s == -1 {
                m |= 1 << i;
            }
        }
        m
    }

    /// Converts to a full point; panics if any coordinate is alive.
    pub fn to_bitpoint(&self) -> BitPoint {
        assert!(self.alive_count() == 0, "point has alive coordinates");
        BitPoint::from_signs(self.states.clone())
    }

    pub fn states(&self) -> &[i8] {
        &self.states
    }
}

/// Iterates over all submasks of `mask`, including 0 and `mask` itself.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut cur = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = cur;
        if cur == 0 {
            done = true;
        } else {
            cur = (cur - 1) & mask;
        }
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        for k in 0..32u64 {
            let p = BitPoint::from_index(5, k);
            assert_eq!(p.index(), k);
        }
    }

    #[test]
    fn submask_count() {
        let m = 0b10110u32;
        assert_eq!(submasks(m).count(), 1 << m.count_ones());
        assert!(submasks(m).all(|s| s & !m == 0));
    }

    #[test]
    fn partial_masks() {
        let mut p = PartialPoint::all_alive(4);
        p.fix(1, -1);
        p.fix(3, 1);
        assert_eq!(p.fixed_mask_u32(), 0b1010);
        assert_eq!(p.sign_index_u32(), 0b0010);
        assert_eq!(p.alive_count(), 2);
    }
}
