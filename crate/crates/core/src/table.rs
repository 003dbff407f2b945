//! Bit-packed truth tables for {0,1}-valued functions on the cube.
//!
//! Index convention follows [`crate::bits`]: entry k holds f at the point
//! whose coordinate i is -1 iff bit i of k is set. Tables are capped at
//! n = 24 (16M entries) since every operation here is Theta(2^n) or worse.
//!
//! The file format is two lines: `n=<int>` and the 2^n table bits as hex,
//! little-endian within the expansion (hex digit j holds bits 4j..4j+3 and
//! its least significant bit is bit 4j).

use crate::bits::{submasks, BitPoint, PartialPoint};
use crate::error::{Error, Result};
use rand::Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Hard cap on table arity.
pub const MAX_TABLE_N: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > MAX_TABLE_N {
            return Err(Error::ArityCap { n, cap: MAX_TABLE_N, what: "truth table" });
        }
        let size = 1usize << n;
        Ok(TruthTable { n, words: vec![0; size.div_ceil(64)] })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(u32) -> bool) -> Result<Self> {
        let mut t = Self::zeros(n)?;
        for k in 0..(1u32 << n) {
            if f(k) {
                t.set(k, true);
            }
        }
        Ok(t)
    }

    pub fn random<R: Rng>(n: usize, bias: f64, rng: &mut R) -> Result<Self> {
        Self::from_fn(n, |_| rng.random_bool(bias))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> u64 {
        1u64 << self.n
    }

    #[inline]
    pub fn get(&self, k: u32) -> bool {
        (self.words[(k >> 6) as usize] >> (k & 63)) & 1 == 1
    }

    pub fn set(&mut self, k: u32, v: bool) {
        let w = &mut self.words[(k >> 6) as usize];
        if v {
            *w |= 1 << (k & 63);
        } else {
            *w &= !(1 << (k & 63));
        }
    }

    pub fn eval(&self, x: &BitPoint) -> bool {
        self.get(x.index() as u32)
    }

    pub fn ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Exact count of ones in the subcube selected by a partial point,
    /// together with the subcube size. Integer arithmetic throughout.
    pub fn subcube_ones(&self, p: &PartialPoint) -> (u64, u64) {
        debug_assert_eq!(p.n(), self.n);
        let fixed = p.fixed_mask_u32();
        let base = p.sign_index_u32();
        let alive = !fixed & ((1u32 << self.n) - 1);
        let mut ones = 0u64;
        for s in submasks(alive) {
            if self.get(base | s) {
                ones += 1;
            }
        }
        (ones, 1u64 << alive.count_ones())
    }

    /// Complement table (pointwise negation).
    pub fn complement(&self) -> TruthTable {
        let mut t = self.clone();
        let size = 1usize << self.n;
        for (i, w) in t.words.iter_mut().enumerate() {
            *w = !*w;
            let remaining = size - (i * 64).min(size);
            if remaining < 64 {
                *w &= (1u64 << remaining) - 1;
            }
        }
        t
    }

    /// Materializes f restricted by the fixed coordinates of `p`; the new
    /// table's coordinate j is the j-th alive coordinate of `p` in ascending
    /// order.
    pub fn restrict(&self, p: &PartialPoint) -> Result<TruthTable> {
        debug_assert_eq!(p.n(), self.n);
        let alive: Vec<usize> = p.alive_iter().collect();
        let base = p.sign_index_u32();
        let mut t = TruthTable::zeros(alive.len())?;
        for j in 0..(1u32 << alive.len()) {
            let mut k = base;
            for (bit, &i) in alive.iter().enumerate() {
                if (j >> bit) & 1 == 1 {
                    k |= 1 << i;
                }
            }
            if self.get(k) {
                t.set(j, true);
            }
        }
        Ok(t)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "n={}", self.n)?;
        let digits = (self.size() as usize).div_ceil(4);
        let mut line = String::with_capacity(digits);
        for j in 0..digits {
            let mut d = 0u8;
            for b in 0..4 {
                let k = (j * 4 + b) as u64;
                if k < self.size() && self.get(k as u32) {
                    d |= 1 << b;
                }
            }
            line.push(char::from_digit(d as u32, 16).unwrap());
        }
        writeln!(out, "{line}")?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<TruthTable> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::TableFile("missing header line".into()))??;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .ok_or_else(|| Error::TableFile(format!("bad header `{header}`, expected n=<int>")))?
            .parse()
            .map_err(|e| Error::TableFile(format!("bad arity in `{header}`: {e}")))?;
        if n > MAX_TABLE_N {
            return Err(Error::ArityCap { n, cap: MAX_TABLE_N, what: "truth table file" });
        }
        let hex = lines
            .next()
            .ok_or_else(|| Error::TableFile("missing table line".into()))??;
        let hex = hex.trim();
        let digits = (1usize << n).div_ceil(4);
        if hex.len() != digits {
            return Err(Error::TableFile(format!(
                "expected {digits} hex digits for n={n}, got {}",
                hex.len()
            )));
        }
        let mut t = TruthTable::zeros(n)?;
        for (j, c) in hex.chars().enumerate() {
            let d = c
                .to_digit(16)
                .ok_or_else(|| Error::TableFile(format!("bad hex digit `{c}`")))?;
            for b in 0..4 {
                let k = j * 4 + b;
                if k < (1 << n) && (d >> b) & 1 == 1 {
                    t.set(k as u32, true);
                }
            }
        }
        Ok(t)
    }
}
