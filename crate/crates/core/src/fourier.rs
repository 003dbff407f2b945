//! Walsh-Hadamard transform and spectral quantities.
//!
//! For f: {-1,1}^n -> R written in the character basis, f = sum_S fhat(S) chi_S
//! with chi_S(x) = prod_{i in S} x_i. With the index convention of this crate
//! (bit i of k set iff x_i = -1) the character evaluates to
//! chi_S(x_k) = (-1)^{popcount(S & k)}, so both directions of the transform
//! are the classical in-place butterfly.
//!
//! For a {0,1}-valued table at n <= 24 every intermediate of the forward
//! butterfly is an integer below 2^n and every intermediate of the inverse is
//! a dyadic rational with numerator below 2^(2n), so both transforms are exact
//! in f64 and the roundtrip is bit-exact.

use crate::table::TruthTable;

/// Dense Fourier coefficients, indexed by the subset mask S.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    n: usize,
    coeffs: Vec<f64>,
}

/// In-place Walsh-Hadamard butterfly: a[S] <- sum_k (-1)^{popcount(S&k)} a[k].
pub fn wht_in_place(a: &mut [f64]) {
    let size = a.len();
    debug_assert!(size.is_power_of_two());
    let mut len = 1;
    while len < size {
        let mut i = 0;
        while i < size {
            for j in i..i + len {
                let u = a[j];
                let v = a[j + len];
                a[j] = u + v;
                a[j + len] = u - v;
            }
            i += 2 * len;
        }
        len <<= 1;
    }
}

impl FourierCoefficients {
    /// Forward transform of a truth table: fhat(S) = E[f chi_S].
    pub fn from_table(t: &TruthTable) -> Self {
        let n = t.n();
        let size = 1usize << n;
        let mut a: Vec<f64> = (0..size as u32).map(|k| if t.get(k) { 1.0 } else { 0.0 }).collect();
        wht_in_place(&mut a);
        let scale = 1.0 / size as f64;
        for v in &mut a {
            *v *= scale;
        }
        FourierCoefficients { n, coeffs: a }
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), 1usize << n);
        FourierCoefficients { n, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeff(&self, s: u32) -> f64 {
        self.coeffs[s as usize]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Inverse transform back to the value vector over the cube.
    pub fn inverse(&self) -> Vec<f64> {
        let mut a = self.coeffs.clone();
        wht_in_place(&mut a);
        a
    }

    /// sum_S fhat(S)^2, which Parseval equates with E[f^2].
    pub fn total_weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Spectral weight at each level |S| = 0..n.
    pub fn level_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n + 1];
        for (s, c) in self.coeffs.iter().enumerate() {
            w[(s as u32).count_ones() as usize] += c * c;
        }
        w
    }

    /// Spectral influence of coordinate i: sum over S containing i of fhat(S)^2.
    pub fn influence(&self, i: usize) -> f64 {
        let bit = 1usize << i;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| s & bit != 0)
            .map(|(_, c)| c * c)
            .sum()
    }

    pub fn influences(&self) -> Vec<f64> {
        let mut inf = vec![0.0; self.n];
        for (s, c) in self.coeffs.iter().enumerate() {
            let c2 = c * c;
            let mut m = s;
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                inf[i] += c2;
                m &= m - 1;
            }
        }
        inf
    }

    /// Gradient at the all-alive point: the degree-1 coefficients.
    pub fn gradient_at_zero(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coeffs[1 << i]).collect()
    }
}

/// Level-1 diagnostic for a {0,1}-valued f with mean alpha in (0,1):
/// the ratio |grad f(0)|^2 / (alpha^2 ln(e/alpha)). Reported, not asserted;
/// the inequality it probes carries an unspecified absolute constant.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Level1Report {
    pub alpha: f64,
    pub grad_norm_sq: f64,
    pub ratio: f64,
}

pub fn level1_report(alpha: f64, gradient: &[f64]) -> Level1Report {
    let grad_norm_sq: f64 = gradient.iter().map(|g| g * g).sum();
    let denom = alpha * alpha * (std::f64::consts::E / alpha).ln();
    Level1Report { alpha, grad_norm_sq, ratio: grad_norm_sq / denom }
}

/// Binary entropy in bits, H(x) = x log2(1/x) + (1-x) log2(1/(1-x)).
pub fn binary_entropy(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}
