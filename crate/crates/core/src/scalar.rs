//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All floating point code is written against [`Real`], which is implemented
//! for `f32` and `f64`. Integer-valued sums (Ramanujan sums, residue counts)
//! stay exact and are only converted at the last step.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Add;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive, Zero};

/// Floating point scalar usable by the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert")
}

/// Converts an integer into `T`.
#[inline]
pub fn from_int<T: Real>(x: i64) -> T {
    T::from_i64(x).expect("integer must convert")
}

/// Converts any `T` back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `e(x) = exp(2 pi i x)`.
#[inline]
pub fn e<T: Real>(x: T) -> Complex<T> {
    let theta = T::TAU() * x;
    Complex::new(theta.cos(), theta.sin())
}

/// `e_q(k) = exp(2 pi i k / q)` with the numerator reduced first, so large
/// `k` loses no precision.
#[inline]
pub fn e_q<T: Real>(k: i64, q: u64) -> Complex<T> {
    let r = k.rem_euclid(q as i64);
    let theta = T::TAU() * from_int::<T>(r) / from_int::<T>(q as i64);
    Complex::new(theta.cos(), theta.sin())
}

/// Precomputed table of the `q`-th roots of unity.
#[derive(Clone, Debug)]
pub struct RootsOfUnity<T> {
    q: u64,
    table: Vec<Complex<T>>,
}

impl<T: Real> RootsOfUnity<T> {
    pub fn new(q: u64) -> Self {
        assert!(q >= 1, "modulus must be positive");
        let table = (0..q as i64).map(|k| e_q(k, q)).collect();
        RootsOfUnity { q, table }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// `e_q(k)` for any integer `k`.
    #[inline]
    pub fn get(&self, k: i64) -> Complex<T> {
        self.table[k.rem_euclid(self.q as i64) as usize]
    }

    /// `e_q(k)` for `k` already reduced into `[0, q)`.
    #[inline]
    pub fn get_reduced(&self, k: u64) -> Complex<T> {
        self.table[k as usize]
    }

    /// Evaluates `sum_k counts[k] * e_q(k)` with pairwise summation.
    ///
    /// Sums of pure exponentials are first reduced to exact residue counts,
    /// so this is the only place rounding enters.
    pub fn fold_counts(&self, counts: &[i64]) -> Complex<T> {
        debug_assert_eq!(counts.len() as u64, self.q);
        let mut acc = PairwiseSum::new();
        for (&c, z) in counts.iter().zip(&self.table) {
            if c != 0 {
                acc.push(*z * from_int::<T>(c));
            }
        }
        acc.total()
    }

    /// Evaluates `sum_k weights[k] * e_q(k)` for real weights.
    pub fn fold_real(&self, weights: &[T]) -> Complex<T> {
        debug_assert_eq!(weights.len() as u64, self.q);
        let mut acc = PairwiseSum::new();
        for (w, z) in weights.iter().zip(&self.table) {
            if !w.is_zero() {
                acc.push(*z * *w);
            }
        }
        acc.total()
    }
}

const BLOCK: usize = 32;

/// Streaming pairwise (cascade) summation.
///
/// Values are added naively inside blocks of 32, and finished blocks are
/// merged like a binary counter, so the rounding error grows as
/// `O(log n)` instead of `O(n)`. The result depends only on the push order.
#[derive(Clone, Debug)]
pub struct PairwiseSum<V> {
    block: V,
    filled: usize,
    // (partial sum, number of blocks it covers); sizes strictly decrease
    stack: Vec<(V, usize)>,
}

impl<V: Copy + Zero + Add<Output = V>> Default for PairwiseSum<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Copy + Zero + Add<Output = V>> PairwiseSum<V> {
    pub fn new() -> Self {
        PairwiseSum {
            block: V::zero(),
            filled: 0,
            stack: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, v: V) {
        self.block = self.block + v;
        self.filled += 1;
        if self.filled == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let mut cur = (self.block, 1usize);
        while let Some(&(top, size)) = self.stack.last() {
            if size != cur.1 {
                break;
            }
            self.stack.pop();
            cur = (top + cur.0, size * 2);
        }
        self.stack.push(cur);
        self.block = V::zero();
        self.filled = 0;
    }

    pub fn total(&self) -> V {
        let mut sum = self.block;
        for &(v, _) in self.stack.iter().rev() {
            sum = v + sum;
        }
        sum
    }
}

impl<V: Copy + Zero + Add<Output = V>> Extend<V> for PairwiseSum<V> {
    fn extend<I: IntoIterator<Item = V>>(&mut self, iter: I) {
        for v in iter {
            self.push(v);
        }
    }
}

/// Pairwise sum of an iterator, in iteration order.
pub fn pairwise_sum<V, I>(iter: I) -> V
where
    V: Copy + Zero + Add<Output = V>,
    I: IntoIterator<Item = V>,
{
    let mut acc = PairwiseSum::new();
    acc.extend(iter);
    acc.total()
}

/// `sin(t)/t` with the removable singularity filled; uses the Taylor series
/// for `|t| < 1e-4`.
pub fn sinc<T: Real>(t: T) -> T {
    if t.abs() < lit(1e-4) {
        let t2 = t * t;
        T::one() - t2 / lit(6.0) + t2 * t2 / lit(120.0)
    } else {
        t.sin() / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integer_total() {
        let total: f64 = pairwise_sum((1..=100_000).map(|k| k as f64));
        assert_eq!(total, 5_000_050_000.0);
    }

    #[test]
    fn pairwise_beats_naive_on_small_increments() {
        let n = 1_000_000;
        let naive: f32 = (0..n).map(|_| 0.1f32).sum();
        let pw: f32 = pairwise_sum((0..n).map(|_| 0.1f32));
        let exact = 100_000.0f64;
        assert!((pw as f64 - exact).abs() < (naive as f64 - exact).abs());
        assert!((pw as f64 - exact).abs() / exact < 1e-5);
    }

    #[test]
    fn roots_of_unity_sum_to_zero() {
        for q in 2..40u64 {
            let r = RootsOfUnity::<f64>::new(q);
            let ones = vec![1i64; q as usize];
            assert!(r.fold_counts(&ones).norm() < 1e-13);
        }
    }

    #[test]
    fn sinc_branches_agree() {
        for &t in &[9.9e-5f64, 1.0e-4, 1.01e-4] {
            assert!((sinc(t) - t.sin() / t).abs() < 1e-15);
        }
        assert_eq!(sinc(0.0f64), 1.0);
        assert!((sinc(1e-6f32) - 1.0).abs() < 1e-7);
    }
}
