//! Exact modular arithmetic and the classical complete sums.
//!
//! Everything integer-valued here is exact. Kloosterman sums are computed
//! by counting residues `a x + b x̄ (mod q)` first and only then summing the
//! roots of unity, so the floating point error is a single pairwise pass
//! over at most `q` terms.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Real, RootsOfUnity};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `gcd(|a|, q)`; `gcd(0, q) = q`.
pub fn gcd_signed(a: i64, q: u64) -> u64 {
    gcd(a.unsigned_abs(), q)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

/// Reduces `a` into `[0, q)`.
#[inline]
pub fn reduce(a: i64, q: u64) -> u64 {
    a.rem_euclid(q as i64) as u64
}

/// Extended Euclid: returns `(g, x, y)` with `a x + b y = g`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let k = r0 / r1;
        (r0, r1) = (r1, r0 - k * r1);
        (s0, s1) = (s1, s0 - k * s1);
        (t0, t1) = (t1, t0 - k * t1);
    }
    (r0, s0, t0)
}

/// A unit `a` modulo `q`, i.e. `gcd(a, q) = 1`, stored reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UnitResidue {
    value: u64,
    modulus: u64,
}

impl UnitResidue {
    pub fn new(a: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("modulus must be positive".into()));
        }
        let value = reduce(a, q);
        if gcd(value, q) != 1 {
            return Err(Error::NonInvertible { a, q });
        }
        Ok(UnitResidue { value, modulus: q })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn inverse(&self) -> UnitResidue {
        UnitResidue {
            value: inv_mod_unchecked(self.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

fn inv_mod_unchecked(a: u64, q: u64) -> u64 {
    if q == 1 {
        return 0;
    }
    let (_, x, _) = ext_gcd(a as i128, q as i128);
    x.rem_euclid(q as i128) as u64
}

/// Multiplicative inverse of `a` modulo `q`. For `q = 1` the inverse is `0`.
pub fn mod_inverse(a: i64, q: u64) -> Result<UnitResidue> {
    UnitResidue::new(a, q).map(|u| u.inverse())
}

/// Shorthand for the reduced inverse value; panics if `a` is not a unit.
/// Used internally where coprimality is guaranteed by construction.
pub(crate) fn inv(a: i64, q: u64) -> u64 {
    mod_inverse(a, q)
        .unwrap_or_else(|e| panic!("internal misuse: {e}"))
        .value()
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin; the first twelve prime bases are exact for
/// every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A prime modulus, verified at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime(p) {
            Ok(PrimeModulus(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Prime factorization by trial division, ascending primes.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler's totient; `phi(1) = 1`.
pub fn euler_phi(q: u64) -> u64 {
    assert!(q >= 1, "euler_phi needs q >= 1");
    factorize(q)
        .into_iter()
        .fold(q, |acc, (p, _)| acc / p * (p - 1))
}

/// Möbius function.
pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All positive divisors, ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize(n) {
        let len = divs.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

pub fn divisor_count(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

/// `sum_{d | n} d`.
pub fn sigma(n: u64) -> u64 {
    divisors(n).iter().sum()
}

/// Ramanujan sum `c_q(n) = sum_{d | (n, q)} d mu(q/d)`.
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    assert!(q >= 1, "ramanujan_sum needs q >= 1");
    let g = gcd_signed(n, q);
    divisors(g)
        .into_iter()
        .map(|d| d as i64 * mobius(q / d))
        .sum()
}

/// Precomputed divisor/Möbius data for repeated `c_q(n)` evaluations with
/// a fixed `q`.
#[derive(Clone, Debug)]
pub struct RamanujanSum {
    q: u64,
    // (d, d * mu(q/d)) for the divisors with mu(q/d) != 0
    terms: Vec<(u64, i64)>,
}

impl RamanujanSum {
    pub fn new(q: u64) -> Self {
        let terms = divisors(q)
            .into_iter()
            .filter_map(|d| {
                let m = mobius(q / d);
                (m != 0).then_some((d, d as i64 * m))
            })
            .collect();
        RamanujanSum { q, terms }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn eval(&self, n: i64) -> i64 {
        let n = n.unsigned_abs();
        self.terms
            .iter()
            .filter(|(d, _)| n % d == 0)
            .map(|&(_, c)| c)
            .sum()
    }

    /// `sum_{d | (n, q)} d`, the majorant of `|c_q(n)|`.
    pub fn majorant(&self, n: i64) -> i64 {
        let g = gcd_signed(n, self.q);
        sigma(g) as i64
    }
}

/// Units modulo `q` paired with their inverses, ascending in the unit.
/// For `q = 1` this is `[(0, 0)]`, matching the empty-modulus convention.
pub fn unit_pairs(q: u64) -> Vec<(u64, u64)> {
    if q == 1 {
        return vec![(0, 0)];
    }
    (1..q)
        .filter(|&x| gcd(x, q) == 1)
        .map(|x| (x, inv_mod_unchecked(x, q)))
        .collect()
}

/// Residue counts of `a x + b x̄ (mod q)` over units `x`.
pub fn kloosterman_counts(a: i64, b: i64, q: u64) -> Vec<i64> {
    let mut counts = vec![0i64; q as usize];
    let (a, b) = (reduce(a, q), reduce(b, q));
    for (x, xi) in unit_pairs(q) {
        let k = (mul_mod(a, x, q) + mul_mod(b, xi, q)) % q;
        counts[k as usize] += 1;
    }
    counts
}

/// Kloosterman sum `S(a, b; q) = sum_{x mod q, (x,q)=1} e_q(a x + b x̄)`.
/// `S(a, b; 1) = 1`.
pub fn kloosterman<T: Real>(a: i64, b: i64, q: u64) -> Complex<T> {
    assert!(q >= 1, "kloosterman needs q >= 1");
    let roots = RootsOfUnity::new(q);
    roots.fold_counts(&kloosterman_counts(a, b, q))
}

/// Real Kloosterman values `S(c, b; q)` for every `c mod q`, computed as a
/// batch with shared inverses and roots.
pub fn kloosterman_row<T: Real>(b: i64, q: u64) -> Vec<T> {
    let roots = RootsOfUnity::<T>::new(q);
    let pairs = unit_pairs(q);
    let b = reduce(b, q);
    let mut counts = vec![0i64; q as usize];
    (0..q)
        .map(|c| {
            counts.iter_mut().for_each(|v| *v = 0);
            for &(x, xi) in &pairs {
                let k = (mul_mod(c, x, q) + mul_mod(b, xi, q)) % q;
                counts[k as usize] += 1;
            }
            roots.fold_counts(&counts).re
        })
        .collect()
}

/// Sieve of Eratosthenes: all primes `<= n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for `0..=n` (`spf[0] = spf[1] = 0`).
pub fn smallest_prime_factors(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Primes `p` with `lo <= p <= 2 lo` and `p ∤ exclude`, ascending.
///
/// `exclude = 0` disables the exclusion (every prime divides zero, and the
/// zero shift places no coprimality constraint on the moduli).
pub fn primes_in_dyadic(lo: u64, exclude: i64) -> Result<Vec<PrimeModulus>> {
    if lo < 2 {
        return Err(Error::InvalidParameter(format!(
            "dyadic anchor must be >= 2, got {lo}"
        )));
    }
    let ex = exclude.unsigned_abs();
    let primes: Vec<PrimeModulus> = (lo..=2 * lo)
        .filter(|&p| is_prime(p) && (ex == 0 || ex % p != 0))
        .map(PrimeModulus)
        .collect();
    if primes.is_empty() {
        return Err(Error::EmptyRange { lo, hi: 2 * lo });
    }
    Ok(primes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_kloosterman(a: i64, b: i64, q: u64) -> Complex<f64> {
        if q == 1 {
            return Complex::new(1.0, 0.0);
        }
        let mut s = Complex::new(0.0, 0.0);
        for x in 1..q {
            if gcd(x, q) != 1 {
                continue;
            }
            let xi = (1..q).find(|y| (x * y) % q == 1).unwrap();
            let arg = (a as f64 * x as f64 + b as f64 * xi as f64) / q as f64;
            s += Complex::from_polar(1.0, std::f64::consts::TAU * arg);
        }
        s
    }

    fn brute_ramanujan(q: u64, n: i64) -> f64 {
        (0..q)
            .filter(|&a| gcd(a, q) == 1)
            .map(|a| (std::f64::consts::TAU * (a as f64 * n as f64) / q as f64).cos())
            .sum()
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(1, 7).unwrap().value(), 1);
        assert_eq!(mod_inverse(2, 5).unwrap().value(), 3);
        assert_eq!(mod_inverse(3, 7).unwrap().value(), 5);
        assert_eq!(mod_inverse(5, 1).unwrap().value(), 0);
        assert_eq!(mod_inverse(-2, 5).unwrap().value(), 2);
        assert_eq!(
            mod_inverse(4, 6),
            Err(Error::NonInvertible { a: 4, q: 6 })
        );
    }

    #[test]
    fn euler_phi_examples() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), 4);
        for p in [2u64, 3, 97, 7919] {
            assert_eq!(euler_phi(p), p - 1);
        }
        for q in 1..300u64 {
            let units = (0..q).filter(|&a| gcd(a, q) == 1).count() as u64;
            assert_eq!(euler_phi(q), units.max(1));
        }
    }

    #[test]
    fn ramanujan_examples() {
        for n in -5..5 {
            assert_eq!(ramanujan_sum(1, n), 1);
        }
        assert_eq!(ramanujan_sum(3, 1), -1);
        assert_eq!(ramanujan_sum(6, 4), -1);
        assert_eq!(ramanujan_sum(12, 0), 4);
    }

    #[test]
    fn ramanujan_matches_direct_sum() {
        for q in 1..60u64 {
            let cached = RamanujanSum::new(q);
            for n in -40..40i64 {
                let direct = brute_ramanujan(q, n);
                assert!((ramanujan_sum(q, n) as f64 - direct).abs() < 1e-9);
                assert_eq!(cached.eval(n), ramanujan_sum(q, n));
            }
        }
    }

    #[test]
    fn ramanujan_bound_exhaustive() {
        for q in 1..=200u64 {
            let r = RamanujanSum::new(q);
            for n in -200..=200i64 {
                assert!(r.eval(n).abs() <= r.majorant(n), "q={q} n={n}");
            }
        }
    }

    #[test]
    fn kloosterman_examples() {
        for (a, b) in [(0, 0), (3, -2), (5, 7)] {
            let s = kloosterman::<f64>(a, b, 1);
            assert_eq!(s, Complex::new(1.0, 0.0));
        }
        let s = kloosterman::<f64>(1, 1, 3);
        assert!((s.re + 1.0).abs() < 1e-14 && s.im.abs() < 1e-14);
        for q in [5u64, 12, 30] {
            for b in -6..6 {
                let s = kloosterman::<f64>(0, b, q);
                assert!((s.re - ramanujan_sum(q, b) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kloosterman_matches_brute_force() {
        for q in 1..40u64 {
            for a in -3..4 {
                for b in -3..4 {
                    let s = kloosterman::<f64>(a, b, q);
                    assert!((s - brute_kloosterman(a, b, q)).norm() < 1e-11);
                    assert!(s.im.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kloosterman_row_matches_pointwise() {
        let q = 35;
        let row = kloosterman_row::<f64>(4, q);
        for c in 0..q {
            assert!((row[c as usize] - kloosterman::<f64>(c as i64, 4, q).re).abs() < 1e-12);
        }
    }

    #[test]
    fn kloosterman_twisted_multiplicativity() {
        // S(a,b;q1 q2) = S(a q2bar^2, b; q1) S(a q1bar^2, b; q2), q1 q2 <= 1000
        let moduli = [2u64, 3, 5, 7, 8, 9, 11, 13, 16, 25, 27, 31];
        for &q1 in &moduli {
            for &q2 in &moduli {
                if gcd(q1, q2) != 1 || q1 * q2 > 1000 {
                    continue;
                }
                let i2 = inv(q2 as i64, q1) as i64;
                let i1 = inv(q1 as i64, q2) as i64;
                for (a, b) in [(1i64, 1i64), (2, 5), (0, 3), (6, 0), (-4, 9)] {
                    let whole = kloosterman::<f64>(a, b, q1 * q2);
                    let left = kloosterman::<f64>(a * i2 % q1 as i64 * i2, b, q1);
                    let right = kloosterman::<f64>(a * i1 % q2 as i64 * i1, b, q2);
                    assert!((whole - left * right).norm() < 1e-9, "q1={q1} q2={q2}");
                }
            }
        }
    }

    #[test]
    fn kloosterman_weil_bound_small_moduli() {
        for q in 1..150u64 {
            let dq = divisor_count(q) as f64;
            for a in -4..5i64 {
                for b in -4..5i64 {
                    let g = gcd(gcd(a.unsigned_abs(), b.unsigned_abs()), q) as f64;
                    let s = kloosterman::<f64>(a, b, q).norm();
                    assert!(s <= dq * (q as f64).sqrt() * g.sqrt() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn kloosterman_in_single_precision() {
        let s = kloosterman::<f32>(3, 7, 101);
        let d = kloosterman::<f64>(3, 7, 101);
        assert!((s.re as f64 - d.re).abs() < 1e-4);
    }

    #[test]
    fn miller_rabin_against_sieve() {
        let sieve = primes_up_to(10_000);
        let from_mr: Vec<u64> = (0..=10_000).filter(|&n| is_prime(n)).collect();
        assert_eq!(sieve, from_mr);
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(PrimeModulus::new(91).is_err());
    }

    #[test]
    fn dyadic_prime_examples() {
        let ps = |lo, ex| -> Vec<u64> {
            primes_in_dyadic(lo, ex)
                .unwrap()
                .into_iter()
                .map(PrimeModulus::get)
                .collect()
        };
        assert_eq!(ps(10, 1), vec![11, 13, 17, 19]);
        assert_eq!(ps(10, 11), vec![13, 17, 19]);
        assert_eq!(ps(2, 1), vec![2, 3]);
        assert_eq!(ps(10, 0), vec![11, 13, 17, 19]);
        assert_eq!(
            primes_in_dyadic(2, 6),
            Err(Error::EmptyRange { lo: 2, hi: 4 })
        );
    }

    #[test]
    fn spf_table() {
        let spf = smallest_prime_factors(100);
        assert_eq!(spf[97], 97);
        assert_eq!(spf[91], 7);
        assert_eq!(spf[64], 2);
    }

    proptest! {
        #[test]
        fn inverse_is_involutive(a in -10_000i64..10_000, q in 1u64..5_000) {
            prop_assume!(gcd_signed(a, q) == 1);
            let ainv = mod_inverse(a, q).unwrap();
            prop_assert_eq!((ainv.value() as u128 * reduce(a, q) as u128 % q as u128) as u64, 1 % q);
            let back = mod_inverse(ainv.value() as i64, q).unwrap();
            prop_assert_eq!(back.value(), reduce(a, q));
        }

        #[test]
        fn kloosterman_symmetric(a in -50i64..50, b in -50i64..50, q in 1u64..300) {
            let s1 = kloosterman::<f64>(a, b, q);
            let s2 = kloosterman::<f64>(b, a, q);
            prop_assert!((s1 - s2).norm() < 1e-9);
        }
    }
}
