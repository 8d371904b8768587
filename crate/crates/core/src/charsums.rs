//! Composite character sums over factorable moduli.
//!
//! `S(m1, m2, n, h; q)` is the sum left after both Voronoi steps, and
//! `T(n, m, h; q1, q~1, q2)` is the sum produced by Poisson summation after
//! opening the square. Brute-force evaluations are the ground truth here:
//! the CRT factorizations and closed forms are separate code paths that are
//! checked against them, never substituted for them.
//!
//! Pure exponential sums are reduced to exact residue counts before any
//! floating point work is done.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{gcd, gcd_signed, inv, kloosterman, kloosterman_row, reduce, unit_pairs, PrimeModulus};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, Record};
use crate::scalar::{from_int, lit, to_f64, PairwiseSum, Real, RootsOfUnity};

#[inline]
fn mulm(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

/// `q = q1 q2` for distinct primes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeModulus {
    q1: PrimeModulus,
    q2: PrimeModulus,
}

impl CompositeModulus {
    pub fn new(q1: PrimeModulus, q2: PrimeModulus) -> Result<Self> {
        if q1 == q2 {
            return Err(Error::InvalidParameter(format!(
                "composite modulus needs distinct primes, got {q1} twice"
            )));
        }
        Ok(CompositeModulus { q1, q2 })
    }

    pub fn from_u64(q1: u64, q2: u64) -> Result<Self> {
        Self::new(PrimeModulus::new(q1)?, PrimeModulus::new(q2)?)
    }

    pub fn q1(&self) -> PrimeModulus {
        self.q1
    }

    pub fn q2(&self) -> PrimeModulus {
        self.q2
    }

    pub fn q(&self) -> u64 {
        self.q1.get() * self.q2.get()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SModulus {
    Composite(CompositeModulus),
    Plain(u64),
}

impl SModulus {
    pub fn q(&self) -> u64 {
        match self {
            SModulus::Composite(c) => c.q(),
            SModulus::Plain(q) => *q,
        }
    }
}

/// Parameters of `S(m1, m2, n, h; q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SCharParams {
    pub m1: u64,
    pub m2: i64,
    pub n: i64,
    pub h: i64,
    modulus: SModulus,
}

impl SCharParams {
    pub fn new(m1: u64, m2: i64, n: i64, h: i64, modulus: SModulus) -> Result<Self> {
        let q = modulus.q();
        if q == 0 {
            return Err(Error::InvalidParameter("modulus must be positive".into()));
        }
        if m1 == 0 || q % m1 != 0 {
            return Err(Error::InvalidDivisor { m1, q });
        }
        Ok(SCharParams { m1, m2, n, h, modulus })
    }

    pub fn plain(m1: u64, m2: i64, n: i64, h: i64, q: u64) -> Result<Self> {
        Self::new(m1, m2, n, h, SModulus::Plain(q))
    }

    pub fn composite(m1: u64, m2: i64, n: i64, h: i64, q1: u64, q2: u64) -> Result<Self> {
        Self::new(m1, m2, n, h, SModulus::Composite(CompositeModulus::from_u64(q1, q2)?))
    }

    pub fn modulus(&self) -> SModulus {
        self.modulus
    }

    pub fn q(&self) -> u64 {
        self.modulus.q()
    }
}

/// Batch evaluator for `S(m1, m2, ·, ·; q)` with `m1, m2, q` fixed.
///
/// The Kloosterman row `S(c, m2; q/m1)` is computed once for all `c`, after
/// which each `(n, h)` costs `O(q)`.
#[derive(Clone, Debug)]
pub struct SEvaluator<T> {
    q: u64,
    r: u64,
    units: Vec<(u64, u64)>,
    row: Vec<T>,
    roots: RootsOfUnity<T>,
}

impl<T: Real> SEvaluator<T> {
    pub fn new(m1: u64, m2: i64, q: u64) -> Result<Self> {
        if q == 0 || m1 == 0 || q % m1 != 0 {
            return Err(Error::InvalidDivisor { m1, q });
        }
        let r = q / m1;
        Ok(SEvaluator {
            q,
            r,
            units: unit_pairs(q),
            row: kloosterman_row(m2, r),
            roots: RootsOfUnity::new(q),
        })
    }

    pub fn eval(&self, n: i64, h: i64) -> Complex<T> {
        let q = self.q;
        let (n, h) = (reduce(n, q), reduce(h, q));
        let mut weights = vec![T::zero(); q as usize];
        for &(a, ai) in &self.units {
            let k = (mulm(a, h, q) + q - mulm(ai, n, q)) % q;
            weights[k as usize] += self.row[(ai % self.r) as usize];
        }
        self.roots.fold_real(&weights)
    }
}

/// `S(m1, m2, n, h; q) = sum*_{a mod q} e_q(a h) e_q(-ā n) S(ā, m2; q/m1)`.
pub fn char_sum_s<T: Real>(p: &SCharParams) -> Result<Complex<T>> {
    Ok(SEvaluator::new(p.m1, p.m2, p.q())?.eval(p.n, p.h))
}

/// The CRT split of `S` for `m1 = q1`: a Kloosterman sum modulo `q1` times
/// the two-variable sum modulo `q2`.
pub fn char_sum_s_split<T: Real>(p: &SCharParams) -> Result<Complex<T>> {
    let c = match p.modulus {
        SModulus::Composite(c) => c,
        SModulus::Plain(q) => {
            return Err(Error::InvalidParameter(format!(
                "split evaluation needs a composite modulus, got plain {q}"
            )))
        }
    };
    let (q1, q2) = (c.q1().get(), c.q2().get());
    if p.m1 != q1 {
        return Err(Error::InvalidDivisor { m1: p.m1, q: c.q() });
    }
    let i2 = inv(q2 as i64, q1) as i64;
    let first = kloosterman::<T>(i2 * reduce(p.h, q1) as i64, -i2 * reduce(p.n, q1) as i64, q1);
    let second = adolphson_sperber_sum::<T>(p.h, p.n, p.m2, c.q1(), c.q2())?;
    Ok(first * second.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsBranch {
    /// `q2 ∤ n m2`: square-root cancellation `≪ q2` is expected.
    Generic,
    /// `q2 | n m2`: only the Weil-type `q2^{3/2}` bound applies.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsSum<T> {
    pub value: Complex<T>,
    pub branch: AsBranch,
    /// `q2` on the generic branch, `q2^{3/2}` on the degenerate one.
    pub normalizer: T,
}

impl<T: Real> AsSum<T> {
    pub fn ratio(&self) -> T {
        self.value.norm() / self.normalizer
    }
}

fn as_branch(n: i64, m2: i64, p: u64) -> AsBranch {
    if reduce(n, p) == 0 || reduce(m2, p) == 0 {
        AsBranch::Degenerate
    } else {
        AsBranch::Generic
    }
}

fn as_normalizer<T: Real>(branch: AsBranch, p: u64) -> T {
    let p: T = from_int(p as i64);
    match branch {
        AsBranch::Generic => p,
        AsBranch::Degenerate => p * p.sqrt(),
    }
}

/// `sum_{a, b in F_q2^x} e_q2(q̄1 a h - q̄1 ā n + b ā + m2 b̄)` by brute force
/// over both variables.
pub fn adolphson_sperber_sum<T: Real>(
    h: i64,
    n: i64,
    m2: i64,
    q1: PrimeModulus,
    q2: PrimeModulus,
) -> Result<AsSum<T>> {
    if q1 == q2 {
        return Err(Error::InvalidParameter("q1 and q2 must differ".into()));
    }
    let p = q2.get();
    let i1 = inv(q1.get() as i64, p);
    let c = mulm(i1, reduce(h, p), p);
    let d = mulm(i1, reduce(n, p), p);
    let m = reduce(m2, p);
    let units = unit_pairs(p);
    let mut counts = vec![0i64; p as usize];
    for &(a, ai) in &units {
        let base = (mulm(c, a, p) + p - mulm(d, ai, p)) % p;
        for &(b, bi) in &units {
            let k = (base + mulm(b, ai, p) + mulm(m, bi, p)) % p;
            counts[k as usize] += 1;
        }
    }
    let branch = as_branch(n, m2, p);
    Ok(AsSum {
        value: RootsOfUnity::new(p).fold_counts(&counts),
        branch,
        normalizer: as_normalizer(branch, p),
    })
}

/// Worst normalized value of the two-variable sum over every `(h, n, m2)`
/// modulo `q2` with `h` a unit.
#[derive(Clone, Debug, PartialEq)]
pub struct AsCensus {
    pub q2: u64,
    pub generic_max: f64,
    pub generic_argmax: (i64, i64, i64),
    pub degenerate_max: f64,
    pub tuples: usize,
}

/// Exhaustive census of the two-variable sum modulo `q2`.
///
/// Uses `sum_b e(b ā + m2 b̄) = S(ā, m2; q2)`, so each tuple costs `O(q2)`
/// after one Kloosterman row per `m2`. Brute-force agreement is covered by
/// the tests.
pub fn adolphson_sperber_census(q1: PrimeModulus, q2: PrimeModulus) -> Result<AsCensus> {
    if q1 == q2 {
        return Err(Error::InvalidParameter("q1 and q2 must differ".into()));
    }
    let p = q2.get();
    let units = unit_pairs(p);
    let roots = RootsOfUnity::<f64>::new(p);
    let q1m = q1.get() % p;
    let per_m2: Vec<(f64, (i64, i64, i64), f64, usize)> = (0..p)
        .into_par_iter()
        .map(|m2| {
            let row = kloosterman_row::<f64>(m2 as i64, p);
            let mut gen = (0.0f64, (0i64, 0i64, 0i64));
            let mut deg = 0.0f64;
            let mut tuples = 0usize;
            for &(c, _) in &units {
                // c = q̄1 h, so h = q1 c
                let h = mulm(q1m, c, p) as i64;
                for d in 0..p {
                    let n = mulm(q1m, d, p) as i64;
                    let mut acc = PairwiseSum::new();
                    for &(a, ai) in &units {
                        let k = (mulm(c, a, p) + p - mulm(d, ai, p)) % p;
                        acc.push(roots.get_reduced(k) * row[ai as usize]);
                    }
                    let branch = as_branch(n, m2 as i64, p);
                    let ratio = acc.total().norm() / as_normalizer::<f64>(branch, p);
                    tuples += 1;
                    match branch {
                        AsBranch::Generic if ratio > gen.0 => gen = (ratio, (h, n, m2 as i64)),
                        AsBranch::Degenerate if ratio > deg => deg = ratio,
                        _ => {}
                    }
                }
            }
            (gen.0, gen.1, deg, tuples)
        })
        .collect();
    let mut out = AsCensus {
        q2: p,
        generic_max: 0.0,
        generic_argmax: (0, 0, 0),
        degenerate_max: 0.0,
        tuples: 0,
    };
    for (g, arg, d, t) in per_m2 {
        if g > out.generic_max {
            out.generic_max = g;
            out.generic_argmax = arg;
        }
        out.degenerate_max = out.degenerate_max.max(d);
        out.tuples += t;
    }
    Ok(out)
}

/// `S(1, α, n, h; q)` for every `α mod q`.
///
/// Expands `S(ā, α; q) = sum_x e_q(ā x + α x̄)` and sums over `a` first:
/// `C[x] = sum_a e_q(a h - ā n + ā x)`, then `S(1, α, ...) = sum_x C[x] e_q(α x̄)`.
pub fn s_row_unit_m1<T: Real>(n: i64, h: i64, q: u64) -> Vec<Complex<T>> {
    assert!(q >= 1);
    if q == 1 {
        return vec![Complex::new(T::one(), T::zero())];
    }
    let roots = RootsOfUnity::<T>::new(q);
    let units = unit_pairs(q);
    let (n, h) = (reduce(n, q), reduce(h, q));
    let mut counts = vec![0i64; q as usize];
    let inner: Vec<(u64, Complex<T>)> = units
        .iter()
        .map(|&(x, xi)| {
            counts.iter_mut().for_each(|c| *c = 0);
            for &(a, ai) in &units {
                let k = (mulm(a, h, q) + 2 * q - mulm(ai, n, q) + mulm(ai, x, q)) % q;
                counts[k as usize] += 1;
            }
            (xi, roots.fold_counts(&counts))
        })
        .collect();
    (0..q)
        .map(|alpha| {
            let mut acc = PairwiseSum::new();
            for &(xi, c) in &inner {
                acc.push(c * roots.get_reduced(mulm(alpha, xi, q)));
            }
            acc.total()
        })
        .collect()
}

/// Parameters of `T(n, m, h; q1, q~1, q2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TCharParams {
    pub n: i64,
    pub m: i64,
    pub h: i64,
    pub q1: PrimeModulus,
    pub q1t: PrimeModulus,
    pub q2: PrimeModulus,
}

impl TCharParams {
    pub fn new(n: i64, m: i64, h: i64, q1: PrimeModulus, q1t: PrimeModulus, q2: PrimeModulus) -> Result<Self> {
        if q2 == q1 || q2 == q1t {
            return Err(Error::InvalidParameter(format!(
                "q2 = {q2} must differ from q1 = {q1} and q~1 = {q1t}"
            )));
        }
        Ok(TCharParams { n, m, h, q1, q1t, q2 })
    }

    pub fn from_u64(n: i64, m: i64, h: i64, q1: u64, q1t: u64, q2: u64) -> Result<Self> {
        Self::new(n, m, h, PrimeModulus::new(q1)?, PrimeModulus::new(q1t)?, PrimeModulus::new(q2)?)
    }

    pub fn is_diagonal(&self) -> bool {
        self.q1 == self.q1t
    }

    /// Modulus of the outer α-sum: `q1 q~1 q2` (equal to `q1^2 q2` on the
    /// diagonal).
    pub fn outer_modulus(&self) -> u64 {
        self.q1.get() * self.q1t.get() * self.q2.get()
    }

    pub fn with_m(&self, m: i64) -> Self {
        TCharParams { m, ..*self }
    }
}

/// Evaluates `T` for many `m` with `(n, h, q1, q~1, q2)` fixed.
#[derive(Clone, Debug)]
pub struct TEvaluator<T> {
    /// `S(1, α, n, h; q1 q2) * conj(S(1, α, n, h; q~1 q2))` for `α mod N`.
    product: Vec<Complex<T>>,
    roots: RootsOfUnity<T>,
}

impl<T: Real> TEvaluator<T> {
    pub fn new(p: &TCharParams) -> Self {
        let qa = p.q1.get() * p.q2.get();
        let qb = p.q1t.get() * p.q2.get();
        let a = s_row_unit_m1::<T>(p.n, p.h, qa);
        if qa == qb {
            return Self::from_rows(p, &a, &a);
        }
        Self::from_rows(p, &a, &s_row_unit_m1::<T>(p.n, p.h, qb))
    }

    /// From precomputed rows `S(1, ·, n, h; q1 q2)` and `S(1, ·, n, h; q~1 q2)`
    /// (see [`s_row_unit_m1`]), so rows can be shared between pairs.
    pub fn from_rows(p: &TCharParams, a: &[Complex<T>], b: &[Complex<T>]) -> Self {
        let qa = p.q1.get() * p.q2.get();
        let qb = p.q1t.get() * p.q2.get();
        assert!(a.len() as u64 == qa && b.len() as u64 == qb, "row lengths must match the moduli");
        let big_n = p.outer_modulus();
        let product = (0..big_n)
            .map(|alpha| a[(alpha % qa) as usize] * b[(alpha % qb) as usize].conj())
            .collect();
        TEvaluator {
            product,
            roots: RootsOfUnity::new(big_n),
        }
    }

    pub fn eval(&self, m: i64) -> Complex<T> {
        let big_n = self.roots.modulus();
        let m = reduce(m, big_n);
        let mut acc = PairwiseSum::new();
        for (alpha, v) in self.product.iter().enumerate() {
            acc.push(*v * self.roots.get_reduced(mulm(m, alpha as u64, big_n)));
        }
        acc.total()
    }
}

/// `T(n, m, h; q1, q~1, q2) = sum_{α mod q1 q~1 q2} S(1, α, n, h; q1 q2)
/// conj(S(1, α, n, h; q~1 q2)) e(m α / (q1 q~1 q2))`.
pub fn char_sum_t<T: Real>(p: &TCharParams) -> Complex<T> {
    TEvaluator::new(p).eval(p.m)
}

/// Number of terms in the outer α-sum of `T`; the scale for "vanishes".
pub fn t_term_count(p: &TCharParams) -> u64 {
    p.outer_modulus()
}

/// Which prime-modulus factor of `T` to evaluate in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TFactor {
    /// The factor modulo `q1`.
    First,
    /// The (conjugated) factor modulo `q~1`.
    Second,
}

/// Closed form of a prime factor of `T` for `q1 ≠ q~1`:
/// `q1 S(q̄2 h, -q̄2 (n + q~1 m̄); q1)` for the `q1` factor and
/// `q~1 S(q̄2 h, -q̄2 (n - q1 m̄); q~1)` for the `q~1` factor, each zero when
/// `m` is not a unit for that prime.
pub fn t1_closed_form<T: Real>(p: &TCharParams, which: TFactor) -> Result<Complex<T>> {
    if p.is_diagonal() {
        return Err(Error::InvalidParameter(
            "closed form applies only to q1 != q~1".into(),
        ));
    }
    let (own, other, sign) = match which {
        TFactor::First => (p.q1.get(), p.q1t.get(), 1i64),
        TFactor::Second => (p.q1t.get(), p.q1.get(), -1i64),
    };
    if gcd_signed(p.m, own) != 1 {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let o = own as i64;
    let q2bar = inv(p.q2.get() as i64, own) as i64;
    let mbar = inv(p.m, own) as i64;
    let shifted = (reduce(p.n, own) as i64 + sign * (other as i64 % o) * mbar).rem_euclid(o);
    let a = q2bar * reduce(p.h, own) as i64 % o;
    let b = -(q2bar * shifted % o);
    Ok(kloosterman::<T>(a, b, own) * from_int::<T>(o))
}

/// The modulo-`q2` factor of `T`:
/// `q2 sum**_δ sum*_β sum*_γ e_q2(q̄1 h β - q̄1 n β̄ - q̄~1 h γ + q̄~1 n γ̄
///  + q̄1 β̄ δ̄ - q̄~1 q1 γ̄ (q~1 δ + m)^{-1})`,
/// with `δ` running over units for which `q~1 δ + m` is also a unit.
pub fn t2_sum<T: Real>(
    n: i64,
    m: i64,
    h: i64,
    q1: PrimeModulus,
    q1t: PrimeModulus,
    q2: PrimeModulus,
) -> Result<Complex<T>> {
    if q2 == q1 || q2 == q1t {
        return Err(Error::InvalidParameter("q2 must differ from q1 and q~1".into()));
    }
    let p = q2.get();
    let i1 = inv(q1.get() as i64, p);
    let i1t = inv(q1t.get() as i64, p);
    let (n, m, h) = (reduce(n, p), reduce(m, p), reduce(h, p));
    let q1t_m = q1t.get() % p;
    let q1_m = q1.get() % p;
    let units = unit_pairs(p);
    let mut inverse = vec![0u64; p as usize];
    for &(x, xi) in &units {
        inverse[x as usize] = xi;
    }
    let mut counts = vec![0i64; p as usize];
    let mut r1 = vec![0u64; units.len()];
    let mut r2 = vec![0u64; units.len()];
    for &(delta, dbar) in &units {
        let shift = (mulm(q1t_m, delta, p) + m) % p;
        if shift == 0 {
            continue;
        }
        let e = inverse[shift as usize];
        for (slot, &(b, bi)) in r1.iter_mut().zip(&units) {
            // q̄1 h β - q̄1 n β̄ + q̄1 β̄ δ̄
            *slot = (mulm(mulm(i1, h, p), b, p) + p - mulm(mulm(i1, n, p), bi, p)
                + mulm(mulm(i1, bi, p), dbar, p))
                % p;
        }
        for (slot, &(g, gi)) in r2.iter_mut().zip(&units) {
            // -q̄~1 h γ + q̄~1 n γ̄ - q̄~1 q1 γ̄ e
            let pos = mulm(mulm(i1t, n, p), gi, p);
            let neg = (mulm(mulm(i1t, h, p), g, p)
                + mulm(mulm(mulm(i1t, q1_m, p), gi, p), e, p))
                % p;
            *slot = (pos + p - neg) % p;
        }
        for &x in &r1 {
            for &y in &r2 {
                counts[((x + y) % p) as usize] += 1;
            }
        }
    }
    Ok(RootsOfUnity::<T>::new(p).fold_counts(&counts) * from_int::<T>(p as i64))
}

/// Parameter tuples for a `T` census.
#[derive(Clone, Debug, PartialEq)]
pub enum TupleSource {
    /// Every combination of the listed values.
    Grid { n: Vec<i64>, m: Vec<i64>, h: Vec<i64> },
    /// `count` pseudo-random tuples per prime triple from a seeded ChaCha
    /// stream; `|n|, |m| <= range`, `1 <= h <= range`, `h` coprime to all
    /// three primes, and `m` coprime to `q1 q~1` when `coprime_m` is set.
    Random { count: usize, seed: u64, range: i64, coprime_m: bool },
}

impl TupleSource {
    fn tuples(&self, q1: u64, q1t: u64, q2: u64) -> Vec<(i64, i64, i64)> {
        match self {
            TupleSource::Grid { n, m, h } => {
                let mut out = Vec::new();
                for &nn in n {
                    for &mm in m {
                        for &hh in h {
                            out.push((nn, mm, hh));
                        }
                    }
                }
                out
            }
            TupleSource::Random { count, seed, range, coprime_m } => {
                let stream = seed ^ (q1 << 40) ^ (q1t << 20) ^ q2;
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let mut out = Vec::with_capacity(*count);
                while out.len() < *count {
                    let n = rng.random_range(-range..=*range);
                    let m = rng.random_range(-range..=*range);
                    let h = rng.random_range(1..=*range);
                    if gcd_signed(h, q1 * q1t * q2) != 1 {
                        continue;
                    }
                    if *coprime_m && gcd_signed(m, q1 * q1t) != 1 {
                        continue;
                    }
                    out.push((n, m, h));
                }
                out
            }
        }
    }
}

/// Parameter families swept by [`bound_census`].
#[derive(Clone, Debug, PartialEq)]
pub enum CensusFamily {
    /// `S` over all pairs `q1 < q2` from `primes`, every `m1 | q1 q2`, and
    /// `m2, n, h` over the inclusive ranges with `gcd(n h, q) = 1`.
    S {
        primes: Vec<u64>,
        m2: (i64, i64),
        n: (i64, i64),
        h: (i64, i64),
    },
    /// `T` over ordered pairs `q1 ≠ q~1` from `q1_primes` and `q2` from
    /// `q2_primes`.
    TOffDiagonal {
        q1_primes: Vec<u64>,
        q2_primes: Vec<u64>,
        tuples: TupleSource,
    },
    /// `T` with `q1 = q~1`.
    TDiagonal {
        q1_primes: Vec<u64>,
        q2_primes: Vec<u64>,
        tuples: TupleSource,
    },
}

/// Bound shape a census normalizes by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalizer {
    /// `(q / sqrt(m1)) sqrt(gcd(q/m1, m2))`.
    SquareRootS,
    /// `q1^{3/2} q~1^{3/2} q2^{5/2} gcd(m, q2)^{1/2}`.
    TOffDiagonal,
    /// `q1^{5/2} q2^{5/2} sqrt(gcd(m', q1 q2))` for `m = q1 m'`; for
    /// `q1 ∤ m` the sum must vanish and `q1^{5/2} q2^{5/2}` is used.
    TDiagonal,
}

fn check_primes(ps: &[u64]) -> Result<()> {
    for &p in ps {
        PrimeModulus::new(p)?;
    }
    Ok(())
}

/// Sweeps a family and reports `|sum| / normalizer` per tuple.
pub fn bound_census(family: &CensusFamily, normalizer: Normalizer) -> Result<ExperimentReport> {
    match (family, normalizer) {
        (CensusFamily::S { primes, m2, n, h }, Normalizer::SquareRootS) => {
            check_primes(primes)?;
            s_census(primes, *m2, *n, *h)
        }
        (CensusFamily::TOffDiagonal { q1_primes, q2_primes, tuples }, Normalizer::TOffDiagonal) => {
            check_primes(q1_primes)?;
            check_primes(q2_primes)?;
            let mut triples = Vec::new();
            for &a in q1_primes {
                for &b in q1_primes {
                    for &c in q2_primes {
                        if a != b && c != a && c != b {
                            triples.push((a, b, c));
                        }
                    }
                }
            }
            t_census("t-offdiagonal-census", &triples, tuples, normalizer)
        }
        (CensusFamily::TDiagonal { q1_primes, q2_primes, tuples }, Normalizer::TDiagonal) => {
            check_primes(q1_primes)?;
            check_primes(q2_primes)?;
            let mut triples = Vec::new();
            for &a in q1_primes {
                for &c in q2_primes {
                    if c != a {
                        triples.push((a, a, c));
                    }
                }
            }
            t_census("t-diagonal-census", &triples, tuples, normalizer)
        }
        (f, nz) => Err(Error::InvalidParameter(format!(
            "normalizer {nz:?} does not apply to family {}",
            match f {
                CensusFamily::S { .. } => "S",
                CensusFamily::TOffDiagonal { .. } => "T off-diagonal",
                CensusFamily::TDiagonal { .. } => "T diagonal",
            }
        ))),
    }
}

fn s_census(primes: &[u64], m2r: (i64, i64), nr: (i64, i64), hr: (i64, i64)) -> Result<ExperimentReport> {
    let mut tasks = Vec::new();
    for (i, &q1) in primes.iter().enumerate() {
        for &q2 in &primes[i + 1..] {
            let q = q1 * q2;
            for m1 in [1, q1, q2, q] {
                for m2 in m2r.0..=m2r.1 {
                    tasks.push((q1, q2, m1, m2));
                }
            }
        }
    }
    let chunks: Vec<Vec<Record>> = tasks
        .par_iter()
        .map(|&(q1, q2, m1, m2)| {
            let q = q1 * q2;
            let ev = SEvaluator::<f64>::new(m1, m2, q).expect("m1 divides q");
            let r = q / m1;
            let norm = q as f64 / (m1 as f64).sqrt() * (gcd(r, m2.unsigned_abs()) as f64).sqrt();
            let mut recs = Vec::new();
            for n in nr.0..=nr.1 {
                for h in hr.0..=hr.1 {
                    if gcd_signed(n, q) != 1 || gcd_signed(h, q) != 1 {
                        continue;
                    }
                    let v = ev.eval(n, h).norm();
                    recs.push(Record::new(
                        vec![
                            ("q1", q1 as f64),
                            ("q2", q2 as f64),
                            ("m1", m1 as f64),
                            ("m2", m2 as f64),
                            ("n", n as f64),
                            ("h", h as f64),
                        ],
                        v,
                        norm,
                    ));
                }
            }
            recs
        })
        .collect();
    Ok(ExperimentReport::new("s-census", chunks.into_iter().flatten().collect()))
}

fn t_normalizer(q1: u64, q1t: u64, q2: u64, m: i64, normalizer: Normalizer) -> (f64, bool) {
    let (a, b, c) = (q1 as f64, q1t as f64, q2 as f64);
    match normalizer {
        Normalizer::TOffDiagonal => {
            let g = gcd_signed(m, q2) as f64;
            let zero = gcd_signed(m, q1 * q1t) != 1;
            (a.powf(1.5) * b.powf(1.5) * c.powf(2.5) * g.sqrt(), zero)
        }
        Normalizer::TDiagonal => {
            let base = a.powf(2.5) * c.powf(2.5);
            if m.rem_euclid(q1 as i64) != 0 {
                (base, true)
            } else {
                let mp = m / q1 as i64;
                (base * (gcd_signed(mp, q1 * q2) as f64).sqrt(), false)
            }
        }
        Normalizer::SquareRootS => unreachable!("S normalizer is not a T shape"),
    }
}

fn t_census(
    name: &str,
    triples: &[(u64, u64, u64)],
    tuples: &TupleSource,
    normalizer: Normalizer,
) -> Result<ExperimentReport> {
    let chunks: Vec<Vec<Record>> = triples
        .par_iter()
        .map(|&(q1, q1t, q2)| {
            let mut recs = Vec::new();
            let list = tuples.tuples(q1, q1t, q2);
            // group by (n, h) so each T evaluator is reused across m
            let mut i = 0;
            while i < list.len() {
                let (n, _, h) = list[i];
                let p = TCharParams::from_u64(n, 0, h, q1, q1t, q2).expect("validated primes");
                let ev = TEvaluator::<f64>::new(&p);
                while i < list.len() && list[i].0 == n && list[i].2 == h {
                    let m = list[i].1;
                    let v = ev.eval(m).norm();
                    let (norm, expect_zero) = t_normalizer(q1, q1t, q2, m, normalizer);
                    recs.push(Record::new(
                        vec![
                            ("q1", q1 as f64),
                            ("q1t", q1t as f64),
                            ("q2", q2 as f64),
                            ("n", n as f64),
                            ("m", m as f64),
                            ("h", h as f64),
                            ("expect_zero", if expect_zero { 1.0 } else { 0.0 }),
                            ("term_count", t_term_count(&p) as f64),
                        ],
                        v,
                        norm,
                    ));
                    i += 1;
                }
            }
            recs
        })
        .collect();
    Ok(ExperimentReport::new(name, chunks.into_iter().flatten().collect()))
}

/// Checks `T = T1 * T~1 * T2` on every off-diagonal triple with `m` coprime
/// to `q1 q~1`. Records carry the residual `|T - product|` normalized by
/// `max(|T|, 1)`.
pub fn crt_identity_census(
    q1_primes: &[u64],
    q2_primes: &[u64],
    per_triple: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    check_primes(q1_primes)?;
    check_primes(q2_primes)?;
    let mut triples = Vec::new();
    for &a in q1_primes {
        for &b in q1_primes {
            for &c in q2_primes {
                if a != b && c != a && c != b {
                    triples.push((a, b, c));
                }
            }
        }
    }
    let source = TupleSource::Random {
        count: per_triple,
        seed,
        range: 1000,
        coprime_m: true,
    };
    let chunks: Vec<Vec<Record>> = triples
        .par_iter()
        .map(|&(q1, q1t, q2)| {
            source
                .tuples(q1, q1t, q2)
                .into_iter()
                .map(|(n, m, h)| {
                    let p = TCharParams::from_u64(n, m, h, q1, q1t, q2).expect("validated primes");
                    let direct = char_sum_t::<f64>(&p);
                    let product = t1_closed_form::<f64>(&p, TFactor::First).expect("off-diagonal")
                        * t1_closed_form::<f64>(&p, TFactor::Second).expect("off-diagonal")
                        * t2_sum::<f64>(n, m, h, p.q1, p.q1t, p.q2).expect("distinct primes");
                    Record::new(
                        vec![
                            ("q1", q1 as f64),
                            ("q1t", q1t as f64),
                            ("q2", q2 as f64),
                            ("n", n as f64),
                            ("m", m as f64),
                            ("h", h as f64),
                        ],
                        (direct - product).norm(),
                        direct.norm().max(1.0),
                    )
                })
                .collect()
        })
        .collect();
    Ok(ExperimentReport::new("t-identity", chunks.into_iter().flatten().collect()))
}

/// Convenience for callers that want `|S| / bound` for one tuple.
pub fn s_ratio<T: Real>(p: &SCharParams) -> Result<T> {
    let q = p.q();
    let v = char_sum_s::<T>(p)?.norm();
    let r = q / p.m1;
    let norm = lit::<T>(q as f64 / (p.m1 as f64).sqrt() * (gcd(r, p.m2.unsigned_abs()) as f64).sqrt());
    Ok(v / norm)
}

/// `|T|` relative to the trivial size `N * phi(q1 q2) * phi(q~1 q2)`; used
/// in reports to show how far below trivial a value sits.
pub fn t_trivial_ratio<T: Real>(p: &TCharParams, value: Complex<T>) -> f64 {
    let qa = p.q1.get() * p.q2.get();
    let qb = p.q1t.get() * p.q2.get();
    let trivial = p.outer_modulus() as f64
        * crate::arith::euler_phi(qa) as f64
        * crate::arith::euler_phi(qb) as f64;
    to_f64(value.norm()) / trivial
}
