//! Overlapping-interval circle method with factorable moduli.
//!
//! `Ĩ(x) = (1/(2δL)) sum_{q in Q} sum*_{a mod q} 1[|x - a/q| <= δ]` is an
//! approximation to the constant 1 on the circle; its Fourier coefficients are
//! `a_n = (1/L) sum_q c_q(n) sinc(2π n δ)`.

use rayon::prelude::*;

use crate::arith::{divisors, euler_phi, gcd, primes_in_dyadic, ramanujan_sum, sigma};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, Record};
use crate::scalar::{lit, pairwise_sum, sinc, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Modulus {
    pub q: u64,
    pub q1: u64,
    pub q2: u64,
}

/// The moduli set `Q` with its normalizer `L = sum_{q in Q} phi(q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuliSet {
    anchors: Option<(u64, u64)>,
    q1s: Vec<u64>,
    q2s: Vec<u64>,
    members: Vec<Modulus>,
    l: f64,
    h_excluded: i64,
}

/// Product set `{q1 q2}` with `q1` prime in `[Q1, 2Q1]`, `q2` prime in
/// `[Q2, 2Q2]`, neither dividing `h` (`h = 0` excludes nothing).
pub fn build_moduli_set(big_q1: u64, big_q2: u64, h: i64) -> Result<ModuliSet> {
    if big_q1 < 2 || big_q2 < 2 {
        return Err(Error::InvalidParameter(format!(
            "dyadic anchors must be >= 2, got Q1 = {big_q1}, Q2 = {big_q2}"
        )));
    }
    if !(2 * big_q1 < big_q2 || 2 * big_q2 < big_q1) {
        return Err(Error::OverlappingRanges { q1: big_q1, q2: big_q2 });
    }
    let collect = |lo: u64, which: &str| -> Result<Vec<u64>> {
        match primes_in_dyadic(lo, h) {
            Ok(ps) => Ok(ps.into_iter().map(|p| p.get()).collect()),
            Err(Error::EmptyRange { lo, hi }) => Err(Error::EmptyCollection(format!(
                "no prime in [{lo}, {hi}] for {which} coprime to h = {h}"
            ))),
            Err(e) => Err(e),
        }
    };
    let q1s = collect(big_q1, "Q1")?;
    let q2s = collect(big_q2, "Q2")?;
    let mut members: Vec<Modulus> = q1s
        .iter()
        .flat_map(|&q1| q2s.iter().map(move |&q2| Modulus { q: q1 * q2, q1, q2 }))
        .collect();
    members.sort();
    let l = members.iter().map(|m| euler_phi(m.q) as f64).sum();
    Ok(ModuliSet {
        anchors: Some((big_q1, big_q2)),
        q1s,
        q2s,
        members,
        l,
        h_excluded: h,
    })
}

impl ModuliSet {
    /// An arbitrary set of distinct moduli (no product structure).
    pub fn custom(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::EmptyCollection("custom moduli list is empty".into()));
        }
        let mut sorted = moduli.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateModulus(w[0]));
            }
        }
        if sorted[0] == 0 {
            return Err(Error::InvalidParameter("modulus 0".into()));
        }
        let members: Vec<Modulus> = sorted.iter().map(|&q| Modulus { q, q1: q, q2: 1 }).collect();
        let l = members.iter().map(|m| euler_phi(m.q) as f64).sum();
        Ok(ModuliSet {
            anchors: None,
            q1s: sorted.clone(),
            q2s: vec![1],
            members,
            l,
            h_excluded: 0,
        })
    }

    pub fn members(&self) -> &[Modulus] {
        &self.members
    }

    pub fn q1_primes(&self) -> &[u64] {
        &self.q1s
    }

    pub fn q2_primes(&self) -> &[u64] {
        &self.q2s
    }

    pub fn anchors(&self) -> Option<(u64, u64)> {
        self.anchors
    }

    pub fn h_excluded(&self) -> i64 {
        self.h_excluded
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `L = sum phi(q)`.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// `Q`: `4 Q1 Q2` for a product set, the largest member otherwise.
    pub fn max_modulus(&self) -> u64 {
        match self.anchors {
            Some((a, b)) => 4 * a * b,
            None => self.members.last().map_or(1, |m| m.q),
        }
    }

    /// `L` recomputed from the member list.
    pub fn recompute_l(&self) -> f64 {
        self.members
            .iter()
            .map(|m| (euler_phi(m.q1) * euler_phi(m.q2)) as f64)
            .sum()
    }
}

/// `Ĩ` for a moduli set and half-width `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Approximant<T> {
    moduli: ModuliSet,
    delta: T,
}

impl<T: Real> Approximant<T> {
    /// Requires `Q^{-2}/8 <= δ <= 8/Q` and `δ < 1/2`.
    pub fn new(moduli: ModuliSet, delta: T) -> Result<Self> {
        let (lo, hi) = Self::delta_range(&moduli);
        let d = to_f64(delta);
        if !(d.is_finite() && d >= lo && d <= hi) {
            return Err(Error::DeltaOutOfRange { delta: d, lo, hi });
        }
        Ok(Approximant { moduli, delta })
    }

    pub fn delta_range(moduli: &ModuliSet) -> (f64, f64) {
        let q = moduli.max_modulus() as f64;
        (1.0 / (8.0 * q * q), (8.0 / q).min(0.499))
    }

    pub fn moduli(&self) -> &ModuliSet {
        &self.moduli
    }

    pub fn delta(&self) -> T {
        self.delta
    }
}

/// `Ĩ(x)` with circular interval membership.
pub fn approximant_eval<T: Real>(a: &Approximant<T>, x: T) -> T {
    let x = to_f64(x).rem_euclid(1.0);
    let d = to_f64(a.delta);
    let mut count = 0u64;
    for m in &a.moduli.members {
        let q = m.q as i64;
        let qf = q as f64;
        let lo = ((x - d) * qf).floor() as i64;
        let hi = ((x + d) * qf).ceil() as i64;
        // δ < 1/2, so at most one k per residue class lies within δ of x
        for k in lo..=hi {
            if q != 1 && gcd(k.rem_euclid(q) as u64, q as u64) != 1 {
                continue;
            }
            if (x - k as f64 / qf).abs() <= d {
                count += 1;
            }
        }
    }
    lit::<T>(count as f64 / (2.0 * d * a.moduli.l))
}

/// `a_n = (1/L) sum_q c_q(n) sinc(2π n δ)`; real because `c_q` is.
pub fn fourier_coeff<T: Real>(a: &Approximant<T>, n: i64) -> T {
    if n == 0 {
        return T::one();
    }
    let s: i64 = a.moduli.members.iter().map(|m| ramanujan_sum(m.q, n)).sum();
    let t = T::TAU() * lit::<T>(n as f64) * a.delta;
    lit::<T>(s as f64 / a.moduli.l) * sinc(t)
}

/// `(1/L) sum_q sum_{d | (n, q)} d`, the trivial majorant of `|a_n|`.
pub fn fourier_majorant<T: Real>(a: &Approximant<T>, n: i64) -> T {
    let n = n.unsigned_abs();
    let s: u64 = a
        .moduli
        .members
        .iter()
        .map(|m| divisors(gcd(n, m.q)).iter().sum::<u64>())
        .sum();
    lit::<T>(s as f64 / a.moduli.l)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2Error {
    /// `sum_{0 < |n| <= N} a_n^2`.
    pub partial: f64,
    /// Upper bound for `sum_{|n| > N} a_n^2`.
    pub tail: f64,
    pub truncation: u64,
}

impl L2Error {
    pub fn total(&self) -> f64 {
        self.partial + self.tail
    }
}

/// Parseval evaluation of `∫ |1 - Ĩ|^2`, truncated at `N_max >= 1/δ` with
/// tail majorant `2 (B / (2π δ L))^2 / N_max`, `B = sum_q sigma(q)`.
pub fn l2_error<T: Real>(a: &Approximant<T>, n_max: u64) -> Result<L2Error> {
    let d = to_f64(a.delta);
    if (n_max as f64) < 1.0 / d {
        return Err(Error::InvalidParameter(format!(
            "truncation {n_max} is below 1/delta = {}",
            1.0 / d
        )));
    }
    let l = a.moduli.l;
    let members: Vec<u64> = a.moduli.members.iter().map(|m| m.q).collect();
    let terms: Vec<f64> = (1..=n_max as i64)
        .into_par_iter()
        .map(|n| {
            let s: i64 = members.iter().map(|&q| ramanujan_sum(q, n)).sum();
            let v = s as f64 / l * sinc(std::f64::consts::TAU * n as f64 * d);
            v * v
        })
        .collect();
    let partial = 2.0 * pairwise_sum(terms);
    let b: f64 = members.iter().map(|&q| sigma(q) as f64).sum();
    let c = b / (std::f64::consts::TAU * d * l);
    Ok(L2Error {
        partial,
        tail: 2.0 * c * c / n_max as f64,
        truncation: n_max,
    })
}

/// `∫_0^1 |1 - Ĩ(x)|^2 dx` computed exactly from the breakpoints `a/q ± δ`.
pub fn l2_error_direct<T: Real>(a: &Approximant<T>) -> f64 {
    let d = to_f64(a.delta);
    // +1 at a/q - δ, -1 at a/q + δ, on the circle
    let mut events: Vec<(f64, i64)> = Vec::new();
    let mut initial = 0i64;
    for m in &a.moduli.members {
        for r in 0..m.q {
            if m.q != 1 && gcd(r, m.q) != 1 {
                continue;
            }
            let c = r as f64 / m.q as f64;
            let (s, e) = (c - d, c + d);
            if s < 0.0 || e >= 1.0 {
                initial += 1;
            }
            events.push((s.rem_euclid(1.0), 1));
            events.push((e.rem_euclid(1.0), -1));
        }
    }
    // interval [s, e] wrapping past 0 starts "active" at x = 0
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let height = 1.0 / (2.0 * d * a.moduli.l);
    let mut level = initial;
    let mut prev = 0.0;
    let mut acc = Vec::with_capacity(events.len() + 1);
    for (x, step) in events {
        let v = 1.0 - level as f64 * height;
        acc.push(v * v * (x - prev));
        level += step;
        prev = x;
    }
    let v = 1.0 - level as f64 * height;
    acc.push(v * v * (1.0 - prev));
    pairwise_sum(acc)
}

/// One row of an L2 census.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2CensusPoint {
    pub big_q1: u64,
    pub big_q2: u64,
    pub delta: f64,
}

/// `l2_error` over a list of `(Q1, Q2, δ)`, normalized by
/// `Q^2 log Q / (δ L^2)`. Truncation is `ceil(64/δ)`.
pub fn l2_census(points: &[L2CensusPoint], h: i64) -> Result<ExperimentReport> {
    let mut recs = Vec::with_capacity(points.len());
    for p in points {
        let set = build_moduli_set(p.big_q1, p.big_q2, h)?;
        let q = set.max_modulus() as f64;
        let l = set.l();
        let a = Approximant::new(set, p.delta)?;
        let n_max = (64.0 / p.delta).ceil() as u64;
        let err = l2_error(&a, n_max)?;
        let norm = q * q * q.ln() / (p.delta * l * l);
        recs.push(Record::new(
            vec![
                ("Q1", p.big_q1 as f64),
                ("Q2", p.big_q2 as f64),
                ("delta", p.delta),
                ("L", l),
                ("L_over_Q2", l / (q * q)),
                ("tail", err.tail),
            ],
            err.total(),
            norm,
        ));
    }
    Ok(ExperimentReport::new("jutila-l2", recs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moduli_set_examples() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        assert_eq!(s.q1_primes(), &[3, 5]);
        assert_eq!(s.q2_primes(), &[11, 13, 17, 19]);
        assert_eq!(s.len(), 8);
        assert!((s.l() - s.recompute_l()).abs() < 1e-9);
        let qs: Vec<u64> = s.members().iter().map(|m| m.q).collect();
        assert!(qs.windows(2).all(|w| w[0] < w[1]));
        let s = build_moduli_set(3, 11, 3).unwrap();
        assert_eq!(s.q1_primes(), &[5]);
        assert_eq!(build_moduli_set(3, 5, 1), Err(Error::OverlappingRanges { q1: 3, q2: 5 }));
        assert!(matches!(build_moduli_set(3, 11, 15), Err(Error::EmptyCollection(_))));
        // h = 0 excludes nothing
        assert_eq!(build_moduli_set(3, 11, 0).unwrap().len(), 8);
    }

    #[test]
    fn custom_rejects_duplicates() {
        assert_eq!(ModuliSet::custom(&[7, 5, 7]), Err(Error::DuplicateModulus(7)));
        assert!(ModuliSet::custom(&[]).is_err());
    }

    #[test]
    fn delta_range_enforced() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        let q = s.max_modulus() as f64;
        assert!(Approximant::new(s.clone(), 1.0 / q).is_ok());
        assert!(matches!(Approximant::new(s.clone(), 9.0 / q), Err(Error::DeltaOutOfRange { .. })));
        assert!(Approximant::new(s, 1.0 / (9.0 * q * q)).is_err());
    }

    #[test]
    fn isolated_interval_value() {
        let q = 7u64;
        let d = 1.0 / (3.0 * (q * q) as f64);
        let a = Approximant::new(ModuliSet::custom(&[q]).unwrap(), d).unwrap();
        let want = 1.0 / (2.0 * d * euler_phi(q) as f64);
        for r in 1..q {
            let v: f64 = approximant_eval(&a, r as f64 / q as f64);
            assert!((v - want).abs() < 1e-9 * want);
        }
        assert_eq!(approximant_eval(&a, 0.0), 0.0);
        assert_eq!(approximant_eval(&a, 0.5 / q as f64), 0.0);
    }

    #[test]
    fn wraps_near_zero() {
        let s = ModuliSet::custom(&[1]).unwrap();
        let a = Approximant::new(s, 0.2).unwrap();
        assert!(approximant_eval(&a, 0.95) > 0.0);
        assert!(approximant_eval(&a, 0.05) > 0.0);
        assert_eq!(approximant_eval(&a, 0.5), 0.0);
    }

    #[test]
    fn fourier_examples() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        let q = s.max_modulus() as f64;
        let a = Approximant::new(s, 1.0 / q).unwrap();
        assert_eq!(fourier_coeff(&a, 0), 1.0);
        for n in 1..2000i64 {
            let v = fourier_coeff(&a, n).abs();
            let maj = fourier_majorant(&a, n);
            assert!(v <= maj + 1e-12);
            if (n as f64) > q {
                let tail = maj / (std::f64::consts::TAU * n as f64 / q);
                assert!(v <= tail + 1e-12);
            }
            assert_eq!(fourier_coeff(&a, -n), fourier_coeff(&a, n));
        }
    }

    #[test]
    fn mean_is_one() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        let q = s.max_modulus() as f64;
        let a = Approximant::new(s, 2.0 / q).unwrap();
        // Ĩ is piecewise constant; midpoint rule on a fine grid
        let n = 400_000;
        let mean: f64 = pairwise_sum((0..n).map(|i| approximant_eval(&a, (i as f64 + 0.5) / n as f64))) / n as f64;
        assert!((mean - 1.0).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn parseval_matches_exact_and_grid_quadrature() {
        let s = ModuliSet::custom(&[15, 21]).unwrap();
        let q = s.max_modulus() as f64;
        let d = 0.5 / q;
        let a = Approximant::new(s, d).unwrap();
        let exact = l2_error_direct(&a);
        let step = d / 50.0;
        let n = (1.0 / step).ceil() as usize;
        let h = 1.0 / n as f64;
        let grid: f64 = pairwise_sum((0..n).map(|i| {
            let v = 1.0 - approximant_eval(&a, (i as f64 + 0.5) * h);
            v * v * h
        }));
        assert!((grid - exact).abs() / exact < 0.01, "{grid} vs {exact}");
        let e = l2_error(&a, (64.0 / d) as u64).unwrap();
        assert!(e.partial <= exact + 1e-12);
        assert!(e.total() >= exact - 1e-12);
        assert!((e.partial - exact).abs() / exact < 0.01, "{} vs {exact}", e.partial);
    }

    #[test]
    fn l2_requires_long_truncation() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        let q = s.max_modulus() as f64;
        let a = Approximant::new(s, 1.0 / q).unwrap();
        assert!(l2_error(&a, (q / 2.0) as u64).is_err());
    }

    #[test]
    fn larger_delta_smaller_error() {
        let s = build_moduli_set(3, 11, 1).unwrap();
        let q = s.max_modulus() as f64;
        let wide = Approximant::new(s.clone(), 1.0 / q).unwrap();
        let narrow = Approximant::new(s, 1.0 / (q * q)).unwrap();
        assert!(l2_error_direct(&wide) < l2_error_direct(&narrow));
    }
}
