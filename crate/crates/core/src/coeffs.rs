//! Hecke eigenvalue tables for the discriminant form and its symmetric square.

use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::arith::{factorize, primes_up_to, smallest_prime_factors, PrimeModulus};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Integer coefficients `tau(1..=n)` (index 0 unused), cached across calls.
static TAU: Mutex<Option<Arc<Vec<i128>>>> = Mutex::new(None);

/// `tau(n)` for `1 <= n <= len` from `q prod (1 - q^n)^24 = q J(q)^8`, with
/// `J = prod (1 - q^n)^3 = sum_k (-1)^k (2k+1) q^{k(k+1)/2}`.
pub fn ramanujan_tau(len: usize) -> Arc<Vec<i128>> {
    let mut guard = TAU.lock().expect("tau cache poisoned");
    if let Some(t) = guard.as_ref() {
        if t.len() > len {
            return Arc::clone(t);
        }
    }
    // coefficients of J^8 up to q^{len-1}
    let m = len.max(1);
    let mut jac: Vec<(usize, i128)> = Vec::new();
    for k in 0.. {
        let e = k * (k + 1) / 2;
        if e >= m {
            break;
        }
        let c = (2 * k + 1) as i128;
        jac.push((e, if k % 2 == 0 { c } else { -c }));
    }
    let mut cur = vec![0i128; m];
    for &(e, c) in &jac {
        cur[e] = c;
    }
    for _ in 1..8 {
        let prev = cur;
        cur = (0..m)
            .into_par_iter()
            .map(|n| {
                let mut s = 0i128;
                for &(e, c) in &jac {
                    if e > n {
                        break;
                    }
                    s += c * prev[n - e];
                }
                s
            })
            .collect();
    }
    let mut tau = vec![0i128; m + 1];
    tau[1..].copy_from_slice(&cur);
    let tau = Arc::new(tau);
    *guard = Some(Arc::clone(&tau));
    tau
}

/// Normalized coefficients `lambda(n) = a(n) / n^{(k-1)/2}` of a level-one
/// holomorphic eigenform.
#[derive(Clone, Debug, PartialEq)]
pub struct GL2CoefficientTable<T> {
    weight: u32,
    lambda: Vec<T>,
}

/// Builds the table for the weight-12 discriminant form.
pub fn build_gl2_table<T: Real>(weight: u32, len: usize) -> Result<GL2CoefficientTable<T>> {
    if weight != 12 {
        return Err(Error::UnsupportedWeight(weight));
    }
    if len == 0 {
        return Err(Error::InvalidParameter("table length must be at least 1".into()));
    }
    let tau = ramanujan_tau(len);
    let expo = (weight as f64 - 1.0) / 2.0;
    let mut lambda = vec![T::zero(); len + 1];
    lambda[1..]
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, slot)| {
            let n = (i + 1) as f64;
            *slot = lit(tau[i + 1] as f64 / n.powf(expo));
        });
    Ok(GL2CoefficientTable { weight, lambda })
}

impl<T: Real> GL2CoefficientTable<T> {
    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.lambda.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `lambda(n)`; panics outside `1..=len`.
    pub fn lambda(&self, n: usize) -> T {
        assert!(n >= 1 && n <= self.len(), "n = {n} outside table of length {}", self.len());
        self.lambda[n]
    }

    pub fn get(&self, n: usize) -> Result<T> {
        if n == 0 || n > self.len() {
            return Err(Error::OutOfRange { value: n as u64, limit: self.len() as u64 });
        }
        Ok(self.lambda[n])
    }

    /// Values indexed from 0 (`values()[0]` is unused and zero).
    pub fn values(&self) -> &[T] {
        &self.lambda
    }

    /// Every coefficient multiplied by `c`. The result is no longer a Hecke
    /// eigenform table; it exists for linearity checks.
    pub fn scaled(&self, c: T) -> Self {
        GL2CoefficientTable {
            weight: self.weight,
            lambda: self.lambda.iter().map(|&v| v * c).collect(),
        }
    }

    /// `(1/x) sum_{n <= x} lambda(n)^2`.
    pub fn rankin_selberg_average(&self, x: usize) -> Result<T> {
        if x == 0 || x > self.len() {
            return Err(Error::OutOfRange { value: x as u64, limit: self.len() as u64 });
        }
        let s: T = self.lambda[1..=x].iter().map(|&v| v * v).sum();
        Ok(s / lit(x as f64))
    }

    /// Largest `|lambda(p^{j+1}) - lambda(p) lambda(p^j) + lambda(p^{j-1})|`
    /// over prime powers in the table.
    pub fn hecke_residual(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for p in primes_up_to(n as u64) {
            let p = p as usize;
            let lp = to_f64(self.lambda[p]);
            let (mut prev, mut cur, mut pk) = (1.0f64, lp, p);
            while let Some(next) = pk.checked_mul(p).filter(|&v| v <= n) {
                let want = lp * cur - prev;
                worst = worst.max((to_f64(self.lambda[next]) - want).abs());
                prev = cur;
                cur = to_f64(self.lambda[next]);
                pk = next;
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "value"])?;
        for n in 1..=self.len() {
            w.write_record([n.to_string(), format!("{}", to_f64(self.lambda[n]))])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump made by [`Self::write_csv`]; rows must be `n = 1, 2, ...`.
    pub fn read_csv<R: Read>(weight: u32, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut lambda = vec![T::zero()];
        for (i, row) in r.records().enumerate() {
            let row = row?;
            let n: usize = parse_field(&row, 0, "n")?;
            if n != i + 1 {
                return Err(Error::InvalidParameter(format!("row {} has n = {n}, expected {}", i + 1, i + 1)));
            }
            let v: f64 = parse_field(&row, 1, "value")?;
            lambda.push(lit(v));
        }
        if lambda.len() < 2 {
            return Err(Error::EmptyCollection("coefficient dump has no rows".into()));
        }
        Ok(GL2CoefficientTable { weight, lambda })
    }
}

fn parse_field<F: std::str::FromStr>(row: &csv::StringRecord, idx: usize, name: &str) -> Result<F> {
    row.get(idx)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::InvalidParameter(format!("bad or missing column {name}")))
}

/// Coefficients `lambda(m1, m2)` of a self-dual GL(3) form, stored as the
/// row `lambda(1, n)`; bi-indexed values are assembled prime by prime.
#[derive(Clone, Debug, PartialEq)]
pub struct GL3CoefficientTable<T> {
    row: Vec<T>,
}

/// Symmetric-square lift of `base`, valid for `m1 m2 <= len`.
pub fn build_gl3_sym2_table<T: Real>(base: &GL2CoefficientTable<T>, len: usize) -> Result<GL3CoefficientTable<T>> {
    if len == 0 {
        return Err(Error::InvalidParameter("table length must be at least 1".into()));
    }
    let need = primes_up_to(len as u64).last().copied().unwrap_or(1) as usize;
    if base.len() < need {
        return Err(Error::InsufficientBase { have: base.len(), need });
    }
    let spf = smallest_prime_factors(len);
    let mut row = vec![T::zero(); len + 1];
    row[1] = T::one();
    for n in 2..=len {
        let p = spf[n] as usize;
        let (mut m, mut k) = (n, 0u32);
        while m % p == 0 {
            m /= p;
            k += 1;
        }
        row[n] = if m > 1 {
            row[m] * row[n / m]
        } else if k == 1 {
            let l = base.lambda(p);
            l * l - T::one()
        } else {
            // A(1,p^k) = A(1,p) [A(1,p^{k-1}) - A(1,p^{k-2})] + A(1,p^{k-3})
            let a1 = row[p];
            let pk1 = n / p;
            let pk2 = pk1 / p;
            let pk3 = if k >= 3 { row[pk2 / p] } else { T::zero() };
            a1 * (row[pk1] - row[pk2]) + pk3
        };
    }
    Ok(GL3CoefficientTable { row })
}

impl<T: Real> GL3CoefficientTable<T> {
    pub fn len(&self) -> usize {
        self.row.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `lambda(1, n)`, which equals `lambda(n, 1)`; panics outside `1..=len`.
    pub fn row(&self, n: usize) -> T {
        self.row[n]
    }

    /// Values of `lambda(1, n)` indexed from 0 (`[0]` unused).
    pub fn row_values(&self) -> &[T] {
        &self.row
    }

    /// `lambda(m1, m2)` for `m1 m2 <= len`.
    pub fn get(&self, m1: u64, m2: u64) -> Result<T> {
        let prod = m1.checked_mul(m2).unwrap_or(u64::MAX);
        if m1 == 0 || m2 == 0 || prod > self.len() as u64 {
            return Err(Error::OutOfRange { value: prod as u64, limit: self.len() as u64 });
        }
        if m1 == 1 {
            return Ok(self.row[m2 as usize]);
        }
        if m2 == 1 {
            return Ok(self.row[m1 as usize]);
        }
        let f1 = factorize(m1);
        let f2 = factorize(m2);
        let mut val = T::one();
        let mut rest2 = m2;
        for &(p, a) in &f1 {
            let b = f2.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, b)| b);
            let pb = p.pow(b);
            rest2 /= pb;
            let pa = p.pow(a) as usize;
            val *= if b == 0 {
                self.row[pa]
            } else {
                // A(p^a,p^b) = A(p^a,1) A(1,p^b) - A(p^{a-1},1) A(1,p^{b-1})
                self.row[pa] * self.row[pb as usize] - self.row[pa / p as usize] * self.row[(pb / p) as usize]
            };
        }
        Ok(val * self.row[rest2 as usize])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m1", "m2", "value"])?;
        let n = self.len() as u64;
        for m1 in 1..=n {
            for m2 in 1..=n / m1 {
                let v = self.get(m1, m2)?;
                w.write_record([m1.to_string(), m2.to_string(), format!("{}", to_f64(v))])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `m1 = 1` row of a dump made by [`Self::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut row = vec![T::zero()];
        for rec in r.records() {
            let rec = rec?;
            let m1: u64 = parse_field(&rec, 0, "m1")?;
            if m1 != 1 {
                continue;
            }
            let m2: usize = parse_field(&rec, 1, "m2")?;
            if m2 != row.len() {
                return Err(Error::InvalidParameter(format!("row m2 = {m2} out of sequence")));
            }
            let v: f64 = parse_field(&rec, 2, "value")?;
            row.push(lit(v));
        }
        if row.len() < 2 {
            return Err(Error::EmptyCollection("coefficient dump has no m1 = 1 rows".into()));
        }
        Ok(GL3CoefficientTable { row })
    }
}

/// `(1/x) sum_{n <= x} |lambda(1, n)|^2`.
pub fn rankin_selberg_average<T: Real>(table: &GL3CoefficientTable<T>, x: usize) -> Result<T> {
    if x == 0 || x > table.len() {
        return Err(Error::OutOfRange { value: x as u64, limit: table.len() as u64 });
    }
    let s: T = table.row[1..=x].iter().map(|&v| v * v).sum();
    Ok(s / lit(x as f64))
}

/// Both sides of `|l(m2,q1)|^2 <= 2 |l(m2,1)|^2 |l(q1,1)|^2 + 2 |l(m2/q1,1)|^2`,
/// with `l(m2/q1, 1) = 0` when `q1 ∤ m2`.
pub fn hecke_inequality_sides<T: Real>(table: &GL3CoefficientTable<T>, q1: PrimeModulus, m2: u64) -> Result<(T, T)> {
    let q = q1.get();
    let lhs = table.get(m2, q)?;
    let a = table.get(m2, 1)?;
    let b = table.get(q, 1)?;
    let c = if m2 % q == 0 { table.get(m2 / q, 1)? } else { T::zero() };
    let two = lit::<T>(2.0);
    Ok((lhs * lhs, two * a * a * b * b + two * c * c))
}

pub fn hecke_inequality_check<T: Real>(table: &GL3CoefficientTable<T>, q1: PrimeModulus, m2: u64) -> Result<bool> {
    let (lhs, rhs) = hecke_inequality_sides(table, q1, m2)?;
    // absorb rounding when the two sides agree exactly in exact arithmetic
    Ok(lhs <= rhs + lit::<T>(1e-12) * (T::one() + rhs))
}
