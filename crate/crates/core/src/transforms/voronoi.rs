//! Both Voronoi summation formulas as numerically checkable identities.
//!
//! Holomorphic GL(2), weight `k`, level one:
//! `sum λ(n) e_q(an) h(n) = (1/q) sum λ(n) e_q(-ān) H(n/q^2)` with
//! `H(y) = 2π i^k ∫ h(x) J_{k-1}(4π sqrt(xy)) dx`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;

use super::bessel::bessel_j;
use super::mellin::{ContourSpec, LanglandsParams, MellinBarnesKernel};
use super::windows::WeightFunctionSpec;
use crate::arith::{divisors, gcd_signed, inv, kloosterman};
use crate::coeffs::{GL2CoefficientTable, GL3CoefficientTable};
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, PairwiseSum};

/// Dual cutoff `y <= K / scale` for unmodulated weights.
pub const GL2_DUAL_CUTOFF: f64 = 3200.0;

fn trapezoid_u(h: &WeightFunctionSpec, y: f64, order: u32, m: usize, u0: f64, u1: f64, offset: bool) -> (Complex64, f64) {
    // nodes u0 + (j + 1/2) du when `offset`, else u0 + j du; endpoints vanish
    let du = (u1 - u0) / m as f64;
    let c = 4.0 * PI * y.sqrt();
    let mut acc = PairwiseSum::new();
    let mut mag = PairwiseSum::new();
    for j in 0..m {
        let u = u0 + (j as f64 + if offset { 0.5 } else { 0.0 }) * du;
        let x = u * u;
        let w = h.eval(x);
        if w.norm() == 0.0 {
            continue;
        }
        let f = w * (2.0 * u * bessel_j(order, c * u));
        acc.push(f);
        mag.push(w.norm() * 2.0 * u);
    }
    (acc.total() * du, mag.total() * du)
}

/// `H(y) = 2π i^k ∫ h(x) J_{k-1}(4π sqrt(xy)) dx`, by the trapezoid rule in
/// `u = sqrt(x)`, refined until two nested grids agree.
pub fn h_transform_holomorphic(y: f64, k: u32, h: &WeightFunctionSpec) -> Result<Complex64> {
    if k < 12 || k % 2 == 1 {
        return Err(Error::UnsupportedWeight(k));
    }
    if y < 0.0 {
        return Err(Error::InvalidParameter(format!("H needs y >= 0, got {y}")));
    }
    let (a, b) = h.support();
    let (u0, u1) = (a.sqrt(), b.sqrt());
    let freq = y.sqrt() + h.alpha.abs() * u1;
    let mut m = 200 + (16.0 * (u1 - u0) * freq) as usize;
    let (mut prev, _) = trapezoid_u(h, y, k - 1, m, u0, u1, false);
    for _ in 0..6 {
        let (mid, mag) = trapezoid_u(h, y, k - 1, m, u0, u1, true);
        let next = (prev + mid) * 0.5;
        if (next - prev).norm() <= 1e-10 * mag + 1e-300 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            return Ok(next * (TAU * sign));
        }
        prev = next;
        m *= 2;
    }
    Err(Error::QuadratureFailure(format!("Hankel transform at y = {y} did not settle")))
}

/// `H(n/q^2)` for `n = 1..=cutoff`, shared by every `a mod q`.
#[derive(Clone, Debug)]
pub struct Gl2Dual {
    q: u64,
    h: WeightFunctionSpec,
    dual: Vec<Complex64>,
}

impl Gl2Dual {
    pub fn new(q: u64, h: &WeightFunctionSpec, weight: u32, cutoff_k: f64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("q must be positive".into()));
        }
        let (_, b) = h.support();
        let q2 = (q * q) as f64;
        let y_cut = cutoff_k / h.scale + 4.0 * h.alpha * h.alpha * b;
        let n_cut = (q2 * y_cut).ceil() as usize;
        use rayon::prelude::*;
        let dual = (1..=n_cut)
            .into_par_iter()
            .map(|n| h_transform_holomorphic(n as f64 / q2, weight, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Gl2Dual { q, h: *h, dual })
    }

    pub fn cutoff(&self) -> usize {
        self.dual.len()
    }

    /// Both sides of the identity for one `a`.
    pub fn sides(&self, a: i64, table: &GL2CoefficientTable<f64>) -> Result<(Complex64, Complex64)> {
        let q = self.q;
        if gcd_signed(a, q) != 1 {
            return Err(Error::NonInvertible { a, q });
        }
        let (lo, hi) = self.h.support();
        let need = (hi.floor() as usize).max(self.cutoff());
        if table.len() < need {
            return Err(Error::TableTooShort { have: table.len(), need });
        }
        let abar = inv(a, q) as i64;
        let qi = q as i64;
        let lhs = pairwise_sum((lo.ceil().max(1.0) as usize..=hi.floor() as usize).map(|n| {
            let ph = TAU * ((a * n as i64).rem_euclid(qi)) as f64 / q as f64;
            self.h.eval(n as f64) * Complex64::from_polar(table.lambda(n), ph)
        }));
        let rhs = pairwise_sum(self.dual.iter().enumerate().map(|(i, &hv)| {
            let n = i + 1;
            let ph = -TAU * ((abar * n as i64).rem_euclid(qi)) as f64 / q as f64;
            hv * Complex64::from_polar(table.lambda(n), ph)
        })) / q as f64;
        Ok((lhs, rhs))
    }

    pub fn residual(&self, a: i64, table: &GL2CoefficientTable<f64>) -> Result<f64> {
        let (l, r) = self.sides(a, table)?;
        Ok(normalized_difference(l, r))
    }
}

/// `|l - r| / max(|l|, |r|, 1)`.
pub fn normalized_difference(l: Complex64, r: Complex64) -> f64 {
    (l - r).norm() / l.norm().max(r.norm()).max(1.0)
}

/// Normalized residual of the GL(2) Voronoi identity for one `(q, a)`.
pub fn gl2_voronoi_residual(q: u64, a: i64, h: &WeightFunctionSpec, table: &GL2CoefficientTable<f64>) -> Result<f64> {
    if gcd_signed(a, q) != 1 {
        return Err(Error::NonInvertible { a, q });
    }
    Gl2Dual::new(q, h, table.weight(), GL2_DUAL_CUTOFF)?.residual(a, table)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gl3Residual {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    /// Share of the dual sum from `y` in the top half of the cutoff range.
    pub tail_fraction: f64,
    pub terms: usize,
}

/// Both sides of the GL(3) Voronoi formula; the dual side keeps
/// `m1^2 m2 / q^3 <= y_cut`. Diagnostic: only meaningful when `params`
/// matches the archimedean data of the table's form.
pub fn gl3_voronoi_residual(
    q: u64,
    a: i64,
    g: &WeightFunctionSpec,
    table: &GL3CoefficientTable<f64>,
    params: &LanglandsParams,
    contour: ContourSpec,
    y_cut: f64,
) -> Result<Gl3Residual> {
    if gcd_signed(a, q) != 1 {
        return Err(Error::NonInvertible { a, q });
    }
    let (lo, hi) = g.support();
    let top = hi.floor() as usize;
    if table.len() < top {
        return Err(Error::TableTooShort { have: table.len(), need: top });
    }
    let qi = q as i64;
    let lhs = pairwise_sum((lo.ceil().max(1.0) as usize..=top).map(|m| {
        let ph = TAU * ((a * m as i64).rem_euclid(qi)) as f64 / q as f64;
        g.eval(m as f64) * Complex64::from_polar(table.row(m), ph)
    }));
    let kernel = MellinBarnesKernel::new(g, params, contour)?;
    let abar = inv(a, q) as i64;
    let q3 = (q * q * q) as f64;
    let mut terms = Vec::new();
    let mut tail = Vec::new();
    for m1 in divisors(q) {
        let r = q / m1;
        let m2_max = (y_cut * q3 / (m1 * m1) as f64).floor() as u64;
        for m2 in 1..=m2_max {
            let lam = table.get(m2, m1).map_err(|_| Error::TableTooShort {
                have: table.len(),
                need: (m1 * m2) as usize,
            })?;
            let y = (m1 * m1 * m2) as f64 / q3;
            let kp: Complex64 = kloosterman(abar, m2 as i64, r);
            let km: Complex64 = kloosterman(abar, -(m2 as i64), r);
            let t = (kp * kernel.g_plus(y) + km * kernel.g_minus(y)) * (lam / (m1 * m2) as f64);
            if y > 0.5 * y_cut {
                tail.push(t);
            }
            terms.push(t);
        }
    }
    let n = terms.len();
    let rhs = pairwise_sum(terms) * q as f64;
    let tail = pairwise_sum(tail) * q as f64;
    Ok(Gl3Residual {
        lhs,
        rhs,
        residual: normalized_difference(lhs, rhs),
        tail_fraction: tail.norm() / rhs.norm().max(1e-300),
        terms: n,
    })
}

/// Writes `(y, Re, Im)` rows.
pub fn write_trace_csv<W: Write>(rows: &[(f64, Complex64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "re", "im"])?;
    for (y, v) in rows {
        w.write_record([y.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::build_gl2_table;
    use crate::transforms::quadrature::integrate;
    use crate::transforms::windows::w_window;

    #[test]
    fn h_matches_adaptive_quadrature() {
        let h = WeightFunctionSpec::w(100.0, 0.0);
        for y in [0.01, 0.3, 4.0] {
            let got = h_transform_holomorphic(y, 12, &h).unwrap();
            let f = |x: f64| Complex64::new(w_window(x / 100.0) * bessel_j(11, 4.0 * PI * (x * y).sqrt()), 0.0);
            let mut want = Complex64::new(0.0, 0.0);
            for (lo, hi) in [(50.0, 100.0), (100.0, 200.0), (200.0, 300.0)] {
                want += integrate(f, lo, hi, 40, 1e-13, 0.0).unwrap();
            }
            want *= TAU;
            assert!((got - want).norm() < 1e-8 * (1.0 + want.norm()), "y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn h_small_y_vanishes_like_power() {
        let h = WeightFunctionSpec::w(100.0, 0.0);
        let a = h_transform_holomorphic(1e-9, 12, &h).unwrap().norm();
        let b = h_transform_holomorphic(4e-9, 12, &h).unwrap().norm();
        // J_11 ~ z^11, so H scales like y^{11/2}
        assert!((b / a / 4f64.powf(5.5) - 1.0).abs() < 1e-3);
        assert!(matches!(h_transform_holomorphic(1.0, 11, &h), Err(Error::UnsupportedWeight(11))));
    }

    #[test]
    fn gl2_identity_small_cases() {
        let table = build_gl2_table::<f64>(12, 20_000).unwrap();
        for (q, a) in [(1u64, 0i64), (2, 1), (5, 3)] {
            let h = WeightFunctionSpec::w(500.0, 0.0);
            let r = gl2_voronoi_residual(q, a, &h, &table).unwrap();
            assert!(r < 1e-4, "q={q}: {r}");
        }
    }

    #[test]
    fn gl2_residual_scale_invariant() {
        let table = build_gl2_table::<f64>(12, 5000).unwrap();
        let h = WeightFunctionSpec::w(200.0, 0.0);
        let r1 = gl2_voronoi_residual(3, 1, &h, &table).unwrap();
        let r2 = gl2_voronoi_residual(3, 1, &h.scaled(7.5), &table).unwrap();
        assert!(r1 < 1e-4 && r2 < 1e-4);
        let dual = Gl2Dual::new(3, &h, 12, GL2_DUAL_CUTOFF).unwrap();
        let dual7 = Gl2Dual::new(3, &h.scaled(7.5), 12, GL2_DUAL_CUTOFF).unwrap();
        let (l, r) = dual.sides(1, &table).unwrap();
        let (l7, r7) = dual7.sides(1, &table).unwrap();
        assert!((l7 - l * 7.5).norm() < 1e-9 * l7.norm());
        assert!((r7 - r * 7.5).norm() < 1e-9 * r7.norm());
    }

    #[test]
    fn gl2_rejects_bad_inputs() {
        let table = build_gl2_table::<f64>(12, 100).unwrap();
        let h = WeightFunctionSpec::w(200.0, 0.0);
        assert!(matches!(gl2_voronoi_residual(4, 2, &h, &table), Err(Error::NonInvertible { .. })));
        assert!(matches!(gl2_voronoi_residual(1, 0, &h, &table), Err(Error::TableTooShort { .. })));
    }

    #[test]
    fn trace_csv() {
        let mut buf = Vec::new();
        write_trace_csv(&[(0.5, Complex64::new(1.0, -2.0))], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "y,re,im\n0.5,1,-2\n");
    }

    #[test]
    fn gl3_residual_diagnostic() {
        let base = build_gl2_table::<f64>(12, 200).unwrap();
        let table = crate::coeffs::build_gl3_sym2_table(&base, 200).unwrap();
        let g = WeightFunctionSpec::v(50.0, 0.0);
        // y_cut = 100 keeps m2 <= 100
        let p = LanglandsParams::real(0.1, -0.3).unwrap();
        let c = ContourSpec::new(-0.5);
        let r = gl3_voronoi_residual(1, 0, &g, &table, &p, c, 100.0).unwrap();
        assert_eq!(r.terms, 100);
        assert!(r.residual.is_finite() && r.tail_fraction.is_finite());
        let s = gl3_voronoi_residual(1, 0, &g, &table, &p.permuted([2, 0, 1]), c, 100.0).unwrap();
        assert!((r.rhs - s.rhs).norm() <= 1e-9 * r.rhs.norm().max(1.0));
        assert_eq!(r.lhs, s.lhs);
        assert!(matches!(
            gl3_voronoi_residual(1, 0, &g, &table, &p, c, 1000.0),
            Err(Error::TableTooShort { .. })
        ));
    }
}
