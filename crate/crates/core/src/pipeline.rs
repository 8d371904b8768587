//! End-to-end shifted convolution experiments.
//!
//! `D_h(X) = sum_m λ1(1,m) λ2(m+h) V(m/X)` is compared with its circle-method
//! surrogate `D̃_h(X) = ∫_0^1 Ĩ(x) e(xh) S_V(x) S_W(-x) dx`, where
//! `S_V(x) = sum_m λ1(1,m) e(xm) V(m/X)` and `S_W(-x) = sum_n λ2(n) e(-xn) W(n/Y)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::arith::{gcd, gcd_signed, primes_up_to, PrimeModulus, RamanujanSum};
use crate::charsums::{s_row_unit_m1, TCharParams, TEvaluator};
use crate::coeffs::{build_gl2_table, build_gl3_sym2_table, GL2CoefficientTable, GL3CoefficientTable};
use crate::error::{Error, Result};
use crate::jutila::{build_moduli_set, Approximant, ModuliSet};
use crate::report::{config_hash, fmt_f64, ExperimentReport, Record};
use crate::scalar::{pairwise_sum, sinc};
use crate::transforms::windows::{v_window, w_window};
use crate::transforms::{
    h_transform_holomorphic, normalized_difference, ContourSpec, Gl2Dual, LanglandsParams, MellinBarnesKernel,
    WeightFunctionSpec, GL2_DUAL_CUTOFF,
};

/// Weight of the GL(2) form behind every table built here.
pub const GL2_WEIGHT: u32 = 12;

/// Slack on the upper end of the admissible dyadic range for `M`.
pub const M_SLACK: f64 = 4.0;

/// The two coefficient tables, shared between configs.
#[derive(Clone, Debug)]
pub struct Tables {
    pub gl3: Arc<GL3CoefficientTable<f64>>,
    pub gl2: Arc<GL2CoefficientTable<f64>>,
}

impl Tables {
    /// GL(3) table valid up to `gl3_len`; the GL(2) table is lengthened if
    /// the lift needs more of it.
    pub fn build(gl3_len: usize, gl2_len: usize) -> Result<Self> {
        let gl3_len = gl3_len.max(1);
        let need = primes_up_to(gl3_len as u64).last().copied().unwrap_or(1) as usize;
        let gl2 = build_gl2_table::<f64>(GL2_WEIGHT, gl2_len.max(need).max(1))?;
        let gl3 = build_gl3_sym2_table(&gl2, gl3_len)?;
        Ok(Tables { gl3: Arc::new(gl3), gl2: Arc::new(gl2) })
    }

    /// Enough for `exact_dh` and `approx_dh` at `(X, h)`.
    pub fn covering(x: f64, h: u64) -> Result<Self> {
        let (_, m_hi) = m_range(x);
        let (_, n_hi) = n_range(x + h as f64);
        // one past the supports, so the endpoint (where the windows vanish) is covered too
        Self::build(m_hi + 1, (n_hi + 1).max(m_hi + 1 + h as usize))
    }

    pub fn with_gl2(&self, gl2: GL2CoefficientTable<f64>) -> Self {
        Tables { gl3: self.gl3.clone(), gl2: Arc::new(gl2) }
    }
}

/// Integers strictly inside the support `(X, 2X)` of `V(·/X)`.
fn m_range(x: f64) -> (usize, usize) {
    (x.floor() as usize + 1, ((2.0 * x).ceil() as usize).saturating_sub(1))
}

/// Integers strictly inside the support `(Y/2, 3Y)` of `W(·/Y)`.
fn n_range(y: f64) -> (usize, usize) {
    ((y / 2.0).floor() as usize + 1, ((3.0 * y).ceil() as usize).saturating_sub(1))
}

fn need(have: usize, need: usize) -> Result<()> {
    if have < need {
        return Err(Error::TableTooShort { have, need });
    }
    Ok(())
}

/// `Q1 Q2` must be within this factor of `Y^{1/2 + deltaExp}`.
const ANCHOR_SLACK: f64 = 4.0;

/// Parameters of one shifted convolution experiment.
///
/// `Y = X + h` and `δ = 1/Y` are derived, never stored.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    x: f64,
    h: u64,
    delta_exp: f64,
    big_q1: u64,
    big_q2: u64,
    seed: u64,
    moduli: ModuliSet,
    tables: Tables,
    langlands: LanglandsParams,
    contour: ContourSpec,
}

/// `Q2 ≈ X^{2/5}` and `Q1 = Y^{1/2+deltaExp}/Q2`, pushed apart until the
/// dyadic prime ranges are disjoint.
pub fn auto_anchors(x: f64, h: u64, delta_exp: f64) -> (u64, u64) {
    let target = (x + h as f64).powf(0.5 + delta_exp);
    let mut q2 = x.powf(0.4).round().max(2.0) as u64;
    let mut q1 = (target / q2 as f64).round().max(2.0) as u64;
    while !(2 * q1 < q2 || 2 * q2 < q1) {
        if q2 >= q1 {
            q2 += 1;
        } else {
            q1 += 1;
        }
    }
    (q1, q2)
}

impl ExperimentConfig {
    /// Anchors from [`auto_anchors`].
    pub fn new(x: f64, h: u64, delta_exp: f64, tables: Tables) -> Result<Self> {
        let (q1, q2) = auto_anchors(x, h, delta_exp);
        Self::with_anchors(x, h, delta_exp, q1, q2, tables)
    }

    pub fn with_anchors(x: f64, h: u64, delta_exp: f64, big_q1: u64, big_q2: u64, tables: Tables) -> Result<Self> {
        if !(x.is_finite() && x >= 2.0) {
            return Err(Error::InvalidParameter(format!("X = {x} must be finite and at least 2")));
        }
        if !(delta_exp.is_finite() && (0.0..0.5).contains(&delta_exp)) {
            return Err(Error::InvalidParameter(format!("deltaExp = {delta_exp} must lie in [0, 1/2)")));
        }
        let target = (x + h as f64).powf(0.5 + delta_exp);
        let prod = (big_q1 * big_q2) as f64;
        if prod > ANCHOR_SLACK * target || prod * ANCHOR_SLACK < target {
            return Err(Error::InvalidParameter(format!(
                "Q1*Q2 = {prod} is not within a factor {ANCHOR_SLACK} of Y^(1/2+deltaExp) = {target:.3}"
            )));
        }
        let moduli = build_moduli_set(big_q1, big_q2, h as i64)?;
        let langlands = LanglandsParams::real(0.1, -0.3)?;
        let cfg = ExperimentConfig {
            x,
            h,
            delta_exp,
            big_q1,
            big_q2,
            seed: 0,
            moduli,
            tables,
            langlands,
            contour: ContourSpec::new(-0.5),
        };
        cfg.approximant()?;
        Ok(cfg)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ExperimentConfig { seed, ..self }
    }

    /// Replaces the product set, e.g. by a small custom set.
    pub fn with_moduli(self, moduli: ModuliSet) -> Result<Self> {
        let cfg = ExperimentConfig { moduli, ..self };
        cfg.approximant()?;
        Ok(cfg)
    }

    pub fn with_tables(self, tables: Tables) -> Self {
        ExperimentConfig { tables, ..self }
    }

    /// Archimedean data and contour for the GL(3) kernel.
    pub fn with_langlands(self, langlands: LanglandsParams, contour: ContourSpec) -> Result<Self> {
        contour.check(&langlands)?;
        Ok(ExperimentConfig { langlands, contour, ..self })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn h(&self) -> u64 {
        self.h
    }

    pub fn y(&self) -> f64 {
        self.x + self.h as f64
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.y()
    }

    pub fn delta_exp(&self) -> f64 {
        self.delta_exp
    }

    pub fn anchors(&self) -> (u64, u64) {
        (self.big_q1, self.big_q2)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn moduli(&self) -> &ModuliSet {
        &self.moduli
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    pub fn langlands(&self) -> &LanglandsParams {
        &self.langlands
    }

    pub fn contour(&self) -> ContourSpec {
        self.contour
    }

    pub fn approximant(&self) -> Result<Approximant<f64>> {
        Approximant::new(self.moduli.clone(), self.delta())
    }

    /// Stable text form; equal configs give equal strings.
    pub fn canonical(&self) -> String {
        let members: Vec<String> = self.moduli.members().iter().map(|m| m.q.to_string()).collect();
        let alpha: Vec<String> = self
            .langlands
            .alpha()
            .iter()
            .map(|a| format!("{}{:+}i", fmt_f64(a.re), a.im))
            .collect();
        format!(
            "X={};h={};deltaExp={};Q1={};Q2={};seed={};moduli={};gl3_len={};gl2_len={};alpha={};sigma={}",
            fmt_f64(self.x),
            self.h,
            fmt_f64(self.delta_exp),
            self.big_q1,
            self.big_q2,
            self.seed,
            members.join(","),
            self.tables.gl3.len(),
            self.tables.gl2.len(),
            alpha.join(","),
            fmt_f64(self.contour.sigma),
        )
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}

/// `sum_m λ1(1,m) λ2(m+h) V(m/X)` over the support of `V`.
pub fn exact_dh(cfg: &ExperimentConfig) -> Result<f64> {
    let (lo, hi) = m_range(cfg.x);
    let h = cfg.h as usize;
    need(cfg.tables.gl3.len(), hi)?;
    need(cfg.tables.gl2.len(), hi + h)?;
    let (gl3, gl2) = (&cfg.tables.gl3, &cfg.tables.gl2);
    Ok(pairwise_sum((lo..=hi).map(|m| gl3.row(m) * gl2.lambda(m + h) * v_window(m as f64 / cfg.x))))
}

/// `F(x, y) = V(x/X) W(y/Y) sinc(2πδ(x - y))`.
pub fn kernel_f(x: f64, y: f64, cfg: &ExperimentConfig) -> f64 {
    v_window(x / cfg.x) * w_window(y / cfg.y()) * sinc(TAU * cfg.delta() * (x - y))
}

/// Which sinc argument the collapsed double sum uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DhKernel {
    /// `sinc(2πδ(m + h - n))`: the exact collapse of the `Ĩ`-weighted integral.
    #[default]
    Shifted,
    /// `sinc(2πδ(m - n))`: the kernel `F`, which leaves `e(βh)` out of the
    /// interval average.
    Unshifted,
}

/// `D̃_h(X)` with [`DhKernel::Shifted`].
pub fn approx_dh(cfg: &ExperimentConfig) -> Result<f64> {
    approx_dh_with(cfg, DhKernel::Shifted)
}

/// `(1/L) sum_{m,n} λ1(1,m) V(m/X) λ2(n) W(n/Y) C(m + h - n) sinc(2πδ(m - n + s h))`
/// with `C(k) = sum_{q in Q} c_q(k)` and `s = 1` for the shifted kernel.
pub fn approx_dh_with(cfg: &ExperimentConfig, kernel: DhKernel) -> Result<f64> {
    collapsed_sum(cfg.x, cfg.y(), cfg.delta(), cfg.h, &cfg.moduli, &cfg.tables, kernel)
}

pub(crate) fn collapsed_sum(
    x: f64,
    y: f64,
    delta: f64,
    h: u64,
    moduli: &ModuliSet,
    tables: &Tables,
    kernel: DhKernel,
) -> Result<f64> {
    let (m_lo, m_hi) = m_range(x);
    let (n_lo, n_hi) = n_range(y);
    need(tables.gl3.len(), m_hi)?;
    need(tables.gl2.len(), n_hi)?;
    let a: Vec<f64> = (m_lo..=m_hi).map(|m| tables.gl3.row(m) * v_window(m as f64 / x)).collect();
    let b: Vec<f64> = (n_lo..=n_hi).map(|n| tables.gl2.lambda(n) * w_window(n as f64 / y)).collect();
    // kern[i] is the weight for m - n = j_lo + i
    let j_lo = m_lo as i64 - n_hi as i64;
    let j_hi = m_hi as i64 - n_lo as i64;
    let rs: Vec<RamanujanSum> = moduli.members().iter().map(|m| RamanujanSum::new(m.q)).collect();
    let shift = match kernel {
        DhKernel::Shifted => h as f64,
        DhKernel::Unshifted => 0.0,
    };
    let kern: Vec<f64> = (j_lo..=j_hi)
        .into_par_iter()
        .map(|j| {
            let c: i64 = rs.iter().map(|r| r.eval(j + h as i64)).sum();
            c as f64 * sinc(TAU * delta * (j as f64 + shift))
        })
        .collect();
    let rows: Vec<f64> = a
        .par_iter()
        .enumerate()
        .map(|(i, &am)| {
            if am == 0.0 {
                return 0.0;
            }
            // m - n - j_lo = i + (m_lo - n_lo) - k - j_lo for n = n_lo + k
            let base = i + (n_hi - n_lo);
            let mut s = 0.0;
            for (k, &bn) in b.iter().enumerate() {
                s += bn * kern[base - k];
            }
            am * s
        })
        .collect();
    Ok(pairwise_sum(rows) / moduli.l())
}

/// `|sum_n λ2(n) e(-k n / grid) W(n/Y)| / sqrt(Y)` for `k = 0..grid`.
pub fn gl2_expsum_profile(cfg: &ExperimentConfig, grid: usize) -> Result<Vec<f64>> {
    if grid == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let y = cfg.y();
    let (lo, hi) = n_range(y);
    need(cfg.tables.gl2.len(), hi)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    // e(-xn) is periodic in n with period `grid` when x = k/grid
    for n in lo..=hi {
        buf[n % grid] += cfg.tables.gl2.lambda(n) * w_window(n as f64 / y);
    }
    FftPlanner::new().plan_fft_forward(grid).process(&mut buf);
    let norm = y.sqrt();
    Ok(buf.iter().map(|v| v.norm() / norm).collect())
}

/// Maximum of [`gl2_expsum_profile`].
pub fn gl2_expsum_sup(cfg: &ExperimentConfig, grid: usize) -> Result<f64> {
    Ok(gl2_expsum_profile(cfg, grid)?.into_iter().fold(0.0, f64::max))
}

/// Least-squares slope of `ln v` against `ln x`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, v)| (x.ln(), v.max(f64::MIN_POSITIVE).ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `|D_h(X) - D̃_h(X)|` for every config, normalized by
/// `X^{1-deltaExp} log X`. Configs are grouped by `(h, deltaExp)`; each group
/// needs at least three `X` in geometric progression and gets a fitted slope
/// stored as the extra `slope_h<h>`.
pub fn error_scaling(cfgs: &[ExperimentConfig]) -> Result<ExperimentReport> {
    let mut groups: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for c in cfgs {
        groups.entry((c.h, c.delta_exp.to_bits())).or_default().push(c.x);
    }
    for xs in groups.values_mut() {
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() < 3 {
            return Err(Error::InsufficientPoints { need: 3, have: xs.len() });
        }
        let r = xs[1] / xs[0];
        if xs.windows(2).any(|w| ((w[1] / w[0]) / r - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidParameter(format!("X values {xs:?} are not in geometric progression")));
        }
    }
    let mut recs = Vec::with_capacity(cfgs.len());
    let mut per_group: BTreeMap<(u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for c in cfgs {
        let d = exact_dh(c)?;
        let dt = approx_dh(c)?;
        let err = (d - dt).abs();
        let norm = c.x.powf(1.0 - c.delta_exp) * c.x.ln();
        per_group.entry((c.h, c.delta_exp.to_bits())).or_default().push((c.x, err));
        recs.push(Record::new(
            vec![
                ("X", c.x),
                ("h", c.h as f64),
                ("deltaExp", c.delta_exp),
                ("Q1", c.big_q1 as f64),
                ("Q2", c.big_q2 as f64),
                ("L", c.moduli.l()),
                ("exact", d),
                ("approx", dt),
            ],
            err,
            norm,
        ));
    }
    let canon: Vec<String> = cfgs.iter().map(|c| c.canonical()).collect();
    let mut report = ExperimentReport::new("dh-scaling", recs).with_provenance(config_hash(&canon.join("\n")));
    for ((h, _), pts) in &per_group {
        report = report.with_extra(format!("slope_h{h}"), fit_log_slope(pts));
    }
    Ok(report)
}

/// One `(q, a)` term of `D̃_{h,α}`: the `n`-sum
/// `sum_n λ2(n) e_q(-an) W(n/Y) e(-αn)` against its GL(2) Voronoi dual.
/// Returns the normalized difference.
pub fn voronoi_invariance(cfg: &ExperimentConfig, q: u64, a: i64, alpha: f64) -> Result<f64> {
    if q == 0 || gcd_signed(a, q) != 1 {
        return Err(Error::NonInvertible { a, q });
    }
    let h = WeightFunctionSpec::w(cfg.y(), -alpha);
    let dual = Gl2Dual::new(q, &h, cfg.tables.gl2.weight(), GL2_DUAL_CUTOFF)?;
    let (l, r) = dual.sides(-a, &cfg.tables.gl2)?;
    Ok(normalized_difference(l, r))
}

/// Which GL(3) kernel the dyadic piece is weighted by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GSign {
    #[default]
    Plus,
    Minus,
}

/// Inputs of [`dyadic_sharp_eval`] beyond the config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpSpec {
    /// `m` runs over `[M, 2M)`.
    pub m_anchor: u64,
    pub n_cap: u64,
    pub q2: PrimeModulus,
    pub alpha: f64,
    pub sign: GSign,
}

impl SharpSpec {
    pub fn new(m_anchor: u64, n_cap: u64, q2: PrimeModulus, alpha: f64) -> Self {
        SharpSpec { m_anchor, n_cap, q2, alpha, sign: GSign::Plus }
    }
}

/// How many Poisson-side `T` terms the vanishing laws allow, and how many are
/// numerically non-zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TermCount {
    pub total: u64,
    pub allowed: u64,
    pub nonzero: u64,
    /// Non-zero terms the laws say must vanish.
    pub violations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpEval {
    pub value: Complex64,
    pub majorant: f64,
    /// `X log X (X^{deltaExp}/Q2^{1/4} + X^{2 deltaExp}/Q1)`.
    pub bound_shape: f64,
    pub diagonal: TermCount,
    pub off_diagonal: TermCount,
}

impl SharpEval {
    pub fn value_ratio(&self) -> f64 {
        self.value.norm() / self.bound_shape
    }

    pub fn majorant_ratio(&self) -> f64 {
        self.majorant / self.bound_shape
    }
}

/// Checks the `M` window and the table and prime constraints.
fn sharp_validate(cfg: &ExperimentConfig, spec: &SharpSpec) -> Result<()> {
    let (big_q1, big_q2) = cfg.anchors();
    if cfg.moduli.anchors() != Some((big_q1, big_q2)) {
        return Err(Error::InvalidParameter("the dyadic piece needs the product moduli set".into()));
    }
    let lo = cfg.x.powf(0.5 - 3.0 * cfg.delta_exp);
    let hi = cfg.x.powf(0.5 + 3.0 * cfg.delta_exp) * M_SLACK;
    let big_m = spec.m_anchor;
    if !(big_m as f64 >= lo && big_m as f64 <= hi) {
        return Err(Error::InvalidParameter(format!("M = {big_m} outside [{lo:.2}, {hi:.2}]")));
    }
    need(cfg.tables.gl3.len(), 2 * big_m as usize - 1)?;
    need(cfg.tables.gl2.len(), spec.n_cap as usize)?;
    let q2 = spec.q2.get();
    if cfg.moduli.q1_primes().contains(&q2) || (cfg.h != 0 && cfg.h % q2 == 0) {
        return Err(Error::InvalidParameter(format!("q2 = {q2} must avoid the Q1 primes and not divide h")));
    }
    Ok(())
}

/// The dyadic piece for a single `q2`:
/// `(1/L) sum_{q1} sum_{m ~ M} λ1(m,1)/m sum_{n <= n_cap} λ2(n) S(1, m, -n, h; q1 q2) G±(m/q^3) H(n/q^2)`
/// with `g(x) = V(x/X) e(αx)` and `h(y) = W(y/Y) e(-αy)`, plus the majorant
/// left after Cauchy and Poisson:
/// `sqrt(Q2) X^{deltaExp} / (L sqrt(M)) * (sum_n M^2 X^3/(Q1 Q^4) sum_{q1, q~1} sum_{|m| <= Q1 Q/M} |T(-n, m, h; q1, q~1, q2)|)^{1/2}`.
pub fn dyadic_sharp_eval(cfg: &ExperimentConfig, spec: &SharpSpec) -> Result<SharpEval> {
    sharp_validate(cfg, spec)?;
    let value = sharp_direct(cfg, spec)?;
    let mut out = sharp_majorant(cfg, spec)?;
    out.value = value;
    Ok(out)
}

fn sharp_direct(cfg: &ExperimentConfig, spec: &SharpSpec) -> Result<Complex64> {
    let q2 = spec.q2.get();
    let q1s = cfg.moduli.q1_primes().to_vec();
    let h = cfg.h as i64;
    let big_m = spec.m_anchor;
    let g = WeightFunctionSpec::v(cfg.x, spec.alpha);
    let w = WeightFunctionSpec::w(cfg.y(), -spec.alpha);
    let kernel = MellinBarnesKernel::new(&g, &cfg.langlands, cfg.contour)?;
    let (gl3, gl2) = (&cfg.tables.gl3, &cfg.tables.gl2);
    let g_vals: BTreeMap<u64, Vec<Complex64>> = q1s
        .iter()
        .map(|&q1| {
            let q3 = ((q1 * q2) as f64).powi(3);
            let vals = (big_m..2 * big_m)
                .map(|m| match spec.sign {
                    GSign::Plus => kernel.g_plus(m as f64 / q3),
                    GSign::Minus => kernel.g_minus(m as f64 / q3),
                })
                .collect();
            (q1, vals)
        })
        .collect();
    let jobs: Vec<(u64, u64)> = q1s.iter().flat_map(|&q1| (1..=spec.n_cap).map(move |n| (q1, n))).collect();
    let pieces = jobs
        .par_iter()
        .map(|&(q1, n)| -> Result<Complex64> {
            let q = q1 * q2;
            let hv = h_transform_holomorphic(n as f64 / (q * q) as f64, gl2.weight(), &w)?;
            let row = s_row_unit_m1::<f64>(-(n as i64), h, q);
            let gv = &g_vals[&q1];
            let mut terms = Vec::with_capacity(gv.len());
            for (i, m) in (big_m..2 * big_m).enumerate() {
                let lam = gl3.get(m, 1)?;
                terms.push(row[(m % q) as usize] * gv[i] * (lam / m as f64));
            }
            Ok(pairwise_sum(terms) * hv * gl2.lambda(n as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(pieces) / cfg.moduli.l())
}

/// `sum_{n <= n_cap} M^2 X^3/(Q1 Q^4) sum_{q1, q~1} sum_{|m| <= Q1 Q/M} |T(-n, m, h; q1, q~1, q2)|`
/// with the `T` term counts, split by diagonal and off-diagonal pairs.
fn poisson_side(cfg: &ExperimentConfig, m_anchor: u64, n_cap: u64, q2: u64) -> Result<(f64, TermCount, TermCount)> {
    let (big_q1, big_q2) = cfg.anchors();
    let q1s = cfg.moduli.q1_primes().to_vec();
    let h = cfg.h as i64;
    let big_q = (big_q1 * big_q2) as f64;
    let mf = m_anchor as f64;
    let m_cut = (big_q1 as f64 * big_q / mf).ceil() as i64;
    let mut jobs = Vec::new();
    for n in 1..=n_cap {
        for &a in &q1s {
            jobs.extend(q1s.iter().map(|&b| (n, a, b)));
        }
    }
    let row_keys: Vec<(u64, u64)> = (1..=n_cap).flat_map(|n| q1s.iter().map(move |&q1| (n, q1))).collect();
    let rows: BTreeMap<(u64, u64), Vec<Complex64>> = row_keys
        .par_iter()
        .map(|&(n, q1)| ((n, q1), s_row_unit_m1::<f64>(-(n as i64), h, q1 * q2)))
        .collect();
    let sums = jobs
        .par_iter()
        .map(|&(n, q1, q1t)| -> Result<(f64, TermCount, bool)> {
            let p = TCharParams::from_u64(-(n as i64), 0, h, q1, q1t, q2)?;
            let ev = TEvaluator::<f64>::from_rows(&p, &rows[&(n, q1)], &rows[&(n, q1t)]);
            let tol = 1e-6 * p.outer_modulus() as f64;
            let diag = q1 == q1t;
            let mut count = TermCount::default();
            let mut abs = Vec::with_capacity(2 * m_cut as usize + 1);
            for m in -m_cut..=m_cut {
                let v = ev.eval(m).norm();
                let allowed = if diag {
                    m % q1 as i64 == 0
                } else {
                    gcd(m.unsigned_abs(), q1 * q1t) == 1
                };
                count.total += 1;
                count.allowed += allowed as u64;
                if v > tol {
                    count.nonzero += 1;
                    count.violations += !allowed as u64;
                }
                abs.push(v);
            }
            Ok((pairwise_sum(abs), count, diag))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut diagonal = TermCount::default();
    let mut off_diagonal = TermCount::default();
    for (_, c, diag) in &sums {
        let t = if *diag { &mut diagonal } else { &mut off_diagonal };
        t.total += c.total;
        t.allowed += c.allowed;
        t.nonzero += c.nonzero;
        t.violations += c.violations;
    }
    let t_total = pairwise_sum(sums.iter().map(|s| s.0));
    let scale = mf * mf * cfg.x.powi(3) / (big_q1 as f64 * big_q.powi(4));
    Ok((scale * t_total, diagonal, off_diagonal))
}

/// `sqrt(Q2) X^{deltaExp} / (L sqrt(M)) * sqrt(poisson)`.
fn cauchy_majorant(cfg: &ExperimentConfig, m_anchor: u64, poisson: f64) -> f64 {
    let (_, big_q2) = cfg.anchors();
    (big_q2 as f64).sqrt() * cfg.x.powf(cfg.delta_exp) / (cfg.moduli.l() * (m_anchor as f64).sqrt()) * poisson.sqrt()
}

/// `X log X (X^{deltaExp}/Q2^{1/4} + X^{2 deltaExp}/Q1)`.
pub fn sharp_bound_shape(cfg: &ExperimentConfig) -> f64 {
    let (big_q1, big_q2) = cfg.anchors();
    let (x, d) = (cfg.x, cfg.delta_exp);
    x * x.ln() * (x.powf(d) / (big_q2 as f64).powf(0.25) + x.powf(2.0 * d) / big_q1 as f64)
}

/// Majorant, bound shape and `T` term counts; `value` is left at zero.
fn sharp_majorant(cfg: &ExperimentConfig, spec: &SharpSpec) -> Result<SharpEval> {
    let (poisson, diagonal, off_diagonal) = poisson_side(cfg, spec.m_anchor, spec.n_cap, spec.q2.get())?;
    Ok(SharpEval {
        value: Complex64::new(0.0, 0.0),
        majorant: cauchy_majorant(cfg, spec.m_anchor, poisson),
        bound_shape: sharp_bound_shape(cfg),
        diagonal,
        off_diagonal,
    })
}

/// The Cauchy-Poisson majorant summed over every `q2` in the `Q2` range,
/// for several splits `Q1 Q2 ≈ Y^{1/2+deltaExp}`, at the top of the `M`
/// window, `M = X^{1/2 + 3 deltaExp}`. Extras: `argmin_Q1` is the best
/// split and `predicted_Q1` is `X^{1/10 + deltaExp}`.
pub fn optimal_split_census(
    x: f64,
    h: u64,
    delta_exp: f64,
    q1_anchors: &[u64],
    n_cap: u64,
    tables: &Tables,
) -> Result<ExperimentReport> {
    let target = (x + h as f64).powf(0.5 + delta_exp);
    let big_m = x.powf(0.5 + 3.0 * delta_exp).floor() as u64;
    let mut recs = Vec::with_capacity(q1_anchors.len());
    let mut best = (f64::INFINITY, 0u64);
    for &q1 in q1_anchors {
        let q2 = (target / q1 as f64).round().max(2.0) as u64;
        let cfg = ExperimentConfig::with_anchors(x, h, delta_exp, q1, q2, tables.clone())?;
        let mut poisson = 0.0;
        let mut diag = 0;
        let mut off = 0;
        for &p2 in cfg.moduli.q2_primes() {
            let spec = SharpSpec::new(big_m, n_cap, PrimeModulus::new(p2)?, 0.0);
            sharp_validate(&cfg, &spec)?;
            let (p, d, o) = poisson_side(&cfg, big_m, n_cap, p2)?;
            poisson += p;
            diag += d.nonzero;
            off += o.nonzero;
        }
        let majorant = cauchy_majorant(&cfg, big_m, poisson);
        if majorant < best.0 {
            best = (majorant, q1);
        }
        recs.push(Record::new(
            vec![
                ("Q1", q1 as f64),
                ("Q2", q2 as f64),
                ("M", big_m as f64),
                ("diag_nonzero", diag as f64),
                ("offdiag_nonzero", off as f64),
            ],
            majorant,
            sharp_bound_shape(&cfg),
        ));
    }
    Ok(ExperimentReport::new("optimal-split", recs)
        .with_extra("argmin_Q1", best.1 as f64)
        .with_extra("predicted_Q1", x.powf(0.1 + delta_exp)))
}
