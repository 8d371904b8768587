//! Mellin transforms of the weights and the GL(3) Voronoi kernel `G_ℓ`.
//!
//! `G_ℓ(y) = (1/2πi) ∫_{(σ)} (π^3 y)^{-s} R_ℓ(s) g̃(-s) ds` with
//! `R_ℓ(s) = prod_i Γ((1+s+α_i+ℓ)/2) / Γ((-s-α_i+ℓ)/2)`.
//!
//! `g̃(-σ-it)` is needed on a long uniform `t` grid, so it is taken from one
//! FFT of the log-variable integrand; the trapezoid rule in `t` then gives
//! `G_ℓ` at any `y`. [`mellin`] is the independent pointwise route.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::gamma::ln_gamma;
use super::quadrature::integrate;
use super::windows::WeightFunctionSpec;
use crate::error::{Error, Result};

/// `g̃(s) = ∫ g(x) x^{s-1} dx` by adaptive Gauss–Kronrod.
pub fn mellin(g: &WeightFunctionSpec, s: Complex64) -> Result<Complex64> {
    let (a, b) = g.unit_support();
    let cycles = (g.alpha * g.scale).abs() * (b - a) + s.im.abs() * (b / a).ln() / TAU;
    let panels = 4 + (2.0 * cycles).ceil() as usize;
    let omega = TAU * g.alpha * g.scale;
    let sm1 = s - 1.0;
    let f = |t: f64| {
        let w = g.window(t);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(g.amplitude * w, omega * t) * (sm1 * t.ln()).exp()
    };
    let inner = integrate(f, a, b, panels, 1e-13, 0.0)?;
    Ok(inner * (s * g.scale.ln()).exp())
}

/// Archimedean parameters `(α1, α2, α3)` with `α1 + α2 + α3 = 0` and
/// `|Re α_i| < 1/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanglandsParams {
    alpha: [Complex64; 3],
}

impl LanglandsParams {
    pub fn new(alpha: [Complex64; 3]) -> Result<Self> {
        let sum: Complex64 = alpha.iter().sum();
        if sum.norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!("Langlands parameters sum to {sum}, not 0")));
        }
        if let Some(a) = alpha.iter().find(|a| a.re.abs() >= 0.5) {
            return Err(Error::InvalidParameter(format!("|Re α| = {} is not below 1/2", a.re.abs())));
        }
        Ok(LanglandsParams { alpha })
    }

    pub fn real(a1: f64, a2: f64) -> Result<Self> {
        Self::new([Complex64::new(a1, 0.0), Complex64::new(a2, 0.0), Complex64::new(-a1 - a2, 0.0)])
    }

    /// From `(ν1, ν2)`: `α1 = -ν1 - 2ν2 + 1`, `α2 = -ν1 + ν2`, `α3 = 2ν1 + ν2 - 1`.
    pub fn from_nu(nu1: Complex64, nu2: Complex64) -> Result<Self> {
        Self::new([-nu1 - 2.0 * nu2 + 1.0, -nu1 + nu2, 2.0 * nu1 + nu2 - 1.0])
    }

    pub fn alpha(&self) -> [Complex64; 3] {
        self.alpha
    }

    pub fn permuted(&self, p: [usize; 3]) -> Self {
        LanglandsParams { alpha: [self.alpha[p[0]], self.alpha[p[1]], self.alpha[p[2]]] }
    }

    /// Contours with `σ` above this are admissible.
    pub fn min_sigma(&self) -> f64 {
        -1.0 + self.alpha.iter().map(|a| -a.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `R_ℓ(s)` via log-gamma.
    pub fn gamma_ratio(&self, s: Complex64, ell: u8) -> Result<Complex64> {
        let l = ell as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.alpha {
            acc += ln_gamma((1.0 + s + a + l) * 0.5) - ln_gamma((-s - a + l) * 0.5);
        }
        if !acc.re.is_finite() && acc.re != f64::NEG_INFINITY || acc.re > 700.0 {
            return Err(Error::GammaOverflow(format!("s = {s}, ell = {ell}")));
        }
        Ok(acc.exp())
    }
}

/// Integration line `Re s = σ`, truncation height, and `t` step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub sigma: f64,
    /// `None` chooses the height adaptively.
    pub height: Option<f64>,
    pub step: f64,
    /// Share of integrand mass allowed beyond the adaptive height.
    pub tail: f64,
}

impl ContourSpec {
    pub fn new(sigma: f64) -> Self {
        ContourSpec { sigma, height: None, step: 0.02, tail: DEFAULT_TAIL }
    }

    pub fn with_height(self, t: f64) -> Self {
        ContourSpec { height: Some(t), ..self }
    }

    /// Looser tails are needed for `σ` near 0, where `|R_ℓ|` grows like
    /// `|t|^{3σ + 3/2}` and lifts the FFT noise in `g̃` above `1e-12`.
    pub fn with_tail(self, tail: f64) -> Self {
        ContourSpec { tail, ..self }
    }

    pub fn check(&self, p: &LanglandsParams) -> Result<()> {
        let lo = p.min_sigma();
        if !(self.sigma > lo) {
            return Err(Error::InvalidParameter(format!(
                "contour sigma = {} is not above {lo}",
                self.sigma
            )));
        }
        if !(self.step > 0.0) || self.height.is_some_and(|t| !(t > 0.0)) || !(self.tail > 0.0 && self.tail < 1.0) {
            return Err(Error::InvalidParameter("contour step, height and tail must be positive".into()));
        }
        Ok(())
    }
}

/// Default tail fraction of integrand mass beyond the chosen height.
pub const DEFAULT_TAIL: f64 = 1e-12;

/// Precomputed samples of `π^{-3s} R_ℓ(s) g̃(-s)` along the contour.
#[derive(Clone, Debug)]
pub struct MellinBarnesKernel {
    sigma: f64,
    step: f64,
    height: f64,
    /// index 0 is `t = -J h`
    base: [Vec<Complex64>; 2],
    g_tilde: Vec<Complex64>,
    tail_mass: [f64; 2],
}

impl MellinBarnesKernel {
    pub fn new(g: &WeightFunctionSpec, params: &LanglandsParams, contour: ContourSpec) -> Result<Self> {
        contour.check(params)?;
        let (a, b) = g.unit_support();
        let omega = TAU * (g.alpha * g.scale).abs() * b;
        let mut search = contour.height.map_or(2000.0, |t| 2.0 * t).max(omega + 500.0);
        loop {
            let k = Self::build(g, params, contour, (a, b), omega, search)?;
            let fixed = contour.height.is_some();
            if let Some(k) = k.truncated(contour.height, fixed, contour.tail) {
                return Ok(k);
            }
            if search > 64_000.0 {
                return Err(Error::QuadratureFailure(format!(
                    "Mellin-Barnes integrand not below {:e} tail mass by |t| = {search}",
                    contour.tail
                )));
            }
            search *= 2.0;
        }
    }

    fn build(
        g: &WeightFunctionSpec,
        params: &LanglandsParams,
        contour: ContourSpec,
        (a, b): (f64, f64),
        omega: f64,
        search: f64,
    ) -> Result<Self> {
        let sigma = contour.sigma;
        let (v0, v1) = (a.ln(), b.ln());
        let nyquist_need = 2.0 * (search + omega);
        let dv = (std::f64::consts::LN_2 / 2048.0).min(PI / nyquist_need);
        let nv = ((v1 - v0) / dv).ceil() as usize;
        let dv = (v1 - v0) / nv as f64;
        let n = ((TAU / (contour.step * dv)).ceil() as usize).next_power_of_two();
        let h = TAU / (n as f64 * dv);
        let phase = TAU * g.alpha * g.scale;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, slot) in buf.iter_mut().enumerate().take(nv + 1) {
            let v = v0 + k as f64 * dv;
            let t = v.exp();
            let w = g.window(t);
            if w != 0.0 {
                *slot = Complex64::from_polar(g.amplitude * w * (-sigma * v).exp() * dv, phase * t);
            }
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let jmax = ((search / h) as usize).min(n / 2 - 1);
        let lnx = g.scale.ln();
        let ln_pi3 = 3.0 * PI.ln();
        let mut g_tilde = Vec::with_capacity(2 * jmax + 1);
        let mut base = [Vec::with_capacity(2 * jmax + 1), Vec::with_capacity(2 * jmax + 1)];
        for jj in 0..=2 * jmax {
            let j = jj as i64 - jmax as i64;
            let t = j as f64 * h;
            let f = buf[j.rem_euclid(n as i64) as usize];
            let s = Complex64::new(sigma, t);
            // g̃(-s) = X^{-s} e^{-i t v0} F(t)
            let gt = (-s * lnx).exp() * Complex64::from_polar(1.0, -t * v0) * f;
            g_tilde.push(gt);
            let pre = (-s * ln_pi3).exp() * gt;
            for ell in 0..2u8 {
                base[ell as usize].push(pre * params.gamma_ratio(s, ell)?);
            }
        }
        Ok(MellinBarnesKernel {
            sigma,
            step: h,
            height: jmax as f64 * h,
            base,
            g_tilde,
            tail_mass: [0.0; 2],
        })
    }

    /// Cuts the sample set at the requested or adaptive height. `None` if the
    /// mass near the edge of the computed range is not yet negligible.
    fn truncated(mut self, height: Option<f64>, fixed: bool, tail_share: f64) -> Option<Self> {
        let jmax = (self.base[0].len() - 1) / 2;
        let mags: Vec<f64> = (0..=jmax)
            .map(|j| {
                let (lo, hi) = (jmax - j, jmax + j);
                let m = |v: &Vec<Complex64>| if j == 0 { v[lo].norm() } else { v[lo].norm() + v[hi].norm() };
                m(&self.base[0]) + m(&self.base[1])
            })
            .collect();
        let total: f64 = mags.iter().sum();
        // suffix sums of mass beyond index j
        let mut beyond = vec![0.0; jmax + 2];
        for j in (0..=jmax).rev() {
            beyond[j] = beyond[j + 1] + mags[j];
        }
        let cut = match height {
            Some(t) => ((t / self.step).round() as usize).min(jmax),
            None => (0..=jmax).find(|&j| beyond[j + 1] <= tail_share * total)?,
        };
        // the outer quarter of the searched range must itself be negligible
        if !fixed && beyond[(3 * jmax) / 4] > tail_share * total {
            return None;
        }
        for ell in 0..2 {
            let v = &self.base[ell];
            let tail: f64 = v[..jmax - cut].iter().chain(&v[jmax + cut + 1..]).map(|z| z.norm()).sum();
            self.tail_mass[ell] = tail;
            self.base[ell] = v[jmax - cut..=jmax + cut].to_vec();
        }
        self.g_tilde = self.g_tilde[jmax - cut..=jmax + cut].to_vec();
        self.height = cut as f64 * self.step;
        Some(self)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `(t, g̃(-σ-it))` samples along the contour.
    pub fn g_tilde_samples(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        let j0 = (self.g_tilde.len() - 1) / 2;
        self.g_tilde
            .iter()
            .enumerate()
            .map(move |(i, &v)| ((i as f64 - j0 as f64) * self.step, v))
    }

    /// `G_ℓ(y)` by the trapezoid rule along the truncated contour.
    pub fn g_ell(&self, y: f64, ell: u8) -> Complex64 {
        assert!(y > 0.0);
        let v = &self.base[ell as usize];
        let j0 = (v.len() - 1) / 2;
        let ly = y.ln();
        let w = Complex64::from_polar(1.0, -self.step * ly);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut rot = Complex64::from_polar(1.0, self.step * ly * j0 as f64);
        for (i, &b) in v.iter().enumerate() {
            if i % 256 == 0 {
                let t = (i as f64 - j0 as f64) * self.step;
                rot = Complex64::from_polar(1.0, -t * ly);
            }
            acc += b * rot;
            rot *= w;
        }
        acc * (y.powf(-self.sigma) * self.step / TAU)
    }

    pub fn g_plus(&self, y: f64) -> Complex64 {
        let c = 1.0 / (2.0 * PI.powf(1.5));
        (self.g_ell(y, 0) - Complex64::i() * self.g_ell(y, 1)) * c
    }

    pub fn g_minus(&self, y: f64) -> Complex64 {
        let c = 1.0 / (2.0 * PI.powf(1.5));
        (self.g_ell(y, 0) + Complex64::i() * self.g_ell(y, 1)) * c
    }

    /// Bound on the discarded part of the `t`-integral for `G_ℓ(y)`, from the
    /// sampled integrand beyond the truncation height.
    pub fn truncation_remainder(&self, y: f64, ell: u8) -> f64 {
        y.powf(-self.sigma) * self.step / TAU * self.tail_mass[ell as usize]
    }
}

/// `G_ℓ(y)` for one `y` (builds a kernel; reuse [`MellinBarnesKernel`] for
/// many `y`).
pub fn g_transform(
    y: f64,
    ell: u8,
    params: &LanglandsParams,
    contour: ContourSpec,
    g: &WeightFunctionSpec,
) -> Result<Complex64> {
    Ok(MellinBarnesKernel::new(g, params, contour)?.g_ell(y, ell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::windows::v_window;

    fn params() -> LanglandsParams {
        LanglandsParams::real(0.1, -0.3).unwrap()
    }

    #[test]
    fn mellin_area_and_scaling() {
        let g1 = WeightFunctionSpec::v(1.0, 0.0);
        let area = mellin(&g1, Complex64::new(1.0, 0.0)).unwrap();
        // direct midpoint sum of the bump
        let n = 200_000;
        let direct: f64 = (0..n).map(|i| v_window(1.0 + (i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        assert!((area.re - direct).abs() < 1e-10);
        let x = 37.0;
        let gx = WeightFunctionSpec::v(x, 0.0);
        for s in [Complex64::new(1.0, 0.0), Complex64::new(0.3, 7.0), Complex64::new(-1.2, -30.0)] {
            let lhs = mellin(&gx, s).unwrap();
            let rhs = (s * x.ln()).exp() * mellin(&g1, s).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn mellin_modulated_decay() {
        let g = WeightFunctionSpec::v(50.0, 0.05);
        let m: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&t| mellin(&g, Complex64::new(0.5, t)).unwrap().norm())
            .collect();
        assert!(m[1] < m[0] && m[2] < m[1]);
    }

    #[test]
    fn params_invariants() {
        assert!(LanglandsParams::real(0.6, -0.3).is_err());
        let c = Complex64::new;
        assert!(LanglandsParams::new([c(0.1, 0.0), c(0.1, 0.0), c(0.1, 0.0)]).is_err());
        let p = LanglandsParams::from_nu(c(1.0 / 3.0, 1.0), c(1.0 / 3.0, -0.5)).unwrap();
        let s: Complex64 = p.alpha().iter().sum();
        assert!(s.norm() < 1e-14);
        let bad = ContourSpec::new(p.min_sigma() - 0.1);
        assert!(bad.check(&p).is_err());
    }

    #[test]
    fn fft_samples_match_pointwise_mellin() {
        let g = WeightFunctionSpec::v(20.0, 0.0);
        let k = MellinBarnesKernel::new(&g, &params(), ContourSpec::new(-0.5)).unwrap();
        let mut checked = 0;
        for (t, v) in k.g_tilde_samples().step_by(997) {
            let s = Complex64::new(-0.5, t);
            let want = mellin(&g, -s).unwrap();
            assert!((v - want).norm() <= 1e-8 * want.norm().max(1e-300) + 1e-13, "t = {t}");
            checked += 1;
        }
        assert!(checked > 3);
    }

    #[test]
    fn contour_shift_invariance() {
        let g = WeightFunctionSpec::v(100.0, 0.0);
        let ys = [1e-3, 1e-2, 0.05];
        let mut vals = Vec::new();
        for sigma in [-0.5, -0.25, 0.0] {
            let k = MellinBarnesKernel::new(&g, &params(), ContourSpec::new(sigma).with_tail(1e-9)).unwrap();
            vals.push(ys.map(|y| (k.g_ell(y, 0), k.g_ell(y, 1))));
        }
        for j in 0..ys.len() {
            for v in &vals[1..] {
                let (a, b) = (vals[0][j], v[j]);
                assert!((a.0 - b.0).norm() <= 1e-6 * a.0.norm(), "{:?} {:?}", a.0, b.0);
                assert!((a.1 - b.1).norm() <= 1e-6 * a.1.norm());
            }
        }
    }

    #[test]
    fn plus_minus_conjugate_for_real_data() {
        let g = WeightFunctionSpec::v(100.0, 0.0);
        let k = MellinBarnesKernel::new(&g, &params(), ContourSpec::new(-0.5)).unwrap();
        for y in [2e-3, 2e-2] {
            let (p, m) = (k.g_plus(y), k.g_minus(y));
            assert!((p - m.conj()).norm() <= 1e-9 * p.norm());
        }
    }

    #[test]
    fn permutation_symmetry() {
        let g = WeightFunctionSpec::v(100.0, 0.0);
        let a = MellinBarnesKernel::new(&g, &params(), ContourSpec::new(-0.5)).unwrap();
        let b = MellinBarnesKernel::new(&g, &params().permuted([2, 0, 1]), ContourSpec::new(-0.5)).unwrap();
        let (x, y) = (a.g_plus(0.01), b.g_plus(0.01));
        assert!((x - y).norm() <= 1e-12 * x.norm());
    }
}
