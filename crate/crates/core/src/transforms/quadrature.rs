//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        k += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            g += (f1 + f2) * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm(), abs * h.abs())
}

/// `∫_a^b f` to `max(abs_tol, rel_tol * ∫|f|)`, starting from `panels` equal
/// pieces and bisecting the worst piece until the summed error estimate
/// meets the tolerance.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Complex64> {
    const MAX_PIECES: usize = 20_000;
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let mut heap = BinaryHeap::new();
    let (mut err, mut mag) = (0.0f64, 0.0f64);
    for i in 0..panels {
        let lo = a + i as f64 * w;
        let hi = if i + 1 == panels { b } else { lo + w };
        let p = Piece::new(&f, lo, hi);
        err += p.err;
        mag += p.mag;
        heap.push(p);
    }
    loop {
        if err <= abs_tol.max(rel_tol * mag) {
            // sum in interval order so the result does not depend on heap layout
            let mut v = heap.into_vec();
            v.sort_by(|x, y| x.lo.total_cmp(&y.lo));
            return Ok(v.iter().map(|p| p.value).sum());
        }
        if heap.len() >= MAX_PIECES || !err.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:e} above tolerance after {} subintervals on [{a}, {b}]",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (l, r) = (Piece::new(&f, worst.lo, mid), Piece::new(&f, mid, worst.hi));
        err += l.err + r.err - worst.err;
        mag += l.mag + r.mag - worst.mag;
        heap.push(l);
        heap.push(r);
    }
}

struct Piece {
    lo: f64,
    hi: f64,
    value: Complex64,
    err: f64,
    mag: f64,
}

impl Piece {
    fn new<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> Self {
        let (value, err, mag) = gk15(f, lo, hi);
        Piece { lo, hi, value, err, mag }
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then(other.lo.total_cmp(&self.lo))
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    integrate(|x| Complex64::new(f(x), 0.0), a, b, panels, rel_tol, abs_tol).map(|v| v.re)
}
