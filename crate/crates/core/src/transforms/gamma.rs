//! Complex log-gamma.

use num_complex::Complex64;
use std::f64::consts::PI;

const G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` on some branch; only `exp` of sums of these is meaningful.
/// Poles give a real part of `+inf`.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let lp = Complex64::new(PI.ln(), 0.0);
        return lp - ln_sin_pi(z) - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `ln sin(πz)` without overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 1.0 {
        return (z * PI).sin().ln();
    }
    if z.im < 0.0 {
        return ln_sin_pi(z.conj()).conj();
    }
    // sin(πz) = e^{-iπz} (e^{2iπz} - 1) / (2i), |e^{2iπz}| < 1 here
    let i = Complex64::i();
    let w = (2.0 * i * PI * z).exp();
    -i * PI * z + ((w - 1.0) / (2.0 * i)).ln()
}

pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}
