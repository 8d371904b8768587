//! Bessel functions `J_n(x)` of integer order and real argument.

use std::f64::consts::PI;

/// `J_n(x)` for `x >= 0`: power series for small `x`, Miller's backward
/// recurrence in the middle, Hankel's asymptotic expansion for large `x`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_j needs x >= 0");
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x < 2.0 {
        series(n, x)
    } else if x >= 40.0_f64.max(0.5 * nf * nf) {
        hankel(n, x)
    } else {
        miller(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for m in 1..60 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let start = 2 * ((top as usize + 40 + (40.0 * top).sqrt() as usize) / 2);
    let (mut bjp, mut bj) = (0.0f64, 1.0f64);
    let (mut ans, mut sum) = (0.0f64, 0.0f64);
    let mut even = false;
    for j in (1..=start).rev() {
        let bjm = 2.0 * j as f64 / x * bj - bjp;
        bjp = bj;
        bj = bjm;
        if bj.abs() > 1e250 {
            bj *= 1e-250;
            bjp *= 1e-250;
            ans *= 1e-250;
            sum *= 1e-250;
        }
        if even {
            sum += bj;
        }
        even = !even;
        if j as u32 == n + 1 {
            ans = bj;
        }
    }
    // bj now holds J_0 up to scale; 1 = J_0 + 2 sum J_{2k}
    let norm = 2.0 * sum - bj;
    if n == 0 {
        bj / norm
    } else {
        ans / norm
    }
}

fn hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // P takes even k with alternating sign, Q takes odd k
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_n(x) = (1/π) ∫_0^π cos(nτ - x sin τ) dτ`; the trapezoid rule on this
    /// periodic integrand converges geometrically.
    fn integral(n: u32, x: f64) -> f64 {
        let m = 4000 + 4 * x as usize;
        let h = PI / m as f64;
        let mut s = 0.5 * (1.0 + (n as f64 * PI - 0.0).cos());
        for j in 1..m {
            let t = j as f64 * h;
            s += (n as f64 * t - x * t.sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        for n in [0u32, 1, 5, 11, 23] {
            for x in [0.01, 0.5, 1.99, 2.0, 3.3, 10.0, 11.0, 25.0, 39.9, 40.0, 60.0, 60.6, 130.0, 700.0, 2500.0] {
                let got = bessel_j(n, x);
                let want = integral(n, x);
                assert!((got - want).abs() < 1e-12, "J_{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert_eq!(bessel_j(11, 0.0), 0.0);
    }

    #[test]
    fn recurrence_holds_across_branches() {
        // J_{n-1} + J_{n+1} = (2n/x) J_n
        for x in [1.5, 2.5, 39.0, 41.0, 72.0, 500.0] {
            for n in 1..15u32 {
                let l = bessel_j(n - 1, x) + bessel_j(n + 1, x);
                let r = 2.0 * n as f64 / x * bessel_j(n, x);
                assert!((l - r).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }
}
