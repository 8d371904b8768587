//! Smooth compactly supported weights.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// Bump supported on `[1, 2]`: `exp(-1/(1-u^2))` with `u = 2t - 3`.
pub fn v_window(t: f64) -> f64 {
    let u = 2.0 * t - 3.0;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn smooth_edge(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smoothstep(t: f64) -> f64 {
    let a = smooth_edge(t);
    let b = smooth_edge(1.0 - t);
    if a == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Supported on `[1/2, 3]`, identically 1 on `[1, 2]`.
pub fn w_window(t: f64) -> f64 {
    if t <= 0.5 || t >= 3.0 {
        0.0
    } else if t < 1.0 {
        smoothstep(2.0 * t - 1.0)
    } else if t <= 2.0 {
        1.0
    } else {
        smoothstep(3.0 - t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowKind {
    V,
    W,
}

/// `x ↦ window(x / scale) e(alpha x)`.
///
/// With this convention `g(x) = V(x/X) e(αx)` is `(V, X, α)` and
/// `h(y) = W(y/Y) e(-αy)` is `(W, Y, -α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightFunctionSpec {
    pub kind: WindowKind,
    pub scale: f64,
    pub alpha: f64,
    /// Constant factor; the Voronoi residuals are invariant under it.
    pub amplitude: f64,
}

impl WeightFunctionSpec {
    pub fn v(scale: f64, alpha: f64) -> Self {
        WeightFunctionSpec { kind: WindowKind::V, scale, alpha, amplitude: 1.0 }
    }

    pub fn w(scale: f64, alpha: f64) -> Self {
        WeightFunctionSpec { kind: WindowKind::W, scale, alpha, amplitude: 1.0 }
    }

    pub fn scaled(self, c: f64) -> Self {
        WeightFunctionSpec { amplitude: self.amplitude * c, ..self }
    }

    pub fn conj(self) -> Self {
        WeightFunctionSpec { alpha: -self.alpha, ..self }
    }

    pub fn window(&self, t: f64) -> f64 {
        match self.kind {
            WindowKind::V => v_window(t),
            WindowKind::W => w_window(t),
        }
    }

    /// Support of the unscaled window.
    pub fn unit_support(&self) -> (f64, f64) {
        match self.kind {
            WindowKind::V => (1.0, 2.0),
            WindowKind::W => (0.5, 3.0),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.unit_support();
        (a * self.scale, b * self.scale)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let w = self.window(x / self.scale);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.amplitude * w, TAU * self.alpha * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supports_and_plateau() {
        assert_eq!(v_window(1.0), 0.0);
        assert_eq!(v_window(2.0), 0.0);
        assert!((v_window(1.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(w_window(0.5), 0.0);
        assert_eq!(w_window(3.0), 0.0);
        for t in [1.0, 1.3, 2.0] {
            assert_eq!(w_window(t), 1.0);
        }
        assert!((w_window(0.75) - 0.5).abs() < 1e-15);
        assert!((w_window(2.5) - 0.5).abs() < 1e-15);
        for i in 0..=300 {
            let t = i as f64 / 100.0;
            assert!((0.0..=1.0).contains(&w_window(t)));
        }
    }

    #[test]
    fn modulation() {
        let g = WeightFunctionSpec::v(10.0, 0.1);
        let v = g.eval(15.0);
        assert!((v.norm() - v_window(1.5)).abs() < 1e-15);
        assert!((v.arg() - (TAU * 1.5 - TAU)).abs() < 1e-12);
        assert_eq!(g.support(), (10.0, 20.0));
        assert_eq!(WeightFunctionSpec::w(10.0, 0.0).support(), (5.0, 30.0));
    }
}
