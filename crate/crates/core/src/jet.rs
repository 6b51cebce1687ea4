//! Truncated Taylor series in one variable.
//!
//! A [`Jet`] stores the Taylor coefficients `c[n] = f^(n)(x0) / n!` of a
//! function at a point, truncated after degree [`DEGREE`]. Arithmetic on jets
//! propagates derivatives exactly (up to rounding), which is how every closed
//! form derivative of the bump profiles and the bridge is obtained.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEGREE: usize = 4;
const LEN: usize = DEGREE + 1;

const FACTORIAL: [f64; LEN] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Jet {
    pub const ZERO: Jet = Jet { c: [0.0; LEN] };

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable at `x0`.
    pub fn variable(x0: f64) -> Self {
        Self::affine(x0, 1.0)
    }

    /// `value + slope * (x - x0)` as a jet.
    pub fn affine(value: f64, slope: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = value;
        c[1] = slope;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `n`-th derivative at the expansion point.
    pub fn deriv(&self, n: usize) -> f64 {
        self.c[n] * FACTORIAL[n]
    }

    pub fn scale(self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Jet { c }
    }

    pub fn exp(self) -> Self {
        let mut e = [0.0; LEN];
        e[0] = self.c[0].exp();
        for n in 1..LEN {
            let mut acc = 0.0;
            for k in 1..=n {
                acc += k as f64 * self.c[k] * e[n - k];
            }
            e[n] = acc / n as f64;
        }
        Jet { c: e }
    }

    pub fn recip(self) -> Self {
        let a0 = self.c[0];
        let mut r = [0.0; LEN];
        r[0] = 1.0 / a0;
        for n in 1..LEN {
            let mut acc = 0.0;
            for k in 1..=n {
                acc += self.c[k] * r[n - k];
            }
            r[n] = -acc / a0;
        }
        Jet { c: r }
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Jet::constant(1.0), |acc, _| acc * self)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.c;
        c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a += b);
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; LEN];
        for i in 0..LEN {
            for j in 0..LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

/// Exponent below which `exp` is treated as an exact zero, together with all
/// of its derivatives (the true values are below 1e-300).
const UNDERFLOW_EXPONENT: f64 = -700.0;

/// The one-dimensional bump `psi(s) = exp(1 - 1/(1 - s^2))` for `|s| < 1`,
/// zero otherwise. `psi(0) = 1`, smooth, flat to all orders at `|s| = 1`.
pub fn psi(s: Jet) -> Jet {
    let s0 = s.value();
    if !(s0.abs() < 1.0) {
        return Jet::ZERO;
    }
    let u = Jet::constant(1.0) - s * s;
    if 1.0 - 1.0 / u.value() < UNDERFLOW_EXPONENT {
        return Jet::ZERO;
    }
    (Jet::constant(1.0) - u.recip()).exp()
}

/// Scalar convenience wrapper around [`psi`].
pub fn psi_value(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn arithmetic_matches_polynomial_derivatives() {
        // f(x) = x^3 - 2x at x = 1.5
        let x = Jet::variable(1.5);
        let f = x.powi(3) - x.scale(2.0);
        assert!((f.value() - (3.375 - 3.0)).abs() < 1e-14);
        assert!((f.deriv(1) - (3.0 * 2.25 - 2.0)).abs() < 1e-14);
        assert!((f.deriv(2) - 9.0).abs() < 1e-14);
        assert!((f.deriv(3) - 6.0).abs() < 1e-14);
        assert_eq!(f.deriv(4), 0.0);
    }

    #[test]
    fn exp_and_recip() {
        let x = Jet::variable(0.3);
        let e = x.scale(2.0).exp();
        for n in 0..=DEGREE {
            let expect = 2f64.powi(n as i32) * 0.6f64.exp();
            assert!((e.deriv(n) - expect).abs() < 1e-12 * expect);
        }
        let r = x.recip();
        // d^n/dx^n 1/x = (-1)^n n! / x^(n+1)
        for n in 0..=DEGREE {
            let expect = (-1f64).powi(n as i32) * FACTORIAL[n] / 0.3f64.powi(n as i32 + 1);
            assert!((r.deriv(n) - expect).abs() < 1e-10 * expect.abs());
        }
    }

    #[test]
    fn psi_derivatives_against_finite_differences() {
        for &s in &[-0.7, -0.2, 0.0, 0.35, 0.8, 0.95] {
            let j = psi(Jet::variable(s));
            let (d1, d2) = fd(psi_value, s, 1e-5);
            assert!((j.value() - psi_value(s)).abs() < 1e-15);
            assert!((j.deriv(1) - d1).abs() < 1e-6, "s={s}");
            assert!((j.deriv(2) - d2).abs() < 1e-3, "s={s}");
            let d3 = (psi(Jet::variable(s + 1e-5)).deriv(2) - psi(Jet::variable(s - 1e-5)).deriv(2)) / 2e-5;
            assert!((j.deriv(3) - d3).abs() < 1e-4 * (1.0 + d3.abs()), "s={s}");
        }
    }

    #[test]
    fn psi_support_and_peak() {
        assert_eq!(psi_value(0.0), 1.0);
        assert_eq!(psi_value(1.0), 0.0);
        assert_eq!(psi_value(-1.5), 0.0);
        assert_eq!(psi(Jet::variable(1.0)), Jet::ZERO);
        assert!(psi_value(0.999) >= 0.0);
    }
}
