//! Forward-mode dual numbers carrying `∂t` and `∂x`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic shared by `f64` and [`Dual`], so geometry code is written once.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(self) -> f64;
    fn is_finite(self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    /// Square root; at zero the derivative is taken as zero when the argument is stationary.
    fn sqrt(self) -> Self;
    /// `self^p` for a constant real exponent.
    fn powf(self, p: f64) -> Self;
    fn powi(self, p: i32) -> Self;
    fn has_derivative(self) -> bool;
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, p: i32) -> Self {
        f64::powi(self, p)
    }
    fn has_derivative(self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub v: f64,
    pub dt: f64,
    pub dx: f64,
}

impl Dual {
    pub const fn new(v: f64, dt: f64, dx: f64) -> Self {
        Self { v, dt, dx }
    }

    pub const fn var_t(t: f64) -> Self {
        Self::new(t, 1.0, 0.0)
    }

    pub const fn var_x(x: f64) -> Self {
        Self::new(x, 0.0, 1.0)
    }

    fn chain(self, f: f64, df: f64) -> Self {
        Self::new(f, df * self.dt, df * self.dx)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.dt + o.dt, self.dx + o.dx)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.dt - o.dt, self.dx - o.dx)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.dt * o.v + self.v * o.dt, self.dx * o.v + self.v * o.dx)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        Dual::new(q, (self.dt - q * o.dt) * inv, (self.dx - q * o.dx) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.dt, -self.dx)
    }
}

impl Scalar for Dual {
    fn cst(c: f64) -> Self {
        Dual::new(c, 0.0, 0.0)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.dt.is_finite() && self.dx.is_finite()
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        if s == 0.0 && !self.has_derivative() {
            return Dual::new(0.0, 0.0, 0.0);
        }
        self.chain(s, 0.5 / s)
    }
    fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Dual::cst(1.0);
        }
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }
    fn powi(self, p: i32) -> Self {
        if p == 0 {
            return Dual::cst(1.0);
        }
        self.chain(self.v.powi(p), p as f64 * self.v.powi(p - 1))
    }
    fn has_derivative(self) -> bool {
        self.dt != 0.0 || self.dx != 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let t = Dual::var_t(2.0);
        let x = Dual::var_x(3.0);
        let p = t * t * x;
        assert_eq!(p, Dual::new(12.0, 12.0, 4.0));
    }

    #[test]
    fn quotient_and_sqrt() {
        let t = Dual::var_t(4.0);
        let r = Dual::cst(1.0) / t.sqrt();
        assert!((r.v - 0.5).abs() < 1e-16);
        assert!((r.dt + 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn stationary_sqrt_at_zero() {
        assert_eq!(Dual::cst(0.0).sqrt(), Dual::cst(0.0));
        assert!(!Dual::var_x(0.0).sqrt().is_finite());
    }
}
