use std::ops::{Add, Mul, Neg, Sub};

use super::real::{sigmoid_f64, Real};

/// Second-order jet `(v, d1, d2)` of a scalar with respect to one scalar input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<T = f64> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Real> Jet2<T> {
    pub fn new(v: T, d1: T, d2: T) -> Self {
        Self { v, d1, d2 }
    }

    /// Lift a scalar: the independent variable gets unit slope, a constant none.
    pub fn lift(s: T, is_variable: bool) -> Self {
        let one = if is_variable { 1.0 } else { 0.0 };
        Self { v: s, d1: T::constant(one), d2: T::constant(0.0) }
    }

    pub fn variable(s: T) -> Self {
        Self::lift(s, true)
    }

    pub fn constant(c: T) -> Self {
        Self::lift(c, false)
    }

    pub fn scale(self, c: f64) -> Self {
        Self { v: self.v.scale(c), d1: self.d1.scale(c), d2: self.d2.scale(c) }
    }

    /// `w * self + b` for input-independent `w`, `b`.
    pub fn affine(self, w: T, b: T) -> Self {
        Self { v: w * self.v + b, d1: w * self.d1, d2: w * self.d2 }
    }

    /// `z * sigmoid(z)` pushed through the second-order chain rule.
    pub fn silu(self) -> Self {
        let s = self.v.sigmoid();
        let one = T::constant(1.0);
        let q = s * (one - s);
        let f = self.v * s;
        let f1 = s + self.v * q;
        let f2 = q * (T::constant(2.0) + self.v * (one - s.scale(2.0)));
        Self { v: f, d1: f1 * self.d1, d2: f2 * self.d1 * self.d1 + f1 * self.d2 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d1: e * self.d1, d2: e * (self.d1 * self.d1 + self.d2) }
    }

    pub fn values(&self) -> (f64, f64, f64) {
        (self.v.value(), self.d1.value(), self.d2.value())
    }

    pub fn is_finite(&self) -> bool {
        self.v.value().is_finite() && self.d1.value().is_finite() && self.d2.value().is_finite()
    }
}

impl<T: Real> Add for Jet2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl<T: Real> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl<T: Real> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

/// Leibniz rule: `(fg)'' = f''g + 2f'g' + fg''`.
impl<T: Real> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + (self.d1 * o.d1).scale(2.0) + self.v * o.d2,
        }
    }
}

/// Value and first three derivatives of `silu(z) = z * sigmoid(z)`.
#[inline]
pub fn silu_derivatives(z: f64) -> [f64; 4] {
    let s = sigmoid_f64(z);
    let q = s * (1.0 - s);
    let m = 1.0 - 2.0 * s;
    let f = z * s;
    let f1 = s + z * q;
    let f2 = q * (2.0 + z * m);
    let f3 = q * m * (2.0 + z * m) + q * (m - 2.0 * z * q);
    [f, f1, f2, f3]
}
