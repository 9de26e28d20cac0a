use std::ops::{Add, Mul, Neg, Sub};

/// Scalar arithmetic shared by plain `f64` and taped variables.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    /// Logistic function, evaluated without overflow for any finite input.
    fn sigmoid(self) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::constant(c)
    }
}

pub(crate) fn sigmoid_f64(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    #[inline]
    fn constant(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}
