//! Complex numbers with an extended exponent: value = m · exp(e).
//! Keeps long escaping orbits representable far beyond f64 range.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use super::rational::{self, Q};
use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WideComplex {
    m: Complex64,
    e: f64,
}

const HI: f64 = 1e100;
const LO: f64 = 1e-100;

impl WideComplex {
    pub fn new(z: Complex64) -> Self {
        WideComplex { m: z, e: 0.0 }.norm()
    }

    pub fn zero() -> Self {
        WideComplex {
            m: Complex64::new(0.0, 0.0),
            e: 0.0,
        }
    }

    fn norm(self) -> Self {
        let a = self.m.norm();
        if a == 0.0 || !a.is_finite() {
            return WideComplex { m: self.m, e: if a == 0.0 { 0.0 } else { self.e } };
        }
        if !(LO..=HI).contains(&a) {
            let s = a.ln();
            WideComplex {
                m: self.m / a,
                e: self.e + s,
            }
        } else {
            self
        }
    }

    /// ln|z|, −∞ for zero.
    pub fn ln_abs(&self) -> f64 {
        let a = self.m.norm();
        if a == 0.0 {
            f64::NEG_INFINITY
        } else {
            a.ln() + self.e
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.re.is_finite() && self.m.im.is_finite() && self.e.is_finite()
    }

    /// Collapses to f64, overflowing to infinity.
    pub fn to_complex(&self) -> Complex64 {
        if self.e == 0.0 {
            self.m
        } else {
            self.m * self.e.exp()
        }
    }

    fn align(self, o: Self) -> (Complex64, Complex64, f64) {
        if self.m.norm() == 0.0 {
            return (self.m, o.m, o.e);
        }
        if o.m.norm() == 0.0 {
            return (self.m, o.m, self.e);
        }
        if self.e >= o.e {
            (self.m, o.m * (o.e - self.e).exp(), self.e)
        } else {
            (self.m * (self.e - o.e).exp(), o.m, o.e)
        }
    }
}

impl Add for WideComplex {
    type Output = WideComplex;
    fn add(self, o: WideComplex) -> WideComplex {
        let (a, b, e) = self.align(o);
        WideComplex { m: a + b, e }.norm()
    }
}

impl Sub for WideComplex {
    type Output = WideComplex;
    fn sub(self, o: WideComplex) -> WideComplex {
        self + (-o)
    }
}

impl Neg for WideComplex {
    type Output = WideComplex;
    fn neg(self) -> WideComplex {
        WideComplex {
            m: -self.m,
            e: self.e,
        }
    }
}

impl Mul for WideComplex {
    type Output = WideComplex;
    fn mul(self, o: WideComplex) -> WideComplex {
        WideComplex {
            m: self.m * o.m,
            e: self.e + o.e,
        }
        .norm()
    }
}

impl Div for WideComplex {
    type Output = WideComplex;
    fn div(self, o: WideComplex) -> WideComplex {
        WideComplex {
            m: self.m / o.m,
            e: self.e - o.e,
        }
        .norm()
    }
}

impl Scalar for WideComplex {
    fn from_rational(q: &Q) -> Self {
        WideComplex::new(Complex64::new(rational::to_f64(q), 0.0))
    }
    fn is_zero_value(&self) -> bool {
        self.m.norm() == 0.0
    }
    fn vieta_flip(x: &Self, y: &Self, z: &Self, d: &Self) -> Self {
        super::stable_flip(x, y, z, d)
    }
}

impl From<Complex64> for WideComplex {
    fn from(z: Complex64) -> Self {
        WideComplex::new(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squaring_past_f64_range() {
        let mut w = WideComplex::new(Complex64::new(10.0, 0.0));
        for _ in 0..12 {
            w = w * w;
        }
        let expected = 4096.0 * 10f64.ln();
        assert!((w.ln_abs() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn addition_of_mismatched_scales() {
        let big = WideComplex::new(Complex64::new(1e80, 0.0)) * WideComplex::new(Complex64::new(1e80, 0.0));
        let s = big + WideComplex::new(Complex64::new(1.0, 0.0));
        assert!((s.ln_abs() - 160.0 * 10f64.ln()).abs() < 1e-9);
    }
}
