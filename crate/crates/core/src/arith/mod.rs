//! Exact and extended-range arithmetic shared by the dynamical modules.

pub mod expr;
pub mod linalg;
pub mod poly;
pub mod quadratic;
pub mod ratfunc;
pub mod rational;
pub mod wide;

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use quadratic::Quadratic;
pub use ratfunc::RatFunc;
pub use rational::Q;
pub use wide::WideComplex;

/// A field in which the three surface families can be evaluated.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_rational(q: &BigRational) -> Self;
    fn is_zero_value(&self) -> bool;

    fn zero_value() -> Self {
        Self::from_rational(&BigRational::zero())
    }

    fn one_value() -> Self {
        Self::from_rational(&BigRational::one())
    }

    /// Integer power; negative exponents invert.
    fn powi_value(&self, e: i64) -> Self {
        let mut base = if e < 0 {
            Self::one_value() / self.clone()
        } else {
            self.clone()
        };
        let mut n = e.unsigned_abs();
        let mut acc = Self::one_value();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            n >>= 1;
            if n > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// Vieta partner of z in t² − xy·t + (x² + y² − D) = 0, i.e. xy − z.
    fn vieta_flip(x: &Self, y: &Self, z: &Self, _d: &Self) -> Self {
        x.clone() * y.clone() - z.clone()
    }
}

/// Floating scalars used in archimedean iterations.
pub trait NumScalar: Scalar + Copy + Send + Sync {
    fn from_c(z: Complex64) -> Self;
    fn ln_abs(&self) -> f64;
    fn to_c(&self) -> Complex64;
}

impl NumScalar for Complex64 {
    fn from_c(z: Complex64) -> Self {
        z
    }
    fn ln_abs(&self) -> f64 {
        self.norm().ln()
    }
    fn to_c(&self) -> Complex64 {
        *self
    }
}

impl NumScalar for WideComplex {
    fn from_c(z: Complex64) -> Self {
        WideComplex::new(z)
    }
    fn ln_abs(&self) -> f64 {
        WideComplex::ln_abs(self)
    }
    fn to_c(&self) -> Complex64 {
        self.to_complex()
    }
}

/// Cancellation-free Vieta flip: when z is the larger root use the product of roots.
fn stable_flip<S: NumScalar>(x: &S, y: &S, z: &S, d: &S) -> S {
    let c = *x * *x + *y * *y - *d;
    let lz = z.ln_abs();
    let lc = c.ln_abs();
    if lc.is_finite() && lz.is_finite() && 2.0 * lz >= lc {
        c / *z
    } else {
        *x * *y - *z
    }
}

impl Scalar for BigRational {
    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for Complex64 {
    fn from_rational(q: &BigRational) -> Self {
        Complex64::new(rational::to_f64(q), 0.0)
    }
    fn is_zero_value(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn powi_value(&self, e: i64) -> Self {
        self.powi(e as i32)
    }
    fn vieta_flip(x: &Self, y: &Self, z: &Self, d: &Self) -> Self {
        stable_flip(x, y, z, d)
    }
}
