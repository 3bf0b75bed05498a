//! Elements a + b·√d of a real or imaginary quadratic field.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Zero;

use super::rational::{self, Q};
use super::Scalar;

/// `d == 0` marks a rational element that can combine with any field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quadratic {
    pub a: Q,
    pub b: Q,
    pub d: i64,
}

impl Quadratic {
    pub fn new(a: Q, b: Q, d: i64) -> Self {
        if b.is_zero() {
            return Quadratic { a, b, d: 0 };
        }
        Quadratic { a, b, d }
    }

    pub fn rational(a: Q) -> Self {
        Quadratic { a, b: Q::zero(), d: 0 }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn conjugate(&self) -> Self {
        Quadratic::new(self.a.clone(), -self.b.clone(), self.d)
    }

    /// Embedding with √d ↦ sign·√d (principal root for d < 0).
    pub fn embed(&self, sign: f64) -> Complex64 {
        let a = rational::to_f64(&self.a);
        let b = rational::to_f64(&self.b);
        let r = if self.d >= 0 {
            Complex64::new((self.d as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-(self.d as f64)).sqrt())
        };
        Complex64::new(a, 0.0) + r * (b * sign)
    }

    pub fn size(&self) -> u64 {
        rational::bit_size(&self.a) + rational::bit_size(&self.b)
    }

    fn join(&self, o: &Self) -> i64 {
        match (self.d, o.d) {
            (0, d) | (d, 0) => d,
            (x, y) => {
                assert_eq!(x, y, "mixing different quadratic fields");
                x
            }
        }
    }

    fn norm(&self) -> Q {
        &self.a * &self.a - &self.b * &self.b * Q::from_integer(self.d.into())
    }
}

impl Add for Quadratic {
    type Output = Quadratic;
    fn add(self, o: Quadratic) -> Quadratic {
        let d = self.join(&o);
        Quadratic::new(self.a + o.a, self.b + o.b, d)
    }
}

impl Sub for Quadratic {
    type Output = Quadratic;
    fn sub(self, o: Quadratic) -> Quadratic {
        self + (-o)
    }
}

impl Neg for Quadratic {
    type Output = Quadratic;
    fn neg(self) -> Quadratic {
        Quadratic::new(-self.a, -self.b, self.d)
    }
}

impl Mul for Quadratic {
    type Output = Quadratic;
    fn mul(self, o: Quadratic) -> Quadratic {
        let d = self.join(&o);
        let dq = Q::from_integer(d.into());
        Quadratic::new(
            &self.a * &o.a + &self.b * &o.b * dq,
            &self.a * &o.b + &self.b * &o.a,
            d,
        )
    }
}

impl Div for Quadratic {
    type Output = Quadratic;
    fn div(self, o: Quadratic) -> Quadratic {
        let n = o.norm();
        assert!(!n.is_zero(), "division by zero in quadratic field");
        let c = o.conjugate();
        let p = self * c;
        Quadratic::new(p.a / &n, p.b / &n, p.d)
    }
}

impl Scalar for Quadratic {
    fn from_rational(q: &Q) -> Self {
        Quadratic::rational(q.clone())
    }
    fn is_zero_value(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::int;

    #[test]
    fn silver_ratio_is_fixed_by_quadratic() {
        // x = 1 + √2 satisfies x² - 2x - 1 = 0
        let x = Quadratic::new(int(1), int(1), 2);
        let v = x.clone() * x.clone() - Quadratic::rational(int(2)) * x - Quadratic::rational(int(1));
        assert!(v.is_zero_value());
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = Quadratic::new(int(3), int(-2), 5);
        let y = Quadratic::new(int(1), int(4), 5);
        assert_eq!((x.clone() * y.clone()) / y, x);
    }
}
