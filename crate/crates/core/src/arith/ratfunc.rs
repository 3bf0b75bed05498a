//! Rational functions in one variable t over Q, kept in lowest terms with monic denominator.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::poly::{self, QPoly};
use super::rational::{self, Q};
use super::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatFunc {
    num: QPoly,
    den: QPoly,
}

impl RatFunc {
    pub fn new(num: QPoly, den: QPoly) -> Self {
        let mut num = num;
        let mut den = den;
        poly::trim(&mut num);
        poly::trim(&mut den);
        assert!(!den.is_empty(), "rational function with zero denominator");
        if num.is_empty() {
            return Self::constant(Q::zero());
        }
        let den_low = den.iter().position(|c| !c.is_zero()).unwrap();
        if den_low + 1 == den.len() {
            // c·t^k: cancel the common power of t
            let num_low = num.iter().position(|c| !c.is_zero()).unwrap();
            let k = den_low.min(num_low);
            num.drain(..k);
            den.drain(..k);
        } else if num.len() > 1 {
            let g = poly::gcd(&num, &den);
            if g.len() > 1 {
                num = poly::divrem(&num, &g).0;
                den = poly::divrem(&den, &g).0;
            }
        }
        let lead = den.last().cloned().unwrap();
        if !lead.is_one() {
            let inv = Q::one() / lead;
            num = poly::scale(&num, &inv);
            den = poly::scale(&den, &inv);
        }
        RatFunc { num, den }
    }

    pub fn constant(c: Q) -> Self {
        let mut num = vec![c];
        poly::trim(&mut num);
        RatFunc {
            num,
            den: vec![Q::one()],
        }
    }

    pub fn t() -> Self {
        RatFunc {
            num: vec![Q::zero(), Q::one()],
            den: vec![Q::one()],
        }
    }

    pub fn num(&self) -> &[Q] {
        &self.num
    }

    pub fn den(&self) -> &[Q] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.den.len() == 1 && self.num.len() <= 1 {
            Some(self.num.first().cloned().unwrap_or_else(Q::zero))
        } else {
            None
        }
    }

    pub fn eval_complex(&self, t: Complex64) -> Option<Complex64> {
        let d: Complex64 = poly_eval_c(&self.den, t);
        if d.norm() == 0.0 {
            return None;
        }
        Some(poly_eval_c(&self.num, t) / d)
    }

    pub fn eval_rational(&self, t: &Q) -> Option<Q> {
        let d: Q = poly::eval(&self.den, t);
        if d.is_zero() {
            return None;
        }
        Some(poly::eval(&self.num, t) / d)
    }

    /// Minimum p-adic valuation of the coefficients (Gauss norm), `None` for zero.
    pub fn gauss_valuation(&self, p: u64) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        Some(content_valuation(&self.num, p) - content_valuation(&self.den, p))
    }

    /// Order of vanishing at t = 0.
    pub fn t_valuation(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        let low = |p: &[Q]| p.iter().position(|c| !c.is_zero()).unwrap() as i64;
        Some(low(&self.num) - low(&self.den))
    }

    /// Order of vanishing at t = infinity.
    pub fn inf_valuation(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        Some((self.den.len() as i64) - (self.num.len() as i64))
    }

    /// Rational numbers appearing as coefficients, used for place detection.
    pub fn coefficients(&self) -> impl Iterator<Item = &Q> {
        self.num.iter().chain(self.den.iter())
    }

    pub fn size(&self) -> u64 {
        self.coefficients().map(rational::bit_size).sum()
    }
}

fn content_valuation(p: &[Q], prime: u64) -> i64 {
    p.iter()
        .filter_map(|c| rational::valuation(c, prime))
        .min()
        .expect("nonzero polynomial")
}

fn poly_eval_c(p: &[Q], t: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in p.iter().rev() {
        acc = acc * t + rational::to_f64(c);
    }
    acc
}

impl Add for RatFunc {
    type Output = RatFunc;
    fn add(self, o: RatFunc) -> RatFunc {
        if self.den == o.den {
            return RatFunc::new(poly::add(&self.num, &o.num), self.den);
        }
        RatFunc::new(
            poly::add(&poly::mul(&self.num, &o.den), &poly::mul(&o.num, &self.den)),
            poly::mul(&self.den, &o.den),
        )
    }
}

impl Neg for RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc {
            num: poly::neg(&self.num),
            den: self.den,
        }
    }
}

impl Sub for RatFunc {
    type Output = RatFunc;
    fn sub(self, o: RatFunc) -> RatFunc {
        self + (-o)
    }
}

impl Mul for RatFunc {
    type Output = RatFunc;
    fn mul(self, o: RatFunc) -> RatFunc {
        if self.is_zero() || o.is_zero() {
            return RatFunc::constant(Q::zero());
        }
        RatFunc::new(poly::mul(&self.num, &o.num), poly::mul(&self.den, &o.den))
    }
}

impl Div for RatFunc {
    type Output = RatFunc;
    fn div(self, o: RatFunc) -> RatFunc {
        assert!(!o.is_zero(), "division by zero rational function");
        RatFunc::new(poly::mul(&self.num, &o.den), poly::mul(&self.den, &o.num))
    }
}

impl Scalar for RatFunc {
    fn from_rational(q: &Q) -> Self {
        RatFunc::constant(q.clone())
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
}

fn fmt_poly(p: &[Q], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_empty() {
        return write!(f, "0");
    }
    let mut first = true;
    for (k, c) in p.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        if !first {
            write!(f, " + ")?;
        }
        first = false;
        match k {
            0 => write!(f, "{c}")?,
            1 => write!(f, "({c})*t")?,
            _ => write!(f, "({c})*t^{k}")?,
        }
    }
    Ok(())
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.len() == 1 {
            return fmt_poly(&self.num, f);
        }
        write!(f, "(")?;
        fmt_poly(&self.num, f)?;
        write!(f, ")/(")?;
        fmt_poly(&self.den, f)?;
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::{frac, int};

    #[test]
    fn reduces_to_lowest_terms() {
        let t = RatFunc::t();
        let one = RatFunc::constant(int(1));
        let a = (t.clone() * t.clone() - one.clone()) / (t.clone() - one.clone());
        assert_eq!(a, t + one);
    }

    #[test]
    fn valuations_of_paper_coefficient() {
        // 1/(2t)
        let c = RatFunc::constant(int(1)) / (RatFunc::constant(int(2)) * RatFunc::t());
        assert_eq!(c.gauss_valuation(2), Some(-1));
        assert_eq!(c.gauss_valuation(3), Some(0));
        assert_eq!(c.t_valuation(), Some(-1));
        assert_eq!(c.inf_valuation(), Some(1));
        assert_eq!(c.eval_rational(&int(1)), Some(frac(1, 2)));
    }
}
