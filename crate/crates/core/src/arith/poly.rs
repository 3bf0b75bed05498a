//! Dense univariate polynomials over Q, lowest degree first.

use num_traits::{One, Zero};

use super::{Scalar, Q};

pub type QPoly = Vec<Q>;

pub fn trim(p: &mut QPoly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn degree(p: &[Q]) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

pub fn add(a: &[Q], b: &[Q]) -> QPoly {
    let n = a.len().max(b.len());
    let mut out: QPoly = (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Q::zero);
            let y = b.get(i).cloned().unwrap_or_else(Q::zero);
            x + y
        })
        .collect();
    trim(&mut out);
    out
}

pub fn neg(a: &[Q]) -> QPoly {
    a.iter().map(|c| -c).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> QPoly {
    add(a, &neg(b))
}

pub fn mul(a: &[Q], b: &[Q]) -> QPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

pub fn scale(a: &[Q], c: &Q) -> QPoly {
    let mut out: QPoly = a.iter().map(|x| x * c).collect();
    trim(&mut out);
    out
}

/// Euclidean division; panics on a zero divisor.
pub fn divrem(a: &[Q], b: &[Q]) -> (QPoly, QPoly) {
    let db = degree(b).expect("division by zero polynomial");
    let lead = b[db].clone();
    let mut r: QPoly = a.to_vec();
    trim(&mut r);
    if r.len() <= db {
        return (Vec::new(), r);
    }
    let mut q = vec![Q::zero(); r.len() - db];
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let c = &r[dr] / &lead;
        for (k, bk) in b.iter().enumerate().take(db + 1) {
            r[dr - db + k] -= &c * bk;
        }
        q[dr - db] = c;
        trim(&mut r);
    }
    trim(&mut q);
    (q, r)
}

/// Monic gcd.
pub fn gcd(a: &[Q], b: &[Q]) -> QPoly {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    trim(&mut x);
    trim(&mut y);
    while !y.is_empty() {
        let (_, r) = divrem(&x, &y);
        x = y;
        y = r;
    }
    match x.last().cloned() {
        Some(l) => scale(&x, &(Q::one() / l)),
        None => x,
    }
}

/// Horner evaluation of rational coefficients in any scalar field.
pub fn eval<S: Scalar>(p: &[Q], y: &S) -> S {
    let mut acc = S::zero_value();
    for c in p.iter().rev() {
        acc = acc * y.clone() + S::from_rational(c);
    }
    acc
}

/// Horner evaluation with coefficients already in the target field.
pub fn eval_in<S: Scalar>(p: &[S], y: &S) -> S {
    let mut acc = S::zero_value();
    for c in p.iter().rev() {
        acc = acc * y.clone() + c.clone();
    }
    acc
}

pub fn derivative<S: Scalar>(p: &[S]) -> Vec<S> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c.clone() * S::from_rational(&Q::from_integer((k as i64).into())))
        .collect()
}

/// p(y - a) for a shift a.
pub fn shift(p: &[Q], a: &Q) -> QPoly {
    let lin = vec![-a.clone(), Q::one()];
    let mut out: QPoly = Vec::new();
    for c in p.iter().rev() {
        out = add(&mul(&out, &lin), &[c.clone()]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::int;

    fn p(v: &[i64]) -> QPoly {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn division_roundtrip() {
        let a = p(&[1, 0, -3, 2, 5]);
        let b = p(&[2, 1, 1]);
        let (q, r) = divrem(&a, &b);
        assert_eq!(add(&mul(&q, &b), &r), a);
        assert!(degree(&r).map_or(true, |d| d < 2));
    }

    #[test]
    fn gcd_of_shared_factor() {
        let f = p(&[-1, 1]);
        let a = mul(&f, &p(&[3, 0, 1]));
        let b = mul(&f, &p(&[5, 2]));
        assert_eq!(gcd(&a, &b), f);
    }

    #[test]
    fn shift_matches_substitution() {
        let q = p(&[0, 0, 1]);
        assert_eq!(shift(&q, &int(5)), p(&[25, -10, 1]));
    }
}
