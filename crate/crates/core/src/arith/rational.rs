use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3"`, `"-1/2"`, `"0.125"`, `"1.5e-3"` exactly.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_decimal(n)?;
        let d = parse_decimal(d)?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a decimal number: {s:?}"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = digits.split_once('.').unwrap_or((digits, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{ip}{fp}");
    let n: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().map_err(|_| bad())?
    };
    let scale = exp - fp.len() as i64;
    let ten = BigInt::from(10);
    let mut q = Q::from_integer(n);
    if scale >= 0 {
        q *= Q::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= Q::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -q } else { q })
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// p-adic valuation of a rational; `None` for zero.
pub fn valuation(q: &Q, p: u64) -> Option<i64> {
    if q.is_zero() {
        return None;
    }
    Some(int_valuation(q.numer(), p) - int_valuation(q.denom(), p))
}

pub fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails on overflow; fall back to logs.
        let ln = ln_abs(q);
        let s = if q.is_negative() { -1.0 } else { 1.0 };
        s * ln.exp()
    })
}

/// ln |q| for nonzero q, robust for huge numerators/denominators.
pub fn ln_abs(q: &Q) -> f64 {
    ln_abs_int(q.numer()) - ln_abs_int(q.denom())
}

pub fn ln_abs_int(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().map(|v| v.abs().ln()).unwrap_or(f64::INFINITY);
    }
    let shift = bits - 64;
    let top = (n.abs() >> shift).to_f64().unwrap_or(1.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn pow(q: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(q.clone(), e as usize)
    } else {
        num_traits::pow(q.recip(), e.unsigned_abs() as usize)
    }
}

/// Total bit size, used to cap exact iterations.
pub fn bit_size(q: &Q) -> u64 {
    q.numer().bits() + q.denom().bits()
}

/// Distinct prime factors of |n| by trial division up to `cap`.
pub fn prime_factors(n: &BigInt, cap: u64) -> Result<Vec<u64>> {
    let mut n = n.abs();
    let mut out = Vec::new();
    if n.is_zero() || n.is_one() {
        return Ok(out);
    }
    let mut p: u64 = 2;
    while p <= cap {
        let bp = BigInt::from(p);
        if &bp * &bp > n {
            break;
        }
        let (q, r) = n.div_rem(&bp);
        if r.is_zero() {
            out.push(p);
            n = q;
            while (&n % &bp).is_zero() {
                n /= &bp;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if !n.is_one() {
        let cap_sq = BigInt::from(cap) * BigInt::from(cap);
        match n.to_u64() {
            Some(v) if n <= cap_sq || p > cap || BigInt::from(p) * BigInt::from(p) > n => {
                out.push(v)
            }
            _ => return Err(Error::Unfactorable(n.to_string())),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn is_integral_at(q: &Q, p: u64) -> bool {
    valuation(q, p).map_or(true, |v| v >= 0)
}

pub fn sign(q: &Q) -> Sign {
    q.numer().sign()
}
