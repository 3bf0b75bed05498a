//! Small arithmetic expression language for coordinates, coefficients and test polynomials.
//!
//! Grammar: numbers (`3`, `-1/2`, `0.25`, `1e-3`), variables `t x y z`, `sqrt(n)` for an
//! integer n, binary `+ - * / ^` with integer exponents, parentheses, and implicit
//! multiplication (`2t`, `3(x+1)`).

use num_complex::Complex64;

use super::quadratic::Quadratic;
use super::ratfunc::RatFunc;
use super::rational::{self, Q};
use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Q),
    Var(char),
    Sqrt(i64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            // exponent part only when followed by digits
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let mut j = i + 1;
                if j < cs.len() && (cs[j] == '-' || cs[j] == '+') {
                    j += 1;
                }
                if j < cs.len() && cs[j].is_ascii_digit() {
                    while j < cs.len() && cs[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push(Tok::Num(cs[start..i].iter().collect()));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push(Tok::Ident(cs[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} in {s:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some(Tok::Op(o)) if o == c => Ok(()),
            other => Err(Error::Parse(format!("expected {c:?}, found {other:?}"))),
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op(c @ ('*' | '/'))) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = if c == '*' {
                        Expr::Mul(Box::new(lhs), Box::new(rhs))
                    } else {
                        Expr::Div(Box::new(lhs), Box::new(rhs))
                    };
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')) => {
                    let rhs = self.power()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let e = self.int_literal()?;
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> Result<i64> {
        let (neg, paren) = match self.peek() {
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let neg = matches!(self.peek(), Some(Tok::Op('-')));
                if neg {
                    self.pos += 1;
                }
                (neg, true)
            }
            Some(Tok::Op('-')) => {
                self.pos += 1;
                (true, false)
            }
            _ => (false, false),
        };
        let v = match self.next() {
            Some(Tok::Num(n)) => n
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("exponent must be an integer, got {n:?}")))?,
            other => return Err(Error::Parse(format!("expected exponent, found {other:?}"))),
        };
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -v } else { v })
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(Expr::Num(rational::parse_rational(&n)?)),
            Some(Tok::Ident(id)) => match id.as_str() {
                "t" | "x" | "y" | "z" => Ok(Expr::Var(id.chars().next().unwrap())),
                "sqrt" => {
                    self.expect('(')?;
                    let neg = matches!(self.peek(), Some(Tok::Op('-')));
                    if neg {
                        self.pos += 1;
                    }
                    let n = match self.next() {
                        Some(Tok::Num(n)) => n
                            .parse::<i64>()
                            .map_err(|_| Error::Parse(format!("sqrt needs an integer, got {n:?}")))?,
                        other => return Err(Error::Parse(format!("bad sqrt argument {other:?}"))),
                    };
                    self.expect(')')?;
                    Ok(Expr::Sqrt(if neg { -n } else { n }))
                }
                _ => Err(Error::Parse(format!("unknown identifier {id:?}"))),
            },
            Some(Tok::Op('(')) => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

pub fn parse(s: &str) -> Result<Expr> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input in {s:?}")));
    }
    Ok(e)
}

/// Splits on commas that are not nested inside parentheses.
pub fn split_top(s: &str) -> Vec<&str> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

impl Expr {
    pub fn eval<S: Scalar>(
        &self,
        var: &dyn Fn(char) -> Result<S>,
        sqrt: &dyn Fn(i64) -> Result<S>,
    ) -> Result<S> {
        Ok(match self {
            Expr::Num(q) => S::from_rational(q),
            Expr::Var(c) => var(*c)?,
            Expr::Sqrt(n) => sqrt(*n)?,
            Expr::Neg(a) => -a.eval(var, sqrt)?,
            Expr::Add(a, b) => a.eval(var, sqrt)? + b.eval(var, sqrt)?,
            Expr::Sub(a, b) => a.eval(var, sqrt)? - b.eval(var, sqrt)?,
            Expr::Mul(a, b) => a.eval(var, sqrt)? * b.eval(var, sqrt)?,
            Expr::Div(a, b) => {
                let d = b.eval(var, sqrt)?;
                if d.is_zero_value() {
                    return Err(Error::Parse("division by zero".into()));
                }
                a.eval(var, sqrt)? / d
            }
            Expr::Pow(a, e) => {
                let b = a.eval(var, sqrt)?;
                if *e < 0 && b.is_zero_value() {
                    return Err(Error::Parse("zero to a negative power".into()));
                }
                b.powi_value(*e)
            }
        })
    }

    pub fn variables(&self) -> Vec<char> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v.sort_unstable();
        v.dedup();
        v
    }

    fn collect_vars(&self, out: &mut Vec<char>) {
        match self {
            Expr::Var(c) => out.push(*c),
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Num(_) | Expr::Sqrt(_) => {}
        }
    }

    pub fn has_sqrt(&self) -> bool {
        match self {
            Expr::Sqrt(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.has_sqrt(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.has_sqrt() || b.has_sqrt()
            }
            _ => false,
        }
    }
}

fn no_sqrt<S>(n: i64) -> Result<S> {
    Err(Error::UnsupportedField(format!("sqrt({n}) where a rational value is required")))
}

pub fn to_rational(s: &str) -> Result<Q> {
    let e = parse(s)?;
    e.eval::<Q>(
        &|c| Err(Error::Parse(format!("variable {c} in a constant"))),
        &no_sqrt,
    )
}

pub fn to_ratfunc(s: &str) -> Result<RatFunc> {
    let e = parse(s)?;
    e.eval::<RatFunc>(
        &|c| {
            if c == 't' {
                Ok(RatFunc::t())
            } else {
                Err(Error::Parse(format!("variable {c} in a function of t")))
            }
        },
        &no_sqrt,
    )
}

pub fn to_quadratic(s: &str) -> Result<Quadratic> {
    let e = parse(s)?;
    e.eval::<Quadratic>(
        &|c| Err(Error::Parse(format!("variable {c} in a constant"))),
        &|n| {
            let (sq, free) = squarefree_split(n);
            if free == 1 {
                return Ok(Quadratic::rational(Q::from_integer(sq.into())));
            }
            Ok(Quadratic::new(
                Q::from_integer(0.into()),
                Q::from_integer(sq.into()),
                free,
            ))
        },
    )
}

/// n = s² · f with f squarefree (sign kept on f).
pub fn squarefree_split(n: i64) -> (i64, i64) {
    if n == 0 {
        return (0, 1);
    }
    let mut f = n.abs();
    let mut s = 1;
    let mut k = 2;
    while k * k <= f {
        while f % (k * k) == 0 {
            f /= k * k;
            s *= k;
        }
        k += 1;
    }
    (s, f * n.signum())
}

/// Evaluates a polynomial test function at a complex point of up to three coordinates.
pub fn eval_complex(e: &Expr, pt: &[Complex64]) -> Result<Complex64> {
    e.eval::<Complex64>(
        &|c| {
            let idx = match c {
                'x' => 0,
                'y' => 1,
                'z' => 2,
                _ => return Err(Error::Parse(format!("variable {c} in a point function"))),
            };
            pt.get(idx)
                .copied()
                .ok_or_else(|| Error::Parse(format!("variable {c} beyond point dimension")))
        },
        &|n| Ok(Complex64::new(n as f64, 0.0).sqrt()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::{frac, int};

    #[test]
    fn rational_literals() {
        assert_eq!(to_rational("-1/2").unwrap(), frac(-1, 2));
        assert_eq!(to_rational("0.125").unwrap(), frac(1, 8));
        assert_eq!(to_rational("2^-2").unwrap(), frac(1, 4));
        assert_eq!(to_rational("3(1+1)").unwrap(), int(6));
    }

    #[test]
    fn family_coefficient() {
        let c = to_ratfunc("1/(2t)").unwrap();
        assert_eq!(c.eval_rational(&int(2)), Some(frac(1, 4)));
    }

    #[test]
    fn quadratic_literals() {
        let q = to_quadratic("1 - sqrt(8)").unwrap();
        assert_eq!(q, Quadratic::new(int(1), int(-2), 2));
        assert!(to_quadratic("sqrt(9)").unwrap().is_rational());
    }

    #[test]
    fn top_level_split() {
        assert_eq!(split_top("1/(2+t), t^2"), vec!["1/(2+t)", "t^2"]);
    }

    #[test]
    fn complex_point_function() {
        let e = parse("x^2+y^2").unwrap();
        let v = eval_complex(&e, &[Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        assert!((v - Complex64::new(3.0, 0.0)).norm() < 1e-15);
    }
}
