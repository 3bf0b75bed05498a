//! The three automorphism families: monomial maps of the torus, compositions of Hénon
//! maps of the plane, and Vieta words on Markov surfaces.

use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::poly::{self, QPoly};
use crate::arith::rational::{self, Q};
use crate::arith::{NumScalar, RatFunc, Scalar};
use crate::error::{Error, Result};

pub const LOXODROMIC_EPS: f64 = 1e-12;
const SURFACE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matrix2(pub [[i64; 2]; 2]);

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2([[1, 0], [0, 1]]);

    pub fn new(m: [[i64; 2]; 2]) -> Result<Self> {
        let a = Matrix2(m);
        match a.det_checked() {
            Some(1) | Some(-1) => Ok(a),
            _ => Err(Error::NonUnimodular(m)),
        }
    }

    fn det_checked(&self) -> Option<i64> {
        let [[a, b], [c, d]] = self.0;
        a.checked_mul(d)?.checked_sub(b.checked_mul(c)?)
    }

    pub fn det(&self) -> i64 {
        self.det_checked().expect("determinant overflow")
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul(&self, o: &Matrix2) -> Result<Matrix2> {
        let mut out = [[0i64; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let s = self.0[i][0]
                    .checked_mul(o.0[0][j])
                    .and_then(|x| x.checked_add(self.0[i][1].checked_mul(o.0[1][j])?));
                *cell = s.ok_or(Error::Overflow("matrix product"))?;
            }
        }
        Ok(Matrix2(out))
    }

    pub fn inverse(&self) -> Matrix2 {
        let [[a, b], [c, d]] = self.0;
        let det = self.det();
        Matrix2([[d * det, -b * det], [-c * det, a * det]])
    }

    pub fn pow(&self, n: i64) -> Result<Matrix2> {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut k = n.unsigned_abs();
        let mut acc = Matrix2::IDENTITY;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Largest eigenvalue modulus, from the characteristic polynomial.
    pub fn spectral_radius(&self) -> f64 {
        let (mu, _) = self.eigen_pair();
        mu.abs()
    }

    /// Dominant eigenvalue μ (real when |trace| > 2) and the other one.
    pub fn eigen_pair(&self) -> (f64, f64) {
        let t = self.trace() as f64;
        let d = self.det() as f64;
        let disc = t * t - 4.0 * d;
        if disc < 0.0 {
            let r = d.abs().sqrt();
            return (r, r);
        }
        let s = disc.sqrt();
        // stable quadratic formula
        let big = if t >= 0.0 { (t + s) / 2.0 } else { (t - s) / 2.0 };
        let small = if big != 0.0 { d / big } else { 0.0 };
        (big, small)
    }

    pub fn sub_identity(&self) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.0;
        [[a - 1, b], [c, d - 1]]
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        let m = self.0;
        [
            [m[0][0] as f64, m[0][1] as f64],
            [m[1][0] as f64, m[1][1] as f64],
        ]
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        write!(f, "[[{},{}],[{},{}]]", m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

/// (x, y) ↦ (α x^a y^b, β x^c y^d)
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialOver<K> {
    pub matrix: Matrix2,
    pub twist: [K; 2],
}

/// (x, y) ↦ (y, p(y) − δx); the inverse flag selects ((p(x) − y)/δ, x).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorOver<K> {
    pub poly: Vec<K>,
    pub delta: K,
    pub inverse: bool,
}

/// Factors are applied in list order.
#[derive(Clone, Debug, PartialEq)]
pub struct HenonOver<K> {
    pub factors: Vec<FactorOver<K>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "sx")]
    Sx,
    #[serde(rename = "sy")]
    Sy,
    #[serde(rename = "sz")]
    Sz,
    #[serde(rename = "pxy")]
    Pxy,
    #[serde(rename = "pyz")]
    Pyz,
}

/// Letters are applied first to last.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovOver<K> {
    pub d: K,
    pub letters: Vec<Generator>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AutoOver<K> {
    Monomial(MonomialOver<K>),
    Henon(HenonOver<K>),
    Markov(MarkovOver<K>),
}

pub type MonomialAuto = MonomialOver<Q>;
pub type HenonFactor = FactorOver<Q>;
pub type HenonComposition = HenonOver<Q>;
pub type MarkovWord = MarkovOver<Q>;
pub type SurfaceAutomorphism = AutoOver<Q>;
pub type HenonFamily = HenonOver<RatFunc>;

#[derive(Clone, Debug, PartialEq)]
pub enum Surface {
    Torus,
    Plane,
    Markov(Q),
}

impl Surface {
    pub fn dim(&self) -> usize {
        match self {
            Surface::Markov(_) => 3,
            _ => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Surface::Torus => "torus".into(),
            Surface::Plane => "plane".into(),
            Surface::Markov(d) => format!("markov(D={d})"),
        }
    }
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::Sx,
        Generator::Sy,
        Generator::Sz,
        Generator::Pxy,
        Generator::Pyz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Sx => "sx",
            Generator::Sy => "sy",
            Generator::Sz => "sz",
            Generator::Pxy => "pxy",
            Generator::Pyz => "pyz",
        }
    }

    pub fn from_name(s: &str) -> Option<Generator> {
        Generator::ALL.into_iter().find(|g| g.name() == s)
    }

    /// Monomial lift m_g with c∘m_g = g∘c for c(u,v) = (u+1/u, v+1/v, uv+1/(uv)).
    pub fn cover_matrix(&self) -> Matrix2 {
        Matrix2(match self {
            Generator::Sz => [[1, 0], [0, -1]],
            Generator::Sx => [[-1, -2], [0, 1]],
            Generator::Sy => [[1, 0], [-2, -1]],
            Generator::Pxy => [[0, 1], [1, 0]],
            Generator::Pyz => [[-1, 0], [1, 1]],
        })
    }

    pub fn apply<S: Scalar>(&self, p: &[S; 3], d: &S) -> [S; 3] {
        let [x, y, z] = p.clone();
        match self {
            Generator::Sx => [S::vieta_flip(&y, &z, &x, d), y, z],
            Generator::Sy => {
                let ny = S::vieta_flip(&x, &z, &y, d);
                [x, ny, z]
            }
            Generator::Sz => {
                let nz = S::vieta_flip(&x, &y, &z, d);
                [x, y, nz]
            }
            Generator::Pxy => [y, x, z],
            Generator::Pyz => [x, z, y],
        }
    }

    /// Jacobian of the generator at p (using the polynomial form of the flip).
    pub fn jacobian(&self, p: &[Complex64; 3]) -> [[Complex64; 3]; 3] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let [x, y, z] = *p;
        match self {
            Generator::Sx => [[-l, z, y], [o, l, o], [o, o, l]],
            Generator::Sy => [[l, o, o], [z, -l, x], [o, o, l]],
            Generator::Sz => [[l, o, o], [o, l, o], [y, x, -l]],
            Generator::Pxy => [[o, l, o], [l, o, o], [o, o, l]],
            Generator::Pyz => [[l, o, o], [o, o, l], [o, l, o]],
        }
    }
}

impl<K: Scalar> FactorOver<K> {
    pub fn degree(&self) -> usize {
        self.poly
            .iter()
            .rposition(|c| !c.is_zero_value())
            .unwrap_or(0)
    }

    pub fn leading(&self) -> K {
        self.poly[self.degree()].clone()
    }

    pub fn apply<S: Scalar>(&self, x: S, y: S, conv: &impl Fn(&K) -> S) -> (S, S) {
        let p = |v: &S| {
            let mut acc = S::zero_value();
            for c in self.poly.iter().rev() {
                acc = acc * v.clone() + conv(c);
            }
            acc
        };
        if self.inverse {
            let nx = (p(&x) - y) / conv(&self.delta);
            (nx, x)
        } else {
            let ny = p(&y) - conv(&self.delta) * x;
            (y, ny)
        }
    }

    pub fn inverted(&self) -> Self {
        FactorOver {
            poly: self.poly.clone(),
            delta: self.delta.clone(),
            inverse: !self.inverse,
        }
    }
}

impl<K: Scalar> HenonOver<K> {
    pub fn apply<S: Scalar>(&self, mut x: S, mut y: S, conv: &impl Fn(&K) -> S) -> (S, S) {
        for f in &self.factors {
            (x, y) = f.apply(x, y, conv);
        }
        (x, y)
    }

    pub fn inverse(&self) -> Self {
        HenonOver {
            factors: self.factors.iter().rev().map(|f| f.inverted()).collect(),
        }
    }

    pub fn all_forward(&self) -> bool {
        self.factors.iter().all(|f| !f.inverse)
    }

    pub fn all_inverse(&self) -> bool {
        self.factors.iter().all(|f| f.inverse)
    }

    pub fn degree_product(&self) -> f64 {
        self.factors.iter().map(|f| f.degree() as f64).product()
    }
}

impl<K> AutoOver<K> {
    pub fn family(&self) -> &'static str {
        match self {
            AutoOver::Monomial(_) => "monomial",
            AutoOver::Henon(_) => "henon",
            AutoOver::Markov(_) => "markov",
        }
    }
}

impl<K: Scalar + PartialEq> AutoOver<K> {
    pub fn dim(&self) -> usize {
        match self {
            AutoOver::Markov(_) => 3,
            _ => 2,
        }
    }

    /// Evaluates with coefficients converted into the point's field.
    pub fn apply<S: Scalar>(&self, p: &[S], conv: &impl Fn(&K) -> S) -> Result<Vec<S>> {
        match self {
            AutoOver::Monomial(m) => {
                if p.iter().any(|c| c.is_zero_value()) {
                    return Err(Error::ZeroCoordinate);
                }
                let [[a, b], [c, d]] = m.matrix.0;
                let x = &p[0];
                let y = &p[1];
                Ok(vec![
                    conv(&m.twist[0]) * x.powi_value(a) * y.powi_value(b),
                    conv(&m.twist[1]) * x.powi_value(c) * y.powi_value(d),
                ])
            }
            AutoOver::Henon(h) => {
                let (x, y) = h.apply(p[0].clone(), p[1].clone(), conv);
                Ok(vec![x, y])
            }
            AutoOver::Markov(w) => {
                let d = conv(&w.d);
                let mut q = [p[0].clone(), p[1].clone(), p[2].clone()];
                for g in &w.letters {
                    q = g.apply(&q, &d);
                }
                Ok(q.to_vec())
            }
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            AutoOver::Monomial(m) => {
                let inv = m.matrix.inverse();
                let [[a, b], [c, d]] = inv.0;
                let [al, be] = &m.twist;
                let tw = [
                    al.powi_value(-a) * be.powi_value(-b),
                    al.powi_value(-c) * be.powi_value(-d),
                ];
                AutoOver::Monomial(MonomialOver {
                    matrix: inv,
                    twist: tw,
                })
            }
            AutoOver::Henon(h) => AutoOver::Henon(h.inverse()),
            AutoOver::Markov(w) => AutoOver::Markov(MarkovOver {
                d: w.d.clone(),
                letters: w.letters.iter().rev().copied().collect(),
            }),
        }
    }

    /// a∘b: apply b first.
    pub fn compose(&self, b: &Self) -> Result<Self> {
        match (self, b) {
            (AutoOver::Monomial(f), AutoOver::Monomial(g)) => {
                let [[a1, b1], [c1, d1]] = f.matrix.0;
                let [al, be] = &g.twist;
                let tw = [
                    f.twist[0].clone() * al.powi_value(a1) * be.powi_value(b1),
                    f.twist[1].clone() * al.powi_value(c1) * be.powi_value(d1),
                ];
                Ok(AutoOver::Monomial(MonomialOver {
                    matrix: f.matrix.mul(&g.matrix)?,
                    twist: tw,
                }))
            }
            (AutoOver::Henon(f), AutoOver::Henon(g)) => {
                let mut factors = g.factors.clone();
                factors.extend(f.factors.iter().cloned());
                Ok(AutoOver::Henon(HenonOver { factors }))
            }
            (AutoOver::Markov(f), AutoOver::Markov(g)) => {
                if f.d != g.d {
                    return Err(Error::SurfaceMismatch(
                        "Markov words on surfaces with different D".into(),
                    ));
                }
                let mut letters = g.letters.clone();
                letters.extend(f.letters.iter().copied());
                Ok(AutoOver::Markov(MarkovOver {
                    d: f.d.clone(),
                    letters,
                }))
            }
            _ => Err(Error::SurfaceMismatch(format!(
                "cannot compose {} with {}",
                self.family(),
                b.family()
            ))),
        }
    }

    pub fn identity_like(&self) -> Self {
        match self {
            AutoOver::Monomial(_) => AutoOver::Monomial(MonomialOver {
                matrix: Matrix2::IDENTITY,
                twist: [K::one_value(), K::one_value()],
            }),
            AutoOver::Henon(_) => AutoOver::Henon(HenonOver { factors: vec![] }),
            AutoOver::Markov(w) => AutoOver::Markov(MarkovOver {
                d: w.d.clone(),
                letters: vec![],
            }),
        }
    }

    pub fn iterate(&self, n: i64) -> Result<Self> {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let k = n.unsigned_abs();
        if let AutoOver::Monomial(_) = self {
            let mut acc = self.identity_like();
            let mut b = base;
            let mut e = k;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc.compose(&b)?;
                }
                e >>= 1;
                if e > 0 {
                    b = b.compose(&b)?;
                }
            }
            return Ok(acc);
        }
        let mut acc = self.identity_like();
        for _ in 0..k {
            acc = acc.compose(&base)?;
        }
        Ok(acc)
    }

    pub fn map_coeffs<L>(&self, f: &impl Fn(&K) -> L) -> AutoOver<L> {
        match self {
            AutoOver::Monomial(m) => AutoOver::Monomial(MonomialOver {
                matrix: m.matrix,
                twist: [f(&m.twist[0]), f(&m.twist[1])],
            }),
            AutoOver::Henon(h) => AutoOver::Henon(HenonOver {
                factors: h
                    .factors
                    .iter()
                    .map(|fa| FactorOver {
                        poly: fa.poly.iter().map(f).collect(),
                        delta: f(&fa.delta),
                        inverse: fa.inverse,
                    })
                    .collect(),
            }),
            AutoOver::Markov(w) => AutoOver::Markov(MarkovOver {
                d: f(&w.d),
                letters: w.letters.clone(),
            }),
        }
    }
}

/// Matrix of a Markov word under the cover correspondence: M_{g_k} ⋯ M_{g_1}.
pub fn word_matrix(letters: &[Generator]) -> Result<Matrix2> {
    let mut m = Matrix2::IDENTITY;
    for g in letters {
        m = g.cover_matrix().mul(&m)?;
    }
    Ok(m)
}

impl SurfaceAutomorphism {
    pub fn surface(&self) -> Surface {
        match self {
            AutoOver::Monomial(_) => Surface::Torus,
            AutoOver::Henon(_) => Surface::Plane,
            AutoOver::Markov(w) => Surface::Markov(w.d.clone()),
        }
    }

    pub fn dynamical_degree(&self) -> f64 {
        match self {
            AutoOver::Monomial(m) => m.matrix.spectral_radius(),
            AutoOver::Henon(h) => henon_degree(h),
            AutoOver::Markov(w) => match word_matrix(&w.letters) {
                Ok(m) => m.spectral_radius(),
                Err(_) => f64::INFINITY,
            },
        }
    }

    pub fn is_loxodromic(&self) -> bool {
        self.dynamical_degree() > 1.0 + LOXODROMIC_EPS
    }

    pub fn to_numeric(&self) -> NumericMap {
        NumericMap {
            map: self.map_coeffs(&|q: &Q| Complex64::new(rational::to_f64(q), 0.0)),
            lambda1: self.dynamical_degree(),
        }
    }

    pub fn eval(&self, pt: &Point) -> Result<Point> {
        let s = self.surface();
        if pt.surface != s {
            return Err(Error::SurfaceMismatch(format!(
                "point on {} but map acts on {}",
                pt.surface.name(),
                s.name()
            )));
        }
        pt.check()?;
        let coords = match &pt.coords {
            Coords::Rational(v) => Coords::Rational(self.apply(v, &|q: &Q| q.clone())?),
            Coords::Complex(v) => Coords::Complex(self.apply(v, &|q: &Q| {
                Complex64::new(rational::to_f64(q), 0.0)
            })?),
            Coords::Function(v) => {
                Coords::Function(self.apply(v, &|q: &Q| RatFunc::constant(q.clone()))?)
            }
            Coords::Quadratic(v) => Coords::Quadratic(
                self.apply(v, &|q: &Q| crate::arith::Quadratic::rational(q.clone()))?,
            ),
        };
        Ok(Point {
            surface: s,
            coords,
        })
    }
}

/// Hénon composition with one integer factor degree per factor, all forward.
pub fn henon(factors: &[(&[i64], i64)]) -> SurfaceAutomorphism {
    AutoOver::Henon(HenonOver {
        factors: factors
            .iter()
            .map(|(p, d)| FactorOver {
                poly: p.iter().map(|&c| rational::int(c)).collect(),
                delta: rational::int(*d),
                inverse: false,
            })
            .collect(),
    })
}

pub fn monomial(m: [[i64; 2]; 2]) -> Result<SurfaceAutomorphism> {
    Ok(AutoOver::Monomial(MonomialOver {
        matrix: Matrix2::new(m)?,
        twist: [Q::one(), Q::one()],
    }))
}

pub fn markov(d: Q, letters: &[Generator]) -> SurfaceAutomorphism {
    AutoOver::Markov(MarkovOver {
        d,
        letters: letters.to_vec(),
    })
}

/// A numeric (complex-coefficient) map with its dynamical degree carried alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericMap {
    pub map: AutoOver<Complex64>,
    pub lambda1: f64,
}

impl NumericMap {
    pub fn eval<S: NumScalar>(&self, p: &[S]) -> Result<Vec<S>> {
        self.map.apply(p, &|c: &Complex64| S::from_c(*c))
    }

    pub fn inverse(&self) -> NumericMap {
        NumericMap {
            map: self.map.inverse(),
            lambda1: self.lambda1,
        }
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Jacobian of the full map at p.
    pub fn jacobian(&self, p: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        match &self.map {
            AutoOver::Monomial(m) => {
                let img = self.eval(p)?;
                let [[a, b], [c, d]] = m.matrix.0;
                Ok(vec![
                    vec![img[0] * (a as f64) / p[0], img[0] * (b as f64) / p[1]],
                    vec![img[1] * (c as f64) / p[0], img[1] * (d as f64) / p[1]],
                ])
            }
            AutoOver::Henon(h) => {
                let mut j = vec![vec![l, o], vec![o, l]];
                let (mut x, mut y) = (p[0], p[1]);
                for f in &h.factors {
                    let dp = poly::eval_in(&poly::derivative(&f.poly), if f.inverse { &x } else { &y });
                    let step = if f.inverse {
                        vec![vec![dp / f.delta, -l / f.delta], vec![l, o]]
                    } else {
                        vec![vec![o, l], vec![-f.delta, dp]]
                    };
                    j = crate::arith::linalg::complex_mat_mul(&step, &j);
                    (x, y) = f.apply(x, y, &|c: &Complex64| *c);
                }
                Ok(j)
            }
            AutoOver::Markov(w) => {
                let mut j = vec![vec![l, o, o], vec![o, l, o], vec![o, o, l]];
                let mut q = [p[0], p[1], p[2]];
                for g in &w.letters {
                    let s = g.jacobian(&q);
                    let sv: Vec<Vec<Complex64>> = s.iter().map(|r| r.to_vec()).collect();
                    j = crate::arith::linalg::complex_mat_mul(&sv, &j);
                    q = g.apply(&q, &w.d);
                }
                Ok(j)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coords {
    Complex(Vec<Complex64>),
    Rational(Vec<Q>),
    Function(Vec<RatFunc>),
    Quadratic(Vec<crate::arith::Quadratic>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub surface: Surface,
    pub coords: Coords,
}

impl Point {
    pub fn rational(surface: Surface, v: Vec<Q>) -> Self {
        Point {
            surface,
            coords: Coords::Rational(v),
        }
    }

    pub fn complex(surface: Surface, v: Vec<Complex64>) -> Self {
        Point {
            surface,
            coords: Coords::Complex(v),
        }
    }

    pub fn len(&self) -> usize {
        match &self.coords {
            Coords::Complex(v) => v.len(),
            Coords::Rational(v) => v.len(),
            Coords::Function(v) => v.len(),
            Coords::Quadratic(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match &self.coords {
            Coords::Complex(v) => v.clone(),
            Coords::Rational(v) => v
                .iter()
                .map(|q| Complex64::new(rational::to_f64(q), 0.0))
                .collect(),
            Coords::Quadratic(v) => v.iter().map(|q| q.embed(1.0)).collect(),
            Coords::Function(v) => v
                .iter()
                .map(|f| f.eval_complex(Complex64::new(1.0, 0.0)).unwrap_or(Complex64::new(f64::NAN, 0.0)))
                .collect(),
        }
    }

    /// Dimension and Markov-equation checks.
    pub fn check(&self) -> Result<()> {
        if self.len() != self.surface.dim() {
            return Err(Error::BadPoint(format!(
                "expected {} coordinates on {}, got {}",
                self.surface.dim(),
                self.surface.name(),
                self.len()
            )));
        }
        let Surface::Markov(d) = &self.surface else {
            return Ok(());
        };
        match &self.coords {
            Coords::Rational(v) => {
                let r = markov_residual(&v[0], &v[1], &v[2], d);
                if !r.is_zero() {
                    return Err(Error::OffSurface {
                        residual: rational::to_f64(&r.abs()),
                    });
                }
            }
            Coords::Quadratic(v) => {
                let dq = crate::arith::Quadratic::rational(d.clone());
                let r = markov_residual(&v[0], &v[1], &v[2], &dq);
                if !r.is_zero_value() {
                    return Err(Error::OffSurface {
                        residual: r.embed(1.0).norm(),
                    });
                }
            }
            Coords::Function(v) => {
                let r = markov_residual(&v[0], &v[1], &v[2], &RatFunc::constant(d.clone()));
                if !r.is_zero() {
                    return Err(Error::OffSurface { residual: f64::NAN });
                }
            }
            Coords::Complex(v) => {
                let dc = Complex64::new(rational::to_f64(d), 0.0);
                let rel = markov_relative_residual(&[v[0], v[1], v[2]], dc);
                if rel > SURFACE_TOL {
                    return Err(Error::OffSurface { residual: rel });
                }
            }
        }
        Ok(())
    }
}

pub fn markov_residual<S: Scalar>(x: &S, y: &S, z: &S, d: &S) -> S {
    x.clone() * x.clone() + y.clone() * y.clone() + z.clone() * z.clone()
        - x.clone() * y.clone() * z.clone()
        - d.clone()
}

/// Surface residual scaled by the size of the terms.
pub fn markov_relative_residual(p: &[Complex64; 3], d: Complex64) -> f64 {
    let [x, y, z] = *p;
    let r = markov_residual(&x, &y, &z, &d).norm();
    let scale = 1.0 + (x * x).norm() + (y * y).norm() + (z * z).norm() + (x * y * z).norm() + d.norm();
    r / scale
}

// ---- dynamical degree of Hénon words by reduction in the amalgamated product ----

/// Affine map v ↦ m v + t, or elementary map (x,y) ↦ (a x + q(y), b y + c).
#[derive(Clone, Debug, PartialEq)]
enum Piece {
    Aff { m: [[Q; 2]; 2], t: [Q; 2] },
    Ele { a: Q, q: QPoly, b: Q, c: Q },
}

impl Piece {
    fn tau() -> Piece {
        let (z, o) = (Q::zero(), Q::one());
        Piece::Aff {
            m: [[z.clone(), o.clone()], [o, z.clone()]],
            t: [z.clone(), z],
        }
    }

    /// Demotes elementary maps of degree ≤ 1 to affine maps.
    fn normalize(self) -> Piece {
        match self {
            Piece::Ele { a, q, b, c } if poly::degree(&q).map_or(true, |d| d <= 1) => {
                let q0 = q.first().cloned().unwrap_or_else(Q::zero);
                let q1 = q.get(1).cloned().unwrap_or_else(Q::zero);
                Piece::Aff {
                    m: [[a, q1], [Q::zero(), b]],
                    t: [q0, c],
                }
            }
            p => p,
        }
    }

    fn in_intersection(&self) -> bool {
        match self {
            Piece::Aff { m, .. } => m[1][0].is_zero(),
            Piece::Ele { .. } => false,
        }
    }

    fn as_ele(&self) -> Option<(Q, QPoly, Q, Q)> {
        match self {
            Piece::Ele { a, q, b, c } => Some((a.clone(), q.clone(), b.clone(), c.clone())),
            Piece::Aff { m, t } if m[1][0].is_zero() => {
                let mut q = vec![t[0].clone(), m[0][1].clone()];
                poly::trim(&mut q);
                Some((m[0][0].clone(), q, m[1][1].clone(), t[1].clone()))
            }
            _ => None,
        }
    }

    fn degree(&self) -> usize {
        match self {
            Piece::Ele { q, .. } => poly::degree(q).unwrap_or(0),
            Piece::Aff { .. } => 1,
        }
    }
}

/// `first` then `second`, if both lie in a common factor group.
fn merge(first: &Piece, second: &Piece) -> Option<Piece> {
    match (first, second) {
        (Piece::Aff { m: m1, t: t1 }, Piece::Aff { m: m2, t: t2 }) => {
            let mut m = [[Q::zero(), Q::zero()], [Q::zero(), Q::zero()]];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = &m2[i][0] * &m1[0][j] + &m2[i][1] * &m1[1][j];
                }
            }
            let t = [
                &m2[0][0] * &t1[0] + &m2[0][1] * &t1[1] + &t2[0],
                &m2[1][0] * &t1[0] + &m2[1][1] * &t1[1] + &t2[1],
            ];
            Some(Piece::Aff { m, t })
        }
        _ => {
            let is_ele = |p: &Piece| matches!(p, Piece::Ele { .. });
            if !(is_ele(first) || is_ele(second)) {
                return None;
            }
            let (a1, q1, b1, c1) = first.as_ele()?;
            let (a2, q2, b2, c2) = second.as_ele()?;
            // (a2(a1 x + q1(y)) + q2(b1 y + c1), b2(b1 y + c1) + c2)
            let lin = vec![c1.clone(), b1.clone()];
            let mut q2l: QPoly = Vec::new();
            for c in q2.iter().rev() {
                q2l = poly::add(&poly::mul(&q2l, &lin), &[c.clone()]);
            }
            let q = poly::add(&poly::scale(&q1, &a2), &q2l);
            Some(
                Piece::Ele {
                    a: &a2 * &a1,
                    q,
                    b: &b2 * &b1,
                    c: &b2 * &c1 + &c2,
                }
                .normalize(),
            )
        }
    }
}

fn reduce_linear(mut w: Vec<Piece>) -> Vec<Piece> {
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < w.len() {
            if let Some(p) = merge(&w[i], &w[i + 1]) {
                w[i] = p;
                w.remove(i + 1);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            return w;
        }
    }
}

fn henon_pieces(h: &HenonComposition) -> Vec<Piece> {
    let mut w = Vec::new();
    for f in &h.factors {
        if f.inverse {
            // h⁻¹ = E⁻¹∘τ with E⁻¹(x,y) = ((p(y) − x)/δ, y)
            let inv = Q::one() / &f.delta;
            w.push(Piece::tau());
            w.push(
                Piece::Ele {
                    a: -inv.clone(),
                    q: poly::scale(&f.poly, &inv),
                    b: Q::one(),
                    c: Q::zero(),
                }
                .normalize(),
            );
        } else {
            // h = τ∘E with E(x,y) = (p(y) − δx, y)
            w.push(
                Piece::Ele {
                    a: -f.delta.clone(),
                    q: f.poly.clone(),
                    b: Q::one(),
                    c: Q::zero(),
                }
                .normalize(),
            );
            w.push(Piece::tau());
        }
    }
    w
}

fn henon_degree(h: &HenonComposition) -> f64 {
    let mut w = reduce_linear(henon_pieces(h));
    // cyclic reduction: conjugate by the first piece until the ends no longer merge
    for _ in 0..=w.len() {
        if w.len() < 2 {
            break;
        }
        match merge(&w[w.len() - 1], &w[0]) {
            Some(p) => {
                let n = w.len();
                w[n - 1] = p;
                w.remove(0);
                w = reduce_linear(w);
            }
            None => break,
        }
    }
    let has_affine = w
        .iter()
        .any(|p| matches!(p, Piece::Aff { .. }) && !p.in_intersection());
    let has_ele = w.iter().any(|p| matches!(p, Piece::Ele { .. }));
    if !(has_affine && has_ele) {
        return 1.0;
    }
    w.iter()
        .filter(|p| matches!(p, Piece::Ele { .. }))
        .map(|p| p.degree() as f64)
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::{frac, int};

    fn r(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn henon_examples() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let id = |q: &Q| q.clone();
        assert_eq!(f.apply(&r(&[0, 0]), &id).unwrap(), r(&[0, 0]));
        assert_eq!(f.apply(&r(&[1, 0]), &id).unwrap(), r(&[0, -1]));
        let g = f.inverse();
        assert_eq!(g.apply(&r(&[0, -1]), &id).unwrap(), r(&[1, 0]));
    }

    #[test]
    fn vieta_example() {
        let w = markov(int(0), &[Generator::Sz]);
        let img = w.apply(&r(&[3, 3, 3]), &|q: &Q| q.clone()).unwrap();
        assert_eq!(img, r(&[3, 3, 6]));
    }

    #[test]
    fn monomial_iterate_and_degree() {
        let f = monomial([[2, 1], [1, 1]]).unwrap();
        let AutoOver::Monomial(m2) = f.iterate(2).unwrap() else { panic!() };
        assert_eq!(m2.matrix.0, [[5, 3], [3, 2]]);
        let l = f.dynamical_degree();
        assert!((l - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(f.is_loxodromic());
        assert!(!monomial([[1, 1], [0, 1]]).unwrap().is_loxodromic());
        assert!(matches!(monomial([[2, 0], [0, 1]]), Err(Error::NonUnimodular(_))));
    }

    #[test]
    fn monomial_twisted_roundtrip() {
        let f = AutoOver::Monomial(MonomialOver {
            matrix: Matrix2::new([[3, 2], [1, 1]]).unwrap(),
            twist: [frac(2, 3), frac(-5, 7)],
        });
        let p = vec![frac(3, 2), frac(-1, 4)];
        let id = |q: &Q| q.clone();
        let img = f.apply(&p, &id).unwrap();
        assert_eq!(f.inverse().apply(&img, &id).unwrap(), p);
        let ff = f.compose(&f).unwrap();
        assert_eq!(ff.apply(&p, &id).unwrap(), f.apply(&img, &id).unwrap());
    }

    #[test]
    fn henon_degrees() {
        let f = henon(&[(&[0, 0, 1], 1), (&[1, 0, 0, 2], 3)]);
        assert_eq!(f.dynamical_degree(), 6.0);
        assert_eq!(f.inverse().dynamical_degree(), 6.0);
        let id = f.compose(&f.inverse()).unwrap();
        assert_eq!(id.dynamical_degree(), 1.0);
        assert_eq!(f.iterate(0).unwrap().dynamical_degree(), 1.0);
        // h1 ∘ h2⁻¹ with different polynomials still mixes
        let AutoOver::Henon(h) = &f else { panic!() };
        let mixed = AutoOver::Henon(HenonOver {
            factors: vec![h.factors[0].clone(), h.factors[1].inverted()],
        });
        // h2⁻¹∘h1 collapses to a single elementary map
        assert_eq!(mixed.dynamical_degree(), 1.0);
    }

    #[test]
    fn conjugation_preserves_degree() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let g = henon(&[(&[1, 0, 0, 1], 2)]);
        let c = f.compose(&g).unwrap().compose(&f.inverse()).unwrap();
        assert_eq!(c.dynamical_degree(), 3.0);
    }

    #[test]
    fn markov_word_degrees() {
        let w = markov(int(0), &[Generator::Sz, Generator::Pxy]);
        assert!((w.dynamical_degree() - 1.0).abs() < 1e-12);
        let w = markov(int(0), &[Generator::Sx, Generator::Sy]);
        assert!(!w.is_loxodromic());
        let w = markov(int(0), &[Generator::Sx, Generator::Sy, Generator::Sz]);
        assert!((w.dynamical_degree() - (2.0 + 5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn cover_compatibility_of_generators() {
        let c = |u: Complex64, v: Complex64| [u + 1.0 / u, v + 1.0 / v, u * v + 1.0 / (u * v)];
        let u = Complex64::from_polar(1.3, 0.7);
        let v = Complex64::from_polar(0.6, -2.1);
        // the cover lands on the Cayley cubic D = 4
        let d = Complex64::new(4.0, 0.0);
        for g in Generator::ALL {
            let [[a, b], [cc, dd]] = g.cover_matrix().0;
            let mu = u.powi(a as i32) * v.powi(b as i32);
            let mv = u.powi(cc as i32) * v.powi(dd as i32);
            let lhs = c(mu, mv);
            let rhs = g.apply(&c(u, v), &d);
            for k in 0..3 {
                assert!((lhs[k] - rhs[k]).norm() < 1e-9 * (1.0 + lhs[k].norm()), "{g:?}");
            }
        }
    }

    #[test]
    fn surface_checks() {
        let p = Point::rational(Surface::Markov(int(0)), r(&[3, 3, 3]));
        assert!(p.check().is_ok());
        let bad = Point::rational(Surface::Markov(int(0)), r(&[1, 1, 1]));
        assert!(matches!(bad.check(), Err(Error::OffSurface { .. })));
        let f = henon(&[(&[0, 0, 1], 1)]);
        assert!(matches!(f.eval(&p), Err(Error::SurfaceMismatch(_))));
        let t = monomial([[2, 1], [1, 1]]).unwrap();
        let z = Point::rational(Surface::Torus, r(&[0, 1]));
        assert_eq!(t.eval(&z), Err(Error::ZeroCoordinate));
    }

    #[test]
    fn numeric_jacobian_matches_differences() {
        let f = henon(&[(&[0, 0, 1], 1), (&[1, 0, 0, 2], 3)]).to_numeric();
        let p = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4)];
        let j = f.jacobian(&p).unwrap();
        let h = 1e-6;
        for col in 0..2 {
            let mut q = p;
            q[col] += h;
            let a = f.eval(&q).unwrap();
            let b = f.eval(&p).unwrap();
            for row in 0..2 {
                let fd = (a[row] - b[row]) / h;
                assert!((fd - j[row][col]).norm() < 1e-4);
            }
        }
    }
}
