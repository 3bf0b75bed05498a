//! Local Green functions G⁺, G⁻ and G = (G⁺ + G⁻)/2 at archimedean and
//! non-archimedean places, by the Tate limit λ⁻ⁿ log⁺‖fⁿ‖ with a tail bound.

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::rational::{self, Q};
use crate::arith::{RatFunc, Scalar, WideComplex};
use crate::error::{Error, Result};
use crate::maps::{AutoOver, FactorOver, HenonOver, Matrix2, NumericMap, SurfaceAutomorphism};
use crate::picard_manin;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TateLimitConfig {
    pub n_max: usize,
    pub tol: f64,
    pub escape_radius: f64,
    /// Optional a-priori lower bound for the increment constant K.
    pub tail_constant: Option<f64>,
    /// Bit-size cap for exact orbit iteration.
    pub size_cap: u64,
}

impl Default for TateLimitConfig {
    fn default() -> Self {
        TateLimitConfig {
            n_max: 200,
            tol: 1e-10,
            escape_radius: 1e6,
            tail_constant: None,
            size_cap: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreenStatus {
    Converged,
    /// Escaped but the tail could not be certified within n_max (non-convergence).
    Escaped,
    BoundedOrbit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenEvaluation {
    pub value: f64,
    pub error_bound: f64,
    pub n_used: usize,
    pub status: GreenStatus,
}

impl GreenEvaluation {
    pub fn exact(value: f64, status: GreenStatus) -> Self {
        GreenEvaluation {
            value,
            error_bound: 0.0,
            n_used: 0,
            status,
        }
    }

    pub fn is_nonconvergent(&self) -> bool {
        !self.error_bound.is_finite()
    }

    pub fn scaled(&self, k: f64) -> Self {
        GreenEvaluation {
            value: self.value * k,
            error_bound: self.error_bound * k.abs(),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p")]
pub enum Place {
    #[serde(rename = "archimedean")]
    Archimedean,
    #[serde(rename = "p-adic")]
    Prime(u64),
    #[serde(rename = "gauss")]
    Gauss(u64),
    #[serde(rename = "t-adic")]
    TAdic,
    #[serde(rename = "inf-adic")]
    InfAdic,
}

impl Place {
    /// ln of the base of the absolute value: |x|_v = exp(−v(x)·weight).
    pub fn log_base(&self) -> f64 {
        match self {
            Place::Prime(p) | Place::Gauss(p) => (*p as f64).ln(),
            _ => 1.0,
        }
    }
}

/// Runs the Tate limit on the sequence L_k = log‖fᵏ(x)‖ supplied by `next`.
pub fn tate_limit(
    lambda: f64,
    cfg: &TateLimitConfig,
    mut next: impl FnMut(usize) -> Option<f64>,
) -> GreenEvaluation {
    let ln_r = cfg.escape_radius.ln();
    let Some(l0) = next(0) else {
        return GreenEvaluation {
            value: 0.0,
            error_bound: f64::INFINITY,
            n_used: 0,
            status: GreenStatus::Escaped,
        };
    };
    let mut lp = l0.max(0.0);
    let mut scale = 1.0; // λ^{-k}
    let mut g = lp;
    let mut escape_start: Option<usize> = (l0 > ln_r).then_some(0);
    let mut raw_incs: Vec<f64> = Vec::new();
    let mut n = 0;
    while n < cfg.n_max {
        let Some(l) = next(n + 1) else { break };
        if l.is_nan() {
            return GreenEvaluation {
                value: g,
                error_bound: f64::INFINITY,
                n_used: n,
                status: GreenStatus::Escaped,
            };
        }
        let lnext = l.max(0.0);
        raw_incs.push((lnext - lambda * lp).abs());
        scale /= lambda;
        g = scale * lnext;
        lp = lnext;
        n += 1;
        if l > ln_r {
            escape_start.get_or_insert(n);
        } else {
            escape_start = None;
        }
        if let Some(s) = escape_start {
            if n >= s + 5 {
                let mut k = 2.0 * raw_incs[n - 5..n].iter().fold(0.0f64, |a, &b| a.max(b));
                if let Some(c) = cfg.tail_constant {
                    k = k.max(c);
                }
                let tail = k * scale / lambda / (1.0 - 1.0 / lambda);
                let roundoff = 8.0 * f64::EPSILON * (n as f64 + 1.0) * g.max(1.0);
                let err = tail + roundoff;
                if err <= cfg.tol {
                    return GreenEvaluation {
                        value: g,
                        error_bound: err,
                        n_used: n,
                        status: GreenStatus::Converged,
                    };
                }
            }
        }
    }
    if escape_start.is_some() || g > cfg.tol {
        GreenEvaluation {
            value: g,
            error_bound: f64::INFINITY,
            n_used: n,
            status: GreenStatus::Escaped,
        }
    } else {
        let c = cfg.tail_constant.unwrap_or(0.0);
        GreenEvaluation {
            value: g,
            error_bound: scale * (ln_r + c + 1.0) * lambda / (lambda - 1.0),
            n_used: n,
            status: GreenStatus::BoundedOrbit,
        }
    }
}

fn lognorm(v: &[WideComplex]) -> f64 {
    v.iter().map(|z| z.ln_abs()).fold(f64::NEG_INFINITY, f64::max)
}

/// Log-absolute-value dynamics ℓ ↦ Aℓ + τ of a monomial map; the norm is |ℓ₁| + |ℓ₂|.
fn monomial_limit(a: &Matrix2, tau: [f64; 2], ell: [f64; 2], lambda: f64, cfg: &TateLimitConfig) -> GreenEvaluation {
    let m = a.to_f64();
    let mut l = ell;
    tate_limit(lambda, cfg, |k| {
        if k > 0 {
            l = [
                m[0][0] * l[0] + m[0][1] * l[1] + tau[0],
                m[1][0] * l[0] + m[1][1] * l[1] + tau[1],
            ];
        }
        Some(l[0].abs() + l[1].abs())
    })
}

/// G⁺ at the archimedean place.
pub fn green_plus_arch(map: &NumericMap, pt: &[Complex64], cfg: &TateLimitConfig) -> Result<GreenEvaluation> {
    if pt.len() != map.dim() {
        return Err(Error::BadPoint(format!("expected {} coordinates", map.dim())));
    }
    if pt.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::BadPoint("non-finite coordinate".into()));
    }
    let lambda = map.lambda1;
    if lambda <= 1.0 + crate::maps::LOXODROMIC_EPS {
        return Err(Error::NotLoxodromic(lambda));
    }
    match &map.map {
        AutoOver::Monomial(m) => {
            if pt.iter().any(|z| z.norm() == 0.0) {
                return Err(Error::ZeroCoordinate);
            }
            let tau = [m.twist[0].norm().ln(), m.twist[1].norm().ln()];
            let ell = [pt[0].norm().ln(), pt[1].norm().ln()];
            Ok(monomial_limit(&m.matrix, tau, ell, lambda, cfg))
        }
        _ => {
            let mut state: Vec<WideComplex> = pt.iter().map(|&z| WideComplex::new(z)).collect();
            let mut failed = false;
            Ok(tate_limit(lambda, cfg, |k| {
                if k > 0 {
                    match map.eval(&state) {
                        Ok(s) => state = s,
                        Err(_) => failed = true,
                    }
                }
                if failed || state.iter().any(|z| !z.is_finite()) {
                    return Some(f64::NAN);
                }
                Some(lognorm(&state))
            }))
        }
    }
}

pub fn green_minus_arch(map: &NumericMap, pt: &[Complex64], cfg: &TateLimitConfig) -> Result<GreenEvaluation> {
    green_plus_arch(&map.inverse(), pt, cfg)
}

/// Closed form for monomial maps: G⁺ = ‖v⁺‖₁ · |w⁺·ℓ + w⁺·τ/(μ − 1)| with Av⁺ = μv⁺,
/// w⁺A = μw⁺, w⁺·v⁺ = 1, ℓ = (log|x|, log|y|) and τ the log of the twist.
pub fn green_monomial_closed(a: &Matrix2, tau: [f64; 2], ell: [f64; 2]) -> f64 {
    let [[p, q], [r, s]] = a.to_f64();
    let (mu, _) = a.eigen_pair();
    let v = if q.abs() > 0.0 { [q, mu - p] } else { [mu - s, r] };
    let w = if r.abs() > 0.0 { [r, mu - p] } else { [mu - s, q] };
    let norm = w[0] * v[0] + w[1] * v[1];
    let w = [w[0] / norm, w[1] / norm];
    let c = w[0] * ell[0] + w[1] * ell[1] + (w[0] * tau[0] + w[1] * tau[1]) / (mu - 1.0);
    (v[0].abs() + v[1].abs()) * c.abs()
}

// ---------------- non-archimedean ----------------

#[derive(Clone, Debug, PartialEq)]
pub struct NonArchGreen {
    pub eval: GreenEvaluation,
    /// Exact G / log_base(place) when the escape was certified symbolically.
    pub log_coefficient: Option<Q>,
}

impl NonArchGreen {
    fn exact(coef: Q, weight: f64, n: usize, status: GreenStatus) -> Self {
        NonArchGreen {
            eval: GreenEvaluation {
                value: rational::to_f64(&coef) * weight,
                error_bound: 0.0,
                n_used: n,
                status,
            },
            log_coefficient: Some(coef),
        }
    }
}

fn qmax(a: Q, b: Q) -> Q {
    if a > b {
        a
    } else {
        b
    }
}

/// Escape threshold T and per-cycle sum S = Σ γ_j / D_{j+1} for an all-forward composition.
fn escape_data<K: Scalar>(h: &HenonOver<K>, val: &impl Fn(&K) -> Option<i64>) -> Option<(Q, Q, Q)> {
    let mut t = Q::zero();
    let mut s = Q::zero();
    let mut dprod = Q::one();
    for f in &h.factors {
        let d = f.degree();
        if d < 2 {
            return None;
        }
        let vd = Q::from_integer(val(&f.poly[d])?.into());
        for (k, c) in f.poly.iter().enumerate().take(d) {
            if let Some(vk) = val(c) {
                let bound = (&vd - Q::from_integer(vk.into())) / Q::from_integer(((d - k) as i64).into());
                t = qmax(t, bound);
            }
        }
        let vdel = Q::from_integer(val(&f.delta)?.into());
        let dm1 = Q::from_integer(((d - 1) as i64).into());
        t = qmax(t, (&vd - vdel) / &dm1);
        t = qmax(t, &vd / &dm1);
        dprod *= Q::from_integer((d as i64).into());
        s += -&vd / &dprod;
    }
    Some((t, s, dprod))
}

fn neg_min_val<K>(v: &[K], val: &impl Fn(&K) -> Option<i64>) -> i64 {
    v.iter().filter_map(val).map(|x| -x).max().unwrap_or(i64::MIN)
}

/// Exact Green function of a Hénon composition at a non-archimedean place given by `val`.
pub fn henon_nonarch<K: Scalar + PartialEq>(
    h: &HenonOver<K>,
    pt: [K; 2],
    val: &impl Fn(&K) -> Option<i64>,
    size: &impl Fn(&K) -> u64,
    weight: f64,
    cfg: &TateLimitConfig,
) -> NonArchGreen {
    if h.all_inverse() && !h.factors.is_empty() {
        // σ∘h⁻¹∘σ is the forward factor with polynomial p/δ and parameter 1/δ
        let conj = HenonOver {
            factors: h
                .factors
                .iter()
                .map(|f| {
                    let inv = K::one_value() / f.delta.clone();
                    FactorOver {
                        poly: f.poly.iter().map(|c| c.clone() * inv.clone()).collect(),
                        delta: inv,
                        inverse: false,
                    }
                })
                .collect(),
        };
        let [x, y] = pt;
        return henon_nonarch(&conj, [y, x], val, size, weight, cfg);
    }
    let lambda = h.degree_product();
    let id = |c: &K| c.clone();
    if h.all_forward() && !h.factors.is_empty() {
        if let Some((t, s, _)) = escape_data(h, val) {
            let good = t.is_zero()
                && h.factors.iter().all(|f| {
                    f.poly.iter().all(|c| val(c).map_or(true, |v| v >= 0))
                        && val(&f.leading()) == Some(0)
                        && val(&f.delta) == Some(0)
                });
            if good && pt.iter().all(|c| val(c).map_or(true, |v| v >= 0)) {
                return NonArchGreen::exact(Q::zero(), weight, 0, GreenStatus::BoundedOrbit);
            }
            let lam_q = Q::from_integer((lambda as i64).into());
            let factor = &lam_q / (&lam_q - Q::one());
            let [mut x, mut y] = pt.clone();
            let mut scale = Q::one();
            for n in 0..=cfg.n_max {
                let vx = val(&x);
                let vy = val(&y);
                if let Some(vy) = vy {
                    let u = Q::from_integer((-vy).into());
                    let dominant = vx.map_or(true, |vx| vy <= vx);
                    if dominant && u > t {
                        let coef = &scale * (u + &s * &factor);
                        return NonArchGreen::exact(coef, weight, n, GreenStatus::Converged);
                    }
                }
                if size(&x) + size(&y) > cfg.size_cap || n == cfg.n_max {
                    break;
                }
                (x, y) = h.apply(x, y, &id);
                scale /= &lam_q;
            }
            // Never entered the escape region: bounded up to the region's depth.
            let lp = neg_min_val(&[x, y], val).max(0);
            let bound = &scale * (&t + s.abs() * &factor + Q::one());
            let value = &scale * Q::from_integer(lp.into());
            return NonArchGreen {
                eval: GreenEvaluation {
                    value: rational::to_f64(&value) * weight,
                    error_bound: rational::to_f64(&bound) * weight,
                    n_used: cfg.n_max,
                    status: GreenStatus::BoundedOrbit,
                },
                log_coefficient: None,
            };
        }
    }
    // mixed directions: exact iteration with the empirical tail bound
    let auto: AutoOver<K> = AutoOver::Henon(h.clone());
    let mut state = pt.to_vec();
    let lam = if lambda > 1.0 { lambda } else { 2.0 };
    NonArchGreen {
        eval: exact_orbit_limit(&auto, &mut state, lam, val, size, weight, cfg),
        log_coefficient: None,
    }
}

fn exact_orbit_limit<K: Scalar + PartialEq>(
    auto: &AutoOver<K>,
    state: &mut Vec<K>,
    lambda: f64,
    val: &impl Fn(&K) -> Option<i64>,
    size: &impl Fn(&K) -> u64,
    weight: f64,
    cfg: &TateLimitConfig,
) -> GreenEvaluation {
    let id = |c: &K| c.clone();
    let mut local = cfg.clone();
    // the escape radius is measured in units of the place's absolute value
    local.escape_radius = cfg.escape_radius.min(1e300);
    tate_limit(lambda, &local, |k| {
        if k > 0 {
            if state.iter().map(size).sum::<u64>() > cfg.size_cap {
                return None;
            }
            match auto.apply(state, &id) {
                Ok(s) => *state = s,
                Err(_) => return Some(f64::NAN),
            }
        }
        let m = neg_min_val(state, val);
        Some(if m == i64::MIN { f64::NEG_INFINITY } else { m as f64 * weight })
    })
}

fn qval(p: u64) -> impl Fn(&Q) -> Option<i64> {
    move |q: &Q| rational::valuation(q, p)
}

/// Green functions of an exact map at the p-adic place of Q.
pub fn green_nonarch(auto: &SurfaceAutomorphism, pt: &[Q], p: u64, cfg: &TateLimitConfig) -> Result<NonArchGreen> {
    if pt.len() != auto.dim() {
        return Err(Error::BadPoint(format!("expected {} coordinates", auto.dim())));
    }
    let weight = (p as f64).ln();
    let val = qval(p);
    match auto {
        AutoOver::Henon(h) => Ok(henon_nonarch(
            h,
            [pt[0].clone(), pt[1].clone()],
            &val,
            &rational::bit_size,
            weight,
            cfg,
        )),
        AutoOver::Monomial(m) => {
            if pt.iter().any(|c| c.is_zero()) {
                return Err(Error::BadPoint("zero coordinate on the torus".into()));
            }
            let lv = |q: &Q| -(val(q).unwrap() as f64) * weight;
            let ell = [lv(&pt[0]), lv(&pt[1])];
            let tau = [lv(&m.twist[0]), lv(&m.twist[1])];
            if ell == [0.0, 0.0] && tau == [0.0, 0.0] {
                return Ok(NonArchGreen::exact(Q::zero(), weight, 0, GreenStatus::BoundedOrbit));
            }
            let g = green_monomial_closed(&m.matrix, tau, ell);
            Ok(NonArchGreen {
                eval: GreenEvaluation {
                    value: g,
                    error_bound: 64.0 * f64::EPSILON * g.max(1.0),
                    n_used: 0,
                    status: if g > 0.0 { GreenStatus::Converged } else { GreenStatus::BoundedOrbit },
                },
                log_coefficient: None,
            })
        }
        AutoOver::Markov(w) => {
            let integral = |c: &Q| val(c).map_or(true, |v| v >= 0);
            if pt.iter().all(integral) && integral(&w.d) {
                // integral points stay integral under Vieta moves
                return Ok(NonArchGreen::exact(Q::zero(), weight, 0, GreenStatus::BoundedOrbit));
            }
            let mut state = pt.to_vec();
            let lambda = auto.dynamical_degree();
            Ok(NonArchGreen {
                eval: exact_orbit_limit(auto, &mut state, lambda, &val, &rational::bit_size, weight, cfg),
                log_coefficient: None,
            })
        }
    }
}

pub fn green_nonarch_minus(auto: &SurfaceAutomorphism, pt: &[Q], p: u64, cfg: &TateLimitConfig) -> Result<NonArchGreen> {
    green_nonarch(&auto.inverse(), pt, p, cfg)
}

pub const FAMILY_SIZE_CAP: u64 = 2_000;

/// Green function of a family over Q(t) at one of its non-archimedean places.
pub fn green_family(h: &HenonOver<RatFunc>, pt: [RatFunc; 2], place: Place, cfg: &TateLimitConfig) -> Result<NonArchGreen> {
    // gcd normalization in Q(t) gets slow long before Q arithmetic does
    let capped = TateLimitConfig {
        size_cap: cfg.size_cap.min(FAMILY_SIZE_CAP),
        ..cfg.clone()
    };
    let cfg = &capped;
    let size = |f: &RatFunc| f.size();
    let w = place.log_base();
    Ok(match place {
        Place::Gauss(p) => henon_nonarch(h, pt, &move |f: &RatFunc| f.gauss_valuation(p), &size, w, cfg),
        Place::TAdic => henon_nonarch(h, pt, &|f: &RatFunc| f.t_valuation(), &size, w, cfg),
        Place::InfAdic => henon_nonarch(h, pt, &|f: &RatFunc| f.inf_valuation(), &size, w, cfg),
        _ => return Err(Error::UnsupportedField(format!("place {place:?} for a family over Q(t)"))),
    })
}

// ---------------- normalization and the total Green function ----------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Normalization {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
}

impl Normalization {
    pub const UNIT: Normalization = Normalization {
        kappa_plus: 1.0,
        kappa_minus: 1.0,
    };
}

/// Branch weights from the built-in completion; unit weights where none exists.
pub fn normalization(auto: &SurfaceAutomorphism) -> Normalization {
    let Ok(model) = picard_manin::builtin_completion(auto) else {
        return Normalization::UNIT;
    };
    match picard_manin::theta_pair(&model) {
        Ok(th) => {
            let (kp, km) = picard_manin::branch_weights(&model, &th);
            Normalization {
                kappa_plus: kp,
                kappa_minus: km,
            }
        }
        Err(_) => Normalization::UNIT,
    }
}

pub fn combine(plus: &GreenEvaluation, minus: &GreenEvaluation, norm: Normalization) -> GreenEvaluation {
    let status = match (plus.status, minus.status) {
        (GreenStatus::Escaped, _) | (_, GreenStatus::Escaped) => GreenStatus::Escaped,
        (GreenStatus::Converged, _) | (_, GreenStatus::Converged) => GreenStatus::Converged,
        _ => GreenStatus::BoundedOrbit,
    };
    GreenEvaluation {
        value: 0.5 * (norm.kappa_plus * plus.value + norm.kappa_minus * minus.value),
        error_bound: 0.5 * (norm.kappa_plus * plus.error_bound + norm.kappa_minus * minus.error_bound),
        n_used: plus.n_used.max(minus.n_used),
        status,
    }
}

/// G = (κ⁺G⁺ + κ⁻G⁻)/2 at the archimedean place.
pub fn green_total(map: &NumericMap, pt: &[Complex64], norm: Normalization, cfg: &TateLimitConfig) -> Result<GreenEvaluation> {
    let p = green_plus_arch(map, pt, cfg)?;
    let m = green_minus_arch(map, pt, cfg)?;
    Ok(combine(&p, &m, norm))
}

/// Grid evaluation of (G⁺, G⁻, G) over a rectangle of the real plane or a complex line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub g: f64,
    pub err: f64,
}

pub fn green_grid(
    map: &NumericMap,
    norm: Normalization,
    x_range: (f64, f64),
    y_range: (f64, f64),
    n: (usize, usize),
    cfg: &TateLimitConfig,
) -> Result<Vec<GridRow>> {
    use rayon::prelude::*;
    if map.dim() != 2 {
        return Err(Error::SurfaceMismatch("grids are defined for plane and torus maps".into()));
    }
    let (nx, ny) = n;
    let coord = |r: (f64, f64), k: usize, m: usize| {
        if m <= 1 {
            r.0
        } else {
            r.0 + (r.1 - r.0) * k as f64 / (m - 1) as f64
        }
    };
    (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / nx, idx % nx);
            let x = coord(x_range, i, nx);
            let y = coord(y_range, j, ny);
            let pt = [Complex64::new(x, 0.0), Complex64::new(y, 0.0)];
            let p = green_plus_arch(map, &pt, cfg)?;
            let m = green_minus_arch(map, &pt, cfg)?;
            let t = combine(&p, &m, norm);
            Ok(GridRow {
                x,
                y,
                g_plus: p.value,
                g_minus: m.value,
                g: t.value,
                err: t.error_bound,
            })
        })
        .collect()
}
