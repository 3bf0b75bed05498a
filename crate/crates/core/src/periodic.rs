//! Periodic points: exact torsion on the torus via Smith normal form, numeric cycles for
//! Hénon (homotopy continuation) and Markov (Gauss–Newton) maps, and rigidity experiments.

use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::linalg;
use crate::arith::poly;
use crate::arith::rational::{self, Q};
use crate::error::{Error, Result};
use crate::green::{self, GreenStatus, TateLimitConfig};
use crate::maps::{AutoOver, FactorOver, HenonOver, Matrix2, NumericMap, SurfaceAutomorphism};

type C = Complex64;

// ---------------- torus ----------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorsionSpec {
    pub n: u32,
    pub count: u64,
    pub smith: (u64, u64),
    /// Exponent pairs (a, b) ∈ [0,1)² of the points (e^{2πia}, e^{2πib}).
    #[serde(serialize_with = "ser_exponents")]
    pub representatives: Vec<[Q; 2]>,
}

fn ser_exponents<S: serde::Serializer>(v: &[[Q; 2]], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for e in v {
        seq.serialize_element(&[e[0].to_string(), e[1].to_string()])?;
    }
    seq.end()
}

/// Smith normal form U·M·V = diag(d₁, d₂) with d₁ | d₂, both ≥ 0.
pub fn smith_normal_form(m: [[i128; 2]; 2]) -> ((i128, i128), [[i128; 2]; 2], [[i128; 2]; 2]) {
    let mut a = m;
    let mut u = [[1i128, 0], [0, 1]];
    let mut v = [[1i128, 0], [0, 1]];
    loop {
        let nz: Vec<(usize, usize)> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i][j] != 0)
            .collect();
        let Some(&(pi, pj)) = nz.iter().min_by_key(|&&(i, j)| a[i][j].abs()) else {
            break;
        };
        if pi == 1 {
            a.swap(0, 1);
            u.swap(0, 1);
        }
        if pj == 1 {
            for r in 0..2 {
                a[r].swap(0, 1);
                v[r].swap(0, 1);
            }
        }
        let p = a[0][0];
        let q = Integer::div_floor(&a[1][0], &p);
        for c in 0..2 {
            a[1][c] -= q * a[0][c];
            u[1][c] -= q * u[0][c];
        }
        let q = Integer::div_floor(&a[0][1], &p);
        for r in 0..2 {
            a[r][1] -= q * a[r][0];
            v[r][1] -= q * v[r][0];
        }
        if a[1][0] != 0 || a[0][1] != 0 {
            continue;
        }
        if a[1][1] % p != 0 {
            for c in 0..2 {
                a[0][c] += a[1][c];
                u[0][c] += u[1][c];
            }
            continue;
        }
        break;
    }
    for r in 0..2 {
        if a[r][r] < 0 {
            for c in 0..2 {
                a[r][c] = -a[r][c];
                u[r][c] = -u[r][c];
            }
        }
    }
    ((a[0][0], a[1][1]), u, v)
}

fn frac_part(q: Q) -> Q {
    let f = q.floor();
    q - f
}

fn act(m: &Matrix2, e: &[Q; 2]) -> [Q; 2] {
    let z = |k: i64| Q::from_integer(k.into());
    [
        frac_part(z(m.0[0][0]) * &e[0] + z(m.0[0][1]) * &e[1]),
        frac_part(z(m.0[1][0]) * &e[0] + z(m.0[1][1]) * &e[1]),
    ]
}

/// Exact check that the torsion point with exponents e is fixed by the monomial map M.
pub fn torsion_fixed(m: &Matrix2, e: &[Q; 2]) -> bool {
    act(m, e) == [frac_part(e[0].clone()), frac_part(e[1].clone())]
}

/// Exact period of a torsion point under M (the exponent orbit is finite).
pub fn torsion_period(m: &Matrix2, e: &[Q; 2], cap: u64) -> Option<u64> {
    let start = [frac_part(e[0].clone()), frac_part(e[1].clone())];
    let mut cur = start.clone();
    for k in 1..=cap {
        cur = act(m, &cur);
        if cur == start {
            return Some(k);
        }
    }
    None
}

pub fn torus_periodic(a: &Matrix2, n: u32) -> Result<TorsionSpec> {
    if a.spectral_radius() <= 1.0 + crate::maps::LOXODROMIC_EPS {
        return Err(Error::NotLoxodromic(a.spectral_radius()));
    }
    let an = a.pow(n as i64)?;
    let m = an.sub_identity();
    let mi = [[m[0][0] as i128, m[0][1] as i128], [m[1][0] as i128, m[1][1] as i128]];
    let ((d1, d2), _, v) = smith_normal_form(mi);
    let count = (d1 * d2) as u64;
    let mut reps = Vec::with_capacity(count as usize);
    for j in 0..d1 {
        for k in 0..d2 {
            let e1 = Q::new(j.into(), d1.into());
            let e2 = Q::new(k.into(), d2.into());
            let z = |x: i128| Q::from_integer(x.into());
            reps.push([
                frac_part(z(v[0][0]) * &e1 + z(v[0][1]) * &e2),
                frac_part(z(v[1][0]) * &e1 + z(v[1][1]) * &e2),
            ]);
        }
    }
    reps.sort();
    Ok(TorsionSpec {
        n,
        count,
        smith: (d1 as u64, d2 as u64),
        representatives: reps,
    })
}

pub fn torsion_to_complex(e: &[Q; 2]) -> [C; 2] {
    let tau = 2.0 * std::f64::consts::PI;
    [
        C::from_polar(1.0, tau * rational::to_f64(&e[0])),
        C::from_polar(1.0, tau * rational::to_f64(&e[1])),
    ]
}

// ---------------- numeric cycles ----------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Auto,
    Homotopy,
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicConfig {
    /// Number of random Newton seeds.
    pub seeds: usize,
    pub newton_tol: f64,
    pub dedup_eps: f64,
    /// Seeds whose first n_pre iterates leave the box are discarded.
    pub n_pre: usize,
    pub seed_box: f64,
    pub rng_seed: u64,
    pub method: Method,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        PeriodicConfig {
            seeds: 400,
            newton_tol: 1e-12,
            dedup_eps: 1e-7,
            n_pre: 20,
            seed_box: 3.0,
            rng_seed: 0,
            method: Method::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericCycle {
    pub points: Vec<Vec<C>>,
    pub period: usize,
    pub residual: f64,
    pub multiplier_spectrum: Vec<C>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicSet {
    pub n: usize,
    /// Distinct points fixed by fⁿ.
    pub points: Vec<Vec<C>>,
    pub cycles: Vec<NumericCycle>,
    /// Count with multiplicity when known (Bézout number of the cyclic system).
    pub expected: Option<usize>,
    /// Paths or seeds that reached a solution.
    pub found: usize,
    pub completeness_estimate: Option<f64>,
}

fn iterate_n(map: &NumericMap, p: &[C], n: usize) -> Option<Vec<C>> {
    let mut q = p.to_vec();
    for _ in 0..n {
        q = map.eval(&q).ok()?;
        if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
    }
    Some(q)
}

fn dist(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn jacobian_n(map: &NumericMap, p: &[C], n: usize) -> Option<Vec<Vec<C>>> {
    let d = p.len();
    let mut j: Vec<Vec<C>> = (0..d)
        .map(|i| (0..d).map(|k| if i == k { C::one() } else { C::zero() }).collect())
        .collect();
    let mut q = p.to_vec();
    for _ in 0..n {
        let jk = map.jacobian(&q).ok()?;
        j = linalg::complex_mat_mul(&jk, &j);
        q = map.eval(&q).ok()?;
    }
    Some(j)
}

fn markov_d(map: &NumericMap) -> Option<C> {
    match &map.map {
        AutoOver::Markov(w) => Some(w.d),
        _ => None,
    }
}

/// Newton (Gauss–Newton on Markov surfaces) for fⁿ(p) = p.
pub fn newton_periodic(map: &NumericMap, n: usize, start: &[C], tol: f64, max_iter: usize) -> Option<Vec<C>> {
    let dim = start.len();
    let d = markov_d(map);
    let mut p = start.to_vec();
    for _ in 0..max_iter {
        let q = iterate_n(map, &p, n)?;
        let jn = jacobian_n(map, &p, n)?;
        let mut rows: Vec<Vec<C>> = (0..dim)
            .map(|i| (0..dim).map(|k| jn[i][k] - if i == k { C::one() } else { C::zero() }).collect())
            .collect();
        let mut r: Vec<C> = (0..dim).map(|i| q[i] - p[i]).collect();
        if let Some(dd) = d {
            let (x, y, z) = (p[0], p[1], p[2]);
            rows.push(vec![2.0 * x - y * z, 2.0 * y - x * z, 2.0 * z - x * y]);
            r.push(x * x + y * y + z * z - x * y * z - dd);
        }
        let step = if rows.len() == dim {
            linalg::solve_complex(rows, r.iter().map(|v| -v).collect())?
        } else {
            // normal equations Jᴴ J δ = −Jᴴ r
            let jhj: Vec<Vec<C>> = (0..dim)
                .map(|i| (0..dim).map(|k| rows.iter().map(|row| row[i].conj() * row[k]).sum()).collect())
                .collect();
            let jhr: Vec<C> = (0..dim).map(|i| -rows.iter().zip(&r).map(|(row, v)| row[i].conj() * v).sum::<C>()).collect();
            linalg::solve_complex(jhj, jhr)?
        };
        let size = 1.0 + p.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (pi, si) in p.iter_mut().zip(&step) {
            *pi += si;
        }
        if p.iter().any(|z| !z.re.is_finite() || z.norm() > 1e8) {
            return None;
        }
        let s = step.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s <= tol * size {
            let q = iterate_n(map, &p, n)?;
            return (dist(&q, &p) < 1e-9 * size).then_some(p);
        }
    }
    None
}

/// Cyclic system s_{k+1} − p_k(s_k) + δ_k s_{k−1} = 0 for an all-forward chain of factors.
struct CyclicSystem {
    polys: Vec<Vec<C>>,
    dpolys: Vec<Vec<C>>,
    deltas: Vec<C>,
}

impl CyclicSystem {
    fn len(&self) -> usize {
        self.polys.len()
    }

    fn degree(&self, k: usize) -> usize {
        self.polys[k].len() - 1
    }

    fn eval(&self, s: &[C]) -> Vec<C> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let next = s[(k + 1) % n];
                let prev = s[(k + n - 1) % n];
                next - poly::eval_in(&self.polys[k], &s[k]) + self.deltas[k] * prev
            })
            .collect()
    }

    fn jacobian(&self, s: &[C]) -> Vec<Vec<C>> {
        let n = self.len();
        let mut j = vec![vec![C::zero(); n]; n];
        for k in 0..n {
            j[k][(k + 1) % n] += C::one();
            j[k][k] -= poly::eval_in(&self.dpolys[k], &s[k]);
            j[k][(k + n - 1) % n] += self.deltas[k];
        }
        j
    }
}

struct Homotopy<'a> {
    sys: &'a CyclicSystem,
    gamma: C,
}

impl Homotopy<'_> {
    fn start(&self, s: &[C]) -> Vec<C> {
        s.iter()
            .enumerate()
            .map(|(k, z)| z.powi(self.sys.degree(k) as i32) - C::one())
            .collect()
    }

    fn h(&self, s: &[C], t: f64) -> Vec<C> {
        let f = self.sys.eval(s);
        let g = self.start(s);
        f.iter().zip(&g).map(|(a, b)| t * a + (1.0 - t) * self.gamma * b).collect()
    }

    fn hs(&self, s: &[C], t: f64) -> Vec<Vec<C>> {
        let mut j = self.sys.jacobian(s);
        for (k, row) in j.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= t;
            }
            let d = self.sys.degree(k) as i32;
            row[k] += (1.0 - t) * self.gamma * (d as f64) * s[k].powi(d - 1);
        }
        j
    }

    fn ht(&self, s: &[C]) -> Vec<C> {
        let f = self.sys.eval(s);
        let g = self.start(s);
        f.iter().zip(&g).map(|(a, b)| a - self.gamma * b).collect()
    }

    fn tangent(&self, s: &[C], t: f64) -> Option<Vec<C>> {
        linalg::solve_complex(self.hs(s, t), self.ht(s).iter().map(|v| -v).collect())
    }

    fn correct(&self, s: &mut [C], t: f64, iters: usize, tol: f64) -> bool {
        for _ in 0..iters {
            let r = self.h(s, t);
            let Some(d) = linalg::solve_complex(self.hs(s, t), r.iter().map(|v| -v).collect()) else {
                return false;
            };
            let size = 1.0 + s.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let dn = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (a, b) in s.iter_mut().zip(&d) {
                *a += b;
            }
            if dn <= tol * size {
                return true;
            }
        }
        false
    }

    /// Tracks one path from t = 0 to t = 1 with an RK4 predictor and Newton corrector.
    fn track(&self, mut s: Vec<C>) -> PathEnd {
        let mut t = 0.0;
        let mut dt: f64 = 0.02;
        let add = |a: &[C], b: &[C], h: f64| a.iter().zip(b).map(|(x, y)| x + h * y).collect::<Vec<_>>();
        while t < 1.0 {
            dt = dt.min(1.0 - t);
            let Some(k1) = self.tangent(&s, t) else {
                return self.give_up(s, t);
            };
            let k2 = self.tangent(&add(&s, &k1, dt / 2.0), t + dt / 2.0);
            let k3 = k2.as_ref().and_then(|k2| self.tangent(&add(&s, k2, dt / 2.0), t + dt / 2.0));
            let k4 = k3.as_ref().and_then(|k3| self.tangent(&add(&s, k3, dt), t + dt));
            let mut ok = false;
            if let (Some(k2), Some(k3), Some(k4)) = (k2, k3, k4) {
                let mut pred: Vec<C> = s
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect();
                let size = 1.0 + s.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if self.correct(&mut pred, t + dt, 3, 1e-10) && dist(&pred, &s) < 0.5 * size {
                    s = pred;
                    ok = true;
                }
            }
            if ok {
                t += dt;
                dt = (dt * 1.5).min(0.1);
            } else {
                dt /= 2.0;
                if dt < 1e-13 {
                    return self.give_up(s, t);
                }
            }
            if s.iter().any(|z| z.norm() > 1e10) {
                return PathEnd::Lost;
            }
        }
        let mut end = s;
        if self.correct(&mut end, 1.0, 50, 1e-14) || self.residual(&end) <= 1e-8 {
            PathEnd::Regular(end)
        } else {
            PathEnd::Singular(end)
        }
    }

    fn residual(&self, s: &[C]) -> f64 {
        self.sys.eval(s).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Paths that stall just before t = 1 end at a multiple root.
    fn give_up(&self, s: Vec<C>, t: f64) -> PathEnd {
        if t > 1.0 - 1e-6 {
            PathEnd::Singular(s)
        } else {
            PathEnd::Lost
        }
    }
}

enum PathEnd {
    Regular(Vec<C>),
    Singular(Vec<C>),
    Lost,
}

/// Centroids of clusters of endpoints converging to the same multiple root.
fn singular_centroids(ends: Vec<Vec<C>>, sys: &CyclicSystem) -> Vec<Vec<C>> {
    let mut clusters: Vec<(Vec<C>, Vec<C>, usize)> = Vec::new();
    for e in ends {
        let size = 1.0 + e.iter().map(|z| z.norm()).fold(0.0, f64::max);
        match clusters.iter_mut().find(|(seed, _, _)| dist(seed, &e) < 1e-2 * size) {
            Some((_, sum, k)) => {
                for (a, b) in sum.iter_mut().zip(&e) {
                    *a += b;
                }
                *k += 1;
            }
            None => clusters.push((e.clone(), e, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(_, sum, k)| sum.into_iter().map(|z| z / k as f64).collect::<Vec<C>>())
        .filter(|c| sys.eval(c).iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-6)
        .collect()
}

fn forward_chain(h: &HenonOver<C>, n: usize) -> Option<(CyclicSystem, bool)> {
    let (factors, swapped): (Vec<FactorOver<C>>, bool) = if h.all_forward() {
        (h.factors.clone(), false)
    } else if h.all_inverse() {
        (
            h.factors
                .iter()
                .map(|f| {
                    let inv = C::one() / f.delta;
                    FactorOver {
                        poly: f.poly.iter().map(|c| c * inv).collect(),
                        delta: inv,
                        inverse: false,
                    }
                })
                .collect(),
            true,
        )
    } else {
        return None;
    };
    if factors.is_empty() || factors.iter().any(|f| f.poly.len() < 3) {
        return None;
    }
    let m = factors.len();
    let polys: Vec<Vec<C>> = (0..m * n).map(|k| factors[k % m].poly.clone()).collect();
    let sys = CyclicSystem {
        dpolys: polys.iter().map(|p| poly::derivative(p)).collect(),
        polys,
        deltas: (0..m * n).map(|k| factors[k % m].delta).collect(),
    };
    Some((sys, swapped))
}

fn homotopy_points(h: &HenonOver<C>, n: usize, cfg: &PeriodicConfig) -> Option<(Vec<Vec<C>>, usize, usize)> {
    let (sys, swapped) = forward_chain(h, n)?;
    let len = sys.len();
    let degrees: Vec<usize> = (0..len).map(|k| sys.degree(k)).collect();
    let total: usize = degrees.iter().product();
    if total > 1 << 14 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let gamma = C::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
    let hom = Homotopy { sys: &sys, gamma };
    let starts: Vec<Vec<C>> = (0..total)
        .map(|mut idx| {
            degrees
                .iter()
                .map(|&d| {
                    let j = idx % d;
                    idx /= d;
                    C::from_polar(1.0, std::f64::consts::TAU * j as f64 / d as f64)
                })
                .collect()
        })
        .collect();
    let ends: Vec<PathEnd> = starts.into_par_iter().map(|s| hom.track(s)).collect();
    let mut regular = Vec::new();
    let mut singular = Vec::new();
    for e in ends {
        match e {
            PathEnd::Regular(s) => regular.push(s),
            PathEnd::Singular(s) => singular.push(s),
            PathEnd::Lost => {}
        }
    }
    let found = regular.len() + singular.len();
    regular.extend(singular_centroids(singular, &sys));
    let pts: Vec<Vec<C>> = regular
        .into_iter()
        .map(|s| {
            let (x, y) = (s[len - 1], s[0]);
            if swapped {
                vec![y, x]
            } else {
                vec![x, y]
            }
        })
        .collect();
    Some((pts, found, total))
}

fn random_seeds(map: &NumericMap, cfg: &PeriodicConfig) -> Vec<Vec<C>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let b = cfg.seed_box;
    let d = markov_d(map);
    let mut out = Vec::with_capacity(cfg.seeds);
    while out.len() < cfg.seeds {
        let mut c = || C::new(rng.gen_range(-b..b), rng.gen_range(-b..b));
        let x = c();
        let y = c();
        let p = match d {
            Some(dd) => {
                // z² − xy z + (x² + y² − D) = 0
                let bq = x * y;
                let disc = (bq * bq - 4.0 * (x * x + y * y - dd)).sqrt();
                vec![x, y, (bq + disc) / 2.0]
            }
            None => vec![x, y],
        };
        out.push(p);
    }
    let bounded: Vec<Vec<C>> = out
        .iter()
        .filter(|p| {
            let mut q = (*p).clone();
            for _ in 0..cfg.n_pre {
                match map.eval(&q) {
                    Ok(v) => q = v,
                    Err(_) => return false,
                }
                if q.iter().any(|z| !(z.norm() <= 1e3)) {
                    return false;
                }
            }
            true
        })
        .cloned()
        .collect();
    if bounded.len() * 10 >= out.len() {
        bounded
    } else {
        out
    }
}

fn dedup(points: Vec<Vec<C>>, eps: f64) -> Vec<Vec<C>> {
    let mut pts = points;
    pts.sort_by(|a, b| {
        a.iter()
            .flat_map(|z| [z.re, z.im])
            .zip(b.iter().flat_map(|z| [z.re, z.im]))
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<C>> = Vec::new();
    for p in pts {
        if !out.iter().any(|q| dist(q, &p) < eps) {
            out.push(p);
        }
    }
    out
}

fn cycles_of(map: &NumericMap, points: &[Vec<C>], n: usize, eps: f64) -> Vec<NumericCycle> {
    let mut used = vec![false; points.len()];
    let mut cycles = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        let p = &points[i];
        let mut orbit = vec![p.clone()];
        let mut period = n;
        let mut q = p.clone();
        for k in 1..=n {
            let Ok(next) = map.eval(&q) else { break };
            q = next;
            if n % k == 0 && dist(&q, p) < eps {
                period = k;
                break;
            }
            orbit.push(q.clone());
        }
        orbit.truncate(period);
        for o in &orbit {
            if let Some(j) = (0..points.len()).find(|&j| !used[j] && dist(&points[j], o) < eps) {
                used[j] = true;
            }
        }
        used[i] = true;
        let residual = orbit
            .iter()
            .map(|o| iterate_n(map, o, period).map_or(f64::INFINITY, |r| dist(&r, o)))
            .fold(0.0, f64::max);
        let multiplier_spectrum = jacobian_n(map, p, period).map(|j| linalg::eigenvalues(&j)).unwrap_or_default();
        cycles.push(NumericCycle {
            points: orbit,
            period,
            residual,
            multiplier_spectrum,
        });
    }
    cycles
}

/// Numeric points of period dividing n.
pub fn numeric_periodic(auto: &SurfaceAutomorphism, n: usize, cfg: &PeriodicConfig) -> Result<PeriodicSet> {
    if n == 0 {
        return Err(Error::BadPoint("period must be positive".into()));
    }
    if matches!(auto, AutoOver::Monomial(_)) {
        return Err(Error::SurfaceMismatch("use the exact torus enumeration for monomial maps".into()));
    }
    let map = auto.to_numeric();
    let mut via_homotopy = None;
    if cfg.method != Method::Newton {
        if let AutoOver::Henon(h) = &map.map {
            via_homotopy = homotopy_points(h, n, cfg);
        }
        if cfg.method == Method::Homotopy && via_homotopy.is_none() {
            return Err(Error::InvalidModel("homotopy continuation needs a single-direction Hénon composition".into()));
        }
    }
    let (raw, found, expected) = match via_homotopy {
        Some((pts, found, total)) => {
            let polished: Vec<Vec<C>> = pts
                .par_iter()
                .map(|p| newton_periodic(&map, n, p, cfg.newton_tol, 20).unwrap_or_else(|| p.clone()))
                .collect();
            (polished, found, Some(total))
        }
        None => {
            let seeds = random_seeds(&map, cfg);
            let sols: Vec<Vec<C>> = seeds
                .par_iter()
                .filter_map(|s| newton_periodic(&map, n, s, cfg.newton_tol, 60))
                .collect();
            let f = sols.len();
            (sols, f, None)
        }
    };
    let points = dedup(raw, cfg.dedup_eps);
    let cycles = cycles_of(&map, &points, n, cfg.dedup_eps.max(1e-6));
    Ok(PeriodicSet {
        n,
        completeness_estimate: expected.map(|e| found as f64 / e as f64),
        points,
        cycles,
        expected,
        found,
    })
}

// ---------------- rigidity ----------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityConfig {
    pub tol: f64,
    pub periodic: PeriodicConfig,
    pub tate: TateLimitConfig,
}

impl Default for RigidityConfig {
    fn default() -> Self {
        RigidityConfig {
            tol: 1e-6,
            periodic: PeriodicConfig::default(),
            tate: TateLimitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityRow {
    pub n: usize,
    pub count: usize,
    pub below_tol: usize,
    pub fraction: f64,
    pub max_value: f64,
    pub median_value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityReport {
    pub rows: Vec<RigidityRow>,
    pub fraction: f64,
    pub tol: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn untwisted(auto: &SurfaceAutomorphism) -> Option<Matrix2> {
    match auto {
        AutoOver::Monomial(m) if m.twist.iter().all(|c| c.is_one()) => Some(m.matrix),
        _ => None,
    }
}

/// Fraction of Per_n(f) on which the Green function of g vanishes.
pub fn rigidity_test(f: &SurfaceAutomorphism, g: &SurfaceAutomorphism, n_list: &[usize], cfg: &RigidityConfig) -> Result<RigidityReport> {
    if f.surface() != g.surface() {
        return Err(Error::SurfaceMismatch(format!("{} vs {}", f.surface().name(), g.surface().name())));
    }
    let mut rows = Vec::new();
    if let (Some(a), Some(b)) = (untwisted(f), untwisted(g)) {
        for &n in n_list {
            let spec = torus_periodic(&a, n as u32)?;
            // exponent orbits are finite; the cap is the size of the torsion group
            let den = spec.smith.1.max(1);
            let cap = den * den + 1;
            let ok = spec
                .representatives
                .par_iter()
                .filter(|e| torsion_period(&b, e, cap).is_some())
                .count();
            let count = spec.representatives.len();
            rows.push(RigidityRow {
                n,
                count,
                below_tol: ok,
                fraction: ok as f64 / count as f64,
                max_value: 0.0,
                median_value: 0.0,
                exact: true,
            });
        }
    } else {
        if matches!(f, AutoOver::Monomial(_)) {
            return Err(Error::InvalidModel("torus rigidity needs untwisted monomial maps".into()));
        }
        let gn = g.to_numeric();
        let norm = green::normalization(g);
        for &n in n_list {
            let set = numeric_periodic(f, n, &cfg.periodic)?;
            let vals: Vec<f64> = set
                .points
                .par_iter()
                .map(|p| match green::green_total(&gn, p, norm, &cfg.tate) {
                    Ok(e) if e.status != GreenStatus::Escaped || e.value > 0.0 => e.value,
                    _ => f64::INFINITY,
                })
                .collect();
            let below = vals.iter().filter(|&&v| v <= cfg.tol).count();
            let count = vals.len();
            rows.push(RigidityRow {
                n,
                count,
                below_tol: below,
                fraction: if count == 0 { 0.0 } else { below as f64 / count as f64 },
                max_value: vals.iter().copied().fold(0.0, f64::max),
                median_value: median(vals),
                exact: false,
            });
        }
    }
    let total: usize = rows.iter().map(|r| r.count).sum();
    let below: usize = rows.iter().map(|r| r.below_tol).sum();
    Ok(RigidityReport {
        fraction: if total == 0 { 0.0 } else { below as f64 / total as f64 },
        rows,
        tol: cfg.tol,
    })
}

/// T∘f∘T⁻¹ for the translation T(x, y) = (x + a, y + a).
pub fn translated_conjugate(f: &SurfaceAutomorphism, a: &Q) -> Result<SurfaceAutomorphism> {
    let AutoOver::Henon(h) = f else {
        return Err(Error::SurfaceMismatch("translations act on the plane".into()));
    };
    let factors = h
        .factors
        .iter()
        .map(|fac| {
            let fwd = if fac.inverse { fac.inverted() } else { fac.clone() };
            // (y, p(y − a) − δ(x − a) + a)
            let mut p = poly::shift(&fwd.poly, a);
            let c = (Q::one() + &fwd.delta) * a;
            if p.is_empty() {
                p.push(Q::zero());
            }
            p[0] += c;
            let conj = FactorOver {
                poly: p,
                delta: fwd.delta.clone(),
                inverse: false,
            };
            if fac.inverse {
                conj.inverted()
            } else {
                conj
            }
        })
        .collect();
    Ok(AutoOver::Henon(HenonOver { factors }))
}

// ---------------- shared iterates ----------------

fn reduce_word(letters: &[crate::maps::Generator]) -> Vec<crate::maps::Generator> {
    let mut out: Vec<crate::maps::Generator> = Vec::new();
    for &l in letters {
        if out.last() == Some(&l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn agree_exactly(a: &SurfaceAutomorphism, b: &SurfaceAutomorphism, rng: &mut ChaCha8Rng) -> bool {
    let id = |q: &Q| q.clone();
    for _ in 0..12 {
        let p: Vec<Q> = (0..2).map(|_| rational::frac(rng.gen_range(-9..=9), rng.gen_range(1..=5))).collect();
        match (a.apply(&p, &id), b.apply(&p, &id)) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return false,
        }
    }
    true
}

fn agree_on_surface(a: &SurfaceAutomorphism, b: &SurfaceAutomorphism, rng: &mut ChaCha8Rng) -> bool {
    let (na, nb) = (a.to_numeric(), b.to_numeric());
    let Some(d) = markov_d(&na) else { return false };
    for _ in 0..50 {
        let x = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let y = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let bq = x * y;
        let z = (bq + (bq * bq - 4.0 * (x * x + y * y - d)).sqrt()) / 2.0;
        let p = [x, y, z];
        match (na.eval(&p), nb.eval(&p)) {
            (Ok(u), Ok(v)) => {
                let scale = 1.0 + u.iter().map(|w| w.norm()).fold(0.0, f64::max);
                if dist(&u, &v) > 1e-8 * scale {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

fn same_map(a: &SurfaceAutomorphism, b: &SurfaceAutomorphism, rng: &mut ChaCha8Rng) -> bool {
    match (a, b) {
        (AutoOver::Monomial(x), AutoOver::Monomial(y)) => x == y,
        (AutoOver::Henon(x), AutoOver::Henon(y)) => {
            if x.factors == y.factors {
                return true;
            }
            let (da, db) = (a.dynamical_degree(), b.dynamical_degree());
            (da - db).abs() <= 1e-9 * da && agree_exactly(a, b, rng)
        }
        (AutoOver::Markov(x), AutoOver::Markov(y)) => {
            if x.d != y.d {
                return false;
            }
            if reduce_word(&x.letters) == reduce_word(&y.letters) {
                return true;
            }
            let (Ok(ma), Ok(mb)) = (crate::maps::word_matrix(&x.letters), crate::maps::word_matrix(&y.letters)) else {
                return false;
            };
            let neg = Matrix2([[-mb.0[0][0], -mb.0[0][1]], [-mb.0[1][0], -mb.0[1][1]]]);
            (ma == mb || ma == neg) && agree_on_surface(a, b, rng)
        }
        _ => false,
    }
}

/// Smallest (n, m), ordered by n then m, with fⁿ = gᵐ.
pub fn shared_iterate_test(f: &SurfaceAutomorphism, g: &SurfaceAutomorphism, n_cap: u32, m_cap: u32) -> Option<(u32, u32)> {
    if f.surface() != g.surface() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g_iter: Vec<SurfaceAutomorphism> = (1..=m_cap).filter_map(|m| g.iterate(m as i64).ok()).collect();
    for n in 1..=n_cap {
        let Ok(fnn) = f.iterate(n as i64) else { continue };
        for (i, gm) in g_iter.iter().enumerate() {
            if same_map(&fnn, gm, &mut rng) {
                return Some((n, i as u32 + 1));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rational::int;
    use crate::maps::{henon, markov, monomial, Generator};

    #[test]
    fn smith_form_is_diagonal_and_unimodular() {
        for m in [[[1i128, 1], [1, 0]], [[4, 3], [3, 1]], [[12, 8], [8, 4]], [[6, 4], [2, 8]]] {
            let ((d1, d2), u, v) = smith_normal_form(m);
            let mul = |a: [[i128; 2]; 2], b: [[i128; 2]; 2]| {
                let mut c = [[0i128; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                    }
                }
                c
            };
            assert_eq!(mul(mul(u, m), v), [[d1, 0], [0, d2]]);
            assert_eq!(d2 % d1.max(1), 0);
            let det = |a: [[i128; 2]; 2]| a[0][0] * a[1][1] - a[0][1] * a[1][0];
            assert_eq!(det(u).abs(), 1);
            assert_eq!(det(v).abs(), 1);
        }
    }

    #[test]
    fn torus_counts() {
        let a = Matrix2::new([[2, 1], [1, 1]]).unwrap();
        let counts: Vec<u64> = (1..=3).map(|n| torus_periodic(&a, n).unwrap().count).collect();
        assert_eq!(counts, vec![1, 5, 16]);
        let s = torus_periodic(&a, 1).unwrap();
        assert_eq!(s.representatives, vec![[int(0), int(0)]]);
        for n in 1..=4 {
            let an = a.pow(n).unwrap();
            let s = torus_periodic(&a, n as u32).unwrap();
            assert!(s.representatives.iter().all(|e| torsion_fixed(&an, e)));
        }
    }

    #[test]
    fn henon_fixed_points() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let s = numeric_periodic(&f, 1, &PeriodicConfig::default()).unwrap();
        assert_eq!(s.points.len(), 2);
        let mut xs: Vec<f64> = s.points.iter().map(|p| p[0].re).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0]).abs() < 1e-12 && (xs[1] - 2.0).abs() < 1e-12);
        let s2 = numeric_periodic(&f, 2, &PeriodicConfig::default()).unwrap();
        assert_eq!(s2.expected, Some(4));
        assert_eq!(s2.points.len(), 4);
    }

    #[test]
    fn markov_newton_points() {
        let f = markov(int(0), &[Generator::Sz, Generator::Pxy]);
        let s = numeric_periodic(&f, 1, &PeriodicConfig::default()).unwrap();
        assert!(!s.points.is_empty());
        assert!(s.cycles.iter().all(|c| c.residual < 1e-9));
    }

    #[test]
    fn shared_iterates() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let f2 = f.iterate(2).unwrap();
        assert_eq!(shared_iterate_test(&f, &f2, 5, 5), Some((2, 1)));
        let a = monomial([[2, 1], [1, 1]]).unwrap();
        let a3 = a.iterate(3).unwrap();
        assert_eq!(shared_iterate_test(&a3, &a, 5, 5), Some((1, 3)));
        assert_eq!(shared_iterate_test(&a, &a3, 5, 5), Some((3, 1)));
        let g = henon(&[(&[1, 0, 1], 1)]);
        assert_eq!(shared_iterate_test(&f, &g, 5, 5), None);
    }

    #[test]
    fn translation_conjugates() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let g = translated_conjugate(&f, &int(5)).unwrap();
        let id = |q: &Q| q.clone();
        // g(T p) = T f(p)
        let p = vec![int(1), int(-2)];
        let tp: Vec<Q> = p.iter().map(|c| c + int(5)).collect();
        let lhs = g.apply(&tp, &id).unwrap();
        let rhs: Vec<Q> = f.apply(&p, &id).unwrap().iter().map(|c| c + int(5)).collect();
        assert_eq!(lhs, rhs);
    }
}
