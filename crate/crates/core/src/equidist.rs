//! Empirical equilibrium measures on 2D grids, total-variation comparisons, and the
//! polynomial-hull test {G = 0} versus periodic points.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::expr::{self, Expr};
use crate::arith::rational::Q;
use crate::error::{Error, Result};
use crate::green::{self, TateLimitConfig};
use crate::maps::{AutoOver, SurfaceAutomorphism};
use crate::periodic::{self, PeriodicConfig};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// (Re x, Re y)
    RealPlane,
    /// (log⁺|x|, log⁺|y|)
    LogPlus,
    /// (arg x, arg y), periodic
    Angle,
}

impl Projection {
    pub fn apply(&self, p: &[C]) -> (f64, f64) {
        match self {
            Projection::RealPlane => (p[0].re, p[1].re),
            Projection::LogPlus => (p[0].norm().ln().max(0.0), p[1].norm().ln().max(0.0)),
            Projection::Angle => {
                let a = |z: C| z.arg().rem_euclid(std::f64::consts::TAU);
                (a(p[0]), a(p[1]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub projection: Projection,
    /// [xmin, xmax, ymin, ymax]
    pub bounds: [f64; 4],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// N×N angle grid whose cell centres are the N-torsion angles.
    pub fn torsion(n: usize) -> Self {
        let h = std::f64::consts::PI / n as f64;
        GridSpec {
            projection: Projection::Angle,
            bounds: [-h, std::f64::consts::TAU - h, -h, std::f64::consts::TAU - h],
            nx: n,
            ny: n,
        }
    }

    fn cell(&self, (u, v): (f64, f64)) -> usize {
        let [x0, x1, y0, y1] = self.bounds;
        let idx = |t: f64, lo: f64, hi: f64, n: usize, wrap: bool| -> usize {
            let mut f = (t - lo) / (hi - lo);
            if wrap {
                f = f.rem_euclid(1.0);
            }
            ((f * n as f64).floor().max(0.0) as usize).min(n - 1)
        };
        let wrap = self.projection == Projection::Angle;
        idx(v, y0, y1, self.ny, wrap) * self.nx + idx(u, x0, x1, self.nx, wrap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMeasure {
    pub spec: GridSpec,
    /// Row-major masses, index j·nx + i.
    pub mass: Vec<f64>,
}

impl GridMeasure {
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn uniform(spec: &GridSpec) -> Self {
        let n = spec.nx * spec.ny;
        GridMeasure {
            spec: spec.clone(),
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// One 3×3 box pass; each cell spreads its mass evenly over its neighbours, so the
    /// total is preserved. Angle grids wrap around.
    pub fn smoothed(&self) -> Self {
        let (nx, ny) = (self.spec.nx as i64, self.spec.ny as i64);
        let wrap = self.spec.projection == Projection::Angle;
        let mut out = vec![0.0; self.mass.len()];
        for j in 0..ny {
            for i in 0..nx {
                let m = self.mass[(j * nx + i) as usize];
                if m == 0.0 {
                    continue;
                }
                let mut nbrs = Vec::with_capacity(9);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (mut a, mut b) = (i + di, j + dj);
                        if wrap {
                            a = a.rem_euclid(nx);
                            b = b.rem_euclid(ny);
                        } else if a < 0 || b < 0 || a >= nx || b >= ny {
                            continue;
                        }
                        nbrs.push((b * nx + a) as usize);
                    }
                }
                let share = m / nbrs.len() as f64;
                for k in nbrs {
                    out[k] += share;
                }
            }
        }
        GridMeasure {
            spec: self.spec.clone(),
            mass: out,
        }
    }
}

pub fn empirical_measure(points: &[Vec<C>], spec: &GridSpec) -> Result<GridMeasure> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::GridMismatch);
    }
    let mut mass = vec![0.0; spec.nx * spec.ny];
    let w = 1.0 / points.len() as f64;
    for p in points {
        mass[spec.cell(spec.projection.apply(p))] += w;
    }
    Ok(GridMeasure {
        spec: spec.clone(),
        mass,
    })
}

/// Total-variation distance without smoothing.
pub fn tv_distance(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::GridMismatch);
    }
    Ok(0.5 * a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Total-variation distance after one smoothing pass, in [0, 1].
pub fn measure_distance(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::GridMismatch);
    }
    Ok(tv_distance(&a.smoothed(), &b.smoothed())?.min(1.0))
}

/// All N-torsion points μ_N × μ_N as exponent pairs.
pub fn torsion_points(n: usize) -> Vec<[Q; 2]> {
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            v.push([Q::new(j.into(), n.into()), Q::new(k.into(), n.into())]);
        }
    }
    v
}

pub fn torsion_measure(exponents: &[[Q; 2]], spec: &GridSpec) -> Result<GridMeasure> {
    let pts: Vec<Vec<C>> = exponents.iter().map(|e| periodic::torsion_to_complex(e).to_vec()).collect();
    empirical_measure(&pts, spec)
}

/// Distance of the N-torsion measure from the uniform measure on the N×N angle grid.
pub fn torsion_uniformity(n: usize) -> Result<f64> {
    let spec = GridSpec::torsion(n);
    let m = torsion_measure(&torsion_points(n), &spec)?;
    measure_distance(&m, &GridMeasure::uniform(&spec))
}

/// Periodic points of period dividing n, exact for untwisted monomial maps.
pub fn periodic_points(auto: &SurfaceAutomorphism, n: usize, cfg: &PeriodicConfig) -> Result<Vec<Vec<C>>> {
    match auto {
        AutoOver::Monomial(m) => {
            let s = periodic::torus_periodic(&m.matrix, n as u32)?;
            Ok(s.representatives.iter().map(|e| periodic::torsion_to_complex(e).to_vec()).collect())
        }
        _ => Ok(periodic::numeric_periodic(auto, n, cfg)?.points),
    }
}

pub fn shared_measure_experiment(
    f: &SurfaceAutomorphism,
    g: &SurfaceAutomorphism,
    n: usize,
    spec: &GridSpec,
    cfg: &PeriodicConfig,
) -> Result<f64> {
    if f.surface() != g.surface() {
        return Err(Error::SurfaceMismatch(format!("{} vs {}", f.surface().name(), g.surface().name())));
    }
    let a = empirical_measure(&periodic_points(f, n, cfg)?, spec)?;
    let b = empirical_measure(&periodic_points(g, n, cfg)?, spec)?;
    measure_distance(&a, &b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRow {
    pub n: usize,
    pub points_n: usize,
    pub points_n2: usize,
    pub distance: f64,
}

/// d(μ(Per_n), μ(Per_{n+2})) for each n.
pub fn equidist_trend(auto: &SurfaceAutomorphism, ns: &[usize], spec: &GridSpec, cfg: &PeriodicConfig) -> Result<Vec<TrendRow>> {
    let mut cache: std::collections::BTreeMap<usize, Vec<Vec<C>>> = Default::default();
    let mut rows = Vec::new();
    for &n in ns {
        for k in [n, n + 2] {
            if !cache.contains_key(&k) {
                cache.insert(k, periodic_points(auto, k, cfg)?);
            }
        }
        let (a, b) = (&cache[&n], &cache[&(n + 2)]);
        let d = measure_distance(&empirical_measure(a, spec)?, &empirical_measure(b, spec)?)?;
        rows.push(TrendRow {
            n,
            points_n: a.len(),
            points_n2: b.len(),
            distance: d,
        });
    }
    Ok(rows)
}

pub fn is_non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

// ---------------- hull ----------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullGrid {
    /// Square [−half_width, half_width]² of the real plane.
    pub half_width: f64,
    pub nodes: usize,
    pub eps: f64,
}

impl Default for HullGrid {
    fn default() -> Self {
        HullGrid {
            half_width: 4.0,
            nodes: 513,
            eps: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullRow {
    pub poly: String,
    pub sup_s1: f64,
    pub sup_s2: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullReport {
    pub rows: Vec<HullRow>,
    pub max_gap: f64,
    pub s1_count: usize,
    pub s2_count: usize,
    /// sup over S₁ ≤ sup over S₂ + tol for every function.
    pub monotone: bool,
    pub tol: f64,
}

pub const HULL_TOL: f64 = 1e-9;

/// Real grid points with G ≤ ε.
pub fn small_green_set(auto: &SurfaceAutomorphism, grid: &HullGrid, cfg: &TateLimitConfig) -> Result<Vec<Vec<C>>> {
    if auto.dim() != 2 {
        return Err(Error::SurfaceMismatch("the hull grid lives on the real plane".into()));
    }
    let map = auto.to_numeric();
    let norm = green::normalization(auto);
    let n = grid.nodes.max(2);
    let h = 2.0 * grid.half_width / (n - 1) as f64;
    let out: Vec<Option<Vec<C>>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / n, idx % n);
            let p = vec![
                C::new(-grid.half_width + i as f64 * h, 0.0),
                C::new(-grid.half_width + j as f64 * h, 0.0),
            ];
            match green::green_total(&map, &p, norm, cfg) {
                Ok(g) if g.value <= grid.eps => Some(p),
                _ => None,
            }
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

pub fn hull_test(
    auto: &SurfaceAutomorphism,
    polys: &[String],
    n_per: usize,
    grid: &HullGrid,
    cfg: &TateLimitConfig,
    pcfg: &PeriodicConfig,
) -> Result<HullReport> {
    let exprs: Vec<Expr> = polys.iter().map(|s| expr::parse(s)).collect::<Result<_>>()?;
    let s1 = periodic_points(auto, n_per, pcfg)?;
    let s2 = small_green_set(auto, grid, cfg)?;
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sup = |e: &Expr, pts: &[Vec<C>]| -> Result<f64> {
        pts.iter().map(|p| expr::eval_complex(e, p).map(|v| v.norm())).try_fold(0.0f64, |a, v| Ok(a.max(v?)))
    };
    let mut rows = Vec::new();
    for (s, e) in polys.iter().zip(&exprs) {
        let a = sup(e, &s1)?;
        let b = sup(e, &s2)?;
        let scale = a.max(b);
        rows.push(HullRow {
            poly: s.clone(),
            sup_s1: a,
            sup_s2: b,
            rel_gap: if scale > 0.0 { (b - a).abs() / scale } else { 0.0 },
        });
    }
    Ok(HullReport {
        max_gap: rows.iter().map(|r| r.rel_gap).fold(0.0, f64::max),
        monotone: rows.iter().all(|r| r.sup_s1 <= r.sup_s2 + HULL_TOL * r.sup_s2.max(1.0)),
        rows,
        s1_count: s1.len(),
        s2_count: s2.len(),
        tol: HULL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec {
            projection: Projection::RealPlane,
            bounds: [0.0, 2.0, 0.0, 2.0],
            nx: 2,
            ny: 2,
        }
    }

    fn p(x: f64, y: f64) -> Vec<C> {
        vec![C::new(x, 0.0), C::new(y, 0.0)]
    }

    #[test]
    fn single_and_corner_masses() {
        let m = empirical_measure(&[p(0.5, 0.5)], &spec()).unwrap();
        assert_eq!(m.mass, vec![1.0, 0.0, 0.0, 0.0]);
        let m = empirical_measure(&[p(0.5, 0.5), p(1.5, 0.5), p(0.5, 1.5), p(1.5, 1.5)], &spec()).unwrap();
        assert_eq!(m.mass, vec![0.25; 4]);
        assert!(empirical_measure(&[], &spec()).is_err());
    }

    #[test]
    fn distances() {
        let s = GridSpec {
            nx: 8,
            ny: 8,
            bounds: [0.0, 8.0, 0.0, 8.0],
            ..spec()
        };
        let a = empirical_measure(&[p(0.5, 0.5)], &s).unwrap();
        let b = empirical_measure(&[p(7.5, 7.5)], &s).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(measure_distance(&a, &a).unwrap(), 0.0);
        let d = measure_distance(&a, &b).unwrap();
        assert!((d - measure_distance(&b, &a).unwrap()).abs() == 0.0 && d <= 1.0);
        assert!((a.smoothed().total() - 1.0).abs() < 1e-12);
        let other = GridSpec { nx: 4, ..s };
        let c = empirical_measure(&[p(0.5, 0.5)], &other).unwrap();
        assert!(matches!(measure_distance(&a, &c), Err(Error::GridMismatch)));
    }

    #[test]
    fn torsion_is_uniform() {
        for n in [5, 7, 11] {
            assert!(torsion_uniformity(n).unwrap() < 1e-12);
        }
    }
}
