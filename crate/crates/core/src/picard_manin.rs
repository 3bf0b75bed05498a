//! Divisors at infinity on a fixed completion: intersection form, pullback operator,
//! the invariant classes θ± and the decomposition D = aθ⁺ + bD⁻ + R.

use serde::{Deserialize, Serialize};

use crate::arith::linalg::{self, Mat};
use crate::error::{Error, Result};
use crate::maps::{AutoOver, Matrix2, SurfaceAutomorphism, LOXODROMIC_EPS};

pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 10_000;
pub const IDENTITY_TOL: f64 = 1e-9;
pub const BASIS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionModel {
    pub names: Vec<String>,
    #[serde(rename = "Q")]
    pub q: Mat,
    #[serde(rename = "Mf")]
    pub mf: Mat,
    #[serde(rename = "MfInv")]
    pub mf_inv: Mat,
    #[serde(rename = "pPlus")]
    pub p_plus: Vec<usize>,
    #[serde(rename = "pMinus")]
    pub p_minus: Vec<usize>,
    /// The model describes f^iterate (built-ins may square a monomial matrix).
    #[serde(default = "one")]
    pub iterate: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub lambda1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub a: f64,
    pub b: f64,
    pub r: Vec<f64>,
    pub d_minus: Vec<f64>,
    /// max-norm of D − (aθ⁺ + bD⁻ + R)
    pub residual: f64,
    /// D·θ⁻ computed directly from the intersection form.
    pub pairing_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub eigen_plus: f64,
    pub eigen_minus: f64,
    pub pairing: f64,
    pub self_plus: f64,
    pub self_minus: f64,
    pub projection: f64,
    pub effective: bool,
}

impl CompletionModel {
    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        if r == 0 {
            return Err(Error::InvalidModel("no boundary divisors".into()));
        }
        for (name, m) in [("Q", &self.q), ("Mf", &self.mf), ("MfInv", &self.mf_inv)] {
            if m.len() != r || m.iter().any(|row| row.len() != r) {
                return Err(Error::InvalidModel(format!("{name} must be {r}×{r}")));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} has non-finite entries")));
            }
        }
        for i in 0..r {
            for j in 0..r {
                if (self.q[i][j] - self.q[j][i]).abs() > IDENTITY_TOL {
                    return Err(Error::InvalidModel("Q is not symmetric".into()));
                }
            }
        }
        if self.mf.iter().chain(&self.mf_inv).flatten().any(|&x| x < 0.0) {
            return Err(Error::InvalidModel("pullback matrices must be nonnegative".into()));
        }
        for &i in self.p_plus.iter().chain(&self.p_minus) {
            if i >= r {
                return Err(Error::InvalidModel(format!("incidence index {i} out of range")));
            }
        }
        Ok(())
    }

    /// max |Mfᵀ Q − Q Mf_inv|: the pushforward is the Q-adjoint of the pullback.
    pub fn projection_residual(&self) -> f64 {
        let lhs = linalg::mat_mul(&linalg::transpose(&self.mf), &self.q);
        let rhs = linalg::mat_mul(&self.q, &self.mf_inv);
        lhs.iter()
            .zip(&rhs)
            .map(|(a, b)| linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }

    pub fn squared(&self) -> CompletionModel {
        CompletionModel {
            mf: linalg::mat_mul(&self.mf, &self.mf),
            mf_inv: linalg::mat_mul(&self.mf_inv, &self.mf_inv),
            iterate: self.iterate * 2,
            ..self.clone()
        }
    }
}

pub fn pullback(model: &CompletionModel, d: &[f64]) -> Vec<f64> {
    linalg::mat_vec(&model.mf, d)
}

/// Perron eigenvector by power iteration on M + I, with a Rayleigh-quotient eigenvalue.
pub fn perron(m: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let r = m.len();
    let mut v = vec![1.0; r];
    for _ in 0..POWER_MAX_ITER {
        let mv = linalg::mat_vec(m, &v);
        let mut w: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + b).collect();
        let norm = w.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateEigenspace(0));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let delta = linalg::max_abs_diff(&w, &v);
        v = w;
        if delta <= POWER_TOL {
            let mv = linalg::mat_vec(m, &v);
            let lambda = linalg::dot(&mv, &v) / linalg::dot(&v, &v);
            return Ok((lambda, v));
        }
    }
    Err(Error::DegenerateEigenspace(POWER_MAX_ITER))
}

pub fn theta_pair(model: &CompletionModel) -> Result<ThetaPair> {
    model.validate()?;
    let (lp, mut tp) = perron(&model.mf)?;
    if lp <= 1.0 + LOXODROMIC_EPS {
        return Err(Error::NotLoxodromic(lp));
    }
    let (_, mut tm) = perron(&model.mf_inv)?;
    if let Some(first) = tp.iter().copied().find(|x| x.abs() > 1e-15) {
        tp.iter_mut().for_each(|x| *x /= first);
    }
    let pair = linalg::bilinear(&model.q, &tp, &tm);
    if pair.abs() < 1e-12 {
        return Err(Error::InvalidModel("θ⁺·θ⁻ vanishes; cannot normalize".into()));
    }
    tm.iter_mut().for_each(|x| *x /= pair);
    // exact zeros instead of −0.0 or round-off negatives
    for x in tp.iter_mut().chain(tm.iter_mut()) {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    Ok(ThetaPair {
        theta_plus: tp,
        theta_minus: tm,
        lambda1: lp,
    })
}

pub fn identities(model: &CompletionModel, th: &ThetaPair) -> IdentityReport {
    let l = th.lambda1;
    let mp = linalg::mat_vec(&model.mf, &th.theta_plus);
    let lp: Vec<f64> = th.theta_plus.iter().map(|x| l * x).collect();
    let mm = linalg::mat_vec(&model.mf_inv, &th.theta_minus);
    let lm: Vec<f64> = th.theta_minus.iter().map(|x| l * x).collect();
    IdentityReport {
        eigen_plus: linalg::max_abs_diff(&mp, &lp),
        eigen_minus: linalg::max_abs_diff(&mm, &lm),
        pairing: linalg::bilinear(&model.q, &th.theta_plus, &th.theta_minus),
        self_plus: linalg::bilinear(&model.q, &th.theta_plus, &th.theta_plus),
        self_minus: linalg::bilinear(&model.q, &th.theta_minus, &th.theta_minus),
        projection: model.projection_residual(),
        effective: th
            .theta_plus
            .iter()
            .chain(&th.theta_minus)
            .all(|&x| x >= -IDENTITY_TOL),
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

/// Secondary class D⁻ with f*D⁻ = D⁻/λ, built on the divisors through p₊ and corrected
/// by λ·R where R = f*(γE + δF) − (γE + δF)/λ.
pub fn d_minus(model: &CompletionModel, th: &ThetaPair) -> Result<Vec<f64>> {
    let r = model.rank();
    let l = th.lambda1;
    if is_integer(l) {
        return Ok(vec![0.0; r]);
    }
    let [e, f] = model.p_plus[..] else {
        return Err(Error::BasisFailure(f64::INFINITY));
    };
    let blk = [
        [model.mf[e][e], model.mf[e][f]],
        [model.mf[f][e], model.mf[f][f]],
    ];
    // kernel of blk − I/λ
    let inv = 1.0 / l;
    let (a, b, c, d) = (blk[0][0] - inv, blk[0][1], blk[1][0], blk[1][1] - inv);
    let (g, h) = if a.abs() + b.abs() >= c.abs() + d.abs() {
        (b, -a)
    } else {
        (d, -c)
    };
    let norm = g.abs().max(h.abs());
    if norm == 0.0 {
        return Err(Error::BasisFailure(f64::INFINITY));
    }
    let (g, h) = if g < 0.0 || (g == 0.0 && h < 0.0) {
        (-g / norm, -h / norm)
    } else {
        (g / norm, h / norm)
    };
    let mut u = vec![0.0; r];
    u[e] = g;
    u[f] = h;
    let fu = linalg::mat_vec(&model.mf, &u);
    let rr: Vec<f64> = fu.iter().zip(&u).map(|(x, y)| x - y / l).collect();
    Ok(u.iter().zip(&rr).map(|(x, y)| x + l * y).collect())
}

pub fn decompose(model: &CompletionModel, th: &ThetaPair, dvec: &[f64]) -> Result<Decomposition> {
    let r = model.rank();
    if dvec.len() != r {
        return Err(Error::InvalidModel(format!("divisor has {} entries, expected {r}", dvec.len())));
    }
    let dm = d_minus(model, th)?;
    let use_dm = dm.iter().any(|x| x.abs() > 0.0);
    let rest: Vec<usize> = (0..r).filter(|i| !model.p_plus.contains(i)).collect();
    // columns: θ⁺, [D⁻], e_i for i ∉ p₊
    let mut cols: Vec<Vec<f64>> = vec![th.theta_plus.clone()];
    if use_dm {
        cols.push(dm.clone());
    }
    for &i in &rest {
        let mut e = vec![0.0; r];
        e[i] = 1.0;
        cols.push(e);
    }
    let a_mat: Mat = (0..r).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let x = if cols.len() == r {
        linalg::solve(a_mat.clone(), dvec.to_vec())
    } else {
        linalg::least_squares(&a_mat, dvec)
    }
    .ok_or(Error::BasisFailure(f64::INFINITY))?;
    let recon = linalg::mat_vec(&a_mat, &x);
    let residual = linalg::max_abs_diff(&recon, dvec);
    if !(residual <= BASIS_TOL) {
        return Err(Error::BasisFailure(residual));
    }
    let a = x[0];
    let b = if use_dm { x[1] } else { 0.0 };
    let off = if use_dm { 2 } else { 1 };
    let mut rv = vec![0.0; r];
    for (k, &i) in rest.iter().enumerate() {
        rv[i] = x[off + k];
    }
    Ok(Decomposition {
        a,
        b,
        r: rv,
        d_minus: dm,
        residual,
        pairing_a: linalg::bilinear(&model.q, dvec, &th.theta_minus),
    })
}

fn toric_pullback(a: &Matrix2) -> Mat {
    let rays: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];
    let m = a.0;
    let phi = |s: usize, w: [i64; 2]| -> f64 {
        (match s {
            0 => w[0].max(0),
            1 => (-w[0]).max(0),
            2 => w[1].max(0),
            _ => (-w[1]).max(0),
        }) as f64
    };
    rays.iter()
        .map(|v| {
            let w = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            (0..4).map(|s| phi(s, w)).collect()
        })
        .collect()
}

/// Boundary divisors containing the attracting direction of A.
fn incident(a: &Matrix2) -> Vec<usize> {
    let [[p, q], [r, s]] = a.to_f64();
    let (mu, _) = a.eigen_pair();
    // right eigenvector of the dominant eigenvalue
    let v = if q.abs() > 1e-300 { [q, mu - p] } else { [mu - s, r] };
    let v = if v[0] + v[1] < 0.0 { [-v[0], -v[1]] } else { v };
    let mut out = Vec::new();
    if v[0] > 1e-12 {
        out.push(0);
    }
    if v[0] < -1e-12 {
        out.push(1);
    }
    if v[1] > 1e-12 {
        out.push(2);
    }
    if v[1] < -1e-12 {
        out.push(3);
    }
    out
}

fn torus_model(a: &Matrix2, iterate: u32) -> CompletionModel {
    let inv = a.inverse();
    CompletionModel {
        names: ["X0", "Xinf", "Y0", "Yinf"].iter().map(|s| s.to_string()).collect(),
        q: vec![
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ],
        mf: toric_pullback(a),
        mf_inv: toric_pullback(&inv),
        p_plus: incident(a),
        p_minus: incident(&inv),
        iterate,
    }
}

fn torus_model_ok(model: &CompletionModel, lambda: f64) -> bool {
    if model.projection_residual() > IDENTITY_TOL {
        return false;
    }
    match (perron(&model.mf), perron(&model.mf_inv)) {
        (Ok((l1, _)), Ok((l2, _))) => {
            (l1 - lambda).abs() <= 1e-9 * lambda && (l2 - lambda).abs() <= 1e-9 * lambda
        }
        _ => false,
    }
}

/// Built-in completions: P² for Hénon compositions, P¹×P¹ for monomial maps whose toric
/// pullback is compatible with iteration (possibly after squaring).
pub fn builtin_completion(auto: &SurfaceAutomorphism) -> Result<CompletionModel> {
    match auto {
        AutoOver::Henon(h) if !h.factors.is_empty() && (h.all_forward() || h.all_inverse()) => {
            let d = h.degree_product();
            Ok(CompletionModel {
                names: vec!["Linf".into()],
                q: vec![vec![1.0]],
                mf: vec![vec![d]],
                mf_inv: vec![vec![d]],
                p_plus: vec![0],
                p_minus: vec![0],
                iterate: 1,
            })
        }
        AutoOver::Monomial(m) => {
            if !auto.is_loxodromic() {
                return Err(Error::NotLoxodromic(auto.dynamical_degree()));
            }
            let lambda = m.matrix.spectral_radius();
            let model = torus_model(&m.matrix, 1);
            if torus_model_ok(&model, lambda) {
                return Ok(model);
            }
            let sq = m.matrix.mul(&m.matrix)?;
            let model = torus_model(&sq, 2);
            if torus_model_ok(&model, lambda * lambda) {
                return Ok(model);
            }
            Err(Error::RequiresCustomModel)
        }
        _ => Err(Error::RequiresCustomModel),
    }
}

/// Normalizing weights κ± = 1/(H·θ∓) for the all-ones boundary divisor H.
pub fn branch_weights(model: &CompletionModel, th: &ThetaPair) -> (f64, f64) {
    let h = vec![1.0; model.rank()];
    let kp = 1.0 / linalg::bilinear(&model.q, &h, &th.theta_minus);
    let km = 1.0 / linalg::bilinear(&model.q, &h, &th.theta_plus);
    (kp, km)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{henon, monomial};

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn p2_model() {
        let f = henon(&[(&[0, 0, 1], 1)]);
        let m = builtin_completion(&f).unwrap();
        assert_eq!(m.mf, vec![vec![2.0]]);
        let th = theta_pair(&m).unwrap();
        assert_eq!(th.theta_plus, vec![1.0]);
        assert_eq!(th.theta_minus, vec![1.0]);
        assert!((th.lambda1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn torus_model_blocks() {
        let f = monomial([[2, 1], [1, 1]]).unwrap();
        let m = builtin_completion(&f).unwrap();
        assert_eq!(
            m.mf,
            vec![
                vec![2.0, 0.0, 1.0, 0.0],
                vec![0.0, 2.0, 0.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0]
            ]
        );
        assert_eq!(
            m.mf_inv,
            vec![
                vec![1.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0, 0.0],
                vec![0.0, 1.0, 2.0, 0.0],
                vec![1.0, 0.0, 0.0, 2.0]
            ]
        );
        assert!(m.projection_residual() < 1e-12);
        let th = theta_pair(&m).unwrap();
        assert!((th.lambda1 - PHI * PHI).abs() < 1e-12);
        // ruling blocks follow the expanding eigenvector (φ, 1) of A
        let tp = &th.theta_plus;
        assert!((tp[0] / tp[2] - PHI).abs() < 1e-12);
        assert!((tp[1] / tp[3] - PHI).abs() < 1e-12);
    }

    #[test]
    fn identity_is_not_loxodromic() {
        let m = CompletionModel {
            names: vec!["a".into(), "b".into()],
            q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            mf: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            mf_inv: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            p_plus: vec![0],
            p_minus: vec![1],
            iterate: 1,
        };
        assert!(matches!(theta_pair(&m), Err(Error::NotLoxodromic(_))));
    }

    #[test]
    fn theta_plus_decomposes_trivially() {
        let f = monomial([[2, 1], [1, 1]]).unwrap();
        let m = builtin_completion(&f).unwrap();
        let th = theta_pair(&m).unwrap();
        let d = decompose(&m, &th, &th.theta_plus).unwrap();
        assert!((d.a - 1.0).abs() < 1e-9);
        assert!(d.b.abs() < 1e-9);
        assert!(d.r.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn squared_model_scales_lambda() {
        let f = monomial([[2, 1], [1, 1]]).unwrap();
        let m = builtin_completion(&f).unwrap();
        let t1 = theta_pair(&m).unwrap();
        let t2 = theta_pair(&m.squared()).unwrap();
        assert!((t2.lambda1 - t1.lambda1 * t1.lambda1).abs() < 1e-9);
        assert!(linalg::max_abs_diff(&t1.theta_plus, &t2.theta_plus) < 1e-9);
        assert!(linalg::max_abs_diff(&t1.theta_minus, &t2.theta_minus) < 1e-9);
    }

    #[test]
    fn markov_needs_custom_model() {
        let w = crate::maps::markov(crate::arith::rational::int(0), &[crate::Generator::Sx]);
        assert_eq!(builtin_completion(&w), Err(Error::RequiresCustomModel));
    }
}
