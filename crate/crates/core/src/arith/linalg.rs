//! Dense solves for the tiny systems used by Newton steps and divisor decompositions.

use num_complex::Complex64;

pub type Mat = Vec<Vec<f64>>;

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn transpose(m: &[Vec<f64>]) -> Mat {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j]).collect())
        .collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Mat {
    let bt = transpose(b);
    a.iter()
        .map(|row| bt.iter().map(|col| row.iter().zip(col).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// xᵀ Q y
pub fn bilinear(q: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    dot(x, &mat_vec(q, y))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least-squares solve of a possibly rectangular system by normal equations.
/// Returns `None` when the normal matrix is numerically singular.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let at = transpose(a);
    let ata = mat_mul(&at, a);
    let atb = mat_vec(&at, b);
    solve(ata, atb)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Mat, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn solve_complex(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 || !a[piv][col].norm().is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].inv();
        for r in col + 1..n {
            let f = a[r][col] * inv;
            if f.norm() == 0.0 {
                continue;
            }
            for c in col..n {
                let t = a[col][c];
                a[r][c] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: Complex64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Eigenvalues of a real or complex 2×2 matrix.
pub fn eig2(m: [[Complex64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let a = (tr + disc) / 2.0;
    let b = (tr - disc) / 2.0;
    // order by modulus, largest first
    if a.norm() >= b.norm() {
        [a, b]
    } else {
        [b, a]
    }
}

pub fn complex_mat_mul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

/// Eigenvalues of a 1×1, 2×2 or 3×3 matrix from its characteristic polynomial.
pub fn eigenvalues(m: &[Vec<Complex64>]) -> Vec<Complex64> {
    match m.len() {
        0 => Vec::new(),
        1 => vec![m[0][0]],
        2 => eig2([[m[0][0], m[0][1]], [m[1][0], m[1][1]]]).to_vec(),
        3 => {
            let tr = m[0][0] + m[1][1] + m[2][2];
            let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2]
                - m[0][2] * m[2][0]
                + m[1][1] * m[2][2]
                - m[1][2] * m[2][1];
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let mut roots = cubic_roots(-tr, minors, -det);
            roots.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            roots
        }
        _ => Vec::new(),
    }
}

/// Roots of z³ + a z² + b z + c by Durand–Kerner with Newton polish.
fn cubic_roots(a: Complex64, b: Complex64, c: Complex64) -> Vec<Complex64> {
    let p = |z: Complex64| ((z + a) * z + b) * z + c;
    let dp = |z: Complex64| (3.0 * z + 2.0 * a) * z + b;
    let r = 1.0 + a.norm().max(b.norm()).max(c.norm());
    let seed = Complex64::new(0.4, 0.9);
    let mut z = [seed * r, seed * seed * r, seed * seed * seed * r];
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..3 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = p(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * r {
            break;
        }
    }
    for zi in z.iter_mut() {
        let d = dp(*zi);
        if d.norm() > 0.0 {
            *zi -= p(*zi) / d;
        }
    }
    z.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(a.clone(), vec![3.0, 5.0]).unwrap();
        assert!(max_abs_diff(&mat_vec(&a, &x), &[3.0, 5.0]) < 1e-14);
    }

    #[test]
    fn singular_is_rejected() {
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn cubic_eigenvalues() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let m = vec![
            vec![c(2.0), c(0.0), c(0.0)],
            vec![c(0.0), c(-1.0), c(0.0)],
            vec![c(0.0), c(0.0), c(0.5)],
        ];
        let ev = eigenvalues(&m);
        assert!((ev[0] - c(2.0)).norm() < 1e-12);
        assert!((ev[1] - c(-1.0)).norm() < 1e-12);
        assert!((ev[2] - c(0.5)).norm() < 1e-12);
    }
}
