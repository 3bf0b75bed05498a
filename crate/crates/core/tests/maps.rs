use num_complex::Complex64 as C;
use proptest::prelude::*;

use surfdyn::arith::rational::int;
use surfdyn::maps::{henon, markov, monomial, word_matrix};
use surfdyn::periodic::{smith_normal_form, torsion_period, torus_periodic};
use surfdyn::{Generator, Matrix2};

fn close(a: &[C], b: &[C], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * (1.0 + x.norm()))
}

fn henon_poly() -> impl Strategy<Value = (Vec<i64>, i64)> {
    (prop::collection::vec(-3i64..=3, 2..=3), 1i64..=2, prop_oneof![Just(1i64), Just(-1), Just(2)])
        .prop_map(|(mut low, lead, delta)| {
            low.push(lead);
            (low, delta)
        })
}

fn unimodular() -> impl Strategy<Value = [[i64; 2]; 2]> {
    prop::collection::vec(prop_oneof![Just([[1i64, 1], [0, 1]]), Just([[1, 0], [1, 1]]), Just([[0, 1], [1, 0]])], 1..6)
        .prop_map(|ms| {
            ms.iter().fold([[1i64, 0], [0, 1]], |a, b| {
                [
                    [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
                    [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
                ]
            })
        })
}

proptest! {
    #[test]
    fn henon_inverse_undoes_map((p, d) in henon_poly(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let f = henon(&[(&p, d)]);
        let num = f.to_numeric();
        let inv = num.inverse();
        let pt = vec![C::new(x, 0.3), C::new(y, -0.2)];
        let back = inv.eval(&num.eval(&pt).unwrap()).unwrap();
        prop_assert!(close(&pt, &back, 1e-9));
    }

    #[test]
    fn composition_matches_sequential_eval((p, d) in henon_poly(), (q, e) in henon_poly(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let f = henon(&[(&p, d)]);
        let g = henon(&[(&q, e)]);
        let fg = f.compose(&g).unwrap().to_numeric();
        let pt = vec![C::new(x, 0.1), C::new(y, 0.0)];
        let seq = f.to_numeric().eval(&g.to_numeric().eval(&pt).unwrap()).unwrap();
        prop_assert!(close(&fg.eval(&pt).unwrap(), &seq, 1e-9));
    }

    #[test]
    fn henon_degree_is_multiplicative((p, d) in henon_poly(), (q, e) in henon_poly()) {
        let f = henon(&[(&p, d), (&q, e)]);
        prop_assert_eq!(f.dynamical_degree(), ((p.len() - 1) * (q.len() - 1)) as f64);
    }

    #[test]
    fn monomial_inverse_is_identity(m in unimodular(), r in 0.2f64..3.0, s in 0.2f64..3.0) {
        let f = monomial(m).unwrap();
        let id = f.compose(&f.inverse()).unwrap();
        let pt = vec![C::from_polar(r, 0.4), C::from_polar(s, -1.1)];
        prop_assert!(close(&id.to_numeric().eval(&pt).unwrap(), &pt, 1e-9));
    }

    #[test]
    fn smith_form_divides(a in -40i128..40, b in -40i128..40, c in -40i128..40, d in -40i128..40) {
        let m = [[a, b], [c, d]];
        let ((d1, d2), u, v) = smith_normal_form(m);
        let mul = |x: [[i128; 2]; 2], y: [[i128; 2]; 2]| {
            [
                [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
                [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
            ]
        };
        prop_assert_eq!(mul(mul(u, m), v), [[d1, 0], [0, d2]]);
        prop_assert!(d1 >= 0 && d2 >= 0);
        if d1 != 0 {
            prop_assert_eq!(d2 % d1, 0);
        } else {
            prop_assert_eq!(d2, 0);
        }
        for t in [u, v] {
            prop_assert_eq!((t[0][0] * t[1][1] - t[0][1] * t[1][0]).abs(), 1);
        }
        prop_assert_eq!(d1 * d2, (a * d - b * c).abs());
    }

    #[test]
    fn torus_count_is_det(m in unimodular(), n in 1u32..4) {
        let a = Matrix2::new(m).unwrap();
        prop_assume!(a.spectral_radius() > 1.0 + 1e-9);
        let spec = torus_periodic(&a, n).unwrap();
        let an = a.pow(n as i64).unwrap().sub_identity();
        prop_assert_eq!(spec.count as i64, (an[0][0] * an[1][1] - an[0][1] * an[1][0]).abs());
        for e in &spec.representatives {
            let k = torsion_period(&a, e, n as u64).unwrap();
            prop_assert_eq!(n as u64 % k, 0);
        }
    }
}

#[test]
fn markov_word_degree() {
    let f = markov(int(0), &[Generator::Sx, Generator::Sy, Generator::Sz]);
    assert!((f.dynamical_degree() - (2.0 + 5f64.sqrt())).abs() < 1e-12);
    let m = word_matrix(&[Generator::Sx, Generator::Sy]).unwrap();
    assert!(m.spectral_radius() <= 1.0 + 1e-12);
}

#[test]
fn markov_map_preserves_surface() {
    let f = markov(int(3), &[Generator::Sx, Generator::Sy, Generator::Sz]).to_numeric();
    let (x, y) = (C::new(0.7, 0.2), C::new(-0.4, 1.1));
    let b = -x * y;
    let c = x * x + y * y - 3.0;
    let z = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
    let p = f.eval(&[x, y, z]).unwrap();
    let r = surfdyn::maps::markov_relative_residual(&[p[0], p[1], p[2]], C::new(3.0, 0.0));
    assert!(r < 1e-12, "{r}");
}
