use proptest::prelude::*;

use surfdyn::arith::rational::{frac, int};
use surfdyn::arith::Quadratic;
use surfdyn::heights::{self, HeightConfig, Verdict};
use surfdyn::maps::henon;
use surfdyn::{Coords, Point, Surface};

fn quad_point(x: Quadratic, y: Quadratic) -> Point {
    Point {
        surface: Surface::Plane,
        coords: Coords::Quadratic(vec![x, y]),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn galois_conjugates_share_height(a in -4i64..4, b in 1i64..4, c in -4i64..4, d in prop_oneof![Just(2i64), Just(3), Just(5)]) {
        let f = henon(&[(&[-1, 0, 1], 1)]);
        let cfg = HeightConfig::default();
        let x = Quadratic::new(int(a), int(b), d);
        let y = Quadratic::new(int(c), int(1), d);
        let h1 = heights::canonical_height(&f, &quad_point(x.clone(), y.clone()), &cfg).unwrap();
        let h2 = heights::canonical_height(&f, &quad_point(x.conjugate(), y.conjugate()), &cfg).unwrap();
        prop_assert!((h1.h_total - h2.h_total).abs() <= h1.error_bound + h2.error_bound + 1e-12);
    }

    #[test]
    fn height_is_nonnegative(xn in -9i64..9, xd in 1i64..9, yn in -9i64..9, yd in 1i64..9) {
        let f = henon(&[(&[0, 1, 0, 1], -1)]);
        let p = Point::rational(Surface::Plane, vec![frac(xn, xd), frac(yn, yd)]);
        let h = heights::canonical_height(&f, &p, &HeightConfig::default()).unwrap();
        prop_assert!(h.h_total >= -h.error_bound);
    }
}

#[test]
fn fixed_points_are_periodic() {
    let f = henon(&[(&[0, 0, 1], 1)]);
    let cfg = HeightConfig::default();
    for (x, y) in [(0, 0), (2, 2)] {
        let p = Point::rational(Surface::Plane, vec![int(x), int(y)]);
        assert_eq!(heights::periodicity_test(&f, &p, &cfg).unwrap(), Verdict::Periodic);
    }
    let p = Point::rational(Surface::Plane, vec![int(1), int(0)]);
    assert_eq!(heights::periodicity_test(&f, &p, &cfg).unwrap(), Verdict::NonPeriodic);
}

#[test]
fn moriwaki_sides_agree() {
    use surfdyn::arith::expr::to_ratfunc;
    let fam = heights::example_family();
    let pt = [to_ratfunc("t").unwrap(), to_ratfunc("1").unwrap()];
    let r = heights::moriwaki_height(&fam, &pt, 256, 64, &HeightConfig::default()).unwrap();
    assert!(r.rel_diff < 1e-2, "{r:?}");
    assert_eq!(r.excluded_primes, vec![2]);
}
