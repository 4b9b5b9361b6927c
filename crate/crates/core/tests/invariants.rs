use proptest::prelude::*;
use stable_potential::kernels::{green_ball, martin_ball, poisson_ball};
use stable_potential::{BallSpec, Point, StableIndex};

fn inside(r: f64, t: f64) -> Point {
    Point::from([r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_green_is_symmetric_and_positive(a in 0.2f64..1.9, r1 in 0.0f64..0.95, t1 in 0.0f64..6.3, r2 in 0.0f64..0.95, t2 in 0.0f64..6.3) {
        let idx = StableIndex::new(2, a).unwrap();
        let b = BallSpec::unit(2);
        let (x, y) = (inside(r1, t1), inside(r2, t2));
        prop_assume!(x.dist(&y) > 1e-6);
        let g1 = green_ball(&idx, &b, &x, &y).unwrap();
        let g2 = green_ball(&idx, &b, &y, &x).unwrap();
        prop_assert!(g1 > 0.0);
        prop_assert!((g1 - g2).abs() <= 1e-10 * g1);
    }

    #[test]
    fn kernels_scale_under_dilation(a in 0.2f64..1.9, r1 in 0.0f64..0.9, t1 in 0.0f64..6.3, s in 0.3f64..4.0, t2 in 0.0f64..6.3, rho in 1.05f64..3.0) {
        let idx = StableIndex::new(2, a).unwrap();
        let b = BallSpec::unit(2);
        let big = BallSpec::new(Point::zeros(2), s).unwrap();
        let x = inside(r1, t1);
        let z = inside(1.0, t2);
        let m1 = martin_ball(&idx, &b, &x, &z).unwrap();
        let m2 = martin_ball(&idx, &big, &x.scale(s), &z.scale(s)).unwrap();
        prop_assert!((m1 / m2 - 1.0).abs() < 1e-10);
        let w = inside(rho, t2);
        let k1 = poisson_ball(&idx, &b, &x, &w).unwrap();
        let k2 = poisson_ball(&idx, &big, &x.scale(s), &w.scale(s)).unwrap();
        prop_assert!((k1 / (k2 * s.powi(2)) - 1.0).abs() < 1e-10);
    }
}
