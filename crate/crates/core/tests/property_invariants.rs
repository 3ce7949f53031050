//! Property-based invariants: randomized structural laws that must hold for
//! arbitrary admissible inputs, not just the seeded samples.

use metriclab_core::comparison::{comparison_angle, error_functions};
use metriclab_core::measure::{packing_number_points, threshold_constants};
use metriclab_core::space::lp_dist;
use metriclab_core::tangent::{gh_distance_bounds, FinitePointedSample};
use metriclab_core::{CurvatureParams, PointChart, SpaceModel};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_filter("finite", |x| x.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lp_distance_is_a_norm_metric(
        p in 2.0..6.0f64,
        x in prop::array::uniform3(coord()),
        y in prop::array::uniform3(coord()),
        z in prop::array::uniform3(coord()),
    ) {
        let dxy = lp_dist(p, &x, &y);
        let dyx = lp_dist(p, &y, &x);
        prop_assert!((dxy - dyx).abs() <= 1e-12 * (1.0 + dxy));
        prop_assert!(lp_dist(p, &x, &x) == 0.0);
        prop_assert!(lp_dist(p, &x, &z) <= dxy + lp_dist(p, &y, &z) + 1e-9);
    }

    #[test]
    fn comparison_angles_of_a_triangle_sum_to_pi(
        a in 0.1..5.0f64,
        b in 0.1..5.0f64,
        t in 0.05..0.95f64,
    ) {
        // Any (a, b, c) with |a-b| < c < a+b forms a triangle.
        let c = (a - b).abs() + t * ((a + b) - (a - b).abs());
        if c > 1e-6 {
            let alpha = comparison_angle(b, c, a).unwrap();
            let beta = comparison_angle(a, c, b).unwrap();
            let gamma = comparison_angle(a, b, c).unwrap();
            prop_assert!((alpha + beta + gamma - std::f64::consts::PI).abs() < 1e-7);
        }
    }

    #[test]
    fn error_budgets_vanish_with_the_numerator(
        s in 1.0..4.0f64,
        cc in 0.0..3.0f64,
        d in 0.1..10.0f64,
    ) {
        let params = CurvatureParams { s, c: cc, d: f64::INFINITY, n: 2 };
        let b = error_functions(&params, 0.0, d).unwrap();
        prop_assert_eq!(b.delta_s, 0.0);
        prop_assert_eq!(b.delta_c, 0.0);
        prop_assert_eq!(b.bar_delta_s, 0.0);
        prop_assert_eq!(b.bar_delta_sc, 0.0);
        // Budgets are monotone in t.
        let small = error_functions(&params, 0.1, d).unwrap();
        let large = error_functions(&params, 0.2, d).unwrap();
        prop_assert!(small.bar_delta_sc <= large.bar_delta_sc);
        prop_assert!(small.delta_c <= large.delta_c);
    }

    #[test]
    fn gh_bounds_nest_and_detect_identity(
        seed in 0u64..1000,
        count in 3usize..7,
    ) {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let sample = metriclab_core::tangent::blowup_sample(
            &space,
            &PointChart::new(vec![0.0, 0.0]),
            1.0,
            count,
            1.0,
            seed,
        ).unwrap();
        let (lo, hi) = gh_distance_bounds(&sample, &sample, 8).unwrap();
        prop_assert_eq!((lo, hi), (0.0, 0.0));
        let other = metriclab_core::tangent::blowup_sample(
            &space,
            &PointChart::new(vec![0.0, 0.0]),
            1.0,
            count,
            1.0,
            seed ^ 0xdead,
        ).unwrap();
        let (lo, hi) = gh_distance_bounds(&sample, &other, 8).unwrap();
        prop_assert!(lo <= hi + 1e-15);
    }

    #[test]
    fn packing_counts_decrease_in_the_radius(
        seed in 0u64..500,
        r1 in 0.05..0.2f64,
        factor in 1.1..3.0f64,
    ) {
        let space = SpaceModel::euclidean(2).unwrap();
        let pts = space
            .sample_ball(&PointChart::new(vec![0.0, 0.0]), 1.0, 300, seed)
            .unwrap();
        let fine = packing_number_points(&space, &pts, r1).unwrap();
        let coarse = packing_number_points(&space, &pts, r1 * factor).unwrap();
        prop_assert!(coarse <= fine);
        prop_assert!(fine >= 1);
    }

    #[test]
    fn threshold_constants_respect_their_invariants(
        delta in 0.01..0.9f64,
        n0 in 1usize..30,
        c in 1.0..6.0f64,
    ) {
        let t = threshold_constants(delta, None, n0, c).unwrap();
        prop_assert!((t.l1 - (t.l0 + 2.0)).abs() < 1e-12);
        prop_assert!(t.s0 > 1.0 && t.s0 <= 4.0);
        prop_assert_eq!(t.m, n0 + 2);
        prop_assert!((t.k_bar - c.powi(t.m as i32 - 1)).abs() <= 1e-9 * t.k_bar);
    }

    #[test]
    fn distance_matrices_round_trip_csv(
        seed in 0u64..500,
        count in 2usize..7,
    ) {
        let space = SpaceModel::cone(4.0).unwrap();
        let pts = space
            .sample_ball(&PointChart::new(vec![1.0, 1.0]), 0.5, count, seed)
            .unwrap();
        let sample = FinitePointedSample::from_points(&space, &pts, count / 2).unwrap();
        let back = FinitePointedSample::from_csv(&sample.to_csv()).unwrap();
        prop_assert_eq!(back.base(), sample.base());
        for i in 0..sample.len() {
            for j in 0..sample.len() {
                prop_assert!((back.dist(i, j) - sample.dist(i, j)).abs() < 1e-15);
            }
        }
    }
}
