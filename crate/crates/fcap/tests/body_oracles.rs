//! Convex-body geometry against Monte Carlo and classical closed forms.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use fcap::bodies::{finsler_perimeter, fit_homothety, minkowski_combine, ConvexBody};
use fcap::norms::{DualNorm, NormSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn monte_carlo_volume(body: &ConvexBody, half_side: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = body.dim;
    let hits = (0..samples)
        .filter(|_| {
            let x: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(-half_side..half_side))
                .collect();
            body.contains(&x)
        })
        .count();
    (2.0 * half_side).powi(n as i32) * hits as f64 / samples as f64
}

fn bodies() -> Vec<(ConvexBody, f64)> {
    let dual = DualNorm::new(NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap());
    vec![
        (
            ConvexBody::cuboid(vec![0.1, 0.0, -0.2], vec![0.5, 0.5, 1.5]).unwrap(),
            2.0,
        ),
        (
            ConvexBody::ellipsoid(
                vec![0.0; 3],
                vec![1.0, 0.2, 0.0, 0.2, 0.5, 0.0, 0.0, 0.0, 0.25],
            )
            .unwrap(),
            2.5,
        ),
        (
            ConvexBody::wulff(&dual, vec![0.0, 0.3, 0.0], 0.5).unwrap(),
            2.0,
        ),
    ]
}

#[test]
fn volumes_agree_with_monte_carlo() {
    for (k, (body, side)) in bodies().into_iter().enumerate() {
        let mc = monte_carlo_volume(&body, side, 400_000, k as u64);
        assert_relative_eq!(body.volume(4096), mc, max_relative = 1e-2);
    }
    let k = ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
    let d = ConvexBody::cuboid(vec![0.0; 3], vec![0.5, 1.0, 2.0]).unwrap();
    let m = minkowski_combine(0.5, &k, &d).unwrap();
    // Half the sum of two boxes is the box of averaged half-widths.
    assert_relative_eq!(
        monte_carlo_volume(&m, 2.0, 100_000, 9),
        8.0 * 0.75 * 1.0 * 1.5,
        max_relative = 2e-2
    );
}

#[test]
fn spheroid_surface_area() {
    // Prolate spheroid with semi-axes 1, 1, 2.
    let body = ConvexBody::ellipsoid(
        vec![0.0; 3],
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.25],
    )
    .unwrap();
    let e = (1.0f64 - 0.25).sqrt();
    let exact = 2.0 * PI * (1.0 + 2.0 / e * e.asin());
    let norm = NormSpec::euclidean(3).unwrap();
    assert_relative_eq!(
        finsler_perimeter(&body, &norm).unwrap(),
        exact,
        max_relative = 1e-3
    );
}

#[test]
fn wulff_perimeter_is_n_times_volume_over_radius() {
    for norm in [
        NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap(),
        NormSpec::ellipsoid(3, vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 3.0]).unwrap(),
    ] {
        let dual = DualNorm::new(norm.clone());
        let w = ConvexBody::wulff(&dual, vec![0.0; 3], 1.5).unwrap();
        let per = finsler_perimeter(&w, &norm).unwrap();
        assert_relative_eq!(per, 3.0 * w.volume(4096) / 1.5, max_relative = 2e-3);
    }
}

#[test]
fn box_perimeter_under_a_quadratic_norm() {
    let norm = NormSpec::diagonal(&[1.0, 4.0, 9.0]).unwrap();
    let b = ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
    // Each pair of faces has area 8 and weight H(e_i) = sqrt(a_ii).
    assert_relative_eq!(
        finsler_perimeter(&b, &norm).unwrap(),
        8.0 * (1.0 + 2.0 + 3.0),
        max_relative = 1e-12
    );
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn support_bounds_every_member(
        u in prop::collection::vec(-1.0..1.0f64, 3).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 0.1)),
        x in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let u = unit(u);
        for (body, _) in bodies() {
            if body.contains(&x) {
                let dot: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                prop_assert!(dot <= body.support(&u) + 1e-12);
            }
        }
    }

    #[test]
    fn ray_exits_lie_on_the_gauge_boundary(u in prop::collection::vec(-1.0..1.0f64, 3).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 0.1))) {
        let u = unit(u);
        for (body, _) in bodies() {
            let a = body.anchor();
            let t = body.ray_exit(&a, &u);
            let x: Vec<f64> = a.iter().zip(&u).map(|(p, v)| p + t * v).collect();
            prop_assert!((body.gauge(&x) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn homothety_is_recovered(ratio in 0.3..3.0f64, shift in prop::collection::vec(-0.5..0.5f64, 3)) {
        let k = ConvexBody::cuboid(vec![0.0; 3], vec![0.5, 0.7, 1.0]).unwrap();
        let d = ConvexBody::cuboid(shift.clone(), vec![0.5 * ratio, 0.7 * ratio, ratio]).unwrap();
        let fit = fit_homothety(&d, &k).unwrap();
        prop_assert!((fit.ratio - ratio).abs() <= 1e-6 * ratio);
        for (a, b) in fit.translation.iter().zip(&shift) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        prop_assert!(fit.residual <= 1e-6);
    }
}
