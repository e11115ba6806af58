//! Identities every norm family must satisfy, over random norms and points.

use fcap::norms::{DualNorm, NormKind, NormSpec, DEFAULT_DIRECTION_COUNT, DEFAULT_REFINE_TOL};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `A = L L^T + I / 2` with `L` lower triangular.
fn spd(entries: &[f64]) -> Vec<f64> {
    let l = [
        [entries[0], 0.0, 0.0],
        [entries[1], entries[2], 0.0],
        [entries[3], entries[4], entries[5]],
    ];
    let mut a = vec![0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            a[i * 3 + j] =
                (0..3).map(|k| l[i][k] * l[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    a
}

fn any_norm() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        Just(NormSpec::euclidean(3).unwrap()),
        prop::collection::vec(-1.0..1.0f64, 6)
            .prop_map(|e| NormSpec::ellipsoid(3, spd(&e)).unwrap()),
        (2.0..4.0f64, 1e-3..0.1f64).prop_map(|(q, d)| NormSpec::lq(3, q, d).unwrap()),
        (1.5..4.0f64).prop_map(|q| NormSpec::lq(3, q, 0.0).unwrap()),
    ]
}

fn any_point() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0..1.0f64, 3), -1.0..1.0f64)
        .prop_filter("away from the origin", |(v, _)| norm2(v) > 0.1)
        .prop_map(|(v, s)| v.iter().map(|x| x * 10f64.powf(s)).collect())
}

/// Raw `l^q` is not twice differentiable on coordinate planes; keep clear of them.
fn smooth_at(norm: &NormSpec, xi: &[f64]) -> bool {
    match norm.kind {
        NormKind::LqRegularized { delta, .. } if delta == 0.0 => {
            xi.iter().all(|x| x.abs() > 0.05 * norm2(xi))
        }
        _ => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn homogeneity(norm in any_norm(), xi in any_point(), s in -2.0..2.0f64) {
        let t = 10f64.powf(s);
        let scaled: Vec<f64> = xi.iter().map(|x| t * x).collect();
        let h = norm.eval(&xi).unwrap();
        prop_assert!((norm.eval(&scaled).unwrap() - t * h).abs() <= 1e-12 * t * h);
    }

    #[test]
    fn euler_identities(norm in any_norm(), xi in any_point()) {
        prop_assume!(smooth_at(&norm, &xi));
        let h = norm.eval(&xi).unwrap();
        let g = norm.grad(&xi).unwrap();
        prop_assert!((dot(&g, &xi) - h).abs() <= 1e-9 * h);
        let hess = norm.hess(&xi).unwrap();
        let scale = hess.iter().fold(0f64, |a, v| a.max(v.abs())) * norm2(&xi);
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| hess[i * 3 + j] * xi[j]).sum();
            prop_assert!(row.abs() <= 1e-9 * scale, "row {} of D2H xi is {}", i, row);
        }
    }

    #[test]
    fn norm_of_dual_gradient_is_one(norm in any_norm(), x in any_point()) {
        let dual = DualNorm::new(norm.clone());
        let g = dual.grad(&x).unwrap();
        prop_assert!((norm.eval(&g).unwrap() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn closed_form_dual_matches_maximization(norm in any_norm(), x in any_point()) {
        prop_assume!(norm.closed_form_dual().is_some());
        let closed = DualNorm::closed_form(norm.clone()).unwrap();
        let generic = DualNorm::generic(norm, DEFAULT_DIRECTION_COUNT, DEFAULT_REFINE_TOL);
        let (a, b) = (closed.eval(&x).unwrap(), generic.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-5 * a, "closed {} generic {}", a, b);
    }

    #[test]
    fn hessian_matches_differences(norm in any_norm(), xi in any_point()) {
        prop_assume!(smooth_at(&norm, &xi));
        let hess = norm.hess(&xi).unwrap();
        let scale = hess.iter().fold(0f64, |a, v| a.max(v.abs()));
        let step = 1e-5 * norm2(&xi);
        for j in 0..3 {
            let (mut a, mut b) = (xi.clone(), xi.clone());
            a[j] += step;
            b[j] -= step;
            let (ga, gb) = (norm.grad(&a).unwrap(), norm.grad(&b).unwrap());
            for i in 0..3 {
                let fd = (ga[i] - gb[i]) / (2.0 * step);
                prop_assert!((fd - hess[i * 3 + j]).abs() <= 1e-5 * scale, "entry ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn dual_of_dual_is_the_norm(norm in any_norm(), xi in any_point()) {
        // H(xi) = sup <xi, x> / H0(x), attained at x = grad H(xi).
        prop_assume!(smooth_at(&norm, &xi));
        let dual = DualNorm::new(norm.clone());
        let x = norm.grad(&xi).unwrap();
        let ratio = dot(&xi, &x) / dual.eval(&x).unwrap();
        prop_assert!((ratio - norm.eval(&xi).unwrap()).abs() <= 1e-6 * ratio);
    }
}
