//! Exact Wulff-shape solutions against oracles built here from scratch:
//! closed-form ball volumes, Monte Carlo volumes, 1D energy quadrature and a
//! finite-difference p-Laplacian.

use approx::assert_relative_eq;
use fcap::norms::{DualNorm, NormSpec};
use fcap::pde::{annulus_potential, radial_capacity, radial_potential, wulff_volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    std::f64::consts::PI.powf(n / 2.0) / libm::tgamma(n / 2.0 + 1.0)
}

/// `l^s` unit ball volume in `R^n`.
fn lp_ball_volume(n: usize, s: f64) -> f64 {
    (2.0 * libm::tgamma(1.0 + 1.0 / s)).powi(n as i32) / libm::tgamma(1.0 + n as f64 / s)
}

/// `(1/p) int_r^inf |v'(rho)|^p N |B| rho^(N-1) d rho` for `v = (rho/r)^(-k)`,
/// `k = (N-p)/(p-1)`, by Simpson's rule in `log rho`.
fn quadrature_capacity(n: usize, volume: f64, r: f64, p: f64) -> f64 {
    let nf = n as f64;
    let k = (nf - p) / (p - 1.0);
    // The integrand decays like exp(-k t).
    let tmax = 60.0 / k;
    let m = 200_000;
    let dt = tmax / m as f64;
    let f = |t: f64| {
        let rho = r * t.exp();
        let dv = k / r * (rho / r).powf(-k - 1.0);
        dv.powf(p) * nf * volume * rho.powf(nf - 1.0) * rho
    };
    let mut acc = f(0.0) + f(tmax);
    for i in 1..m {
        acc += f(i as f64 * dt) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * dt / 3.0 / p
}

#[test]
fn euclidean_capacity_of_the_unit_ball_is_two_pi() {
    let dual = DualNorm::new(NormSpec::euclidean(3).unwrap());
    assert_relative_eq!(
        radial_capacity(&dual, 1.0, 2.0).unwrap(),
        2.0 * std::f64::consts::PI,
        max_relative = 1e-6
    );
    assert_relative_eq!(
        radial_capacity(&dual, 1.0, 1.5).unwrap(),
        8.0 * std::f64::consts::PI * 3f64.sqrt() / 3.0,
        max_relative = 1e-6
    );
}

#[test]
fn ellipsoid_volumes_match_the_determinant_formula() {
    for diag in [
        vec![1.0, 2.0, 4.0],
        vec![0.5, 1.0, 3.0, 2.0],
        vec![1.0, 1.5, 2.0, 2.5, 3.0],
        vec![1.0, 2.0, 1.0, 2.0, 1.0, 0.5],
    ] {
        let n = diag.len();
        let dual = DualNorm::new(NormSpec::diagonal(&diag).unwrap());
        // H(xi) = sqrt(xi A xi) has unit dual ball {x A^-1 x < 1} of volume omega_N sqrt(det A).
        let exact = unit_ball_volume(n) * diag.iter().product::<f64>().sqrt();
        let tol = if n == 3 { 1e-4 } else { 1e-2 };
        assert_relative_eq!(wulff_volume(&dual).unwrap(), exact, max_relative = tol);
    }
}

#[test]
fn lq_wulff_volume_matches_closed_form_and_monte_carlo() {
    let q = 3.0;
    let dual = DualNorm::new(NormSpec::lq(3, q, 0.0).unwrap());
    let conj = q / (q - 1.0);
    let exact = lp_ball_volume(3, conj);
    let v = wulff_volume(&dual).unwrap();
    assert_relative_eq!(v, exact, max_relative = 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = 200_000;
    let hits = (0..samples)
        .filter(|_| {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            dual.eval(&x).unwrap() < 1.0
        })
        .count();
    let mc = 8.0 * hits as f64 / samples as f64;
    assert_relative_eq!(v, mc, max_relative = 1e-2);
}

#[test]
fn capacity_formula_matches_energy_quadrature() {
    for (n, p) in [
        (3, 2.0),
        (3, 1.5),
        (3, 2.5),
        (4, 2.0),
        (4, 3.0),
        (5, 1.7),
        (6, 4.5),
    ] {
        let dual = DualNorm::new(NormSpec::euclidean(n).unwrap());
        for r in [0.5, 1.0, 2.0] {
            let volume = unit_ball_volume(n);
            let oracle = quadrature_capacity(n, volume, r, p);
            assert_relative_eq!(
                radial_capacity(&dual, r, p).unwrap(),
                oracle,
                max_relative = 1e-3
            );
        }
    }
    let dual = DualNorm::new(NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap());
    let oracle = quadrature_capacity(3, unit_ball_volume(3) * 8f64.sqrt(), 1.0, 2.0);
    assert_relative_eq!(
        radial_capacity(&dual, 1.0, 2.0).unwrap(),
        oracle,
        max_relative = 1e-3
    );
}

/// `div(H^(p-1)(Dv) grad H(Dv))` by nested central differences.
fn p_laplacian(
    norm: &NormSpec,
    p: f64,
    v: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> (f64, f64) {
    let n = x.len();
    let flux = |y: &[f64], d: usize| {
        let g: Vec<f64> = (0..n)
            .map(|i| {
                let (mut a, mut b) = (y.to_vec(), y.to_vec());
                a[i] += h;
                b[i] -= h;
                (v(&a) - v(&b)) / (2.0 * h)
            })
            .collect();
        norm.eval(&g).unwrap().powf(p - 1.0) * norm.grad(&g).unwrap()[d]
    };
    let mut div = 0.0;
    let mut scale: f64 = 0.0;
    for d in 0..n {
        let (mut a, mut b) = (x.to_vec(), x.to_vec());
        a[d] += h;
        b[d] -= h;
        let (fa, fb) = (flux(&a, d), flux(&b, d));
        div += (fa - fb) / (2.0 * h);
        scale = scale.max(fa.abs() / h);
    }
    (div, scale)
}

#[test]
fn explicit_potentials_are_p_harmonic() {
    let norms = [
        NormSpec::euclidean(3).unwrap(),
        NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap(),
        NormSpec::lq(3, 3.0, 0.05).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for norm in &norms {
        let dual = DualNorm::new(norm.clone());
        for p in [1.5, 2.0, 2.5] {
            let v = |x: &[f64]| radial_potential(&dual, &[0.0; 3], 1.0, p, x).unwrap();
            let w = |x: &[f64]| annulus_potential(&dual, 1.0, 3.0, p, x).unwrap();
            for _ in 0..5 {
                let dir: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s = rng.gen_range(1.3..2.5) / dual.eval(&dir).unwrap();
                let x: Vec<f64> = dir.iter().map(|d| d * s).collect();
                for f in [&v as &dyn Fn(&[f64]) -> f64, &w] {
                    let (div, scale) = p_laplacian(norm, p, f, &x, 1e-3);
                    assert!(
                        div.abs() <= 1e-4 * scale,
                        "p = {p}: residual {div} against {scale}"
                    );
                }
            }
        }
    }
}
