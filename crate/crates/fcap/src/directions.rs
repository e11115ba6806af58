//! Deterministic quasi-uniform direction sets on the unit sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Fixed seed so direction sets are reproducible across runs.
const DIRECTION_SEED: u64 = 0x5eed_d1e5;

/// Quasi-uniform unit vectors in `R^dim`.
///
/// For `dim == 3` this is the Fibonacci sphere; otherwise seeded Gaussian
/// samples are normalized and paired antipodally, so every set is symmetric
/// enough that the mean of `u` is close to zero.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(dim >= 1 && count >= 1);
    match dim {
        3 => fibonacci_sphere(count),
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => random_directions(dim, count, DIRECTION_SEED),
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            vec![rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Seeded random unit vectors, emitted in antipodal pairs.
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = random_unit(&mut rng, dim);
        let w: Vec<f64> = v.iter().map(|x| -x).collect();
        out.push(v);
        if out.len() < count {
            out.push(w);
        }
    }
    out
}

pub(crate) fn random_unit<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::vecops::norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Surface area of the unit sphere `S^{dim-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    // |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2), via the recursion |S^{n+1}| = 2 pi/n |S^{n-1}|.
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        n => 2.0 * std::f64::consts::PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_points_are_unit() {
        for u in sphere_directions(3, 100) {
            assert!((crate::vecops::norm2(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn random_directions_are_deterministic() {
        assert_eq!(random_directions(5, 10, 7), random_directions(5, 10, 7));
    }
}
