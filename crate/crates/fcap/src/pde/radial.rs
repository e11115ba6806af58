//! Exact solutions for Wulff shapes.
//!
//! For `Omega = {H0(x) < r}` the capacitary potential is
//! `v_r(x) = (H0(x) / r)^(1/q)` with `q = -(p - 1) / (N - p)`, and the
//! potential of the annulus `{r < H0 < R}` with data 1 inside, 0 outside is
//! `(H0^(1/q) - R^(1/q)) / (r^(1/q) - R^(1/q))`.

use crate::directions::{sphere_area, sphere_directions};
use crate::error::{FcapError, Result};
use crate::norms::DualNorm;

/// `q = -(p - 1) / (N - p)`.
pub fn radial_exponent(dim: usize, p: f64) -> Result<f64> {
    if !(p > 1.0 && p < dim as f64) {
        return Err(FcapError::ExponentOutOfRange { p, dim });
    }
    Ok(-(p - 1.0) / (dim as f64 - p))
}

/// `(H0(x - center) / r)^(1/q)`, defined outside the Wulff shape.
pub fn radial_potential(dual: &DualNorm, center: &[f64], r: f64, p: f64, x: &[f64]) -> Result<f64> {
    let q = radial_exponent(dual.dim(), p)?;
    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let h0 = dual.eval(&d)?;
    if h0 < r * (1.0 - 1e-14) {
        return Err(FcapError::InsideWulffShape { h0, radius: r });
    }
    Ok((h0 / r).powf(1.0 / q))
}

/// Potential of the Wulff annulus `r < H0 < big_r` (centered at the origin).
pub fn annulus_potential(dual: &DualNorm, r: f64, big_r: f64, p: f64, x: &[f64]) -> Result<f64> {
    let q = radial_exponent(dual.dim(), p)?;
    let h0 = dual.eval(x)?;
    if h0 < r * (1.0 - 1e-14) {
        return Err(FcapError::InsideWulffShape { h0, radius: r });
    }
    let e = 1.0 / q;
    Ok((h0.powf(e) - big_r.powf(e)) / (r.powf(e) - big_r.powf(e)))
}

/// `H(Du)` on the outer sphere `H0 = big_r` for the annulus potential.
pub fn annulus_outer_gradient(dim: usize, p: f64, r: f64, big_r: f64) -> Result<f64> {
    let q = radial_exponent(dim, p)?;
    let e = 1.0 / q;
    Ok(e.abs() * big_r.powf(e - 1.0) / (r.powf(e) - big_r.powf(e)))
}

/// `|B_{H0}|` by quadrature over the sphere: `(1/N) int_S H0(u)^(-N) du`.
///
/// Uses a Fibonacci lattice for `N = 3` and seeded antipodal random
/// directions otherwise.
pub fn wulff_volume(dual: &DualNorm) -> Result<f64> {
    let n = dual.dim();
    let count = if n == 3 { 1 << 16 } else { 1 << 18 };
    let dirs = sphere_directions(n, count);
    let mut acc = 0.0;
    for u in &dirs {
        acc += dual.eval(u)?.powi(-(n as i32));
    }
    let v = acc / dirs.len() as f64 * sphere_area(n) / n as f64;
    if !v.is_finite() || v <= 0.0 {
        return Err(FcapError::Quadrature(format!(
            "Wulff volume evaluated to {v}"
        )));
    }
    Ok(v)
}

/// Capacity of `B_{H0}(r)`:
/// `(1/p) ((N - p)/(p - 1))^(p - 1) N |B_{H0}| r^(N - p)`.
pub fn radial_capacity(dual: &DualNorm, r: f64, p: f64) -> Result<f64> {
    let volume = wulff_volume(dual)?;
    radial_capacity_with_volume(dual.dim(), volume, r, p)
}

/// [`radial_capacity`] with a precomputed `|B_{H0}|`.
pub fn radial_capacity_with_volume(dim: usize, volume: f64, r: f64, p: f64) -> Result<f64> {
    radial_exponent(dim, p)?;
    let n = dim as f64;
    Ok(((n - p) / (p - 1.0)).powf(p - 1.0) * n * volume * r.powf(n - p) / p)
}

/// Inverts [`radial_capacity_with_volume`]: the Wulff radius with capacity `cap`.
pub fn equivalent_radius(dim: usize, volume: f64, cap: f64, p: f64) -> Result<f64> {
    let unit = radial_capacity_with_volume(dim, volume, 1.0, p)?;
    Ok((cap / unit).powf(1.0 / (dim as f64 - p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;
    use std::f64::consts::PI;

    fn e(n: usize) -> DualNorm {
        DualNorm::new(NormSpec::euclidean(n).unwrap())
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(radial_exponent(3, 2.0).unwrap(), -1.0);
        assert_eq!(radial_exponent(4, 2.0).unwrap(), -0.5);
        assert_eq!(radial_exponent(5, 3.0).unwrap(), -1.0);
        assert!(radial_exponent(3, 3.0).is_err());
        assert!(radial_exponent(3, 1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        let v = radial_potential(&e(3), &[0.0; 3], 1.0, 2.0, &[2.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let v = radial_potential(&e(4), &[0.0; 4], 1.0, 2.0, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let v = radial_potential(&e(3), &[0.0; 3], 1.0, 2.0, &[0.6, 0.8, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(radial_potential(&e(3), &[0.0; 3], 1.0, 2.0, &[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn annulus_midpoint_value() {
        let u = annulus_potential(&e(3), 1.0, 2.0, 2.0, &[1.5, 0.0, 0.0]).unwrap();
        assert!((u - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn capacity_closed_forms() {
        let c = radial_capacity(&e(3), 1.0, 2.0).unwrap();
        assert!((c / (2.0 * PI) - 1.0).abs() < 1e-6);
        let c = radial_capacity(&e(3), 1.0, 1.5).unwrap();
        assert!((c / (8.0 * PI * 3f64.sqrt() / 3.0) - 1.0).abs() < 1e-6);
        let c1 = radial_capacity(&e(3), 1.0, 1.7).unwrap();
        let c2 = radial_capacity(&e(3), 2.3, 1.7).unwrap();
        assert!((c2 / c1 - 2.3f64.powf(1.3)).abs() < 1e-10);
    }
}
