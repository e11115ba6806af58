//! Checks against closed-form answers: Wulff potentials and norm identities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde_json::json;

use super::report::{provenance, TheoremReport, Verdict};
use crate::bodies::fit_wulff;
use crate::error::Result;
use crate::norms::{DualNorm, NormSpec, DEFAULT_DIRECTION_COUNT, DEFAULT_REFINE_TOL};
use crate::pde::{radial_capacity, radial_potential, NodeClass, SolveResult};
use crate::vecops::{dot, norm2};

/// Relative capacity tolerance for `p >= 2` and for `p < 2`.
pub const RADIAL_CAPACITY_TOLERANCE: (f64, f64) = (3e-2, 5e-2);
/// Sup-relative field error on `1.2 r <= H0 <= 3 r`.
pub const RADIAL_FIELD_TOLERANCE: f64 = 2e-2;

/// Tolerances of the norm identity suite.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-12;
pub const EULER_TOLERANCE: f64 = 1e-9;
pub const DUAL_GRADIENT_TOLERANCE: f64 = 1e-6;
pub const DUAL_AGREEMENT_TOLERANCE: f64 = 1e-5;
pub const HESSIAN_TOLERANCE: f64 = 1e-5;

/// Compares a solve on a Wulff body with the explicit radial potential.
/// Returns `None` when the body is not a Wulff shape.
pub fn check_radial(result: &SolveResult) -> Result<Option<TheoremReport>> {
    let Some(fit) = fit_wulff(&result.body, &result.dual, 1e-6)? else {
        return Ok(None);
    };
    let r = fit.radius;
    let exact = radial_capacity(&result.dual, r, result.p)?;
    let cap_err = (result.capacity - exact) / exact;
    let g = &*result.field.grid;
    let mut field_err: f64 = 0.0;
    for i in 0..g.node_count() {
        if g.node_class(i) != NodeClass::Free {
            continue;
        }
        let x = g.node_coords(i);
        let d: Vec<f64> = x.iter().zip(&fit.center).map(|(a, b)| a - b).collect();
        let h0 = result.dual.eval(&d)?;
        if h0 >= 1.2 * r && h0 <= 3.0 * r {
            let v = radial_potential(&result.dual, &fit.center, r, result.p, &x)?;
            field_err = field_err.max((result.field.values[i] - v).abs() / v);
        }
    }
    let cap_tol = if result.p >= 2.0 {
        RADIAL_CAPACITY_TOLERANCE.0
    } else {
        RADIAL_CAPACITY_TOLERANCE.1
    };
    let ok = cap_err.abs() <= cap_tol && field_err <= RADIAL_FIELD_TOLERANCE;
    Ok(Some(TheoremReport {
        check: "radial".into(),
        inputs: json!({ "body": result.body.to_json(), "p": result.p, "radius": r }),
        measured: json!({
            "capacity": result.capacity,
            "exact_capacity": exact,
            "capacity_error": cap_err,
            "field_error": field_err,
        }),
        tolerances: json!({ "capacity": cap_tol, "field": RADIAL_FIELD_TOLERANCE }),
        verdict: if ok {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
        provenance: provenance(result),
    }))
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let scale = 10f64.powf(Uniform::new(-1.0, 1.0).sample(rng));
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Worst errors of the norm identities over `samples` random points:
/// homogeneity, Euler, `H(grad H0) = 1`, closed-form vs generic dual, and
/// the Hessian against central differences of the gradient.
pub fn check_norm_identities(norm: &NormSpec, samples: usize, seed: u64) -> Result<TheoremReport> {
    let n = norm.dim;
    let dual = DualNorm::new(norm.clone());
    let generic = norm
        .closed_form_dual()
        .map(|_| DualNorm::generic(norm.clone(), DEFAULT_DIRECTION_COUNT, DEFAULT_REFINE_TOL));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut homog, mut euler, mut euler_hess, mut dual_grad, mut agree, mut hess_err) =
        (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..samples {
        let xi = random_vector(&mut rng, n);
        let t = 10f64.powf(Uniform::new(-2.0, 2.0).sample(&mut rng));
        let h = norm.eval(&xi)?;
        let txi: Vec<f64> = xi.iter().map(|v| t * v).collect();
        homog = homog.max((norm.eval(&txi)? - t * h).abs() / (t * h));

        let g = norm.grad(&xi)?;
        euler = euler.max((dot(&g, &xi) - h).abs() / h);
        let hm = norm.hess(&xi)?;
        let hmax = hm.iter().fold(0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            let row: f64 = (0..n).map(|j| hm[i * n + j] * xi[j]).sum();
            euler_hess = euler_hess.max(row.abs() / (hmax * norm2(&xi)));
        }
        let step = 1e-5 * norm2(&xi);
        for j in 0..n {
            let mut a = xi.clone();
            let mut b = xi.clone();
            a[j] += step;
            b[j] -= step;
            let (ga, gb) = (norm.grad(&a)?, norm.grad(&b)?);
            for i in 0..n {
                let fd = (ga[i] - gb[i]) / (2.0 * step);
                hess_err = hess_err.max((fd - hm[i * n + j]).abs() / hmax);
            }
        }

        let x = random_vector(&mut rng, n);
        dual_grad = dual_grad.max((norm.eval(&dual.grad(&x)?)? - 1.0).abs());
        if let Some(gd) = &generic {
            let (a, b) = (dual.eval(&x)?, gd.eval(&x)?);
            agree = agree.max((a - b).abs() / a);
        }
    }
    let ok = homog <= HOMOGENEITY_TOLERANCE
        && euler <= EULER_TOLERANCE
        && euler_hess <= EULER_TOLERANCE
        && dual_grad <= DUAL_GRADIENT_TOLERANCE
        && agree <= DUAL_AGREEMENT_TOLERANCE
        && hess_err <= HESSIAN_TOLERANCE;
    Ok(TheoremReport {
        check: "norm_identities".into(),
        inputs: json!({ "norm": norm, "samples": samples, "seed": seed }),
        measured: json!({
            "homogeneity": homog,
            "euler_gradient": euler,
            "euler_hessian": euler_hess,
            "dual_gradient_norm": dual_grad,
            "dual_agreement": if generic.is_some() { json!(agree) } else { json!(null) },
            "hessian_difference": hess_err,
        }),
        tolerances: json!({
            "homogeneity": HOMOGENEITY_TOLERANCE,
            "euler": EULER_TOLERANCE,
            "dual_gradient_norm": DUAL_GRADIENT_TOLERANCE,
            "dual_agreement": DUAL_AGREEMENT_TOLERANCE,
            "hessian_difference": HESSIAN_TOLERANCE,
        }),
        verdict: if ok {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
        provenance: json!({ "dual_method": dual.method() }),
    })
}
