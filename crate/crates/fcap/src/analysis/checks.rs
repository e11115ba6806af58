//! Brunn-Minkowski, scaling, overdetermined-boundary and level-set checks.

use serde_json::json;

use super::report::{provenance, TheoremReport, Verdict};
use crate::bodies::{
    fit_homothety, fit_wulff, minkowski_combine, ConvexBody, DEFAULT_DIRECTIONS,
    HOMOTHETY_THRESHOLD,
};
use crate::directions::sphere_directions;
use crate::error::{FcapError, Result};
use crate::norms::{DualNorm, NormSpec};
use crate::pde::grid::OuterData;
use crate::pde::{annulus_outer_gradient, solve_exterior, Energy, SolveResult, SolverOptions};
use crate::vecops::{dot, norm2};

/// Relative tolerance for the Brunn-Minkowski deficit.
pub const BM_TOLERANCE: f64 = 1e-2;
/// Relative tolerance for capacity ratios under rescaling.
pub const SCALING_TOLERANCE: f64 = 3e-2;
/// Tolerances for the outer-boundary gradient: coefficient of variation and constant.
pub const NEUMANN_CV_TOLERANCE: f64 = 2e-2;
pub const NEUMANN_CONSTANT_TOLERANCE: f64 = 5e-2;
/// Relative tolerance for the level-ratio law.
pub const LEVEL_LAW_TOLERANCE: f64 = 2e-2;
/// Spread tolerance when deciding whether a level set is a Wulff shape.
pub const WULFF_FIT_TOLERANCE: f64 = 2e-2;
/// Level surfaces closer than this many cells to the body or the truncation are rejected.
pub const LEVEL_CLEARANCE_CELLS: f64 = 3.0;

/// Capacities of `K`, `D` and `(1 - lambda) K + lambda D` and the deficit
/// of `Cap^(1/(N-p))` against the linear interpolation.
pub fn check_bm(
    norm: &NormSpec,
    dual: &DualNorm,
    k: &ConvexBody,
    d: &ConvexBody,
    lambda: f64,
    p: f64,
    opts: &SolverOptions,
) -> Result<TheoremReport> {
    let rk = solve_exterior(norm, dual, k, p, opts)?;
    let rd = solve_exterior(norm, dual, d, p, opts)?;
    check_bm_with(&rk, &rd, lambda, opts)
}

/// [`check_bm`] reusing solves of `K` and `D`.
pub fn check_bm_with(
    rk: &SolveResult,
    rd: &SolveResult,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<TheoremReport> {
    let combined = minkowski_combine(lambda, &rk.body, &rd.body)?;
    let rm = solve_exterior(&rk.norm, &rk.dual, &combined, rk.p, opts)?;
    let e = 1.0 / (rk.norm.dim as f64 - rk.p);
    let (ck, cd, cm) = (
        rk.capacity.powf(e),
        rd.capacity.powf(e),
        rm.capacity.powf(e),
    );
    let deficit = cm - (1.0 - lambda) * ck - lambda * cd;
    let scale = ck.max(cd).max(cm);
    let tol = BM_TOLERANCE * scale;
    let homothety = fit_homothety(&rk.body, &rd.body)?;
    let homothetic = homothety.residual <= HOMOTHETY_THRESHOLD;
    let verdict = if deficit < -tol || (homothetic && deficit.abs() > tol) {
        Verdict::Violated
    } else {
        Verdict::Consistent
    };
    Ok(TheoremReport {
        check: "brunn_minkowski".into(),
        inputs: json!({ "k": rk.body.to_json(), "d": rd.body.to_json(), "lambda": lambda, "p": rk.p }),
        measured: json!({
            "cap_k": rk.capacity,
            "cap_d": rd.capacity,
            "cap_combined": rm.capacity,
            "deficit": deficit,
            "relative_deficit": deficit / scale,
            "homothety_residual": homothety.residual,
            "homothetic": homothetic,
            "strict": deficit > tol,
        }),
        tolerances: json!({ "relative": BM_TOLERANCE, "absolute": tol, "homothety": HOMOTHETY_THRESHOLD }),
        verdict,
        provenance: json!({ "k": provenance(rk), "d": provenance(rd), "combined": provenance(&rm) }),
    })
}

/// Outer boundary value `g_R` of an exterior solve.
fn outer_value(result: &SolveResult) -> f64 {
    let g = &*result.field.grid;
    g.outer_data.value(g.outer_radius)
}

/// Capacity of the superlevel set `U(t)` from the rescaled field
/// `min(u / t, 1)` on the original grid, corrected for the outer data by
/// the constant-flux identity `E = Cap (1 - g_R)`.
pub fn rescaled_capacity(result: &SolveResult, t: f64) -> Result<f64> {
    let g = &*result.field.grid;
    let gr = outer_value(result);
    if !(t > gr && t < 1.0) {
        return Err(FcapError::InvalidParameter(format!(
            "level {t} must lie strictly between {gr} and 1"
        )));
    }
    let data = match g.outer_data {
        OuterData::Radial {
            coefficient,
            exponent,
        } => OuterData::Radial {
            coefficient: coefficient / t,
            exponent,
        },
        OuterData::Zero => OuterData::Zero,
    };
    let scaled = g.with_outer_data(data);
    let w: Vec<f64> = result
        .field
        .values
        .iter()
        .map(|u| (u / t).min(1.0))
        .collect();
    let energy = Energy::new(&scaled, &result.norm, result.p, 0.0).of_nodes(&w);
    Ok(energy / (1.0 - gr / t))
}

/// Capacity from the field alone: `E / (1 - g_R)`.
pub fn field_capacity(result: &SolveResult) -> f64 {
    result.field_energy / (1.0 - outer_value(result))
}

/// `Cap(U(t)) t^(p-1) / Cap(Omega)` by re-solving each level set and by the
/// rescaled-field energy.
pub fn check_scaling(
    result: &SolveResult,
    levels: &[f64],
    opts: &SolverOptions,
) -> Result<TheoremReport> {
    let gr = outer_value(result);
    for &t in levels {
        if !(t > gr && t < 1.0) {
            return Err(FcapError::InvalidParameter(format!(
                "level {t} must lie strictly between {gr} and 1"
            )));
        }
    }
    let base_field = field_capacity(result);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in levels {
        let level = result.field.extract_level_set(t, DEFAULT_DIRECTIONS)?;
        let resolved = solve_exterior(&result.norm, &result.dual, &level, result.p, opts)?;
        let ratio = resolved.capacity * t.powf(result.p - 1.0) / result.capacity;
        let cross = rescaled_capacity(result, t)? * t.powf(result.p - 1.0) / base_field;
        worst = worst.max((ratio - 1.0).abs()).max((cross - 1.0).abs());
        rows.push(json!({
            "t": t,
            "capacity": resolved.capacity,
            "ratio": ratio,
            "rescaled_ratio": cross,
            "converged": resolved.converged,
        }));
    }
    Ok(TheoremReport {
        check: "scaling".into(),
        inputs: json!({ "body": result.body.to_json(), "p": result.p, "levels": levels }),
        measured: json!({ "capacity": result.capacity, "levels": rows, "max_deviation": worst }),
        tolerances: json!({ "relative": SCALING_TOLERANCE }),
        verdict: if worst <= SCALING_TOLERANCE {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
        provenance: provenance(result),
    })
}

/// Angular radius of the node patch behind each outer-boundary sample.
const PATCH_ANGLE: f64 = 0.1;
/// Depth band of nodes used for the outer-boundary fit, in cells. The
/// first few layers carry the cut-cell boundary layer and are skipped; the
/// band never reaches past half the gap to the body.
const BAND_CELLS: (f64, f64) = (5.0, 11.0);

/// `H(Du)` on `H0 = R` in `direction_count` directions.
///
/// Over the free nodes of a thin angular patch near the outer boundary, `u`
/// is fitted by a cubic through zero in `w = H0^e - R^e`, `e = 1/q`, in which
/// radial potentials are linear. Since `u` is constant on `H0 = R` its
/// gradient there is parallel to `grad H0` and `H(grad H0) = 1`, so
/// `H(Du) = |a e R^(e-1)|` where `a` is the linear coefficient.
pub fn outer_gradient_samples(
    result: &SolveResult,
    big_r: f64,
    direction_count: usize,
) -> Result<Vec<f64>> {
    let g = &*result.field.grid;
    let e = 1.0 / result.q;
    let inner = result.body.circumradius(&result.dual)?;
    let s_lo = BAND_CELLS.0 * g.spacing;
    let s_hi = (BAND_CELLS.1 * g.spacing).min(0.5 * (big_r - inner));
    if s_hi < s_lo + 3.0 * g.spacing {
        return Err(FcapError::InvalidParameter(format!(
            "grid spacing {} too coarse for the outer-boundary fit; refine the grid",
            g.spacing
        )));
    }
    let mut nodes: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for &node in &g.unknown_nodes {
        let i = node as usize;
        let h0 = g.node_h0(i);
        let s = big_r - h0;
        if s >= s_lo && s <= s_hi {
            let x = g.node_coords(i);
            let r = norm2(&x);
            let w = h0.powf(e) - big_r.powf(e);
            nodes.push((x.iter().map(|v| v / r).collect(), w, result.field.values[i]));
        }
    }
    let cos_w = PATCH_ANGLE.cos();
    let dirs = sphere_directions(g.dim, direction_count);
    let mut out = Vec::with_capacity(dirs.len());
    for (j, u) in dirs.iter().enumerate() {
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        let mut count = 0;
        for (dir, w, v) in &nodes {
            if dot(dir, u) >= cos_w {
                let row = nalgebra::Vector3::new(*w, w * w, w * w * w);
                ata += row * row.transpose();
                atb += row * *v;
                count += 1;
            }
        }
        if count < 16 {
            return Err(FcapError::InvalidParameter(format!(
                "only {count} nodes behind outer sample {j}; refine the grid"
            )));
        }
        let coef = ata
            .lu()
            .solve(&atb)
            .ok_or_else(|| FcapError::NonConvergence("outer boundary fit".into()))?;
        out.push((coef[0] * e * big_r.powf(e - 1.0)).abs());
    }
    Ok(out)
}

/// Constancy of `H(Du)` on `H0 = R` for an annulus solve, and the relation
/// between the constant and the inner radius when the body is a Wulff shape.
pub fn check_overdetermined(result: &SolveResult, big_r: f64) -> Result<TheoremReport> {
    let samples = outer_gradient_samples(result, big_r, DEFAULT_DIRECTIONS)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let cv = var.sqrt() / mean.abs();
    let dim = result.norm.dim;
    let relation = (dim as f64 - result.p) / (result.p - 1.0);
    let fit = fit_wulff(&result.body, &result.dual, WULFF_FIT_TOLERANCE)?;
    let mut measured = json!({
        "c_hat": mean,
        "cv": cv,
        "min": samples.iter().cloned().fold(f64::INFINITY, f64::min),
        "max": samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "wulff_body": fit.is_some(),
    });
    let verdict = match &fit {
        Some(w) => {
            let residual = (w.radius * mean - relation).abs() / relation;
            let exact = annulus_outer_gradient(dim, result.p, w.radius, big_r)?;
            measured["radius"] = json!(w.radius);
            measured["r_times_c"] = json!(w.radius * mean);
            measured["relation_value"] = json!(relation);
            measured["relation_residual"] = json!(residual);
            measured["exact_annulus_gradient"] = json!(exact);
            measured["exact_residual"] = json!((mean - exact).abs() / exact);
            if cv <= NEUMANN_CV_TOLERANCE && residual <= NEUMANN_CONSTANT_TOLERANCE {
                Verdict::Consistent
            } else {
                Verdict::Violated
            }
        }
        None if cv > NEUMANN_CV_TOLERANCE => Verdict::Consistent,
        None => Verdict::Violated,
    };
    Ok(TheoremReport {
        check: "overdetermined".into(),
        inputs: json!({ "body": result.body.to_json(), "p": result.p, "outer_radius": big_r }),
        measured,
        tolerances: json!({ "cv": NEUMANN_CV_TOLERANCE, "constant": NEUMANN_CONSTANT_TOLERANCE, "wulff_fit": WULFF_FIT_TOLERANCE }),
        verdict,
        provenance: provenance(result),
    })
}

/// Smallest clearance, in cells, between the level surface `{u = t}` and
/// both the body and the truncation boundary, measured along rays.
pub fn level_clearance(result: &SolveResult, t: f64) -> Result<f64> {
    let g = &*result.field.grid;
    let (points, dirs, _) = result.field.level_set_points(t, DEFAULT_DIRECTIONS)?;
    let anchor = &g.anchor;
    let mut worst = f64::INFINITY;
    for (x, u) in points.iter().zip(&dirs) {
        let s: f64 = x
            .iter()
            .zip(anchor)
            .zip(u)
            .map(|((a, b), v)| (a - b) * v)
            .sum();
        let inner = 1.0 / result.body.gauge_dir(u);
        // Ray exit from the truncation shape, by bisection on H0.
        let at = |r: f64| -> Vec<f64> { anchor.iter().zip(u).map(|(a, v)| a + r * v).collect() };
        let (mut lo, mut hi) = (s, s + 4.0 * g.outer_radius);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if result.dual.eval(&at(mid))? < g.outer_radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        worst = worst.min((s - inner).min(lo - s) / g.spacing);
    }
    Ok(worst)
}

/// Homothety of the superlevel sets `U(t1)` and `U(t2)` and, when they are
/// homothetic, the level-ratio law and Wulff fits of both.
pub fn check_homothetic_levels(result: &SolveResult, t1: f64, t2: f64) -> Result<TheoremReport> {
    if !(t1 <= t2) {
        return Err(FcapError::InvalidParameter(format!(
            "levels must satisfy t1 <= t2, got {t1}, {t2}"
        )));
    }
    for t in [t1, t2] {
        let c = level_clearance(result, t)?;
        if c < LEVEL_CLEARANCE_CELLS {
            return Err(FcapError::InvalidParameter(format!(
                "level {t} lies {c:.2} cells from the body or truncation boundary (need {LEVEL_CLEARANCE_CELLS})"
            )));
        }
    }
    let outer = result.field.extract_level_set(t1, DEFAULT_DIRECTIONS)?;
    let inner = result.field.extract_level_set(t2, DEFAULT_DIRECTIONS)?;
    let fit = fit_homothety(&outer, &inner)?;
    let homothetic = fit.residual <= HOMOTHETY_THRESHOLD;
    let exponent = -(result.norm.dim as f64 - result.p) / (result.p - 1.0);
    let law = fit.ratio.powf(exponent);
    let law_residual = (law - t1 / t2).abs() / (t1 / t2);
    let mut measured = json!({
        "rho": fit.ratio,
        "translation": fit.translation,
        "homothety_residual": fit.residual,
        "homothetic": homothetic,
        "rho_power": law,
        "level_ratio": t1 / t2,
        "law_residual": law_residual,
    });
    let verdict = if homothetic {
        let w1 = fit_wulff(&outer, &result.dual, WULFF_FIT_TOLERANCE)?;
        let w2 = fit_wulff(&inner, &result.dual, WULFF_FIT_TOLERANCE)?;
        measured["outer_level_wulff"] = json!(w1.as_ref().map(|w| w.spread));
        measured["inner_level_wulff"] = json!(w2.as_ref().map(|w| w.spread));
        if law_residual <= LEVEL_LAW_TOLERANCE && w1.is_some() && w2.is_some() {
            Verdict::Consistent
        } else {
            Verdict::Violated
        }
    } else {
        Verdict::HypothesisNotMet
    };
    Ok(TheoremReport {
        check: "homothetic_levels".into(),
        inputs: json!({ "body": result.body.to_json(), "p": result.p, "t1": t1, "t2": t2 }),
        measured,
        tolerances: json!({ "homothety": HOMOTHETY_THRESHOLD, "law": LEVEL_LAW_TOLERANCE, "wulff_fit": WULFF_FIT_TOLERANCE, "clearance_cells": LEVEL_CLEARANCE_CELLS }),
        verdict,
        provenance: provenance(result),
    })
}
