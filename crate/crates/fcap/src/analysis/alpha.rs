//! Sampled estimate of the concavity exponent of a capacitary potential.
//!
//! For `beta < 0`, `u` is `beta`-concave when `u^beta` is convex. Convexity is
//! probed by midpoint inequalities on seeded random pairs, and the largest
//! passing `beta` is located by bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::report::{provenance, TheoremReport, Verdict};
use crate::directions::random_unit;
use crate::error::{FcapError, Result};
use crate::pde::SolveResult;
use crate::vecops::norm2;

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaOptions {
    /// Search window; `None` is `[q - 1.5, min(q + 1.5, -0.01)]`.
    pub beta_range: Option<(f64, f64)>,
    pub sample_pairs: usize,
    pub seed: u64,
    pub steps: usize,
    /// Relative slack in the midpoint inequality.
    pub slack: f64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            beta_range: None,
            sample_pairs: 20_000,
            seed: 0,
            steps: 12,
            slack: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Width of the final bisection bracket.
    pub tolerance: f64,
    pub window: (f64, f64),
    /// The upper end of the window passed; `beta >= 0` is not searched.
    pub needs_review: bool,
    /// The lower end of the window failed; the estimate is the window floor.
    pub below_window: bool,
}

/// Point triples `(x, y, midpoint)` and their field values.
struct Samples {
    values: Vec<[f64; 3]>,
}

fn sample_pairs(result: &SolveResult, count: usize, seed: u64) -> Result<Samples> {
    let grid = &*result.field.grid;
    let n = grid.dim;
    let h = grid.spacing;
    let body = &result.body;
    let anchor = body.anchor();
    let big_r = grid.outer_radius;
    let in_region = |x: &[f64]| -> bool {
        let d: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| a - b).collect();
        let g = body.gauge_dir(&d);
        let dist = norm2(&d);
        // At least two cells outside the body and well inside the truncation.
        g > 1.0
            && dist * (1.0 - 1.0 / g) >= 2.0 * h
            && result.dual.eval(x).map_or(false, |v| v <= 0.8 * big_r)
    };
    let extent: Vec<f64> = (0..n).map(|d| grid.lower[d].abs()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while values.len() < count {
        attempts += 1;
        if attempts > 1000 * count + 100_000 {
            return Err(FcapError::InvalidParameter(
                "could not sample pairs in the annulus".into(),
            ));
        }
        let x: Vec<f64> = (0..n)
            .map(|d| rng.gen_range(-extent[d]..extent[d]))
            .collect();
        if !in_region(&x) {
            continue;
        }
        let len = rng.gen_range(8.0 * h..(0.5 * big_r).max(9.0 * h));
        let v = random_unit(&mut rng, n);
        let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + len * b).collect();
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        if !in_region(&y) || !in_region(&m) {
            continue;
        }
        let f = |p: &[f64]| {
            result
                .field
                .interpolate(p)
                .ok_or(FcapError::NonPositiveField)
        };
        let triple = [f(&x)?, f(&y)?, f(&m)?];
        if triple.iter().any(|v| !(*v > 0.0)) {
            return Err(FcapError::NonPositiveField);
        }
        values.push(triple);
    }
    Ok(Samples { values })
}

fn passes(samples: &Samples, beta: f64, slack: f64) -> bool {
    samples.values.iter().all(|[ux, uy, um]| {
        let avg = 0.5 * (ux.powf(beta) + uy.powf(beta));
        um.powf(beta) <= avg * (1.0 + slack)
    })
}

/// Largest `beta` in the window for which `u^beta` passes every midpoint test.
pub fn estimate_alpha(result: &SolveResult, opts: &AlphaOptions) -> Result<AlphaEstimate> {
    let q = result.q;
    let (lo0, hi0) = opts.beta_range.unwrap_or((q - 1.5, (q + 1.5).min(-0.01)));
    if !(lo0 < hi0 && hi0 < 0.0) {
        return Err(FcapError::InvalidParameter(format!(
            "beta window ({lo0}, {hi0}) must be increasing and negative"
        )));
    }
    let samples = sample_pairs(result, opts.sample_pairs, opts.seed)?;
    if passes(&samples, hi0, opts.slack) {
        return Ok(AlphaEstimate {
            alpha: hi0,
            tolerance: 0.0,
            window: (lo0, hi0),
            needs_review: true,
            below_window: false,
        });
    }
    if !passes(&samples, lo0, opts.slack) {
        return Ok(AlphaEstimate {
            alpha: lo0,
            tolerance: 0.0,
            window: (lo0, hi0),
            needs_review: false,
            below_window: true,
        });
    }
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..opts.steps {
        let mid = 0.5 * (lo + hi);
        if passes(&samples, mid, opts.slack) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(AlphaEstimate {
        alpha: lo,
        tolerance: hi - lo,
        window: (lo0, hi0),
        needs_review: false,
        below_window: false,
    })
}

/// Report form: consistent iff `alpha <= q + tolerance`.
pub fn check_alpha(result: &SolveResult, opts: &AlphaOptions) -> Result<TheoremReport> {
    let est = estimate_alpha(result, opts)?;
    let q = result.q;
    let bound_ok = est.alpha <= q + est.tolerance;
    let smooth_wulff = matches!(result.body.kind, crate::bodies::BodyKind::Wulff { .. });
    Ok(TheoremReport {
        check: "alpha".into(),
        inputs: json!({
            "body": result.body.to_json(),
            "p": result.p,
            "q": q,
            "sample_pairs": opts.sample_pairs,
            "seed": opts.seed,
            "window": [est.window.0, est.window.1],
            "steps": opts.steps,
        }),
        measured: json!({
            "alpha": est.alpha,
            "q": q,
            "margin_below_q": q - est.alpha,
            "wulff_body": smooth_wulff,
            "needs_review": est.needs_review,
            "below_window": est.below_window,
        }),
        tolerances: json!({ "estimator": est.tolerance, "slack": opts.slack }),
        verdict: if bound_ok {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
        provenance: provenance(result),
    })
}
