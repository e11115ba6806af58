//! The full check suite behind `fcap verify-all`.
//!
//! Each criterion combines one or more reports into a single verdict. Solves
//! are cached by name so criteria that share a body reuse its field.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::{json, Value};

use super::checks::LEVEL_CLEARANCE_CELLS;
use super::report::{TheoremReport, Verdict};
use super::{
    asymptotic_constant, check_alpha, check_bm_with, check_homothetic_levels,
    check_norm_identities, check_overdetermined, check_radial, check_scaling, default_radii,
    level_clearance, AlphaOptions,
};
use crate::bodies::{ConvexBody, HOMOTHETY_THRESHOLD};
use crate::error::{FcapError, Result};
use crate::norms::{DualNorm, NormSpec};
use crate::pde::{solve_annulus, solve_exterior, SolveResult, SolverOptions};

/// Resolution tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    /// Coarse grids and fewer samples; minutes on one core.
    Smoke,
    /// The full tolerances.
    Desk,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Smoke => "smoke",
            Tier::Desk => "desk",
        }
    }

    fn resolution(self) -> usize {
        match self {
            Tier::Smoke => 32,
            Tier::Desk => 64,
        }
    }

    fn annulus_resolution(self) -> usize {
        match self {
            Tier::Smoke => 48,
            Tier::Desk => 64,
        }
    }

    fn alpha_pairs(self) -> usize {
        match self {
            Tier::Smoke => 4000,
            Tier::Desk => 20_000,
        }
    }

    fn identity_samples(self) -> usize {
        match self {
            Tier::Smoke => 200,
            Tier::Desk => 1000,
        }
    }
}

/// Criterion names, in order.
pub const CRITERIA: [&str; 10] = [
    "radial_exactness",
    "anisotropic_radial_exactness",
    "degenerate_exponent",
    "overdetermined_rigidity",
    "brunn_minkowski",
    "scaling_law",
    "concavity_exponent",
    "homothety_law",
    "asymptotic_limit",
    "norm_identities",
];

/// Target value of `H(Du)` on the outer sphere, stated for the Wulff annulus.
pub const STATED_OUTER_GRADIENT: f64 = 2.0;
/// Non-Wulff signals must exceed the Wulff-case value at the same
/// resolution by this factor.
pub const CALIBRATION_FACTOR: f64 = 3.0;
/// Tolerance on the concavity exponent of Wulff potentials.
pub const ALPHA_TOLERANCE: f64 = 5e-2;

pub struct Suite {
    pub tier: Tier,
    pub seed: u64,
    pub threads: Option<usize>,
    cache: BTreeMap<&'static str, Arc<SolveResult>>,
}

fn combine(
    name: &str,
    ok: bool,
    measured: Value,
    tolerances: Value,
    parts: &[&TheoremReport],
) -> TheoremReport {
    TheoremReport {
        check: name.into(),
        inputs: json!({ "parts": parts.iter().map(|r| &r.inputs).collect::<Vec<_>>() }),
        measured: json!({ "summary": measured, "parts": parts.iter().map(|r| json!({ "check": r.check, "verdict": r.verdict, "measured": r.measured })).collect::<Vec<_>>() }),
        tolerances,
        verdict: if ok {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
        provenance: json!(parts.iter().map(|r| &r.provenance).collect::<Vec<_>>()),
    }
}

fn num(r: &TheoremReport, key: &str) -> Result<f64> {
    r.number(key)
        .ok_or_else(|| FcapError::InvalidParameter(format!("report {} lacks {key}", r.check)))
}

impl Suite {
    pub fn new(tier: Tier, seed: u64, threads: Option<usize>) -> Self {
        Self {
            tier,
            seed,
            threads,
            cache: BTreeMap::new(),
        }
    }

    fn options(&self, resolution: usize) -> SolverOptions {
        SolverOptions {
            threads: self.threads,
            ..SolverOptions::default().with_resolution(resolution)
        }
    }

    fn euclidean() -> Result<(NormSpec, DualNorm)> {
        let n = NormSpec::euclidean(3)?;
        Ok((n.clone(), DualNorm::new(n)))
    }

    /// Exterior solve of a named problem, cached.
    fn field(&mut self, key: &'static str) -> Result<Arc<SolveResult>> {
        if let Some(r) = self.cache.get(key) {
            return Ok(r.clone());
        }
        let (mut norm, mut dual) = Self::euclidean()?;
        let mut p = 2.0;
        let body = match key {
            "wulff1" => ConvexBody::wulff(&dual, vec![0.0; 3], 1.0)?,
            "wulff2" => ConvexBody::wulff(&dual, vec![0.0; 3], 2.0)?,
            "wulff1_p15" => {
                p = 1.5;
                ConvexBody::wulff(&dual, vec![0.0; 3], 1.0)?
            }
            "wulff1_aniso" => {
                norm = NormSpec::diagonal(&[1.0, 2.0, 4.0])?;
                dual = DualNorm::new(norm.clone());
                ConvexBody::wulff(&dual, vec![0.0; 3], 1.0)?
            }
            "cube" => ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3])?,
            "box" => ConvexBody::cuboid(vec![0.0; 3], vec![0.5, 0.5, 1.5])?,
            other => {
                return Err(FcapError::InvalidParameter(format!(
                    "unknown suite field {other}"
                )))
            }
        };
        let r = Arc::new(solve_exterior(
            &norm,
            &dual,
            &body,
            p,
            &self.options(self.tier.resolution()),
        )?);
        self.cache.insert(key, r.clone());
        Ok(r)
    }

    /// Runs criterion `k` (1-based).
    pub fn criterion(&mut self, k: usize) -> Result<TheoremReport> {
        let name = *CRITERIA
            .get(k.wrapping_sub(1))
            .ok_or_else(|| FcapError::InvalidParameter(format!("no criterion {k}")))?;
        match k {
            1..=3 => {
                let key = ["wulff1", "wulff1_aniso", "wulff1_p15"][k - 1];
                let r = self.field(key)?;
                let rep = check_radial(&r)?
                    .ok_or_else(|| FcapError::InvalidParameter("not a Wulff body".into()))?;
                let mut out = combine(
                    name,
                    rep.verdict == Verdict::Consistent,
                    rep.measured.clone(),
                    rep.tolerances.clone(),
                    &[&rep],
                );
                if k == 3 {
                    out.measured["summary"]["closed_form"] = json!(8.0 * PI * 3f64.sqrt() / 3.0);
                }
                Ok(out)
            }
            4 => self.overdetermined(name),
            5 => self.brunn_minkowski(name),
            6 => {
                let r = self.field("cube")?;
                let rep =
                    check_scaling(&r, &[0.3, 0.5, 0.7], &self.options(self.tier.resolution()))?;
                Ok(combine(
                    name,
                    rep.verdict == Verdict::Consistent,
                    json!({ "max_deviation": num(&rep, "max_deviation")? }),
                    rep.tolerances.clone(),
                    &[&rep],
                ))
            }
            7 => self.concavity(name),
            8 => self.homothety(name),
            9 => {
                let mut reps = Vec::new();
                for key in ["wulff1", "wulff2"] {
                    let r = self.field(key)?;
                    reps.push(asymptotic_constant(&r, &default_radii(&r, 4))?);
                }
                let ok = reps.iter().all(|r| r.verdict == Verdict::Consistent);
                let summary = json!({
                    "limits": [num(&reps[0], "limit")?, num(&reps[1], "limit")?],
                    "stated_discrepancy": [num(&reps[0], "stated_discrepancy")?, num(&reps[1], "stated_discrepancy")?],
                });
                Ok(combine(
                    name,
                    ok,
                    summary,
                    reps[0].tolerances.clone(),
                    &[&reps[0], &reps[1]],
                ))
            }
            10 => {
                let norms = [
                    NormSpec::euclidean(3)?,
                    NormSpec::diagonal(&[1.0, 2.0, 4.0])?,
                    NormSpec::ellipsoid(3, vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 3.0])?,
                    NormSpec::lq(3, 3.0, 0.0)?,
                    NormSpec::lq(3, 4.0, 1e-3)?,
                ];
                let reps = norms
                    .iter()
                    .map(|n| check_norm_identities(n, self.tier.identity_samples(), self.seed))
                    .collect::<Result<Vec<_>>>()?;
                let ok = reps.iter().all(|r| r.verdict == Verdict::Consistent);
                let refs: Vec<&TheoremReport> = reps.iter().collect();
                Ok(combine(
                    name,
                    ok,
                    json!({ "norms": reps.len() }),
                    reps[0].tolerances.clone(),
                    &refs,
                ))
            }
            _ => unreachable!(),
        }
    }

    fn overdetermined(&mut self, name: &str) -> Result<TheoremReport> {
        let (norm, dual) = Self::euclidean()?;
        let opts = self.options(self.tier.annulus_resolution());
        let big_r = 2.0;
        let a = 0.5 / 3f64.sqrt();
        let wulff = ConvexBody::wulff(&dual, vec![0.0; 3], 0.5)?;
        let cube = ConvexBody::cuboid(vec![0.0; 3], vec![a; 3])?;
        let rw = check_overdetermined(
            &solve_annulus(&norm, &dual, &wulff, 2.0, big_r, &opts)?,
            big_r,
        )?;
        let rc = check_overdetermined(
            &solve_annulus(&norm, &dual, &cube, 2.0, big_r, &opts)?,
            big_r,
        )?;
        let (c_hat, wcv, ccv) = (num(&rw, "c_hat")?, num(&rw, "cv")?, num(&rc, "cv")?);
        let stated_residual = (c_hat - STATED_OUTER_GRADIENT).abs() / STATED_OUTER_GRADIENT;
        let tol = rw.tolerances.clone();
        let ok = wcv <= tol["cv"].as_f64().unwrap_or(0.0)
            && stated_residual <= tol["constant"].as_f64().unwrap_or(0.0)
            && ccv >= CALIBRATION_FACTOR * wcv;
        let summary = json!({
            "c_hat": c_hat,
            "stated_value": STATED_OUTER_GRADIENT,
            "stated_residual": stated_residual,
            "exact_annulus_gradient": num(&rw, "exact_annulus_gradient")?,
            "wulff_cv": wcv,
            "cube_cv": ccv,
            "cv_ratio": ccv / wcv,
        });
        let mut tolerances = tol;
        tolerances["cv_separation"] = json!(CALIBRATION_FACTOR);
        Ok(combine(name, ok, summary, tolerances, &[&rw, &rc]))
    }

    fn brunn_minkowski(&mut self, name: &str) -> Result<TheoremReport> {
        let opts = self.options(self.tier.resolution());
        let (w1, w2, cube) = (
            self.field("wulff1")?,
            self.field("wulff2")?,
            self.field("cube")?,
        );
        let homothetic = check_bm_with(&w1, &w2, 0.5, &opts)?;
        let mixed = check_bm_with(&cube, &w1, 0.5, &opts)?;
        let tol = homothetic.tolerances["relative"].as_f64().unwrap_or(0.0);
        let (dh, dm) = (
            num(&homothetic, "relative_deficit")?,
            num(&mixed, "relative_deficit")?,
        );
        let ok = dh.abs() <= tol && dm > tol;
        Ok(combine(
            name,
            ok,
            json!({ "homothetic_deficit": dh, "cube_wulff_deficit": dm }),
            homothetic.tolerances.clone(),
            &[&homothetic, &mixed],
        ))
    }

    fn concavity(&mut self, name: &str) -> Result<TheoremReport> {
        let opts = AlphaOptions {
            sample_pairs: self.tier.alpha_pairs(),
            seed: self.seed,
            ..AlphaOptions::default()
        };
        let mut reps = Vec::new();
        for key in ["wulff1", "wulff1_p15", "box"] {
            reps.push(check_alpha(&*self.field(key)?, &opts)?);
        }
        let wulff_err: Vec<f64> = reps[..2]
            .iter()
            .map(|r| Ok((num(r, "alpha")? - num(r, "q")?).abs()))
            .collect::<Result<_>>()?;
        let est_tol = reps[2].tolerances["estimator"]
            .as_f64()
            .unwrap_or(f64::INFINITY);
        let margin = num(&reps[2], "margin_below_q")?;
        let ok = wulff_err.iter().all(|e| *e <= ALPHA_TOLERANCE) && margin >= 2.0 * est_tol;
        let summary = json!({
            "wulff_alpha_error": wulff_err,
            "box_alpha": num(&reps[2], "alpha")?,
            "box_margin_below_q": margin,
            "box_estimator_tolerance": est_tol,
        });
        Ok(combine(
            name,
            ok,
            summary,
            json!({ "wulff": ALPHA_TOLERANCE, "box_margin_factor": 2.0 }),
            &[&reps[0], &reps[1], &reps[2]],
        ))
    }

    fn homothety(&mut self, name: &str) -> Result<TheoremReport> {
        let radial = check_homothetic_levels(&*self.field("wulff1")?, 0.25, 0.5)?;
        let cube = self.field("cube")?;
        // Closest level to the body that keeps the clearance, paired with a far one.
        let mut t2 = 0.9;
        while t2 > 0.35 && level_clearance(&cube, t2)? < LEVEL_CLEARANCE_CELLS {
            t2 -= 0.025;
        }
        let t1 = (t2 - 0.1).min(0.3);
        let near = check_homothetic_levels(&cube, t1, t2)?;
        let rho = num(&radial, "rho")?;
        let rho_err = (rho - 2.0).abs() / 2.0;
        let law = radial.tolerances["law"].as_f64().unwrap_or(0.0);
        let (wulff_res, cube_res) = (
            num(&radial, "homothety_residual")?,
            num(&near, "homothety_residual")?,
        );
        let ok = radial.verdict == Verdict::Consistent
            && rho_err <= law
            && cube_res > HOMOTHETY_THRESHOLD
            && cube_res >= CALIBRATION_FACTOR * wulff_res;
        let summary = json!({
            "rho": rho,
            "rho_error": rho_err,
            "law_residual": num(&radial, "law_residual")?,
            "wulff_homothety_residual": wulff_res,
            "cube_levels": [t1, t2],
            "cube_homothety_residual": cube_res,
        });
        let mut tolerances = radial.tolerances.clone();
        tolerances["calibration_factor"] = json!(CALIBRATION_FACTOR);
        Ok(combine(name, ok, summary, tolerances, &[&radial, &near]))
    }

    /// All criteria in order.
    pub fn run_all(&mut self) -> Result<Vec<TheoremReport>> {
        (1..=CRITERIA.len()).map(|k| self.criterion(k)).collect()
    }
}

/// Runs every criterion at `tier`.
pub fn run_suite(tier: Tier, seed: u64, threads: Option<usize>) -> Result<Vec<TheoremReport>> {
    Suite::new(tier, seed, threads).run_all()
}
