//! Exterior and annulus solves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::energy::Energy;
use super::field::ScalarField;
use super::grid::{spacing_for, Grid, OuterData};
use super::ncg::{minimize, NcgOptions};
use super::radial::{radial_capacity_with_volume, radial_exponent, wulff_volume};
use crate::bodies::ConvexBody;
use crate::error::{FcapError, Result};
use crate::norms::{DualNorm, NormSpec};

/// Outer boundary data for the truncated exterior problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBc {
    /// `c H0^(1/q)` with the amplitude `c` matched to the solution.
    RadialProfile,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Nodes across the (volume-equivalent) box around the smallest truncation shape.
    pub resolution: usize,
    /// Truncation radii as multiples of the body's `H0`-circumradius.
    pub outer_radius_factors: Vec<f64>,
    /// Absolute truncation radii, overriding the factors.
    pub outer_radii: Option<Vec<f64>>,
    pub outer_bc: OuterBc,
    /// Regularization levels in units of `1/circumradius`; `None` picks
    /// `[1e-2, 1e-3, 1e-4]` for `p < 2` and `[0]` otherwise.
    pub epsilon_schedule: Option<Vec<f64>>,
    pub ncg: NcgOptions,
    /// Warm-start from solves on grids coarsened by factors of two.
    pub cascade: bool,
    /// Turn non-convergence into an error instead of a flag.
    pub require_converged: bool,
    pub threads: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            resolution: 64,
            outer_radius_factors: vec![4.0, 6.0],
            outer_radii: None,
            outer_bc: OuterBc::RadialProfile,
            epsilon_schedule: None,
            ncg: NcgOptions::default(),
            cascade: true,
            require_converged: false,
            threads: None,
        }
    }
}

impl SolverOptions {
    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn epsilons(&self, p: f64) -> Vec<f64> {
        match &self.epsilon_schedule {
            Some(s) => s.clone(),
            None if p < 2.0 => vec![1e-2, 1e-3, 1e-4],
            None => vec![0.0],
        }
    }
}

/// One truncated solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusRecord {
    pub outer_radius: f64,
    /// Energy of the discrete minimizer at `epsilon = 0`.
    pub energy: f64,
    pub outer_coefficient: f64,
    pub iterations: usize,
    pub unknowns: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Field on the largest truncation radius.
    pub field: ScalarField,
    pub norm: NormSpec,
    pub dual: DualNorm,
    pub body: ConvexBody,
    pub p: f64,
    pub q: f64,
    /// Extrapolated capacity (the plain discrete energy for a single radius).
    pub capacity: f64,
    /// Discrete energy of `field` at `epsilon = 0`.
    pub field_energy: f64,
    pub energy_history: Vec<f64>,
    pub final_gradient_norm: f64,
    pub truncation_radii: Vec<f64>,
    pub epsilon_schedule: Vec<f64>,
    /// Range of `H(Du) H0^(1 - 1/q)` over `1.5 r <= H0 <= 0.7 R`.
    pub gamma_bounds: (f64, f64),
    pub records: Vec<RadiusRecord>,
    pub converged: bool,
    pub threads: usize,
    pub options: SolverOptions,
}

impl SolveResult {
    pub fn to_json(&self) -> Value {
        json!({
            "capacity": self.capacity,
            "field_energy": self.field_energy,
            "p": self.p,
            "q": self.q,
            "final_gradient_norm": self.final_gradient_norm,
            "truncation_radii": self.truncation_radii,
            "epsilon_schedule": self.epsilon_schedule,
            "gamma_bounds": [self.gamma_bounds.0, self.gamma_bounds.1],
            "records": self.records,
            "converged": self.converged,
            "iterations": self.energy_history.len().saturating_sub(1),
            "resolution": self.options.resolution,
            "spacing": self.field.grid.spacing,
            "threads": self.threads,
        })
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| FcapError::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn check_inputs(norm: &NormSpec, dual: &DualNorm, body: &ConvexBody, p: f64) -> Result<f64> {
    if dual.source() != norm {
        return Err(FcapError::InvalidParameter(
            "dual norm does not belong to the given norm".into(),
        ));
    }
    if body.dim != norm.dim {
        return Err(FcapError::DimensionMismatch {
            expected: norm.dim,
            got: body.dim,
        });
    }
    radial_exponent(norm.dim, p)
}

/// Capacitary potential of `body` on truncated exterior domains, with the
/// capacity extrapolated in `R^(1/q)` across the truncation radii.
pub fn solve_exterior(
    norm: &NormSpec,
    dual: &DualNorm,
    body: &ConvexBody,
    p: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let q = check_inputs(norm, dual, body, p)?;
    in_pool(opts.threads, || {
        exterior_inner(norm, dual, body, p, q, opts)
    })?
}

fn exterior_inner(
    norm: &NormSpec,
    dual: &DualNorm,
    body: &ConvexBody,
    p: f64,
    q: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let circum = body.circumradius(dual)?;
    let mut radii = match &opts.outer_radii {
        Some(r) => r.clone(),
        None => opts
            .outer_radius_factors
            .iter()
            .map(|f| f * circum)
            .collect(),
    };
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    if radii.is_empty() {
        return Err(FcapError::InvalidParameter(
            "at least one truncation radius is required".into(),
        ));
    }
    if radii[0] <= circum {
        return Err(FcapError::BodyNotInside { radius: radii[0] });
    }
    let spacing = spacing_for(dual, radii[0], opts.resolution);
    let epsilons = opts.epsilons(p);
    let volume = wulff_volume(dual)?;
    let anchor = body.anchor();

    // Far-field amplitude of the initial guess `min(1, gauge^(1/q))`.
    let amplitude = initial_amplitude(body, dual, q);

    let mut records = Vec::new();
    let mut last = None;
    for &r_out in &radii {
        let guess = |x: &[f64]| -> f64 {
            let d: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| a - b).collect();
            body.gauge_dir(&d).powf(1.0 / q).min(1.0)
        };
        let mut coefficient = match opts.outer_bc {
            OuterBc::RadialProfile => amplitude,
            OuterBc::Zero => 0.0,
        };
        let mut run = run_grid(
            norm,
            dual,
            body,
            p,
            r_out,
            spacing,
            data_for(opts.outer_bc, coefficient, q),
            &guess,
            &epsilons,
            opts,
        )?;
        if opts.outer_bc == OuterBc::RadialProfile {
            // One fixed-point pass: rematch the amplitude to the Wulff shape with the same energy.
            let unit = radial_capacity_with_volume(norm.dim, volume, 1.0, p)?;
            if let Some(re) = truncated_equivalent_radius(unit, run.energy, r_out, p, q) {
                let c1 = re.powf(-1.0 / q);
                if (c1 / coefficient - 1.0).abs() > 0.02 {
                    coefficient = c1;
                    let prev = run.field.clone();
                    let warm = |x: &[f64]| prev.interpolate(x).unwrap_or(0.0);
                    run = run_grid(
                        norm,
                        dual,
                        body,
                        p,
                        r_out,
                        spacing,
                        data_for(opts.outer_bc, coefficient, q),
                        &warm,
                        &epsilons,
                        opts,
                    )?;
                }
            }
        }
        records.push(RadiusRecord {
            outer_radius: r_out,
            energy: run.energy,
            outer_coefficient: coefficient,
            iterations: run.history.len() - 1,
            unknowns: run.field.grid.unknown_count(),
            converged: run.converged,
        });
        last = Some(run);
    }
    let run = last.expect("at least one radius");
    let capacity = extrapolate(&records, q);
    let converged = records.iter().all(|r| r.converged);
    if opts.require_converged && !converged {
        return Err(FcapError::NonConvergence(format!(
            "exterior solve stopped before the tolerance (gradient norm {:.3e})",
            run.grad_norm
        )));
    }
    let gamma_bounds = gamma_bounds(&run.field, norm, q, circum, *radii.last().unwrap());
    Ok(SolveResult {
        field: run.field,
        norm: norm.clone(),
        dual: dual.clone(),
        body: body.clone(),
        p,
        q,
        capacity,
        field_energy: run.energy,
        energy_history: run.history,
        final_gradient_norm: run.grad_norm,
        truncation_radii: radii,
        epsilon_schedule: epsilons,
        gamma_bounds,
        records,
        converged,
        threads: rayon::current_num_threads(),
        options: opts.clone(),
    })
}

/// Potential of `body` in `B_{H0}(R)` with data 1 on the body and 0 on `H0 = R`.
pub fn solve_annulus(
    norm: &NormSpec,
    dual: &DualNorm,
    body: &ConvexBody,
    p: f64,
    big_r: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let q = check_inputs(norm, dual, body, p)?;
    in_pool(opts.threads, || {
        let circum = body.circumradius(dual)?;
        if big_r <= circum {
            return Err(FcapError::BodyNotInside { radius: big_r });
        }
        let spacing = spacing_for(dual, big_r, opts.resolution);
        let epsilons = opts.epsilons(p);
        let anchor = body.anchor();
        let tau = |s: f64| s.powf(1.0 / q);
        let guess = |x: &[f64]| -> f64 {
            let d: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| a - b).collect();
            let g = body.gauge_dir(&d);
            let h0 = dual.eval(x).unwrap_or(f64::INFINITY);
            if g <= 1.0 {
                return 1.0;
            }
            let far = big_r * g / h0;
            ((tau(g) - tau(far)) / (1.0 - tau(far))).clamp(0.0, 1.0)
        };
        let run = run_grid(
            norm,
            dual,
            body,
            p,
            big_r,
            spacing,
            OuterData::Zero,
            &guess,
            &epsilons,
            opts,
        )?;
        if opts.require_converged && !run.converged {
            return Err(FcapError::NonConvergence(format!(
                "annulus solve stopped before the tolerance (gradient norm {:.3e})",
                run.grad_norm
            )));
        }
        let gamma_bounds = gamma_bounds(&run.field, norm, q, circum, big_r);
        let record = RadiusRecord {
            outer_radius: big_r,
            energy: run.energy,
            outer_coefficient: 0.0,
            iterations: run.history.len() - 1,
            unknowns: run.field.grid.unknown_count(),
            converged: run.converged,
        };
        Ok(SolveResult {
            field: run.field,
            norm: norm.clone(),
            dual: dual.clone(),
            body: body.clone(),
            p,
            q,
            capacity: run.energy,
            field_energy: run.energy,
            energy_history: run.history,
            final_gradient_norm: run.grad_norm,
            truncation_radii: vec![big_r],
            epsilon_schedule: epsilons,
            gamma_bounds,
            records: vec![record],
            converged: run.converged,
            threads: rayon::current_num_threads(),
            options: opts.clone(),
        })
    })?
}

fn data_for(bc: OuterBc, coefficient: f64, q: f64) -> OuterData {
    match bc {
        OuterBc::RadialProfile => OuterData::Radial {
            coefficient,
            exponent: 1.0 / q,
        },
        OuterBc::Zero => OuterData::Zero,
    }
}

/// Mean of `gauge^(1/q) / H0^(1/q)` over far directions.
fn initial_amplitude(body: &ConvexBody, dual: &DualNorm, q: f64) -> f64 {
    let dirs = crate::directions::sphere_directions(body.dim, 512);
    let anchor = body.anchor();
    let far = 1e3 * body.circumradius(dual).unwrap_or(1.0);
    let mut acc = 0.0;
    for u in &dirs {
        let x: Vec<f64> = u.iter().zip(&anchor).map(|(u, a)| a + far * u).collect();
        let d: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| a - b).collect();
        let g = body.gauge_dir(&d);
        let h0 = dual.eval(&x).unwrap_or(f64::INFINITY);
        acc += (g / h0).powf(1.0 / q);
    }
    acc / dirs.len() as f64
}

/// Smallest `r` with `unit r^(N-p) (1 - (R/r)^(1/q)) = energy`, the energy of
/// the exact Wulff potential truncated at `R`.
fn truncated_equivalent_radius(unit: f64, energy: f64, big_r: f64, p: f64, q: f64) -> Option<f64> {
    let np = -(p - 1.0) / q;
    let f = |r: f64| unit * r.powf(np) * (1.0 - (big_r / r).powf(1.0 / q));
    // f rises from 0 to a maximum and falls back to 0 at r = R.
    let mut peak = big_r;
    let mut best = f64::NEG_INFINITY;
    for k in 1..200 {
        let r = big_r * k as f64 / 200.0;
        let v = f(r);
        if v > best {
            best = v;
            peak = r;
        }
    }
    if !(energy < best) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Least-squares line `E = C - a R^(1/q)` through the per-radius energies;
/// with two radii this is the Richardson extrapolant.
fn extrapolate(records: &[RadiusRecord], q: f64) -> f64 {
    if records.len() == 1 {
        return records[0].energy;
    }
    let t: Vec<f64> = records
        .iter()
        .map(|r| r.outer_radius.powf(1.0 / q))
        .collect();
    let e: Vec<f64> = records.iter().map(|r| r.energy).collect();
    let n = t.len() as f64;
    let (mt, me) = (t.iter().sum::<f64>() / n, e.iter().sum::<f64>() / n);
    let stt: f64 = t.iter().map(|t| (t - mt) * (t - mt)).sum();
    let ste: f64 = t.iter().zip(&e).map(|(t, e)| (t - mt) * (e - me)).sum();
    me - ste / stt * mt
}

fn gamma_bounds(field: &ScalarField, norm: &NormSpec, q: f64, r: f64, big_r: f64) -> (f64, f64) {
    let g = &*field.grid;
    let grads = field.gradient_field(norm);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (k, &node) in g.unknown_nodes.iter().enumerate() {
        let h0 = g.node_h0(node as usize);
        if h0 >= 1.5 * r && h0 <= 0.7 * big_r {
            let ratio = grads.norms[k] * h0.powf(1.0 - 1.0 / q);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    (lo, hi)
}

struct GridRun {
    field: ScalarField,
    energy: f64,
    history: Vec<f64>,
    grad_norm: f64,
    converged: bool,
}

/// Grids coarser than this are solved directly.
const CASCADE_MIN_UNKNOWNS: usize = 20_000;

#[allow(clippy::too_many_arguments)]
fn run_grid(
    norm: &NormSpec,
    dual: &DualNorm,
    body: &ConvexBody,
    p: f64,
    r_out: f64,
    spacing: f64,
    data: OuterData,
    guess: &dyn Fn(&[f64]) -> f64,
    epsilons: &[f64],
    opts: &SolverOptions,
) -> Result<GridRun> {
    let grid = Arc::new(Grid::build_with_spacing(body, dual, r_out, spacing, data)?);
    if !grid.is_connected() {
        return Err(FcapError::InvalidParameter(
            "free nodes are not connected to the body".into(),
        ));
    }
    let mut history = Vec::new();
    // Coarse warm start.
    let coarse = if opts.cascade && grid.unknown_count() > 4 * CASCADE_MIN_UNKNOWNS {
        run_grid(
            norm,
            dual,
            body,
            p,
            r_out,
            2.0 * spacing,
            data,
            guess,
            epsilons,
            opts,
        )
        .ok()
    } else {
        None
    };
    let mut u: Vec<f64> = grid
        .unknown_nodes
        .iter()
        .map(|&i| {
            let x = grid.node_coords(i as usize);
            coarse
                .as_ref()
                .and_then(|c| c.field.interpolate(&x))
                .unwrap_or_else(|| guess(&x))
        })
        .collect();
    let schedule: Vec<f64> = if coarse.is_some() {
        epsilons[epsilons.len() - 1..].to_vec()
    } else {
        epsilons.to_vec()
    };
    let mut converged = true;
    let mut grad_norm = 0.0;
    for &eps in &schedule {
        let energy = Energy::new(&grid, norm, p, eps);
        let diag = energy.hessian_diagonal(&u);
        let out = minimize(|x, g| energy.value_and_gradient(x, g), &diag, u, &opts.ncg);
        history.extend(
            out.history
                .iter()
                .skip(if history.is_empty() { 0 } else { 1 }),
        );
        u = out.x;
        converged = out.converged;
        grad_norm = out.grad_norm;
    }
    for v in u.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let values = grid.scatter(&u);
    let energy = Energy::new(&grid, norm, p, 0.0).of_nodes(&values);
    Ok(GridRun {
        field: ScalarField::new(grid, values)?,
        energy,
        history,
        grad_norm,
        converged,
    })
}
