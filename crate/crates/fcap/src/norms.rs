//! Anisotropic norms `H`, their derivatives, and the dual norm `H0`.
//!
//! Three families are provided: the Euclidean norm, quadratic (ellipsoidal)
//! norms `H(xi) = sqrt(xi . A xi)`, and the regularized `l^q` family
//!
//! ```text
//! H(xi) = ( sum_i (xi_i^2 + delta |xi|^2)^(q/2) )^(1/q)
//! ```
//!
//! which is smooth and uniformly convex away from the origin for `delta > 0`.
//! All evaluation routines work on slices and avoid allocation where they sit
//! on the solver's hot path.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::directions::sphere_directions;
use crate::error::{FcapError, Result};
use crate::vecops::{dot, norm2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Euclidean,
    /// Row-major symmetric positive-definite matrix.
    Ellipsoid {
        matrix: Vec<f64>,
    },
    LqRegularized {
        q_exp: f64,
        delta: f64,
    },
}

/// A norm on `R^dim`, immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    pub dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(FcapError::InvalidParameter(format!(
            "dimension must be at least 3, got {dim}"
        )));
    }
    Ok(())
}

impl NormSpec {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: NormKind::Euclidean,
            dim,
        })
    }

    /// Quadratic norm `sqrt(xi . A xi)`; `matrix` is row-major `dim x dim`.
    pub fn ellipsoid(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if matrix.len() != dim * dim {
            return Err(FcapError::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let m = DMatrix::from_row_slice(dim, dim, &matrix);
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(FcapError::InvalidParameter(
                "ellipsoid matrix is not symmetric".into(),
            ));
        }
        if m.clone().cholesky().is_none() {
            return Err(FcapError::InvalidParameter(
                "ellipsoid matrix is not positive definite".into(),
            ));
        }
        Ok(Self {
            kind: NormKind::Ellipsoid { matrix },
            dim,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            m[i * n + i] = *d;
        }
        Self::ellipsoid(n, m)
    }

    pub fn lq(dim: usize, q_exp: f64, delta: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(q_exp > 1.0) || !q_exp.is_finite() {
            return Err(FcapError::InvalidParameter(format!(
                "q must exceed 1, got {q_exp}"
            )));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(FcapError::InvalidParameter(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        Ok(Self {
            kind: NormKind::LqRegularized { q_exp, delta },
            dim,
        })
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(FcapError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `H(xi)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_len(xi)?;
        Ok(self.eval_unchecked(xi))
    }

    /// `H(xi)` without the dimension check.
    #[inline]
    pub fn eval_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Euclidean => norm2(xi),
            NormKind::Ellipsoid { matrix } => quad_form(matrix, xi).max(0.0).sqrt(),
            NormKind::LqRegularized { q_exp, delta } => {
                let s = dot(xi, xi);
                if s == 0.0 {
                    return 0.0;
                }
                let sum: f64 = xi
                    .iter()
                    .map(|x| (x * x + delta * s).powf(0.5 * q_exp))
                    .sum();
                sum.powf(1.0 / q_exp)
            }
        }
    }

    /// `grad H(xi)`.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi)?;
        if xi.iter().all(|x| *x == 0.0) {
            return Err(FcapError::ZeroVector);
        }
        let mut out = vec![0.0; self.dim];
        let h = self.eval_unchecked(xi);
        self.half_sq_grad_into(xi, &mut out);
        for o in &mut out {
            *o /= h;
        }
        Ok(out)
    }

    /// Writes `H(xi) grad H(xi) = grad(H^2 / 2)` into `out`. Well defined at zero.
    #[inline]
    pub fn half_sq_grad_into(&self, xi: &[f64], out: &mut [f64]) {
        match &self.kind {
            NormKind::Euclidean => out.copy_from_slice(xi),
            NormKind::Ellipsoid { matrix } => {
                let n = xi.len();
                for i in 0..n {
                    let row = &matrix[i * n..(i + 1) * n];
                    out[i] = dot(row, xi);
                }
            }
            NormKind::LqRegularized { q_exp, delta } => {
                let s = dot(xi, xi);
                if s == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                let a = 0.5 * q_exp;
                let mut f = 0.0;
                let mut t1 = 0.0;
                for x in xi {
                    let w = x * x + delta * s;
                    f += w.powf(a);
                    t1 += pow_or_zero(w, a - 1.0);
                }
                let h = f.powf(1.0 / q_exp);
                // grad H = F^(1/q - 1) xi_j (w_j^(a-1) + delta T1); multiply by H.
                let scale = h * f.powf(1.0 / q_exp - 1.0);
                for (o, x) in out.iter_mut().zip(xi) {
                    let w = x * x + delta * s;
                    let c = if *x == 0.0 {
                        0.0
                    } else {
                        pow_or_zero(w, a - 1.0) * x
                    };
                    *o = scale * (c + delta * t1 * x);
                }
            }
        }
    }

    /// Hessian of `H` at `xi` (row-major). Singular for `delta = 0, q < 2` on axes.
    pub fn hess(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi)?;
        if xi.iter().all(|x| *x == 0.0) {
            return Err(FcapError::ZeroVector);
        }
        let n = self.dim;
        let h = self.eval_unchecked(xi);
        let mut out = vec![0.0; n * n];
        match &self.kind {
            NormKind::Euclidean => {
                for i in 0..n {
                    for j in 0..n {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i * n + j] = (id - xi[i] * xi[j] / (h * h)) / h;
                    }
                }
            }
            NormKind::Ellipsoid { matrix } => {
                let mut ax = vec![0.0; n];
                self.half_sq_grad_into(xi, &mut ax);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = (matrix[i * n + j] - ax[i] * ax[j] / (h * h)) / h;
                    }
                }
            }
            NormKind::LqRegularized { q_exp, delta } => {
                let (q, d) = (*q_exp, *delta);
                let a = 0.5 * q;
                let s = dot(xi, xi);
                let w: Vec<f64> = xi.iter().map(|x| x * x + d * s).collect();
                let f: f64 = w.iter().map(|w| w.powf(a)).sum();
                let t1: f64 = w.iter().map(|w| pow_or_zero(*w, a - 1.0)).sum();
                let t2: f64 = w.iter().map(|w| pow_or_zero(*w, a - 2.0)).sum();
                // grad F and hess F, then chain through H = F^(1/q).
                let gf: Vec<f64> = (0..n)
                    .map(|j| 2.0 * a * xi[j] * (pow_or_zero(w[j], a - 1.0) + d * t1))
                    .collect();
                let mut hf = vec![0.0; n * n];
                for j in 0..n {
                    let wj2 = pow_or_zero(w[j], a - 2.0);
                    for k in 0..n {
                        let djk = if j == k { 1.0 } else { 0.0 };
                        let term1 = (a - 1.0) * wj2 * xi[j] * (2.0 * xi[j] * djk + 2.0 * d * xi[k]);
                        let term2 = (pow_or_zero(w[j], a - 1.0) + d * t1) * djk;
                        let term3 = d
                            * xi[j]
                            * (a - 1.0)
                            * 2.0
                            * xi[k]
                            * (pow_or_zero(w[k], a - 2.0) + d * t2);
                        hf[j * n + k] = 2.0 * a * (term1 + term2 + term3);
                    }
                }
                if d == 0.0 && q < 2.0 && xi.iter().any(|x| *x == 0.0) {
                    return Err(FcapError::NonSmoothPoint);
                }
                let c1 = f.powf(1.0 / q - 1.0) / q;
                let c2 = (1.0 / q) * (1.0 / q - 1.0) * f.powf(1.0 / q - 2.0);
                for j in 0..n {
                    for k in 0..n {
                        out[j * n + k] = c1 * hf[j * n + k] + c2 * gf[j] * gf[k];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Hessian of `H^p` at `xi` (row-major).
    pub fn hess_p(&self, p: f64, xi: &[f64]) -> Result<Vec<f64>> {
        if !(p > 1.0 && p < self.dim as f64) {
            return Err(FcapError::ExponentOutOfRange { p, dim: self.dim });
        }
        let n = self.dim;
        let hh = self.hess(xi)?;
        let g = self.grad(xi)?;
        let h = self.eval_unchecked(xi);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = p * h.powf(p - 1.0) * hh[i * n + j]
                    + p * (p - 1.0) * h.powf(p - 2.0) * g[i] * g[j];
            }
        }
        Ok(out)
    }

    /// The closed-form dual norm, when one exists.
    pub fn closed_form_dual(&self) -> Option<NormSpec> {
        match &self.kind {
            NormKind::Euclidean => Some(self.clone()),
            NormKind::Ellipsoid { matrix } => {
                let m = DMatrix::from_row_slice(self.dim, self.dim, matrix);
                let inv = m.try_inverse()?;
                let inv = (&inv + inv.transpose()) * 0.5;
                let data: Vec<f64> = (0..self.dim)
                    .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                    .map(|(i, j)| inv[(i, j)])
                    .collect();
                Some(NormSpec {
                    kind: NormKind::Ellipsoid { matrix: data },
                    dim: self.dim,
                })
            }
            NormKind::LqRegularized { q_exp, delta } if *delta == 0.0 => Some(NormSpec {
                kind: NormKind::LqRegularized {
                    q_exp: q_exp / (q_exp - 1.0),
                    delta: 0.0,
                },
                dim: self.dim,
            }),
            NormKind::LqRegularized { .. } => None,
        }
    }

    /// Whether `grad H` fails to be smooth at `x` (raw `l^q`, `q != 2`, on a coordinate hyperplane).
    fn nonsmooth_at(&self, x: &[f64]) -> bool {
        match &self.kind {
            NormKind::LqRegularized { q_exp, delta } => {
                *delta == 0.0 && *q_exp != 2.0 && x.iter().any(|v| *v == 0.0)
            }
            _ => false,
        }
    }

    /// Parses the CLI grammar: `euclidean`, `ellipsoid:a11,a12,...` (row-major
    /// upper triangle), `lq:Q:delta=D`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let perr = |token: &str, reason: &str| FcapError::Parse {
            token: token.to_string(),
            reason: reason.to_string(),
        };
        let spec = spec.trim();
        if spec == "euclidean" {
            return Self::euclidean(dim);
        }
        if let Some(rest) = spec.strip_prefix("ellipsoid:") {
            let vals = parse_floats(rest)?;
            let need = dim * (dim + 1) / 2;
            if vals.len() != need {
                return Err(perr(
                    rest,
                    &format!("expected {need} upper-triangle entries for dimension {dim}"),
                ));
            }
            return Self::ellipsoid(dim, upper_to_full(dim, &vals));
        }
        if let Some(rest) = spec.strip_prefix("lq:") {
            let mut parts = rest.split(':');
            let qtok = parts.next().unwrap_or("");
            let q: f64 = qtok
                .parse()
                .map_err(|_| perr(qtok, "exponent is not a number"))?;
            let dtok = parts
                .next()
                .ok_or_else(|| perr(rest, "missing `delta=D`"))?;
            let dval = dtok
                .strip_prefix("delta=")
                .ok_or_else(|| perr(dtok, "expected `delta=D`"))?;
            let delta: f64 = dval
                .parse()
                .map_err(|_| perr(dval, "delta is not a number"))?;
            if let Some(extra) = parts.next() {
                return Err(perr(extra, "unexpected trailing field"));
            }
            return Self::lq(dim, q, delta);
        }
        Err(perr(spec, "unknown norm kind"))
    }
}

/// Parses a comma-separated list of reals.
pub(crate) fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| FcapError::Parse {
                token: t.to_string(),
                reason: "not a number".into(),
            })
        })
        .collect()
}

pub(crate) fn upper_to_full(dim: usize, upper: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            m[i * dim + j] = upper[k];
            m[j * dim + i] = upper[k];
            k += 1;
        }
    }
    m
}

#[inline]
fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += x[i] * dot(&m[i * n..(i + 1) * n], x);
    }
    acc
}

/// `w^e`, with `0^e` taken as 0 for negative `e` (the term is always multiplied by a vanishing coordinate).
#[inline]
fn pow_or_zero(w: f64, e: f64) -> f64 {
    if w == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        w.powf(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DualMethod {
    ClosedForm,
    GenericMaximization {
        direction_count: usize,
        refine_tol: f64,
    },
}

pub const DEFAULT_DIRECTION_COUNT: usize = 2048;
pub const DEFAULT_REFINE_TOL: f64 = 1e-8;

/// Handle for evaluating `H0(x) = sup <x, xi> / H(xi)`.
#[derive(Clone, Debug)]
pub struct DualNorm {
    source: NormSpec,
    method: DualMethod,
    closed: Option<NormSpec>,
    directions: Arc<Vec<Vec<f64>>>,
}

impl DualNorm {
    /// Closed form when available, otherwise generic maximization with defaults.
    pub fn new(source: NormSpec) -> Self {
        match Self::closed_form(source.clone()) {
            Ok(d) => d,
            Err(_) => Self::generic(source, DEFAULT_DIRECTION_COUNT, DEFAULT_REFINE_TOL),
        }
    }

    pub fn closed_form(source: NormSpec) -> Result<Self> {
        let closed = source.closed_form_dual().ok_or_else(|| {
            FcapError::InvalidParameter("no closed-form dual for this norm".into())
        })?;
        Ok(Self {
            source,
            method: DualMethod::ClosedForm,
            closed: Some(closed),
            directions: Arc::new(Vec::new()),
        })
    }

    pub fn generic(source: NormSpec, direction_count: usize, refine_tol: f64) -> Self {
        let dirs = sphere_directions(source.dim, direction_count.max(1));
        Self {
            source,
            method: DualMethod::GenericMaximization {
                direction_count,
                refine_tol,
            },
            closed: None,
            directions: Arc::new(dirs),
        }
    }

    pub fn source(&self) -> &NormSpec {
        &self.source
    }

    pub fn method(&self) -> &DualMethod {
        &self.method
    }

    pub fn dim(&self) -> usize {
        self.source.dim
    }

    /// The dual norm as a [`NormSpec`], when it has a closed form.
    pub fn closed_norm(&self) -> Option<&NormSpec> {
        self.closed.as_ref()
    }

    /// `H0(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.source.check_len(x)?;
        if let Some(c) = &self.closed {
            return Ok(c.eval_unchecked(x));
        }
        if x.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let (xi, _) = self.maximize(x)?;
        Ok(dot(x, &xi))
    }

    /// `grad H0(x)`; equals the maximizer `xi` normalized to `H(xi) = 1`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.source.check_len(x)?;
        if x.iter().all(|v| *v == 0.0) {
            return Err(FcapError::ZeroVector);
        }
        if let Some(c) = &self.closed {
            if c.nonsmooth_at(x) {
                return Err(FcapError::NonSmoothPoint);
            }
            return c.grad(x);
        }
        Ok(self.maximize(x)?.0)
    }

    /// Finds the unit-`H` maximizer of `<x, xi>`.
    ///
    /// Scans the direction set, then runs damped Newton on the concave problem
    /// `max <x, xi> - H(xi)^2 / 2`, whose maximizer solves `H grad H (xi) = x`
    /// and has `H(xi) = H0(x)`. Returns the normalized maximizer and the final
    /// relative residual.
    fn maximize(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (refine_tol, _) = match self.method {
            DualMethod::GenericMaximization {
                refine_tol,
                direction_count,
            } => (refine_tol, direction_count),
            DualMethod::ClosedForm => (DEFAULT_REFINE_TOL, 0),
        };
        let h = &self.source;
        let n = h.dim;
        let xn = norm2(x);
        let mut best = f64::NEG_INFINITY;
        let mut best_u: Vec<f64> = x.iter().map(|v| v / xn).collect();
        {
            let hu = h.eval_unchecked(&best_u);
            best = best.max(dot(x, &best_u) / hu);
        }
        for u in self.directions.iter() {
            let r = dot(x, u) / h.eval_unchecked(u);
            if r > best {
                best = r;
                best_u.clone_from(u);
            }
        }
        let hu = h.eval_unchecked(&best_u);
        let mut xi: Vec<f64> = best_u.iter().map(|v| v * best / hu).collect();
        let phi = |xi: &[f64]| {
            let hv = h.eval_unchecked(xi);
            dot(x, xi) - 0.5 * hv * hv
        };
        let mut g = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for _ in 0..100 {
            h.half_sq_grad_into(&xi, &mut g);
            let r: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
            residual = norm2(&r) / xn;
            if residual <= refine_tol {
                break;
            }
            let step = match half_sq_hessian(h, &xi) {
                Some(m) => match m.cholesky() {
                    Some(ch) => ch
                        .solve(&nalgebra::DVector::from_column_slice(&r))
                        .as_slice()
                        .to_vec(),
                    None => r.clone(),
                },
                None => r.clone(),
            };
            let f0 = phi(&xi);
            let slope = dot(&r, &step);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = xi.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                if phi(&cand) >= f0 + 1e-4 * t * slope {
                    xi = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if !residual.is_finite() || residual > refine_tol.max(1e-6) {
            return Err(FcapError::DualNonConvergence { achieved: residual });
        }
        let hx = h.eval_unchecked(&xi);
        Ok((xi.iter().map(|v| v / hx).collect(), residual))
    }
}

/// `grad^2 (H^2 / 2) = grad H grad H^T + H grad^2 H`.
fn half_sq_hessian(h: &NormSpec, xi: &[f64]) -> Option<DMatrix<f64>> {
    let n = h.dim;
    let hess = h.hess(xi).ok()?;
    let g = h.grad(xi).ok()?;
    let hv = h.eval_unchecked(xi);
    Some(DMatrix::from_fn(n, n, |i, j| {
        g[i] * g[j] + hv * hess[i * n + j]
    }))
}

/// Sampled diagnostics for membership in the regularity class of norms whose
/// unit sphere is uniformly convex and whose `p`-th power has Lipschitz Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JpReport {
    pub samples: usize,
    pub min_tangential_eigenvalue: f64,
    pub lipschitz_estimate: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Positivity threshold for the minimum tangential Hessian eigenvalue.
pub const JP_THRESHOLD: f64 = 1e-6;

/// Samples unit directions (the coordinate axes are always included) and
/// reports the smallest eigenvalue of `grad^2 H` restricted to the tangent
/// space of the unit sphere, plus a finite-difference Lipschitz estimate of
/// `grad^2 (H^p)`.
pub fn check_class_jp(norm: &NormSpec, p: f64, sample_count: usize) -> JpReport {
    let n = norm.dim;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            dirs.push(e);
        }
    }
    dirs.extend(sphere_directions(n, sample_count.max(1)));
    let mut min_eig = f64::INFINITY;
    let mut lip: f64 = 0.0;
    let step = 1e-3;
    for u in &dirs {
        let hn = norm.eval_unchecked(u);
        let xi: Vec<f64> = u.iter().map(|v| v / hn).collect();
        match norm.hess(&xi) {
            Ok(hm) => {
                let e = tangential_min_eigenvalue(&hm, u, n);
                min_eig = min_eig.min(if e.is_finite() { e } else { 0.0 });
            }
            Err(_) => min_eig = min_eig.min(0.0),
        }
        // Lipschitz of hess_p along a fixed tangent direction.
        let t = tangent_vector(u);
        let moved: Vec<f64> = u.iter().zip(&t).map(|(a, b)| a + step * b).collect();
        if let (Ok(h0), Ok(h1)) = (norm.hess_p(p, u), norm.hess_p(p, &moved)) {
            let diff: f64 = h0
                .iter()
                .zip(&h1)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            lip = lip.max(diff / step);
        } else {
            lip = f64::INFINITY;
        }
    }
    let pass = min_eig > JP_THRESHOLD && lip.is_finite();
    JpReport {
        samples: dirs.len(),
        min_tangential_eigenvalue: min_eig,
        lipschitz_estimate: lip,
        threshold: JP_THRESHOLD,
        pass,
    }
}

fn tangent_vector(u: &[f64]) -> Vec<f64> {
    // Gram-Schmidt the coordinate axis least aligned with u.
    let k = (0..u.len())
        .min_by(|a, b| u[*a].abs().partial_cmp(&u[*b].abs()).unwrap())
        .unwrap();
    let un = norm2(u);
    let mut e = vec![0.0; u.len()];
    e[k] = 1.0;
    let c = dot(&e, u) / (un * un);
    let mut t: Vec<f64> = e.iter().zip(u).map(|(a, b)| a - c * b).collect();
    let tn = norm2(&t);
    t.iter_mut().for_each(|v| *v /= tn);
    t
}

fn tangential_min_eigenvalue(hess: &[f64], u: &[f64], n: usize) -> f64 {
    // Orthonormal basis of u-perp from the columns of I - u u^T / |u|^2.
    let un2 = dot(u, u);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v: Vec<f64> = (0..n)
            .map(|i| (if i == k { 1.0 } else { 0.0 }) - u[i] * u[k] / un2)
            .collect();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let vn = norm2(&v);
        if vn > 1e-8 {
            v.iter_mut().for_each(|x| *x /= vn);
            basis.push(v);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    let m = basis.len();
    let h = DMatrix::from_row_slice(n, n, hess);
    let b = DMatrix::from_fn(n, m, |i, j| basis[j][i]);
    let t = b.transpose() * h * &b;
    let t = (&t + t.transpose()) * 0.5;
    SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let e = NormSpec::euclidean(3).unwrap();
        assert!((e.eval(&[3.0, 4.0, 0.0]).unwrap() - 5.0).abs() < 1e-15);
        let a = NormSpec::diagonal(&[1.0, 4.0, 9.0]).unwrap();
        assert!((a.eval(&[1.0, 1.0, 1.0]).unwrap() - 14f64.sqrt()).abs() < 1e-14);
        let l4 = NormSpec::lq(3, 4.0, 0.0).unwrap();
        assert!((l4.eval(&[1.0, 1.0, 1.0]).unwrap() - 3f64.powf(0.25)).abs() < 1e-14);
        assert!(matches!(
            e.eval(&[1.0, 2.0]),
            Err(FcapError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grad_examples() {
        let e = NormSpec::euclidean(3).unwrap();
        let g = e.grad(&[3.0, 4.0, 0.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15 && g[2] == 0.0);
        assert_eq!(e.grad(&[0.0, 0.0, 0.0]), Err(FcapError::ZeroVector));
        let a = NormSpec::diagonal(&[1.0, 4.0, 9.0]).unwrap();
        let xi = [1.0, -2.0, 0.5];
        let g = a.grad(&xi).unwrap();
        let h = (1.0 + 16.0 + 2.25f64).sqrt();
        let want = [1.0 / h, -8.0 / h, 4.5 / h];
        for k in 0..3 {
            assert!((g[k] - want[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn hess_p_quadratic_cases() {
        let e = NormSpec::euclidean(3).unwrap();
        let h = e.hess_p(2.0, &[0.3, -1.0, 2.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((h[i * 3 + j] - want).abs() < 1e-12);
            }
        }
        let m = vec![2.0, 0.5, 0.0, 0.5, 3.0, 0.1, 0.0, 0.1, 1.0];
        let a = NormSpec::ellipsoid(3, m.clone()).unwrap();
        let h = a.hess_p(2.0, &[0.7, 0.2, -0.4]).unwrap();
        for k in 0..9 {
            assert!((h[k] - 2.0 * m[k]).abs() < 1e-12);
        }
        assert!(matches!(
            e.hess_p(3.5, &[1.0, 0.0, 0.0]),
            Err(FcapError::ExponentOutOfRange { .. })
        ));
    }

    #[test]
    fn dual_examples() {
        let e = DualNorm::new(NormSpec::euclidean(3).unwrap());
        assert!((e.eval(&[3.0, 4.0, 0.0]).unwrap() - 5.0).abs() < 1e-15);
        let l4 = DualNorm::new(NormSpec::lq(3, 4.0, 0.0).unwrap());
        assert!((l4.eval(&[1.0, 1.0, 1.0]).unwrap() - 3f64.powf(0.75)).abs() < 1e-12);
        let a = DualNorm::new(NormSpec::diagonal(&[1.0, 4.0, 9.0]).unwrap());
        let want = (1.0 + 0.25 + 1.0 / 9.0f64).sqrt();
        assert!((a.eval(&[1.0, 1.0, 1.0]).unwrap() - want).abs() < 1e-14);
        let g = e.grad(&[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn raw_lq_dual_gradient_on_axis_is_an_error() {
        let l4 = DualNorm::new(NormSpec::lq(3, 4.0, 0.0).unwrap());
        assert_eq!(l4.grad(&[1.0, 0.0, 2.0]), Err(FcapError::NonSmoothPoint));
    }

    #[test]
    fn generic_matches_closed_form() {
        let norm = NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let closed = DualNorm::closed_form(norm.clone()).unwrap();
        let generic = DualNorm::generic(norm, 2048, 1e-10);
        for x in [[1.0, 0.3, -0.2], [0.0, 0.0, 1.0], [-2.0, 5.0, 0.1]] {
            let a = closed.eval(&x).unwrap();
            let b = generic.eval(&x).unwrap();
            assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn class_jp_examples() {
        let e = check_class_jp(&NormSpec::euclidean(3).unwrap(), 2.0, 64);
        assert!(e.pass);
        assert!((e.min_tangential_eigenvalue - 1.0).abs() < 1e-10);
        let a = check_class_jp(&NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap(), 2.0, 64);
        assert!(a.pass);
        let raw = check_class_jp(&NormSpec::lq(3, 4.0, 0.0).unwrap(), 2.0, 64);
        assert!(!raw.pass);
        assert!(raw.min_tangential_eigenvalue.abs() < 1e-12);
        let reg = check_class_jp(&NormSpec::lq(3, 4.0, 0.1).unwrap(), 2.0, 64);
        assert!(reg.pass, "{reg:?}");
    }

    #[test]
    fn parse_grammar() {
        assert_eq!(
            NormSpec::parse("euclidean", 3).unwrap(),
            NormSpec::euclidean(3).unwrap()
        );
        assert_eq!(
            NormSpec::parse("ellipsoid:1,0,0,2,0,4", 3).unwrap(),
            NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap()
        );
        assert_eq!(
            NormSpec::parse("lq:4:delta=0.1", 3).unwrap(),
            NormSpec::lq(3, 4.0, 0.1).unwrap()
        );
        match NormSpec::parse("lq:abc", 3) {
            Err(FcapError::Parse { token, .. }) => assert_eq!(token, "abc"),
            other => panic!("{other:?}"),
        }
        assert!(NormSpec::parse("ellipsoid:1,2", 3).is_err());
        assert!(NormSpec::parse("taxicab", 3).is_err());
    }
}
