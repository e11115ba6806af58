//! Convex bodies described by exact shapes or sampled support functions.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::directions::{sphere_area, sphere_directions};
use crate::error::{FcapError, Result};
use crate::norms::{parse_floats, upper_to_full, DualNorm, NormSpec};
use crate::vecops::{dot, norm2};

/// Default number of sampled directions for support functions and fits.
pub const DEFAULT_DIRECTIONS: usize = 2048;

/// Two bodies are declared homothetic when the fit residual is at most this.
pub const HOMOTHETY_THRESHOLD: f64 = 1e-2;

#[derive(Clone, Debug)]
pub enum BodyKind {
    /// `{x : H0(x - center) < radius}`.
    Wulff {
        dual: DualNorm,
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : (x - c)^T M (x - c) < 1}` with `M` row-major SPD.
    Ellipsoid {
        center: Vec<f64>,
        shape: Vec<f64>,
        shape_inv: Vec<f64>,
    },
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    /// Intersection of the half-spaces `<x, u_i> <= h_i`.
    SupportSamples {
        directions: Arc<Vec<Vec<f64>>>,
        values: Vec<f64>,
        anchor: Vec<f64>,
        boundary: Arc<OnceLock<Vec<Vec<f64>>>>,
    },
}

/// A bounded convex body in `R^dim`; immutable.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    pub kind: BodyKind,
    pub dim: usize,
}

/// Result of [`fit_homothety`]: `h_K(u) ~ ratio * h_D(u) + <translation, u>`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomothetyFit {
    pub ratio: f64,
    pub translation: Vec<f64>,
    pub residual: f64,
}

/// Result of [`fit_wulff`].
#[derive(Clone, Debug, PartialEq)]
pub struct WulffFit {
    pub center: Vec<f64>,
    pub radius: f64,
    /// `(max - min) / max` of `H0(x_i - center)` over boundary samples.
    pub spread: f64,
}

impl ConvexBody {
    pub fn wulff(dual: &DualNorm, center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = dual.dim();
        check_len(dim, &center)?;
        if !(radius > 0.0) {
            return Err(FcapError::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            kind: BodyKind::Wulff {
                dual: dual.clone(),
                center,
                radius,
            },
            dim,
        })
    }

    pub fn ellipsoid(center: Vec<f64>, shape: Vec<f64>) -> Result<Self> {
        let dim = center.len();
        if shape.len() != dim * dim {
            return Err(FcapError::DimensionMismatch {
                expected: dim * dim,
                got: shape.len(),
            });
        }
        let m = DMatrix::from_row_slice(dim, dim, &shape);
        if m.clone().cholesky().is_none() || (&m - m.transpose()).amax() > 1e-12 * m.amax() {
            return Err(FcapError::InvalidParameter(
                "ellipsoid shape must be SPD".into(),
            ));
        }
        let inv = m.try_inverse().expect("SPD matrix is invertible");
        let shape_inv = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| inv[(i, j)])
            .collect();
        Ok(Self {
            kind: BodyKind::Ellipsoid {
                center,
                shape,
                shape_inv,
            },
            dim,
        })
    }

    pub fn cuboid(center: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        let dim = center.len();
        check_len(dim, &half_widths)?;
        if half_widths.iter().any(|h| !(*h > 0.0)) {
            return Err(FcapError::InvalidParameter(
                "box half-widths must be positive".into(),
            ));
        }
        Ok(Self {
            kind: BodyKind::Box {
                center,
                half_widths,
            },
            dim,
        })
    }

    /// Body cut out by the half-spaces `<x, u_i> <= h_i`.
    pub fn from_support_samples(directions: Arc<Vec<Vec<f64>>>, values: Vec<f64>) -> Result<Self> {
        let dim = directions.first().map(|d| d.len()).ok_or_else(|| {
            FcapError::InvalidParameter("support samples need at least one direction".into())
        })?;
        if values.len() != directions.len() {
            return Err(FcapError::DimensionMismatch {
                expected: directions.len(),
                got: values.len(),
            });
        }
        let anchor = steiner_estimate(&directions, &values, dim);
        let anchor = if directions
            .iter()
            .zip(&values)
            .all(|(u, h)| h - dot(u, &anchor) > 0.0)
        {
            anchor
        } else {
            vec![0.0; dim]
        };
        Ok(Self {
            kind: BodyKind::SupportSamples {
                directions,
                values,
                anchor,
                boundary: Arc::new(OnceLock::new()),
            },
            dim,
        })
    }

    /// An interior reference point (the center for exact shapes).
    pub fn anchor(&self) -> Vec<f64> {
        match &self.kind {
            BodyKind::Wulff { center, .. }
            | BodyKind::Ellipsoid { center, .. }
            | BodyKind::Box { center, .. } => center.clone(),
            BodyKind::SupportSamples { anchor, .. } => anchor.clone(),
        }
    }

    /// Whether the exact shape satisfies the boundary-regularity hypotheses
    /// (boxes and sampled polytopes do not).
    pub fn is_smooth(&self) -> bool {
        matches!(
            self.kind,
            BodyKind::Wulff { .. } | BodyKind::Ellipsoid { .. }
        )
    }

    /// Support function `h(u) = sup_{x in body} <x, u>`.
    pub fn support(&self, u: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::Wulff {
                dual,
                center,
                radius,
            } => dot(center, u) + radius * dual.source().eval_unchecked(u),
            BodyKind::Ellipsoid {
                center, shape_inv, ..
            } => {
                let n = self.dim;
                let q: f64 = (0..n)
                    .map(|i| u[i] * dot(&shape_inv[i * n..(i + 1) * n], u))
                    .sum();
                dot(center, u) + q.max(0.0).sqrt()
            }
            BodyKind::Box {
                center,
                half_widths,
            } => {
                dot(center, u)
                    + half_widths
                        .iter()
                        .zip(u)
                        .map(|(h, v)| h * v.abs())
                        .sum::<f64>()
            }
            BodyKind::SupportSamples {
                directions, values, ..
            } => {
                if let Some(i) = directions
                    .iter()
                    .position(|d| d.iter().zip(u).all(|(a, b)| (a - b).abs() < 1e-12))
                {
                    return values[i];
                }
                self.sample_boundary_points()
                    .iter()
                    .map(|x| dot(x, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    fn sample_boundary_points(&self) -> &Vec<Vec<f64>> {
        match &self.kind {
            BodyKind::SupportSamples {
                directions,
                boundary,
                anchor,
                ..
            } => boundary.get_or_init(|| {
                directions
                    .iter()
                    .map(|u| {
                        let r = 1.0 / self.gauge_dir(u);
                        anchor.iter().zip(u).map(|(a, v)| a + r * v).collect()
                    })
                    .collect()
            }),
            _ => unreachable!("only sampled bodies cache boundary points"),
        }
    }

    /// Minkowski gauge about [`anchor`](Self::anchor): `< 1` inside, `1` on the boundary.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let a = self.anchor();
        let d: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
        self.gauge_dir(&d)
    }

    /// Gauge of the offset `d = x - anchor`.
    pub fn gauge_dir(&self, d: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::Wulff { dual, radius, .. } => dual.eval(d).unwrap_or(f64::INFINITY) / radius,
            BodyKind::Ellipsoid { shape, .. } => {
                let n = self.dim;
                (0..n)
                    .map(|i| d[i] * dot(&shape[i * n..(i + 1) * n], d))
                    .sum::<f64>()
                    .max(0.0)
                    .sqrt()
            }
            BodyKind::Box { half_widths, .. } => d
                .iter()
                .zip(half_widths)
                .map(|(v, h)| v.abs() / h)
                .fold(0.0, f64::max),
            BodyKind::SupportSamples {
                directions,
                values,
                anchor,
                ..
            } => directions
                .iter()
                .zip(values)
                .map(|(u, h)| dot(d, u) / (h - dot(anchor, u)))
                .fold(0.0, f64::max),
        }
    }

    /// Whether `x` lies in the closed body. Sampled bodies use the outer
    /// half-space approximation.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            BodyKind::SupportSamples {
                directions, values, ..
            } => directions
                .iter()
                .zip(values)
                .all(|(u, h)| dot(x, u) <= h + 1e-12 * h.abs().max(1.0)),
            _ => self.gauge(x) <= 1.0 + 1e-12,
        }
    }

    /// Gradient of the gauge at `x`, for outward normals. `None` at kinks.
    fn gauge_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let a = self.anchor();
        let d: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
        match &self.kind {
            BodyKind::Wulff { dual, radius, .. } => dual
                .grad(&d)
                .ok()
                .map(|g| g.into_iter().map(|v| v / radius).collect()),
            BodyKind::Ellipsoid { shape, .. } => {
                let n = self.dim;
                let g = self.gauge_dir(&d);
                Some(
                    (0..n)
                        .map(|i| dot(&shape[i * n..(i + 1) * n], &d) / g)
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Distance from `anchor` to the boundary along unit `u`, by bisection
    /// on [`contains`](Self::contains).
    pub fn ray_exit(&self, anchor: &[f64], u: &[f64]) -> f64 {
        let at = |s: f64| -> Vec<f64> { anchor.iter().zip(u).map(|(a, v)| a + s * v).collect() };
        let mut hi = 1.0;
        while self.contains(&at(hi)) {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.contains(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `count` boundary points found by bisection along quasi-uniform rays from `anchor`.
    pub fn boundary_sample(&self, count: usize, anchor: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len(self.dim, anchor)?;
        if !self.contains(anchor) {
            return Err(FcapError::AnchorNotInterior);
        }
        let dirs = sphere_directions(self.dim, count);
        let mut out = Vec::with_capacity(count);
        for u in &dirs {
            let s = self.ray_exit(anchor, u);
            if !(s > 1e-12) {
                return Err(FcapError::AnchorNotInterior);
            }
            out.push(anchor.iter().zip(u).map(|(a, v)| a + s * v).collect());
        }
        Ok(out)
    }

    /// Volume by radial quadrature `|K| = (1/N) int_S rho(u)^N du` about the anchor.
    pub fn volume(&self, direction_count: usize) -> f64 {
        let dirs = sphere_directions(self.dim, direction_count);
        let n = self.dim as i32;
        let mean: f64 =
            dirs.iter().map(|u| self.gauge_dir(u).powi(-n)).sum::<f64>() / dirs.len() as f64;
        mean * sphere_area(self.dim) / self.dim as f64
    }

    /// Largest `H0(x)` over the body, the circumradius about the origin in the dual norm.
    pub fn circumradius(&self, dual: &DualNorm) -> Result<f64> {
        let mut pts = self.boundary_sample(DEFAULT_DIRECTIONS, &self.anchor())?;
        if let BodyKind::Box {
            center,
            half_widths,
        } = &self.kind
        {
            for mask in 0..(1usize << self.dim) {
                pts.push(
                    (0..self.dim)
                        .map(|i| {
                            center[i]
                                + if mask >> i & 1 == 1 {
                                    half_widths[i]
                                } else {
                                    -half_widths[i]
                                }
                        })
                        .collect(),
                );
            }
        }
        let mut best: f64 = 0.0;
        for x in &pts {
            best = best.max(dual.eval(x)?);
        }
        Ok(best)
    }

    /// JSON description: kind plus parameters, parallel arrays for sampled bodies.
    pub fn to_json(&self) -> Value {
        match &self.kind {
            BodyKind::Wulff {
                dual,
                center,
                radius,
            } => json!({
                "kind": "wulff",
                "norm": serde_json::to_value(dual.source()).unwrap_or(Value::Null),
                "center": center,
                "radius": radius,
            }),
            BodyKind::Ellipsoid { center, shape, .. } => json!({
                "kind": "ellipsoid", "center": center, "shape": shape,
            }),
            BodyKind::Box {
                center,
                half_widths,
            } => json!({
                "kind": "box", "center": center, "half_widths": half_widths,
            }),
            BodyKind::SupportSamples {
                directions, values, ..
            } => json!({
                "kind": "support_samples", "directions": directions.as_ref(), "values": values,
            }),
        }
    }

    /// Parses `wulff:R`, `wulff:R@cx,cy,cz`, `ellipsoid:m11,m12,...[@c]`
    /// (row-major upper triangle of the shape matrix) or `box:hx,hy,hz[@c]`.
    pub fn parse(spec: &str, dual: &DualNorm) -> Result<Self> {
        let dim = dual.dim();
        let spec = spec.trim();
        let (head, center) = match spec.split_once('@') {
            Some((h, c)) => {
                let c = parse_floats(c)?;
                if c.len() != dim {
                    return Err(FcapError::Parse {
                        token: spec.to_string(),
                        reason: format!("center needs {dim} coordinates"),
                    });
                }
                (h, c)
            }
            None => (spec, vec![0.0; dim]),
        };
        let (kind, args) = head.split_once(':').ok_or_else(|| FcapError::Parse {
            token: head.to_string(),
            reason: "expected `kind:parameters`".into(),
        })?;
        let vals = parse_floats(args)?;
        let bad = |reason: String| FcapError::Parse {
            token: args.to_string(),
            reason,
        };
        match kind {
            "wulff" => {
                if vals.len() != 1 {
                    return Err(bad("wulff takes one radius".into()));
                }
                Self::wulff(dual, center, vals[0])
            }
            "ellipsoid" => {
                let need = dim * (dim + 1) / 2;
                if vals.len() != need {
                    return Err(bad(format!("expected {need} upper-triangle entries")));
                }
                Self::ellipsoid(center, upper_to_full(dim, &vals))
            }
            "box" => {
                if vals.len() != dim {
                    return Err(bad(format!("expected {dim} half-widths")));
                }
                Self::cuboid(center, vals)
            }
            other => Err(FcapError::Parse {
                token: other.to_string(),
                reason: "unknown body kind".into(),
            }),
        }
    }

    fn sampled_directions(&self) -> Option<&Arc<Vec<Vec<f64>>>> {
        match &self.kind {
            BodyKind::SupportSamples { directions, .. } => Some(directions),
            _ => None,
        }
    }

    /// Outward face normals of a box; empty for other kinds.
    fn face_normals(&self) -> Vec<Vec<f64>> {
        match &self.kind {
            BodyKind::Box { .. } => (0..2 * self.dim)
                .map(|k| {
                    let mut e = vec![0.0; self.dim];
                    e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                    e
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// The same body translated by `v`.
    pub fn translated(&self, v: &[f64]) -> Self {
        let shift = |c: &Vec<f64>| -> Vec<f64> { c.iter().zip(v).map(|(a, b)| a + b).collect() };
        let kind = match &self.kind {
            BodyKind::Wulff {
                dual,
                center,
                radius,
            } => BodyKind::Wulff {
                dual: dual.clone(),
                center: shift(center),
                radius: *radius,
            },
            BodyKind::Ellipsoid {
                center,
                shape,
                shape_inv,
            } => BodyKind::Ellipsoid {
                center: shift(center),
                shape: shape.clone(),
                shape_inv: shape_inv.clone(),
            },
            BodyKind::Box {
                center,
                half_widths,
            } => BodyKind::Box {
                center: shift(center),
                half_widths: half_widths.clone(),
            },
            BodyKind::SupportSamples {
                directions,
                values,
                anchor,
                ..
            } => BodyKind::SupportSamples {
                directions: directions.clone(),
                values: directions
                    .iter()
                    .zip(values)
                    .map(|(u, h)| h + dot(u, v))
                    .collect(),
                anchor: shift(anchor),
                boundary: Arc::new(OnceLock::new()),
            },
        };
        Self {
            kind,
            dim: self.dim,
        }
    }
}

fn check_len(dim: usize, v: &[f64]) -> Result<()> {
    if v.len() != dim {
        return Err(FcapError::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    Ok(())
}

/// `N * mean(h(u) u)`, the Steiner point for quasi-uniform directions.
fn steiner_estimate(dirs: &[Vec<f64>], values: &[f64], dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    for (u, h) in dirs.iter().zip(values) {
        for k in 0..dim {
            s[k] += h * u[k];
        }
    }
    s.iter()
        .map(|v| v * dim as f64 / dirs.len() as f64)
        .collect()
}

/// Direction set shared by a pair of bodies: sampled sets are merged,
/// otherwise the default quasi-uniform set. Face normals of boxes are
/// always included so flat faces stay flat.
fn common_directions(k: &ConvexBody, d: &ConvexBody) -> Arc<Vec<Vec<f64>>> {
    let base = match (k.sampled_directions(), d.sampled_directions()) {
        (Some(a), Some(b)) if Arc::ptr_eq(a, b) || a == b => a.clone(),
        (Some(a), Some(b)) => {
            let mut all = a.as_ref().clone();
            for u in b.iter() {
                if !all.contains(u) {
                    all.push(u.clone());
                }
            }
            Arc::new(all)
        }
        (Some(a), None) | (None, Some(a)) => a.clone(),
        (None, None) => Arc::new(sphere_directions(k.dim, DEFAULT_DIRECTIONS)),
    };
    let normals: Vec<Vec<f64>> = [k, d]
        .iter()
        .flat_map(|b| b.face_normals())
        .filter(|u| !base.contains(u))
        .collect();
    if normals.is_empty() {
        return base;
    }
    let mut all = base.as_ref().clone();
    for u in normals {
        if !all.contains(&u) {
            all.push(u);
        }
    }
    Arc::new(all)
}

/// `(1 - lambda) K + lambda D` as support samples.
pub fn minkowski_combine(lambda: f64, k: &ConvexBody, d: &ConvexBody) -> Result<ConvexBody> {
    if k.dim != d.dim {
        return Err(FcapError::DimensionMismatch {
            expected: k.dim,
            got: d.dim,
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FcapError::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let dirs = common_directions(k, d);
    let values = dirs
        .iter()
        .map(|u| (1.0 - lambda) * k.support(u) + lambda * d.support(u))
        .collect();
    let mut body = ConvexBody::from_support_samples(dirs, values)?;
    if let BodyKind::SupportSamples { anchor, .. } = &mut body.kind {
        *anchor = k
            .anchor()
            .iter()
            .zip(d.anchor())
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
    }
    Ok(body)
}

/// Finsler perimeter `int_{boundary} H(nu) dsigma`.
///
/// Boxes use the face formula; smooth bodies use `int_S rho^N H(grad g) du`
/// over the sphere, with `g` the gauge and `rho = 1/g`; sampled bodies use the
/// first variation of volume, `d/dt |K + t B_{H0}|`.
pub fn finsler_perimeter(body: &ConvexBody, norm: &NormSpec) -> Result<f64> {
    if norm.dim != body.dim {
        return Err(FcapError::DimensionMismatch {
            expected: body.dim,
            got: norm.dim,
        });
    }
    let n = body.dim;
    let value = match &body.kind {
        BodyKind::Box { half_widths, .. } => {
            let full: f64 = half_widths.iter().map(|h| 2.0 * h).product();
            (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    2.0 * norm.eval_unchecked(&e) * full / (2.0 * half_widths[i])
                })
                .sum()
        }
        BodyKind::Wulff { .. } | BodyKind::Ellipsoid { .. } => {
            let dirs = sphere_directions(n, 16 * DEFAULT_DIRECTIONS);
            let a = body.anchor();
            let mut acc = 0.0;
            for u in &dirs {
                let rho = 1.0 / body.gauge_dir(u);
                let x: Vec<f64> = a.iter().zip(u).map(|(a, v)| a + rho * v).collect();
                let g = body
                    .gauge_gradient(&x)
                    .ok_or_else(|| FcapError::Quadrature("no normal".into()))?;
                acc += rho.powi(n as i32) * norm.eval_unchecked(&g);
            }
            acc / dirs.len() as f64 * sphere_area(n)
        }
        BodyKind::SupportSamples {
            directions, values, ..
        } => {
            let vol = |t: f64| -> Result<f64> {
                let v: Vec<f64> = directions
                    .iter()
                    .zip(values)
                    .map(|(u, h)| h + t * norm.eval_unchecked(u))
                    .collect();
                Ok(ConvexBody::from_support_samples(directions.clone(), v)?
                    .volume(16 * DEFAULT_DIRECTIONS))
            };
            let scale = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
            let t = 1e-3 * scale;
            let v0 = vol(0.0)?;
            let d1 = (vol(t)? - v0) / t;
            let d2 = (vol(0.5 * t)? - v0) / (0.5 * t);
            2.0 * d2 - d1
        }
    };
    if !value.is_finite() || value <= 0.0 {
        return Err(FcapError::Quadrature(format!(
            "perimeter evaluated to {value}"
        )));
    }
    Ok(value)
}

/// Minimizes the relative spread of `H0(x_i - c)` over boundary samples.
///
/// Derivative-free coordinate descent on the centre, started from the Steiner
/// point. Returns `Ok(None)` when the best spread exceeds `tol`.
pub fn fit_wulff(body: &ConvexBody, dual: &DualNorm, tol: f64) -> Result<Option<WulffFit>> {
    let n = body.dim;
    let pts = body.boundary_sample(1024, &body.anchor())?;
    let dirs = sphere_directions(n, DEFAULT_DIRECTIONS);
    let values: Vec<f64> = dirs.iter().map(|u| body.support(u)).collect();
    let mut c = steiner_estimate(&dirs, &values, n);
    let radii = |c: &[f64]| -> Result<Vec<f64>> {
        pts.iter()
            .map(|x| dual.eval(&x.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .collect()
    };
    let objective = |c: &[f64]| -> Result<f64> {
        let r = radii(c)?;
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / r.len() as f64;
        Ok(var / (m * m))
    };
    let scale = pts
        .iter()
        .map(|x| norm2(&x.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let mut step = 0.1 * scale;
    let mut best = objective(&c)?;
    let mut evals = 0usize;
    while step > 1e-11 * scale {
        let mut improved = false;
        for k in 0..n {
            for sgn in [1.0, -1.0] {
                let mut trial = c.clone();
                trial[k] += sgn * step;
                let f = objective(&trial)?;
                evals += 1;
                if f < best {
                    best = f;
                    c = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
        if evals > 20_000 {
            return Err(FcapError::NonConvergence("fit_wulff centre search".into()));
        }
    }
    let r = radii(&c)?;
    let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let spread = (max - min) / max;
    Ok((spread <= tol).then_some(WulffFit {
        center: c,
        radius: mean,
        spread,
    }))
}

/// Least-squares fit of `h_K(u) ~ rho h_D(u) + <xi, u>` over sampled directions.
///
/// The residual is the sup deviation divided by the sup of `h_K` after
/// removing its best affine-in-`u` part, so it is translation invariant.
pub fn fit_homothety(k: &ConvexBody, d: &ConvexBody) -> Result<HomothetyFit> {
    if k.dim != d.dim {
        return Err(FcapError::DimensionMismatch {
            expected: k.dim,
            got: d.dim,
        });
    }
    let n = k.dim;
    let dirs = common_directions(k, d);
    let hk: Vec<f64> = dirs.iter().map(|u| k.support(u)).collect();
    let hd: Vec<f64> = dirs.iter().map(|u| d.support(u)).collect();
    let m = dirs.len();
    let a = DMatrix::from_fn(m, n + 1, |i, j| if j == 0 { hd[i] } else { dirs[i][j - 1] });
    let b = DVector::from_column_slice(&hk);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| FcapError::NonConvergence(e.into()))?;
    let ratio = sol[0];
    let translation: Vec<f64> = (0..n).map(|j| sol[j + 1]).collect();
    let dev = (0..m)
        .map(|i| (hk[i] - ratio * hd[i] - dot(&translation, &dirs[i])).abs())
        .fold(0.0, f64::max);
    // Scale: h_K minus its least-squares fit by a constant plus a linear function.
    let a0 = DMatrix::from_fn(m, n + 1, |i, j| if j == 0 { 1.0 } else { dirs[i][j - 1] });
    let s0 = a0
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| FcapError::NonConvergence(e.into()))?;
    let scale = (0..m)
        .map(|i| hk[i] - (0..n).map(|j| s0[j + 1] * dirs[i][j]).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(HomothetyFit {
        ratio,
        translation,
        residual: dev / scale.max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e3() -> DualNorm {
        DualNorm::new(NormSpec::euclidean(3).unwrap())
    }

    #[test]
    fn support_examples() {
        let ball = ConvexBody::wulff(&e3(), vec![0.0; 3], 1.0).unwrap();
        assert!((ball.support(&[0.6, 0.8, 0.0]) - 1.0).abs() < 1e-15);
        let norm = NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let w = ConvexBody::wulff(&DualNorm::new(norm.clone()), vec![0.0; 3], 2.5).unwrap();
        let u = [0.0, 0.6, 0.8];
        assert!((w.support(&u) - 2.5 * norm.eval(&u).unwrap()).abs() < 1e-14);
        let b = ConvexBody::cuboid(vec![0.0; 3], vec![1.0, 1.0, 3.0]).unwrap();
        assert_eq!(b.support(&[0.0, 0.0, 1.0]), 3.0);
    }

    #[test]
    fn contains_examples() {
        let ball = ConvexBody::wulff(&e3(), vec![0.0; 3], 1.0).unwrap();
        assert!(ball.contains(&[0.5, 0.0, 0.0]));
        assert!(!ball.contains(&[1.5, 0.0, 0.0]));
        let cube = ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(cube.contains(&[0.99, -0.99, 0.0]));
    }

    #[test]
    fn boundary_sample_on_sphere() {
        let ball = ConvexBody::wulff(&e3(), vec![0.0; 3], 2.0).unwrap();
        let pts = ball.boundary_sample(200, &[0.0; 3]).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert!((norm2(p) - 2.0).abs() < 1e-10);
        }
        assert_eq!(
            ball.boundary_sample(10, &[3.0, 0.0, 0.0]),
            Err(FcapError::AnchorNotInterior)
        );
    }

    #[test]
    fn boundary_sample_on_ellipsoid() {
        let shape = vec![1.0, 0.2, 0.0, 0.2, 0.5, 0.0, 0.0, 0.0, 2.0];
        let e = ConvexBody::ellipsoid(vec![0.1, -0.2, 0.3], shape.clone()).unwrap();
        for p in e.boundary_sample(100, &[0.1, -0.2, 0.3]).unwrap() {
            let d = [p[0] - 0.1, p[1] + 0.2, p[2] - 0.3];
            let q: f64 = (0..3)
                .map(|i| d[i] * (0..3).map(|j| shape[i * 3 + j] * d[j]).sum::<f64>())
                .sum();
            assert!((q - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn perimeters() {
        let norm = NormSpec::euclidean(3).unwrap();
        let ball = ConvexBody::wulff(&e3(), vec![0.0; 3], 1.0).unwrap();
        let p = finsler_perimeter(&ball, &norm).unwrap();
        assert!((p / (4.0 * std::f64::consts::PI) - 1.0).abs() < 5e-3);
        let cube = ConvexBody::cuboid(vec![0.0; 3], vec![0.5; 3]).unwrap();
        assert!((finsler_perimeter(&cube, &norm).unwrap() - 6.0).abs() < 3e-2);
    }

    #[test]
    fn minkowski_of_concentric_wulff_shapes() {
        let a = ConvexBody::wulff(&e3(), vec![0.0; 3], 1.0).unwrap();
        let b = ConvexBody::wulff(&e3(), vec![0.0; 3], 3.0).unwrap();
        let m = minkowski_combine(0.25, &a, &b).unwrap();
        let dirs = sphere_directions(3, DEFAULT_DIRECTIONS);
        for u in dirs.iter().step_by(37) {
            assert!((m.support(u) - 1.5).abs() < 1e-12);
        }
        // Off the sampled set the hull of boundary points is a close inner approximation.
        for u in sphere_directions(3, 50) {
            let h = m.support(&u);
            assert!(h <= 1.5 + 1e-12 && h > 1.5 * (1.0 - 5e-3), "{h}");
        }
        let m0 = minkowski_combine(0.0, &a, &b).unwrap();
        for u in dirs.iter().step_by(41) {
            assert!((m0.support(u) - a.support(u)).abs() < 1e-15);
        }
    }

    #[test]
    fn wulff_fit_round_trip() {
        let dual = DualNorm::new(NormSpec::diagonal(&[1.0, 2.0, 4.0]).unwrap());
        let body = ConvexBody::wulff(&dual, vec![0.3, -0.2, 0.1], 1.7).unwrap();
        let fit = fit_wulff(&body, &dual, 1e-6).unwrap().expect("is Wulff");
        for k in 0..3 {
            assert!((fit.center[k] - [0.3, -0.2, 0.1][k]).abs() < 1e-6);
        }
        assert!((fit.radius - 1.7).abs() < 1e-8);
        let cube = ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(fit_wulff(&cube, &e3(), 1e-3).unwrap().is_none());
    }

    #[test]
    fn homothety_examples() {
        let d = ConvexBody::ellipsoid(
            vec![0.0; 3],
            vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
        )
        .unwrap();
        let dirs = Arc::new(sphere_directions(3, 512));
        let v = [0.5, -1.0, 0.25];
        let vals: Vec<f64> = dirs
            .iter()
            .map(|u| 2.0 * d.support(u) + dot(&v, u))
            .collect();
        let k = ConvexBody::from_support_samples(dirs, vals).unwrap();
        let fit = fit_homothety(&k, &d).unwrap();
        assert!((fit.ratio - 2.0).abs() < 1e-10);
        for j in 0..3 {
            assert!((fit.translation[j] - v[j]).abs() < 1e-10);
        }
        assert!(fit.residual <= 1e-10);
        let same = fit_homothety(&d, &d).unwrap();
        assert!((same.ratio - 1.0).abs() < 1e-12 && norm2(&same.translation) < 1e-12);
        let cube = ConvexBody::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let ball = ConvexBody::wulff(&e3(), vec![0.0; 3], 1.0).unwrap();
        assert!(fit_homothety(&cube, &ball).unwrap().residual >= 0.05);
    }

    #[test]
    fn parse_bodies() {
        let d = e3();
        let b = ConvexBody::parse("wulff:0.5@1,2,3", &d).unwrap();
        assert_eq!(b.anchor(), vec![1.0, 2.0, 3.0]);
        assert!(ConvexBody::parse("box:1,1,3", &d).is_ok());
        assert!(ConvexBody::parse("ellipsoid:1,0,0,1,0,1", &d).is_ok());
        assert!(ConvexBody::parse("blob:1", &d).is_err());
        assert!(ConvexBody::parse("wulff:x", &d).is_err());
    }
}
