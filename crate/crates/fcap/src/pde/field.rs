//! Solved fields: interpolation, gradients, level sets and export.

use std::io::Write;
use std::sync::Arc;

use serde_json::{json, Value};

use super::grid::{Grid, NodeClass};
use crate::bodies::ConvexBody;
use crate::directions::sphere_directions;
use crate::error::{FcapError, Result};
use crate::norms::NormSpec;

/// Node values on a grid. Fixed nodes carry their boundary data, so the
/// field extends continuously by 1 inside the body.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

/// Gradients at the free nodes, in unknown order.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub points: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<f64>>,
    /// `H(Du)` at each point.
    pub norms: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(FcapError::DimensionMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.grid.gather(&self.values)
    }

    /// `(min, max)` over free nodes.
    pub fn free_range(&self) -> (f64, f64) {
        self.grid
            .unknown_nodes
            .iter()
            .map(|&i| self.values[i as usize])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Multilinear interpolation; `None` outside the grid box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &*self.grid;
        let n = g.dim;
        let mut base = 0usize;
        let mut t = [0.0; super::grid::MAX_DIM];
        for d in 0..n {
            let s = (x[d] - g.lower[d]) / g.spacing;
            if !(s >= 0.0) || s > (g.shape[d] - 1) as f64 {
                return None;
            }
            let i = (s.floor() as usize).min(g.shape[d] - 2);
            t[d] = s - i as f64;
            base += i * g.strides[d];
        }
        let mut v = 0.0;
        for m in 0..1usize << n {
            let mut w = 1.0;
            let mut idx = base;
            for d in 0..n {
                if m >> d & 1 == 1 {
                    w *= t[d];
                    idx += g.strides[d];
                } else {
                    w *= 1.0 - t[d];
                }
            }
            if w != 0.0 {
                v += w * self.values[idx];
            }
        }
        Some(v)
    }

    /// Central differences of the interpolant with step `h`.
    pub fn gradient_at(&self, x: &[f64]) -> Option<Vec<f64>> {
        let h = self.grid.spacing;
        let mut y = x.to_vec();
        let mut out = Vec::with_capacity(x.len());
        for d in 0..x.len() {
            y[d] = x[d] + h;
            let up = self.interpolate(&y)?;
            y[d] = x[d] - h;
            let dn = self.interpolate(&y)?;
            y[d] = x[d];
            out.push((up - dn) / (2.0 * h));
        }
        Some(out)
    }

    /// Second-order differences at every free node, using the boundary
    /// crossing as the stencil point on cut edges.
    pub fn gradient_field(&self, norm: &NormSpec) -> GradientField {
        let g = &*self.grid;
        let n = g.dim;
        let h = g.spacing;
        let mut points = Vec::with_capacity(g.unknown_count());
        let mut gradients = Vec::with_capacity(g.unknown_count());
        let mut norms = Vec::with_capacity(g.unknown_count());
        for &node in &g.unknown_nodes {
            let i = node as usize;
            let mut grad = vec![0.0; n];
            for (d, gd) in grad.iter_mut().enumerate() {
                let s = g.strides[d];
                let (hp, up) = if g.class[i + s] == NodeClass::Free {
                    (h, self.values[i + s])
                } else {
                    (g.cut_theta[i * n + d] * h, g.cut_value[i * n + d])
                };
                let (hm, um) = if g.class[i - s] == NodeClass::Free {
                    (h, self.values[i - s])
                } else {
                    let k = (i - s) * n + d;
                    (g.cut_theta[k] * h, g.cut_value[k])
                };
                let u0 = self.values[i];
                *gd = -hp / (hm * (hm + hp)) * um
                    + (hp - hm) / (hm * hp) * u0
                    + hm / (hp * (hm + hp)) * up;
            }
            norms.push(norm.eval_unchecked(&grad));
            points.push(g.node_coords(i));
            gradients.push(grad);
        }
        GradientField {
            points,
            gradients,
            norms,
        }
    }

    /// Boundary of the superlevel set `{u >= t}` along `direction_count`
    /// rays from the body anchor, returned as support samples.
    pub fn extract_level_set(&self, t: f64, direction_count: usize) -> Result<ConvexBody> {
        let (_, dirs, values) = self.level_set_points(t, direction_count)?;
        ConvexBody::from_support_samples(Arc::new(dirs), values)
    }

    /// Boundary points of `{u >= t}`, the ray directions, and the support
    /// values of their convex hull in those directions.
    pub fn level_set_points(
        &self,
        t: f64,
        direction_count: usize,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let g = &*self.grid;
        let outer = g.outer_data.value(g.outer_radius);
        if !(t > outer && t < 1.0) {
            return Err(FcapError::InvalidParameter(format!(
                "level {t} must lie strictly between {outer} and 1"
            )));
        }
        let anchor = &g.anchor;
        let dirs = sphere_directions(g.dim, direction_count);
        let step = 0.5 * g.spacing;
        let mut points = Vec::with_capacity(dirs.len());
        for (k, u) in dirs.iter().enumerate() {
            let at =
                |s: f64| -> Vec<f64> { anchor.iter().zip(u).map(|(a, v)| a + s * v).collect() };
            let mut lo = 0.0;
            let mut hi = None;
            let mut s = step;
            while let Some(v) = self.interpolate(&at(s)) {
                if v < t {
                    hi = Some(s);
                    break;
                }
                lo = s;
                s += step;
            }
            let mut hi = hi.ok_or(FcapError::LevelNotBracketed { level: t, ray: k })?;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if self.interpolate(&at(mid)).unwrap_or(f64::NEG_INFINITY) >= t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            points.push(at(0.5 * (lo + hi)));
        }
        let values = dirs
            .iter()
            .map(|u| {
                points
                    .iter()
                    .map(|x| crate::vecops::dot(x, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok((points, dirs, values))
    }

    /// Grid metadata for the field export header.
    pub fn metadata(&self) -> Value {
        let g = &*self.grid;
        json!({
            "dim": g.dim,
            "shape": g.shape,
            "lower": g.lower,
            "spacing": g.spacing,
            "outer_radius": g.outer_radius,
            "unknowns": g.unknown_count(),
        })
    }

    /// Writes `x,y,z,u` rows for every node that is free or touches a free node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &*self.grid;
        let names: Vec<String> = if g.dim == 3 {
            vec!["x".into(), "y".into(), "z".into()]
        } else {
            (0..g.dim).map(|d| format!("x{d}")).collect()
        };
        writeln!(w, "{},u", names.join(","))?;
        for i in 0..g.node_count() {
            if g.mask(i) == super::grid::Mask::Outside {
                continue;
            }
            let x = g.node_coords(i);
            let row: Vec<String> = x
                .iter()
                .chain(std::iter::once(&self.values[i]))
                .map(|v| format!("{v:.12e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
