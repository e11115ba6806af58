//! Uniform tensor grids over a truncated exterior domain.
//!
//! Nodes sit on the lattice `h Z^N` (the origin is always a node), so grids
//! built with the same spacing for different truncation radii share nodes near
//! the body. Each node is inside the body (value 1), outside the outer Wulff
//! shape `H0 >= R` (boundary data), or free. Edges joining a free node to a
//! fixed one store where the boundary crosses them, which the energy uses to
//! place the Dirichlet data on the true boundary rather than on the lattice.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::bodies::ConvexBody;
use crate::error::{FcapError, Result};
use crate::norms::DualNorm;

/// Largest grid dimension supported by the stack-allocated kernels.
pub const MAX_DIM: usize = 6;

/// Cut fractions are clamped below to keep the stiffness bounded.
pub const THETA_MIN: f64 = 1e-2;

/// Target number of active cells per reduction chunk.
const CHUNK_CELLS: usize = 4096;

/// Sub-samples per axis per corner piece when measuring cut volume fractions.
const FRACTION_SAMPLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Inner,
    Free,
    Outer,
}

/// Public view of a node's role.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mask {
    InteriorUnknown,
    Dirichlet(f64),
    Outside,
}

/// Outer boundary data on `H0 = R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OuterData {
    /// `c H0^(1/q)`.
    Radial {
        coefficient: f64,
        exponent: f64,
    },
    Zero,
}

impl OuterData {
    #[inline]
    pub fn value(&self, h0: f64) -> f64 {
        match *self {
            OuterData::Radial {
                coefficient,
                exponent,
            } => coefficient * h0.powf(exponent),
            OuterData::Zero => 0.0,
        }
    }
}

/// A contiguous block of active cells and the unknown-index range it touches.
#[derive(Clone, Debug)]
pub(crate) struct Chunk {
    pub cells: std::ops::Range<usize>,
    pub ulo: usize,
    pub uhi: usize,
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
    pub lower: Vec<f64>,
    pub spacing: f64,
    pub outer_radius: f64,
    pub outer_data: OuterData,
    /// Interior point of the body, used as the origin of rays.
    pub anchor: Vec<f64>,
    /// Typical gradient size `1 / r`, used to scale the regularization.
    pub gradient_scale: f64,
    pub(crate) class: Vec<NodeClass>,
    /// Node values for fixed nodes (ignored for free nodes).
    pub(crate) fixed_value: Vec<f64>,
    pub(crate) h0: Vec<f64>,
    pub(crate) unknown_index: Vec<u32>,
    pub(crate) unknown_nodes: Vec<u32>,
    /// Per edge `(node, node + e_d)`: fraction of the edge from its free end
    /// to the boundary crossing (1 when uncut).
    pub(crate) cut_theta: Vec<f64>,
    /// Boundary value at the crossing.
    pub(crate) cut_value: Vec<f64>,
    pub(crate) cells: Vec<u32>,
    /// Offset into `piece_fraction` per active cell, `u32::MAX` for cells with only free corners.
    pub(crate) fraction_offset: Vec<u32>,
    /// Fraction of each corner piece of a cut cell lying in the domain.
    pub(crate) piece_fraction: Vec<f64>,
    pub(crate) chunks: Vec<Chunk>,
}

/// Spacing giving `resolution` nodes across a cube with the volume of the
/// bounding box of `B_{H0}(radius)`.
pub fn spacing_for(dual: &DualNorm, radius: f64, resolution: usize) -> f64 {
    let n = dual.dim();
    let mean_extent = (0..n)
        .map(|d| {
            let mut e = vec![0.0; n];
            e[d] = 1.0;
            dual.source().eval_unchecked(&e).ln()
        })
        .sum::<f64>()
        / n as f64;
    2.0 * radius * mean_extent.exp() / (resolution as f64 - 1.0)
}

impl Grid {
    /// Grid with `resolution` nodes across the (volume-equivalent) box around `B_{H0}(outer_radius)`.
    pub fn build(
        body: &ConvexBody,
        dual: &DualNorm,
        outer_radius: f64,
        resolution: usize,
        outer_data: OuterData,
    ) -> Result<Self> {
        let h = spacing_for(dual, outer_radius, resolution);
        Self::build_with_spacing(body, dual, outer_radius, h, outer_data)
    }

    pub fn build_with_spacing(
        body: &ConvexBody,
        dual: &DualNorm,
        outer_radius: f64,
        spacing: f64,
        outer_data: OuterData,
    ) -> Result<Self> {
        let n = dual.dim();
        if body.dim != n {
            return Err(FcapError::DimensionMismatch {
                expected: n,
                got: body.dim,
            });
        }
        if n > MAX_DIM {
            return Err(FcapError::InvalidParameter(format!(
                "grids support N <= {MAX_DIM}"
            )));
        }
        if !(spacing > 0.0) {
            return Err(FcapError::InvalidParameter(
                "grid spacing must be positive".into(),
            ));
        }
        let circum = body.circumradius(dual)?;
        if circum >= outer_radius {
            return Err(FcapError::BodyNotInside {
                radius: outer_radius,
            });
        }
        let mut shape = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for d in 0..n {
            let mut e = vec![0.0; n];
            e[d] = 1.0;
            let extent = outer_radius * dual.source().eval_unchecked(&e);
            let half = (extent / spacing).ceil() as usize + 2;
            shape.push(2 * half + 1);
            lower.push(-(half as f64) * spacing);
        }
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        let total: usize = shape.iter().product();
        if total >= u32::MAX as usize {
            return Err(FcapError::InvalidParameter("grid too large".into()));
        }

        let coords = |idx: usize| -> Vec<f64> {
            (0..n)
                .map(|d| lower[d] + ((idx / strides[d]) % shape[d]) as f64 * spacing)
                .collect()
        };

        let classified: Vec<(NodeClass, f64)> = (0..total)
            .into_par_iter()
            .map(|i| {
                let x = coords(i);
                let h0 = dual.eval(&x).unwrap_or(f64::INFINITY);
                if h0 >= outer_radius {
                    (NodeClass::Outer, h0)
                } else if body.contains(&x) {
                    (NodeClass::Inner, h0)
                } else {
                    (NodeClass::Free, h0)
                }
            })
            .collect();
        let class: Vec<NodeClass> = classified.iter().map(|c| c.0).collect();
        let h0: Vec<f64> = classified.iter().map(|c| c.1).collect();
        if !class.contains(&NodeClass::Inner) {
            return Err(FcapError::InvalidParameter(
                "no grid node lies inside the body; increase the resolution".into(),
            ));
        }
        let fixed_value: Vec<f64> = class
            .iter()
            .zip(&h0)
            .map(|(c, h)| match c {
                NodeClass::Inner => 1.0,
                NodeClass::Outer => outer_data.value(*h),
                NodeClass::Free => 0.0,
            })
            .collect();

        let mut unknown_index = vec![u32::MAX; total];
        let mut unknown_nodes = Vec::new();
        for (i, c) in class.iter().enumerate() {
            if *c == NodeClass::Free {
                unknown_index[i] = unknown_nodes.len() as u32;
                unknown_nodes.push(i as u32);
            }
        }

        // Cut edges.
        let cuts: Vec<(f64, f64)> = (0..total * n)
            .into_par_iter()
            .map(|k| {
                let (i, d) = (k / n, k % n);
                if (i / strides[d]) % shape[d] + 1 >= shape[d] {
                    return (1.0, 0.0);
                }
                let j = i + strides[d];
                let (ci, cj) = (class[i], class[j]);
                let (free, fixed, fixed_class) = match (ci, cj) {
                    (NodeClass::Free, c) if c != NodeClass::Free => (i, j, c),
                    (c, NodeClass::Free) if c != NodeClass::Free => (j, i, c),
                    _ => return (1.0, 0.0),
                };
                let xf = coords(free);
                let xx = coords(fixed);
                let at = |t: f64| -> Vec<f64> {
                    xf.iter().zip(&xx).map(|(a, b)| a + t * (b - a)).collect()
                };
                let inside_domain = |t: f64| -> bool {
                    let x = at(t);
                    match fixed_class {
                        NodeClass::Inner => !body.contains(&x),
                        _ => dual.eval(&x).map(|v| v < outer_radius).unwrap_or(false),
                    }
                };
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..48 {
                    let mid = 0.5 * (lo + hi);
                    if inside_domain(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let theta = (0.5 * (lo + hi)).max(THETA_MIN);
                let value = match fixed_class {
                    NodeClass::Inner => 1.0,
                    _ => outer_data.value(outer_radius),
                };
                (theta, value)
            })
            .collect();
        let cut_theta = cuts.iter().map(|c| c.0).collect();
        let cut_value = cuts.iter().map(|c| c.1).collect();

        // Active cells: at least one free corner.
        let corner_offsets: Vec<usize> = (0..1usize << n)
            .map(|m| (0..n).filter(|d| m >> d & 1 == 1).map(|d| strides[d]).sum())
            .collect();
        let cells: Vec<u32> = (0..total)
            .into_par_iter()
            .filter(|&i| {
                (0..n).all(|d| (i / strides[d]) % shape[d] + 1 < shape[d])
                    && corner_offsets
                        .iter()
                        .any(|o| class[i + o] == NodeClass::Free)
            })
            .map(|i| i as u32)
            .collect();

        let pieces = 1usize << n;
        let cut_fractions: Vec<Option<Vec<f64>>> = cells
            .par_iter()
            .map(|&cell| {
                let base = cell as usize;
                if corner_offsets
                    .iter()
                    .all(|o| class[base + o] == NodeClass::Free)
                {
                    return None;
                }
                let x0 = coords(base);
                let corner_h0: Vec<f64> = corner_offsets.iter().map(|o| h0[base + o]).collect();
                let k = FRACTION_SAMPLES;
                let per_piece = k.pow(n as u32);
                let mut fr = Vec::with_capacity(pieces);
                let mut x = vec![0.0; n];
                for m in 0..pieces {
                    let mut inside = 0usize;
                    for s in 0..per_piece {
                        let mut t = [0.0; MAX_DIM];
                        let mut rem = s;
                        for d in 0..n {
                            let j = rem % k;
                            rem /= k;
                            let half = (m >> d & 1) as f64;
                            t[d] = 0.5 * (half + (j as f64 + 0.5) / k as f64);
                            x[d] = x0[d] + t[d] * spacing;
                        }
                        // Multilinear interpolation of H0 from the cell corners.
                        let mut hv = 0.0;
                        for (c, hc) in corner_h0.iter().enumerate() {
                            let mut w = 1.0;
                            for d in 0..n {
                                w *= if c >> d & 1 == 1 { t[d] } else { 1.0 - t[d] };
                            }
                            hv += w * hc;
                        }
                        if hv < outer_radius && !body.contains(&x) {
                            inside += 1;
                        }
                    }
                    fr.push(inside as f64 / per_piece as f64);
                }
                Some(fr)
            })
            .collect();
        let mut fraction_offset = Vec::with_capacity(cells.len());
        let mut piece_fraction = Vec::new();
        for f in cut_fractions {
            match f {
                Some(v) => {
                    fraction_offset.push(piece_fraction.len() as u32);
                    piece_fraction.extend(v);
                }
                None => fraction_offset.push(u32::MAX),
            }
        }

        let far = strides[0].max(1);
        let chunks = cells
            .chunks(CHUNK_CELLS)
            .enumerate()
            .map(|(k, block)| {
                let start = k * CHUNK_CELLS;
                let first = block[0] as usize;
                let last =
                    *block.last().unwrap() as usize + corner_offsets.last().copied().unwrap_or(0);
                // Unknown indices are increasing in node order.
                let ulo =
                    first_unknown_at_or_after(&unknown_index, first.saturating_sub(far), last);
                let uhi = last_unknown_at_or_before(&unknown_index, first, last);
                Chunk {
                    cells: start..start + block.len(),
                    ulo,
                    uhi: uhi.max(ulo),
                }
            })
            .collect();

        let anchor = body.anchor();
        Ok(Self {
            dim: n,
            shape,
            strides,
            lower,
            spacing,
            outer_radius,
            outer_data,
            anchor,
            gradient_scale: 1.0 / circum.max(1e-300),
            class,
            fixed_value,
            h0,
            unknown_index,
            unknown_nodes,
            cut_theta,
            cut_value,
            cells,
            fraction_offset,
            piece_fraction,
            chunks,
        })
    }

    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.unknown_nodes.len()
    }

    pub fn active_cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                self.lower[d] + ((idx / self.strides[d]) % self.shape[d]) as f64 * self.spacing
            })
            .collect()
    }

    pub fn node_class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    /// `H0` of the node position.
    pub fn node_h0(&self, idx: usize) -> f64 {
        self.h0[idx]
    }

    pub fn mask(&self, idx: usize) -> Mask {
        match self.class[idx] {
            NodeClass::Free => Mask::InteriorUnknown,
            NodeClass::Inner => Mask::Dirichlet(1.0),
            NodeClass::Outer => {
                let touches_free = (0..self.dim).any(|d| {
                    let i = (idx / self.strides[d]) % self.shape[d];
                    (i > 0 && self.class[idx - self.strides[d]] == NodeClass::Free)
                        || (i + 1 < self.shape[d]
                            && self.class[idx + self.strides[d]] == NodeClass::Free)
                });
                if touches_free {
                    Mask::Dirichlet(self.fixed_value[idx])
                } else {
                    Mask::Outside
                }
            }
        }
    }

    /// Replaces the outer boundary data, keeping the node classification.
    pub fn with_outer_data(&self, outer_data: OuterData) -> Self {
        let mut g = self.clone();
        g.outer_data = outer_data;
        for i in 0..g.class.len() {
            if g.class[i] == NodeClass::Outer {
                g.fixed_value[i] = outer_data.value(g.h0[i]);
            }
        }
        let crossing = outer_data.value(g.outer_radius);
        for k in 0..g.cut_value.len() {
            let (i, d) = (k / g.dim, k % g.dim);
            if g.is_cut(i, d) {
                let j = i + g.strides[d];
                if g.class[i] == NodeClass::Outer || g.class[j] == NodeClass::Outer {
                    g.cut_value[k] = crossing;
                }
            }
        }
        g
    }

    fn is_cut(&self, i: usize, d: usize) -> bool {
        if (i / self.strides[d]) % self.shape[d] + 1 >= self.shape[d] {
            return false;
        }
        let j = i + self.strides[d];
        (self.class[i] == NodeClass::Free) != (self.class[j] == NodeClass::Free)
    }

    /// Full node-value vector from unknowns.
    pub(crate) fn scatter(&self, unknowns: &[f64]) -> Vec<f64> {
        let mut v = self.fixed_value.clone();
        for (k, &node) in self.unknown_nodes.iter().enumerate() {
            v[node as usize] = unknowns[k];
        }
        v
    }

    pub(crate) fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.unknown_nodes
            .iter()
            .map(|&i| values[i as usize])
            .collect()
    }

    /// Every free node is connected through free neighbours to a node adjacent to the body.
    pub fn is_connected(&self) -> bool {
        let n = self.dim;
        let mut seen = vec![false; self.class.len()];
        let mut queue = VecDeque::new();
        for (i, c) in self.class.iter().enumerate() {
            if *c == NodeClass::Inner {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for d in 0..n {
                let pos = (i / self.strides[d]) % self.shape[d];
                let mut nbs = Vec::with_capacity(2);
                if pos > 0 {
                    nbs.push(i - self.strides[d]);
                }
                if pos + 1 < self.shape[d] {
                    nbs.push(i + self.strides[d]);
                }
                for j in nbs {
                    if !seen[j] && self.class[j] == NodeClass::Free {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        self.class
            .iter()
            .zip(&seen)
            .all(|(c, s)| *c != NodeClass::Free || *s)
    }
}

fn first_unknown_at_or_after(unknown_index: &[u32], from: usize, to: usize) -> usize {
    for i in from..=to.min(unknown_index.len() - 1) {
        if unknown_index[i] != u32::MAX {
            return unknown_index[i] as usize;
        }
    }
    0
}

fn last_unknown_at_or_before(unknown_index: &[u32], from: usize, to: usize) -> usize {
    for i in (from..=to.min(unknown_index.len() - 1)).rev() {
        if unknown_index[i] != u32::MAX {
            return unknown_index[i] as usize;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;

    fn setup(res: usize) -> Grid {
        let dual = DualNorm::new(NormSpec::euclidean(3).unwrap());
        let body = ConvexBody::wulff(&dual, vec![0.0; 3], 1.0).unwrap();
        Grid::build(&body, &dual, 4.0, res, OuterData::Zero).unwrap()
    }

    #[test]
    fn masks_partition_nodes() {
        let g = setup(32);
        let mut counts = [0usize; 3];
        for i in 0..g.node_count() {
            match g.mask(i) {
                Mask::InteriorUnknown => counts[0] += 1,
                Mask::Dirichlet(_) => counts[1] += 1,
                Mask::Outside => counts[2] += 1,
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), g.node_count());
        assert!(counts[0] > 0);
        assert_eq!(counts[0], g.unknown_count());
        for i in 0..g.node_count() {
            if g.mask(i) == Mask::InteriorUnknown {
                let x = g.node_coords(i);
                assert!(crate::vecops::norm2(&x) > 1.0);
            }
        }
        assert!(g.is_connected());
    }

    #[test]
    fn origin_is_a_node_and_cut_fractions_are_exact() {
        let g = setup(24);
        let h = g.spacing;
        // The node (k h, 0, 0) right outside the unit sphere has its -x edge cut at 1.
        let center: usize = (0..3).map(|d| (g.shape[d] / 2) * g.strides[d]).sum();
        assert!(crate::vecops::norm2(&g.node_coords(center)) < 1e-12);
        let k = (1.0 / h).ceil() as usize;
        let free = center + k * g.strides[0];
        let inner = free - g.strides[0];
        assert_eq!(g.node_class(free), NodeClass::Free);
        assert_eq!(g.node_class(inner), NodeClass::Inner);
        let theta = g.cut_theta[inner * 3];
        let want = ((k as f64 * h - 1.0) / h).max(THETA_MIN);
        assert!((theta - want).abs() < 1e-9, "{theta} vs {want}");
    }

    #[test]
    fn classification_stabilizes_under_refinement() {
        let x = [1.5, 0.0, 0.0];
        for res in [17, 33, 65] {
            let g = setup(res);
            let idx: usize = (0..3)
                .map(|d| (((x[d] - g.lower[d]) / g.spacing).round() as usize) * g.strides[d])
                .sum();
            assert_eq!(g.node_class(idx), NodeClass::Free);
        }
    }

    #[test]
    fn body_must_fit_inside() {
        let dual = DualNorm::new(NormSpec::euclidean(3).unwrap());
        let body = ConvexBody::wulff(&dual, vec![0.0; 3], 1.0).unwrap();
        assert!(matches!(
            Grid::build(&body, &dual, 0.9, 32, OuterData::Zero),
            Err(FcapError::BodyNotInside { .. })
        ));
    }
}
