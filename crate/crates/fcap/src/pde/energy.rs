//! Discrete Finsler p-Dirichlet energy on a cut-cell grid.
//!
//! Every grid cell is split into `2^N` corner pieces of volume `(h/2)^N`. A
//! piece takes its gradient from the `N` cell edges leaving its corner. Edges
//! crossed by the boundary use the one-sided difference to the crossing point,
//! and the piece weight drops the part of the half-edge lying outside the
//! domain. Away from the boundary this is the plain forward-difference cell
//! energy averaged over the `2^N` corner stencils.

use rayon::prelude::*;

use super::grid::{Grid, NodeClass, MAX_DIM};
use crate::norms::NormSpec;

/// Energy functional for fixed `(norm, p, epsilon)` on a grid.
#[derive(Clone, Debug)]
pub struct Energy<'a> {
    pub grid: &'a Grid,
    pub norm: &'a NormSpec,
    pub p: f64,
    pub epsilon: f64,
}

/// What a reduction pass accumulates besides the energy.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Pass {
    Value,
    Gradient,
    Diagonal,
}

struct Piece {
    xi: [f64; MAX_DIM],
    weight: f64,
    /// (unknown index, axis, d xi_axis / d u).
    deps: [(u32, u8, f64); 2 * MAX_DIM],
    ndeps: usize,
}

impl<'a> Energy<'a> {
    pub fn new(grid: &'a Grid, norm: &'a NormSpec, p: f64, epsilon: f64) -> Self {
        Self {
            grid,
            norm,
            p,
            epsilon,
        }
    }

    /// Energy of a full node-value vector.
    pub fn of_nodes(&self, values: &[f64]) -> f64 {
        self.reduce(values, Pass::Value).0
    }

    /// Energy at the given unknowns.
    pub fn value(&self, unknowns: &[f64]) -> f64 {
        self.of_nodes(&self.grid.scatter(unknowns))
    }

    /// Energy and its gradient with respect to the unknowns.
    pub fn value_and_gradient(&self, unknowns: &[f64], grad: &mut [f64]) -> f64 {
        let (e, g) = self.reduce(&self.grid.scatter(unknowns), Pass::Gradient);
        grad.copy_from_slice(&g);
        e
    }

    /// Positive approximation of the Hessian diagonal, for preconditioning.
    pub fn hessian_diagonal(&self, unknowns: &[f64]) -> Vec<f64> {
        let (_, mut d) = self.reduce(&self.grid.scatter(unknowns), Pass::Diagonal);
        let floor = d.iter().cloned().fold(0.0, f64::max) * 1e-8;
        for x in d.iter_mut() {
            *x = x.max(floor).max(f64::MIN_POSITIVE);
        }
        d
    }

    fn reduce(&self, values: &[f64], pass: Pass) -> (f64, Vec<f64>) {
        let g = self.grid;
        let n = g.dim;
        let h = g.spacing;
        let piece_volume = (0.5 * h).powi(n as i32);
        let e2 = (self.epsilon * g.gradient_scale).powi(2);
        let p = self.p;
        let axis_scale: Vec<f64> = (0..n)
            .map(|d| {
                let mut e = vec![0.0; n];
                e[d] = 1.0;
                let mut out = vec![0.0; n];
                self.norm.half_sq_grad_into(&e, &mut out);
                out[d]
            })
            .collect();
        let corner_offsets: Vec<usize> = (0..1usize << n)
            .map(|m| {
                (0..n)
                    .filter(|d| m >> d & 1 == 1)
                    .map(|d| g.strides[d])
                    .sum()
            })
            .collect();

        let partials: Vec<(f64, usize, Vec<f64>)> = g
            .chunks
            .par_iter()
            .map(|chunk| {
                let mut local = if pass == Pass::Value {
                    Vec::new()
                } else {
                    vec![0.0; chunk.uhi + 1 - chunk.ulo]
                };
                let mut energy = 0.0;
                let mut hxi = [0.0; MAX_DIM];
                let mut piece = Piece {
                    xi: [0.0; MAX_DIM],
                    weight: 0.0,
                    deps: [(0, 0, 0.0); 2 * MAX_DIM],
                    ndeps: 0,
                };
                for ci in chunk.cells.clone() {
                    let base = g.cells[ci] as usize;
                    let foff = g.fraction_offset[ci];
                    for m in 0..corner_offsets.len() {
                        let fraction =
                            (foff != u32::MAX).then(|| g.piece_fraction[foff as usize + m]);
                        if !self.build_piece(values, base, m, &corner_offsets, fraction, &mut piece)
                        {
                            continue;
                        }
                        let xi = &piece.xi[..n];
                        self.norm.half_sq_grad_into(xi, &mut hxi[..n]);
                        let h2: f64 = xi.iter().zip(&hxi[..n]).map(|(a, b)| a * b).sum();
                        let s = h2 + e2;
                        let wv = piece.weight * piece_volume;
                        energy += wv * s.powf(0.5 * p) / p;
                        if pass == Pass::Value || s == 0.0 {
                            continue;
                        }
                        let k = s.powf(0.5 * p - 1.0);
                        match pass {
                            Pass::Gradient => {
                                for &(ui, d, c) in &piece.deps[..piece.ndeps] {
                                    local[ui as usize - chunk.ulo] += wv * k * hxi[d as usize] * c;
                                }
                            }
                            Pass::Diagonal => {
                                let kk = wv * k * (p - 1.0).max(1.0);
                                for &(ui, d, c) in &piece.deps[..piece.ndeps] {
                                    local[ui as usize - chunk.ulo] +=
                                        kk * axis_scale[d as usize] * c * c;
                                }
                            }
                            Pass::Value => {}
                        }
                    }
                }
                (energy, chunk.ulo, local)
            })
            .collect();

        let mut total = 0.0;
        let mut out = if pass == Pass::Value {
            Vec::new()
        } else {
            vec![0.0; g.unknown_count()]
        };
        for (e, ulo, local) in partials {
            total += e;
            for (k, v) in local.into_iter().enumerate() {
                out[ulo + k] += v;
            }
        }
        (total, out)
    }

    /// Fills the gradient, weight and dependencies of the corner piece
    /// `mask` of the cell at `base`. Returns false for empty pieces.
    #[inline]
    fn build_piece(
        &self,
        values: &[f64],
        base: usize,
        mask: usize,
        offsets: &[usize],
        fraction: Option<f64>,
        piece: &mut Piece,
    ) -> bool {
        let g = self.grid;
        let n = g.dim;
        let weight = fraction.unwrap_or(1.0);
        if weight <= 0.0 {
            return false;
        }
        piece.ndeps = 0;
        for d in 0..n {
            let bit = 1usize << d;
            // Parallel edges along d, nearest to this corner first.
            let own = mask & !bit;
            if !self.edge_slope(values, base + offsets[own], d, piece) {
                let mut best: Option<(u32, usize)> = None;
                for other in 0..offsets.len() {
                    if other & bit != 0 || other == own {
                        continue;
                    }
                    let lo = base + offsets[other];
                    let hi = lo + g.strides[d];
                    if g.class[lo] != NodeClass::Free && g.class[hi] != NodeClass::Free {
                        continue;
                    }
                    let dist = (other ^ own).count_ones();
                    if best.map_or(true, |(bd, _)| dist < bd) {
                        best = Some((dist, lo));
                    }
                }
                match best {
                    Some((_, lo)) => {
                        self.edge_slope(values, lo, d, piece);
                    }
                    None => {
                        let lo = base + offsets[own];
                        piece.xi[d] = (values[lo + g.strides[d]] - values[lo]) / g.spacing;
                    }
                }
            }
        }
        piece.weight = weight;
        true
    }

    /// Slope along `+e_d` of the edge starting at node `lo`, using the
    /// boundary crossing on cut edges. Returns false if both ends are fixed.
    #[inline]
    fn edge_slope(&self, values: &[f64], lo: usize, d: usize, piece: &mut Piece) -> bool {
        let g = self.grid;
        let h = g.spacing;
        let hi = lo + g.strides[d];
        let lo_free = g.class[lo] == NodeClass::Free;
        let hi_free = g.class[hi] == NodeClass::Free;
        let key = lo * g.dim + d;
        match (lo_free, hi_free) {
            (true, true) => {
                piece.xi[d] = (values[hi] - values[lo]) / h;
                piece.deps[piece.ndeps] = (g.unknown_index[hi], d as u8, 1.0 / h);
                piece.deps[piece.ndeps + 1] = (g.unknown_index[lo], d as u8, -1.0 / h);
                piece.ndeps += 2;
            }
            (true, false) => {
                let th = g.cut_theta[key] * h;
                piece.xi[d] = (g.cut_value[key] - values[lo]) / th;
                piece.deps[piece.ndeps] = (g.unknown_index[lo], d as u8, -1.0 / th);
                piece.ndeps += 1;
            }
            (false, true) => {
                let th = g.cut_theta[key] * h;
                piece.xi[d] = (values[hi] - g.cut_value[key]) / th;
                piece.deps[piece.ndeps] = (g.unknown_index[hi], d as u8, 1.0 / th);
                piece.ndeps += 1;
            }
            (false, false) => return false,
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::ConvexBody;
    use crate::norms::{DualNorm, NormSpec};
    use crate::pde::grid::OuterData;
    use crate::pde::radial::{radial_capacity, radial_potential};

    fn grid(res: usize, outer: OuterData) -> (Grid, NormSpec, DualNorm) {
        let norm = NormSpec::euclidean(3).unwrap();
        let dual = DualNorm::new(norm.clone());
        let body = ConvexBody::wulff(&dual, vec![0.0; 3], 1.0).unwrap();
        let g = Grid::build(&body, &dual, 3.0, res, outer).unwrap();
        (g, norm, dual)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (g, norm, _) = grid(12, OuterData::Zero);
        for (p, eps) in [(2.0, 0.0), (1.5, 1e-2), (2.5, 0.0)] {
            let e = Energy::new(&g, &norm, p, eps);
            let u: Vec<f64> = (0..g.unknown_count())
                .map(|i| 0.3 + 0.5 * ((i * 7919) % 101) as f64 / 101.0)
                .collect();
            let mut grad = vec![0.0; u.len()];
            e.value_and_gradient(&u, &mut grad);
            for i in (0..u.len()).step_by(u.len() / 13 + 1) {
                let fd_at = |step: f64| {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[i] += step;
                    dn[i] -= step;
                    (e.value(&up) - e.value(&dn)) / (2.0 * step)
                };
                let fd = fd_at(1e-4);
                assert!(
                    (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "p={p} i={i}: {fd} vs {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn constant_field_has_zero_energy() {
        let (g, norm, _) = grid(
            16,
            OuterData::Radial {
                coefficient: 1.0,
                exponent: 0.0,
            },
        );
        // Outer data H0^0 = 1 matches the body value, so u = 1 is constant.
        let e = Energy::new(&g, &norm, 2.0, 0.0);
        assert!(e.value(&vec![1.0; g.unknown_count()]).abs() < 1e-14);
        let zero = g.with_outer_data(OuterData::Zero);
        assert!(Energy::new(&zero, &norm, 2.0, 0.0).value(&vec![0.0; zero.unknown_count()]) > 0.0);
    }

    #[test]
    fn sampled_radial_field_energy_is_close_to_capacity() {
        for res in [24usize, 48] {
            let (g, norm, dual) = grid(res, OuterData::Zero);
            let g = g.with_outer_data(OuterData::Radial {
                coefficient: 1.0,
                exponent: -1.0,
            });
            let u: Vec<f64> = g
                .unknown_nodes
                .iter()
                .map(|&i| {
                    radial_potential(&dual, &[0.0; 3], 1.0, 2.0, &g.node_coords(i as usize))
                        .unwrap()
                })
                .collect();
            let e = Energy::new(&g, &norm, 2.0, 0.0).value(&u);
            // Energy of 1/|x| on 1 < |x| < 3.
            let want = radial_capacity(&dual, 1.0, 2.0).unwrap() * (1.0 - 1.0 / 3.0);
            assert!((e - want).abs() / want < 0.01, "res {res}: {e} vs {want}");
        }
    }

    #[test]
    fn energy_is_midpoint_convex() {
        let (g, norm, _) = grid(12, OuterData::Zero);
        let e = Energy::new(&g, &norm, 1.5, 1e-3);
        let n = g.unknown_count();
        let a: Vec<f64> = (0..n).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 13) % 23) as f64 / 23.0).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        assert!(e.value(&mid) <= 0.5 * (e.value(&a) + e.value(&b)) + 1e-12);
    }
}
