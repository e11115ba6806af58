//! Preconditioned nonlinear conjugate gradients (Polak-Ribiere+) with an
//! Armijo line search.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcgOptions {
    /// Stop when the energy drops by less than this (relative) over `window` iterations.
    pub rel_decrease_tol: f64,
    pub window: usize,
    /// Stop when the preconditioned gradient `|M^-1 g|_inf` falls below this.
    pub grad_tol: f64,
    /// Iteration cap; `None` means `20 sqrt(n)`.
    pub max_iter: Option<usize>,
    pub armijo_c1: f64,
}

impl Default for NcgOptions {
    fn default() -> Self {
        Self {
            rel_decrease_tol: 1e-9,
            window: 10,
            grad_tol: 1e-7,
            max_iter: None,
            armijo_c1: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NcgOutcome {
    pub x: Vec<f64>,
    pub energy: f64,
    pub history: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0`. `f(x, grad)` returns the value and fills the
/// gradient; `diag` is a positive Jacobi preconditioner.
pub fn minimize<F>(f: F, diag: &[f64], x0: Vec<f64>, opts: &NcgOptions) -> NcgOutcome
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| (20.0 * (n as f64).sqrt()).ceil() as usize);
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut energy = f(&x, &mut g);
    let mut history = vec![energy];
    if n == 0 {
        return NcgOutcome {
            x,
            energy,
            history,
            grad_norm: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut z: Vec<f64> = g.iter().zip(diag).map(|(g, m)| g / m).collect();
    let mut dir: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut gz = dot(&g, &z);
    let mut prev_step = 1.0;
    let mut prev_slope = f64::NAN;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut g_best = vec![0.0; n];
    let mut grad_norm = inf_norm(&z);
    let mut converged = grad_norm < opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir.iter_mut().zip(&z).for_each(|(d, z)| *d = -z);
            slope = -gz;
            if !(slope < 0.0) {
                break;
            }
        }
        let mut alpha = if prev_slope.is_nan() {
            1.0
        } else {
            (prev_step * prev_slope / slope).clamp(1e-8, 1e8)
        };

        // Trial step, then the secant minimizer along the line from the two slopes.
        let eval = |a: f64, trial: &mut Vec<f64>, gt: &mut Vec<f64>| -> f64 {
            trial
                .iter_mut()
                .zip(&x)
                .zip(&dir)
                .for_each(|((t, x), d)| *t = x + a * d);
            f(trial, gt)
        };
        let e0 = eval(alpha, &mut trial, &mut g_trial);
        let s0 = dot(&g_trial, &dir);
        let mut best = (alpha, e0);
        g_best.copy_from_slice(&g_trial);
        if s0.is_finite() && s0 > slope {
            let a1 = alpha * slope / (slope - s0);
            if a1.is_finite() && a1 > 0.0 && (a1 - alpha).abs() > 1e-3 * alpha {
                let e1 = eval(a1, &mut trial, &mut g_trial);
                if e1 < best.1 {
                    best = (a1, e1);
                    g_best.copy_from_slice(&g_trial);
                }
            }
        }
        alpha = best.0;
        let mut e_new = best.1;
        let mut backtracks = 0;
        while !(e_new <= energy + opts.armijo_c1 * alpha * slope) && backtracks < 40 {
            alpha *= 0.25;
            e_new = eval(alpha, &mut trial, &mut g_best);
            backtracks += 1;
        }
        if !(e_new <= energy + opts.armijo_c1 * alpha * slope) {
            // No acceptable decrease along this direction: restart once along -M^-1 g.
            if prev_slope.is_nan() {
                break;
            }
            prev_slope = f64::NAN;
            dir.iter_mut().zip(&z).for_each(|(d, z)| *d = -z);
            continue;
        }
        x.iter_mut().zip(&dir).for_each(|(x, d)| *x += alpha * d);
        energy = e_new;
        history.push(energy);

        let z_new: Vec<f64> = g_best.iter().zip(diag).map(|(g, m)| g / m).collect();
        let gz_new = dot(&g_best, &z_new);
        let gz_cross = dot(&g, &z_new);
        let beta = ((gz_new - gz_cross) / gz).max(0.0);
        g.copy_from_slice(&g_best);
        z = z_new;
        gz = gz_new;
        dir.iter_mut()
            .zip(&z)
            .for_each(|(d, z)| *d = -z + beta * *d);
        prev_step = alpha;
        prev_slope = slope;
        grad_norm = inf_norm(&z);

        let k = history.len();
        let stalled = k > opts.window
            && (history[k - 1 - opts.window] - energy) <= opts.rel_decrease_tol * energy.abs();
        converged = grad_norm < opts.grad_tol || stalled;
    }

    NcgOutcome {
        x,
        energy,
        history,
        grad_norm,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_an_ill_conditioned_quadratic() {
        let n = 50;
        let a: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 10.0).collect();
        let f = |x: &[f64], g: &mut [f64]| {
            let mut e = 0.0;
            for i in 0..n {
                let r = x[i] - 1.0;
                e += 0.5 * a[i] * r * r;
                g[i] = a[i] * r;
            }
            e
        };
        let out = minimize(f, &vec![1.0; n], vec![0.0; n], &NcgOptions::default());
        assert!(out.converged);
        assert!(out.x.iter().all(|x| (x - 1.0).abs() < 1e-6));
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn minimizes_a_non_quadratic_convex_function() {
        // sum |x_i - c_i|^1.5 + 0.1 |x|^2 style smooth convex function.
        let n = 20;
        let f = |x: &[f64], g: &mut [f64]| {
            let mut e = 0.0;
            for i in 0..n {
                let r = x[i] - i as f64 * 0.1;
                let s = r * r + 1e-4;
                e += s.powf(0.75) + 0.05 * x[i] * x[i];
                g[i] = 1.5 * s.powf(-0.25) * r + 0.1 * x[i];
            }
            e
        };
        let out = minimize(f, &vec![1.0; n], vec![3.0; n], &NcgOptions::default());
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        let mut g = vec![0.0; n];
        f(&out.x, &mut g);
        assert!(inf_norm(&g) < 1e-5, "{}", inf_norm(&g));
    }
}
