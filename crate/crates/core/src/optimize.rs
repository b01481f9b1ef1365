//! Limited-memory BFGS with Armijo backtracking on a linear feasible set.

use std::collections::VecDeque;

/// Linear feasibility structure of a discrete problem.
///
/// `project` maps a raw gradient onto the tangent space of the feasible set
/// (zeroing fixed nodes, removing the mass component). `restore` pushes an
/// iterate back onto the set after a step to undo round-off drift.
pub trait Feasibility {
    fn project(&self, g: &mut [f64]);
    fn restore(&self, _x: &mut [f64]) {}
}

/// Fixed nodes only.
pub struct FixedMask<'a> {
    pub fixed: &'a [bool],
    pub phase_dim: usize,
}

impl Feasibility for FixedMask<'_> {
    fn project(&self, g: &mut [f64]) {
        let d = self.phase_dim;
        for (i, &f) in self.fixed.iter().enumerate() {
            if f {
                g[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, tolerance: 1e-6, max_iterations: 10_000, armijo: 1e-4, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    /// Sup-norm of the projected gradient at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes `f` starting from `x` (updated in place).
///
/// `f(x, g)` returns the value and writes the raw gradient into `g`.
pub fn minimize<F, C>(x: &mut [f64], mut f: F, feas: &C, opts: &LbfgsOptions) -> OptimizeReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    C: Feasibility + ?Sized,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    feas.project(&mut g);
    let mut evaluations = 1;
    let mut residual = sup(&g);

    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory.max(1)];
    let mut iterations = 0;

    while residual > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        // two-loop recursion
        dir.copy_from_slice(&g);
        for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        } else {
            let scale = (1.0f64).min(0.1 / residual.max(f64::MIN_POSITIVE));
            dir.iter_mut().for_each(|d| *d *= scale);
        }
        for (k, (s, y, rho)) in hist.iter().enumerate() {
            let b = rho * dot(y, &dir);
            let a = alpha_buf[k];
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        feas.project(&mut dir);

        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            hist.clear();
            let scale = (1.0f64).min(0.1 / residual.max(f64::MIN_POSITIVE));
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -scale * gi);
            slope = dot(&dir, &g);
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            xt.iter_mut().zip(x.iter()).zip(&dir).for_each(|((t, xi), d)| *t = xi + step * d);
            feas.restore(&mut xt);
            let ft = f(&xt, &mut gt);
            evaluations += 1;
            if !ft.is_finite() {
                step *= 0.5;
                continue;
            }
            let armijo = ft <= fx + opts.armijo * step * slope;
            // near the minimum energy differences drown in round-off; fall
            // back to a derivative test along the search direction
            let flat = ft <= fx + 1e-12 * fx.abs() && {
                feas.project(&mut gt);
                dot(&gt, &dir).abs() <= 0.9 * slope.abs()
            };
            if armijo || flat {
                fx = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        }

        feas.project(&mut gt);
        let s: Vec<f64> = xt.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            if opts.memory > 0 {
                hist.push_back((s, y, 1.0 / sy));
            }
        }
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gt);
        residual = sup(&g);
    }

    OptimizeReport { iterations, evaluations, value: fx, residual, converged: residual <= opts.tolerance }
}
