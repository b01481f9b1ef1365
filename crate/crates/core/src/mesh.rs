//! Uniform tensor grids and the discrete phase-field energy.
//!
//! Nodes are stored with axis 0 fastest; a nodal field with `d` phase
//! components stores node `i` in `u[i*d .. (i+1)*d]`. Each grid cell
//! contributes, with `vol = h^N`,
//!
//! ```text
//! vol * ( wp * f(x_c) * W0(mean of corners)
//!       + wg * sum_k mean over k-edges of |(u_j - u_i) / h|^2 )
//! ```
//!
//! where `f(x_c)` is the potential's spatial factor at the (mapped) cell
//! centre. Energies are summed sequentially in cell order, so results are
//! bit-for-bit reproducible.

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Tensor grid with spacing `h`, optionally periodic along some axes.
///
/// Along a non-periodic axis with `n` nodes there are `n - 1` cells; along a
/// periodic axis there are `n` cells and the last one wraps to node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dims: Vec<usize>,
    periodic: Vec<bool>,
    h: f64,
    origin: Vec<f64>,
    strides: Vec<usize>,
    cells: Vec<usize>,
    corners: Vec<u32>,
}

impl Mesh {
    pub fn new(dims: Vec<usize>, periodic: Vec<bool>, h: f64, origin: Vec<f64>) -> Result<Self> {
        let n = dims.len();
        if n == 0 || n > 3 || periodic.len() != n || origin.len() != n {
            return Err(Error::InvalidArgument("mesh dimension must be 1..=3 with matching axes".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument("every axis needs at least two nodes".into()));
        }
        let mut strides = vec![1; n];
        for k in 1..n {
            strides[k] = strides[k - 1] * dims[k - 1];
        }
        let total: usize = dims.iter().product();
        if total > u32::MAX as usize {
            return Err(Error::InvalidArgument("mesh too large".into()));
        }
        let cells: Vec<usize> = dims.iter().zip(&periodic).map(|(&d, &p)| if p { d } else { d - 1 }).collect();
        let cell_count: usize = cells.iter().product();
        let nc = 1 << n;
        let mut corners = Vec::with_capacity(cell_count * nc);
        let mut idx = vec![0usize; n];
        for _ in 0..cell_count {
            for c in 0..nc {
                let mut node = 0;
                for k in 0..n {
                    let mut i = idx[k] + ((c >> k) & 1);
                    if i == dims[k] {
                        i = 0;
                    }
                    node += i * strides[k];
                }
                corners.push(node as u32);
            }
            for k in 0..n {
                idx[k] += 1;
                if idx[k] < cells[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self { dims, periodic, h, origin, strides, cells, corners })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Volume of the meshed region.
    pub fn volume(&self) -> f64 {
        self.cell_count() as f64 * self.h.powi(self.dim() as i32)
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi(&self, mut idx: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
    }

    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem % self.dims[k];
            rem /= self.dims[k];
            out[k] = self.origin[k] + i as f64 * self.h;
        }
    }

    /// Whether the node lies on a non-periodic face.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem % self.dims[k];
            rem /= self.dims[k];
            if !self.periodic[k] && (i == 0 || i + 1 == self.dims[k]) {
                return true;
            }
        }
        false
    }

    /// Centres of all cells in storage order.
    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.cell_count());
        let mut idx = vec![0usize; n];
        for _ in 0..self.cell_count() {
            out.push((0..n).map(|k| self.origin[k] + (idx[k] as f64 + 0.5) * self.h).collect());
            for k in 0..n {
                idx[k] += 1;
                if idx[k] < self.cells[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    /// Multilinear interpolation of a nodal field at `x` (clamped to the grid
    /// on non-periodic axes, wrapped on periodic ones).
    pub fn interpolate(&self, u: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..n {
            let mut s = (x[k] - self.origin[k]) / self.h;
            if self.periodic[k] {
                let len = self.dims[k] as f64;
                s = s.rem_euclid(len);
                let i = (s.floor() as usize).min(self.dims[k] - 1);
                base[k] = i;
                frac[k] = s - i as f64;
            } else {
                let max = (self.dims[k] - 1) as f64;
                s = s.clamp(0.0, max);
                let i = (s.floor() as usize).min(self.dims[k] - 2);
                base[k] = i;
                frac[k] = s - i as f64;
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in 0..(1usize << n) {
            let mut w = 1.0;
            let mut node = 0;
            for k in 0..n {
                let bit = (c >> k) & 1;
                let mut i = base[k] + bit;
                if i == self.dims[k] {
                    i = 0;
                }
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                node += i * self.strides[k];
            }
            if w != 0.0 {
                for j in 0..d {
                    out[j] += w * u[node * d + j];
                }
            }
        }
    }
}

/// Potential and gradient parts of a discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct EnergyParts {
    pub potential: f64,
    pub gradient: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.potential + self.gradient
    }
}

/// Discrete energy on a mesh with cached spatial factors.
#[derive(Debug, Clone)]
pub struct EnergyKernel<'a> {
    mesh: &'a Mesh,
    pot: &'a Potential,
    factors: Vec<f64>,
    potential_weight: f64,
    gradient_weight: f64,
}

impl<'a> EnergyKernel<'a> {
    /// `map` sends a cell centre to the potential's spatial argument.
    pub fn new<F>(mesh: &'a Mesh, pot: &'a Potential, potential_weight: f64, gradient_weight: f64, map: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n = mesh.dim();
        let mut y = vec![0.0; n];
        let factors = mesh
            .cell_centers()
            .iter()
            .map(|c| {
                map(c, &mut y);
                pot.factor(&y)
            })
            .collect();
        Self { mesh, pot, factors, potential_weight, gradient_weight }
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn phase_dim(&self) -> usize {
        self.pot.phase_dim()
    }

    pub fn expected_len(&self) -> usize {
        self.mesh.node_count() * self.pot.phase_dim()
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.expected_len() {
            return Err(Error::ShapeMismatch { expected: self.expected_len(), actual: u.len() });
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: i / self.pot.phase_dim() });
        }
        Ok(())
    }

    pub fn energy(&self, u: &[f64]) -> EnergyParts {
        self.evaluate(u, None)
    }

    /// Energy and its exact gradient with respect to every nodal value.
    pub fn energy_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> EnergyParts {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.evaluate(u, Some(grad))
    }

    fn evaluate(&self, u: &[f64], mut grad: Option<&mut [f64]>) -> EnergyParts {
        let n = self.mesh.dim();
        let d = self.pot.phase_dim();
        let nc = 1usize << n;
        let h = self.mesh.h;
        let vol = h.powi(n as i32);
        let edge_mean = 1.0 / (nc / 2) as f64;
        let wp = vol * self.potential_weight;
        let wg = vol * self.gradient_weight * edge_mean / (h * h);
        let corner_share = 1.0 / nc as f64;

        let mut mean = [0.0f64; 4];
        let mut dmean = [0.0f64; 4];
        let mut pot_sum = 0.0;
        let mut grad_sum = 0.0;
        for (cell, nodes) in self.mesh.corners.chunks_exact(nc).enumerate() {
            for j in 0..d {
                let mut s = 0.0;
                for &c in nodes {
                    s += u[c as usize * d + j];
                }
                mean[j] = s * corner_share;
            }
            let f = self.factors[cell];
            pot_sum += wp * f * self.pot.base(&mean[..d]);

            let mut cell_grad = 0.0;
            for k in 0..n {
                let bit = 1usize << k;
                for c in 0..nc {
                    if c & bit != 0 {
                        continue;
                    }
                    let lo = nodes[c] as usize * d;
                    let hi = nodes[c | bit] as usize * d;
                    for j in 0..d {
                        let diff = u[hi + j] - u[lo + j];
                        cell_grad += diff * diff;
                        if let Some(g) = grad.as_deref_mut() {
                            let dg = 2.0 * wg * diff;
                            g[hi + j] += dg;
                            g[lo + j] -= dg;
                        }
                    }
                }
            }
            grad_sum += wg * cell_grad;

            if let Some(g) = grad.as_deref_mut() {
                self.pot.base_dp(&mean[..d], &mut dmean[..d]);
                let s = wp * f * corner_share;
                for &c in nodes {
                    let base = c as usize * d;
                    for j in 0..d {
                        g[base + j] += s * dmean[j];
                    }
                }
            }
        }
        EnergyParts { potential: pot_sum, gradient: grad_sum }
    }
}

/// Prolongates a field from a grid to its nested refinement (spacing `h/2`,
/// `2(n-1)+1` nodes per non-periodic axis, `2n` per periodic one).
pub fn prolongate(coarse: &Mesh, fine: &Mesh, u: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = coarse.dim();
    let nested = fine.dim() == n
        && (fine.h * 2.0 - coarse.h).abs() <= 1e-12 * coarse.h
        && (0..n).all(|k| {
            let expect = if coarse.periodic[k] { 2 * coarse.dims[k] } else { 2 * (coarse.dims[k] - 1) + 1 };
            fine.dims[k] == expect && fine.periodic[k] == coarse.periodic[k]
        });
    if !nested {
        return Err(Error::GridIncompatible("fine mesh is not the nested refinement of the coarse mesh".into()));
    }
    let mut out = vec![0.0; fine.node_count() * d];
    let mut multi = vec![0usize; n];
    let mut x = vec![0.0; n];
    for idx in 0..fine.node_count() {
        fine.node_multi(idx, &mut multi);
        for k in 0..n {
            x[k] = coarse.origin[k] + multi[k] as f64 * 0.5 * coarse.h;
        }
        coarse.interpolate(u, d, &x, &mut out[idx * d..(idx + 1) * d]);
    }
    Ok(out)
}
