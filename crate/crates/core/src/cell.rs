//! The cell problem on a rotated cube and the surface-tension estimate.
//!
//! Everything is computed on the axis-aligned reference cube
//! `[-T/2, T/2]^N`. A rotation `R` with `R e_N = nu` maps it onto the cube
//! with normal `nu`; since `|grad u|` is rotation invariant, only the
//! potential sees `R` through its spatial argument `W(Rx, .)`. The boundary
//! data `phi((Rx).nu) = phi(x_N)` is imposed on every boundary node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{rotation_from_direction, RationalRotation, RationalUnitVector};
use crate::mesh::{prolongate, EnergyKernel, EnergyParts, Mesh};
use crate::optimize::{minimize, FixedMask, LbfgsOptions};
use crate::potential::Potential;
use crate::profile::TransitionProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Gradient sup-norm threshold; defaults to `1e-6 * |b - a|`.
    pub tolerance: Option<f64>,
    /// Defaults to `20 * n^N`.
    pub max_iterations: Option<usize>,
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: None, max_iterations: None, memory: 10 }
    }
}

impl SolverOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { tolerance: Some(tol), ..Self::default() }
    }

    pub(crate) fn lbfgs(&self, pot: &Potential, nodes: usize) -> Result<LbfgsOptions> {
        let tolerance = self.tolerance.unwrap_or(1e-6 * pot.wells().separation());
        if !(tolerance > 0.0) {
            return Err(Error::Precondition(format!("solver tolerance must be positive, got {tolerance}")));
        }
        Ok(LbfgsOptions {
            memory: self.memory,
            tolerance,
            max_iterations: self.max_iterations.unwrap_or(20 * nodes),
            ..LbfgsOptions::default()
        })
    }
}

/// Uniform grid on the reference cube of edge `T`.
#[derive(Debug, Clone)]
pub struct CellGrid {
    t: f64,
    h: f64,
    n: usize,
    rotation: RationalRotation,
    rot: Vec<f64>,
    mesh: Mesh,
}

impl CellGrid {
    /// `h` must divide `T`; the grid has `n = T/h + 1 >= 8` nodes per axis.
    pub fn new(dim: usize, t: f64, h: f64, rotation: RationalRotation) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("cell dimension must be 2 or 3, got {dim}")));
        }
        if rotation.dim() != dim {
            return Err(Error::ShapeMismatch { expected: dim, actual: rotation.dim() });
        }
        if !(t > 0.0 && t.is_finite() && h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell edge {t} and mesh size {h} must be positive")));
        }
        let cells = (t / h).round();
        if (cells * h - t).abs() > 1e-9 * t {
            return Err(Error::GridIncompatible(format!("mesh size {h} does not divide cell edge {t}")));
        }
        let n = cells as usize + 1;
        if n < 8 {
            return Err(Error::InvalidArgument(format!("cell grid needs at least 8 nodes per axis, got {n}")));
        }
        let mesh = Mesh::new(vec![n; dim], vec![false; dim], h, vec![-t / 2.0; dim])?;
        let rot = rotation.to_f64().into_iter().flatten().collect();
        Ok(Self { t, h, n, rotation, rot, mesh })
    }

    /// Grid for the cube with normal `nu`, using the canonical rotation.
    pub fn for_direction(nu: &RationalUnitVector, t: f64, h: f64) -> Result<Self> {
        Self::new(nu.dim(), t, h, rotation_from_direction(nu))
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn rotation(&self) -> &RationalRotation {
        &self.rotation
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Unit normal `R e_N` in floating point.
    pub fn normal(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.rot[i * n + n - 1]).collect()
    }

    /// `y = R x`.
    pub fn to_physical(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            y[i] = (0..n).map(|j| self.rot[i * n + j] * x[j]).sum();
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.mesh.on_boundary(node)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.mesh.node_count()).map(|i| self.mesh.on_boundary(i)).collect()
    }

    /// Same cube and rotation at half the mesh size.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim(), self.t, self.h / 2.0, self.rotation.clone())
    }

    pub(crate) fn kernel<'a>(&'a self, pot: &'a Potential) -> EnergyKernel<'a> {
        EnergyKernel::new(&self.mesh, pot, 1.0, 1.0, |x, y| self.to_physical(x, y))
    }

    /// The boundary field extended to every node: `phi(x_N)`.
    pub fn initial_state(&self, profile: &TransitionProfile) -> CellState {
        let n = self.dim();
        let d = profile.wells().dim();
        let mut e_n = vec![0.0; n];
        e_n[n - 1] = 1.0;
        let mut u = vec![0.0; self.mesh.node_count() * d];
        let mut x = vec![0.0; n];
        for i in 0..self.mesh.node_count() {
            self.mesh.node_coords(i, &mut x);
            profile.boundary_field(&e_n, &x, &mut u[i * d..(i + 1) * d]);
        }
        CellState { u, phase_dim: d }
    }
}

/// Nodal phase values, `phase_dim` components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub u: Vec<f64>,
    pub phase_dim: usize,
}

impl CellState {
    pub fn values(&self) -> &[f64] {
        &self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub t: f64,
    pub h: f64,
    /// Energy per unit cross-section, `E / T^(N-1)`.
    pub g: f64,
    pub energy: EnergyParts,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub result: CellResult,
    pub state: CellState,
}

fn check_inputs(grid: &CellGrid, pot: &Potential, profile: Option<&TransitionProfile>) -> Result<()> {
    if let Some(p) = profile {
        if p.wells() != pot.wells() {
            return Err(Error::InvalidArgument("profile and potential use different wells".into()));
        }
        if p.mollifier().dim != grid.dim() {
            return Err(Error::ShapeMismatch { expected: grid.dim(), actual: p.mollifier().dim });
        }
    }
    Ok(())
}

pub fn assemble_energy(grid: &CellGrid, pot: &Potential, state: &CellState) -> Result<EnergyParts> {
    check_inputs(grid, pot, None)?;
    let k = grid.kernel(pot);
    k.check(&state.u)?;
    Ok(k.energy(&state.u))
}

/// Gradient of the discrete energy; entries of boundary nodes are zero.
pub fn assemble_gradient(grid: &CellGrid, pot: &Potential, state: &CellState) -> Result<Vec<f64>> {
    let k = grid.kernel(pot);
    k.check(&state.u)?;
    let mut g = vec![0.0; state.u.len()];
    k.energy_and_gradient(&state.u, &mut g);
    let d = state.phase_dim;
    for i in 0..grid.mesh.node_count() {
        if grid.is_boundary(i) {
            g[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(g)
}

/// Minimizes from the extended boundary field.
pub fn minimize_cell(
    grid: &CellGrid,
    pot: &Potential,
    profile: &TransitionProfile,
    opts: &SolverOptions,
) -> Result<CellSolution> {
    minimize_cell_from(grid, pot, profile, grid.initial_state(profile), opts)
}

/// Minimizes from `init`; boundary nodes are reset to the boundary field.
///
/// A run that exhausts its iteration budget returns `converged == false`
/// together with the best state reached.
pub fn minimize_cell_from(
    grid: &CellGrid,
    pot: &Potential,
    profile: &TransitionProfile,
    init: CellState,
    opts: &SolverOptions,
) -> Result<CellSolution> {
    check_inputs(grid, pot, Some(profile))?;
    let lbfgs = opts.lbfgs(pot, grid.mesh.node_count())?;
    let kernel = grid.kernel(pot);
    kernel.check(&init.u)?;
    let d = init.phase_dim;
    let mut u = init.u;
    let boundary = grid.initial_state(profile);
    let fixed = grid.boundary_mask();
    for (i, &f) in fixed.iter().enumerate() {
        if f {
            u[i * d..(i + 1) * d].copy_from_slice(&boundary.u[i * d..(i + 1) * d]);
        }
    }
    let report = minimize(
        &mut u,
        |x, g| kernel.energy_and_gradient(x, g).total(),
        &FixedMask { fixed: &fixed, phase_dim: d },
        &lbfgs,
    );
    let energy = kernel.energy(&u);
    let area = grid.t.powi(grid.dim() as i32 - 1);
    Ok(CellSolution {
        result: CellResult {
            t: grid.t,
            h: grid.h,
            g: energy.total() / area,
            energy,
            iterations: report.iterations,
            residual: report.residual,
            converged: report.converged,
        },
        state: CellState { u, phase_dim: d },
    })
}

/// `g(nu, T)` at mesh sizes `h` and `h/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub t: f64,
    pub coarse: CellResult,
    pub fine: CellResult,
    /// Fine-mesh value.
    pub g: f64,
    /// `|g_h - g_{h/2}|`.
    pub discretization_error: f64,
}

fn not_converged(r: &CellResult) -> Error {
    Error::NotConverged { iterations: r.iterations, residual: r.residual }
}

/// Like [`estimate_g`] but also returns the fine-mesh solution.
pub fn estimate_g_with_state(
    grid: &CellGrid,
    pot: &Potential,
    profile: &TransitionProfile,
    opts: &SolverOptions,
) -> Result<(GEstimate, CellSolution)> {
    if grid.t < 1.0 {
        return Err(Error::Precondition(format!("cell edge T = {} is smaller than the transition layer", grid.t)));
    }
    let coarse = minimize_cell(grid, pot, profile, opts)?;
    if !coarse.result.converged {
        return Err(not_converged(&coarse.result));
    }
    let fine_grid = grid.refined()?;
    let init = prolongate(grid.mesh(), fine_grid.mesh(), &coarse.state.u, coarse.state.phase_dim)?;
    let fine = minimize_cell_from(&fine_grid, pot, profile, CellState { u: init, phase_dim: coarse.state.phase_dim }, opts)?;
    if !fine.result.converged {
        return Err(not_converged(&fine.result));
    }
    let est = GEstimate {
        t: grid.t,
        coarse: coarse.result,
        fine: fine.result,
        g: fine.result.g,
        discretization_error: (coarse.result.g - fine.result.g).abs(),
    };
    Ok((est, fine))
}

/// Solves at `h` (from the boundary field) and `h/2` (warm-started from the
/// prolongated coarse solution).
pub fn estimate_g(
    nu: &RationalUnitVector,
    t: f64,
    pot: &Potential,
    profile: &TransitionProfile,
    h: f64,
    opts: &SolverOptions,
) -> Result<GEstimate> {
    if t < 1.0 {
        return Err(Error::Precondition(format!("cell edge T = {t} is smaller than the transition layer")));
    }
    let grid = CellGrid::for_direction(nu, t, h)?;
    estimate_g_with_state(&grid, pot, profile, opts).map(|(e, _)| e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaOptions {
    /// Coarse mesh size; every solve is repeated at `h/2`.
    pub h: f64,
    /// Require each `T` to be a multiple of the lattice period.
    pub aligned: bool,
    pub solver: SolverOptions,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self { h: 1.0 / 32.0, aligned: false, solver: SolverOptions::default() }
    }
}

/// Surface tension estimate for one direction.
///
/// The all-faces Dirichlet layer makes `g(T) = sigma + c/T + o(1/T)`, so
/// `sigma_hat` removes the `1/T` term from the last two `T` values. The error
/// bar is the change of that extrapolation over the previous pair plus the
/// propagated mesh error; with only two `T` values it is the last difference
/// of `g` plus the mesh term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub nu: Vec<f64>,
    pub nu_exact: String,
    pub per_t: Vec<GEstimate>,
    pub sigma_hat: f64,
    pub error_bar: f64,
    /// `g` at the largest `T` on the fine mesh.
    pub g_last: f64,
}

fn tail(t: &[f64], g: &[f64], d: &[f64], i: usize) -> (f64, f64) {
    let (t1, t2) = (t[i - 1], t[i]);
    let e = (t2 * g[i] - t1 * g[i - 1]) / (t2 - t1);
    let err = (t2 * d[i] + t1 * d[i - 1]) / (t2 - t1);
    (e, err)
}

/// Combines per-`T` estimates (sorted by `T`) into `(sigma_hat, error_bar)`.
pub fn extrapolate(per_t: &[GEstimate]) -> Result<(f64, f64)> {
    let t: Vec<f64> = per_t.iter().map(|e| e.t).collect();
    let g: Vec<f64> = per_t.iter().map(|e| e.g).collect();
    let d: Vec<f64> = per_t.iter().map(|e| e.discretization_error).collect();
    let k = t.len();
    match k {
        0 => Err(Error::InvalidArgument("empty schedule".into())),
        1 => Ok((g[0], d[0])),
        2 => {
            let (e, err) = tail(&t, &g, &d, 1);
            Ok((e, (g[1] - g[0]).abs() + err))
        }
        _ => {
            let (e, err) = tail(&t, &g, &d, k - 1);
            let (prev, _) = tail(&t, &g, &d, k - 2);
            Ok((e, (e - prev).abs() + err))
        }
    }
}

pub fn check_schedule(schedule: &[f64], period: Option<u64>) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("schedule must be strictly increasing".into()));
    }
    if let Some(l) = period {
        let l = l as f64;
        for &t in schedule {
            let k = (t / l).round();
            if k < 1.0 || (k * l - t).abs() > 1e-9 * t {
                return Err(Error::Precondition(format!("T = {t} is not a multiple of the lattice period {l}")));
            }
        }
    }
    Ok(())
}

pub fn estimate_sigma(
    nu: &RationalUnitVector,
    schedule: &[f64],
    pot: &Potential,
    profile: &TransitionProfile,
    opts: &SigmaOptions,
) -> Result<SigmaEstimate> {
    let rotation = rotation_from_direction(nu);
    let period = if opts.aligned {
        Some(rotation.period_u64().ok_or_else(|| Error::Precondition("lattice period too large".into()))?)
    } else {
        None
    };
    check_schedule(schedule, period)?;
    let mut per_t = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let grid = CellGrid::new(nu.dim(), t, opts.h, rotation.clone())?;
        let (est, _) = estimate_g_with_state(&grid, pot, profile, &opts.solver)?;
        per_t.push(est);
    }
    let (sigma_hat, error_bar) = extrapolate(&per_t)?;
    Ok(SigmaEstimate {
        nu: nu.to_f64(),
        nu_exact: nu.to_string(),
        g_last: per_t.last().map(|e| e.g).unwrap_or(f64::NAN),
        per_t,
        sigma_hat,
        error_bar,
    })
}
