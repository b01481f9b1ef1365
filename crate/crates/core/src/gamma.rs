//! The rescaled functional `F_eps(u) = int (1/eps) W(x/eps, u) + eps |grad u|^2`
//! on boxes, the recovery field built from a cell solution, and the gap
//! between minimized energies and `sigma * (interface measure)`.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::cell::{minimize_cell, CellGrid, CellResult, CellSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::lattice::{rotation_from_direction, RationalRotation, RationalUnitVector};
use crate::mesh::{EnergyKernel, EnergyParts, Mesh};
use crate::optimize::{minimize, Feasibility};
use crate::potential::Potential;
use crate::profile::TransitionProfile;

/// Boundary condition on one face of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FacePolicy {
    DirichletA,
    DirichletB,
    /// The transition profile at scale `eps` across the interface plane.
    MollifiedStep,
    Periodic,
}

/// Axis-aligned box with per-face policies.
///
/// A node on several non-periodic faces takes the policy of the face with
/// the highest axis index. The potential is evaluated at `R x / eps` when a
/// rotation is given, with the flat interface plane `{x_N = c}` then having
/// physical normal `R e_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `(low face, high face)` per axis.
    pub faces: Vec<(FacePolicy, FacePolicy)>,
    pub rotation: Option<RationalRotation>,
    /// Height `c` of the interface plane used by mollified-step faces.
    pub interface: f64,
}

impl DomainSpec {
    /// `[0, L)` periodic times `[-1/2, 1/2]` with `a` below and `b` above.
    pub fn flat_strip(length: f64) -> Self {
        Self {
            lower: vec![0.0, -0.5],
            upper: vec![length, 0.5],
            faces: vec![(FacePolicy::Periodic, FacePolicy::Periodic), (FacePolicy::DirichletA, FacePolicy::DirichletB)],
            rotation: None,
            interface: 0.0,
        }
    }

    pub fn with_rotation(mut self, r: RationalRotation) -> Self {
        self.rotation = Some(r);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > 3 || self.upper.len() != n || self.faces.len() != n {
            return Err(Error::InvalidArgument("domain axes are inconsistent".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(u > l)) {
            return Err(Error::InvalidArgument("domain extents must be positive".into()));
        }
        for (k, &(lo, hi)) in self.faces.iter().enumerate() {
            if (lo == FacePolicy::Periodic) != (hi == FacePolicy::Periodic) {
                return Err(Error::InvalidArgument(format!("axis {k} mixes periodic and Dirichlet faces")));
            }
        }
        if let Some(r) = &self.rotation {
            if r.dim() != n {
                return Err(Error::ShapeMismatch { expected: n, actual: r.dim() });
            }
        }
        Ok(())
    }

    /// Total interface measure of a flat layer `{x_N = c}`.
    pub fn cross_section(&self) -> f64 {
        let n = self.dim();
        (0..n - 1).map(|k| self.upper[k] - self.lower[k]).product()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn mesh(&self, h: f64) -> Result<Mesh> {
        self.validate()?;
        let n = self.dim();
        let mut dims = Vec::with_capacity(n);
        let mut periodic = Vec::with_capacity(n);
        for k in 0..n {
            let len = self.upper[k] - self.lower[k];
            let cells = (len / h).round();
            if (cells * h - len).abs() > 1e-9 * len {
                return Err(Error::GridIncompatible(format!("mesh size {h} does not divide extent {len} on axis {k}")));
            }
            let p = self.faces[k].0 == FacePolicy::Periodic;
            dims.push(cells as usize + usize::from(!p));
            periodic.push(p);
        }
        Mesh::new(dims, periodic, h, self.lower.clone())
    }

    fn rotation_f64(&self) -> Option<Vec<Vec<f64>>> {
        self.rotation.as_ref().map(|r| r.to_f64())
    }
}

/// Nodal values of a phase field on a domain mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub eps: f64,
    pub h: f64,
    pub u: Vec<f64>,
    pub phase_dim: usize,
}

fn kernel<'a>(mesh: &'a Mesh, domain: &DomainSpec, pot: &'a Potential, eps: f64) -> EnergyKernel<'a> {
    let rot = domain.rotation_f64();
    EnergyKernel::new(mesh, pot, 1.0 / eps, eps, move |x, y| match &rot {
        Some(r) => {
            for i in 0..x.len() {
                y[i] = (0..x.len()).map(|j| r[i][j] * x[j]).sum::<f64>() / eps;
            }
        }
        None => {
            for i in 0..x.len() {
                y[i] = x[i] / eps;
            }
        }
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

pub fn eval_f_eps(domain: &DomainSpec, pot: &Potential, field: &PhaseField) -> Result<EnergyParts> {
    check_eps(field.eps)?;
    let mesh = domain.mesh(field.h)?;
    let k = kernel(&mesh, domain, pot, field.eps);
    k.check(&field.u)?;
    Ok(k.energy(&field.u))
}

/// Dirichlet mask and values for every node.
fn boundary_data(domain: &DomainSpec, mesh: &Mesh, profile: &TransitionProfile, eps: f64) -> (Vec<bool>, Vec<f64>) {
    let n = domain.dim();
    let d = profile.wells().dim();
    let mut fixed = vec![false; mesh.node_count()];
    let mut values = vec![0.0; mesh.node_count() * d];
    let mut multi = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    for i in 0..mesh.node_count() {
        mesh.node_multi(i, &mut multi);
        let mut policy = None;
        for k in 0..n {
            let (lo, hi) = domain.faces[k];
            if lo == FacePolicy::Periodic {
                continue;
            }
            if multi[k] == 0 {
                policy = Some(lo);
            } else if multi[k] + 1 == mesh.dims()[k] {
                policy = Some(hi);
            }
        }
        let Some(p) = policy else { continue };
        fixed[i] = true;
        let out = &mut values[i * d..(i + 1) * d];
        match p {
            FacePolicy::DirichletA => out.copy_from_slice(profile.wells().a()),
            FacePolicy::DirichletB => out.copy_from_slice(profile.wells().b()),
            FacePolicy::MollifiedStep => {
                mesh.node_coords(i, &mut x);
                x[n - 1] = (x[n - 1] - domain.interface) / eps;
                profile.boundary_field(&e_n, &x, out);
            }
            FacePolicy::Periodic => unreachable!(),
        }
    }
    (fixed, values)
}

/// Field equal to the `eps`-scaled profile across `{x_N = interface}`.
pub fn step_initial_field(domain: &DomainSpec, profile: &TransitionProfile, eps: f64, h: f64) -> Result<PhaseField> {
    check_eps(eps)?;
    let mesh = domain.mesh(h)?;
    let n = domain.dim();
    let d = profile.wells().dim();
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    let mut u = vec![0.0; mesh.node_count() * d];
    let mut x = vec![0.0; n];
    for i in 0..mesh.node_count() {
        mesh.node_coords(i, &mut x);
        x[n - 1] = (x[n - 1] - domain.interface) / eps;
        profile.boundary_field(&e_n, &x, &mut u[i * d..(i + 1) * d]);
    }
    Ok(PhaseField { eps, h, u, phase_dim: d })
}

/// Target value of the discrete integral `int u`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassConstraint {
    pub target: Vec<f64>,
}

impl MassConstraint {
    /// `int u = m a + (|Omega| - m) b`, with `m` the measure of the `a`-phase.
    pub fn from_phase_measure(m: f64, domain: &DomainSpec, profile: &TransitionProfile) -> Self {
        let vol = domain.volume();
        let w = profile.wells();
        Self { target: w.a().iter().zip(w.b()).map(|(a, b)| m * a + (vol - m) * b).collect() }
    }
}

struct MassProjection<'a> {
    fixed: &'a [bool],
    weights: Vec<f64>,
    free_weight: f64,
    free_weight_sq: f64,
    target: Vec<f64>,
    phase_dim: usize,
    max_drift: Cell<f64>,
}

impl<'a> MassProjection<'a> {
    fn new(mesh: &Mesh, fixed: &'a [bool], target: Vec<f64>, phase_dim: usize) -> Self {
        let weights = node_weights(mesh);
        let free = |f: &dyn Fn(f64) -> f64| weights.iter().zip(fixed).filter(|(_, &x)| !x).map(|(w, _)| f(*w)).sum::<f64>();
        let free_weight = free(&|w| w);
        let free_weight_sq = free(&|w| w * w);
        Self { fixed, weights, free_weight, free_weight_sq, target, phase_dim, max_drift: Cell::new(0.0) }
    }

    fn mass(&self, x: &[f64]) -> Vec<f64> {
        let d = self.phase_dim;
        let mut m = vec![0.0; d];
        for (i, w) in self.weights.iter().enumerate() {
            for j in 0..d {
                m[j] += w * x[i * d + j];
            }
        }
        m
    }

    fn drift(&self, x: &[f64]) -> f64 {
        self.mass(x).iter().zip(&self.target).fold(0.0f64, |a, (m, t)| a.max((m - t).abs()))
    }
}

impl Feasibility for MassProjection<'_> {
    fn project(&self, g: &mut [f64]) {
        let d = self.phase_dim;
        for j in 0..d {
            let mut s = 0.0;
            for (i, w) in self.weights.iter().enumerate() {
                if !self.fixed[i] {
                    s += w * g[i * d + j];
                }
            }
            let c = s / self.free_weight_sq;
            for (i, w) in self.weights.iter().enumerate() {
                if self.fixed[i] {
                    g[i * d + j] = 0.0;
                } else {
                    g[i * d + j] -= c * w;
                }
            }
        }
    }

    fn restore(&self, x: &mut [f64]) {
        let d = self.phase_dim;
        let m = self.mass(x);
        for j in 0..d {
            let c = (self.target[j] - m[j]) / self.free_weight;
            for (i, f) in self.fixed.iter().enumerate() {
                if !f {
                    x[i * d + j] += c;
                }
            }
        }
        self.max_drift.set(self.max_drift.get().max(self.drift(x)));
    }
}

/// Quadrature weights of the discrete integral: `h^N * (cells at node) / 2^N`.
pub fn node_weights(mesh: &Mesh) -> Vec<f64> {
    let n = mesh.dim();
    let vol = mesh.h().powi(n as i32);
    let mut w = vec![0.0; mesh.node_count()];
    let mut multi = vec![0usize; n];
    for (i, wi) in w.iter_mut().enumerate() {
        mesh.node_multi(i, &mut multi);
        let mut c = 1.0;
        for k in 0..n {
            let end = multi[k] == 0 || multi[k] + 1 == mesh.dims()[k];
            if !mesh.periodic()[k] && end {
                c *= 0.5;
            }
        }
        *wi = vol * c;
    }
    w
}

/// Discrete `int u` of a field.
pub fn mass_integral(domain: &DomainSpec, field: &PhaseField) -> Result<Vec<f64>> {
    let mesh = domain.mesh(field.h)?;
    let w = node_weights(&mesh);
    let d = field.phase_dim;
    Ok((0..d).map(|j| w.iter().enumerate().map(|(i, wi)| wi * field.u[i * d + j]).sum()).collect())
}

#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub field: PhaseField,
    pub energy: EnergyParts,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Final `int u` when a constraint was imposed.
    pub mass: Option<Vec<f64>>,
    /// Largest deviation from the mass target over all evaluated iterates.
    pub mass_drift: Option<f64>,
}

/// Descends `F_eps` from `init`; Dirichlet nodes are reset first.
pub fn minimize_f_eps(
    domain: &DomainSpec,
    pot: &Potential,
    profile: &TransitionProfile,
    init: PhaseField,
    constraint: Option<&MassConstraint>,
    opts: &SolverOptions,
) -> Result<FieldSolution> {
    check_eps(init.eps)?;
    if profile.wells() != pot.wells() {
        return Err(Error::InvalidArgument("profile and potential use different wells".into()));
    }
    let mesh = domain.mesh(init.h)?;
    let k = kernel(&mesh, domain, pot, init.eps);
    k.check(&init.u)?;
    let d = init.phase_dim;
    let (fixed, values) = boundary_data(domain, &mesh, profile, init.eps);
    let mut u = init.u;
    for (i, &f) in fixed.iter().enumerate() {
        if f {
            u[i * d..(i + 1) * d].copy_from_slice(&values[i * d..(i + 1) * d]);
        }
    }
    let lbfgs = opts.lbfgs(pot, mesh.node_count())?;
    let f = |x: &[f64], g: &mut [f64]| k.energy_and_gradient(x, g).total();
    let (report, mass, drift) = match constraint {
        None => {
            let report = minimize(&mut u, f, &crate::optimize::FixedMask { fixed: &fixed, phase_dim: d }, &lbfgs);
            (report, None, None)
        }
        Some(c) => {
            if c.target.len() != d {
                return Err(Error::ShapeMismatch { expected: d, actual: c.target.len() });
            }
            let proj = MassProjection::new(&mesh, &fixed, c.target.clone(), d);
            // the target must lie strictly between the pure-phase masses
            let w = profile.wells();
            let vol: f64 = proj.weights.iter().sum();
            let ab: Vec<f64> = w.b().iter().zip(w.a()).map(|(b, a)| b - a).collect();
            let ab2: f64 = ab.iter().map(|v| v * v).sum();
            let lam = c.target.iter().zip(w.a()).zip(&ab).map(|((t, a), e)| (t - vol * a) * e).sum::<f64>() / (vol * ab2);
            if !(lam > 0.0 && lam < 1.0) {
                return Err(Error::Precondition("mass target must lie strictly between the pure-phase masses".into()));
            }
            if proj.free_weight == 0.0 {
                return Err(Error::Precondition("mass constraint needs free nodes".into()));
            }
            proj.restore(&mut u);
            proj.max_drift.set(proj.drift(&u));
            let report = minimize(&mut u, f, &proj, &lbfgs);
            let drift = proj.max_drift.get().max(proj.drift(&u));
            (report, Some(proj.mass(&u)), Some(drift))
        }
    };
    let energy = k.energy(&u);
    Ok(FieldSolution {
        field: PhaseField { eps: init.eps, h: init.h, u, phase_dim: d },
        energy,
        iterations: report.iterations,
        residual: report.residual,
        converged: report.converged,
        mass,
        mass_drift: drift,
    })
}

/// Data for the recovery field.
#[derive(Debug, Clone)]
pub struct RecoveryParams<'a> {
    pub cell: &'a CellSolution,
    pub grid: &'a CellGrid,
    pub eps: f64,
    /// A point on the interface plane.
    pub center: Vec<f64>,
}

impl RecoveryParams<'_> {
    /// Shift `s` with `R(s - center/eps)` integral, reduced into `[0, lambda)^N`.
    pub fn lattice_shift(&self) -> Result<Vec<f64>> {
        let lam = self
            .grid
            .rotation()
            .period_u64()
            .ok_or_else(|| Error::Precondition("lattice period too large".into()))? as f64;
        Ok(self.center.iter().map(|c| {
            let z = c / self.eps;
            let s = z - lam * (z / lam).floor();
            // snap round-off next to a lattice point
            if (s - lam).abs() < 1e-9 || s.abs() < 1e-9 { 0.0 } else { s }
        }).collect())
    }
}

/// The cell solution rescaled by `eps`, centred at the interface point and
/// extended periodically along the interface; `a`/`b` outside the layer.
pub fn build_recovery(params: &RecoveryParams, domain: &DomainSpec, h: f64, profile: &TransitionProfile) -> Result<PhaseField> {
    check_eps(params.eps)?;
    let n = domain.dim();
    let eps = params.eps;
    let t = params.grid.t();
    if params.grid.dim() != n || params.center.len() != n {
        return Err(Error::ShapeMismatch { expected: n, actual: params.grid.dim() });
    }
    if domain.rotation.as_ref().unwrap_or(&RationalRotation::identity(n)) != params.grid.rotation() {
        return Err(Error::InvalidArgument("cell and domain rotations differ".into()));
    }
    let lam = params.grid.rotation().period_u64().unwrap_or(0) as f64;
    if lam == 0.0 || ((t / lam).round() * lam - t).abs() > 1e-9 * t {
        return Err(Error::Precondition(format!("cell edge {t} is not a multiple of the lattice period")));
    }
    let s = params.lattice_shift()?;
    let lo = params.center[n - 1] + eps * (-t / 2.0 - s[n - 1]);
    let hi = params.center[n - 1] + eps * (t / 2.0 - s[n - 1]);
    if lo < domain.lower[n - 1] - 1e-12 || hi > domain.upper[n - 1] + 1e-12 {
        return Err(Error::Precondition("recovery layer exceeds the domain".into()));
    }
    for k in 0..n - 1 {
        if domain.faces[k].0 == FacePolicy::Periodic {
            let reps = (domain.upper[k] - domain.lower[k]) / (eps * t);
            if (reps - reps.round()).abs() > 1e-9 {
                return Err(Error::GridIncompatible(format!("periodic extent on axis {k} is not a multiple of eps*T")));
            }
        }
    }
    let mesh = domain.mesh(h)?;
    let d = params.cell.state.phase_dim;
    let w = profile.wells();
    let mut u = vec![0.0; mesh.node_count() * d];
    let mut x = vec![0.0; n];
    let mut xi = vec![0.0; n];
    for i in 0..mesh.node_count() {
        mesh.node_coords(i, &mut x);
        for k in 0..n {
            xi[k] = (x[k] - params.center[k]) / eps + s[k];
        }
        let out = &mut u[i * d..(i + 1) * d];
        if xi[n - 1] <= -t / 2.0 {
            out.copy_from_slice(w.a());
        } else if xi[n - 1] >= t / 2.0 {
            out.copy_from_slice(w.b());
        } else {
            for k in 0..n - 1 {
                xi[k] = (xi[k] + t / 2.0).rem_euclid(t) - t / 2.0;
            }
            params.grid.mesh().interpolate(&params.cell.state.u, d, &xi, out);
        }
    }
    Ok(PhaseField { eps, h, u, phase_dim: d })
}

/// Parameters of the flat-interface gap study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaSetup {
    /// Strip length along the interface.
    pub length: f64,
    /// Edge of the cell used for the recovery field.
    pub cell_t: f64,
    /// Grid nodes per unit of the rescaled variable `x/eps`.
    pub nodes_per_eps: usize,
    pub solver: SolverOptions,
}

impl Default for GammaSetup {
    fn default() -> Self {
        Self { length: 1.0, cell_t: 4.0, nodes_per_eps: 8, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub eps: f64,
    pub min_energy: f64,
    pub recovery_energy: f64,
    pub sigma_target: f64,
    /// `min_energy - sigma_target * length`.
    pub gap_min: f64,
    pub gap_recovery: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub cell: CellResult,
    pub rows: Vec<GammaRow>,
}

/// For each `eps`, minimizes `F_eps` on the flat strip with normal `nu`
/// warm-started at the recovery field and compares with `sigma * length`.
pub fn gamma_gap(
    nu: &RationalUnitVector,
    eps_schedule: &[f64],
    pot: &Potential,
    profile: &TransitionProfile,
    sigma_hat: f64,
    setup: &GammaSetup,
) -> Result<GammaTable> {
    if nu.dim() != 2 {
        return Err(Error::InvalidArgument("the strip study is two-dimensional".into()));
    }
    if eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("empty eps schedule".into()));
    }
    let rotation = rotation_from_direction(nu);
    let h_cell = 1.0 / setup.nodes_per_eps as f64;
    let grid = CellGrid::new(2, setup.cell_t, h_cell, rotation.clone())?;
    let cell = minimize_cell(&grid, pot, profile, &setup.solver)?;
    if !cell.result.converged {
        return Err(Error::NotConverged { iterations: cell.result.iterations, residual: cell.result.residual });
    }
    let domain = DomainSpec::flat_strip(setup.length).with_rotation(rotation);
    let target = sigma_hat * domain.cross_section();
    let mut rows = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let h = eps * h_cell;
        let params = RecoveryParams { cell: &cell, grid: &grid, eps, center: vec![0.0, 0.0] };
        let rec = build_recovery(&params, &domain, h, profile)?;
        let recovery_energy = eval_f_eps(&domain, pot, &rec)?.total();
        let sol = minimize_f_eps(&domain, pot, profile, rec, None, &setup.solver)?;
        if !sol.converged {
            return Err(Error::NotConverged { iterations: sol.iterations, residual: sol.residual });
        }
        let min_energy = sol.energy.total();
        rows.push(GammaRow {
            eps,
            min_energy,
            recovery_energy,
            sigma_target: sigma_hat,
            gap_min: min_energy - target,
            gap_recovery: recovery_energy - target,
            iterations: sol.iterations,
            converged: sol.converged,
        });
    }
    Ok(GammaTable { cell: cell.result, rows })
}
