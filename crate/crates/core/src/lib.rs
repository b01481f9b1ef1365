//! Numerical homogenization of surface tension for periodic phase-field
//! energies.
//!
//! The central object is the cell problem on a rotated cube, whose rescaled
//! minimum energy converges to the anisotropic surface tension `sigma(nu)`.

pub mod cell;
pub mod error;
pub mod gamma;
pub mod lattice;
pub mod mesh;
pub mod optimize;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod surface;
pub mod tiling;

pub use error::{Error, Result};
pub use lattice::{rationalize_direction, rotation_from_direction, RationalRotation, RationalUnitVector};
pub use mesh::{EnergyParts, Mesh};
pub use potential::{DoubleWell, GrowthCertificate, Modulation, Potential, WellPair};
pub use profile::{Mollifier, MollifierShape, TransitionProfile};
pub use cell::{
    assemble_energy, assemble_gradient, estimate_g, estimate_sigma, minimize_cell, CellGrid, CellResult, CellSolution,
    CellState, GEstimate, SigmaEstimate, SigmaOptions, SolverOptions,
};
pub use gamma::{gamma_gap, DomainSpec, FacePolicy, GammaRow, GammaSetup, PhaseField};
pub use surface::{convexity_check, eval_f0, PolyInterface, SigmaEntry, SigmaTable};
pub use tiling::{plan_tiling, subadditivity_gap, SubadditivityReport, TilingPlan};
