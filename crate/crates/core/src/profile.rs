//! Mollified step profiles used as Dirichlet data and initial guesses.
//!
//! The step `u0(y) = a if y.nu <= 0, b otherwise` depends on `y.nu` only, so
//! its convolution with a radial mollifier reduces to the one-dimensional
//! cumulative distribution of the mollifier's marginal along `nu`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::WellPair;
use crate::quadrature::GaussLegendre;

/// Radial profile of the mollifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierShape {
    /// `exp(-1 / (1 - |x|^2 / r^2))`, smooth.
    Bump,
    /// `(1 - |x|^2 / r^2)^3`, a C^2 cutoff.
    Polynomial,
}

impl MollifierShape {
    fn radial(self, x2: f64) -> f64 {
        if x2 >= 1.0 {
            return 0.0;
        }
        match self {
            MollifierShape::Bump => (-1.0 / (1.0 - x2)).exp(),
            MollifierShape::Polynomial => {
                let s = 1.0 - x2;
                s * s * s
            }
        }
    }
}

/// Even, compactly supported mollifier on `R^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub shape: MollifierShape,
    pub radius: f64,
    pub dim: usize,
}

impl Mollifier {
    pub fn new(shape: MollifierShape, radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::InvalidArgument(format!("mollifier radius must lie in (0, 1], got {radius}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("mollifier dimension must be 1, 2 or 3, got {dim}")));
        }
        Ok(Self { shape, radius, dim })
    }

    /// Default bump with support radius 1/2.
    pub fn bump(dim: usize) -> Self {
        Self { shape: MollifierShape::Bump, radius: 0.5, dim }
    }

    /// Unnormalised marginal `int rho(t, z) dz` over the orthogonal complement.
    fn raw_marginal(&self, t: f64, inner: &GaussLegendre) -> f64 {
        let r = self.radius;
        let reach2 = r * r - t * t;
        if reach2 <= 0.0 {
            return 0.0;
        }
        let shape = self.shape;
        let radial = |s: f64| shape.radial((t * t + s * s) / (r * r));
        match self.dim {
            1 => radial(0.0),
            2 => 2.0 * inner.integrate(0.0, reach2.sqrt(), 8, radial),
            _ => 2.0 * std::f64::consts::PI * inner.integrate(0.0, reach2.sqrt(), 8, |s| s * radial(s)),
        }
    }
}

const HALF_TABLE: usize = 2048;

/// Tabulated CDF of the normalised marginal on `[-r, 0]` with exact derivatives.
#[derive(Debug)]
struct CdfTable {
    radius: f64,
    step: f64,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl CdfTable {
    fn build(m: &Mollifier) -> Self {
        let gl = GaussLegendre::new(8);
        let r = m.radius;
        let step = r / HALF_TABLE as f64;
        let mut raw_density = Vec::with_capacity(HALF_TABLE + 1);
        let mut raw_cdf = Vec::with_capacity(HALF_TABLE + 1);
        let mut acc = 0.0;
        for j in 0..=HALF_TABLE {
            let s = -r + j as f64 * step;
            if j > 0 {
                let lo = s - step;
                acc += gl.integrate(lo, s, 1, |t| m.raw_marginal(t, &gl));
            }
            raw_cdf.push(acc);
            raw_density.push(m.raw_marginal(s, &gl));
        }
        let total = 2.0 * acc;
        let cdf = raw_cdf.iter().map(|v| v / total).collect();
        let density = raw_density.iter().map(|v| v / total).collect();
        Self { radius: r, step, cdf, density }
    }

    /// Normalised CDF at `s`, for `-r < s < 0`.
    fn eval_negative(&self, s: f64) -> f64 {
        let x = (s + self.radius) / self.step;
        let j = (x.floor() as usize).min(HALF_TABLE - 1);
        let t = x - j as f64;
        let (y0, y1) = (self.cdf[j], self.cdf[j + 1]);
        let (d0, d1) = (self.density[j] * self.step, self.density[j + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    fn cdf(&self, s: f64) -> f64 {
        if s <= -self.radius {
            0.0
        } else if s >= self.radius {
            1.0
        } else if s < 0.0 {
            self.eval_negative(s)
        } else if s == 0.0 {
            0.5
        } else {
            1.0 - self.eval_negative(-s)
        }
    }

    fn density(&self, s: f64) -> f64 {
        let s = -s.abs();
        if s <= -self.radius {
            return 0.0;
        }
        let x = (s + self.radius) / self.step;
        let j = (x.floor() as usize).min(HALF_TABLE - 1);
        let t = x - j as f64;
        self.density[j] * (1.0 - t) + self.density[j + 1] * t
    }
}

/// The transition `rho_T * u0` along a direction, `T` being the scale.
#[derive(Debug, Clone)]
pub struct TransitionProfile {
    wells: WellPair,
    mollifier: Mollifier,
    scale: f64,
    table: Arc<CdfTable>,
}

impl TransitionProfile {
    pub fn new(wells: WellPair, mollifier: Mollifier) -> Self {
        let table = Arc::new(CdfTable::build(&mollifier));
        Self { wells, mollifier, scale: 1.0, table }
    }

    /// Same tabulation at a different scale `T` (support `[-r/T, r/T]`).
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!("profile scale must be positive, got {scale}")));
        }
        Ok(Self { scale, ..self.clone() })
    }

    pub fn wells(&self) -> &WellPair {
        &self.wells
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Half-width of the transition, `r / T`.
    pub fn half_width(&self) -> f64 {
        self.mollifier.radius / self.scale
    }

    /// Fraction of the way from `a` to `b` at signed distance `s`.
    pub fn fraction(&self, s: f64) -> f64 {
        self.table.cdf(self.scale * s)
    }

    /// Density of the one-dimensional marginal at scale 1.
    pub fn marginal_density(&self, s: f64) -> f64 {
        self.table.density(s)
    }

    /// `(rho_T * u0)(s nu)` written into `out`.
    pub fn mollified_step(&self, s: f64, out: &mut [f64]) {
        let t = self.fraction(s);
        if t == 0.0 {
            out.copy_from_slice(self.wells.a());
        } else if t == 1.0 {
            out.copy_from_slice(self.wells.b());
        } else {
            self.wells.lerp(t, out);
        }
    }

    pub fn mollified_step_vec(&self, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.wells.dim()];
        self.mollified_step(s, &mut v);
        v
    }

    /// Dirichlet data of the cell problem: the scale-1 transition at `y.nu`.
    pub fn boundary_field(&self, nu: &[f64], y: &[f64], out: &mut [f64]) {
        let s: f64 = nu.iter().zip(y).map(|(a, b)| a * b).sum();
        let t = self.table.cdf(s);
        if t == 0.0 {
            out.copy_from_slice(self.wells.a());
        } else if t == 1.0 {
            out.copy_from_slice(self.wells.b());
        } else {
            self.wells.lerp(t, out);
        }
    }
}

/// The sharp step `a` on `{y.nu <= 0}`, `b` elsewhere.
pub fn step_field<'a>(wells: &'a WellPair, nu: &[f64], y: &[f64]) -> &'a [f64] {
    let s: f64 = nu.iter().zip(y).map(|(a, b)| a * b).sum();
    if s <= 0.0 {
        wells.a()
    } else {
        wells.b()
    }
}
