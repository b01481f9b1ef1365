//! Periodic double-well energy densities.
//!
//! Every built-in density is separable, `W(y, p) = f(y) * W0(p)`: a
//! Q-periodic spatial modulation `f >= f_min > 0` multiplying the base well
//! `W0(p) = k |p - a|^2 |p - b|^2`, normalised so that `W0(p) = (1 - p^2)^2`
//! for the scalar wells `-1, 1`.
//!
//! Hypothesis checks run through the [`DoubleWell`] trait so that arbitrary
//! (including deliberately broken) densities can be audited.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two phases of the double well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPair {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl WellPair {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "wells must be nonempty vectors of equal length, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a == b {
            return Err(Error::InvalidArgument("wells a and b coincide".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("wells must be finite".into()));
        }
        Ok(Self { a, b })
    }

    /// Scalar wells `-1, 1`.
    pub fn scalar() -> Self {
        Self { a: vec![-1.0], b: vec![1.0] }
    }

    /// Planar wells `(-1, 0)` and `(1, 0)`.
    pub fn planar() -> Self {
        Self { a: vec![-1.0, 0.0], b: vec![1.0, 0.0] }
    }

    /// Standard wells for phase dimension 1 or 2.
    pub fn standard(phase_dim: usize) -> Result<Self> {
        match phase_dim {
            1 => Ok(Self::scalar()),
            2 => Ok(Self::planar()),
            d => Err(Error::InvalidArgument(format!("no standard wells for phase dimension {d}"))),
        }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `|b - a|`.
    pub fn separation(&self) -> f64 {
        dist(&self.a, &self.b)
    }

    /// `(1 - t) a + t b`.
    pub fn lerp(&self, t: f64, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&self.a).zip(&self.b) {
            *o = a + t * (b - a);
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        self.lerp(0.5, &mut m);
        m
    }
}

/// Constants of the two-sided growth bound `|p|^q / C - C <= W <= C (1 + |p|^q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    c: f64,
    q: f64,
}

impl GrowthCertificate {
    pub fn new(c: f64, q: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("growth constant C must be positive, got {c}")));
        }
        if !(q >= 2.0) || !q.is_finite() {
            return Err(Error::InvalidArgument(format!("growth exponent q must be >= 2, got {q}")));
        }
        Ok(Self { c, q })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Spatial modulation of the base well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Modulation {
    HomogeneousQuartic,
    /// `1 + alpha cos(2 pi y_axis)`.
    Striped { alpha: f64, axis: usize },
    /// Cells of side 1/2; factor `contrast` where the sum of the half-cell
    /// indices is even, 1 elsewhere.
    Checkerboard { contrast: f64 },
    /// Regular partition of Q into `divisions[k]` slabs along axis `k`
    /// (axes past `divisions.len()` are undivided), factors in lexicographic
    /// cell order with axis 0 fastest.
    PiecewiseCells { divisions: Vec<usize>, factors: Vec<f64> },
    /// `1 + alpha prod_k cos(2 pi y_k)`.
    SmoothModulated { alpha: f64 },
}

impl Modulation {
    fn validate(&self) -> Result<()> {
        match self {
            Modulation::HomogeneousQuartic => Ok(()),
            Modulation::Striped { alpha, .. } | Modulation::SmoothModulated { alpha } => {
                if (0.0..1.0).contains(alpha) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("amplitude alpha must lie in [0,1), got {alpha}")))
                }
            }
            Modulation::Checkerboard { contrast } => {
                if *contrast > 0.0 && contrast.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("contrast must be positive, got {contrast}")))
                }
            }
            Modulation::PiecewiseCells { divisions, factors } => {
                if divisions.is_empty() || divisions.iter().any(|&d| d == 0) {
                    return Err(Error::InvalidArgument("divisions must be positive".into()));
                }
                let cells: usize = divisions.iter().product();
                if cells != factors.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} factors given for {} cells",
                        factors.len(),
                        cells
                    )));
                }
                if factors.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
                    return Err(Error::InvalidArgument("cell factors must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Spatial factor at `y`; the argument is reduced modulo the unit cube.
    pub fn factor(&self, y: &[f64]) -> f64 {
        match self {
            Modulation::HomogeneousQuartic => 1.0,
            Modulation::Striped { alpha, axis } => {
                let t = y.get(*axis).copied().map(unit_frac).unwrap_or(0.0);
                1.0 + alpha * (2.0 * PI * t).cos()
            }
            Modulation::Checkerboard { contrast } => {
                let parity: usize = y.iter().map(|&v| cell_index(unit_frac(v), 2)).sum();
                if parity % 2 == 0 {
                    *contrast
                } else {
                    1.0
                }
            }
            Modulation::PiecewiseCells { divisions, factors } => {
                let mut index = 0;
                let mut stride = 1;
                for (k, &m) in divisions.iter().enumerate() {
                    let i = y.get(k).map(|&v| cell_index(unit_frac(v), m)).unwrap_or(0);
                    index += i * stride;
                    stride *= m;
                }
                factors[index]
            }
            Modulation::SmoothModulated { alpha } => {
                let prod: f64 = y.iter().map(|&v| (2.0 * PI * unit_frac(v)).cos()).product();
                1.0 + alpha * prod
            }
        }
    }

    /// Infimum of the spatial factor over the unit cube.
    pub fn min_factor(&self) -> f64 {
        match self {
            Modulation::HomogeneousQuartic => 1.0,
            Modulation::Striped { alpha, .. } | Modulation::SmoothModulated { alpha } => 1.0 - alpha,
            Modulation::Checkerboard { contrast } => contrast.min(1.0),
            Modulation::PiecewiseCells { factors, .. } => factors.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Supremum of the spatial factor over the unit cube.
    pub fn max_factor(&self) -> f64 {
        match self {
            Modulation::HomogeneousQuartic => 1.0,
            Modulation::Striped { alpha, .. } | Modulation::SmoothModulated { alpha } => 1.0 + alpha,
            Modulation::Checkerboard { contrast } => contrast.max(1.0),
            Modulation::PiecewiseCells { factors, .. } => factors.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Piecewise-constant kinds are periodic bit-for-bit.
    pub fn is_piecewise(&self) -> bool {
        matches!(
            self,
            Modulation::HomogeneousQuartic | Modulation::Checkerboard { .. } | Modulation::PiecewiseCells { .. }
        )
    }

    pub fn is_homogeneous(&self) -> bool {
        match self {
            Modulation::HomogeneousQuartic => true,
            Modulation::Striped { alpha, .. } | Modulation::SmoothModulated { alpha } => *alpha == 0.0,
            Modulation::Checkerboard { contrast } => *contrast == 1.0,
            Modulation::PiecewiseCells { factors, .. } => factors.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Modulation::HomogeneousQuartic => "homogeneous-quartic",
            Modulation::Striped { .. } => "striped",
            Modulation::Checkerboard { .. } => "checkerboard",
            Modulation::PiecewiseCells { .. } => "piecewise-cells",
            Modulation::SmoothModulated { .. } => "smooth-modulated",
        }
    }
}

fn unit_frac(v: f64) -> f64 {
    v - v.floor()
}

fn cell_index(frac: f64, m: usize) -> usize {
    ((frac * m as f64) as usize).min(m - 1)
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist2(x, y).sqrt()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Base well `W0(p) = k |p-a|^2 |p-b|^2` with `k = 16 / |b-a|^4`.
#[derive(Debug, Clone, PartialEq)]
struct BaseWell {
    wells: WellPair,
    scale: f64,
}

impl BaseWell {
    fn new(wells: WellPair) -> Self {
        let s = wells.separation();
        Self { scale: 16.0 / (s * s * s * s), wells }
    }

    #[inline]
    fn eval(&self, p: &[f64]) -> f64 {
        self.scale * dist2(p, self.wells.a()) * dist2(p, self.wells.b())
    }

    #[inline]
    fn eval_dp(&self, p: &[f64], out: &mut [f64]) {
        let da = dist2(p, self.wells.a());
        let db = dist2(p, self.wells.b());
        for (k, o) in out.iter_mut().enumerate() {
            *o = 2.0 * self.scale * ((p[k] - self.wells.a[k]) * db + (p[k] - self.wells.b[k]) * da);
        }
    }
}

/// A Q-periodic double-well density `f(y) W0(p)` with its growth certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    modulation: Modulation,
    base: BaseWell,
    growth: GrowthCertificate,
}

impl Potential {
    /// Builds a potential; `growth = None` picks `C = max(4, 2 f_max, 2 / f_min)`, `q = 4`,
    /// which is a valid certificate for the standard wells.
    pub fn new(modulation: Modulation, wells: WellPair, growth: Option<GrowthCertificate>) -> Result<Self> {
        modulation.validate()?;
        let growth = match growth {
            Some(g) => g,
            None => {
                let c = 4f64.max(2.0 * modulation.max_factor()).max(2.0 / modulation.min_factor());
                GrowthCertificate::new(c, 4.0)?
            }
        };
        Ok(Self { modulation, base: BaseWell::new(wells), growth })
    }

    /// `(1 - p^2)^2` with scalar wells `-1, 1`.
    pub fn homogeneous_quartic() -> Self {
        Self::new(Modulation::HomogeneousQuartic, WellPair::scalar(), None).expect("valid")
    }

    /// `(1 + alpha cos(2 pi y_1)) (1 - p^2)^2`.
    pub fn striped(alpha: f64) -> Result<Self> {
        Self::new(Modulation::Striped { alpha, axis: 0 }, WellPair::scalar(), None)
    }

    /// Checkerboard with factor `contrast` on the black half-cells.
    pub fn checkerboard(contrast: f64) -> Result<Self> {
        Self::new(Modulation::Checkerboard { contrast }, WellPair::scalar(), None)
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    pub fn wells(&self) -> &WellPair {
        &self.base.wells
    }

    pub fn growth(&self) -> GrowthCertificate {
        self.growth
    }

    pub fn phase_dim(&self) -> usize {
        self.base.wells.dim()
    }

    /// `W(y, p)`.
    #[inline]
    pub fn eval(&self, y: &[f64], p: &[f64]) -> f64 {
        self.modulation.factor(y) * self.base.eval(p)
    }

    /// `dW/dp (y, p)` written into `out` (length d).
    pub fn eval_dp(&self, y: &[f64], p: &[f64], out: &mut [f64]) {
        self.base.eval_dp(p, out);
        let f = self.modulation.factor(y);
        out.iter_mut().for_each(|o| *o *= f);
    }

    /// Spatial factor `f(y)`; used by the grid kernels to cache the modulation.
    #[inline]
    pub fn factor(&self, y: &[f64]) -> f64 {
        self.modulation.factor(y)
    }

    /// Base well `W0(p)`.
    #[inline]
    pub fn base(&self, p: &[f64]) -> f64 {
        self.base.eval(p)
    }

    #[inline]
    pub fn base_dp(&self, p: &[f64], out: &mut [f64]) {
        self.base.eval_dp(p, out)
    }

    pub fn lower_envelope(&self) -> LowerEnvelope {
        LowerEnvelope { factor: self.modulation.min_factor(), base: self.base.clone() }
    }

    /// The homogeneous potential `W~` as a `Potential` (same wells and growth).
    pub fn envelope_potential(&self) -> Potential {
        let f = self.modulation.min_factor();
        let modulation = if f == 1.0 {
            Modulation::HomogeneousQuartic
        } else {
            Modulation::PiecewiseCells { divisions: vec![1], factors: vec![f] }
        };
        Potential { modulation, base: self.base.clone(), growth: self.growth }
    }
}

/// Homogeneous lower envelope `W~(p) = f_min W0(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerEnvelope {
    factor: f64,
    base: BaseWell,
}

impl LowerEnvelope {
    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.factor * self.base.eval(p)
    }
}

/// Interface used by the hypothesis validators.
pub trait DoubleWell: Sync {
    fn wells(&self) -> &WellPair;
    fn eval(&self, y: &[f64], p: &[f64]) -> f64;
    fn envelope(&self, p: &[f64]) -> f64;
    fn growth(&self) -> GrowthCertificate;
    /// Whether unit-cube periodicity holds bit-for-bit.
    fn exact_periodic(&self) -> bool;
}

impl DoubleWell for Potential {
    fn wells(&self) -> &WellPair {
        Potential::wells(self)
    }

    fn eval(&self, y: &[f64], p: &[f64]) -> f64 {
        Potential::eval(self, y, p)
    }

    fn envelope(&self, p: &[f64]) -> f64 {
        self.lower_envelope().eval(p)
    }

    fn growth(&self) -> GrowthCertificate {
        self.growth
    }

    fn exact_periodic(&self) -> bool {
        self.modulation.is_piecewise()
    }
}

/// Identifiers of the structural hypotheses on `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
    H2,
    H3,
    H4,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H0 => "H0 (periodicity)",
            Hypothesis::H1 => "H1 (continuity in p)",
            Hypothesis::H2 => "H2 (zero set is {a,b})",
            Hypothesis::H3 => "H3 (lower envelope)",
            Hypothesis::H4 => "H4 (growth)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    pub samples: usize,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<Hypothesis> {
        self.checks.iter().find(|c| !c.passed).map(|c| c.hypothesis)
    }

    pub fn get(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }
}

struct Tally {
    hypothesis: Hypothesis,
    samples: usize,
    violation: Option<String>,
}

impl Tally {
    fn new(hypothesis: Hypothesis) -> Self {
        Self { hypothesis, samples: 0, violation: None }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok && self.violation.is_none() {
            self.violation = Some(detail());
        }
    }

    fn finish(self) -> HypothesisCheck {
        HypothesisCheck {
            hypothesis: self.hypothesis,
            passed: self.violation.is_none(),
            samples: self.samples,
            violation: self.violation,
        }
    }
}

const ZERO_TOL: f64 = 1e-10;
const WELL_RADIUS: f64 = 1e-4;

/// Samples `(y, p)` pseudo-randomly in `dim` spatial dimensions and checks
/// the hypotheses H0-H4 pointwise.
///
/// Phase samples mix uniform draws from a box around the wells with a fixed
/// probe set: both wells, points along the segment through them and small
/// perturbations of the wells.
pub fn validate_hypotheses(pot: &dyn DoubleWell, dim: usize, sample_count: usize, seed: u64) -> Result<HypothesisReport> {
    if sample_count == 0 {
        return Err(Error::Precondition("sample_count must be positive".into()));
    }
    if dim == 0 {
        return Err(Error::Precondition("spatial dimension must be positive".into()));
    }
    let wells = pot.wells().clone();
    let d = wells.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for k in 0..d {
        lo[k] = wells.a()[k].min(wells.b()[k]) - 2.0;
        hi[k] = wells.a()[k].max(wells.b()[k]) + 2.0;
    }

    let mut probes: Vec<Vec<f64>> = vec![wells.a().to_vec(), wells.b().to_vec()];
    for i in 0..=40 {
        let mut p = vec![0.0; d];
        wells.lerp(-1.0 + 3.0 * i as f64 / 40.0, &mut p);
        probes.push(p);
    }
    for w in [wells.a(), wells.b()] {
        for k in 0..d {
            for s in [-1e-3, 1e-3] {
                let mut p = w.to_vec();
                p[k] += s;
                probes.push(p);
            }
        }
    }

    let mut h0 = Tally::new(Hypothesis::H0);
    let mut h1 = Tally::new(Hypothesis::H1);
    let mut h2 = Tally::new(Hypothesis::H2);
    let mut h3 = Tally::new(Hypothesis::H3);
    let mut h4 = Tally::new(Hypothesis::H4);
    let growth = pot.growth();
    let exact = pot.exact_periodic();

    let mut y = vec![0.0; dim];
    let mut ys = vec![0.0; dim];
    let total = sample_count.max(probes.len());
    for s in 0..total {
        for v in y.iter_mut() {
            *v = rng.gen_range(-3.0..3.0);
        }
        let p: Vec<f64> = if s < probes.len() {
            probes[s].clone()
        } else {
            (0..d).map(|k| rng.gen_range(lo[k]..hi[k])).collect()
        };
        let w = pot.eval(&y, &p);

        // H0
        let i = rng.gen_range(0..dim);
        ys.copy_from_slice(&y);
        ys[i] += 1.0;
        let ws = pot.eval(&ys, &p);
        let ok = if exact { ws == w } else { (ws - w).abs() <= 1e-14 * w.abs().max(1.0) };
        h0.record(ok, || format!("W(y+e_{i}, p) = {ws:e} != W(y, p) = {w:e} at y={y:?}, p={p:?}"));

        // H1: finite and continuous in p at scale 1e-7
        let mut pd = p.clone();
        pd[0] += 1e-7;
        let wd = pot.eval(&y, &pd);
        let ok = w.is_finite() && wd.is_finite() && (wd - w).abs() <= 1e-4 * (1.0 + w.abs());
        h1.record(ok, || format!("jump {:e} under a 1e-7 perturbation at y={y:?}, p={p:?}", wd - w));

        // H2: W >= 0, W=0 on the wells, small W only near the wells
        let da = dist(&p, wells.a());
        let db = dist(&p, wells.b());
        let near = da.min(db) < WELL_RADIUS;
        let ok = w >= 0.0 && (w >= ZERO_TOL || near);
        h2.record(ok, || format!("W = {w:e} at p={p:?} away from the wells (y={y:?})"));
        for well in [wells.a(), wells.b()] {
            let ww = pot.eval(&y, well);
            h2.record(ww.abs() <= 1e-14, || format!("W(y, well) = {ww:e} at y={y:?}"));
        }

        // H3
        let env = pot.envelope(&p);
        let ok = env >= 0.0 && env <= w * (1.0 + 1e-15) + 1e-300;
        h3.record(ok, || format!("envelope {env:e} exceeds W = {w:e} at y={y:?}, p={p:?}"));
        if !near {
            h3.record(env > 0.0, || format!("envelope vanishes at p={p:?} away from the wells"));
        }

        // H4
        let pq = norm(&p).powf(growth.q());
        let lower = pq / growth.c() - growth.c();
        let upper = growth.c() * (1.0 + pq);
        let ok = lower <= w && w <= upper;
        h4.record(ok, || format!("{lower:e} <= W = {w:e} <= {upper:e} fails at p={p:?}"));
    }

    Ok(HypothesisReport { checks: vec![h0.finish(), h1.finish(), h2.finish(), h3.finish(), h4.finish()] })
}
