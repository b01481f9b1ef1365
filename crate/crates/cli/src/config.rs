//! Run configuration: a TOML document with fixed sections, parsed strictly.
//!
//! The grammar is documented in `docs/config.md`. Unknown sections and keys
//! are rejected; semantic errors carry the line and column of the offending
//! key.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};
use sigmacell::cell::check_schedule;
use sigmacell::{
    rationalize_direction, rotation_from_direction, GammaSetup, GrowthCertificate, Modulation, Mollifier, MollifierShape,
    Potential, RationalUnitVector, SolverOptions, TransitionProfile, WellPair,
};

/// A config problem located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    /// Dotted key name, empty when the error is not tied to a key.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: ", self.path, self.line, self.column)?;
        if !self.key.is_empty() {
            write!(f, "key `{}`: ", self.key)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A number written as a TOML float, integer, or a string `"p/q"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar(pub f64);

fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().ok()?;
            let q: f64 = q.trim().parse().ok()?;
            (q != 0.0).then(|| p / q)
        }
        None => s.parse().ok(),
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Scalar;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a fraction string such as \"1/32\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
                Ok(Scalar(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
                Ok(Scalar(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
                Ok(Scalar(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
                parse_fraction(v).map(Scalar).ok_or_else(|| E::custom(format!("`{v}` is not a number")))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    potential: RawPotential,
    #[serde(default)]
    mollifier: RawMollifier,
    #[serde(default)]
    directions: RawDirections,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    gamma: RawGamma,
    #[serde(default)]
    tile: RawTile,
    #[serde(default)]
    polar: RawPolar,
    #[serde(default)]
    validate: RawValidate,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    alpha: Option<Scalar>,
    axis: Option<usize>,
    contrast: Option<Scalar>,
    divisions: Option<Vec<usize>>,
    factors: Option<Vec<Scalar>>,
    wells: Option<RawWells>,
    growth: Option<RawGrowth>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWells {
    a: Vec<Scalar>,
    b: Vec<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    c: Scalar,
    q: Scalar,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMollifier {
    shape: Option<MollifierShape>,
    radius: Option<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirections {
    #[serde(default)]
    rational: Vec<String>,
    #[serde(default)]
    real: Vec<Vec<Scalar>>,
    tol: Option<Scalar>,
    angles: Option<usize>,
    aligned: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(default)]
    t: Vec<Scalar>,
    fit: Option<Fit>,
    h: Option<Scalar>,
    #[serde(default)]
    eps: Vec<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<Scalar>,
    max_iterations: Option<usize>,
    memory: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    direction: Option<String>,
    length: Option<Scalar>,
    cell_t: Option<Scalar>,
    nodes_per_eps: Option<usize>,
    sigma: Option<Scalar>,
    mass_height: Option<Scalar>,
    mass_eps: Option<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTile {
    t: Option<Scalar>,
    s: Option<Scalar>,
    m: Option<usize>,
    h: Option<Scalar>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolar {
    table: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    samples: Option<usize>,
}

/// How `schedule.t` is matched to the lattice period of each direction in an
/// aligned run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fit {
    /// Every `T` must already be a multiple of the period.
    #[default]
    Strict,
    /// Each `T` is rounded up to the next multiple; repeats are dropped.
    RoundUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub t: Vec<f64>,
    pub fit: Fit,
    pub h: f64,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaConfig {
    pub direction: RationalUnitVector,
    pub setup: GammaSetup,
    /// Target surface tension; `None` only when no closed form is known.
    pub sigma: Option<f64>,
    pub mass_height: Option<f64>,
    pub mass_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileConfig {
    pub t: f64,
    pub s: f64,
    pub m: usize,
    pub h: f64,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub path: PathBuf,
    pub source: String,
    pub potential: Potential,
    pub profile: TransitionProfile,
    pub dim: usize,
    pub directions: Vec<RationalUnitVector>,
    pub aligned: bool,
    pub schedule: Schedule,
    pub solver: SolverOptions,
    pub workers: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub gamma: GammaConfig,
    pub tile: TileConfig,
    pub polar_table: Option<PathBuf>,
    pub samples: usize,
    locations: Locator,
}

/// Maps `section.key` to a position in the source.
#[derive(Debug, Clone)]
struct Locator {
    path: String,
    lines: Vec<(usize, String)>,
}

impl Locator {
    fn new(path: &str, src: &str) -> Self {
        Self { path: path.to_string(), lines: src.lines().map(str::to_string).enumerate().collect() }
    }

    fn find(&self, section: &str, key: &str) -> (usize, usize) {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in &self.lines {
            let line = raw.trim_start();
            let indent = raw.len() - line.len();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.split(']').next().unwrap_or("").trim().to_string();
                if current == section {
                    header = Some((i + 1, indent + 1));
                }
                continue;
            }
            if current == section && !key.is_empty() {
                if let Some(after) = line.strip_prefix(key) {
                    if after.trim_start().starts_with('=') {
                        return (i + 1, indent + 1);
                    }
                }
            }
        }
        header.unwrap_or((1, 1))
    }

    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let (line, column) = self.find(section, key);
        let key = if key.is_empty() { section.to_string() } else { format!("{section}.{key}") };
        ConfigError { path: self.path.clone(), line, column, key, message: message.into() }
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

fn toml_error(path: &str, src: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map(|s| line_col(src, s.start)).unwrap_or((1, 1));
    let message = e.message().trim().to_string();
    let key = message
        .strip_prefix("unknown field `")
        .or_else(|| message.strip_prefix("missing field `"))
        .and_then(|r| r.split('`').next())
        .unwrap_or("")
        .to_string();
    ConfigError { path: path.to_string(), line, column, key, message }
}

/// Closed-form surface tension of the homogeneous quartic with scalar wells:
/// `2 int_a^b sqrt(W0) = 4 |b - a| / 3` for `W0 = 16 (p-a)^2 (p-b)^2 / |b-a|^4`.
pub fn analytic_sigma(pot: &Potential) -> Option<f64> {
    (pot.modulation().is_homogeneous() && pot.phase_dim() == 1).then(|| 4.0 * pot.wells().separation() / 3.0)
}

fn positive(loc: &Locator, section: &str, key: &str, v: Option<Scalar>, default: f64) -> Result<f64, ConfigError> {
    let x = v.map(|s| s.0).unwrap_or(default);
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(loc.error(section, key, format!("must be positive, got {x}")))
    }
}

fn build_potential(loc: &Locator, p: &RawPotential) -> Result<Potential, ConfigError> {
    let sec = "potential";
    let allowed: &[&str] = match p.kind.as_str() {
        "homogeneous-quartic" => &[],
        "striped" => &["alpha", "axis"],
        "checkerboard" => &["contrast"],
        "piecewise-cells" => &["divisions", "factors"],
        "smooth-modulated" => &["alpha"],
        other => {
            return Err(loc.error(
                sec,
                "kind",
                format!(
                    "unknown potential kind `{other}`; expected homogeneous-quartic, striped, checkerboard, piecewise-cells or smooth-modulated"
                ),
            ))
        }
    };
    let given = [
        ("alpha", p.alpha.is_some()),
        ("axis", p.axis.is_some()),
        ("contrast", p.contrast.is_some()),
        ("divisions", p.divisions.is_some()),
        ("factors", p.factors.is_some()),
    ];
    for (k, set) in given {
        if set && !allowed.contains(&k) {
            return Err(loc.error(sec, k, format!("not a parameter of kind `{}`", p.kind)));
        }
    }
    let need = |k: &str, v: Option<Scalar>| v.map(|s| s.0).ok_or_else(|| loc.error(sec, k, format!("required by kind `{}`", p.kind)));
    let modulation = match p.kind.as_str() {
        "homogeneous-quartic" => Modulation::HomogeneousQuartic,
        "striped" => Modulation::Striped { alpha: need("alpha", p.alpha)?, axis: p.axis.unwrap_or(0) },
        "checkerboard" => Modulation::Checkerboard { contrast: need("contrast", p.contrast)? },
        "piecewise-cells" => Modulation::PiecewiseCells {
            divisions: p.divisions.clone().ok_or_else(|| loc.error(sec, "divisions", "required by kind `piecewise-cells`"))?,
            factors: p
                .factors
                .as_ref()
                .ok_or_else(|| loc.error(sec, "factors", "required by kind `piecewise-cells`"))?
                .iter()
                .map(|s| s.0)
                .collect(),
        },
        _ => Modulation::SmoothModulated { alpha: need("alpha", p.alpha)? },
    };
    let wells = match &p.wells {
        None => WellPair::scalar(),
        Some(w) => WellPair::new(w.a.iter().map(|s| s.0).collect(), w.b.iter().map(|s| s.0).collect())
            .map_err(|e| loc.error(sec, "wells", e.to_string()))?,
    };
    let growth = match &p.growth {
        None => None,
        Some(g) => Some(GrowthCertificate::new(g.c.0, g.q.0).map_err(|e| loc.error(sec, "growth", e.to_string()))?),
    };
    let key = match &modulation {
        Modulation::Striped { .. } | Modulation::SmoothModulated { .. } => "alpha",
        Modulation::Checkerboard { .. } => "contrast",
        Modulation::PiecewiseCells { .. } => "factors",
        Modulation::HomogeneousQuartic => "kind",
    };
    Potential::new(modulation, wells, growth).map_err(|e| loc.error(sec, key, e.to_string()))
}

fn build_directions(loc: &Locator, d: &RawDirections) -> Result<Vec<RationalUnitVector>, ConfigError> {
    let sec = "directions";
    let mut out = Vec::new();
    for s in &d.rational {
        out.push(RationalUnitVector::parse(s).map_err(|e| loc.error(sec, "rational", format!("`{s}`: {e}")))?);
    }
    let tol = d.tol.map(|s| s.0);
    if !d.real.is_empty() || d.angles.is_some() {
        let tol = tol.ok_or_else(|| loc.error(sec, "tol", "required with `real` or `angles`"))?;
        for v in &d.real {
            let v: Vec<f64> = v.iter().map(|s| s.0).collect();
            out.push(rationalize_direction(&v, tol).map_err(|e| loc.error(sec, "real", format!("{v:?}: {e}")))?);
        }
        if let Some(k) = d.angles {
            if k == 0 {
                return Err(loc.error(sec, "angles", "must be positive"));
            }
            for i in 0..k {
                let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                out.push(rationalize_direction(&[th.cos(), th.sin()], tol).map_err(|e| loc.error(sec, "angles", e.to_string()))?);
            }
        }
    } else if tol.is_some() {
        return Err(loc.error(sec, "tol", "only meaningful with `real` or `angles`"));
    }
    if let Some(first) = out.first() {
        let n = first.dim();
        if !(2..=3).contains(&n) {
            return Err(loc.error(sec, "", format!("directions must live in 2 or 3 dimensions, got {n}")));
        }
        if let Some(v) = out.iter().find(|v| v.dim() != n) {
            return Err(loc.error(sec, "", format!("direction {v} has dimension {}, expected {n}", v.dim())));
        }
    }
    for i in 0..out.len() {
        if out[..i].contains(&out[i]) {
            return Err(loc.error(sec, "", format!("direction {} is listed twice", out[i])));
        }
    }
    Ok(out)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Rounds `t` up to a multiple of `period`, dropping repeats.
fn round_up(t: &[f64], period: u64) -> Vec<f64> {
    let l = period as f64;
    let mut out: Vec<f64> = Vec::new();
    for &v in t {
        let r = (v / l - 1e-9).ceil().max(1.0) * l;
        if out.last().map_or(true, |&p| r > p) {
            out.push(r);
        }
    }
    out
}

impl Config {
    /// The schedule of cube edges used for `nu`.
    pub fn schedule_for(&self, nu: &RationalUnitVector) -> Vec<f64> {
        if self.aligned && self.schedule.fit == Fit::RoundUp {
            if let Some(l) = rotation_from_direction(nu).period_u64() {
                return round_up(&self.schedule.t, l);
            }
        }
        self.schedule.t.clone()
    }

    /// Error located at `section.key`.
    pub fn error(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        self.locations.error(section, key, message)
    }

    /// Checks that the blocks a subcommand needs are present.
    pub fn require(&self, cmd: &str) -> Result<(), ConfigError> {
        match cmd {
            "sigma" | "tile" if self.directions.is_empty() => Err(self.error("directions", "", "at least one direction is required")),
            "sigma" if self.schedule.t.is_empty() => Err(self.error("schedule", "t", "a nonempty T schedule is required")),
            "gamma" if self.schedule.eps.is_empty() => Err(self.error("schedule", "eps", "a nonempty eps schedule is required")),
            "gamma" if self.gamma.sigma.is_none() => {
                Err(self.error("gamma", "sigma", "no closed-form surface tension for this potential; set gamma.sigma"))
            }
            "polar" if self.dim != 2 => Err(self.error("directions", "", "polar plots are planar")),
            _ => Ok(()),
        }
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: shown.clone(),
        line: 0,
        column: 0,
        key: String::new(),
        message: format!("cannot read config: {e}"),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&src, &shown, &base)
}

/// Parses config text; relative paths are resolved against `base`.
pub fn parse_config_str(src: &str, path: &str, base: &Path) -> Result<Config, ConfigError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| toml_error(path, src, e))?;
    let loc = Locator::new(path, src);

    let potential = build_potential(&loc, &raw.potential)?;
    let directions = build_directions(&loc, &raw.directions)?;
    let dim = directions.first().map_or(2, |v| v.dim());

    let radius = positive(&loc, "mollifier", "radius", raw.mollifier.radius, 0.5)?;
    let mollifier = Mollifier::new(raw.mollifier.shape.unwrap_or(MollifierShape::Bump), radius, dim)
        .map_err(|e| loc.error("mollifier", "radius", e.to_string()))?;
    let profile = TransitionProfile::new(potential.wells().clone(), mollifier);

    let aligned = raw.directions.aligned.unwrap_or(!potential.modulation().is_homogeneous());
    let schedule = Schedule {
        t: raw.schedule.t.iter().map(|s| s.0).collect(),
        fit: raw.schedule.fit.unwrap_or_default(),
        h: positive(&loc, "schedule", "h", raw.schedule.h, 1.0 / 32.0)?,
        eps: raw.schedule.eps.iter().map(|s| s.0).collect(),
    };
    if !schedule.t.is_empty() {
        check_schedule(&schedule.t, None).map_err(|e| loc.error("schedule", "t", e.to_string()))?;
        if let Some(t) = schedule.t.iter().find(|&&t| t < 1.0) {
            return Err(loc.error("schedule", "t", format!("T = {t} is smaller than the transition layer")));
        }
    }
    if aligned && schedule.fit == Fit::Strict {
        for nu in &directions {
            let r = rotation_from_direction(nu);
            let l = r
                .period_u64()
                .ok_or_else(|| loc.error("directions", "", format!("lattice period of {nu} is too large")))?;
            if check_schedule(&schedule.t, Some(l)).is_err() {
                let bad = schedule.t.iter().find(|&&t| check_schedule(&[t], Some(l)).is_err()).copied().unwrap_or(f64::NAN);
                return Err(loc.error(
                    "schedule",
                    "t",
                    format!(
                        "T = {bad} is not a multiple of the lattice period λ = {l} of direction {nu}; use multiples of {l} or set schedule.fit = \"round-up\""
                    ),
                ));
            }
        }
    }
    if let Some(e) = schedule.eps.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(loc.error("schedule", "eps", format!("eps must lie in (0, 1], got {e}")));
    }

    let tolerance = match raw.solver.tolerance {
        Some(s) => Some(positive(&loc, "solver", "tolerance", Some(s), 0.0)?),
        None => None,
    };
    let memory = raw.solver.memory.unwrap_or(10);
    if memory == 0 {
        return Err(loc.error("solver", "memory", "must be positive"));
    }
    if raw.solver.max_iterations == Some(0) {
        return Err(loc.error("solver", "max_iterations", "must be positive"));
    }
    let solver = SolverOptions { tolerance, max_iterations: raw.solver.max_iterations, memory };
    let workers = raw.solver.workers.unwrap_or(1);
    if workers == 0 {
        return Err(loc.error("solver", "workers", "must be positive"));
    }

    let g = &raw.gamma;
    let direction = match &g.direction {
        Some(s) => RationalUnitVector::parse(s).map_err(|e| loc.error("gamma", "direction", format!("`{s}`: {e}")))?,
        None => RationalUnitVector::axis(2, 1),
    };
    if direction.dim() != 2 {
        return Err(loc.error("gamma", "direction", "the strip study is two-dimensional"));
    }
    let defaults = GammaSetup::default();
    let setup = GammaSetup {
        length: positive(&loc, "gamma", "length", g.length, defaults.length)?,
        cell_t: positive(&loc, "gamma", "cell_t", g.cell_t, defaults.cell_t)?,
        nodes_per_eps: g.nodes_per_eps.unwrap_or(defaults.nodes_per_eps),
        solver,
    };
    if setup.nodes_per_eps == 0 {
        return Err(loc.error("gamma", "nodes_per_eps", "must be positive"));
    }
    let sigma = match g.sigma {
        Some(s) => Some(positive(&loc, "gamma", "sigma", Some(s), 0.0)?),
        None => analytic_sigma(&potential),
    };
    let mass_height = g.mass_height.map(|s| s.0);
    if let Some(c) = mass_height {
        if !(c > -0.5 && c < 0.5) {
            return Err(loc.error("gamma", "mass_height", format!("interface height must lie in (-1/2, 1/2), got {c}")));
        }
    }
    let mass_eps = match g.mass_eps {
        Some(s) => Some(positive(&loc, "gamma", "mass_eps", Some(s), 0.0)?),
        None => None,
    };

    let tile = TileConfig {
        t: positive(&loc, "tile", "t", raw.tile.t, 4.0)?,
        s: positive(&loc, "tile", "s", raw.tile.s, 16.0)?,
        m: raw.tile.m.unwrap_or(3),
        h: positive(&loc, "tile", "h", raw.tile.h, schedule.h)?,
    };

    let out_dir = resolve(base, raw.output.dir.as_deref().unwrap_or("out"));
    let polar_table = raw.polar.table.as_deref().map(|p| resolve(base, p));
    let samples = raw.validate.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(loc.error("validate", "samples", "must be positive"));
    }

    Ok(Config {
        path: PathBuf::from(path),
        source: src.to_string(),
        potential,
        profile,
        dim,
        directions,
        aligned,
        schedule,
        solver,
        workers,
        seed: raw.solver.seed.unwrap_or(0),
        out_dir,
        gamma: GammaConfig { direction, setup, sigma, mass_height, mass_eps },
        tile,
        polar_table,
        samples,
        locations: loc,
    })
}
