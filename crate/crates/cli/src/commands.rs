//! Subcommand drivers. Solves run on a private worker pool; results are
//! gathered in input order and written by one [`ArtifactWriter`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sigmacell::cell::{estimate_g_with_state, extrapolate, minimize_cell};
use sigmacell::gamma::{minimize_f_eps, step_initial_field, MassConstraint};
use sigmacell::lattice::{audit_rotation, check_rotation_periodicity};
use sigmacell::potential::validate_hypotheses;
use sigmacell::tiling::subadditivity_gap;
use sigmacell::{
    convexity_check, gamma_gap, rotation_from_direction, CellGrid, DomainSpec, GEstimate, Potential,
    SigmaEntry, SigmaTable, SubadditivityReport,
};

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{sha256_hex, unix_now, ArtifactWriter, RunManifest, RunRecord};
use crate::svg::polar_svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sigma,
    Polar,
    Gamma,
    Validate,
    Tile,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sigma => "sigma",
            Command::Polar => "polar",
            Command::Gamma => "gamma",
            Command::Validate => "validate",
            Command::Tile => "tile",
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub out_dir: PathBuf,
    pub message: String,
}

/// `{"dimension", "potential", "entries"}`, the sigma table on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub dimension: usize,
    pub potential: Value,
    pub entries: Vec<SigmaEntry>,
}

impl TableFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read sigma table {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("malformed sigma table {}: {e}", path.display())))
    }

    pub fn table(&self) -> Result<SigmaTable, CliError> {
        if self.dimension != 2 {
            return Err(CliError::Input(format!("sigma table has dimension {}, polar tables are planar", self.dimension)));
        }
        SigmaTable::new(self.entries.clone()).map_err(|e| CliError::Input(e.to_string()))
    }
}

pub fn potential_json(pot: &Potential) -> Value {
    let mut v = serde_json::to_value(pot.modulation()).expect("modulation serializes");
    let g = pot.growth();
    v["wells"] = json!({ "a": pot.wells().a(), "b": pot.wells().b() });
    v["growth"] = json!({ "c": g.c(), "q": g.q() });
    v
}

fn to_json(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {workers} workers: {e}")))
}

struct Ctx<'a> {
    cfg: &'a Config,
    workers: usize,
    seed: u64,
}

/// What a subcommand produced before the manifest is written.
struct Done {
    exit_code: u8,
    message: String,
}

impl Done {
    fn ok(message: impl Into<String>) -> Self {
        Self { exit_code: 0, message: message.into() }
    }
}

/// Runs `cmd` and records it in the output directory's manifest. Config and
/// input errors abort before anything is written; solver and validation
/// failures write what was computed and return exit code 3 or 4.
pub fn run_command(cmd: Command, cfg: &Config, ov: &Overrides) -> Result<RunOutcome, CliError> {
    cfg.require(cmd.name())?;
    let workers = ov.workers.unwrap_or(cfg.workers);
    if workers == 0 {
        return Err(CliError::Input("--workers must be positive".into()));
    }
    let ctx = Ctx { cfg, workers, seed: ov.seed.unwrap_or(cfg.seed) };
    let out_dir = ov.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    if cmd == Command::Polar {
        // fail on a bad table before touching the output directory
        polar_table(cfg, &out_dir)?.table()?;
    }
    let started = unix_now();
    let mut w = ArtifactWriter::create(&out_dir)?;
    let done = match cmd {
        Command::Sigma => sigma(&ctx, &mut w),
        Command::Polar => polar(&ctx, &mut w),
        Command::Gamma => gamma(&ctx, &mut w),
        Command::Validate => validate(&ctx, &mut w),
        Command::Tile => tile(&ctx, &mut w),
    };
    let done = match done {
        Ok(d) => d,
        Err(e @ (CliError::NotConverged(_) | CliError::Validation(_))) => Done { exit_code: e.exit_code(), message: e.to_string() },
        Err(e) => return Err(e),
    };
    let outputs = w.finish();
    let mut manifest = RunManifest::load(&out_dir);
    manifest.record(RunRecord {
        command: cmd.name().into(),
        config_path: cfg.path.display().to_string(),
        config_sha256: sha256_hex(cfg.source.as_bytes()),
        seed: ctx.seed,
        workers,
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: done.exit_code,
        outcome: done.message.clone(),
        outputs,
    });
    manifest.save(&out_dir)?;
    Ok(RunOutcome { exit_code: done.exit_code, out_dir, message: done.message })
}

fn csv_header(dim: usize, rest: &str) -> String {
    let mut s: Vec<String> = (1..=dim).map(|k| format!("nu_{k}")).collect();
    s.push(rest.to_string());
    s.join(",") + "\n"
}

fn nu_fields(nu: &[f64]) -> String {
    nu.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn sigma(ctx: &Ctx, w: &mut ArtifactWriter) -> Result<Done, CliError> {
    let cfg = ctx.cfg;
    let rotations: Vec<_> = cfg.directions.iter().map(rotation_from_direction).collect();
    let tasks: Vec<(usize, f64)> =
        cfg.directions.iter().enumerate().flat_map(|(i, nu)| cfg.schedule_for(nu).into_iter().map(move |t| (i, t))).collect();
    for &(i, t) in &tasks {
        CellGrid::new(cfg.dim, t, cfg.schedule.h, rotations[i].clone())
            .map_err(|e| cfg.error("schedule", "h", format!("T = {t}: {e}")))?;
    }
    let results: Vec<Result<GEstimate, sigmacell::Error>> = pool(ctx.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(i, t)| {
                let grid = CellGrid::new(cfg.dim, t, cfg.schedule.h, rotations[i].clone())?;
                estimate_g_with_state(&grid, &cfg.potential, &cfg.profile, &cfg.solver).map(|(e, _)| e)
            })
            .collect()
    });

    let mut csv = csv_header(cfg.dim, "T,h,g,potential_part,gradient_part,iterations,residual");
    let mut per_dir: Vec<Vec<GEstimate>> = vec![Vec::new(); cfg.directions.len()];
    let mut failures = Vec::new();
    for (&(i, t), r) in tasks.iter().zip(results) {
        match r {
            Ok(est) => {
                let nu = nu_fields(&cfg.directions[i].to_f64());
                for s in [est.coarse, est.fine] {
                    let _ = writeln!(
                        csv,
                        "{nu},{},{},{},{},{},{},{}",
                        s.t, s.h, s.g, s.energy.potential, s.energy.gradient, s.iterations, s.residual
                    );
                }
                per_dir[i].push(est);
            }
            Err(e @ sigmacell::Error::NotConverged { .. }) => failures.push(format!("{} at T = {t}: {e}", cfg.directions[i])),
            Err(e) => return Err(e.into()),
        }
    }
    w.write("solves.csv", csv.as_bytes())?;
    if !failures.is_empty() {
        return Err(CliError::NotConverged(failures.join("; ")));
    }
    let mut entries = Vec::with_capacity(cfg.directions.len());
    for (nu, per_t) in cfg.directions.iter().zip(&per_dir) {
        let (sigma, err) = extrapolate(per_t)?;
        entries.push(SigmaEntry { nu: nu.to_f64(), sigma, err });
    }
    let table = TableFile { dimension: cfg.dim, potential: potential_json(&cfg.potential), entries };
    w.write("sigma_table.json", &to_json(&table))?;
    Ok(Done::ok(format!("{} directions, {} solves", cfg.directions.len(), 2 * tasks.len())))
}

fn polar_table(cfg: &Config, out_dir: &Path) -> Result<TableFile, CliError> {
    let path = cfg.polar_table.clone().unwrap_or_else(|| out_dir.join("sigma_table.json"));
    TableFile::read(&path)
}

fn polar(ctx: &Ctx, w: &mut ArtifactWriter) -> Result<Done, CliError> {
    let file = polar_table(ctx.cfg, w.dir())?;
    let table = file.table()?;
    let kind = file.potential.get("kind").and_then(Value::as_str).unwrap_or("unknown");
    let svg = polar_svg(&table, &format!("sigma_hat(theta), {kind}, {} directions", table.entries().len()));
    w.write("polar.svg", svg.as_bytes())?;
    Ok(Done::ok(format!("{} directions plotted", table.entries().len())))
}

fn gamma(ctx: &Ctx, w: &mut ArtifactWriter) -> Result<Done, CliError> {
    let cfg = ctx.cfg;
    let g = &cfg.gamma;
    let sigma = g.sigma.expect("checked by require");
    let table = gamma_gap(&g.direction, &cfg.schedule.eps, &cfg.potential, &cfg.profile, sigma, &g.setup)?;
    let mut csv = String::from("eps,min_energy,recovery_energy,sigma_target,gap_min,gap_recovery\n");
    for r in &table.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.eps, r.min_energy, r.recovery_energy, r.sigma_target, r.gap_min, r.gap_recovery);
    }
    w.write("gamma.csv", csv.as_bytes())?;
    let mut message = format!("{} eps values", table.rows.len());

    if let Some(c) = g.mass_height {
        let eps = g.mass_eps.unwrap_or_else(|| cfg.schedule.eps.iter().copied().fold(f64::INFINITY, f64::min));
        let run = mass_run(cfg, c, eps, sigma)?;
        let mut csv = String::from("eps,height,target,mass,mass_drift,energy,flat_f0,relative_gap\n");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            run.eps, run.height, run.target, run.mass, run.drift, run.energy, run.flat_f0, run.relative_gap
        );
        w.write("mass.csv", csv.as_bytes())?;
        message.push_str(&format!(", mass run drift {:e}", run.drift));
        if !run.converged {
            return Err(CliError::NotConverged(format!("mass-constrained run at eps = {eps}")));
        }
    }
    Ok(Done::ok(message))
}

/// Outcome of a mass-constrained strip minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassRun {
    pub eps: f64,
    pub height: f64,
    pub target: f64,
    pub mass: f64,
    pub drift: f64,
    pub energy: f64,
    /// `sigma * length`, the sharp-interface energy of any flat interface.
    pub flat_f0: f64,
    pub relative_gap: f64,
    pub converged: bool,
}

/// Minimizes `F_eps` on the flat strip with the mass of a flat interface at
/// height `c`, started from the profile across that interface.
pub fn mass_run(cfg: &Config, c: f64, eps: f64, sigma: f64) -> Result<MassRun, CliError> {
    let setup = &cfg.gamma.setup;
    if cfg.potential.phase_dim() != 1 {
        return Err(CliError::Input("the mass run uses scalar phases".into()));
    }
    let mut domain = DomainSpec::flat_strip(setup.length).with_rotation(rotation_from_direction(&cfg.gamma.direction));
    domain.interface = c;
    let h = eps / setup.nodes_per_eps as f64;
    let profile = &cfg.profile;
    let constraint = MassConstraint::from_phase_measure((c + 0.5) * setup.length, &domain, profile);
    let init = step_initial_field(&domain, profile, eps, h)?;
    let sol = minimize_f_eps(&domain, &cfg.potential, profile, init, Some(&constraint), &setup.solver)?;
    let mass = sol.mass.as_ref().map(|m| m[0]).unwrap_or(f64::NAN);
    let flat_f0 = sigma * domain.cross_section();
    let energy = sol.energy.total();
    Ok(MassRun {
        eps,
        height: c,
        target: constraint.target[0],
        mass,
        drift: sol.mass_drift.unwrap_or(f64::NAN),
        energy,
        flat_f0,
        relative_gap: (energy - flat_f0) / flat_f0,
        converged: sol.converged,
    })
}

fn validate(ctx: &Ctx, w: &mut ArtifactWriter) -> Result<Done, CliError> {
    let cfg = ctx.cfg;
    let hyp = validate_hypotheses(&cfg.potential, cfg.dim, cfg.samples, ctx.seed)?;
    let mut ok = hyp.all_passed();
    let mut failed: Vec<String> = hyp.checks.iter().filter(|c| !c.passed).map(|c| c.hypothesis.to_string()).collect();

    let mut rotation = Vec::new();
    let mut periodicity = Vec::new();
    for (k, nu) in cfg.directions.iter().enumerate() {
        let r = rotation_from_direction(nu);
        let a = audit_rotation(&r, nu);
        if !a.passed() {
            ok = false;
            failed.push(format!("rotation for {nu}"));
        }
        rotation.push(json!({
            "nu": nu.to_string(),
            "period": r.period().to_string(),
            "orthogonal": a.orthogonal,
            "det_one": a.det_one,
            "maps_axis_to_nu": a.maps_axis_to_nu,
            "period_integral": a.period_integral,
            "passed": a.passed(),
        }));
        let p = check_rotation_periodicity(&cfg.potential, &r, cfg.samples, ctx.seed.wrapping_add(k as u64 + 1));
        if !p.passed {
            ok = false;
            failed.push(format!("periodicity along {nu}"));
        }
        periodicity.push(json!({
            "nu": nu.to_string(),
            "samples": p.samples,
            "passed": p.passed,
            "violation": p.violation.map(|(x, p, i)| json!({ "x": x, "p": p, "i": i })),
        }));
    }

    let table_path = cfg.polar_table.clone().unwrap_or_else(|| w.dir().join("sigma_table.json"));
    let convexity = if table_path.exists() {
        let table = TableFile::read(&table_path)?.table()?;
        let v = convexity_check(&table);
        if !v.is_empty() {
            ok = false;
            failed.push(format!("convexity ({} pairs)", v.len()));
        }
        json!({ "status": "checked", "table": table_path.display().to_string(), "passed": v.is_empty(), "violations": v })
    } else {
        json!({ "status": "skipped", "table": table_path.display().to_string(), "passed": true, "violations": [] })
    };

    let report = json!({
        "potential": potential_json(&cfg.potential),
        "hypotheses": hyp,
        "rotation": rotation,
        "periodicity": periodicity,
        "convexity": convexity,
        "passed": ok,
    });
    w.write("validate.json", &to_json(&report))?;
    if ok {
        Ok(Done::ok("all checks passed"))
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

fn tile(ctx: &Ctx, w: &mut ArtifactWriter) -> Result<Done, CliError> {
    let cfg = ctx.cfg;
    let tc = cfg.tile;
    let reports: Vec<Result<SubadditivityReport, sigmacell::Error>> = pool(ctx.workers)?.install(|| {
        cfg.directions
            .par_iter()
            .map(|nu| {
                let grid = CellGrid::new(cfg.dim, tc.t, tc.h, rotation_from_direction(nu))?;
                let source = minimize_cell(&grid, &cfg.potential, &cfg.profile, &cfg.solver)?;
                if !source.result.converged {
                    return Err(sigmacell::Error::NotConverged {
                        iterations: source.result.iterations,
                        residual: source.result.residual,
                    });
                }
                subadditivity_gap(&source, &grid, tc.s, tc.m, &cfg.potential, &cfg.profile, &cfg.solver)
            })
            .collect()
    });
    let mut csv = csv_header(cfg.dim, "T,S,m,copies,e_S,g_T,g_S,remainder");
    let mut failures = Vec::new();
    for (nu, r) in cfg.directions.iter().zip(reports) {
        match r {
            Ok(r) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    nu_fields(&nu.to_f64()),
                    r.t,
                    r.s,
                    r.m,
                    r.copies,
                    r.e_s,
                    r.g_t,
                    r.g_s,
                    r.remainder
                );
            }
            Err(e @ sigmacell::Error::NotConverged { .. }) => failures.push(format!("{nu}: {e}")),
            Err(e) => return Err(e.into()),
        }
    }
    w.write("tile.csv", csv.as_bytes())?;
    if failures.is_empty() {
        Ok(Done::ok(format!("{} directions tiled", cfg.directions.len())))
    } else {
        Err(CliError::NotConverged(failures.join("; ")))
    }
}
