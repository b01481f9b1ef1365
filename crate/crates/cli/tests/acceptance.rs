//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are printed in
//! order; the process fails if any criterion fails.

use std::path::Path;
use std::process::Command as Process;
use std::sync::OnceLock;
use std::time::Instant;

use num::{BigInt, BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmacell::cell::{assemble_energy, assemble_gradient, estimate_sigma, CellGrid, CellState, SigmaOptions};
use sigmacell::{
    convexity_check, rotation_from_direction, Modulation, Mollifier, MollifierShape, Potential, RationalUnitVector,
    SigmaEntry, SigmaTable, TransitionProfile, WellPair,
};
use sigmacell_cli::{parse_config_str, run_command, Command, Overrides, TableFile};

const SIGMA_QUARTIC: f64 = 8.0 / 3.0;

type Outcome = Result<(bool, String), String>;

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

/// Runs a subcommand through the library on inline config text.
fn run(cmd: Command, config: &str, out: &Path) -> Result<u8, String> {
    let cfg = parse_config_str(config, "acceptance.toml", out).map_err(|e| e.to_string())?;
    let o = run_command(cmd, &cfg, &Overrides { out: Some(out.to_path_buf()), ..Overrides::default() }).map_err(|e| e.to_string())?;
    Ok(o.exit_code)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty csv")?.split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"))).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// Independent 1D oracle: Newton on the finite-difference Euler-Lagrange
/// equation `2 u'' = W0'(u)` on `[-L, L]`, `u(-L) = -1`, `u(L) = 1`, from a
/// clipped ramp; returns `int u'^2 + W0(u)`.
fn one_dimensional_oracle() -> f64 {
    let (l, n) = (12.0, 4800usize);
    let h = 2.0 * l / n as f64;
    let mut u: Vec<f64> = (0..=n).map(|i| ((-l + i as f64 * h) / 2.0).clamp(-1.0, 1.0)).collect();
    let w = |p: f64| (1.0 - p * p).powi(2);
    let dw = |p: f64| -4.0 * p * (1.0 - p * p);
    let d2w = |p: f64| 12.0 * p * p - 4.0;
    for _ in 0..50 {
        // residual r_i = 2 (u_{i-1} - 2 u_i + u_{i+1}) / h^2 - W0'(u_i)
        let m = n - 1;
        let mut r = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let off = 2.0 / (h * h);
        for k in 0..m {
            let i = k + 1;
            r[k] = off * (u[i - 1] - 2.0 * u[i] + u[i + 1]) - dw(u[i]);
            diag[k] = -2.0 * off - d2w(u[i]);
        }
        let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm < 1e-11 {
            break;
        }
        // Thomas algorithm for J du = -r with constant off-diagonals
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = off / diag[0];
        d[0] = -r[0] / diag[0];
        for k in 1..m {
            let den = diag[k] - off * c[k - 1];
            c[k] = off / den;
            d[k] = (-r[k] - off * d[k - 1]) / den;
        }
        let mut du = vec![0.0; m];
        du[m - 1] = d[m - 1];
        for k in (0..m - 1).rev() {
            du[k] = d[k] - c[k] * du[k + 1];
        }
        for k in 0..m {
            u[k + 1] += du[k];
        }
    }
    let mut e = 0.0;
    for i in 0..n {
        let s = (u[i + 1] - u[i]) / h;
        e += h * (s * s + 0.5 * (w(u[i]) + w(u[i + 1])));
    }
    e
}

const QUARTIC_DIRECTIONS: &str = r#"
[potential]
kind = "homogeneous-quartic"

[directions]
rational = ["1,0", "0,1", "3/5,4/5", "-4/5,3/5", "5/13,12/13", "-12/13,-5/13"]
real = [[0.7071067811865476, 0.7071067811865476], [0.5403023058681398, 0.8414709848078965]]
tol = 1e-3

[schedule]
t = [2, 4, 8]
h = "1/32"
"#;

struct QuarticRun {
    dir: tempfile::TempDir,
    seconds: f64,
    result: Result<u8, String>,
}

fn quartic_run() -> &'static QuarticRun {
    static RUN: OnceLock<QuarticRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tmp();
        let start = Instant::now();
        let result = run(Command::Sigma, QUARTIC_DIRECTIONS, dir.path());
        QuarticRun { seconds: start.elapsed().as_secs_f64(), dir, result }
    })
}

fn criterion_1() -> Outcome {
    let oracle = one_dimensional_oracle();
    if (oracle - SIGMA_QUARTIC).abs() > 1e-4 {
        return Ok((false, format!("oracles disagree: 1D solve {oracle:.6} vs analytic {SIGMA_QUARTIC:.6}")));
    }
    let q = quartic_run();
    let code = q.result.clone()?;
    if code != 0 {
        return Ok((false, format!("sigma exited with {code}")));
    }
    let table = TableFile::read(&q.dir.path().join("sigma_table.json")).map_err(|e| e.to_string())?;
    let worst = table.entries.iter().map(|e| (e.sigma - SIGMA_QUARTIC).abs() / SIGMA_QUARTIC).fold(0.0, f64::max);
    let ok = table.entries.len() == 8 && worst <= 0.02 && q.seconds <= 900.0;
    Ok((
        ok,
        format!(
            "{} directions, worst |sigma_hat - 8/3| / (8/3) = {:.4}% (limit 2%), 1D oracle {oracle:.6}, runtime {:.0} s (limit 900 s)",
            table.entries.len(),
            100.0 * worst,
            q.seconds
        ),
    ))
}

fn fd_check(grid: &CellGrid, pot: &Potential, rng: &mut ChaCha8Rng) -> f64 {
    let n = grid.mesh().node_count();
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.3..1.3)).collect();
    let state = CellState { u: u.clone(), phase_dim: 1 };
    let grad = assemble_gradient(grid, pot, &state).unwrap();
    let scale = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = state.clone();
    for i in 0..n {
        if grid.is_boundary(i) {
            continue;
        }
        probe.u[i] = u[i] + step;
        let ep = assemble_energy(grid, pot, &probe).unwrap().total();
        probe.u[i] = u[i] - step;
        let em = assemble_energy(grid, pot, &probe).unwrap().total();
        probe.u[i] = u[i];
        let fd = (ep - em) / (2.0 * step);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    worst
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g2 = CellGrid::for_direction(&RationalUnitVector::parse("3/5,4/5").unwrap(), 2.0, 1.0 / 8.0).map_err(|e| e.to_string())?;
    let g3 = CellGrid::for_direction(&RationalUnitVector::parse("2/3,1/3,2/3").unwrap(), 1.0, 1.0 / 8.0).map_err(|e| e.to_string())?;
    let p2 = Potential::striped(0.5).unwrap();
    let p3 = Potential::new(Modulation::SmoothModulated { alpha: 0.4 }, WellPair::scalar(), None).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        worst = worst.max(fd_check(&g2, &p2, &mut rng));
        worst = worst.max(fd_check(&g3, &p3, &mut rng));
    }
    Ok((worst <= 1e-6, format!("20 states on 16^2 and 8^3 cells, max relative error {worst:.2e} (limit 1e-6)")))
}

/// Inverse stereographic image of `(p_k / q)`, as a parse string.
fn stereographic(p: &[i64], q: i64) -> String {
    let s: i64 = p.iter().map(|v| v * v).sum();
    let den = q * q + s;
    let mut parts: Vec<String> = p.iter().map(|v| format!("{}/{}", 2 * v * q, den)).collect();
    parts.push(format!("{}/{}", q * q - s, den));
    parts.join(",")
}

fn det(m: &[Vec<BigRational>]) -> BigRational {
    if m.len() == 2 {
        return &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0];
    }
    let mut d = BigRational::zero();
    for j in 0..3 {
        let minor = &m[1][(j + 1) % 3] * &m[2][(j + 2) % 3] - &m[1][(j + 2) % 3] * &m[2][(j + 1) % 3];
        d += &m[0][j] * minor;
    }
    d
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut max_period = BigInt::zero();
    for k in 0..100 {
        let n = if k % 2 == 0 { 2 } else { 3 };
        let p: Vec<i64> = (0..n - 1).map(|_| rng.gen_range(-60..=60)).collect();
        let q = rng.gen_range(1..=40);
        let nu = RationalUnitVector::parse(&stereographic(&p, q)).map_err(|e| e.to_string())?;
        let r = rotation_from_direction(&nu);
        let m = r.matrix();
        let mut ok = true;
        for i in 0..n {
            for j in 0..n {
                let dot: BigRational = (0..n).map(|k| &m[k][i] * &m[k][j]).sum();
                ok &= dot == if i == j { BigRational::one() } else { BigRational::zero() };
            }
        }
        ok &= det(m).is_one();
        ok &= (0..n).all(|i| m[i][n - 1] == nu.components()[i]);
        let lam = BigRational::from_integer(r.period().clone());
        ok &= m.iter().flatten().all(|v| (v * &lam).is_integer());
        ok &= r.period() > &BigInt::zero();
        if !ok {
            failures.push(nu.to_string());
        }
        max_period = max_period.max(r.period().clone());
    }
    Ok((
        failures.is_empty(),
        format!("100 directions (50 in N=2, 50 in N=3), {} failures, largest period {max_period}", failures.len()),
    ))
}

fn criterion_4() -> Outcome {
    let pot = Potential::checkerboard(2.5).unwrap();
    let nu = RationalUnitVector::parse("3/5,4/5").unwrap();
    let r = rotation_from_direction(&nu);
    if r.period_u64() != Some(5) {
        return Ok((false, format!("period {} instead of 5", r.period())));
    }
    let shifts = r.lattice_shifts();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..1000 {
        let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
        let p = [rng.gen_range(-2.0..2.0)];
        let i = rng.gen_range(0..2);
        let xs = [x[0] + shifts[i][0], x[1] + shifts[i][1]];
        if pot.eval(&x, &p).to_bits() != pot.eval(&xs, &p).to_bits() {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("1000 samples, shifts 5 R e_i = {shifts:?}, {bad} mismatches (bit comparison)")))
}

const STRIPED_TABLE: &str = r#"
[potential]
kind = "striped"
alpha = 0.5

[directions]
rational = [
  "1,0", "12/13,5/13", "4/5,3/5", "3/5,4/5",
  "0,1", "-3/5,4/5", "-4/5,3/5", "-12/13,5/13",
  "-1,0", "-12/13,-5/13", "-4/5,-3/5", "-3/5,-4/5",
  "0,-1", "3/5,-4/5", "4/5,-3/5", "12/13,-5/13",
]

[schedule]
t = [4, 8, 16]
fit = "round-up"
h = "1/16"
"#;

fn striped_table() -> &'static Result<TableFile, String> {
    static TABLE: OnceLock<Result<TableFile, String>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let dir = tmp();
        match run(Command::Sigma, STRIPED_TABLE, dir.path())? {
            0 => TableFile::read(&dir.path().join("sigma_table.json")).map_err(|e| e.to_string()),
            c => Err(format!("sigma exited with {c}")),
        }
    })
}

fn entry_near<'a>(entries: &'a [SigmaEntry], nu: &[f64]) -> Option<&'a SigmaEntry> {
    entries.iter().find(|e| (e.nu[0] - nu[0]).abs() + (e.nu[1] - nu[1]).abs() < 1e-12)
}

fn criterion_5() -> Outcome {
    let bump = striped_table().clone()?;
    let pot = Potential::striped(0.5).unwrap();
    let poly = TransitionProfile::new(WellPair::scalar(), Mollifier::new(MollifierShape::Polynomial, 0.5, 2).unwrap());
    let opts = SigmaOptions { h: 1.0 / 16.0, aligned: true, ..SigmaOptions::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, schedule) in [("0,1", [4.0, 8.0, 16.0]), ("3/5,4/5", [5.0, 10.0, 20.0])] {
        let nu = RationalUnitVector::parse(s).unwrap();
        let b = entry_near(&bump.entries, &nu.to_f64()).ok_or("direction missing from table")?;
        let p = estimate_sigma(&nu, &schedule, &pot, &poly, &opts).map_err(|e| e.to_string())?;
        let diff = (b.sigma - p.sigma_hat).abs();
        let limit = 2.0 * (b.err + p.error_bar);
        ok &= diff <= limit;
        parts.push(format!(
            "nu=({s}): bump {:.5} +- {:.5}, polynomial {:.5} +- {:.5}, |diff| {diff:.5} <= {limit:.5}",
            b.sigma, b.err, p.sigma_hat, p.error_bar
        ));
    }
    Ok((ok, parts.join("; ")))
}

const QUARTIC_TILE: &str = r#"
[potential]
kind = "homogeneous-quartic"

[directions]
rational = ["0,1"]

[tile]
t = 4
s = 16
m = 3
h = "1/16"
"#;

fn criterion_6() -> Outcome {
    let dir = tmp();
    let code = run(Command::Tile, QUARTIC_TILE, dir.path())?;
    if code != 0 {
        return Ok((false, format!("tile exited with {code}")));
    }
    let (h, rows) = read_csv(&dir.path().join("tile.csv"))?;
    let (e_s, g_s, copies) = (rows[0][column(&h, "e_S")], rows[0][column(&h, "g_S")], rows[0][column(&h, "copies")]);
    let bound = g_s <= e_s;

    let q = quartic_run();
    q.result.clone()?;
    let (h, rows) = read_csv(&q.dir.path().join("solves.csv"))?;
    let (c1, c2, ct, ch, cg) = (column(&h, "nu_1"), column(&h, "nu_2"), column(&h, "T"), column(&h, "h"), column(&h, "g"));
    let mut g: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[c1] == 0.0 && r[c2] == 1.0 && r[ch] == 1.0 / 64.0)
        .map(|r| (r[ct], r[cg]))
        .collect();
    g.sort_by(|a, b| a.0.total_cmp(&b.0));
    if g.len() != 3 {
        return Ok((false, format!("expected g at T = 2, 4, 8 for e2, found {}", g.len())));
    }
    let d1 = (g[1].1 - g[0].1).abs();
    let d2 = (g[2].1 - g[1].1).abs();
    Ok((
        bound && d2 < d1,
        format!(
            "g(16) = {g_s:.5} <= e_S = {e_s:.5} ({copies} copies); |g(4)-g(2)| = {d1:.5}, |g(8)-g(4)| = {d2:.5}"
        ),
    ))
}

fn criterion_7() -> Outcome {
    let pot = Potential::striped(0.5).unwrap();
    let profile = TransitionProfile::new(WellPair::scalar(), Mollifier::bump(2));
    let opts = SigmaOptions { h: 1.0 / 16.0, aligned: true, ..SigmaOptions::default() };
    let schedule = [8.0, 16.0, 32.0];
    let e1 = estimate_sigma(&RationalUnitVector::axis(2, 0), &schedule, &pot, &profile, &opts).map_err(|e| e.to_string())?;
    let e2 = estimate_sigma(&RationalUnitVector::axis(2, 1), &schedule, &pot, &profile, &opts).map_err(|e| e.to_string())?;
    let sep = (e1.sigma_hat - e2.sigma_hat).abs();
    let bars = e1.error_bar + e2.error_bar;
    let soft = if e1.sigma_hat < e2.sigma_hat { "met" } else { "not met" };
    Ok((
        sep > bars,
        format!(
            "sigma_hat(e1) = {:.5} +- {:.5}, sigma_hat(e2) = {:.5} +- {:.5}, separation {sep:.5} vs bars {bars:.5}; soft ordering sigma(e1) < sigma(e2) {soft}",
            e1.sigma_hat, e1.error_bar, e2.sigma_hat, e2.error_bar
        ),
    ))
}

fn criterion_8() -> Outcome {
    let file = striped_table().clone()?;
    let table = SigmaTable::new(file.entries.clone()).map_err(|e| e.to_string())?;
    let v = convexity_check(&table);
    let e = |nu: [f64; 2], sigma: f64| SigmaEntry { nu: nu.to_vec(), sigma, err: 0.0 };
    let r = 0.5f64.sqrt();
    let corrupted = SigmaTable::new(vec![e([1.0, 0.0], 1.0), e([0.0, 1.0], 1.0), e([r, r], 2f64.sqrt() * 1.01)]).unwrap();
    let flagged = convexity_check(&corrupted);
    let pair = flagged.iter().find(|x| {
        let (a, b) = (&corrupted.entries()[x.i].nu, &corrupted.entries()[x.j].nu);
        (a[1] == 0.0 && b[0] == 0.0) || (a[0] == 0.0 && b[1] == 0.0)
    });
    let spread = file.entries.iter().map(|e| e.sigma).fold(f64::INFINITY, f64::min)
        ..file.entries.iter().map(|e| e.sigma).fold(0.0, f64::max);
    Ok((
        file.entries.len() == 16 && v.is_empty() && pair.is_some(),
        format!(
            "{} striped directions, sigma_hat in [{:.4}, {:.4}], {} violations; corrupted table flags {} pair(s), (e1,e2) lhs {:.4} > rhs {:.4}",
            file.entries.len(),
            spread.start,
            spread.end,
            v.len(),
            flagged.len(),
            pair.map_or(f64::NAN, |p| p.lhs),
            pair.map_or(f64::NAN, |p| p.rhs)
        ),
    ))
}

const QUARTIC_GAMMA: &str = r#"
[potential]
kind = "homogeneous-quartic"

[schedule]
eps = ["1/4", "1/8", "1/16", "1/32"]

[solver]
tolerance = 1e-10

[gamma]
direction = "0,1"
length = 1
mass_height = 0.2
"#;

fn gamma_run() -> &'static Result<tempfile::TempDir, String> {
    static RUN: OnceLock<Result<tempfile::TempDir, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tmp();
        match run(Command::Gamma, QUARTIC_GAMMA, dir.path())? {
            0 => Ok(dir),
            c => Err(format!("gamma exited with {c}")),
        }
    })
}

fn criterion_9() -> Outcome {
    let dir = gamma_run().as_ref().map_err(Clone::clone)?;
    let (h, rows) = read_csv(&dir.path().join("gamma.csv"))?;
    let (ce, cm, cr, cg) = (column(&h, "eps"), column(&h, "min_energy"), column(&h, "recovery_energy"), column(&h, "gap_min"));
    let target = SIGMA_QUARTIC;
    let last = rows.last().ok_or("no rows")?;
    let rel = (last[cm] - target).abs() / target;
    let below = rows.iter().all(|r| r[cm] <= r[cr]);
    // at fixed nodes per eps the gap settles at the mesh error of the
    // profile. The default stopping rule leaves energy noise near 1e-7,
    // larger than the plateau steps, hence the tight solver tolerance above.
    let gaps: Vec<f64> = rows.iter().map(|r| r[cg].abs()).collect();
    let trend = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-8 * target);
    let list: Vec<String> = rows.iter().map(|r| format!("{}:{:.4e}", r[ce], r[cg])).collect();
    Ok((
        rel <= 0.05 && below && trend,
        format!(
            "F_eps(1/32) = {:.5}, {:.3}% from 8/3 L (limit 5%); gaps {}; min <= recovery at every eps: {below}",
            last[cm],
            100.0 * rel,
            list.join(" ")
        ),
    ))
}

fn criterion_10() -> Outcome {
    let dir = gamma_run().as_ref().map_err(Clone::clone)?;
    let (h, rows) = read_csv(&dir.path().join("mass.csv"))?;
    let r = &rows[0];
    let (target, mass, drift) = (r[column(&h, "target")], r[column(&h, "mass")], r[column(&h, "mass_drift")]);
    let (energy, flat) = (r[column(&h, "energy")], r[column(&h, "flat_f0")]);
    let rel = (energy - flat).abs() / flat;
    let ok = (mass - target).abs() <= 1e-10 && drift <= 1e-10 && rel <= 0.10;
    Ok((
        ok,
        format!(
            "eps = {}, interface height 0.2: |mass - target| = {:.1e}, max drift over the run {:.1e} (limit 1e-10), energy {energy:.5} vs F0 = {flat:.5} ({:.2}%, limit 10%)",
            r[column(&h, "eps")],
            (mass - target).abs(),
            drift,
            100.0 * rel
        ),
    ))
}

const DETERMINISM: &str = r#"
[potential]
kind = "homogeneous-quartic"

[directions]
rational = ["0,1", "3/5,4/5", "-5/13,12/13"]

[schedule]
t = [2, 4]
h = "1/16"

[solver]
seed = 11
"#;

fn cli_sigma(config: &Path, out: &Path, workers: usize) -> Result<(), String> {
    let status = Process::new(env!("CARGO_BIN_EXE_sigmacell"))
        .args(["sigma", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string(), "--seed", "11"])
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() == Some(0) {
        Ok(())
    } else {
        Err(format!("sigmacell sigma exited with {status}"))
    }
}

fn criterion_11() -> Outcome {
    let dir = tmp();
    let config = dir.path().join("det.toml");
    std::fs::write(&config, DETERMINISM).map_err(|e| e.to_string())?;
    let outs = [dir.path().join("a"), dir.path().join("b"), dir.path().join("c")];
    cli_sigma(&config, &outs[0], 2)?;
    cli_sigma(&config, &outs[1], 2)?;
    cli_sigma(&config, &outs[2], 1)?;
    let files = ["sigma_table.json", "solves.csv"];
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).map_err(|e| e.to_string());
    let mut same = true;
    let mut across = true;
    for f in files {
        let a = read(&outs[0], f)?;
        same &= a == read(&outs[1], f)?;
        across &= a == read(&outs[2], f)?;
    }
    Ok((
        same,
        format!("two runs with seed 11 and 2 workers: sigma_table.json and solves.csv byte-identical: {same}; also identical with 1 worker: {across}"),
    ))
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; this suite has no filters
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("isotropic oracle", criterion_1),
        ("gradient correctness", criterion_2),
        ("exact lattice algebra", criterion_3),
        ("periodicity", criterion_4),
        ("mollifier independence", criterion_5),
        ("subadditivity trend", criterion_6),
        ("anisotropy detection", criterion_7),
        ("convexity", criterion_8),
        ("gamma gap", criterion_9),
        ("mass-constrained run", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
