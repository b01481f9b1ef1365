use std::path::Path;
use std::process::{Command, Output};

fn sigmacell(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigmacell"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const QUARTIC: &str = "[potential]\nkind = \"homogeneous-quartic\"\n[directions]\nrational = [\"0,1\", \"3/5,4/5\"]\n[schedule]\nt = [2]\nh = \"1/16\"\n";

#[test]
fn validate_quartic_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", QUARTIC);
    let out = dir.path().join("out");
    let o = sigmacell(&["validate"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["convexity"]["status"], "skipped");
    assert_eq!(report["rotation"][1]["period"], "5");
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{QUARTIC}[potental]\nkind = 1\n"));
    let o = sigmacell(&["sigma"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("potental") && err.contains(":8:"), "{err}");
}

#[test]
fn misaligned_schedule_cites_period() {
    let dir = tempfile::tempdir().unwrap();
    let text = QUARTIC.replace("homogeneous-quartic\"", "striped\"\nalpha = 0.5");
    let cfg = write(dir.path(), "s.toml", &text);
    let o = sigmacell(&["sigma"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("λ = 5"));
}

#[test]
fn polar_with_empty_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "t.json", r#"{"dimension": 2, "potential": {"kind": "homogeneous-quartic"}, "entries": []}"#);
    let cfg = write(dir.path(), "p.toml", &format!("{QUARTIC}[polar]\ntable = \"{}\"\n", table.display()));
    let out = dir.path().join("out");
    let o = sigmacell(&["polar"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("polar.svg").exists());
}

#[test]
fn sigma_then_polar_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", &QUARTIC.replace("\"3/5,4/5\"", "\"3/5,4/5\", \"-1,0\""));
    let out = dir.path().join("out");
    assert_eq!(sigmacell(&["sigma"], &cfg, &out).status.code(), Some(0));
    assert_eq!(sigmacell(&["polar"], &cfg, &out).status.code(), Some(0));
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("sigma_table.json")).unwrap()).unwrap();
    assert_eq!(table["dimension"], 2);
    assert_eq!(table["potential"]["kind"], "homogeneous-quartic");
    assert_eq!(table["entries"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(out.join("solves.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "nu_1,nu_2,T,h,g,potential_part,gradient_part,iterations,residual");
    assert_eq!(csv.lines().count(), 1 + 3 * 2);

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let mut listed = Vec::new();
    for run in manifest["runs"].as_array().unwrap() {
        for o in run["outputs"].as_array().unwrap() {
            let path = o["path"].as_str().unwrap().to_string();
            let bytes = std::fs::read(out.join(&path)).unwrap();
            assert_eq!(o["sha256"].as_str().unwrap(), sigmacell_cli::manifest::sha256_hex(&bytes));
            listed.push(path);
        }
    }
    listed.sort();
    assert_eq!(listed, ["polar.svg", "sigma_table.json", "solves.csv"]);
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n.toml", &format!("{QUARTIC}[solver]\nmax_iterations = 2\n"));
    let out = dir.path().join("out");
    let o = sigmacell(&["sigma"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("manifest.json").exists());
    assert!(!out.join("sigma_table.json").exists());
}
