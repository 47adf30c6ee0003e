use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tonks_cli::output;

fn tonks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tonks"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env("TONKS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tonks(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
[model]
n_sites = 32
n_particles = 4
hbar_eff = 1.0

[schedule]
kick_strength = 2.0
anisotropy = 0.3

[initial]
temperature = "0.5*fermi"

[run]
kicks = 20
snapshots = [0, 10, 20]
"#;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_fixed_headers_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", s(&cfg), "--out", s(&a)]);
    ok(&["run", s(&cfg), "--out", s(&b)]);
    let mut files = vec!["energy.csv".to_owned()];
    for t in [0, 10, 20] {
        files.push(format!("nk_fermion_t{t}.csv"));
        files.push(format!("nk_boson_t{t}.csv"));
        files.push(format!("g1_t{t}.csv"));
    }
    for f in &files {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let first = |f: &str| fs::read_to_string(a.join(f)).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(first("energy.csv"), "kick,kinetic_energy,t_eff,mu_eff");
    assert_eq!(first("nk_boson_t10.csv"), "k,n");
    assert_eq!(first("g1_t20.csv"), "r,re_g1,im_g1");
    assert_eq!(fs::read_to_string(a.join("energy.csv")).unwrap().lines().count(), 22);

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let prov = &summary["provenance"];
    assert_eq!(prov["config"]["model"]["n_sites"], 32);
    assert!(prov["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(prov["version"].is_string());
    assert!(summary["gamma"]["value"]["gamma"].is_number());
}

#[test]
fn zero_kick_snapshots_equal_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("kick_strength = 2.0", "kick_strength = 0.0");
    let cfg = write_config(tmp.path(), "zero.toml", &body);
    let out = tmp.path().join("out");
    ok(&["run", s(&cfg), "--out", s(&out)]);
    for flavor in ["fermion", "boson"] {
        let (k0, n0) = output::read_columns(&output::nk_file(&out, flavor, 0), output::NK_HEADER).unwrap();
        for t in [10, 20] {
            let (k, n) = output::read_columns(&output::nk_file(&out, flavor, t), output::NK_HEADER).unwrap();
            assert_eq!(k, k0);
            let diff = n.iter().zip(&n0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-10, "{flavor} t={t}: {diff:e}");
        }
    }
}

const SCAN: &str = r#"
[model]
n_sites = 64
n_particles = 1
hbar_eff = 2.89

[schedule]
kick_strength = 4.0

[initial]
temperature = "0.55*fermi"

[run]
kicks = 60

[scan]
strengths = [4.0, 9.0]
anisotropies = [0.1, 0.8]
"#;

#[test]
fn resumed_scan_matches_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "scan.toml", SCAN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["phase-scan", s(&cfg), "--out", s(&a)]);
    let table = fs::read_to_string(a.join("phase_scan.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "kick_strength,anisotropy,gamma,gamma_se,phase,low_confidence,error");
    assert_eq!(lines.len(), 5);

    // interrupted after two points, written out of order, with a torn line
    fs::create_dir_all(&b).unwrap();
    let partial = format!("{}\n{}\n{}\n9.0,0.8,0.5", lines[0], lines[3], lines[1]);
    fs::write(b.join("phase_scan.csv"), partial).unwrap();
    ok(&["phase-scan", s(&cfg), "--out", s(&b), "--resume"]);
    assert_eq!(fs::read_to_string(b.join("phase_scan.csv")).unwrap(), table);
    assert_eq!(fs::read(b.join("phase_heatmap.csv")).unwrap(), fs::read(a.join("phase_heatmap.csv")).unwrap());

    // finished points are taken from the checkpoint, not recomputed
    let c = tmp.path().join("c");
    fs::create_dir_all(&c).unwrap();
    let fake = format!("{}\n4.0,0.1,0.0,0.0,localized,false,\n", lines[0]);
    fs::write(c.join("phase_scan.csv"), fake).unwrap();
    ok(&["phase-scan", s(&cfg), "--out", s(&c), "--resume"]);
    let resumed = fs::read_to_string(c.join("phase_scan.csv")).unwrap();
    assert!(resumed.lines().any(|l| l == "4.0,0.1,0.0,0.0,localized,false,"));
}

#[test]
fn single_point_scan_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SCAN.replace("strengths = [4.0, 9.0]", "strengths = [9.0]").replace("anisotropies = [0.1, 0.8]", "anisotropies = [0.8]");
    let cfg = write_config(tmp.path(), "one.toml", &body.replace("kick_strength = 4.0", "kick_strength = 9.0\nanisotropy = 0.8"));
    let out = tmp.path().join("out");
    ok(&["phase-scan", s(&cfg), "--out", s(&out)]);
    ok(&["run", s(&cfg), "--out", s(&out)]);
    let table = fs::read_to_string(out.join("phase_scan.csv")).unwrap();
    let row: Vec<String> = table.lines().nth(1).unwrap().split(',').map(str::to_owned).collect();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(row[4], summary["gamma"]["value"]["phase"].as_str().unwrap());
    assert_eq!(row[2].parse::<f64>().unwrap(), summary["gamma"]["value"]["gamma"].as_f64().unwrap());
}

const ORACLE: &str = r#"
[model]
n_sites = 6
n_particles = 2
hbar_eff = 1.0

[schedule]
kick_strength = 2.0

[initial]
temperature = 1.0

[run]
kicks = 2
"#;

#[test]
fn oracle_check_reports_and_gates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "oracle.toml", ORACLE);
    let out = ok(&["oracle-check", s(&cfg)]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_discrepancy"].as_f64().unwrap() < 1e-7);
    assert!(report["continuity"].as_f64().unwrap() < 1e-4);
    assert_eq!(report["snapshots"].as_array().unwrap().len(), 3);

    let free = write_config(tmp.path(), "free.toml", &ORACLE.replace("kick_strength = 2.0", "kick_strength = 0.0"));
    let report: serde_json::Value = serde_json::from_slice(&ok(&["oracle-check", s(&free)]).stdout).unwrap();
    assert!(report["max_discrepancy"].as_f64().unwrap() < 1e-10);

    let big = write_config(tmp.path(), "big.toml", &ORACLE.replace("n_sites = 6", "n_sites = 12"));
    assert!(!tonks(&["oracle-check", s(&big)]).status.success());
}

#[test]
fn collapse_and_fit_thermo_read_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("snapshots = [0, 10, 20]", "snapshots = [5, 10, 20]");
    let cfg = write_config(tmp.path(), "run.toml", &body);
    let out = tmp.path().join("out");
    ok(&["run", s(&cfg), "--out", s(&out)]);
    let res = ok(&["collapse", s(&out), "--alpha", "0.5", "--regime", "moderate", "--flavor", "boson"]);
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(v["metric"].as_f64().unwrap().is_finite());
    let csv = fs::read_to_string(out.join("collapse_boson_moderate.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y_t5,y_t10,y_t20");

    let nk = output::nk_file(&out, "fermion", 20);
    let res = ok(&["fit-thermo", s(&nk), "--hbar", "1.0"]);
    let fit: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(fit["t_eff"].as_f64().unwrap() > 0.0);
    assert_eq!(fit["kick_count"], 20);
}
