use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtm_core::config::{RunConfig, SweepConfig};
use qtm_core::wavefunction::io::load_snapshot;

fn presets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn qtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtm"))
        .args(args)
        .env_remove("QTM_OUT")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn every_preset_loads() {
    let mut runs = 0;
    let mut sweeps = 0;
    for entry in fs::read_dir(presets()).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        if name == "lithium7.toml" {
            continue;
        }
        if name.contains("sweep") {
            SweepConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            sweeps += 1;
        } else {
            RunConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            runs += 1;
        }
    }
    assert_eq!(runs, 7);
    assert_eq!(sweeps, 6);
}

#[test]
fn run_writes_echo_record_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("qtm1d_fig1a_lambda40.toml");
    let out = qtm(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("echo: peak N = 0.6"), "{summary}");
    assert!(summary.contains("lambda_min = 19.27"), "{summary}");

    let d = dir.path();
    let echo = fs::read_to_string(d.join("qtm1d_fig1a_lambda40_echo.csv")).unwrap();
    assert!(echo.starts_with("# artifact=run\n# code_version="));
    let rows = data_rows(&echo);
    assert_eq!(rows[0], "t,norm_corr,norm");
    let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-12);
    let times: Vec<f64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));

    let obs = fs::read_to_string(d.join("qtm1d_fig1a_lambda40_observables.csv")).unwrap();
    assert_eq!(data_rows(&obs)[0], "t,norm,norm_corr,peak_position");

    for label in ["t0.0000", "t0.9900", "peak"] {
        let snap = load_snapshot(&d.join(format!("qtm1d_fig1a_lambda40_snap_{label}.qtmw"))).unwrap();
        assert!((snap.norm() - 1.0).abs() < 1e-9);
        let csv = fs::read_to_string(d.join(format!("qtm1d_fig1a_lambda40_snap_{label}.csv"))).unwrap();
        assert!(csv.contains("# snapshot.time="));
        assert_eq!(data_rows(&csv)[0], "x,re,im,rho");
        assert_eq!(data_rows(&csv).len(), snap.grid().len() + 1);
    }
    let before = load_snapshot(&d.join("qtm1d_fig1a_lambda40_snap_t0.9900.qtmw")).unwrap();
    assert_eq!(before.time(), 0.99);

    // the resolved config reruns to identical bytes
    let again = tempfile::tempdir().unwrap();
    let resolved = d.join("qtm1d_fig1a_lambda40.toml");
    let out = qtm(&["run", "-q", "-c", path(&resolved), "-o", path(again.path())]);
    assert_eq!(out.status.code(), Some(0));
    let echo2 = fs::read_to_string(again.path().join("qtm1d_fig1a_lambda40_echo.csv")).unwrap();
    assert_eq!(data_rows(&echo), data_rows(&echo2));
}

#[test]
fn free_run_reports_no_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("qtm1d_fig1a_lambda0.toml");
    let out = qtm(&["run", "-c", path(&cfg), "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("no echo"), "{summary}");
    assert!(summary.contains("below threshold"), "{summary}");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("qtm1d_fig1a_lambda0.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_qtm"))
        .args(["run", "-q", "-c", path(&cfg)])
        .env("QTM_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(dir.path().join("qtm1d_fig1a_lambda0_echo.csv").exists());
}

#[test]
fn config_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "[packet]\ngeometry = \"line\"\nsigma = 1.0\nk = 4.0\n\n[pulse]\nkind = \"gaussian\"\nstrength = 40.0\nwidth = -1.0\n",
    )
    .unwrap();
    let out = qtm(&["run", "-c", path(&bad), "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 9"), "{err}");
    assert_eq!(qtm(&["run", "-c", "/nonexistent.toml"]).status.code(), Some(3));
    assert_eq!(qtm(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn boundary_contamination_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    fs::write(
        &cfg,
        "[packet]\ngeometry = \"line\"\nsigma = 1.0\nk = 4.0\n\n[pulse]\nkind = \"instantaneous\"\nstrength = 0.0\n\n[grid]\nx_min = -8.0\nx_max = 8.0\nn = 256\n",
    )
    .unwrap();
    let out = qtm(&["run", "-c", path(&cfg), "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary"));
}

#[test]
fn smoke_sweep_writes_csv_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("smoke_sweep.toml");
    let start = std::time::Instant::now();
    let out = qtm(&["sweep", "-c", path(&cfg), "-o", path(dir.path()), "--workers", "2"]);
    assert!(start.elapsed().as_secs() < 10);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("smoke_sweep.csv")).unwrap();
    assert!(csv.starts_with("# artifact=sweep\n# code_version="));
    assert!(!csv.contains("workers"));
    let rows = data_rows(&csv);
    assert_eq!(rows[0], "lambda,k,peak_strength,peak_time,reversed_fraction");
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((0.0..=1.0).contains(&v[2]));
        if v[0] == 0.0 {
            assert!(v[2] < 0.2, "{row}");
            assert!(v[4] < 1e-6, "{row}");
        }
    }
    let overlay = fs::read_to_string(dir.path().join("smoke_overlay.csv")).unwrap();
    assert_eq!(data_rows(&overlay)[0], "k,lambda_min");
}

#[test]
fn malformed_sweep_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(presets().join("smoke_sweep.toml"))
        .unwrap()
        .replace("count = 2\n\n[[sweep.axis]]", "count = 1\n\n[[sweep.axis]]");
    let cfg = dir.path().join("bad_sweep.toml");
    fs::write(&cfg, text).unwrap();
    let out = qtm(&["sweep", "-c", path(&cfg), "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("count"));
}

#[test]
fn phases_csv_and_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtm(&["phases", "--lambda", "0,40", "-o", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let flat = fs::read_to_string(dir.path().join("phases_sigma1_k4_lambda0.csv")).unwrap();
    let rows = data_rows(&flat);
    assert_eq!(rows[0], "xi,phi_qtm,phi_ideal_shifted");
    assert!(rows[1..].iter().all(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("phi_qtm(0)=15.957691"));
    assert_eq!(qtm(&["phases", "-o", path(dir.path())]).status.code(), Some(1));
}

#[test]
fn validate_passes_and_catches_fault() {
    let ok = qtm(&["validate"]);
    let text = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(ok.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.contains("PASS Strang order"));
    let bad = qtm(&["validate", "--skip-ring", "--inject-fault", "kinetic-sign"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.contains("FAIL free-evolution oracle"), "{text}");
}

#[test]
fn units_table() {
    let cfg = presets().join("lithium7.toml");
    let out = qtm(&["units", "-c", path(&cfg), "--lambda", "0,10,200", "--length", "10e-6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sigma = 1.0511"), "{text}");
    assert!(text.contains("0,0.000000e0,0.0000"), "{text}");
    assert!(text.contains("200,1.05"), "{text}");
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("ctx.toml");
    fs::write(&broken, "mass = -1.0\nt0 = 0.01\n").unwrap();
    assert_eq!(qtm(&["units", "-c", path(&broken)]).status.code(), Some(1));
}
