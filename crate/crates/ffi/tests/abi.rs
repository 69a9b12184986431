use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qtm_ffi::*;

fn last_error() -> String {
    let p = qtm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn line_grid() -> *mut QtmGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { qtm_grid_new(1, -20.0, 44.0, 2048, &mut g) }, QtmStatus::Ok);
    g
}

#[test]
fn grid_and_packet_lifecycle() {
    unsafe {
        let g = line_grid();
        assert_eq!(qtm_grid_len(g), 2048);
        let mut w = ptr::null_mut();
        assert_eq!(qtm_wave_gaussian(g, 1.0, 4.0, 0.0, &mut w), QtmStatus::Ok);
        assert_eq!(qtm_wave_len(w), 2048);
        let mut norm = 0.0;
        assert_eq!(qtm_wave_norm(w, &mut norm), QtmStatus::Ok);
        assert!((norm - 1.0).abs() < 1e-12);
        let mut buf = vec![0.0; 4096];
        assert_eq!(qtm_wave_amplitudes(w, buf.as_mut_ptr(), buf.len()), QtmStatus::Ok);
        let dx = 64.0 / 2048.0;
        let total: f64 = buf.chunks(2).map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(qtm_wave_amplitudes(w, buf.as_mut_ptr(), 10), QtmStatus::InvalidArgument);
        assert!(last_error().contains("4096"));
        qtm_wave_free(w);
        qtm_grid_free(g);
        qtm_grid_free(ptr::null_mut());
        qtm_wave_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(qtm_grid_new(3, 0.0, 1.0, 64, &mut g), QtmStatus::InvalidParameter);
        assert!(g.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(qtm_grid_new(1, 0.0, 1.0, 64, ptr::null_mut()), QtmStatus::InvalidArgument);
        assert_eq!(qtm_wave_norm(ptr::null(), &mut 0.0), QtmStatus::InvalidArgument);
        assert!(last_error().contains("null"));

        let g = line_grid();
        let mut w = ptr::null_mut();
        assert_eq!(qtm_wave_gaussian(g, -1.0, 4.0, 0.0, &mut w), QtmStatus::InvalidParameter);
        assert_eq!(qtm_wave_gaussian(g, 1.0, 4.0, 0.0, &mut w), QtmStatus::Ok);
        let before = qtm_wave_norm(w, &mut 0.0);
        assert_eq!(before, QtmStatus::Ok);
        // runs off the edge of the box
        assert_eq!(qtm_wave_evolve_free(w, 20.0), QtmStatus::BoundaryContamination);
        assert!(last_error().contains("boundary"));
        let mut t = -1.0;
        qtm_wave_time(w, &mut t);
        assert_eq!(t, 0.0);

        let mut g2 = ptr::null_mut();
        qtm_grid_new(1, -20.0, 44.0, 1024, &mut g2);
        let mut other = ptr::null_mut();
        qtm_wave_gaussian(g2, 1.0, 4.0, 0.0, &mut other);
        assert_eq!(qtm_norm_correlation(w, other, &mut 0.0), QtmStatus::GridMismatch);

        let missing = CString::new("/nonexistent/run.toml").unwrap();
        let mut run = ptr::null_mut();
        assert_eq!(qtm_run_config(missing.as_ptr(), &mut run), QtmStatus::Io);
        assert!(run.is_null());

        qtm_wave_free(other);
        qtm_wave_free(w);
        qtm_grid_free(g2);
        qtm_grid_free(g);
    }
}

#[test]
fn kick_and_free_evolution() {
    unsafe {
        let g = line_grid();
        let mut psi0 = ptr::null_mut();
        qtm_wave_gaussian(g, 1.0, 4.0, 0.0, &mut psi0);
        let mut psi = ptr::null_mut();
        assert_eq!(qtm_wave_clone(psi0, &mut psi), QtmStatus::Ok);

        let mut n = 0.0;
        assert_eq!(qtm_norm_correlation(psi0, psi, &mut n), QtmStatus::Ok);
        assert!((n - 1.0).abs() < 1e-12);

        assert_eq!(qtm_wave_evolve_free(psi, 1.0), QtmStatus::Ok);
        let mut t = 0.0;
        qtm_wave_time(psi, &mut t);
        assert_eq!(t, 1.0);
        let mut spread = 0.0;
        qtm_norm_correlation(psi0, psi, &mut spread);
        assert!(spread < 0.1);

        let mut before = vec![0.0; 4096];
        qtm_wave_amplitudes(psi, before.as_mut_ptr(), 4096);
        assert_eq!(qtm_wave_kick(psi, 40.0), QtmStatus::Ok);
        let mut after = vec![0.0; 4096];
        qtm_wave_amplitudes(psi, after.as_mut_ptr(), 4096);
        for (a, b) in before.chunks(2).zip(after.chunks(2)) {
            let ra = a[0] * a[0] + a[1] * a[1];
            let rb = b[0] * b[0] + b[1] * b[1];
            assert!((ra - rb).abs() <= 1e-15 * ra.max(1e-300));
        }
        assert_eq!(qtm_wave_kick(psi, f64::NAN), QtmStatus::InvalidArgument);

        let mut l = 0.0;
        assert_eq!(qtm_lambda_min_1d(1.0, 4.0, &mut l), QtmStatus::Ok);
        assert!((l - 19.27).abs() < 0.01);
        assert_eq!(qtm_lambda_min_2d(6.0, 2.0, 4.0, &mut l), QtmStatus::Ok);
        assert!((l - 2421.8).abs() < 0.1);
        assert_eq!(qtm_lambda_min_1d(0.0, 4.0, &mut l), QtmStatus::InvalidParameter);

        qtm_wave_free(psi);
        qtm_wave_free(psi0);
        qtm_grid_free(g);
    }
}

#[test]
fn ring_packet() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(qtm_grid_new(2, -16.0, 16.0, 128, &mut g), QtmStatus::Ok);
        assert_eq!(qtm_grid_len(g), 128 * 128);
        let mut w = ptr::null_mut();
        assert_eq!(qtm_wave_ring(g, 6.0, 1.0, 2.0, &mut w), QtmStatus::Ok);
        let mut norm = 0.0;
        qtm_wave_norm(w, &mut norm);
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(qtm_wave_ring(g, 30.0, 1.0, 2.0, &mut w), QtmStatus::InvalidParameter);
        qtm_wave_free(w);
        qtm_grid_free(g);
    }
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("psi.qtmw").to_str().unwrap()).unwrap();
    unsafe {
        let g = line_grid();
        let mut w = ptr::null_mut();
        qtm_wave_gaussian(g, 1.5, 2.0, 3.0, &mut w);
        qtm_wave_evolve_free(w, 0.5);
        assert_eq!(qtm_wave_save(w, path.as_ptr()), QtmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(qtm_wave_load(path.as_ptr(), &mut back), QtmStatus::Ok);
        let mut a = vec![0.0; 4096];
        let mut b = vec![0.0; 4096];
        qtm_wave_amplitudes(w, a.as_mut_ptr(), 4096);
        qtm_wave_amplitudes(back, b.as_mut_ptr(), 4096);
        assert_eq!(a, b);
        let mut t = 0.0;
        qtm_wave_time(back, &mut t);
        assert_eq!(t, 0.5);
        assert_eq!(qtm_wave_save(w, ptr::null()), QtmStatus::InvalidArgument);
        qtm_wave_free(back);
        qtm_wave_free(w);
        qtm_grid_free(g);
    }
}

#[test]
fn run_from_configuration() {
    let preset = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets/qtm1d_fig1a_lambda40.toml");
    let path = CString::new(preset.to_str().unwrap()).unwrap();
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(qtm_run_config(path.as_ptr(), &mut run), QtmStatus::Ok);
        let (mut peak, mut time, mut present) = (0.0, 0.0, 0);
        assert_eq!(qtm_run_echo(run, &mut peak, &mut time, &mut present), QtmStatus::Ok);
        assert_eq!(present, 1);
        assert!(peak > 0.45 && peak < 0.75);
        assert!(time > 1.0 && time < 4.0);
        assert_eq!(qtm_run_echo(run, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), QtmStatus::Ok);

        let n = qtm_run_sample_count(run);
        assert!(n > 100);
        let mut ts = vec![0.0; n];
        let mut ns = vec![0.0; n];
        assert_eq!(qtm_run_samples(run, ts.as_mut_ptr(), ns.as_mut_ptr(), n), QtmStatus::Ok);
        assert_eq!(ts[0], 0.0);
        assert!((ns[0] - 1.0).abs() < 1e-12);
        let i = ns.iter().enumerate().filter(|(i, _)| ts[*i] > 1.1).max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(ts[i], time);
        assert_eq!(qtm_run_samples(run, ts.as_mut_ptr(), ns.as_mut_ptr(), n - 1), QtmStatus::InvalidArgument);

        let mut last = ptr::null_mut();
        assert_eq!(qtm_run_final_state(run, &mut last), QtmStatus::Ok);
        let mut t = 0.0;
        qtm_wave_time(last, &mut t);
        assert_eq!(t, 4.0);
        qtm_wave_free(last);
        qtm_run_free(run);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qtm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/qtm.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for handle in ["typedef struct QtmGrid QtmGrid;", "typedef struct QtmWave QtmWave;", "typedef struct QtmRun QtmRun;"] {
        assert!(header.contains(handle));
    }

    // the header compiles as C when a compiler is present
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("check.c");
    std::fs::write(&src, "#include \"qtm.h\"\nint main(void) { QtmStatus s = QTM_STATUS_OK; return (int)s; }\n").unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
