//! C ABI over `qtm-core`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every entry point returns a
//! [`QtmStatus`]; on failure a message is available from
//! [`qtm_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qtm_core::config::RunConfig;
use qtm_core::echo::norm_correlation;
use qtm_core::mirror;
use qtm_core::simulation::RunOutcome;
use qtm_core::wavefunction::{gaussian_1d, gaussian_ring_2d, io};
use qtm_core::{Grid, PacketSpec1D, PacketSpecRing, Propagator, QtmError, WaveFunction};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtmStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or a buffer of the wrong size.
    InvalidArgument = 1,
    /// Rejected grid, packet, pulse or configuration.
    InvalidParameter = 2,
    /// The state reached the edge of the box.
    BoundaryContamination = 3,
    /// Two states on different grids.
    GridMismatch = 4,
    Io = 5,
    /// Any other failure, including a caught panic.
    Internal = 6,
}

/// Spatial grid handle.
pub struct QtmGrid(Grid);

/// Wave function handle.
pub struct QtmWave(WaveFunction);

/// Completed run handle.
pub struct QtmRun(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &QtmError) -> QtmStatus {
    match err {
        QtmError::BoundaryContamination { .. } => QtmStatus::BoundaryContamination,
        QtmError::GridMismatch => QtmStatus::GridMismatch,
        QtmError::Io(_) | QtmError::Snapshot(_) => QtmStatus::Io,
        e if e.exit_code() == 1 => QtmStatus::InvalidParameter,
        _ => QtmStatus::Internal,
    }
}

struct Fail(QtmStatus, String);

impl From<QtmError> for Fail {
    fn from(e: QtmError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(QtmStatus::InvalidArgument, msg.to_string())
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> QtmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QtmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            QtmStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(invalid("path is null"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(Path::new(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_f64(out: *mut f64, value: f64) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = value;
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qtm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qtm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Periodic grid of `n` points per axis on `[x_min, x_max)` in `dim` = 1 or 2
/// dimensions.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_grid_new(
    dim: usize,
    x_min: f64,
    x_max: f64,
    n: usize,
    out: *mut *mut QtmGrid,
) -> QtmStatus {
    guard(|| put(out, QtmGrid(Grid::new(dim, x_min, x_max, n)?)))
}

/// # Safety
/// `grid` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qtm_grid_free(grid: *mut QtmGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of lattice points, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtm_grid_len(grid: *const QtmGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Normalized Gaussian line packet centred at `center` moving with `k`.
///
/// # Safety
/// `grid` must be a live 1D handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_gaussian(
    grid: *const QtmGrid,
    sigma: f64,
    k: f64,
    center: f64,
    out: *mut *mut QtmWave,
) -> QtmStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let spec = PacketSpec1D::new(sigma, k).with_center(center);
        put(out, QtmWave(gaussian_1d(&spec, &g.0)?))
    })
}

/// Normalized Gaussian ring of radius `radius` expanding with `k`.
///
/// # Safety
/// `grid` must be a live 2D handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_ring(
    grid: *const QtmGrid,
    radius: f64,
    sigma: f64,
    k: f64,
    out: *mut *mut QtmWave,
) -> QtmStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let spec = PacketSpecRing::new(radius, sigma, k);
        put(out, QtmWave(gaussian_ring_2d(&spec, &g.0)?))
    })
}

/// Independent copy of `wave`.
///
/// # Safety
/// `wave` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_clone(wave: *const QtmWave, out: *mut *mut QtmWave) -> QtmStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        put(out, QtmWave(w.0.clone()))
    })
}

/// # Safety
/// `wave` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_free(wave: *mut QtmWave) {
    if !wave.is_null() {
        drop(Box::from_raw(wave));
    }
}

/// Number of amplitudes, or 0 for a null handle.
///
/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_len(wave: *const QtmWave) -> usize {
    wave.as_ref().map_or(0, |w| w.0.amplitudes().len())
}

/// # Safety
/// `wave` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_time(wave: *const QtmWave, out: *mut f64) -> QtmStatus {
    guard(|| write_f64(out, deref(wave, "wave")?.0.time()))
}

/// L2 norm `√∫|ψ|²`.
///
/// # Safety
/// `wave` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_norm(wave: *const QtmWave, out: *mut f64) -> QtmStatus {
    guard(|| write_f64(out, deref(wave, "wave")?.0.norm()))
}

/// Copies the amplitudes as interleaved `re, im` pairs into `buf`, which must
/// hold exactly `2 * qtm_wave_len(wave)` doubles. Row-major in 2D.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_amplitudes(wave: *const QtmWave, buf: *mut f64, len: usize) -> QtmStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        let amps = w.0.amplitudes();
        if buf.is_null() || len != 2 * amps.len() {
            return Err(invalid(&format!("buffer must hold {} doubles", 2 * amps.len())));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (pair, z) in dst.chunks_exact_mut(2).zip(amps) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Exact free evolution over `duration` in place, with the boundary guard.
/// The state is left unchanged on failure.
///
/// # Safety
/// `wave` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_evolve_free(wave: *mut QtmWave, duration: f64) -> QtmStatus {
    guard(|| {
        let w = deref_mut(wave, "wave")?;
        if !duration.is_finite() {
            return Err(invalid("duration must be finite"));
        }
        let mut next = w.0.clone();
        Propagator::new(next.grid()).free_segment(&mut next, duration)?;
        w.0 = next;
        Ok(())
    })
}

/// Instantaneous kick `ψ → ψ e^{-iλ|ψ|²}` in place.
///
/// # Safety
/// `wave` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_kick(wave: *mut QtmWave, lambda: f64) -> QtmStatus {
    guard(|| {
        let w = deref_mut(wave, "wave")?;
        if !lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        mirror::apply_kick(&mut w.0, lambda);
        Ok(())
    })
}

/// Density correlation `N = ∫ρ₀ρ / sqrt(∫ρ₀² ∫ρ²)` of two states on the same
/// grid.
///
/// # Safety
/// Both handles must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_norm_correlation(
    reference: *const QtmWave,
    wave: *const QtmWave,
    out: *mut f64,
) -> QtmStatus {
    guard(|| {
        let r = deref(reference, "reference")?;
        let w = deref(wave, "wave")?;
        write_f64(out, norm_correlation(&r.0, &w.0)?)
    })
}

/// Threshold estimate for a line packet.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_lambda_min_1d(sigma: f64, k: f64, out: *mut f64) -> QtmStatus {
    guard(|| write_f64(out, mirror::lambda_min_1d(sigma, k)?))
}

/// Threshold estimate for a ring.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_lambda_min_2d(radius: f64, sigma: f64, k: f64, out: *mut f64) -> QtmStatus {
    guard(|| write_f64(out, mirror::lambda_min_2d(radius, sigma, k)?))
}

/// Writes `wave` as a binary QTMW snapshot.
///
/// # Safety
/// `wave` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_save(wave: *const QtmWave, path: *const c_char) -> QtmStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        Ok(io::save_snapshot(&w.0, path_arg(path)?)?)
    })
}

/// Reads a binary QTMW snapshot.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_wave_load(path: *const c_char, out: *mut *mut QtmWave) -> QtmStatus {
    guard(|| {
        let w = io::load_snapshot(path_arg(path)?)?;
        put(out, QtmWave(w))
    })
}

/// Loads a run configuration file and runs it to completion.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_config(path: *const c_char, out: *mut *mut QtmRun) -> QtmStatus {
    guard(|| {
        let cfg = RunConfig::load(path_arg(path)?)?;
        put(out, QtmRun(cfg.scenario.run()?))
    })
}

/// # Safety
/// `run` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_free(run: *mut QtmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Echo peak `N` and its time, and whether it clears the free baseline by
/// the echo threshold (1) or not (0). Any output pointer may be null.
///
/// # Safety
/// `run` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_echo(
    run: *const QtmRun,
    peak: *mut f64,
    time: *mut f64,
    present: *mut i32,
) -> QtmStatus {
    guard(|| {
        let r = &deref(run, "run")?.0.record;
        if !peak.is_null() {
            *peak = r.peak_strength();
        }
        if !time.is_null() {
            *time = r.peak_time();
        }
        if !present.is_null() {
            *present = i32::from(r.echo_present());
        }
        Ok(())
    })
}

/// Number of `N(t)` samples, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_sample_count(run: *const QtmRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.record.samples.len())
}

/// Copies sample times and `N(t)` into arrays of exactly
/// `qtm_run_sample_count(run)` entries.
///
/// # Safety
/// `times` and `norm_corr` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_samples(
    run: *const QtmRun,
    times: *mut f64,
    norm_corr: *mut f64,
    len: usize,
) -> QtmStatus {
    guard(|| {
        let samples = &deref(run, "run")?.0.record.samples;
        if times.is_null() || norm_corr.is_null() || len != samples.len() {
            return Err(invalid(&format!("buffers must hold {} doubles", samples.len())));
        }
        let t = std::slice::from_raw_parts_mut(times, len);
        let n = std::slice::from_raw_parts_mut(norm_corr, len);
        for (i, s) in samples.iter().enumerate() {
            t[i] = s.t;
            n[i] = s.norm_corr;
        }
        Ok(())
    })
}

/// Copy of the state at the end of the run.
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qtm_run_final_state(run: *const QtmRun, out: *mut *mut QtmWave) -> QtmStatus {
    guard(|| {
        let r = deref(run, "run")?;
        put(out, QtmWave(r.0.final_state.clone()))
    })
}
