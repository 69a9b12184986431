//! Closed-form free-evolution references.
//!
//! These are independent of the spectral propagator and serve as ground truth
//! in tests, the `validate` command and the acceptance suite. Global phases
//! are analytic, never fitted.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{QtmError, Result};
use crate::grid::Grid;
use crate::wavefunction::{PacketSpec1D, PacketSpecRing, WaveFunction};

/// Freely evolved line packet at time `t`:
///
/// `(πσ²)^{-1/4} (1 + it/σ²)^{-1/2} exp(-(x - x₀ - kt)² / (2σ²(1 + it/σ²)) + ikx - ik²t/2)`.
pub fn gaussian_free_1d(spec: &PacketSpec1D, t: f64, grid: &Grid) -> Result<WaveFunction> {
    spec.validate()?;
    if grid.dim() != 1 {
        return Err(QtmError::InvalidParameter(
            "line oracle needs a 1D grid".into(),
        ));
    }
    let s2 = spec.sigma * spec.sigma;
    let spread = Complex64::new(1.0, t / s2);
    let prefactor = (PI * s2).powf(-0.25) / spread.sqrt();
    let amplitudes = grid
        .coordinates()
        .into_iter()
        .map(|x| {
            let xi = x - spec.center - spec.k * t;
            let exponent = -xi * xi / (2.0 * s2 * spread)
                + Complex64::new(0.0, spec.k * x - 0.5 * spec.k * spec.k * t);
            prefactor * exponent.exp()
        })
        .collect();
    WaveFunction::new(grid.clone(), amplitudes, t)
}

/// Validity regime of the asymptotic ring solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingAsymptoticRegime {
    /// `t / σ²`.
    pub epsilon: f64,
    /// `k R`.
    pub k_r: f64,
    /// `σ / R`.
    pub sigma_over_r: f64,
}

impl RingAsymptoticRegime {
    pub const MAX_EPSILON: f64 = 0.1;
    pub const MAX_SIGMA_OVER_R: f64 = 1.0 / 3.0;
    pub const MIN_K_R: f64 = 10.0;

    pub fn new(spec: &PacketSpecRing, t: f64) -> Self {
        Self {
            epsilon: t / (spec.sigma * spec.sigma),
            k_r: spec.k * spec.radius,
            sigma_over_r: spec.sigma / spec.radius,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.epsilon < Self::MAX_EPSILON
            && self.sigma_over_r < Self::MAX_SIGMA_OVER_R
            && self.k_r > Self::MIN_K_R
    }
}

/// Asymptotic freely evolved ring at time `t` for `ε = t/σ² ≪ 1`, `σ ≪ R`,
/// `kR ≫ 1`:
///
/// `sqrt(1 / (2π^{3/2} σ r_t)) exp(-(r - r_t)² / 2σ² + ikr - ik²t/2)`, `r_t = R + kt`.
///
/// The phase convention matches [`crate::wavefunction::gaussian_ring_2d`], so at
/// `t = 0` this is the initial ring with its analytic prefactor.
pub fn ring_free_2d(spec: &PacketSpecRing, t: f64, grid: &Grid) -> Result<WaveFunction> {
    spec.validate()?;
    if grid.dim() != 2 {
        return Err(QtmError::InvalidParameter(
            "ring oracle needs a 2D grid".into(),
        ));
    }
    let regime = RingAsymptoticRegime::new(spec, t);
    if !regime.is_valid() {
        log::warn!(
            "ring oracle outside its validity regime: eps={:.3}, sigma/R={:.3}, kR={:.1}",
            regime.epsilon,
            regime.sigma_over_r,
            regime.k_r
        );
    }
    let r_t = ring_radius_at(spec, t);
    let a = (1.0 / (2.0 * PI.powf(1.5) * spec.sigma * r_t)).sqrt();
    let global = -0.5 * spec.k * spec.k * t;
    let amplitudes = (0..grid.len())
        .map(|i| {
            let r = grid.radius(i);
            let u = (r - r_t) / spec.sigma;
            Complex64::from_polar(a * (-0.5 * u * u).exp(), spec.k * r + global)
        })
        .collect();
    WaveFunction::new(grid.clone(), amplitudes, t)
}

/// Radius `R + kt` of the freely expanding ring.
pub fn ring_radius_at(spec: &PacketSpecRing, t: f64) -> f64 {
    spec.radius + spec.k * t
}

/// Normalized plane wave `exp(iq·x - i|q|²t/2) / sqrt(V)`; `q` must lie on the lattice.
pub fn plane_wave_free(q: &[f64], t: f64, grid: &Grid) -> Result<WaveFunction> {
    if q.len() != grid.dim() {
        return Err(QtmError::InvalidParameter(format!(
            "wavevector has {} components for a {}D grid",
            q.len(),
            grid.dim()
        )));
    }
    let unit = 2.0 * PI / grid.extent();
    for &qi in q {
        let m = qi / unit;
        if (m - m.round()).abs() > 1e-9 || qi.abs() >= grid.nyquist() {
            return Err(QtmError::InvalidParameter(format!(
                "wavenumber {qi} is not on the lattice (spacing {unit})"
            )));
        }
    }
    let q2: f64 = q.iter().map(|v| v * v).sum();
    let amp = 1.0 / grid.volume().sqrt();
    let amplitudes = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let phase: f64 = q.iter().zip(p).map(|(qi, xi)| qi * xi).sum::<f64>() - 0.5 * q2 * t;
            Complex64::from_polar(amp, phase)
        })
        .collect();
    WaveFunction::new(grid.clone(), amplitudes, t)
}

/// `sqrt(Σ|a - b|² dx^D)`.
pub fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(QtmError::GridMismatch);
    }
    let sum: f64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok((sum * a.grid().cell_volume()).sqrt())
}

/// `|⟨a|b⟩|`.
pub fn fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(QtmError::GridMismatch);
    }
    let overlap: Complex64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm() * a.grid().cell_volume())
}
