//! Wave packets on a [`Grid`] and their observables.

pub mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QtmError, Result};
use crate::grid::{self, Grid, Spectral};

/// Complex amplitude field on a grid at dimensionless time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(QtmError::InvalidParameter(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QtmError::InvalidParameter(
                "amplitudes must be finite".into(),
            ));
        }
        Ok(Self {
            grid,
            amplitudes,
            time,
        })
    }

    /// Builds a state from amplitudes and rescales it to unit norm.
    pub fn normalized(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        let mut psi = Self::new(grid, amplitudes, time)?;
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(QtmError::InvalidParameter(
                "cannot normalize a zero field".into(),
            ));
        }
        psi.scale(1.0 / norm);
        Ok(psi)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn scale(&mut self, factor: f64) {
        self.amplitudes.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `sqrt(Σ|ψ|² dx^D)`.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Probability density `|ψ|²`.
    pub fn density(&self) -> Vec<f64> {
        density(&self.amplitudes)
    }

    /// Probability current `Im(ψ* ∇ψ)`, one component per axis.
    pub fn current(&self) -> Vec<Vec<f64>> {
        let mut spectral = Spectral::new(&self.grid);
        self.current_with(&mut spectral)
    }

    pub(crate) fn current_with(&self, spectral: &mut Spectral) -> Vec<Vec<f64>> {
        grid::gradient_with(spectral, &self.amplitudes, &self.grid)
            .into_iter()
            .map(|component| {
                self.amplitudes
                    .iter()
                    .zip(component)
                    .map(|(psi, dpsi)| (psi.conj() * dpsi).im)
                    .collect()
            })
            .collect()
    }

    /// `⟨x⟩` per axis.
    pub fn mean_position(&self) -> Vec<f64> {
        let rho = self.density();
        let total: f64 = rho.iter().sum();
        (0..self.grid.dim())
            .map(|axis| {
                rho.iter()
                    .enumerate()
                    .map(|(i, r)| r * self.grid.point(i)[axis])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    /// Variance of the position distribution along the first axis.
    pub fn position_variance(&self) -> f64 {
        let rho = self.density();
        let total: f64 = rho.iter().sum();
        let mean = self.mean_position()[0];
        rho.iter()
            .enumerate()
            .map(|(i, r)| r * (self.grid.point(i)[0] - mean).powi(2))
            .sum::<f64>()
            / total
    }

    /// `⟨-i∇⟩` per axis, evaluated spectrally.
    pub fn mean_momentum(&self) -> Vec<f64> {
        let mut buf = self.amplitudes.clone();
        Spectral::new(&self.grid).forward(&mut buf);
        let n = self.grid.n();
        let k = self.grid.wavenumbers();
        let total: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
        (0..self.grid.dim())
            .map(|axis| {
                buf.iter()
                    .enumerate()
                    .map(|(idx, z)| {
                        let j = match (self.grid.dim(), axis) {
                            (1, _) => idx,
                            (_, 0) => idx / n,
                            _ => idx % n,
                        };
                        z.norm_sqr() * k[j]
                    })
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    /// Kinetic energy `Σ |k|² |ψ̃|² / 2`, normalized like the position-space norm.
    pub fn kinetic_energy(&self) -> f64 {
        let mut buf = self.amplitudes.clone();
        Spectral::new(&self.grid).forward(&mut buf);
        let k2 = self.grid.k_squared();
        let parseval = self.grid.cell_volume() / self.grid.len() as f64;
        buf.iter()
            .zip(k2)
            .map(|(z, q2)| 0.5 * q2 * z.norm_sqr())
            .sum::<f64>()
            * parseval
    }

    /// Position of the density maximum: `x` in 1D, distance from the origin in 2D.
    pub fn peak_position(&self) -> f64 {
        let (idx, _) = self
            .amplitudes
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, z)| {
                let r = z.norm_sqr();
                if r > best.1 {
                    (i, r)
                } else {
                    best
                }
            });
        match self.grid.dim() {
            1 => self.grid.point(idx)[0],
            _ => self.grid.radius(idx),
        }
    }

    /// Fraction of the norm within `width` sites of the box faces.
    pub fn boundary_fraction(&self, boundary: &[usize]) -> f64 {
        let edge: f64 = boundary.iter().map(|&i| self.amplitudes[i].norm_sqr()).sum();
        let total: f64 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }
}

pub fn density(amplitudes: &[Complex64]) -> Vec<f64> {
    amplitudes.iter().map(|z| z.norm_sqr()).collect()
}

/// Line packet `(πσ²)^{-1/4} exp(-(x-x₀)²/2σ² + ikx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec1D {
    pub sigma: f64,
    pub k: f64,
    #[serde(default)]
    pub center: f64,
}

impl PacketSpec1D {
    pub fn new(sigma: f64, k: f64) -> Self {
        Self {
            sigma,
            k,
            center: 0.0,
        }
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(QtmError::InvalidParameter(format!(
                "packet width must be positive, got {}",
                self.sigma
            )));
        }
        if !self.k.is_finite() || !self.center.is_finite() {
            return Err(QtmError::InvalidParameter(
                "packet momentum and center must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Width of the freely spread packet at time `t`: `sqrt(σ² + t²/σ²)`.
    pub fn width_at(&self, t: f64) -> f64 {
        (self.sigma.powi(2) + (t / self.sigma).powi(2)).sqrt()
    }
}

/// Radially expanding Gaussian ring of radius `R`, width `σ` and radial momentum `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpecRing {
    pub radius: f64,
    pub sigma: f64,
    pub k: f64,
}

impl PacketSpecRing {
    pub fn new(radius: f64, sigma: f64, k: f64) -> Self {
        Self { radius, sigma, k }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.sigma > 0.0 && self.k > 0.0)
            || !(self.radius.is_finite() && self.sigma.is_finite() && self.k.is_finite())
        {
            return Err(QtmError::InvalidParameter(format!(
                "ring needs positive finite radius, width and momentum, got R={}, sigma={}, k={}",
                self.radius, self.sigma, self.k
            )));
        }
        if self.radius < 3.0 * self.sigma {
            log::warn!(
                "ring radius {} is below 3 sigma ({}); the analytic normalization is inaccurate",
                self.radius,
                3.0 * self.sigma
            );
        }
        Ok(())
    }

    /// Analytic normalization prefactor `sqrt(1 / (2π^{3/2} R σ))`.
    pub fn prefactor(&self) -> f64 {
        (1.0 / (2.0 * PI.powf(1.5) * self.radius * self.sigma)).sqrt()
    }
}

/// Normalized line packet at `t = 0`.
pub fn gaussian_1d(spec: &PacketSpec1D, grid: &Grid) -> Result<WaveFunction> {
    spec.validate()?;
    if grid.dim() != 1 {
        return Err(QtmError::InvalidParameter(
            "line packet needs a 1D grid".into(),
        ));
    }
    let (lo, hi) = (spec.center - 6.0 * spec.sigma, spec.center + 6.0 * spec.sigma);
    if !grid.contains_interval(lo, hi) {
        return Err(QtmError::PacketDoesNotFit(format!(
            "[{lo}, {hi}] exceeds [{}, {})",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let prefactor = (PI * spec.sigma * spec.sigma).powf(-0.25);
    let amplitudes = grid
        .coordinates()
        .into_iter()
        .map(|x| {
            let u = (x - spec.center) / spec.sigma;
            Complex64::from_polar(prefactor * (-0.5 * u * u).exp(), spec.k * x)
        })
        .collect();
    WaveFunction::normalized(grid.clone(), amplitudes, 0.0)
}

/// Ring amplitudes with the analytic prefactor, before numerical renormalization.
pub fn ring_amplitudes(spec: &PacketSpecRing, grid: &Grid) -> Vec<Complex64> {
    let a = spec.prefactor();
    (0..grid.len())
        .map(|i| {
            let r = grid.radius(i);
            let u = (r - spec.radius) / spec.sigma;
            Complex64::from_polar(a * (-0.5 * u * u).exp(), spec.k * r)
        })
        .collect()
}

/// Normalized Gaussian ring at `t = 0`.
pub fn gaussian_ring_2d(spec: &PacketSpecRing, grid: &Grid) -> Result<WaveFunction> {
    spec.validate()?;
    if grid.dim() != 2 {
        return Err(QtmError::InvalidParameter(
            "ring packet needs a 2D grid".into(),
        ));
    }
    let outer = spec.radius + 6.0 * spec.sigma;
    if !grid.contains_disc(outer) {
        return Err(QtmError::PacketDoesNotFit(format!(
            "ring reaches radius {outer} but the box is [{}, {})²",
            grid.x_min(),
            grid.x_max()
        )));
    }
    WaveFunction::normalized(grid.clone(), ring_amplitudes(spec, grid), 0.0)
}
