//! Uniform periodic lattices and their conjugate wavenumber lattices.
//!
//! A [`Grid`] is a line or a square with `n` points per axis on `[x_min, x_max)`.
//! Fields on a 2D grid are stored row-major with the first index along `x`:
//! the value at `(x_i, y_j)` lives at `i * n + j`.
//!
//! [`Spectral`] owns the FFT plans and scratch space for one grid; it is the
//! per-worker transform workspace and is never shared between threads.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{QtmError, Result};

const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
}

impl Grid {
    /// Builds a `dim`-dimensional grid with `n` points per axis on `[x_min, x_max)`.
    pub fn new(dim: usize, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(QtmError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(QtmError::InvalidGrid("extent must be finite".into()));
        }
        if x_max <= x_min {
            return Err(QtmError::InvalidGrid(format!(
                "extent [{x_min}, {x_max}) is empty or negative"
            )));
        }
        if !n.is_power_of_two() || n < MIN_POINTS {
            return Err(QtmError::InvalidGrid(format!(
                "points per axis must be a power of two >= {MIN_POINTS}, got {n}"
            )));
        }
        let dx = (x_max - x_min) / n as f64;
        Ok(Self {
            dim,
            x_min,
            x_max,
            n,
            dx,
            wavenumbers: fft_wavenumbers(n, dx),
        })
    }

    pub fn line(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(1, x_min, x_max, n)
    }

    pub fn square(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(2, x_min, x_max, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Volume element `dx^D` used in all lattice integrals.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Total volume of the periodic box.
    pub fn volume(&self) -> f64 {
        self.extent().powi(self.dim as i32)
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }

    /// Per-axis wavenumbers in standard DFT order, `2π·fftfreq(n, dx)`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Per-axis coordinates `x_min + j·dx`.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coordinate(j)).collect()
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// Position of flat lattice index `idx`; the second component is zero in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coordinate(idx), 0.0],
            _ => [self.coordinate(idx / self.n), self.coordinate(idx % self.n)],
        }
    }

    /// Distance from the origin of flat lattice index `idx`.
    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x.hypot(y)
    }

    /// `|k|²` at every lattice point, in the same layout as fields.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = &self.wavenumbers;
        match self.dim {
            1 => k.iter().map(|q| q * q).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for kx in k {
                    out.extend(k.iter().map(|ky| kx * kx + ky * ky));
                }
                out
            }
        }
    }

    /// Flat indices of the points within `width` lattice sites of any face of the box.
    pub fn boundary_indices(&self, width: usize) -> Vec<usize> {
        let n = self.n;
        let near = |j: usize| j < width || j + width >= n;
        match self.dim {
            1 => (0..n).filter(|&j| near(j)).collect(),
            _ => (0..self.len())
                .filter(|&idx| near(idx / n) || near(idx % n))
                .collect(),
        }
    }

    /// Whether a disc of radius `r` about the origin stays inside the box.
    pub fn contains_disc(&self, r: f64) -> bool {
        r <= -self.x_min && r <= self.x_max - self.dx
    }

    /// Whether the interval `[lo, hi]` stays inside the box along one axis.
    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        lo >= self.x_min && hi <= self.x_max - self.dx
    }
}

fn fft_wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * dx);
    (0..n)
        .map(|j| {
            let m = if j < n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            m * scale
        })
        .collect()
}

/// FFT workspace bound to one grid.
///
/// `forward` is the unnormalized DFT; `inverse` includes the `1/N` factor so
/// that `inverse(forward(ψ)) = ψ`.
pub struct Spectral {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            dim: grid.dim(),
            n: grid.n(),
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        let fft = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        // Row transforms over the whole buffer at once; for 2D transpose,
        // transform the former columns, and transpose back.
        fft.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            transpose_square(data, self.n);
            fft.process_with_scratch(data, &mut self.scratch);
            transpose_square(data, self.n);
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + TILE).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Spectral multiplier of the Laplacian: `-|k|²` at every lattice point.
pub fn laplacian_symbol(grid: &Grid) -> Vec<f64> {
    grid.k_squared().into_iter().map(|k2| -k2).collect()
}

/// `∇²ψ` evaluated spectrally.
pub fn laplacian(field: &[Complex64], grid: &Grid) -> Vec<Complex64> {
    let mut spectral = Spectral::new(grid);
    let mut buf = field.to_vec();
    spectral.forward(&mut buf);
    for (z, s) in buf.iter_mut().zip(laplacian_symbol(grid)) {
        *z *= s;
    }
    spectral.inverse(&mut buf);
    buf
}

/// Spectral gradient of a complex field, one component per axis.
///
/// The Nyquist mode is dropped from first derivatives, which keeps the
/// derivative of a real field real.
pub fn gradient(field: &[Complex64], grid: &Grid) -> Vec<Vec<Complex64>> {
    let mut spectral = Spectral::new(grid);
    gradient_with(&mut spectral, field, grid)
}

pub(crate) fn gradient_with(
    spectral: &mut Spectral,
    field: &[Complex64],
    grid: &Grid,
) -> Vec<Vec<Complex64>> {
    let mut transformed = field.to_vec();
    spectral.forward(&mut transformed);
    let n = grid.n();
    let k = derivative_wavenumbers(grid);
    (0..grid.dim())
        .map(|axis| {
            let mut buf: Vec<Complex64> = transformed
                .iter()
                .enumerate()
                .map(|(idx, z)| {
                    let j = match (grid.dim(), axis) {
                        (1, _) => idx,
                        (_, 0) => idx / n,
                        _ => idx % n,
                    };
                    z * Complex64::new(0.0, k[j])
                })
                .collect();
            spectral.inverse(&mut buf);
            buf
        })
        .collect()
}

/// Spectral gradient of a real field, one component per axis.
pub fn gradient_real(field: &[f64], grid: &Grid) -> Vec<Vec<f64>> {
    let complex: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    gradient(&complex, grid)
        .into_iter()
        .map(|component| component.into_iter().map(|z| z.re).collect())
        .collect()
}

fn derivative_wavenumbers(grid: &Grid) -> Vec<f64> {
    let mut k = grid.wavenumbers().to_vec();
    k[grid.n() / 2] = 0.0;
    k
}
