//! Time evolution under `i ∂ψ/∂t = -½∇²ψ + λ f(t - t₀) |ψ|² ψ`.
//!
//! Outside the pulse window the equation is linear and is solved exactly in
//! spectral space for any step. Inside `|t - t₀| ≤ 5Δt` a symmetric Strang
//! splitting alternates half kinetic steps with a full nonlinear phase step.
//! The nonlinear step leaves `|ψ|` unchanged, so its phase uses the exact
//! integral of the envelope over the step, `λ|ψ|²[F(t+h-t₀) - F(t-t₀)]` with
//! `F` the Gaussian CDF. The envelope mass outside the window is folded into
//! the first and last steps so the total imprinted phase is exactly `λ|ψ|²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QtmError, Result};
use crate::grid::{Grid, Spectral};
use crate::mirror;
use crate::wavefunction::WaveFunction;

/// Half-width of the refined window around the pulse, in units of `Δt`.
pub const PULSE_WINDOW_WIDTHS: f64 = 5.0;

/// Default edge-density tolerance of the boundary guard.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Lattice sites from each face watched by the boundary guard.
pub const BOUNDARY_WIDTH: usize = 5;

const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseKind {
    /// `f = δ(t - t₀)`.
    Instantaneous,
    /// `f(ζ) = exp(-ζ²/2Δt²) / (sqrt(2π) Δt)`.
    Gaussian { width: f64 },
}

/// Time envelope `λ f(t - t₀)` of the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProfile {
    pub kind: PulseKind,
    pub strength: f64,
    pub center: f64,
}

impl PulseProfile {
    pub fn instantaneous(strength: f64) -> Self {
        Self {
            kind: PulseKind::Instantaneous,
            strength,
            center: 1.0,
        }
    }

    pub fn gaussian(strength: f64, width: f64) -> Self {
        Self {
            kind: PulseKind::Gaussian { width },
            strength,
            center: 1.0,
        }
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn width(&self) -> Option<f64> {
        match self.kind {
            PulseKind::Instantaneous => None,
            PulseKind::Gaussian { width } => Some(width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(QtmError::InvalidParameter(format!(
                "pulse strength must be finite and >= 0, got {}",
                self.strength
            )));
        }
        if !(self.center > 0.0 && self.center.is_finite()) {
            return Err(QtmError::InvalidParameter(format!(
                "pulse center must be positive, got {}",
                self.center
            )));
        }
        if let PulseKind::Gaussian { width } = self.kind {
            if !(width > 0.0 && width <= 0.01 * self.center) {
                return Err(QtmError::InvalidParameter(format!(
                    "pulse width must lie in (0, 0.01 t0] = (0, {}], got {width}",
                    0.01 * self.center
                )));
            }
        }
        Ok(())
    }

    /// Interval on which the pulse is resolved with refined steps.
    pub fn window(&self) -> (f64, f64) {
        match self.kind {
            PulseKind::Instantaneous => (self.center, self.center),
            PulseKind::Gaussian { width } => (
                self.center - PULSE_WINDOW_WIDTHS * width,
                self.center + PULSE_WINDOW_WIDTHS * width,
            ),
        }
    }

    /// `∫_{-∞}^{t} f(s - t₀) ds`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let z = t - self.center;
        match self.kind {
            PulseKind::Instantaneous => {
                if z < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            PulseKind::Gaussian { width } => {
                0.5 * (1.0 + libm::erf(z / (std::f64::consts::SQRT_2 * width)))
            }
        }
    }

    /// Envelope `f(t - t₀)`; zero everywhere for the instantaneous kind.
    pub fn envelope(&self, t: f64) -> f64 {
        match self.kind {
            PulseKind::Instantaneous => 0.0,
            PulseKind::Gaussian { width } => {
                let z = (t - self.center) / width;
                (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * width)
            }
        }
    }
}

/// Step sizes and sampling for one evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub t_end: f64,
    /// Base step; samples are taken every `stride` base steps.
    pub dt: f64,
    /// Step inside the pulse window.
    pub dt_pulse: f64,
    pub stride: usize,
}

impl EvolutionPlan {
    pub const DEFAULT_T_END: f64 = 4.0;
    pub const DEFAULT_STRIDE: usize = 2;
    /// Pulse steps per pulse width.
    pub const PULSE_RESOLUTION: f64 = 50.0;

    /// Default plan: `dt = 1e-3 t_end`, `dt_pulse = Δt/50`, every second step sampled.
    pub fn for_pulse(pulse: &PulseProfile, t_end: f64) -> Self {
        let dt = 1e-3 * t_end;
        Self {
            t_end,
            dt,
            dt_pulse: pulse
                .width()
                .map_or(dt, |w| w / Self::PULSE_RESOLUTION),
            stride: Self::DEFAULT_STRIDE,
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn validate(&self, pulse: &PulseProfile) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(QtmError::StepSize(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.dt > 0.0 && self.dt <= 1e-3 * self.t_end * (1.0 + 1e-9)) {
            return Err(QtmError::StepSize(format!(
                "dt must lie in (0, 1e-3 t_end] = (0, {}], got {}",
                1e-3 * self.t_end,
                self.dt
            )));
        }
        if self.stride == 0 {
            return Err(QtmError::StepSize("stride must be at least 1".into()));
        }
        if let Some(width) = pulse.width() {
            let limit = width / Self::PULSE_RESOLUTION;
            if !(self.dt_pulse > 0.0 && self.dt_pulse <= limit * (1.0 + 1e-9)) {
                return Err(QtmError::StepSize(format!(
                    "dt_pulse must lie in (0, width/50] = (0, {limit}], got {}",
                    self.dt_pulse
                )));
            }
        }
        let (w0, w1) = pulse.window();
        if w0 < 0.0 || w1 > self.t_end {
            return Err(QtmError::StepSize(format!(
                "pulse window [{w0}, {w1}] must lie inside [0, {}]",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Number of Strang steps across the pulse window.
    pub fn pulse_steps(&self, pulse: &PulseProfile) -> usize {
        let (w0, w1) = pulse.window();
        (((w1 - w0) / self.dt_pulse) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Receives the state at every sample of an evolution.
pub trait Observer {
    fn sample(&mut self, psi: &WaveFunction);

    /// Called once with the state right after the pulse.
    fn pulse_done(&mut self, _psi: &WaveFunction) {}
}

impl<F: FnMut(&WaveFunction)> Observer for F {
    fn sample(&mut self, psi: &WaveFunction) {
        self(psi)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn sample(&mut self, _psi: &WaveFunction) {}
}

/// Spectral propagator bound to one grid. Owns its FFT workspace; create one
/// per worker.
pub struct Propagator {
    grid: Grid,
    spectral: Spectral,
    k_squared: Vec<f64>,
    boundary: Vec<usize>,
    tolerance: Option<f64>,
    kinetic_sign: f64,
    spec_buf: Vec<Complex64>,
    phase_cache: Option<(f64, Vec<Complex64>)>,
}

impl Propagator {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            spectral: Spectral::new(grid),
            k_squared: grid.k_squared(),
            boundary: grid.boundary_indices(BOUNDARY_WIDTH),
            tolerance: Some(BOUNDARY_TOLERANCE),
            kinetic_sign: 1.0,
            spec_buf: vec![Complex64::new(0.0, 0.0); grid.len()],
            phase_cache: None,
        }
    }

    /// Disables the boundary guard (for extended states such as plane waves).
    pub fn without_guard(mut self) -> Self {
        self.tolerance = None;
        self
    }

    pub fn with_guard(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    /// Flips the sign of the kinetic term. Only for exercising the
    /// validation suite against a known-bad propagator.
    #[doc(hidden)]
    pub fn with_corrupted_kinetic_sign(mut self) -> Self {
        self.kinetic_sign = -1.0;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_grid(&self, psi: &WaveFunction) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(QtmError::GridMismatch);
        }
        Ok(())
    }

    /// Applies the boundary guard to `psi`.
    pub fn check_boundary(&self, psi: &WaveFunction) -> Result<()> {
        if let Some(tolerance) = self.tolerance {
            let fraction = psi.boundary_fraction(&self.boundary);
            if fraction > tolerance {
                return Err(QtmError::BoundaryContamination {
                    time: psi.time(),
                    fraction,
                    tolerance,
                });
            }
        }
        Ok(())
    }

    /// `exp(-i|k|²τ/2)` at every lattice point.
    fn kinetic_phase(&self, tau: f64) -> Vec<Complex64> {
        let c = -0.5 * tau * self.kinetic_sign;
        self.k_squared
            .iter()
            .map(|k2| {
                let (s, co) = (c * k2).sin_cos();
                Complex64::new(co, s)
            })
            .collect()
    }

    fn multiply_cached(&mut self, tau: f64) {
        let hit = matches!(&self.phase_cache, Some((t, _)) if *t == tau);
        if !hit {
            self.phase_cache = Some((tau, self.kinetic_phase(tau)));
        }
        let (_, phase) = self.phase_cache.as_ref().expect("cache filled above");
        for (z, p) in self.spec_buf.iter_mut().zip(phase) {
            *z *= p;
        }
    }

    /// Exact free evolution over `duration`.
    pub fn free_segment(&mut self, psi: &mut WaveFunction, duration: f64) -> Result<()> {
        self.check_grid(psi)?;
        if duration == 0.0 {
            return Ok(());
        }
        let phase = self.kinetic_phase(duration);
        let amps = psi.amplitudes_mut();
        self.spectral.forward(amps);
        for (z, p) in amps.iter_mut().zip(&phase) {
            *z *= p;
        }
        self.spectral.inverse(amps);
        psi.set_time(psi.time() + duration);
        self.check_boundary(psi)
    }

    /// Free evolution of `psi` through the ascending `times`, reporting the
    /// state at each. Costs one inverse transform per sample.
    pub fn sample_free(
        &mut self,
        psi: &mut WaveFunction,
        times: &[f64],
        observer: &mut dyn Observer,
    ) -> Result<()> {
        self.check_grid(psi)?;
        let start = psi.time();
        if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < start) {
            return Err(QtmError::StepSize(
                "free sampling times must be ascending and not before the state".into(),
            ));
        }
        let until = times.last().copied().unwrap_or(start);
        self.free_stretch(psi, times, until, observer)
    }

    /// Free evolution to each time in `samples` (ascending, after `psi.time()`)
    /// and then to `until`, reporting every sample.
    fn free_stretch(
        &mut self,
        psi: &mut WaveFunction,
        samples: &[f64],
        until: f64,
        observer: &mut dyn Observer,
    ) -> Result<()> {
        if until <= psi.time() + TIME_EPS && samples.is_empty() {
            return Ok(());
        }
        self.spec_buf.copy_from_slice(psi.amplitudes());
        let mut spec = std::mem::take(&mut self.spec_buf);
        self.spectral.forward(&mut spec);
        self.spec_buf = spec;
        let mut t = psi.time();
        let mut emit = |me: &mut Self, psi: &mut WaveFunction, target: f64| -> Result<()> {
            let tau = target - t;
            me.multiply_cached(tau);
            t = target;
            psi.amplitudes_mut().copy_from_slice(&me.spec_buf);
            me.spectral.inverse(psi.amplitudes_mut());
            psi.set_time(target);
            me.check_boundary(psi)
        };
        for &s in samples {
            emit(self, psi, s)?;
            observer.sample(psi);
        }
        if until > psi.time() + TIME_EPS {
            emit(self, psi, until)?;
        }
        Ok(())
    }

    /// Strang steps across the Gaussian pulse window. `psi` must sit at the
    /// window start. Samples in `samples` are reported at the first step end
    /// at or after each sample time.
    fn pulse_window(
        &mut self,
        psi: &mut WaveFunction,
        pulse: &PulseProfile,
        steps: usize,
        samples: &[f64],
        observer: &mut dyn Observer,
    ) -> Result<()> {
        let (w0, w1) = pulse.window();
        if (psi.time() - w0).abs() > 1e-9 {
            return Err(QtmError::StepSize(format!(
                "state at t = {} is not at the pulse window start {w0}",
                psi.time()
            )));
        }
        let h = (w1 - w0) / steps as f64;
        let half = self.kinetic_phase(0.5 * h);
        let full = self.kinetic_phase(h);
        let mut buf = psi.amplitudes().to_vec();
        self.spectral.forward(&mut buf);
        buf.iter_mut().zip(&half).for_each(|(z, p)| *z *= p);

        let mut next_sample = 0;
        let mut lower = 0.0;
        for i in 0..steps {
            let t_hi = if i + 1 == steps {
                w1
            } else {
                w0 + (i + 1) as f64 * h
            };
            let upper = if i + 1 == steps {
                1.0
            } else {
                pulse.cumulative(t_hi)
            };
            self.spectral.inverse(&mut buf);
            mirror::kick_amplitudes(&mut buf, pulse.strength * (upper - lower));
            self.spectral.forward(&mut buf);
            lower = upper;

            let due = next_sample < samples.len() && samples[next_sample] <= t_hi + TIME_EPS;
            if i + 1 == steps || due {
                buf.iter_mut().zip(&half).for_each(|(z, p)| *z *= p);
                let amps = psi.amplitudes_mut();
                amps.copy_from_slice(&buf);
                self.spectral.inverse(amps);
                psi.set_time(t_hi);
                if due {
                    self.check_boundary(psi)?;
                    observer.sample(psi);
                    while next_sample < samples.len() && samples[next_sample] <= t_hi + TIME_EPS {
                        next_sample += 1;
                    }
                }
                if i + 1 < steps {
                    buf.iter_mut().zip(&half).for_each(|(z, p)| *z *= p);
                }
            } else {
                buf.iter_mut().zip(&full).for_each(|(z, p)| *z *= p);
            }
        }
        self.check_boundary(psi)
    }

    /// Crosses the pulse window of a Gaussian pulse in `steps` Strang steps,
    /// or applies the exact kick for an instantaneous pulse. `psi` must be at
    /// the window start.
    pub fn advance_through_pulse(
        &mut self,
        psi: &mut WaveFunction,
        pulse: &PulseProfile,
        steps: usize,
    ) -> Result<()> {
        self.check_grid(psi)?;
        match pulse.kind {
            PulseKind::Instantaneous => {
                mirror::apply_kick(psi, pulse.strength);
                Ok(())
            }
            PulseKind::Gaussian { .. } => {
                self.pulse_window(psi, pulse, steps.max(1), &[], &mut NoObserver)
            }
        }
    }

    /// Evolves `psi` from its current time to `plan.t_end`.
    ///
    /// The observer sees the initial state, every sample time
    /// `t_start + j·dt·stride`, and the final state at `t_end`. For an
    /// instantaneous pulse a sample falling exactly on `t₀` shows the state
    /// just before the kick.
    pub fn evolve(
        &mut self,
        mut psi: WaveFunction,
        pulse: &PulseProfile,
        plan: &EvolutionPlan,
        observer: &mut dyn Observer,
    ) -> Result<WaveFunction> {
        self.check_grid(&psi)?;
        pulse.validate()?;
        plan.validate(pulse)?;
        let start = psi.time();
        let (w0, w1) = pulse.window();
        if w0 < start - TIME_EPS {
            return Err(QtmError::StepSize(format!(
                "pulse window starts at {w0}, before the initial time {start}"
            )));
        }
        let times = sample_times(start, plan);
        self.check_boundary(&psi)?;
        observer.sample(&psi);

        let split = |lo: f64, hi: f64, closed_hi: bool| -> Vec<f64> {
            times
                .iter()
                .copied()
                .filter(|&s| {
                    s > lo + TIME_EPS && (if closed_hi { s <= hi + TIME_EPS } else { s < hi - TIME_EPS })
                })
                .collect()
        };

        match pulse.kind {
            PulseKind::Instantaneous => {
                let before = split(start, w0, true);
                self.free_stretch(&mut psi, &before, w0, observer)?;
                mirror::apply_kick(&mut psi, pulse.strength);
            }
            PulseKind::Gaussian { .. } => {
                let before = split(start, w0, false);
                self.free_stretch(&mut psi, &before, w0, observer)?;
                let inside = split(w0 - TIME_EPS, w1, true);
                let steps = plan.pulse_steps(pulse);
                self.pulse_window(&mut psi, pulse, steps, &inside, observer)?;
            }
        }
        observer.pulse_done(&psi);

        let after = split(psi.time(), plan.t_end, true);
        self.free_stretch(&mut psi, &after, plan.t_end, observer)?;
        Ok(psi)
    }
}

/// Sample times `start + j·dt·stride` below `t_end`, followed by `t_end`.
pub fn sample_times(start: f64, plan: &EvolutionPlan) -> Vec<f64> {
    let interval = plan.sample_interval();
    let mut times = Vec::new();
    let mut j = 1usize;
    loop {
        let t = start + j as f64 * interval;
        if t >= plan.t_end - 1e-9 * interval {
            break;
        }
        times.push(t);
        j += 1;
    }
    if plan.t_end > start {
        times.push(plan.t_end);
    }
    times
}

/// Exact free evolution of a copy of `psi` over `duration`, with the boundary guard.
pub fn free_segment(psi: &WaveFunction, duration: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    Propagator::new(psi.grid()).free_segment(&mut out, duration)?;
    Ok(out)
}
