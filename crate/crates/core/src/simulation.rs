//! Single runs: packet construction, evolution, echo analysis and the
//! numerical threshold search.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::echo::{self, CorrelationObserver, EchoRecord, EchoSample};
use crate::error::{QtmError, Result};
use crate::grid::Grid;
use crate::mirror::{self, KickPrediction};
use crate::propagator::{EvolutionPlan, Observer, Propagator, PulseProfile};
use crate::wavefunction::{self, PacketSpec1D, PacketSpecRing, WaveFunction};

/// Initial packet of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum PacketSpec {
    Line(PacketSpec1D),
    Ring(PacketSpecRing),
}

impl PacketSpec {
    pub fn dim(&self) -> usize {
        match self {
            PacketSpec::Line(_) => 1,
            PacketSpec::Ring(_) => 2,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            PacketSpec::Line(s) => s.sigma,
            PacketSpec::Ring(s) => s.sigma,
        }
    }

    pub fn k(&self) -> f64 {
        match self {
            PacketSpec::Line(s) => s.k,
            PacketSpec::Ring(s) => s.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PacketSpec::Line(s) => s.validate(),
            PacketSpec::Ring(s) => s.validate(),
        }
    }

    pub fn build(&self, grid: &Grid) -> Result<WaveFunction> {
        match self {
            PacketSpec::Line(s) => wavefunction::gaussian_1d(s, grid),
            PacketSpec::Ring(s) => wavefunction::gaussian_ring_2d(s, grid),
        }
    }

    /// Closed-form threshold for this packet.
    pub fn lambda_min(&self) -> Result<f64> {
        match self {
            PacketSpec::Line(s) => mirror::lambda_min_1d(s.sigma, s.k),
            PacketSpec::Ring(s) => mirror::lambda_min_2d(s.radius, s.sigma, s.k),
        }
    }

    pub fn prediction(&self, lambda: f64) -> Result<KickPrediction> {
        Ok(KickPrediction::new(lambda, self.lambda_min()?))
    }
}

/// Largest lattice the automatic rule may choose per axis.
pub const MAX_AUTO_POINTS_1D: usize = 1 << 17;
pub const MAX_AUTO_POINTS_2D: usize = 2048;

/// Human-readable statement of the automatic grid rule, written into
/// artifact headers.
pub const GRID_RULE: &str = "p=k*lambda/lambda_min; dx<=min(sigma/8, pi/(4(|k|+p)), pi/(1.5(|k|+6/sigma+p))); \
     box covers momenta k+-(6/sigma+p) travelling for t_end plus 6 sigma and 10% margin; n=next power of two";

/// Kick-induced momentum estimate `k λ / λ_min`, zero when the closed-form
/// threshold is undefined.
fn kick_momentum(packet: &PacketSpec, lambda: f64) -> f64 {
    match packet.lambda_min() {
        Ok(l) if l > 0.0 => packet.k().abs() * lambda / l,
        _ => 0.0,
    }
}

/// Lattice spacing and box chosen by the automatic rule, before rounding `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDesign {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridDesign {
    pub fn for_run(packet: &PacketSpec, lambda: f64, t_end: f64) -> Result<Self> {
        packet.validate()?;
        let sigma = packet.sigma();
        let k = packet.k();
        let p = kick_momentum(packet, lambda);
        let spread = 6.0 / sigma + p;
        let dx = (sigma / 8.0)
            .min(std::f64::consts::PI / (4.0 * (k.abs() + p).max(1e-12)))
            .min(std::f64::consts::PI / (1.5 * (k.abs() + spread)));
        let (lo, hi) = match packet {
            PacketSpec::Line(s) => {
                let lo = (s.center - 6.0 * sigma).min(s.center + (k - spread) * t_end);
                let hi = (s.center + 6.0 * sigma).max(s.center + (k + spread) * t_end);
                (lo - 6.0 * sigma, hi + 6.0 * sigma)
            }
            PacketSpec::Ring(s) => {
                let reach = s.radius + (k.abs() + spread) * t_end + 6.0 * sigma;
                (-reach, reach)
            }
        };
        let margin = 0.1 * (hi - lo);
        Ok(Self {
            x_min: lo - margin,
            x_max: hi + margin,
            dx,
        })
    }

    /// Smallest design containing both.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            dx: self.dx.min(other.dx),
        }
    }

    pub fn build(&self, dim: usize) -> Result<Grid> {
        let n = ((self.x_max - self.x_min) / self.dx).ceil().max(16.0) as usize;
        let n = n.next_power_of_two();
        let cap = if dim == 1 {
            MAX_AUTO_POINTS_1D
        } else {
            MAX_AUTO_POINTS_2D
        };
        if n > cap {
            return Err(QtmError::InvalidGrid(format!(
                "automatic grid needs {n} points per axis (cap {cap}); set the grid explicitly"
            )));
        }
        // keep the spacing, grow the box symmetrically to the rounded count
        let width = n as f64 * self.dx;
        let mid = 0.5 * (self.x_min + self.x_max);
        Grid::new(dim, mid - 0.5 * width, mid + 0.5 * width, n)
    }
}

/// Grid chosen by the automatic rule for one run.
pub fn auto_grid(packet: &PacketSpec, lambda: f64, t_end: f64) -> Result<Grid> {
    GridDesign::for_run(packet, lambda, t_end)?.build(packet.dim())
}

/// Everything that defines one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub packet: PacketSpec,
    pub grid: Grid,
    pub pulse: PulseProfile,
    pub plan: EvolutionPlan,
    pub threshold: f64,
}

impl Scenario {
    /// Scenario on the automatic grid with the default plan.
    pub fn auto(packet: PacketSpec, pulse: PulseProfile, t_end: f64) -> Result<Self> {
        let grid = auto_grid(&packet, pulse.strength, t_end)?;
        Ok(Self {
            packet,
            grid,
            pulse,
            plan: EvolutionPlan::for_pulse(&pulse, t_end),
            threshold: echo::DEFAULT_ECHO_THRESHOLD,
        })
    }

    pub fn with_strength(&self, lambda: f64) -> Self {
        Self {
            pulse: self.pulse.with_strength(lambda),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.packet.validate()?;
        if self.packet.dim() != self.grid.dim() {
            return Err(QtmError::InvalidParameter(format!(
                "{}D packet on a {}D grid",
                self.packet.dim(),
                self.grid.dim()
            )));
        }
        self.pulse.validate()?;
        self.plan.validate(&self.pulse)?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(QtmError::InvalidParameter(format!(
                "echo threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<RunOutcome> {
        let mut prop = Propagator::new(&self.grid);
        self.run_with(&mut prop)
    }

    /// Runs on an existing propagator, which must be bound to `self.grid`.
    pub fn run_with(&self, prop: &mut Propagator) -> Result<RunOutcome> {
        self.validate()?;
        let initial = self.packet.build(&self.grid)?;
        let mut obs = RunObserver {
            corr: CorrelationObserver::new(&initial),
            post_pulse: None,
        };
        let final_state = prop.evolve(initial.clone(), &self.pulse, &self.plan, &mut obs)?;
        let post_pulse = obs
            .post_pulse
            .ok_or_else(|| QtmError::InsufficientSamples("pulse was never applied".into()))?;
        let times: Vec<f64> = obs.corr.samples.iter().map(|s| s.t).collect();
        let baseline = free_correlation(prop, &initial, &times)?;
        let prediction = self.packet.prediction(self.pulse.strength).ok();
        let record = EchoRecord::new(
            obs.corr.samples,
            baseline,
            &self.pulse,
            prediction,
            self.threshold,
        )?;
        Ok(RunOutcome {
            reversed_fraction: mirror::reversed_fraction(&post_pulse),
            initial,
            post_pulse,
            final_state,
            record,
            peak_positions: obs.corr.peak_positions,
        })
    }
}

struct RunObserver {
    corr: CorrelationObserver,
    post_pulse: Option<WaveFunction>,
}

impl Observer for RunObserver {
    fn sample(&mut self, psi: &WaveFunction) {
        self.corr.sample(psi);
    }

    fn pulse_done(&mut self, psi: &WaveFunction) {
        self.post_pulse = Some(psi.clone());
    }
}

/// `N(t)` of the freely evolving `initial` at `times`.
pub fn free_correlation(prop: &mut Propagator, initial: &WaveFunction, times: &[f64]) -> Result<Vec<f64>> {
    let mut obs = CorrelationObserver::new(initial);
    let mut psi = initial.clone();
    let (head, rest): (Vec<f64>, Vec<f64>) = times.iter().partition(|&&t| t <= initial.time());
    for _ in &head {
        obs.samples.push(EchoSample {
            t: initial.time(),
            norm_corr: 1.0,
            norm: initial.norm(),
        });
    }
    prop.sample_free(&mut psi, &rest, &mut obs)?;
    Ok(obs.samples.into_iter().map(|s| s.norm_corr).collect())
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub initial: WaveFunction,
    /// State at the end of the pulse window.
    pub post_pulse: WaveFunction,
    pub final_state: WaveFunction,
    pub record: EchoRecord,
    /// Density maximum per sample: `x` in 1D, radius in 2D.
    pub peak_positions: Vec<f64>,
    pub reversed_fraction: f64,
}

impl RunOutcome {
    /// Reconstructs the state at `t` by exact free evolution from the initial
    /// or the post-pulse state. Times inside the pulse window are rejected.
    pub fn state_at(&self, prop: &mut Propagator, pulse: &PulseProfile, t: f64) -> Result<WaveFunction> {
        let (w0, _) = pulse.window();
        let post = self.post_pulse.time();
        let source = if t <= w0 {
            &self.initial
        } else if t >= post {
            &self.post_pulse
        } else {
            return Err(QtmError::InvalidParameter(format!(
                "snapshot time {t} falls inside the pulse window"
            )));
        };
        let mut psi = source.clone();
        prop.free_segment(&mut psi, t - source.time())?;
        Ok(psi)
    }

    /// Rows `t,norm,norm_corr,peak_position` after the commented `header`.
    pub fn write_observables_csv<W: Write>(&self, header: &str, mut out: W) -> Result<()> {
        out.write_all(header.as_bytes())?;
        writeln!(out, "t,norm,norm_corr,peak_position")?;
        for (s, x) in self.record.samples.iter().zip(&self.peak_positions) {
            writeln!(out, "{:.10},{:.15e},{:.12e},{:.10}", s.t, s.norm, s.norm_corr, x)?;
        }
        Ok(())
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let r = &self.record;
        let verdict = if r.echo_present() { "echo" } else { "no echo" };
        let mut line = format!(
            "{verdict}: peak N = {:.4} at t = {:.4} (free baseline {:.4}, excess {:.4}, threshold {}); reversed fraction {:.4}",
            r.peak_strength(),
            r.peak_time(),
            r.baseline_at_peak(),
            r.excess(),
            r.threshold,
            self.reversed_fraction
        );
        if let Some(p) = &r.prediction {
            line.push_str(&format!("; lambda_min = {:.4}", p.lambda_min));
            match p.echo_time {
                Some(t) => line.push_str(&format!(", predicted t_echo = {t:.4}")),
                None => line.push_str(", below threshold"),
            }
        }
        if !r.detection.secondary_peaks.is_empty() {
            let list: Vec<String> = r
                .detection
                .secondary_peaks
                .iter()
                .map(|(t, n)| format!("{n:.3}@{t:.3}"))
                .collect();
            line.push_str(&format!("; secondary peaks {}", list.join(" ")));
        }
        line
    }
}

/// Smallest kick strength in `[lo, hi]` whose run shows an echo above the
/// free baseline, to 2% relative. All runs share the grid chosen for `hi`.
pub fn find_lambda_min_numerical(
    packet: PacketSpec,
    pulse: PulseProfile,
    t_end: f64,
    lo: f64,
    hi: f64,
    threshold: f64,
) -> Result<f64> {
    let mut base = Scenario::auto(packet, pulse.with_strength(hi), t_end)?;
    base.threshold = threshold;
    let mut prop = Propagator::new(&base.grid);
    echo::bisect_threshold(
        |lambda| Ok(base.with_strength(lambda).run_with(&mut prop)?.record.excess()),
        lo,
        hi,
        threshold,
        echo::THRESHOLD_REL_TOL,
    )
}
