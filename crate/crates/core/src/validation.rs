//! Oracle and invariant suite behind `qtm validate`.
//!
//! Each check measures one number against a fixed tolerance. The suite is
//! deterministic; the random states of the kick check come from a fixed seed.

use std::fmt;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::grid::Grid;
use crate::mirror;
use crate::oracle;
use crate::propagator::{EvolutionPlan, Propagator, PulseProfile};
use crate::simulation::{PacketSpec, Scenario};
use crate::units::LabContext;
use crate::wavefunction::{gaussian_1d, gaussian_ring_2d, PacketSpec1D, PacketSpecRing, WaveFunction};

/// Deliberate defects for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    KineticSign,
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }

    /// Passes when `measured >= tolerance`.
    pub fn at_least(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured >= tolerance,
            detail,
        }
    }

    fn flag(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            measured: if passed { 1.0 } else { 0.0 },
            tolerance: 1.0,
            passed,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} {:.3e} (tol {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(
            f,
            "{} of {} checks passed",
            self.checks.len() - self.failures(),
            self.checks.len()
        )
    }
}

fn propagator(grid: &Grid, fault: Option<Fault>) -> Propagator {
    let p = Propagator::new(grid);
    match fault {
        Some(Fault::KineticSign) => p.with_corrupted_kinetic_sign(),
        None => p,
    }
}

pub const FREE_ORACLE_TOLERANCE: f64 = 1e-8;

/// Largest L2 error of spectral propagation against the closed-form free
/// Gaussian over σ ∈ {0.5, 1, 2}, k ∈ {0, 4, 8}, t ∈ {0.5, 1} on 4096 points.
pub fn free_oracle_error(fault: Option<Fault>) -> Result<f64> {
    let grid = Grid::line(-24.0, 40.0, 4096)?;
    let mut prop = propagator(&grid, fault).without_guard();
    let mut worst = 0.0f64;
    for sigma in [0.5, 1.0, 2.0] {
        for k in [0.0, 4.0, 8.0] {
            let spec = PacketSpec1D::new(sigma, k);
            let initial = gaussian_1d(&spec, &grid)?;
            for t in [0.5, 1.0] {
                let mut psi = initial.clone();
                prop.free_segment(&mut psi, t)?;
                let exact = oracle::gaussian_free_1d(&spec, t, &grid)?;
                worst = worst.max(oracle::l2_distance(&psi, &exact)?);
            }
        }
    }
    Ok(worst)
}

/// Largest deviation of a propagated lattice plane wave from its exact phase.
pub fn plane_wave_error(fault: Option<Fault>) -> Result<f64> {
    let grid = Grid::square(0.0, 8.0, 32)?;
    let q = [2.0 * std::f64::consts::PI * 3.0 / 8.0, -2.0 * std::f64::consts::PI / 8.0];
    let mut psi = oracle::plane_wave_free(&q, 0.0, &grid)?;
    propagator(&grid, fault).without_guard().free_segment(&mut psi, 0.7)?;
    let exact = oracle::plane_wave_free(&q, 0.7, &grid)?;
    oracle::l2_distance(&psi, &exact)
}

/// Errors of the ring oracle comparison: propagated versus asymptotic at
/// `kR = 72` and at `kR = 144` (radius doubled, `ε = t/σ²` fixed).
pub fn ring_oracle_errors(fault: Option<Fault>) -> Result<(f64, f64)> {
    let one = |radius: f64, half_box: f64| -> Result<f64> {
        let spec = PacketSpecRing::new(radius, 2.0, 6.0);
        let grid = Grid::square(-half_box, half_box, 1024)?;
        let mut psi = gaussian_ring_2d(&spec, &grid)?;
        propagator(&grid, fault).free_segment(&mut psi, 0.25)?;
        oracle::l2_distance(&psi, &oracle::ring_free_2d(&spec, 0.25, &grid)?)
    };
    Ok((one(12.0, 32.0)?, one(24.0, 48.0)?))
}

/// Density and norm changes of random normalized 1D and 2D states under the
/// kick. Both are exactly zero when the kick is a pure phase map.
pub fn kick_identity_error() -> Result<(f64, f64)> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut max_density = 0.0f64;
    let mut max_norm = 0.0f64;
    let grids = [Grid::line(-10.0, 10.0, 512)?, Grid::square(-6.0, 6.0, 64)?];
    for grid in &grids {
        for _ in 0..8 {
            let amps: Vec<Complex64> = (0..grid.len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let psi = WaveFunction::normalized(grid.clone(), amps, 0.0)?;
            let lambda = rng.random_range(0.0..5000.0);
            let out = mirror::kicked(&psi, lambda);
            for (a, b) in psi.density().iter().zip(out.density()) {
                max_density = max_density.max((a - b).abs());
            }
            max_norm = max_norm.max((out.norm_squared() - psi.norm_squared()).abs());
        }
    }
    Ok((max_density, max_norm))
}

pub const CURRENT_JUMP_TOLERANCE: f64 = 1e-8;

/// Relative L2 mismatch between the current change caused by a kick and
/// `-λρ∇ρ`, for the free line packet (σ = 1, k = 4) at t = 1.
pub fn current_jump_error(lambda: f64) -> Result<f64> {
    let grid = Grid::line(-24.0, 40.0, 4096)?;
    let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &grid)?;
    let j0 = psi.current();
    let j1 = mirror::kicked(&psi, lambda).current();
    let law = mirror::current_jump(&psi, lambda);
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), c) in j1[0].iter().zip(&j0[0]).zip(&law[0]) {
        num += (a - b - c).powi(2);
        den += c * c;
    }
    Ok((num / den).sqrt())
}

pub const NORM_DRIFT_TOLERANCE: f64 = 1e-9;

/// Norm drift over a full 1D run with a Gaussian pulse (σ = 1, k = 4, λ = 40,
/// Δt = 0.001).
pub fn norm_drift(fault: Option<Fault>) -> Result<f64> {
    let packet = PacketSpec::Line(PacketSpec1D::new(1.0, 4.0));
    let scenario = Scenario::auto(packet, PulseProfile::gaussian(40.0, 1e-3), 4.0)?;
    let mut prop = propagator(&scenario.grid, fault);
    Ok(scenario.run_with(&mut prop)?.record.norm_drift())
}

/// Line packet and grid used by the pulse refinement studies.
fn pulse_study_setup() -> Result<(Grid, WaveFunction)> {
    let grid = Grid::line(-24.0, 40.0, 4096)?;
    let psi = gaussian_1d(&PacketSpec1D::new(1.0, 4.0), &grid)?;
    Ok((grid, psi))
}

/// Refinement study of the Strang splitting across a Gaussian pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct StrangStudy {
    pub steps: [usize; 3],
    /// `‖u(h) - u(h/2)‖` and `‖u(h/2) - u(h/4)‖`.
    pub differences: [f64; 2],
    pub order: f64,
    /// `‖u(h_def) - u(h_def/2)‖` at the default pulse step.
    pub default_halving: f64,
}

/// Crosses a wide pulse (λ = 40, Δt = 0.01) with 20, 40 and 80 steps and
/// reports the observed order, then the change from halving the default step
/// of a Δt = 0.001 pulse.
pub fn strang_study(fault: Option<Fault>) -> Result<StrangStudy> {
    let (grid, initial) = pulse_study_setup()?;
    let mut prop = propagator(&grid, fault);
    let cross = |prop: &mut Propagator, pulse: &PulseProfile, steps: usize| -> Result<WaveFunction> {
        let mut psi = initial.clone();
        prop.free_segment(&mut psi, pulse.window().0)?;
        prop.advance_through_pulse(&mut psi, pulse, steps)?;
        Ok(psi)
    };
    let wide = PulseProfile::gaussian(40.0, 0.01);
    let steps = [20, 40, 80];
    let u: Vec<WaveFunction> = steps
        .iter()
        .map(|&s| cross(&mut prop, &wide, s))
        .collect::<Result<_>>()?;
    let d0 = oracle::l2_distance(&u[0], &u[1])?;
    let d1 = oracle::l2_distance(&u[1], &u[2])?;

    let narrow = PulseProfile::gaussian(40.0, 1e-3);
    let base = EvolutionPlan::for_pulse(&narrow, EvolutionPlan::DEFAULT_T_END).pulse_steps(&narrow);
    let a = cross(&mut prop, &narrow, base)?;
    let b = cross(&mut prop, &narrow, 2 * base)?;
    Ok(StrangStudy {
        steps,
        differences: [d0, d1],
        order: (d0 / d1).log2(),
        default_halving: oracle::l2_distance(&a, &b)?,
    })
}

pub const STRANG_MIN_ORDER: f64 = 1.9;
pub const DEFAULT_HALVING_TOLERANCE: f64 = 1e-6;

/// L2 distance at `t = 1.01` between Gaussian-pulse runs of width Δt and the
/// instantaneous kick, for Δt = 1e-3, 5e-4, 2.5e-4 (λ = 40).
pub fn pulse_limit_errors(fault: Option<Fault>) -> Result<Vec<(f64, f64)>> {
    let (grid, initial) = pulse_study_setup()?;
    let mut prop = propagator(&grid, fault);
    let lambda = 40.0;
    let probe = 1.01;
    let mut kicked = initial.clone();
    prop.free_segment(&mut kicked, 1.0)?;
    mirror::apply_kick(&mut kicked, lambda);
    prop.free_segment(&mut kicked, probe - 1.0)?;
    let mut out = Vec::new();
    for width in [1e-3, 5e-4, 2.5e-4] {
        let pulse = PulseProfile::gaussian(lambda, width);
        let plan = EvolutionPlan::for_pulse(&pulse, probe);
        let mut psi = initial.clone();
        let (w0, w1) = pulse.window();
        prop.free_segment(&mut psi, w0)?;
        prop.advance_through_pulse(&mut psi, &pulse, plan.pulse_steps(&pulse))?;
        prop.free_segment(&mut psi, probe - w1)?;
        out.push((width, oracle::l2_distance(&psi, &kicked)?));
    }
    Ok(out)
}

/// Largest relative error of the unit conversions against the published
/// lithium-7 figures.
pub fn units_errors() -> Result<[(f64, f64); 4]> {
    let ctx = LabContext::lithium7();
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    Ok([
        (rel(ctx.length_to_dimensionless(10e-6), 1.05), 0.01),
        (rel(ctx.velocity_to_dimensionless(2e-3), 2.1), 0.01),
        (rel(ctx.scattering_length(10.0)?, 5.3e-9), 0.02),
        (rel(ctx.scattering_length(200.0)?, 105e-9), 0.02),
    ])
}

/// Largest deviation of `φ_qtm(0)` from `λ/sqrt(2π)` for λ ∈ {30, 40, 50}.
pub fn phase_center_error() -> Result<f64> {
    let mut worst = 0.0f64;
    for lambda in [30.0, 40.0, 50.0] {
        let c = mirror::phase_comparison(1.0, 4.0, lambda, -4.0, 4.0, 81)?;
        let mid = c.xi.len() / 2;
        let exact = lambda / (2.0 * std::f64::consts::PI).sqrt();
        worst = worst.max((c.phi_qtm[mid] - exact).abs());
    }
    Ok(worst)
}

/// Which parts of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Options {
    pub fault: Option<Fault>,
    /// Skips the 1024² ring comparison.
    pub skip_ring: bool,
}

/// Runs the whole suite. Errors inside a check are reported as failures.
pub fn run(options: Options) -> Report {
    let fault = options.fault;
    let mut report = Report::default();
    let checks = &mut report.checks;
    let mut push = |c: Result<Check>, name: &'static str| {
        checks.push(c.unwrap_or_else(|e| Check::flag(name, false, format!("error: {e}"))));
    };

    push(
        free_oracle_error(fault).map(|e| {
            Check::at_most("free-evolution oracle", e, FREE_ORACLE_TOLERANCE, "max L2, 18 cases".into())
        }),
        "free-evolution oracle",
    );
    push(
        plane_wave_error(fault)
            .map(|e| Check::at_most("plane-wave eigenstate", e, 1e-10, "L2 at t=0.7".into())),
        "plane-wave eigenstate",
    );
    if !options.skip_ring {
        push(
            ring_oracle_errors(fault).map(|(a, b)| {
                let mut c = Check::at_most("ring oracle", a, 5e-2, format!("L2 kR=72; kR=144 gives {b:.3e}"));
                c.passed &= b < a;
                c
            }),
            "ring oracle",
        );
    }
    push(
        kick_identity_error().map(|(d, n)| {
            Check::at_most("kick identity", d.max(n), 0.0, format!("density {d:e}, norm {n:e}"))
        }),
        "kick identity",
    );
    push(
        [20.0, 40.0, 200.0]
            .iter()
            .map(|&l| current_jump_error(l))
            .collect::<Result<Vec<f64>>>()
            .map(|e| {
                let worst = e.iter().copied().fold(0.0, f64::max);
                Check::at_most("current-jump law", worst, CURRENT_JUMP_TOLERANCE, "relative L2, λ=20,40,200".into())
            }),
        "current-jump law",
    );
    push(
        norm_drift(fault).map(|d| Check::at_most("norm conservation", d, NORM_DRIFT_TOLERANCE, "λ=40 run".into())),
        "norm conservation",
    );
    let study = strang_study(fault);
    let halving = study.as_ref().map(|s| s.default_halving).map_err(|e| e.to_string());
    push(
        study.map(|s| {
            Check::at_least(
                "Strang order",
                s.order,
                STRANG_MIN_ORDER,
                format!("steps {:?}, diffs {:.2e} {:.2e}", s.steps, s.differences[0], s.differences[1]),
            )
        }),
        "Strang order",
    );
    push(
        Ok(match halving {
            Ok(h) => Check::at_most("default pulse step", h, DEFAULT_HALVING_TOLERANCE, "L2 change on halving".into()),
            Err(e) => Check::flag("default pulse step", false, format!("error: {e}")),
        }),
        "default pulse step",
    );
    push(
        pulse_limit_errors(fault).map(|e| {
            let monotone = e.windows(2).all(|w| w[1].1 < w[0].1);
            let detail = e
                .iter()
                .map(|(w, d)| format!("{w:.1e}:{d:.2e}"))
                .collect::<Vec<_>>()
                .join(" ");
            let mut c = Check::at_most("pulse -> kick limit", e[e.len() - 1].1, e[0].1, detail);
            c.passed = monotone;
            c
        }),
        "pulse -> kick limit",
    );
    push(
        phase_center_error().map(|e| Check::at_most("phase at center", e, 1e-6, "λ=30,40,50".into())),
        "phase at center",
    );
    push(
        units_errors().map(|rows| {
            let passed = rows.iter().all(|(e, tol)| e <= tol);
            let worst = rows.iter().map(|(e, _)| *e).fold(0.0, f64::max);
            let mut c = Check::at_most("unit conversions", worst, 0.02, "lithium-7 figures".into());
            c.passed = passed;
            c
        }),
        "unit conversions",
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kick_identity_is_exact() {
        assert_eq!(kick_identity_error().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn free_oracle_passes_and_detects_sign_fault() {
        assert!(free_oracle_error(None).unwrap() < FREE_ORACLE_TOLERANCE);
        assert!(free_oracle_error(Some(Fault::KineticSign)).unwrap() > 1e-2);
        assert!(plane_wave_error(Some(Fault::KineticSign)).unwrap() > 1e-2);
    }

    #[test]
    fn current_jump_law_holds() {
        for l in [20.0, 40.0, 200.0] {
            let e = current_jump_error(l).unwrap();
            assert!(e < CURRENT_JUMP_TOLERANCE, "λ={l}: {e}");
        }
    }

    #[test]
    fn units_and_phases() {
        assert!(units_errors().unwrap().iter().all(|(e, t)| e <= t));
        assert!(phase_center_error().unwrap() < 1e-6);
    }

    #[test]
    fn report_formatting() {
        let r = Report {
            checks: vec![
                Check::at_most("a", 1e-9, 1e-8, String::new()),
                Check::at_least("b", 1.0, 1.9, String::new()),
            ],
        };
        assert!(!r.all_passed());
        assert_eq!(r.failures(), 1);
        let text = r.to_string();
        assert!(text.starts_with("PASS a"));
        assert!(text.contains("FAIL b"));
        assert!(text.ends_with("1 of 2 checks passed"));
    }
}
