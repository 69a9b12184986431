//! Kick analytics: the exact instantaneous kick, the current-jump law,
//! threshold and echo-time estimates, and the imprinted-versus-ideal phase
//! comparison.

use std::f64::consts::{E, PI};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{QtmError, Result};
use crate::grid;
use crate::wavefunction::WaveFunction;

/// `e·sqrt(π)/2`, the constant of the threshold estimates.
pub const MIRROR_CONSTANT: f64 = E * 1.772_453_850_905_516 / 2.0;

/// Reversed probability weight above which an echo is expected.
pub const ECHO_EXPECTED_FRACTION: f64 = 0.01;

/// Imprints the kick phase `exp(-iλ|ψ|²)` pointwise.
///
/// Each rotated amplitude is chosen so that its floating-point `re² + im²`
/// equals that of the input bit for bit, so density and norm are preserved
/// exactly. The phase error this costs is below `1e-15 |ψ|` almost everywhere
/// and never above `2⁻²⁶ |ψ|`.
pub fn apply_kick(psi: &mut WaveFunction, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for z in psi.amplitudes_mut() {
        *z = rotate_preserving_norm(*z, -lambda * z.norm_sqr());
    }
}

/// Fast pointwise kick used inside the pulse window, exact up to rounding.
pub(crate) fn kick_amplitudes(amplitudes: &mut [Complex64], phase_per_density: f64) {
    if phase_per_density == 0.0 {
        return;
    }
    for z in amplitudes.iter_mut() {
        let rho = z.norm_sqr();
        let (s, c) = (-phase_per_density * rho).sin_cos();
        *z = Complex64::new(z.re * c - z.im * s, z.re * s + z.im * c);
    }
}

/// Moves `x` by `d` units in the last place of its magnitude, keeping the sign.
fn nudge(x: f64, d: i64) -> f64 {
    let bits = x.abs().to_bits() as i64 + d;
    f64::from_bits(bits.clamp(0, f64::MAX.to_bits() as i64) as u64).copysign(x)
}

const NEAR_SOLVE: i64 = 3;
const FIRST_WINDOW: i64 = 4;
const LAST_WINDOW: i64 = 1 << 22;

/// `z·exp(iφ)` adjusted by a few ulps so that `norm_sqr` is unchanged.
///
/// Falls back to the plain rotation when `norm_sqr` is zero or subnormal.
pub fn rotate_preserving_norm(z: Complex64, phi: f64) -> Complex64 {
    let rho = z.norm_sqr();
    let (s, c) = phi.sin_cos();
    let target = Complex64::new(z.re * c - z.im * s, z.re * s + z.im * c);
    if !rho.is_normal() || target.norm_sqr() == rho {
        return target;
    }
    let scale = rho.sqrt();
    let good = 1e-15 * scale;
    let cap = scale * 2f64.powi(-26);
    let mut best: Option<(f64, Complex64)> = None;
    let mut done = 0i64;
    let mut window = FIRST_WINDOW;
    while window <= LAST_WINDOW {
        for d in -window..=window {
            if d.abs() <= done && !(done == 0 && d == 0) {
                continue;
            }
            consider(rho, target, false, d, &mut best);
            consider(rho, target, true, d, &mut best);
        }
        done = window;
        match best {
            Some((dev, _)) if dev <= good || window >= 64 && dev <= cap => break,
            _ => window *= 4,
        }
    }
    match best {
        Some((dev, z)) if dev <= cap => z,
        _ => target,
    }
}

/// Nudges one component of `target` by `d` ulps, solves for the other and
/// keeps the closest candidate whose `norm_sqr` is exactly `rho`.
fn consider(rho: f64, target: Complex64, swap: bool, d: i64, best: &mut Option<(f64, Complex64)>) {
    let (fixed, free) = if swap {
        (target.im, target.re)
    } else {
        (target.re, target.im)
    };
    let f = nudge(fixed, d);
    let t = rho - f * f;
    if t < 0.0 {
        return;
    }
    let o0 = t.sqrt().copysign(free);
    for e in -NEAR_SOLVE..=NEAR_SOLVE {
        let o = nudge(o0, e);
        let cand = if swap {
            Complex64::new(o, f)
        } else {
            Complex64::new(f, o)
        };
        if cand.norm_sqr() == rho {
            let dev = (cand - target).norm();
            if best.is_none_or(|(b, _)| dev < b) {
                *best = Some((dev, cand));
            }
        }
    }
}

/// Returns a kicked copy of `psi`.
pub fn kicked(psi: &WaveFunction, lambda: f64) -> WaveFunction {
    let mut out = psi.clone();
    apply_kick(&mut out, lambda);
    out
}

/// Current jump `Δj = -λ ρ ∇ρ` produced by a kick of strength `λ`.
pub fn current_jump(psi_minus: &WaveFunction, lambda: f64) -> Vec<Vec<f64>> {
    let rho = psi_minus.density();
    grid::gradient_real(&rho, psi_minus.grid())
        .into_iter()
        .map(|g| g.iter().zip(&rho).map(|(d, r)| -lambda * r * d).collect())
        .collect()
}

/// Threshold estimate for a line packet, `C k (σ² + 1/σ²)`.
pub fn lambda_min_1d(sigma: f64, k: f64) -> Result<f64> {
    if !(sigma > 0.0 && k > 0.0) {
        return Err(QtmError::InvalidParameter(format!(
            "threshold needs positive sigma and k, got sigma={sigma}, k={k}"
        )));
    }
    let width_at_kick = (sigma * sigma + 1.0 / (sigma * sigma)).sqrt();
    if k <= 3.0 / (sigma * sigma * width_at_kick) {
        log::warn!(
            "k = {k} is not large compared with 1/(sigma² sigma₁) = {:.3}; the threshold estimate is rough",
            1.0 / (sigma * sigma * width_at_kick)
        );
    }
    Ok(MIRROR_CONSTANT * k * (sigma * sigma + 1.0 / (sigma * sigma)))
}

/// Threshold estimate for a ring, `2π C (R + k) k σ²`.
pub fn lambda_min_2d(radius: f64, sigma: f64, k: f64) -> Result<f64> {
    if !(radius > 0.0 && sigma > 0.0 && k > 0.0) {
        return Err(QtmError::InvalidParameter(format!(
            "threshold needs positive R, sigma and k, got R={radius}, sigma={sigma}, k={k}"
        )));
    }
    if !(1.0 < sigma && sigma < radius && k * radius > 1.0) {
        log::warn!(
            "ring parameters R={radius}, sigma={sigma}, k={k} are outside 1 << sigma << R, kR >> 1"
        );
    }
    Ok(2.0 * PI * MIRROR_CONSTANT * (radius + k) * k * sigma * sigma)
}

/// Predicted echo time `λ / (λ - λ_min)` for a kick at `t₀ = 1`.
pub fn echo_time(lambda: f64, lambda_min: f64) -> Result<f64> {
    if lambda <= lambda_min {
        return Err(QtmError::NoEcho { lambda, lambda_min });
    }
    Ok(lambda / (lambda - lambda_min))
}

/// Analytic threshold and echo-time prediction for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickPrediction {
    pub lambda_min: f64,
    /// `None` when the kick is below threshold.
    pub echo_time: Option<f64>,
}

impl KickPrediction {
    pub const C: f64 = MIRROR_CONSTANT;

    pub fn new(lambda: f64, lambda_min: f64) -> Self {
        Self {
            lambda_min,
            echo_time: echo_time(lambda, lambda_min).ok(),
        }
    }

    pub fn line(sigma: f64, k: f64, lambda: f64) -> Result<Self> {
        Ok(Self::new(lambda, lambda_min_1d(sigma, k)?))
    }

    pub fn ring(radius: f64, sigma: f64, k: f64, lambda: f64) -> Result<Self> {
        Ok(Self::new(lambda, lambda_min_2d(radius, sigma, k)?))
    }
}

/// Probability weight carried by backward current: `j < 0` in 1D, inward
/// radial current `j·r̂ < 0` in 2D.
pub fn reversed_fraction(psi_plus: &WaveFunction) -> f64 {
    let rho = psi_plus.density();
    let current = psi_plus.current();
    let g = psi_plus.grid();
    let total: f64 = rho.iter().sum();
    let reversed: f64 = match g.dim() {
        1 => rho
            .iter()
            .zip(&current[0])
            .filter(|(_, &j)| j < 0.0)
            .map(|(r, _)| r)
            .sum(),
        _ => (0..g.len())
            .filter(|&i| {
                let [x, y] = g.point(i);
                x * current[0][i] + y * current[1][i] < 0.0
            })
            .map(|i| rho[i])
            .sum(),
    };
    if total == 0.0 {
        0.0
    } else {
        (reversed / total).clamp(0.0, 1.0)
    }
}

pub fn echo_expected(reversed_fraction: f64) -> bool {
    reversed_fraction > ECHO_EXPECTED_FRACTION
}

/// Imprinted and ideal time-reversal phases across a line packet at the kick.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseComparison {
    pub sigma: f64,
    pub k: f64,
    pub lambda: f64,
    pub xi: Vec<f64>,
    pub phi_qtm: Vec<f64>,
    pub phi_ideal: Vec<f64>,
    /// Constant added to `phi_ideal` to best match `phi_qtm`, density weighted.
    pub shift: f64,
}

impl PhaseComparison {
    pub fn phi_ideal_shifted(&self) -> impl Iterator<Item = f64> + '_ {
        self.phi_ideal.iter().map(move |p| p + self.shift)
    }

    pub fn write_csv<W: Write>(&self, header: &str, mut out: W) -> Result<()> {
        out.write_all(header.as_bytes())?;
        writeln!(out, "xi,phi_qtm,phi_ideal_shifted")?;
        for ((xi, q), ideal) in self.xi.iter().zip(&self.phi_qtm).zip(self.phi_ideal_shifted()) {
            writeln!(out, "{xi},{q},{ideal}")?;
        }
        Ok(())
    }
}

/// Samples the imprinted phase `λ exp(-(ξ/σ₁)²) / (sqrt(π) σ₁)` and the ideal
/// phase `(ξ/σ₁σ)² + 2kξ` on `samples` points of `[xi_min, xi_max]`.
pub fn phase_comparison(
    sigma: f64,
    k: f64,
    lambda: f64,
    xi_min: f64,
    xi_max: f64,
    samples: usize,
) -> Result<PhaseComparison> {
    if !(sigma > 0.0) || lambda < 0.0 || !lambda.is_finite() {
        return Err(QtmError::InvalidParameter(format!(
            "phase comparison needs sigma > 0 and lambda >= 0, got sigma={sigma}, lambda={lambda}"
        )));
    }
    if samples < 2 || !(xi_max > xi_min) {
        return Err(QtmError::InvalidParameter(
            "phase comparison needs at least two samples on a nonempty interval".into(),
        ));
    }
    let s1 = (sigma * sigma + 1.0 / (sigma * sigma)).sqrt();
    let step = (xi_max - xi_min) / (samples - 1) as f64;
    let xi: Vec<f64> = (0..samples).map(|i| xi_min + i as f64 * step).collect();
    let rho: Vec<f64> = xi
        .iter()
        .map(|x| (-(x / s1).powi(2)).exp() / (PI.sqrt() * s1))
        .collect();
    let phi_qtm: Vec<f64> = rho.iter().map(|r| lambda * r).collect();
    let phi_ideal: Vec<f64> = xi
        .iter()
        .map(|x| (x / (s1 * sigma)).powi(2) + 2.0 * k * x)
        .collect();
    let weight: f64 = rho.iter().sum();
    let shift = rho
        .iter()
        .zip(phi_qtm.iter().zip(&phi_ideal))
        .map(|(r, (q, i))| r * (q - i))
        .sum::<f64>()
        / weight;
    Ok(PhaseComparison {
        sigma,
        k,
        lambda,
        xi,
        phi_qtm,
        phi_ideal,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::oracle;
    use crate::wavefunction::PacketSpec1D;
    use approx::assert_relative_eq;

    #[test]
    fn constant_matches_closed_form() {
        assert_relative_eq!(MIRROR_CONSTANT, E * PI.sqrt() / 2.0, max_relative = 1e-15);
        assert!((MIRROR_CONSTANT - 2.409).abs() < 1e-4);
    }

    #[test]
    fn line_threshold() {
        let l = lambda_min_1d(1.0, 4.0).unwrap();
        assert!((l - 19.27).abs() < 0.01, "{l}");
        assert!((19.0..=20.0).contains(&l));
        let l2 = lambda_min_1d(2.0, 4.0).unwrap();
        assert!((l2 - MIRROR_CONSTANT * 4.0 * 4.25).abs() < 1e-12);
        assert!((l2 - 40.95).abs() < 0.01);
        assert_relative_eq!(
            lambda_min_1d(2.0, 4.0).unwrap(),
            lambda_min_1d(0.5, 4.0).unwrap(),
            max_relative = 1e-15
        );
        assert!(lambda_min_1d(0.0, 4.0).is_err());
        assert!(lambda_min_1d(1.0, -1.0).is_err());
    }

    #[test]
    fn ring_threshold() {
        let l = lambda_min_2d(6.0, 2.0, 4.0).unwrap();
        assert!((l - 2.0 * PI * MIRROR_CONSTANT * 160.0).abs() < 1e-9);
        assert!((l - 2422.0).abs() < 1.0);
        assert!(l < 3000.0);
        assert_relative_eq!(
            lambda_min_2d(6.0, 4.0, 4.0).unwrap(),
            4.0 * l,
            max_relative = 1e-14
        );
        assert!(lambda_min_2d(0.0, 2.0, 4.0).is_err());
    }

    #[test]
    fn echo_time_law() {
        assert_eq!(echo_time(2.0 * 19.27, 19.27).unwrap(), 2.0);
        let l = lambda_min_1d(1.0, 4.0).unwrap();
        assert!((echo_time(40.0, l).unwrap() - 1.930).abs() < 1e-3);
        assert!(echo_time(1e12, l).unwrap() - 1.0 < 1e-9);
        assert!(matches!(echo_time(19.0, l), Err(QtmError::NoEcho { .. })));
        assert!(echo_time(l, l).is_err());
        let mut prev = f64::INFINITY;
        for lam in [20.0, 25.0, 40.0, 100.0, 1000.0] {
            let t = echo_time(lam, l).unwrap();
            assert!(t < prev && t > 1.0);
            prev = t;
        }
    }

    #[test]
    fn kick_is_phase_only() {
        let g = Grid::line(-20.0, 44.0, 1024).unwrap();
        let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &g).unwrap();
        let out = kicked(&psi, 40.0);
        assert_eq!(out.density(), psi.density());
        assert_eq!(out.norm_squared(), psi.norm_squared());
        assert_eq!(kicked(&psi, 0.0), psi);
    }

    #[test]
    fn rotation_handles_awkward_inputs() {
        for z in [
            Complex64::new(1e-140, 3e-150),
            Complex64::new(-0.7, 0.7000001),
            Complex64::new(0.0, 2.5),
            Complex64::new(0.0, 0.0),
        ] {
            for phi in [0.1, -3.0, 1e-12, 40.0] {
                let w = rotate_preserving_norm(z, phi);
                assert_eq!(w.norm_sqr(), z.norm_sqr(), "{z} {phi}");
            }
        }
        let tiny = Complex64::new(1e-160, 1e-161);
        assert_eq!(rotate_preserving_norm(tiny, -1e4 * tiny.norm_sqr()), tiny);
    }

    proptest::proptest! {
        #[test]
        fn rotation_preserves_norm_bitwise(
            re in -1e3f64..1e3,
            im in -1e3f64..1e3,
            exp in -120i32..40,
            phi in -200.0f64..200.0,
        ) {
            let z = Complex64::new(re, im) * 2f64.powi(exp);
            let w = rotate_preserving_norm(z, phi);
            proptest::prop_assert_eq!(w.norm_sqr(), z.norm_sqr());
            let ideal = z * Complex64::from_polar(1.0, phi);
            proptest::prop_assert!((w - ideal).norm() <= 2f64.powi(-26) * z.norm() + 1e-300);
        }

        #[test]
        fn kick_preserves_density_of_random_states(
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
            lambda in 0.0f64..5000.0,
        ) {
            let g = Grid::line(-4.0, 4.0, 64).unwrap();
            let amps = seed.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let psi = WaveFunction::normalized(g, amps, 0.0).unwrap();
            let out = kicked(&psi, lambda);
            proptest::prop_assert_eq!(out.density(), psi.density());
        }

        #[test]
        fn kicks_compose_up_to_rounding(
            a in 0.0f64..100.0,
            b in 0.0f64..100.0,
        ) {
            let g = Grid::line(-20.0, 44.0, 256).unwrap();
            let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &g).unwrap();
            let two = kicked(&kicked(&psi, a), b);
            let one = kicked(&psi, a + b);
            let diff = two
                .amplitudes()
                .iter()
                .zip(one.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            proptest::prop_assert!(diff < 1e-12, "{}", diff);
        }

        #[test]
        fn jump_is_linear_in_lambda(lambda in 0.1f64..500.0) {
            let g = Grid::line(-20.0, 44.0, 512).unwrap();
            let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &g).unwrap();
            let unit = current_jump(&psi, 1.0);
            let dj = current_jump(&psi, lambda);
            for (u, d) in unit[0].iter().zip(&dj[0]) {
                proptest::prop_assert!((u * lambda - d).abs() <= 1e-12 * (1.0 + d.abs()));
            }
        }
    }

    #[test]
    fn plane_wave_gets_global_phase() {
        let g = Grid::line(0.0, 8.0, 64).unwrap();
        let psi = oracle::plane_wave_free(&[2.0 * PI * 2.0 / 8.0], 0.0, &g).unwrap();
        let out = kicked(&psi, 7.0);
        let ratio = out.amplitudes()[0] / psi.amplitudes()[0];
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a / b - ratio).norm() < 1e-13);
        }
        let (j0, j1) = (psi.current(), out.current());
        assert!(j0[0].iter().zip(&j1[0]).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn jump_vanishes_at_density_peak_and_matches_closed_form() {
        let g = Grid::line(-20.0, 44.0, 4096).unwrap();
        let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &g).unwrap();
        let dj = current_jump(&psi, 40.0);
        let s1 = 2f64.sqrt();
        let at = |x: f64| ((x - g.x_min()) / g.dx()).round() as usize;
        assert!(dj[0][at(4.0)].abs() < 1e-10);
        let expect = -2.0 * 40.0 * (-2.0f64).exp() / (PI * s1.powi(3));
        assert!((expect + 1.219).abs() < 1e-3);
        // ξ = -σ₁ is not a lattice point; interpolate linearly between neighbours.
        let x = 4.0 - s1;
        let i = ((x - g.x_min()) / g.dx()).floor() as usize;
        let w = (x - g.coordinate(i)) / g.dx();
        let val = dj[0][i] * (1.0 - w) + dj[0][i + 1] * w;
        assert!((val - expect).abs() < 1e-4, "{val} vs {expect}");
    }

    #[test]
    fn reversed_fraction_without_kick_is_negligible() {
        let g = Grid::line(-20.0, 44.0, 4096).unwrap();
        let psi = oracle::gaussian_free_1d(&PacketSpec1D::new(1.0, 4.0), 1.0, &g).unwrap();
        assert!(reversed_fraction(&psi) < 1e-12);
        assert!(!echo_expected(reversed_fraction(&psi)));
    }

    #[test]
    fn phases_at_center() {
        for (lam, expect) in [(30.0, 11.968), (40.0, 15.958), (50.0, 19.947)] {
            let c = phase_comparison(1.0, 4.0, lam, -4.0, 4.0, 81).unwrap();
            let mid = c.xi.iter().position(|x| x.abs() < 1e-12).unwrap();
            assert!((c.phi_qtm[mid] - lam / (2.0 * PI).sqrt()).abs() < 1e-12);
            assert!((c.phi_qtm[mid] - expect).abs() < 1e-3);
            assert_eq!(c.phi_ideal[mid], 0.0);
        }
        let flat = phase_comparison(1.0, 4.0, 0.0, -4.0, 4.0, 11).unwrap();
        assert!(flat.phi_qtm.iter().all(|&p| p == 0.0));
        assert!(phase_comparison(0.0, 4.0, 1.0, -1.0, 1.0, 5).is_err());
        assert!(phase_comparison(1.0, 4.0, 1.0, 1.0, -1.0, 5).is_err());
    }

    #[test]
    fn phase_shift_is_weighted_least_squares() {
        let c = phase_comparison(1.0, 4.0, 40.0, -5.0, 5.0, 201).unwrap();
        let s1 = 2f64.sqrt();
        let cost = |shift: f64| -> f64 {
            c.xi.iter()
                .zip(c.phi_qtm.iter().zip(&c.phi_ideal))
                .map(|(x, (q, i))| (-(x / s1).powi(2)).exp() * (q - i - shift).powi(2))
                .sum()
        };
        let best = cost(c.shift);
        assert!(best <= cost(c.shift + 1e-3) && best <= cost(c.shift - 1e-3));
    }
}
