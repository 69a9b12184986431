//! Echo quantification: density correlation, peak detection and the
//! numerical threshold search.

use std::io::Write;

use crate::error::{QtmError, Result};
use crate::mirror::KickPrediction;
use crate::propagator::{Observer, PulseKind, PulseProfile};
use crate::wavefunction::WaveFunction;

/// Default excess over the free baseline that counts as an echo.
pub const DEFAULT_ECHO_THRESHOLD: f64 = 0.2;

/// Guard after an instantaneous kick before peaks count.
pub const INSTANTANEOUS_GUARD: f64 = 0.05;

/// Guard after a Gaussian pulse, in pulse widths.
pub const GAUSSIAN_GUARD_WIDTHS: f64 = 10.0;

/// Secondary peaks are reported down to this fraction of the main peak.
pub const SECONDARY_PEAK_FRACTION: f64 = 0.5;

/// `N = ∫ρ₀ρ / sqrt(∫ρ₀² ∫ρ²)`, clamped to `[0, 1]`.
pub fn norm_correlation(reference: &WaveFunction, psi: &WaveFunction) -> Result<f64> {
    if reference.grid() != psi.grid() {
        return Err(QtmError::GridMismatch);
    }
    Ok(density_correlation(&reference.density(), &psi.density()))
}

/// Correlation of two densities on the same lattice.
pub fn density_correlation(rho0: &[f64], rho: &[f64]) -> f64 {
    let (mut cross, mut a, mut b) = (0.0, 0.0, 0.0);
    for (x, y) in rho0.iter().zip(rho) {
        cross += x * y;
        a += x * x;
        b += y * y;
    }
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    (cross / (a * b).sqrt()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSample {
    pub t: f64,
    pub norm_corr: f64,
    pub norm: f64,
}

/// Records `N(t)` and the norm against a fixed reference density.
pub struct CorrelationObserver {
    reference: Vec<f64>,
    pub samples: Vec<EchoSample>,
    pub peak_positions: Vec<f64>,
}

impl CorrelationObserver {
    pub fn new(reference: &WaveFunction) -> Self {
        Self {
            reference: reference.density(),
            samples: Vec::new(),
            peak_positions: Vec::new(),
        }
    }
}

impl Observer for CorrelationObserver {
    fn sample(&mut self, psi: &WaveFunction) {
        let rho = psi.density();
        let norm = (rho.iter().sum::<f64>() * psi.grid().cell_volume()).sqrt();
        self.samples.push(EchoSample {
            t: psi.time(),
            norm_corr: density_correlation(&self.reference, &rho),
            norm,
        });
        self.peak_positions.push(psi.peak_position());
    }
}

/// Outcome of the peak search after the pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoDetection {
    pub peak_strength: f64,
    pub peak_time: f64,
    /// Index of the peak in the sample list.
    pub peak_index: usize,
    /// The peak has a lower sample on both sides; a monotone decay or a
    /// curve still rising at `t_end` has none.
    pub local_maximum: bool,
    /// Other local maxima at least half as high, as `(t, N)`.
    pub secondary_peaks: Vec<(f64, f64)>,
}

/// Start of the peak search window.
pub fn guard_time(pulse: &PulseProfile) -> f64 {
    match pulse.kind {
        PulseKind::Instantaneous => pulse.center + INSTANTANEOUS_GUARD,
        PulseKind::Gaussian { width } => pulse.center + GAUSSIAN_GUARD_WIDTHS * width,
    }
}

/// Global maximum of `N(t)` over samples after the guard window.
pub fn detect_echo(samples: &[EchoSample], pulse: &PulseProfile) -> Result<EchoDetection> {
    if samples.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(QtmError::InsufficientSamples(
            "sample times are not strictly increasing".into(),
        ));
    }
    let guard = guard_time(pulse);
    let first = samples.partition_point(|s| s.t <= guard);
    let window = &samples[first..];
    if window.len() < 3 {
        return Err(QtmError::InsufficientSamples(format!(
            "{} samples after t = {guard}, need at least 3",
            window.len()
        )));
    }
    let (rel, peak) = window
        .iter()
        .enumerate()
        .fold((0, window[0]), |best, (i, s)| {
            if s.norm_corr > best.1.norm_corr {
                (i, *s)
            } else {
                best
            }
        });
    let is_local = |i: usize| {
        i > 0 && i + 1 < window.len() && {
            let v = window[i].norm_corr;
            window[i - 1].norm_corr < v && window[i + 1].norm_corr <= v
        }
    };
    let secondary_peaks = (0..window.len())
        .filter(|&i| i != rel && is_local(i))
        .filter(|&i| window[i].norm_corr >= SECONDARY_PEAK_FRACTION * peak.norm_corr)
        .map(|i| (window[i].t, window[i].norm_corr))
        .collect();
    Ok(EchoDetection {
        peak_strength: peak.norm_corr,
        peak_time: peak.t,
        peak_index: first + rel,
        local_maximum: is_local(rel),
        secondary_peaks,
    })
}

/// Time series of one run with its detected echo.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoRecord {
    pub samples: Vec<EchoSample>,
    /// `N(t)` of the unkicked packet at the same times.
    pub baseline: Vec<f64>,
    pub detection: EchoDetection,
    pub prediction: Option<KickPrediction>,
    pub threshold: f64,
}

impl EchoRecord {
    pub fn new(
        samples: Vec<EchoSample>,
        baseline: Vec<f64>,
        pulse: &PulseProfile,
        prediction: Option<KickPrediction>,
        threshold: f64,
    ) -> Result<Self> {
        if baseline.len() != samples.len() {
            return Err(QtmError::InsufficientSamples(format!(
                "{} baseline values for {} samples",
                baseline.len(),
                samples.len()
            )));
        }
        let detection = detect_echo(&samples, pulse)?;
        Ok(Self {
            samples,
            baseline,
            detection,
            prediction,
            threshold,
        })
    }

    pub fn peak_strength(&self) -> f64 {
        self.detection.peak_strength
    }

    pub fn peak_time(&self) -> f64 {
        self.detection.peak_time
    }

    /// Free-packet correlation at the peak time.
    pub fn baseline_at_peak(&self) -> f64 {
        self.baseline[self.detection.peak_index]
    }

    /// Peak strength above the free baseline at the same time.
    pub fn excess(&self) -> f64 {
        self.peak_strength() - self.baseline_at_peak()
    }

    pub fn echo_present(&self) -> bool {
        self.excess() > self.threshold
    }

    /// Largest `|norm - 1|` over the run.
    pub fn norm_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.norm - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,norm_corr,norm` after the commented `header`.
    pub fn write_csv<W: Write>(&self, header: &str, mut out: W) -> Result<()> {
        out.write_all(header.as_bytes())?;
        writeln!(out, "t,norm_corr,norm")?;
        for s in &self.samples {
            writeln!(out, "{:.10},{:.12e},{:.15e}", s.t, s.norm_corr, s.norm)?;
        }
        Ok(())
    }
}

/// Bisection for the smallest `λ` in `[lo, hi]` with `excess(λ) > threshold`,
/// to `rel_tol` relative width. Returns the upper end of the final bracket.
pub fn bisect_threshold<F>(mut excess: F, lo: f64, hi: f64, threshold: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi && lo >= 0.0) {
        return Err(QtmError::InvalidParameter(format!(
            "bracket must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    if excess(lo)? > threshold || excess(hi)? <= threshold {
        return Err(QtmError::NoBracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while (b - a) > rel_tol * b {
        let mid = 0.5 * (a + b);
        if excess(mid)? > threshold {
            b = mid;
        } else {
            a = mid;
        }
        log::debug!("threshold bracket [{a:.4}, {b:.4}]");
    }
    Ok(b)
}

/// Bisection tolerance of the numerical threshold search.
pub const THRESHOLD_REL_TOL: f64 = 0.02;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::wavefunction::{gaussian_1d, PacketSpec1D};

    fn series(values: &[f64], t0: f64, dt: f64) -> Vec<EchoSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| EchoSample {
                t: t0 + i as f64 * dt,
                norm_corr: v,
                norm: 1.0,
            })
            .collect()
    }

    #[test]
    fn identical_and_phase_shifted_states() {
        let g = Grid::line(-20.0, 44.0, 2048).unwrap();
        let psi = gaussian_1d(&PacketSpec1D::new(1.0, 4.0), &g).unwrap();
        assert!((norm_correlation(&psi, &psi).unwrap() - 1.0).abs() < 1e-15);
        let mut twisted = psi.clone();
        for (z, x) in twisted.amplitudes_mut().iter_mut().zip(g.coordinates()) {
            *z *= num_complex::Complex64::from_polar(1.0, 0.3 * x * x);
        }
        assert!((norm_correlation(&psi, &twisted).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn displaced_gaussians() {
        let g = Grid::line(-20.0, 44.0, 4096).unwrap();
        let a = gaussian_1d(&PacketSpec1D::new(1.0, 0.0), &g).unwrap();
        let b = gaussian_1d(&PacketSpec1D::new(1.0, 0.0).with_center(2.0), &g).unwrap();
        let n = norm_correlation(&a, &b).unwrap();
        assert!((n - (-2f64).exp()).abs() < 1e-12);
        assert!((n - 0.1353).abs() < 1e-4);
    }

    #[test]
    fn grid_mismatch() {
        let a = gaussian_1d(&PacketSpec1D::new(1.0, 0.0), &Grid::line(-20.0, 20.0, 512).unwrap()).unwrap();
        let b = gaussian_1d(&PacketSpec1D::new(1.0, 0.0), &Grid::line(-20.0, 20.0, 1024).unwrap()).unwrap();
        assert!(matches!(norm_correlation(&a, &b), Err(QtmError::GridMismatch)));
    }

    #[test]
    fn monotone_decay_has_no_local_maximum() {
        let pulse = PulseProfile::instantaneous(0.0);
        let s = series(&[1.0, 0.8, 0.6, 0.4, 0.3, 0.2, 0.15], 0.0, 0.5);
        let d = detect_echo(&s, &pulse).unwrap();
        assert!(!d.local_maximum);
        assert_eq!(d.peak_time, 1.5);
        assert_eq!(d.peak_strength, 0.4);
    }

    #[test]
    fn finds_interior_peak_and_secondaries() {
        let pulse = PulseProfile::gaussian(40.0, 1e-3);
        let s = series(
            &[1.0, 0.9, 0.1, 0.2, 0.6, 0.3, 0.35, 0.2, 0.1, 0.05],
            0.0,
            0.5,
        );
        let d = detect_echo(&s, &pulse).unwrap();
        assert!(d.local_maximum);
        assert_eq!(d.peak_time, 2.0);
        assert_eq!(d.peak_index, 4);
        assert_eq!(d.secondary_peaks, vec![(3.0, 0.35)]);
    }

    #[test]
    fn guard_window_excludes_pulse() {
        let pulse = PulseProfile::gaussian(40.0, 1e-3);
        let mut s = series(&[1.0, 0.5, 0.4, 0.3, 0.25, 0.2], 0.0, 0.5);
        s.insert(3, EchoSample { t: 1.005, norm_corr: 0.99, norm: 1.0 });
        let d = detect_echo(&s, &pulse).unwrap();
        assert_eq!(d.peak_strength, 0.3);
        assert!((guard_time(&pulse) - 1.01).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        let pulse = PulseProfile::instantaneous(10.0);
        let s = series(&[1.0, 0.5, 0.4], 0.0, 0.5);
        assert!(matches!(
            detect_echo(&s, &pulse),
            Err(QtmError::InsufficientSamples(_))
        ));
    }

    #[test]
    fn record_excess() {
        let pulse = PulseProfile::instantaneous(40.0);
        let s = series(&[1.0, 0.8, 0.3, 0.5, 0.2, 0.1], 0.0, 0.5);
        let base = vec![1.0, 0.8, 0.3, 0.2, 0.15, 0.1];
        let r = EchoRecord::new(s, base, &pulse, None, 0.2).unwrap();
        assert_eq!(r.peak_time(), 1.5);
        assert!((r.excess() - 0.3).abs() < 1e-15);
        assert!(r.echo_present());
        let mut buf = Vec::new();
        r.write_csv("# a=1\n", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# a=1\nt,norm_corr,norm\n"));
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn bisection_on_a_step() {
        let step = |l: f64| Ok(if l > 18.0 { 0.5 } else { 0.0 });
        let found = bisect_threshold(step, 5.0, 40.0, 0.2, 0.02).unwrap();
        assert!(found > 18.0 && found < 18.0 * 1.021);
        assert!(matches!(
            bisect_threshold(step, 1.0, 10.0, 0.2, 0.02),
            Err(QtmError::NoBracket { .. })
        ));
    }
}
