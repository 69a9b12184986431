//! TOML run and sweep configuration, artifact headers and config hashing.
//!
//! A run file has the sections `[packet]`, `[pulse]`, and optionally
//! `[evolution]`, `[grid]`, `[echo]` and `[output]`:
//!
//! ```toml
//! [packet]
//! geometry = "line"      # or "ring" (needs radius)
//! sigma = 1.0
//! k = 4.0
//!
//! [pulse]
//! kind = "gaussian"      # or "instantaneous"
//! strength = 40.0
//! width = 0.001
//!
//! [evolution]
//! t_end = 4.0
//! ```
//!
//! Omitting `[grid]` selects the automatic grid rule. A sweep file replaces
//! the packet values with `[sweep]`, two `[[sweep.axis]]` tables and
//! `[fixed]`.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::echo::DEFAULT_ECHO_THRESHOLD;
use crate::error::{QtmError, Result};
use crate::grid::Grid;
use crate::propagator::{EvolutionPlan, PulseKind, PulseProfile};
use crate::simulation::{self, PacketSpec, Scenario};
use crate::sweep::{Axis, FixedParams, SweepPlan};
use crate::wavefunction::{PacketSpec1D, PacketSpecRing};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Line,
    Ring,
}

impl Geometry {
    pub fn dim(self) -> usize {
        match self {
            Geometry::Line => 1,
            Geometry::Ring => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Geometry::Line => "line",
            Geometry::Ring => "ring",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridSection {
    pub fn build(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.x_min, self.x_max, self.n)
    }

    pub fn of(grid: &Grid) -> Self {
        Self {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            n: grid.n(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Instantaneous,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub kind: PulseShape,
    #[serde(default)]
    pub strength: Option<f64>,
    #[serde(default = "default_center")]
    pub center: f64,
    #[serde(default)]
    pub width: Option<f64>,
}

fn default_center() -> f64 {
    1.0
}

impl PulseSection {
    /// Pulse profile with the given strength.
    pub fn profile(&self, strength: f64) -> Result<PulseProfile> {
        let kind = match (self.kind, self.width) {
            (PulseShape::Instantaneous, None) => PulseKind::Instantaneous,
            (PulseShape::Instantaneous, Some(_)) => {
                return Err(QtmError::Config(
                    "pulse.width is only meaningful for kind = \"gaussian\"".into(),
                ))
            }
            (PulseShape::Gaussian, Some(width)) => PulseKind::Gaussian { width },
            (PulseShape::Gaussian, None) => {
                return Err(QtmError::Config(
                    "pulse.width is required for kind = \"gaussian\"".into(),
                ))
            }
        };
        let p = PulseProfile {
            kind,
            strength,
            center: self.center,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub dt_pulse: Option<f64>,
    #[serde(default)]
    pub stride: Option<usize>,
}

fn default_t_end() -> f64 {
    EvolutionPlan::DEFAULT_T_END
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: None,
            dt_pulse: None,
            stride: None,
        }
    }
}

impl EvolutionSection {
    pub fn plan(&self, pulse: &PulseProfile) -> Result<EvolutionPlan> {
        let base = EvolutionPlan::for_pulse(pulse, self.t_end);
        let plan = EvolutionPlan {
            t_end: self.t_end,
            dt: self.dt.unwrap_or(base.dt),
            dt_pulse: self.dt_pulse.unwrap_or(base.dt_pulse),
            stride: self.stride.unwrap_or(base.stride),
        };
        plan.validate(pulse)?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoSection {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_ECHO_THRESHOLD
}

impl Default for EchoSection {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the config hash.
    #[serde(default)]
    pub name: Option<String>,
    /// Times at which binary snapshots are written.
    #[serde(default = "default_snapshots")]
    pub snapshots: Vec<f64>,
    /// Also write a snapshot at the detected echo peak.
    #[serde(default = "default_true")]
    pub snapshot_peak: bool,
}

fn default_snapshots() -> Vec<f64> {
    vec![0.0, 0.99]
}

fn default_true() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            name: None,
            snapshots: default_snapshots(),
            snapshot_peak: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub geometry: Geometry,
    pub sigma: f64,
    pub k: f64,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
}

impl PacketSection {
    pub fn spec(&self) -> Result<PacketSpec> {
        check_positive("packet.sigma", self.sigma)?;
        check(self.k.is_finite(), "packet.k", "must be finite", self.k)?;
        if let Some(c) = self.center {
            check(c.is_finite(), "packet.center", "must be finite", c)?;
        }
        if let Some(r) = self.radius {
            check_positive("packet.radius", r)?;
            check(self.k > 0.0, "packet.k", "must be positive for a ring", self.k)?;
        }
        let spec = match self.geometry {
            Geometry::Line => {
                if self.radius.is_some() {
                    return Err(QtmError::Config(
                        "packet.radius is only meaningful for geometry = \"ring\"".into(),
                    ));
                }
                PacketSpec::Line(
                    PacketSpec1D::new(self.sigma, self.k).with_center(self.center.unwrap_or(0.0)),
                )
            }
            Geometry::Ring => {
                if self.center.is_some() {
                    return Err(QtmError::Config(
                        "packet.center is only meaningful for geometry = \"line\"".into(),
                    ));
                }
                let radius = self.radius.ok_or_else(|| {
                    QtmError::Config("packet.radius is required for geometry = \"ring\"".into())
                })?;
                PacketSpec::Ring(PacketSpecRing::new(radius, self.sigma, self.k))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    packet: PacketSection,
    pulse: PulseSection,
    #[serde(default)]
    evolution: EvolutionSection,
    #[serde(default)]
    grid: Option<GridSection>,
    #[serde(default)]
    echo: EchoSection,
    #[serde(default)]
    output: OutputSection,
}

/// Fully resolved single-run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// The grid came from the automatic rule.
    pub auto_grid: bool,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RunFile = parse_toml(text)?;
        Self::resolve(&file).map_err(|e| locate_error(text, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| with_path(path, e))
    }

    fn resolve(file: &RunFile) -> Result<Self> {
        let packet = file.packet.spec()?;
        check_pulse(&file.pulse, file.pulse.strength, "pulse.strength")?;
        check_evolution(&file.evolution, file.pulse.width)?;
        if let Some(g) = &file.grid {
            check_grid(g)?;
        }
        check_threshold(file.echo.threshold)?;
        let strength = file
            .pulse
            .strength
            .ok_or_else(|| QtmError::Config("pulse.strength is required".into()))?;
        let pulse = file.pulse.profile(strength)?;
        let plan = file.evolution.plan(&pulse)?;
        let (grid, auto_grid) = match &file.grid {
            Some(g) => (g.build(packet.dim())?, false),
            None => (simulation::auto_grid(&packet, strength, plan.t_end)?, true),
        };
        let scenario = Scenario {
            packet,
            grid,
            pulse,
            plan,
            threshold: file.echo.threshold,
        };
        scenario.validate()?;
        // packet must fit
        packet.build(&scenario.grid)?;
        let (w0, w1) = pulse.window();
        for &t in &file.output.snapshots {
            if !(0.0..=plan.t_end).contains(&t) {
                return Err(QtmError::Config(format!(
                    "output.snapshots: time {t} lies outside [0, {}]",
                    plan.t_end
                )));
            }
            if t > w0 && t < w1 {
                return Err(QtmError::Config(format!(
                    "output.snapshots: time {t} falls inside the pulse window ({w0}, {w1})"
                )));
            }
        }
        Ok(Self {
            scenario,
            auto_grid,
            output: file.output.clone(),
        })
    }

    fn to_file(&self) -> RunFile {
        let s = &self.scenario;
        let (geometry, center, radius) = match s.packet {
            PacketSpec::Line(p) => (Geometry::Line, Some(p.center), None),
            PacketSpec::Ring(p) => (Geometry::Ring, None, Some(p.radius)),
        };
        RunFile {
            packet: PacketSection {
                geometry,
                sigma: s.packet.sigma(),
                k: s.packet.k(),
                center,
                radius,
            },
            pulse: pulse_section(&s.pulse, Some(s.pulse.strength)),
            evolution: EvolutionSection {
                t_end: s.plan.t_end,
                dt: Some(s.plan.dt),
                dt_pulse: Some(s.plan.dt_pulse),
                stride: Some(s.plan.stride),
            },
            grid: Some(GridSection::of(&s.grid)),
            echo: EchoSection {
                threshold: s.threshold,
            },
            output: self.output.clone(),
        }
    }

    /// TOML that parses back to this configuration with the grid pinned.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("run configuration serializes")
    }

    /// `# key=value` lines describing every resolved parameter.
    pub fn header(&self) -> Header {
        let s = &self.scenario;
        let mut h = Header::new("run");
        match s.packet {
            PacketSpec::Line(p) => {
                h.push("packet.geometry", "line");
                h.push("packet.sigma", p.sigma);
                h.push("packet.k", p.k);
                h.push("packet.center", p.center);
            }
            PacketSpec::Ring(p) => {
                h.push("packet.geometry", "ring");
                h.push("packet.radius", p.radius);
                h.push("packet.sigma", p.sigma);
                h.push("packet.k", p.k);
            }
        }
        push_pulse(&mut h, &s.pulse, true);
        push_plan(&mut h, &s.plan);
        push_grid(&mut h, &s.grid, self.auto_grid);
        h.push("echo.threshold", s.threshold);
        h
    }

    /// Output file stem: `output.name` or the config hash.
    pub fn stem(&self) -> String {
        self.output
            .name
            .clone()
            .unwrap_or_else(|| self.header().hash())
    }
}

pub(crate) fn pulse_section(p: &PulseProfile, strength: Option<f64>) -> PulseSection {
    let (kind, width) = match p.kind {
        PulseKind::Instantaneous => (PulseShape::Instantaneous, None),
        PulseKind::Gaussian { width } => (PulseShape::Gaussian, Some(width)),
    };
    PulseSection {
        kind,
        strength,
        center: p.center,
        width,
    }
}

pub(crate) fn push_pulse(h: &mut Header, p: &PulseProfile, with_strength: bool) {
    match p.kind {
        PulseKind::Instantaneous => h.push("pulse.kind", "instantaneous"),
        PulseKind::Gaussian { width } => {
            h.push("pulse.kind", "gaussian");
            h.push("pulse.width", width);
        }
    }
    h.push("pulse.center", p.center);
    if with_strength {
        h.push("pulse.strength", p.strength);
    }
}

pub(crate) fn push_plan(h: &mut Header, plan: &EvolutionPlan) {
    h.push("evolution.t_end", plan.t_end);
    h.push("evolution.dt", plan.dt);
    h.push("evolution.dt_pulse", plan.dt_pulse);
    h.push("evolution.stride", plan.stride);
}

pub(crate) fn push_grid(h: &mut Header, grid: &Grid, auto: bool) {
    h.push("grid.dim", grid.dim());
    h.push("grid.x_min", grid.x_min());
    h.push("grid.x_max", grid.x_max());
    h.push("grid.n", grid.n());
    h.push("grid.dx", grid.dx());
    if auto {
        h.push("grid.rule", simulation::GRID_RULE);
    }
}

/// Commented `key=value` block written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        let mut h = Self {
            entries: Vec::new(),
        };
        h.push("artifact", kind);
        h.push("code_version", CODE_VERSION);
        h
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Copy with an extra entry, for per-file annotations.
    pub fn with(&self, key: &str, value: impl Display) -> Self {
        let mut h = self.clone();
        h.push(key, value);
        h
    }

    /// First 12 hex digits of the SHA-256 of the rendered parameters,
    /// ignoring the artifact kind.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| k != "artifact") {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str("# ");
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let msg = e.message().trim().to_string();
        match line {
            Some(l) => QtmError::Config(format!("line {l}: {msg}")),
            None => QtmError::Config(msg),
        }
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if present.
pub(crate) fn find_key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Messages naming `section.key` get the line of that key.
fn locate_error(text: &str, err: QtmError) -> QtmError {
    if let QtmError::Io(e) = err {
        return QtmError::Io(e);
    }
    let msg = match err {
        QtmError::Config(m) => m,
        other => other.to_string(),
    };
    let line = msg.split_whitespace().find_map(|word| {
        let word = word.trim_matches(|c: char| !(c.is_alphanumeric() || c == '.' || c == '_'));
        let (section, key) = word.rsplit_once('.')?;
        find_key_line(text, section, key)
    });
    match line {
        Some(l) => QtmError::Config(format!("line {l}: {msg}")),
        None => QtmError::Config(msg),
    }
}

fn check(ok: bool, key: &str, requirement: &str, value: impl Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(QtmError::Config(format!("{key} {requirement}, got {value}")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    check(v > 0.0 && v.is_finite(), key, "must be positive", v)
}

fn check_pulse(p: &PulseSection, strength: Option<f64>, strength_key: &str) -> Result<()> {
    check_positive("pulse.center", p.center)?;
    if let Some(w) = p.width {
        check(
            w > 0.0 && w <= 0.01 * p.center,
            "pulse.width",
            &format!("must lie in (0, 0.01 * center] = (0, {}]", 0.01 * p.center),
            w,
        )?;
    }
    if let Some(l) = strength {
        check(l >= 0.0 && l.is_finite(), strength_key, "must be finite and >= 0", l)?;
    }
    Ok(())
}

fn check_evolution(e: &EvolutionSection, width: Option<f64>) -> Result<()> {
    check_positive("evolution.t_end", e.t_end)?;
    if let Some(dt) = e.dt {
        check(
            dt > 0.0 && dt <= 1e-3 * e.t_end * (1.0 + 1e-9),
            "evolution.dt",
            &format!("must lie in (0, 1e-3 * t_end] = (0, {}]", 1e-3 * e.t_end),
            dt,
        )?;
    }
    if let Some(h) = e.dt_pulse {
        let limit = width.map_or(f64::INFINITY, |w| w / EvolutionPlan::PULSE_RESOLUTION);
        check(
            h > 0.0 && h <= limit * (1.0 + 1e-9),
            "evolution.dt_pulse",
            &format!("must lie in (0, width/50] = (0, {limit}]"),
            h,
        )?;
    }
    if let Some(s) = e.stride {
        check(s >= 1, "evolution.stride", "must be at least 1", s)?;
    }
    Ok(())
}

fn check_grid(g: &GridSection) -> Result<()> {
    check(
        g.n >= 16 && g.n.is_power_of_two(),
        "grid.n",
        "must be a power of two and at least 16",
        g.n,
    )?;
    check(
        g.x_min.is_finite() && g.x_max.is_finite() && g.x_max > g.x_min,
        "grid.x_max",
        &format!("must exceed grid.x_min = {}", g.x_min),
        g.x_max,
    )
}

fn check_threshold(t: f64) -> Result<()> {
    check(t > 0.0 && t < 1.0, "echo.threshold", "must lie in (0, 1)", t)
}

fn with_path(path: &Path, err: QtmError) -> QtmError {
    match err {
        QtmError::Config(m) => QtmError::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    geometry: Geometry,
    axis: Vec<Axis>,
    #[serde(default)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepSection,
    #[serde(default)]
    fixed: FixedParams,
    pulse: PulseSection,
    #[serde(default)]
    evolution: EvolutionSection,
    #[serde(default)]
    grid: Option<GridSection>,
    #[serde(default)]
    echo: EchoSection,
    #[serde(default)]
    output: OutputSection,
}

/// Sweep plan plus output settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub plan: SweepPlan,
    pub output: OutputSection,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SweepFile = parse_toml(text)?;
        Self::resolve(file).map_err(|e| locate_error(text, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| with_path(path, e))
    }

    fn resolve(file: SweepFile) -> Result<Self> {
        if file.pulse.strength.is_some() {
            return Err(QtmError::Config(
                "pulse.strength is not used by sweeps; set fixed.lambda or sweep lambda".into(),
            ));
        }
        check_pulse(&file.pulse, file.fixed.lambda, "fixed.lambda")?;
        check_evolution(&file.evolution, file.pulse.width)?;
        if let Some(g) = &file.grid {
            check_grid(g)?;
        }
        check_threshold(file.echo.threshold)?;
        let axes: [Axis; 2] = file.sweep.axis.try_into().map_err(|v: Vec<Axis>| {
            QtmError::Config(format!(
                "sweep.axis needs exactly two tables, got {}",
                v.len()
            ))
        })?;
        let plan = SweepPlan {
            geometry: file.sweep.geometry,
            axes,
            fixed: file.fixed,
            pulse: file.pulse,
            evolution: file.evolution,
            grid: file.grid,
            threshold: file.echo.threshold,
            workers: file.sweep.workers.unwrap_or(1),
        };
        plan.validate()?;
        Ok(Self {
            plan,
            output: file.output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"
[packet]
geometry = "line"
sigma = 1.0
k = 4.0

[pulse]
kind = "gaussian"
strength = 40.0
width = 0.001
"#;

    #[test]
    fn parses_minimal_line_config() {
        let c = RunConfig::from_toml(LINE).unwrap();
        assert!(c.auto_grid);
        assert_eq!(c.scenario.plan.t_end, 4.0);
        assert_eq!(c.scenario.pulse.center, 1.0);
        assert_eq!(c.scenario.threshold, 0.2);
        assert_eq!(c.output.snapshots, vec![0.0, 0.99]);
    }

    #[test]
    fn round_trip_is_stable() {
        let c = RunConfig::from_toml(LINE).unwrap();
        let text = c.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.scenario, c.scenario);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.header().hash().len(), 12);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = RunConfig::from_toml(LINE).unwrap().header().hash();
        let b = RunConfig::from_toml(&LINE.replace("sigma = 1.0", "sigma   =   1")).unwrap();
        assert_eq!(a, b.header().hash());
        let c = RunConfig::from_toml(&LINE.replace("40.0", "41.0")).unwrap();
        assert_ne!(a, c.header().hash());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = LINE.replace("k = 4.0", "k = ");
        let err = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        let unknown = LINE.replace("k = 4.0", "k = 4.0\nmomentum = 3");
        let err = RunConfig::from_toml(&unknown).unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn semantic_errors_carry_line_numbers() {
        let bad = LINE.replace("sigma = 1.0", "sigma = -1.0");
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 4"), "{err}");
        let wide = LINE.replace("width = 0.001", "width = 0.5");
        let err = RunConfig::from_toml(&wide).unwrap_err().to_string();
        assert!(err.contains("line 10"), "{err}");
    }

    #[test]
    fn snapshots_avoid_the_pulse_window() {
        let text = format!("{LINE}\n[output]\nsnapshots = [0.0, 0.998]\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("pulse window"), "{err}");
        assert!(err.contains("line 13"), "{err}");
        let text = format!("{LINE}\n[output]\nsnapshots = [5.0]\n");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn ring_needs_radius() {
        let ring = LINE.replace("\"line\"", "\"ring\"");
        let err = RunConfig::from_toml(&ring).unwrap_err().to_string();
        assert!(err.contains("radius"), "{err}");
    }

    #[test]
    fn explicit_grid_must_hold_packet() {
        let small = format!("{LINE}\n[grid]\nx_min = -4.0\nx_max = 4.0\nn = 256\n");
        let err = RunConfig::from_toml(&small).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let fine = format!("{LINE}\n[grid]\nx_min = -40.0\nx_max = 88.0\nn = 2048\n");
        let c = RunConfig::from_toml(&fine).unwrap();
        assert!(!c.auto_grid);
        assert_eq!(c.scenario.grid.n(), 2048);
    }

    #[test]
    fn header_lists_parameters() {
        let c = RunConfig::from_toml(LINE).unwrap();
        let h = c.header();
        assert_eq!(h.get("pulse.strength"), Some("40"));
        assert_eq!(h.get("code_version"), Some(CODE_VERSION));
        assert!(h.get("grid.rule").is_some());
        let text = h.render();
        assert!(text.lines().all(|l| l.starts_with("# ")));
        assert_eq!(c.stem(), h.hash());
    }

    #[test]
    fn key_lines() {
        let text = "[a]\nx = 1\n[b]\nx = 2\n";
        assert_eq!(find_key_line(text, "b", "x"), Some(4));
        assert_eq!(find_key_line(text, "c", "x"), None);
    }
}
