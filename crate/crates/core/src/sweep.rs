//! Parallel parameter sweeps over kick strength, width, momentum and ring
//! radius.
//!
//! Cells are assigned to workers in contiguous static blocks and results are
//! keyed by cell index, so output bytes do not depend on the worker count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{
    self, EvolutionSection, Geometry, GridSection, Header, PulseSection,
};
use crate::error::{QtmError, Result};
use crate::grid::Grid;
use crate::mirror;
use crate::propagator::Propagator;
use crate::simulation::{GridDesign, PacketSpec, Scenario};
use crate::wavefunction::{PacketSpec1D, PacketSpecRing};

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Lambda,
    Sigma,
    K,
    Radius,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Lambda => "lambda",
            Parameter::Sigma => "sigma",
            Parameter::K => "k",
            Parameter::Radius => "radius",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: Parameter,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(parameter: Parameter, min: f64, max: f64, count: usize) -> Self {
        Self {
            parameter,
            min,
            max,
            count,
        }
    }

    /// Evenly spaced values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + i as f64 * step
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let key = format!("sweep.axis {}", self.parameter.name());
        if self.count < 2 {
            return Err(QtmError::Config(format!(
                "{key}: count must be at least 2, got {}",
                self.count
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(QtmError::Config(format!(
                "{key}: need finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        let lower_ok = match self.parameter {
            Parameter::Lambda => self.min >= 0.0,
            _ => self.min > 0.0,
        };
        if !lower_ok {
            return Err(QtmError::Config(format!(
                "{key}: min {} is out of range",
                self.min
            )));
        }
        Ok(())
    }
}

/// Values of the parameters that are not swept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
}

impl FixedParams {
    fn get(&self, p: Parameter) -> Option<f64> {
        match p {
            Parameter::Lambda => self.lambda,
            Parameter::Sigma => self.sigma,
            Parameter::K => self.k,
            Parameter::Radius => self.radius,
        }
    }
}

/// Complete description of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub geometry: Geometry,
    pub axes: [Axis; 2],
    pub fixed: FixedParams,
    /// Pulse shape; the strength comes from the lambda axis or `fixed.lambda`.
    pub pulse: PulseSection,
    pub evolution: EvolutionSection,
    /// Explicit grid; the automatic rule for the worst cell when absent.
    pub grid: Option<GridSection>,
    pub threshold: f64,
    pub workers: usize,
}

/// Bytes per lattice site a worker keeps alive (states, transforms, caches).
const BYTES_PER_SITE: usize = 16 * 10;

/// Total worker memory a sweep may claim.
pub const MEMORY_LIMIT: usize = 8 << 30;

impl SweepPlan {
    fn required(&self) -> Vec<Parameter> {
        match self.geometry {
            Geometry::Line => vec![Parameter::Lambda, Parameter::Sigma, Parameter::K],
            Geometry::Ring => vec![
                Parameter::Lambda,
                Parameter::Sigma,
                Parameter::K,
                Parameter::Radius,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.axes {
            a.validate()?;
        }
        if self.axes[0].parameter == self.axes[1].parameter {
            return Err(QtmError::Config(format!(
                "sweep.axis: both axes sweep {}",
                self.axes[0].parameter.name()
            )));
        }
        let required = self.required();
        for a in &self.axes {
            if !required.contains(&a.parameter) {
                return Err(QtmError::Config(format!(
                    "sweep.axis: {} cannot be swept for geometry {}",
                    a.parameter.name(),
                    self.geometry.name()
                )));
            }
        }
        for p in required {
            let swept = self.axes.iter().any(|a| a.parameter == p);
            match (swept, self.fixed.get(p)) {
                (false, None) => {
                    return Err(QtmError::Config(format!(
                        "fixed.{} is required when it is not swept",
                        p.name()
                    )))
                }
                (true, Some(_)) => {
                    return Err(QtmError::Config(format!(
                        "fixed.{} conflicts with the swept axis",
                        p.name()
                    )))
                }
                _ => {}
            }
        }
        if self.geometry == Geometry::Line && self.fixed.radius.is_some() {
            return Err(QtmError::Config(
                "fixed.radius is only meaningful for geometry = \"ring\"".into(),
            ));
        }
        if self.workers == 0 {
            return Err(QtmError::Config("sweep.workers must be at least 1".into()));
        }
        // every cell must resolve to a valid scenario
        let grid = self.grid()?;
        let cells = self.cells();
        for c in &cells {
            self.scenario(c, &grid)?;
        }
        let bytes = grid.len() * BYTES_PER_SITE * self.workers.min(cells.len());
        if bytes > MEMORY_LIMIT {
            return Err(QtmError::Config(format!(
                "sweep would hold about {} MiB of lattice data (limit {} MiB); reduce grid.n or workers",
                bytes >> 20,
                MEMORY_LIMIT >> 20
            )));
        }
        Ok(())
    }

    /// All cells in row-major order (first axis slow).
    pub fn cells(&self) -> Vec<Cell> {
        let a = self.axes[0].values();
        let b = self.axes[1].values();
        let mut out = Vec::with_capacity(a.len() * b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out.push(Cell {
                    index: (i, j),
                    values: [x, y],
                });
            }
        }
        out
    }

    fn value(&self, cell: &Cell, p: Parameter) -> f64 {
        self.axes
            .iter()
            .zip(cell.values)
            .find(|(a, _)| a.parameter == p)
            .map(|(_, v)| v)
            .or_else(|| self.fixed.get(p))
            .expect("validated plan names every parameter")
    }

    fn packet(&self, cell: &Cell) -> PacketSpec {
        let sigma = self.value(cell, Parameter::Sigma);
        let k = self.value(cell, Parameter::K);
        match self.geometry {
            Geometry::Line => PacketSpec::Line(PacketSpec1D::new(sigma, k)),
            Geometry::Ring => PacketSpec::Ring(PacketSpecRing::new(
                self.value(cell, Parameter::Radius),
                sigma,
                k,
            )),
        }
    }

    /// Scenario of one cell on the shared grid.
    pub fn scenario(&self, cell: &Cell, grid: &Grid) -> Result<Scenario> {
        let lambda = self.value(cell, Parameter::Lambda);
        let pulse = self.pulse.profile(lambda)?;
        let s = Scenario {
            packet: self.packet(cell),
            grid: grid.clone(),
            pulse,
            plan: self.evolution.plan(&pulse)?,
            threshold: self.threshold,
        };
        s.validate()?;
        Ok(s)
    }

    /// Shared grid: explicit, or the automatic rule over every cell.
    pub fn grid(&self) -> Result<Grid> {
        if let Some(g) = &self.grid {
            return g.build(self.geometry.dim());
        }
        let design = self
            .cells()
            .iter()
            .map(|c| {
                GridDesign::for_run(
                    &self.packet(c),
                    self.value(c, Parameter::Lambda),
                    self.evolution.t_end,
                )
            })
            .try_fold(None::<GridDesign>, |acc, d| {
                let d = d?;
                Ok::<_, QtmError>(Some(acc.map_or(d, |a| a.union(&d))))
            })?
            .expect("at least four cells");
        design.build(self.geometry.dim())
    }

    /// Configuration dump for artifact headers; the worker count is left out
    /// so output bytes do not depend on it.
    pub fn header(&self, grid: &Grid) -> Header {
        let mut h = Header::new("sweep");
        h.push("sweep.geometry", self.geometry.name());
        for (n, a) in self.axes.iter().enumerate() {
            h.push(&format!("sweep.axis{}", n + 1), a.parameter.name());
            h.push(&format!("sweep.axis{}.min", n + 1), a.min);
            h.push(&format!("sweep.axis{}.max", n + 1), a.max);
            h.push(&format!("sweep.axis{}.count", n + 1), a.count);
        }
        for p in self.required() {
            if let Some(v) = self.fixed.get(p) {
                h.push(&format!("fixed.{}", p.name()), v);
            }
        }
        let pulse = self
            .pulse
            .profile(self.fixed.lambda.unwrap_or(0.0))
            .expect("validated pulse");
        config::push_pulse(&mut h, &pulse, false);
        let plan = self.evolution.plan(&pulse).expect("validated evolution");
        config::push_plan(&mut h, &plan);
        config::push_grid(&mut h, grid, self.grid.is_none());
        h.push("echo.threshold", self.threshold);
        h
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: (usize, usize),
    pub values: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub peak_strength: f64,
    pub peak_time: f64,
    pub reversed_fraction: f64,
}

/// Outcome of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub grid: Grid,
    pub cells: Vec<Cell>,
    /// Per cell, in the order of `cells`; failed cells carry the reason.
    pub results: Vec<std::result::Result<CellResult, String>>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }

    pub fn header(&self) -> Header {
        self.plan.header(&self.grid)
    }

    /// Rows `axis1,axis2,peak_strength,peak_time,reversed_fraction`; failed
    /// cells are listed in the header and written as `nan`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.header().render().as_bytes())?;
        for (c, r) in self.cells.iter().zip(&self.results) {
            if let Err(reason) = r {
                writeln!(out, "# failed {},{}: {reason}", c.values[0], c.values[1])?;
            }
        }
        writeln!(
            out,
            "{},{},peak_strength,peak_time,reversed_fraction",
            self.plan.axes[0].parameter.name(),
            self.plan.axes[1].parameter.name()
        )?;
        for (c, r) in self.cells.iter().zip(&self.results) {
            match r {
                Ok(v) => writeln!(
                    out,
                    "{:.10},{:.10},{:.10e},{:.10e},{:.10e}",
                    c.values[0], c.values[1], v.peak_strength, v.peak_time, v.reversed_fraction
                )?,
                Err(_) => writeln!(out, "{:.10},{:.10},nan,nan,nan", c.values[0], c.values[1])?,
            }
        }
        Ok(())
    }

    /// Strength matrix indexed `[i][j]` by axis position.
    pub fn strength_matrix(&self) -> Vec<Vec<f64>> {
        let (n0, n1) = (self.plan.axes[0].count, self.plan.axes[1].count);
        let mut m = vec![vec![f64::NAN; n1]; n0];
        for (c, r) in self.cells.iter().zip(&self.results) {
            if let Ok(v) = r {
                m[c.index.0][c.index.1] = v.peak_strength;
            }
        }
        m
    }
}

/// Largest tolerated fraction of failed cells.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

fn run_block(plan: &SweepPlan, grid: &Grid, cells: &[Cell]) -> Vec<std::result::Result<CellResult, String>> {
    let mut prop = Propagator::new(grid);
    cells
        .iter()
        .map(|c| {
            let outcome = plan.scenario(c, grid).and_then(|s| s.run_with(&mut prop));
            match outcome {
                Ok(o) => Ok(CellResult {
                    peak_strength: o.record.peak_strength(),
                    peak_time: o.record.peak_time(),
                    reversed_fraction: o.reversed_fraction,
                }),
                Err(e) => {
                    log::warn!("cell {:?} failed: {e}", c.values);
                    Err(e.to_string())
                }
            }
        })
        .collect()
}

/// Runs every cell on `plan.workers` threads.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let grid = plan.grid()?;
    let cells = plan.cells();
    let workers = plan.workers.min(cells.len()).max(1);
    let block = cells.len().div_ceil(workers);
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(block)
            .map(|chunk| {
                let grid = &grid;
                scope.spawn(move || run_block(plan, grid, chunk))
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let result = SweepResult {
        plan: plan.clone(),
        grid,
        cells,
        results,
    };
    let failed = result.failures();
    if failed as f64 > MAX_FAILED_FRACTION * result.cells.len() as f64 {
        return Err(QtmError::SweepFailed {
            failed,
            total: result.cells.len(),
        });
    }
    Ok(result)
}

/// Closed-form threshold along the non-lambda axis, sampled at `samples`
/// points of its range.
pub fn analytic_overlay(plan: &SweepPlan, samples: usize) -> Result<Vec<(f64, f64)>> {
    let other = match plan.axes.iter().position(|a| a.parameter == Parameter::Lambda) {
        Some(i) => plan.axes[1 - i],
        None => {
            return Err(QtmError::OverlayUndefined(
                "the threshold curve needs lambda as one of the swept axes".into(),
            ))
        }
    };
    let axis = Axis {
        count: samples.max(2),
        ..other
    };
    axis.values()
        .into_iter()
        .map(|v| {
            let get = |p: Parameter| {
                if p == other.parameter {
                    v
                } else {
                    plan.fixed.get(p).unwrap_or(f64::NAN)
                }
            };
            let l = match plan.geometry {
                Geometry::Line => mirror::lambda_min_1d(get(Parameter::Sigma), get(Parameter::K))?,
                Geometry::Ring => mirror::lambda_min_2d(
                    get(Parameter::Radius),
                    get(Parameter::Sigma),
                    get(Parameter::K),
                )?,
            };
            Ok((v, l))
        })
        .collect()
}

/// Overlay CSV: header, then `<axis>,lambda_min` rows.
pub fn write_overlay_csv<W: Write>(
    plan: &SweepPlan,
    header: &Header,
    curve: &[(f64, f64)],
    mut out: W,
) -> Result<()> {
    let name = plan
        .axes
        .iter()
        .find(|a| a.parameter != Parameter::Lambda)
        .map(|a| a.parameter.name())
        .unwrap_or("x");
    out.write_all(header.with("overlay", "closed-form lambda_min").render().as_bytes())?;
    writeln!(out, "{name},lambda_min")?;
    for (x, l) in curve {
        writeln!(out, "{x:.10},{l:.10e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PulseShape;

    pub(crate) fn smoke_plan(workers: usize) -> SweepPlan {
        SweepPlan {
            geometry: Geometry::Line,
            axes: [
                Axis::new(Parameter::Lambda, 0.0, 40.0, 2),
                Axis::new(Parameter::K, 3.0, 4.0, 2),
            ],
            fixed: FixedParams {
                sigma: Some(1.0),
                ..Default::default()
            },
            pulse: PulseSection {
                kind: PulseShape::Instantaneous,
                strength: None,
                center: 1.0,
                width: None,
            },
            evolution: EvolutionSection {
                t_end: 3.0,
                ..Default::default()
            },
            grid: None,
            threshold: 0.2,
            workers,
        }
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(Parameter::Lambda, 5.0, 200.0, 32);
        let v = a.values();
        assert_eq!(v.len(), 32);
        assert_eq!(v[0], 5.0);
        assert_eq!(v[31], 200.0);
    }

    #[test]
    fn validation() {
        assert!(smoke_plan(1).validate().is_ok());
        let mut p = smoke_plan(1);
        p.axes[1].parameter = Parameter::Lambda;
        assert!(p.validate().is_err());
        let mut p = smoke_plan(1);
        p.fixed.sigma = None;
        assert!(p.validate().unwrap_err().to_string().contains("fixed.sigma"));
        let mut p = smoke_plan(1);
        p.axes[0].count = 1;
        assert_eq!(p.validate().unwrap_err().exit_code(), 1);
        let mut p = smoke_plan(1);
        p.axes[1].parameter = Parameter::Radius;
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_lambda_column_has_no_echo() {
        let r = run_sweep(&smoke_plan(2)).unwrap();
        assert_eq!(r.failures(), 0);
        let m = r.strength_matrix();
        let baseline_like = |i: usize, j: usize| {
            let s = r.results[i * 2 + j].as_ref().unwrap();
            s.reversed_fraction
        };
        assert!(baseline_like(0, 0) < 1e-6 && baseline_like(0, 1) < 1e-6);
        assert!(m[1][1] > m[0][1] + 0.2);
    }

    #[test]
    fn deterministic_across_workers() {
        let mut one = Vec::new();
        run_sweep(&smoke_plan(1)).unwrap().write_csv(&mut one).unwrap();
        let mut four = Vec::new();
        run_sweep(&smoke_plan(4)).unwrap().write_csv(&mut four).unwrap();
        assert_eq!(one, four);
        let text = String::from_utf8(one).unwrap();
        assert!(text.contains("# code_version="));
        assert!(!text.contains("workers"));
        assert!(text.contains("\nlambda,k,peak_strength,peak_time,reversed_fraction\n"));
    }

    #[test]
    fn overlay() {
        let plan = smoke_plan(1);
        let c = analytic_overlay(&plan, 3).unwrap();
        assert_eq!(c.len(), 3);
        assert!((c[0].1 - mirror::lambda_min_1d(1.0, 3.0).unwrap()).abs() < 1e-12);
        assert!((c[2].1 - 2.0 * mirror::MIRROR_CONSTANT * 4.0).abs() < 1e-12);
        let mut fixed_lambda = plan.clone();
        fixed_lambda.axes[0] = Axis::new(Parameter::Sigma, 0.5, 2.0, 2);
        fixed_lambda.fixed = FixedParams {
            lambda: Some(30.0),
            ..Default::default()
        };
        assert!(matches!(
            analytic_overlay(&fixed_lambda, 10),
            Err(QtmError::OverlayUndefined(_))
        ));
    }

    #[test]
    fn ring_overlay_scaling() {
        let plan = SweepPlan {
            geometry: Geometry::Ring,
            axes: [
                Axis::new(Parameter::Lambda, 1000.0, 5000.0, 2),
                Axis::new(Parameter::Sigma, 1.0, 2.0, 2),
            ],
            fixed: FixedParams {
                k: Some(4.0),
                radius: Some(6.0),
                ..Default::default()
            },
            grid: Some(GridSection {
                x_min: -32.0,
                x_max: 32.0,
                n: 128,
            }),
            ..smoke_plan(1)
        };
        let c = analytic_overlay(&plan, 2).unwrap();
        assert!((c[1].1 / c[0].1 - 4.0).abs() < 1e-12);
        assert!((c[1].1 - 2421.8).abs() < 0.1);
    }
}
