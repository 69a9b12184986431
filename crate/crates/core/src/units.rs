//! Conversion between dimensionless simulation parameters and laboratory
//! quantities for ultracold atoms.
//!
//! Lengths are measured in `ℓ = sqrt(ħ t₀ / m)`, times in `t₀` and velocities
//! in `ℓ / t₀`.

use serde::{Deserialize, Serialize};

use crate::error::{QtmError, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of a lithium-7 atom in atomic mass units.
pub const LITHIUM_7_MASS_U: f64 = 7.016;

/// Laboratory setting that fixes the unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabContext {
    /// Atomic mass, kg.
    pub mass: f64,
    /// Reference time `t₀`, s.
    pub t0: f64,
    /// Transverse confinement length, m.
    #[serde(default)]
    pub a_perp: Option<f64>,
    #[serde(default)]
    pub atom_number: Option<f64>,
    /// Physical kick duration, s.
    #[serde(default)]
    pub kick_duration: Option<f64>,
}

impl LabContext {
    pub fn new(mass: f64, t0: f64) -> Result<Self> {
        let ctx = Self {
            mass,
            t0,
            a_perp: None,
            atom_number: None,
            kick_duration: None,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Lithium-7 with `t₀ = 10 ms`, `N = 10⁷`, `a⊥ = 10 μm`, `Δt = 10 μs`.
    pub fn lithium7() -> Self {
        Self {
            mass: LITHIUM_7_MASS_U * ATOMIC_MASS_UNIT,
            t0: 10e-3,
            a_perp: Some(10e-6),
            atom_number: Some(1e7),
            kick_duration: Some(10e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QtmError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("mass", self.mass)?;
        positive("t0", self.t0)?;
        for (name, v) in [
            ("a_perp", self.a_perp),
            ("atom_number", self.atom_number),
            ("kick_duration", self.kick_duration),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        Ok(())
    }

    /// `ℓ = sqrt(ħ t₀ / m)`, m.
    pub fn length_unit(&self) -> f64 {
        (HBAR * self.t0 / self.mass).sqrt()
    }

    /// `ℓ / t₀`, m/s.
    pub fn velocity_unit(&self) -> f64 {
        self.length_unit() / self.t0
    }

    pub fn length_to_dimensionless(&self, meters: f64) -> f64 {
        meters / self.length_unit()
    }

    pub fn length_to_dimensional(&self, value: f64) -> f64 {
        value * self.length_unit()
    }

    pub fn velocity_to_dimensionless(&self, meters_per_second: f64) -> f64 {
        meters_per_second / self.velocity_unit()
    }

    pub fn velocity_to_dimensional(&self, value: f64) -> f64 {
        value * self.velocity_unit()
    }

    pub fn time_to_dimensionless(&self, seconds: f64) -> f64 {
        seconds / self.t0
    }

    /// Scattering length `a_s = λ a⊥² sqrt(m t₀ / ħ) / (2 N Δt)` that yields
    /// kick strength `λ`, m.
    pub fn scattering_length(&self, lambda: f64) -> Result<f64> {
        let missing = |name: &str| {
            QtmError::InvalidParameter(format!("scattering length needs {name} in the context"))
        };
        let a_perp = self.a_perp.ok_or_else(|| missing("a_perp"))?;
        let n = self.atom_number.ok_or_else(|| missing("atom_number"))?;
        let dt = self.kick_duration.ok_or_else(|| missing("kick_duration"))?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(QtmError::InvalidParameter(format!(
                "kick strength must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(lambda * a_perp * a_perp * (self.mass * self.t0 / HBAR).sqrt() / (2.0 * n * dt))
    }
}

/// One row of the conversion table printed by the command line tool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringRow {
    pub lambda: f64,
    pub scattering_length: f64,
}

pub fn scattering_table(ctx: &LabContext, lambdas: &[f64]) -> Result<Vec<ScatteringRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            Ok(ScatteringRow {
                lambda,
                scattering_length: ctx.scattering_length(lambda)?,
            })
        })
        .collect()
}
