//! Simulation and analysis toolkit for the nonlinear quantum time mirror.
//!
//! A matter-wave packet evolves freely under the dimensionless Schrödinger
//! equation `i ∂ψ/∂t = -½∇²ψ + λ f(t - t₀) |ψ|² ψ`. A short nonlinear pulse at
//! `t₀` imprints a density-dependent phase that reverses part of the
//! probability current, and the reversed part refocuses into an echo of the
//! initial density. The crate provides spectral propagation in one and two
//! dimensions, the closed-form kick analytics, closed-form free-evolution
//! references, echo detection, parallel parameter sweeps and laboratory unit
//! conversion.

pub mod cli;
pub mod config;
pub mod echo;
pub mod error;
pub mod grid;
pub mod mirror;
pub mod oracle;
pub mod propagator;
pub mod simulation;
pub mod sweep;
pub mod units;
pub mod validation;
pub mod wavefunction;

pub use num_complex::Complex64;

pub use error::{QtmError, Result};
pub use grid::{Grid, Spectral};
pub use propagator::{EvolutionPlan, Propagator, PulseKind, PulseProfile};
pub use wavefunction::{PacketSpec1D, PacketSpecRing, WaveFunction};
