//! Finite-difference solver for compressible media with inner structure on
//! periodic charts.
//!
//! Evolved fields are the mass density ρ, velocity `X` and internal energy
//! density ε. Each right-hand side evaluation recovers θ from ε, builds
//! `Δ = ∇X` and the stress σ node by node, then the heat flux and the
//! rates in separate parallel passes. Derivatives are second-order
//! central differences.

pub mod config;
pub mod grid;
pub mod medium;
pub mod run;
pub mod temperature;

pub use config::{Conductivity, ForceSign, InitialFields, ScenarioConfig};
pub use grid::{Grid, MIN_NODES};
pub use medium::{rk4_step, Derived, Medium, MediumState, Rates, THREADS_ENV};
pub use run::{diagnostics_csv, run, DiagnosticsRow, RunOutput};
pub use temperature::{TemperatureBracket, RECOVERY_TOL};
