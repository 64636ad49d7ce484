//! Scenario files.

use serde::{Deserialize, Serialize};

use super::temperature::TemperatureBracket;
use crate::error::{Error, Result};
use crate::geometry::ChartSpec;
use crate::thermo::ModelSpec;

/// Sign in front of the stress force and stress power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceSign {
    /// `ρ dX/dt = −div σ`, `dε/dt = … − ⟨σ, Δ⟩`.
    #[default]
    Printed,
    /// `ρ dX/dt = +div σ`, `dε/dt = … + ⟨σ, Δ⟩`.
    Conventional,
}

impl ForceSign {
    pub fn value(self) -> f64 {
        match self {
            ForceSign::Printed => -1.0,
            ForceSign::Conventional => 1.0,
        }
    }
}

/// Thermal conductivity: a constant, a scalar expression times the
/// identity, or a constant matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conductivity {
    Scalar(f64),
    Field(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for Conductivity {
    fn default() -> Self {
        Conductivity::Scalar(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFields {
    pub rho: String,
    pub velocity: Vec<String>,
    /// Internal energy density; exclusive with `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    /// Temperature, converted to ε through the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<String>,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_output_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub chart: ChartSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub chi: Conductivity,
    pub initial: InitialFields,
    pub grid: Vec<usize>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    /// Fixed step; chosen from the stability bound each step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Steps between diagnostics rows and snapshots.
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative amplitude of seeded uniform noise added to the initial ε.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub force_sign: ForceSign,
    #[serde(default)]
    pub theta_bracket: TemperatureBracket,
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be finite and non-negative".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if self.output_every == 0 {
            return Err(Error::Config("output_every must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise must be non-negative".into()));
        }
        if self.initial.eps.is_some() == self.initial.theta.is_some() {
            return Err(Error::Config("initial needs exactly one of `eps` and `theta`".into()));
        }
        Ok(())
    }
}
