use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generic::GenericLaw;
use super::hookean::{HookeanPlain, HookeanSplit};
use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};

/// A Helmholtz free energy `h(θ, Δ)` together with its derivatives.
///
/// Implementations are constitutive laws; the metric enters through the
/// `space` argument so the same law can be evaluated at every node of a
/// curved chart.
pub trait FreeEnergy: Debug + Send + Sync {
    /// Registry name of the law.
    fn kind(&self) -> &'static str;

    /// `[h, h_θ, h_θθ]`.
    fn helmholtz(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<[f64; 3]>;

    /// `σ = h_Δ`, the gradient of `h` with respect to the pairing.
    fn stress(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<LinOperator>;

    /// `∂σ/∂θ`.
    fn stress_theta(
        &self,
        theta: f64,
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator>;

    /// Directional derivative of `σ` along `dir` at fixed θ.
    fn stress_derivative(
        &self,
        theta: f64,
        delta: &LinOperator,
        dir: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator>;
}

/// Which relation between `ε` and `h` is used.
///
/// `Derived` follows from the contact form vanishing on the state manifold:
/// `s = −h_θ`, `ε = h − θh_θ`. `Paper` is the printed `ε = (θh)_θ`, paired
/// with `s = h_θ` so that `h = ε − θs` still holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnergyConvention {
    #[default]
    #[serde(alias = "derived")]
    Derived,
    #[serde(alias = "paper")]
    Paper,
}

impl EnergyConvention {
    fn sign(self) -> f64 {
        match self {
            EnergyConvention::Derived => -1.0,
            EnergyConvention::Paper => 1.0,
        }
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub coeffs: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub energy_convention: EnergyConvention,
    /// Optional fiber metric (m×m rows); identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_f: Option<Vec<Vec<f64>>>,
    /// Optional base metric (n×n rows); identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_b: Option<Vec<Vec<f64>>>,
}

impl ModelSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn space(&self) -> Result<SplitSpace> {
        let g_f = rows_to_matrix(self.g_f.as_deref(), self.m)?;
        let g_b = rows_to_matrix(self.g_b.as_deref(), self.n)?;
        SplitSpace::new(g_f, g_b)
    }
}

fn rows_to_matrix(rows: Option<&[Vec<f64>]>, k: usize) -> Result<DMatrix<f64>> {
    match rows {
        None => Ok(DMatrix::identity(k, k)),
        Some(rows) => {
            if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                return Err(Error::Config(format!("metric must be {k}×{k}")));
            }
            Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
        }
    }
}

pub type ModelBuilder = fn(&ModelSpec) -> Result<Box<dyn FreeEnergy>>;

/// Constitutive laws selectable by name.
#[derive(Clone)]
pub struct ModelRegistry {
    builders: BTreeMap<String, ModelBuilder>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// `hookean_plain`, `hookean_split` and `generic`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(HookeanPlain::KIND, |s| {
            Ok(Box::new(HookeanPlain::from_coeffs(&s.coeffs)?))
        });
        r.register(HookeanSplit::KIND, |s| {
            Ok(Box::new(HookeanSplit::from_coeffs(&s.coeffs)?))
        });
        r.register(GenericLaw::KIND, |s| {
            Ok(Box::new(GenericLaw::from_coeffs(&s.coeffs)?))
        });
        r
    }

    pub fn register(&mut self, name: &str, builder: ModelBuilder) {
        self.builders.insert(name.to_ascii_lowercase(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<FreeEnergyModel> {
        let key = spec.kind.to_ascii_lowercase();
        let builder = self.builders.get(&key).ok_or_else(|| Error::Unknown {
            what: "model kind",
            name: spec.kind.clone(),
        })?;
        let law = builder(spec)?;
        Ok(FreeEnergyModel {
            space: spec.space()?,
            law: Arc::from(law),
            convention: spec.energy_convention,
        })
    }
}

/// A point `(θ, Δ)` of the state manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoPoint {
    pub theta: f64,
    pub delta: LinOperator,
}

impl ThermoPoint {
    pub fn new(theta: f64, delta: LinOperator) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Config(format!("temperature must be positive, got {theta}")));
        }
        Ok(Self { theta, delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoResponse {
    pub sigma: LinOperator,
    pub epsilon: f64,
    /// Entropy density, defined up to an additive constant.
    pub entropy: f64,
    pub helmholtz: f64,
}

/// A constitutive law bound to a split space and an energy convention.
#[derive(Debug, Clone)]
pub struct FreeEnergyModel {
    space: SplitSpace,
    law: Arc<dyn FreeEnergy>,
    convention: EnergyConvention,
}

impl FreeEnergyModel {
    pub fn new(space: SplitSpace, law: Box<dyn FreeEnergy>, convention: EnergyConvention) -> Self {
        Self {
            space,
            law: Arc::from(law),
            convention,
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        ModelRegistry::with_builtins().build(spec)
    }

    pub fn space(&self) -> &SplitSpace {
        &self.space
    }

    pub fn law(&self) -> &dyn FreeEnergy {
        self.law.as_ref()
    }

    pub fn kind(&self) -> &'static str {
        self.law.kind()
    }

    pub fn convention(&self) -> EnergyConvention {
        self.convention
    }

    pub fn with_convention(mut self, convention: EnergyConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Same law and convention evaluated in another space of equal dimension.
    pub fn with_space(&self, space: SplitSpace) -> Result<Self> {
        if space.dim() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: space.dim(),
            });
        }
        Ok(Self {
            space,
            law: Arc::clone(&self.law),
            convention: self.convention,
        })
    }

    pub fn helmholtz(&self, p: &ThermoPoint) -> Result<f64> {
        Ok(self.law.helmholtz(p.theta, &p.delta, &self.space)?[0])
    }

    pub fn stress(&self, p: &ThermoPoint) -> Result<LinOperator> {
        self.space.check(&p.delta)?;
        self.law.stress(p.theta, &p.delta, &self.space)
    }

    pub fn energy_entropy(&self, p: &ThermoPoint) -> Result<ThermoResponse> {
        self.space.check(&p.delta)?;
        let [h, h_t, _] = self.law.helmholtz(p.theta, &p.delta, &self.space)?;
        let sign = self.convention.sign();
        let entropy = sign * h_t;
        Ok(ThermoResponse {
            sigma: self.law.stress(p.theta, &p.delta, &self.space)?,
            epsilon: h + sign * p.theta * h_t,
            entropy,
            helmholtz: h,
        })
    }

    /// Internal energy `ε(θ, Δ)` alone.
    pub fn energy(&self, theta: f64, delta: &LinOperator) -> Result<f64> {
        let [h, h_t, _] = self.law.helmholtz(theta, delta, &self.space)?;
        Ok(h + self.convention.sign() * theta * h_t)
    }

    /// `∂ε/∂θ` at fixed Δ (volumetric heat capacity).
    pub fn heat_capacity(&self, theta: f64, delta: &LinOperator) -> Result<f64> {
        Ok(self.energy_and_heat_capacity(theta, delta)?.1)
    }

    /// `(ε, ∂ε/∂θ)` from a single free-energy evaluation.
    pub fn energy_and_heat_capacity(&self, theta: f64, delta: &LinOperator) -> Result<(f64, f64)> {
        let [h, h_t, h_tt] = self.law.helmholtz(theta, delta, &self.space)?;
        let c = match self.convention {
            EnergyConvention::Derived => -theta * h_tt,
            EnergyConvention::Paper => 2.0 * h_t + theta * h_tt,
        };
        Ok((h + self.convention.sign() * theta * h_t, c))
    }

    /// Coordinate gradient `∂ε/∂Δ_ij` at fixed θ (row-major matrix).
    pub fn energy_delta_gradient(&self, theta: f64, delta: &LinOperator) -> Result<DMatrix<f64>> {
        let s = self.law.stress(theta, delta, &self.space)?;
        let s_t = self.law.stress_theta(theta, delta, &self.space)?;
        let combined = &s + &s_t.scale(self.convention.sign() * theta);
        Ok(self.space.raw_gradient(&combined))
    }

    /// Columns `∂σ/∂Δ_kl`, ordered row-major in `(k, l)`.
    pub fn stress_jacobian(&self, theta: f64, delta: &LinOperator) -> Result<Vec<LinOperator>> {
        let n = self.space.dim();
        (0..n * n)
            .map(|kl| {
                let dir = LinOperator::unit(n, kl / n, kl % n);
                self.law.stress_derivative(theta, delta, &dir, &self.space)
            })
            .collect()
    }

    /// Coordinate Hessian `∂²h/∂Δ_ij ∂Δ_kl` (symmetrised).
    pub fn delta_hessian(&self, theta: f64, delta: &LinOperator) -> Result<DMatrix<f64>> {
        let n = self.space.dim();
        let cols = self.stress_jacobian(theta, delta)?;
        let mut hess = DMatrix::zeros(n * n, n * n);
        for (kl, col) in cols.iter().enumerate() {
            let raw = self.space.raw_gradient(col);
            for ij in 0..n * n {
                hess[(ij, kl)] = raw[(ij / n, ij % n)];
            }
        }
        Ok((&hess + hess.transpose()) * 0.5)
    }
}
