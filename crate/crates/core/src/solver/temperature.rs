//! Inversion of the energy relation `ε = ε(θ, Δ)` for θ.

use serde::{Deserialize, Serialize};

use crate::algebra::LinOperator;
use crate::error::{Error, Result};
use crate::thermo::FreeEnergyModel;

/// Residual tolerance relative to `1 + |ε|`.
pub const RECOVERY_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 200;
const WARM_ITERS: usize = 8;

/// Search interval for the temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TemperatureBracket {
    lo: f64,
    hi: f64,
}

impl TemperatureBracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "temperature bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

impl Default for TemperatureBracket {
    fn default() -> Self {
        Self { lo: 1e-3, hi: 1e3 }
    }
}

impl TryFrom<[f64; 2]> for TemperatureBracket {
    type Error = Error;
    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Self::new(lo, hi)
    }
}

impl From<TemperatureBracket> for [f64; 2] {
    fn from(b: TemperatureBracket) -> Self {
        [b.lo, b.hi]
    }
}

impl FreeEnergyModel {
    /// θ in `bracket` with `ε(θ, Δ) = eps`.
    ///
    /// Newton steps are taken while they stay inside the current sign
    /// bracket and shrink the residual; otherwise the step bisects.
    /// A non-positive heat capacity at any iterate, or `ε(lo) > ε(hi)`,
    /// is reported as [`Error::UnstableState`].
    pub fn recover_temperature(
        &self,
        eps: f64,
        delta: &LinOperator,
        bracket: TemperatureBracket,
    ) -> Result<f64> {
        self.recover_temperature_near(eps, delta, bracket, None)
    }

    /// As [`Self::recover_temperature`], trying a few plain Newton steps
    /// from `guess` first. Falls back to the bracketed search as soon as an
    /// iterate leaves the bracket or meets a non-positive heat capacity.
    pub fn recover_temperature_near(
        &self,
        eps: f64,
        delta: &LinOperator,
        bracket: TemperatureBracket,
        guess: Option<f64>,
    ) -> Result<f64> {
        if !eps.is_finite() {
            return Err(Error::NonFinite("internal energy"));
        }
        let tol = RECOVERY_TOL * (1.0 + eps.abs());
        let f = |theta: f64| -> Result<f64> { Ok(self.energy(theta, delta)? - eps) };
        if let Some(mut theta) = guess.filter(|g| *g > bracket.lo && *g < bracket.hi) {
            for _ in 0..WARM_ITERS {
                let (e, c) = self.energy_and_heat_capacity(theta, delta)?;
                let r = e - eps;
                if r.abs() <= tol {
                    return Ok(theta);
                }
                theta -= r / c;
                if !(c > 0.0 && theta > bracket.lo && theta < bracket.hi) {
                    break;
                }
            }
        }
        let (mut a, mut b) = (bracket.lo, bracket.hi);
        let (fa, fb) = (f(a)?, f(b)?);
        if fa.abs() <= tol {
            return Ok(a);
        }
        if fb.abs() <= tol {
            return Ok(b);
        }
        if fa > fb {
            return Err(Error::UnstableState(format!(
                "internal energy decreases across [{a}, {b}]"
            )));
        }
        if fa > 0.0 || fb < 0.0 {
            return Err(Error::Bracket {
                lo: a,
                hi: b,
                target: eps,
            });
        }
        // secant start is exact for energies linear in θ
        let mut theta = a - fa * (b - a) / (fb - fa);
        if !(theta > a && theta < b) {
            theta = 0.5 * (a + b);
        }
        let mut prev_res = f64::INFINITY;
        for _ in 0..MAX_ITERS {
            let (e, c) = self.energy_and_heat_capacity(theta, delta)?;
            let r = e - eps;
            if r.abs() <= tol {
                return Ok(theta);
            }
            if r < 0.0 {
                a = theta;
            } else {
                b = theta;
            }
            if !(c > 0.0) {
                return Err(Error::UnstableState(format!(
                    "heat capacity {c} is not positive at θ = {theta}"
                )));
            }
            let newton = theta - r / c;
            let next = if newton > a && newton < b && r.abs() < 0.5 * prev_res {
                newton
            } else {
                0.5 * (a + b)
            };
            prev_res = r.abs();
            if next == theta || b - a <= f64::EPSILON * b {
                return Ok(theta);
            }
            theta = next;
        }
        Err(Error::Numerical(format!(
            "temperature recovery did not converge for ε = {eps}"
        )))
    }
}
