use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree accepted for a temperature coefficient.
pub const MAX_POLY_DEGREE: usize = 8;

/// Polynomial in θ with coefficients in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::Config(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        Ok(Self(coeffs))
    }

    pub fn constant(c: f64) -> Self {
        Self(vec![c])
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    /// Value and first two derivatives at `x`.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &c in self.0.iter().rev() {
            d2 = d2 * x + d1;
            d1 = d1 * x + p;
            p = p * x + c;
        }
        [p, d1, 2.0 * d2]
    }
}
