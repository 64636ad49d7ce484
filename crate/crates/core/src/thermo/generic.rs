use std::collections::BTreeMap;

use super::hookean::THERMAL_COEFF;
use super::model::FreeEnergy;
use super::poly::Poly;
use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};
use crate::invariants::TraceWord;

/// One summand `c(θ) · P_{w₁}(Δ) ⋯ P_{w_r}(Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantTerm {
    pub words: Vec<TraceWord>,
    pub coeff: Poly,
}

impl InvariantTerm {
    /// Parses a key such as `"A Astar"` or `"A | A"` (product of traces).
    pub fn parse(key: &str, coeff: Poly) -> Result<Self> {
        let words = key
            .split('|')
            .map(|w| w.trim().parse())
            .collect::<Result<Vec<TraceWord>>>()?;
        Ok(Self { words, coeff })
    }

    pub fn key(&self) -> String {
        self.words
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// `h = Σ c_t(θ) Π P_w(Δ) + h0(θ)` over arbitrary trace-word products.
///
/// Stress and its derivatives come from the analytic word gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericLaw {
    pub terms: Vec<InvariantTerm>,
    pub h0: Poly,
}

impl GenericLaw {
    pub const KIND: &'static str = "generic";

    pub fn new(terms: Vec<InvariantTerm>, h0: Poly) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("generic model needs at least one word".into()));
        }
        Ok(Self { terms, h0 })
    }

    pub fn from_coeffs(coeffs: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut terms = Vec::new();
        let mut h0 = Poly::zero();
        for (key, c) in coeffs {
            let poly = Poly::new(c.clone())?;
            if key == THERMAL_COEFF {
                h0 = poly;
            } else {
                terms.push(InvariantTerm::parse(key, poly)?);
            }
        }
        Self::new(terms, h0)
    }

    fn word_values(
        term: &InvariantTerm,
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<Vec<f64>> {
        term.words.iter().map(|w| w.eval(delta, space)).collect()
    }

    /// `Σ_t c_t · ∂(Π P_w)/∂Δ` with the given coefficient values.
    fn gradient_with(
        &self,
        coeffs: &[f64],
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        let mut g = LinOperator::zeros(space.dim());
        for (term, &c) in self.terms.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let vals = Self::word_values(term, delta, space)?;
            for (i, w) in term.words.iter().enumerate() {
                let others: f64 = product_except(&vals, &[i]);
                g += &w.gradient(delta, space)?.scale(c * others);
            }
        }
        Ok(g)
    }
}

fn product_except(vals: &[f64], skip: &[usize]) -> f64 {
    vals.iter()
        .enumerate()
        .filter(|(k, _)| !skip.contains(k))
        .map(|(_, v)| v)
        .product()
}

impl FreeEnergy for GenericLaw {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn helmholtz(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<[f64; 3]> {
        space.check(delta)?;
        let mut out = self.h0.jet(theta);
        for term in &self.terms {
            let p: f64 = Self::word_values(term, delta, space)?.iter().product();
            let c = term.coeff.jet(theta);
            for k in 0..3 {
                out[k] += c[k] * p;
            }
        }
        Ok(out)
    }

    fn stress(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<LinOperator> {
        space.check(delta)?;
        let c: Vec<f64> = self.terms.iter().map(|t| t.coeff.eval(theta)).collect();
        self.gradient_with(&c, delta, space)
    }

    fn stress_theta(
        &self,
        theta: f64,
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        space.check(delta)?;
        let c: Vec<f64> = self.terms.iter().map(|t| t.coeff.jet(theta)[1]).collect();
        self.gradient_with(&c, delta, space)
    }

    fn stress_derivative(
        &self,
        theta: f64,
        delta: &LinOperator,
        dir: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        space.check(delta)?;
        space.check(dir)?;
        let mut out = LinOperator::zeros(space.dim());
        for term in &self.terms {
            let c = term.coeff.eval(theta);
            if c == 0.0 {
                continue;
            }
            let vals = Self::word_values(term, delta, space)?;
            let grads = term
                .words
                .iter()
                .map(|w| w.gradient(delta, space))
                .collect::<Result<Vec<_>>>()?;
            let slopes = grads
                .iter()
                .map(|g| space.pairing(g, dir))
                .collect::<Result<Vec<_>>>()?;
            for (i, w) in term.words.iter().enumerate() {
                let mut scale = 0.0;
                for (j, slope) in slopes.iter().enumerate() {
                    if j != i {
                        scale += slope * product_except(&vals, &[i, j]);
                    }
                }
                out += &grads[i].scale(c * scale);
                let d_grad = w.gradient_derivative(delta, dir, space)?;
                out += &d_grad.scale(c * product_except(&vals, &[i]));
            }
        }
        Ok(out)
    }
}
