//! Quadratic ("Hookean") free energies with closed-form state equations.

use std::collections::BTreeMap;

use super::model::FreeEnergy;
use super::poly::Poly;
use crate::algebra::{trace_of_product, LinOperator, SplitSpace};
use crate::error::{Error, Result};

/// Name of the Δ-independent thermal part, shared by every built-in law.
pub const THERMAL_COEFF: &str = "h0";

pub(crate) fn take_coeffs<const K: usize>(
    coeffs: &BTreeMap<String, Vec<f64>>,
    names: [&str; K],
) -> Result<[Poly; K]> {
    for key in coeffs.keys() {
        if !names.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown coefficient `{key}` (expected one of {names:?})"
            )));
        }
    }
    let mut out: [Poly; K] = std::array::from_fn(|_| Poly::zero());
    for (slot, name) in out.iter_mut().zip(names) {
        if let Some(c) = coeffs.get(name) {
            *slot = Poly::new(c.clone())?;
        }
    }
    Ok(out)
}

/// `h = ½(a Tr Δ² + b Tr ΔΔ* + c Tr²Δ) + d Tr Δ + h0`.
///
/// `a, b, c` are the viscosities and `−d` the pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct HookeanPlain {
    pub a: Poly,
    pub b: Poly,
    pub c: Poly,
    pub d: Poly,
    pub h0: Poly,
}

impl HookeanPlain {
    pub const KIND: &'static str = "hookean_plain";

    pub fn from_coeffs(coeffs: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let [a, b, c, d, h0] = take_coeffs(coeffs, ["a", "b", "c", "d", THERMAL_COEFF])?;
        Ok(Self { a, b, c, d, h0 })
    }

    fn jets(&self, theta: f64) -> [[f64; 3]; 5] {
        [&self.a, &self.b, &self.c, &self.d, &self.h0].map(|p| p.jet(theta))
    }

    /// `σ = aΔ* + bΔ + (c TrΔ + d)·1` for given coefficient values.
    fn law(
        [a, b, c, d]: [f64; 4],
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        let n = space.dim();
        let mut s = space.adjoint(delta)?.scale(a);
        s += &delta.scale(b);
        s += &LinOperator::identity(n).scale(c * delta.trace() + d);
        Ok(s)
    }
}

impl FreeEnergy for HookeanPlain {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn helmholtz(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<[f64; 3]> {
        space.check(delta)?;
        let dm = delta.matrix();
        let adj = space.adjoint(delta)?;
        let p2 = trace_of_product(dm, dm);
        let p11 = trace_of_product(dm, adj.matrix());
        let p1 = delta.trace();
        let jets = self.jets(theta);
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let [a, b, c, d, h0] = jets.map(|j| j[k]);
            *o = 0.5 * (a * p2 + b * p11 + c * p1 * p1) + d * p1 + h0;
        }
        Ok(out)
    }

    fn stress(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<LinOperator> {
        let j = self.jets(theta);
        Self::law([j[0][0], j[1][0], j[2][0], j[3][0]], delta, space)
    }

    fn stress_theta(
        &self,
        theta: f64,
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        let j = self.jets(theta);
        Self::law([j[0][1], j[1][1], j[2][1], j[3][1]], delta, space)
    }

    fn stress_derivative(
        &self,
        theta: f64,
        delta: &LinOperator,
        dir: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        space.check(delta)?;
        let j = self.jets(theta);
        Self::law([j[0][0], j[1][0], j[2][0], 0.0], dir, space)
    }
}

/// Quadratic free energy invariant under `O(g_F) × O(g_B)`:
///
/// `h = ½(a1 TrΔ² + a2 Tr ΔΔ* + a3 Tr²Δ + a4 Tr²(ΔΠ) + a5 Tr(Δ*ΔΠ) + a6 Tr(ΔΔ*Π))
///      + b1 TrΔ + b2 Tr(ΔΠ) + h0`
#[derive(Debug, Clone, PartialEq)]
pub struct HookeanSplit {
    pub a: [Poly; 6],
    pub b1: Poly,
    pub b2: Poly,
    pub h0: Poly,
}

impl HookeanSplit {
    pub const KIND: &'static str = "hookean_split";

    pub fn from_coeffs(coeffs: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let [a1, a2, a3, a4, a5, a6, b1, b2, h0] = take_coeffs(
            coeffs,
            ["a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", THERMAL_COEFF],
        )?;
        Ok(Self {
            a: [a1, a2, a3, a4, a5, a6],
            b1,
            b2,
            h0,
        })
    }

    /// Coefficient values at derivative order `k`: `[a1..a6, b1, b2, h0]`.
    fn values(&self, theta: f64, k: usize) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (o, p) in out
            .iter_mut()
            .zip(self.a.iter().chain([&self.b1, &self.b2, &self.h0]))
        {
            *o = p.jet(theta)[k];
        }
        out
    }

    /// `σ = a1Δ* + a2Δ + (a3 TrΔ + b1)1 + (a4 Tr(ΔΠ) + b2)Π + a5ΔΠ + a6ΠΔ`.
    fn law(c: &[f64; 9], with_linear: bool, delta: &LinOperator, space: &SplitSpace) -> Result<LinOperator> {
        let n = space.dim();
        let pi = space.projector_v();
        let (b1, b2) = if with_linear { (c[6], c[7]) } else { (0.0, 0.0) };
        let tr_dp = trace_of_product(delta.matrix(), pi.matrix());
        let mut s = space.adjoint(delta)?.scale(c[0]);
        s += &delta.scale(c[1]);
        s += &LinOperator::identity(n).scale(c[2] * delta.trace() + b1);
        s += &pi.scale(c[3] * tr_dp + b2);
        s += &(delta * &pi).scale(c[4]);
        s += &(&pi * delta).scale(c[5]);
        Ok(s)
    }
}

impl FreeEnergy for HookeanSplit {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn helmholtz(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<[f64; 3]> {
        space.check(delta)?;
        let d = delta.matrix();
        let adj = space.adjoint(delta)?;
        let ds = adj.matrix();
        let pi = space.projector_v();
        let p = pi.matrix();
        let tr = delta.trace();
        let tr_dp = trace_of_product(d, p);
        let inv = [
            trace_of_product(d, d),
            trace_of_product(d, ds),
            tr * tr,
            tr_dp * tr_dp,
            trace_of_product(&(ds * d), p),
            trace_of_product(&(d * ds), p),
        ];
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let c = self.values(theta, k);
            let quad: f64 = inv.iter().zip(&c[..6]).map(|(i, a)| i * a).sum();
            *o = 0.5 * quad + c[6] * tr + c[7] * tr_dp + c[8];
        }
        Ok(out)
    }

    fn stress(&self, theta: f64, delta: &LinOperator, space: &SplitSpace) -> Result<LinOperator> {
        Self::law(&self.values(theta, 0), true, delta, space)
    }

    fn stress_theta(
        &self,
        theta: f64,
        delta: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        Self::law(&self.values(theta, 1), true, delta, space)
    }

    fn stress_derivative(
        &self,
        theta: f64,
        delta: &LinOperator,
        dir: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        space.check(delta)?;
        Self::law(&self.values(theta, 0), false, dir, space)
    }
}
