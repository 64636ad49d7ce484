//! Vertical/horizontal splitting of vector fields on product charts.

use serde::Serialize;

use super::calculus::{FieldKind, FieldOnChart};
use super::chart::{BundleSplit, ChartGeometry};
use crate::error::{Error, Result};

/// Fiber-directional derivatives of base components above this fail the check.
pub const PROJECTABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectabilityReport {
    pub verdict: Verdict,
    /// Largest `|∂_a X^b|` with `a` a fiber and `b` a base coordinate.
    pub max_fiber_derivative: f64,
}

impl ChartGeometry {
    fn require_bundle(&self) -> Result<&BundleSplit> {
        self.bundle()
            .ok_or_else(|| Error::Config(format!("chart `{}` is not a product chart", self.kind())))
    }

    /// Horizontal lift `(C(x) w, w)` of a base vector `w` at `x`.
    pub fn horizontal_lift(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let b = self.require_bundle()?;
        let (m, n) = (b.fiber_dim, b.base_dim);
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        let mut out = vec![0.0; m + n];
        if let Some(table) = &b.connection {
            for a in 0..m {
                out[a] = (0..n).map(|k| table[a * n + k].eval(x, 0.0) * w[k]).sum();
            }
        }
        out[m..].copy_from_slice(w);
        Ok(out)
    }

    /// `(X_V, X_H)` with `X_H` the horizontal lift of `π_* X` and
    /// `X_V = X − X_H`.
    pub fn split_projectable(&self, xf: &FieldOnChart, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.require_bundle()?.fiber_dim;
        if xf.kind() != FieldKind::Vector || xf.dim() != self.dim() {
            return Err(Error::Config("split_projectable needs a vector field on the chart".into()));
        }
        let v = xf.eval(x, 0.0)?;
        let h = self.horizontal_lift(&v[m..], x)?;
        let vert = v.iter().zip(&h).map(|(a, b)| a - b).collect();
        Ok((vert, h))
    }

    /// PASS iff the base components of `X` do not depend on fiber coordinates
    /// at any sample.
    pub fn projectability_check(
        &self,
        xf: &FieldOnChart,
        samples: &[Vec<f64>],
    ) -> Result<ProjectabilityReport> {
        let m = self.require_bundle()?.fiber_dim;
        let mut worst: f64 = 0.0;
        for p in samples {
            let jet = xf.jet(p, 0.0)?;
            for g in &jet.grad[m..] {
                for d in &g[..m] {
                    worst = worst.max(d.abs());
                }
            }
        }
        Ok(ProjectabilityReport {
            verdict: if worst <= PROJECTABILITY_TOL {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            max_fiber_derivative: worst,
        })
    }
}
