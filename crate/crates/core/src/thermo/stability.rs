//! The quadratic form κ on the state manifold and phase classification.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::model::{FreeEnergyModel, ThermoPoint};
use crate::error::Result;

/// Relative eigenvalue tolerance for degeneracy of κ.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Width below which a bracketed boundary is considered located.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Uniform samples used to bracket boundaries along a path.
pub const BOUNDARY_SCAN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    StablePhase,
    Unstable,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub point: ThermoPoint,
    /// Ascending.
    pub kappa_eigenvalues: Vec<f64>,
    pub classification: Classification,
}

impl FreeEnergyModel {
    /// Coefficient matrix of κ in the coordinates `(θ, Δ_11, Δ_12, …, Δ_NN)`:
    ///
    /// `κ = θ⁻²((2h_θ + θh_θθ)dθ² + 2(h_Δ + θh_Δθ)dθ dΔ + θ Σ h_{Δ_ij Δ_kl} dΔ_ij dΔ_kl)`.
    pub fn kappa_matrix(&self, p: &ThermoPoint) -> Result<DMatrix<f64>> {
        let space = self.space();
        space.check(&p.delta)?;
        let law = self.law();
        let n = space.dim();
        let theta = p.theta;
        let inv2 = 1.0 / (theta * theta);
        let [_, h_t, h_tt] = law.helmholtz(theta, &p.delta, space)?;
        let sigma = law.stress(theta, &p.delta, space)?;
        let sigma_t = law.stress_theta(theta, &p.delta, space)?;
        let cross = space.raw_gradient(&(&sigma + &sigma_t.scale(theta)));
        let hess = self.delta_hessian(theta, &p.delta)?;

        let dim = 1 + n * n;
        let mut k = DMatrix::zeros(dim, dim);
        k[(0, 0)] = inv2 * (2.0 * h_t + theta * h_tt);
        for ij in 0..n * n {
            let v = inv2 * cross[(ij / n, ij % n)];
            k[(0, 1 + ij)] = v;
            k[(1 + ij, 0)] = v;
        }
        k.view_mut((1, 1), (n * n, n * n))
            .copy_from(&(hess * (1.0 / theta)));
        Ok(k)
    }

    /// Eigenvalues of κ and the resulting phase label.
    pub fn classify(&self, p: &ThermoPoint) -> Result<PhasePoint> {
        let eig = sorted_eigenvalues(self.kappa_matrix(p)?);
        let classification = classify_spectrum(&eig);
        Ok(PhasePoint {
            point: p.clone(),
            kappa_eigenvalues: eig,
            classification,
        })
    }

    /// Parameters in `[t0, t1]` where κ degenerates along `path`.
    ///
    /// The path is scanned at [`BOUNDARY_SCAN`] points; every change in the
    /// number of negative eigenvalues is bisected to [`BOUNDARY_TOL`].
    /// Degenerate endpoints are reported as boundaries themselves.
    pub fn phase_boundary_locate<F>(&self, path: F, t0: f64, t1: f64) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> ThermoPoint,
    {
        let mut out = Vec::new();
        if !(t0 < t1) {
            return Ok(out);
        }
        let probe = |t: f64| -> Result<(usize, bool)> {
            let eig = sorted_eigenvalues(self.kappa_matrix(&path(t))?);
            Ok((
                eig.iter().filter(|&&l| l < 0.0).count(),
                classify_spectrum(&eig) == Classification::Degenerate,
            ))
        };

        let (_, start_degenerate) = probe(t0)?;
        if start_degenerate {
            out.push(t0);
        }
        let h = (t1 - t0) / BOUNDARY_SCAN as f64;
        let mut prev_t = t0;
        let mut prev = probe(t0)?.0;
        for i in 1..=BOUNDARY_SCAN {
            let t = if i == BOUNDARY_SCAN { t1 } else { t0 + i as f64 * h };
            let (count, _) = probe(t)?;
            if count != prev {
                let (mut lo, mut hi) = (prev_t, t);
                while hi - lo > BOUNDARY_TOL {
                    let mid = 0.5 * (lo + hi);
                    if probe(mid)?.0 == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                let near_start = out.last().is_some_and(|&r: &f64| (r - root).abs() <= h);
                if !near_start {
                    out.push(root);
                }
            }
            prev = count;
            prev_t = t;
        }
        let (_, end_degenerate) = probe(t1)?;
        if end_degenerate && out.last().is_none_or(|&r| (r - t1).abs() > h) {
            out.push(t1);
        }
        Ok(out)
    }
}

fn sorted_eigenvalues(k: DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Label for an ascending spectrum.
pub fn classify_spectrum(eig: &[f64]) -> Classification {
    let radius = eig.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let tol = DEGENERACY_TOL * radius;
    if eig.iter().any(|l| l.abs() <= tol) {
        Classification::Degenerate
    } else if eig.iter().all(|&l| l < -tol) {
        Classification::StablePhase
    } else {
        Classification::Unstable
    }
}
