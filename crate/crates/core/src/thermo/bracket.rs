//! Poisson bracket of the symplectic form `dα` on `(θ, ε, σ, Δ)` and the
//! involutivity test for the state equations.
//!
//! Coordinates are laid out as `[θ, ε, σ_11 … σ_NN, Δ_11 … Δ_NN]` (row-major
//! blocks). The bracket convention is `i_{X_F} dα = dF`, `[F, G] = dG(X_F)`.

use nalgebra::{DMatrix, DVector};

use super::model::{FreeEnergyModel, ThermoPoint};
use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};

/// Involutivity residuals above this are reported as failures by the CLI.
pub const INVOLUTIVITY_TOL: f64 = 1e-8;

/// A point of the symplectic phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCoords {
    pub theta: f64,
    pub epsilon: f64,
    pub sigma: LinOperator,
    pub delta: LinOperator,
}

impl PhaseCoords {
    pub fn dim(&self) -> usize {
        self.delta.dim()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.theta, self.epsilon];
        v.extend(self.sigma.to_row_vec());
        v.extend(self.delta.to_row_vec());
        v
    }

    pub fn from_slice(n: usize, x: &[f64]) -> Result<Self> {
        if x.len() != 2 + 2 * n * n {
            return Err(Error::DimensionMismatch {
                expected: 2 + 2 * n * n,
                got: x.len(),
            });
        }
        Ok(Self {
            theta: x[0],
            epsilon: x[1],
            sigma: LinOperator::from_row_slice(n, &x[2..2 + n * n])?,
            delta: LinOperator::from_row_slice(n, &x[2 + n * n..])?,
        })
    }
}

/// A differentiable function on phase space.
pub trait PhaseFunction {
    fn value(&self, x: &PhaseCoords) -> f64;
    fn gradient(&self, x: &PhaseCoords) -> DVector<f64>;
}

/// The coordinate function `x ↦ x[index]`.
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl Coordinate {
    pub const THETA: Coordinate = Coordinate(0);
    pub const EPSILON: Coordinate = Coordinate(1);

    pub fn sigma(n: usize, i: usize, j: usize) -> Self {
        Coordinate(2 + i * n + j)
    }

    pub fn delta(n: usize, i: usize, j: usize) -> Self {
        Coordinate(2 + n * n + i * n + j)
    }
}

impl PhaseFunction for Coordinate {
    fn value(&self, x: &PhaseCoords) -> f64 {
        x.to_vec()[self.0]
    }

    fn gradient(&self, x: &PhaseCoords) -> DVector<f64> {
        let n = x.dim();
        let mut g = DVector::zeros(2 + 2 * n * n);
        g[self.0] = 1.0;
        g
    }
}

/// A function with a user-supplied gradient.
pub struct Explicit<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> PhaseFunction for Explicit<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &PhaseCoords) -> f64 {
        (self.value)(&x.to_vec())
    }

    fn gradient(&self, x: &PhaseCoords) -> DVector<f64> {
        DVector::from_vec((self.gradient)(&x.to_vec()))
    }
}

/// Matrix `W_ab = dα(e_a, e_b)` at `x`.
pub fn symplectic_matrix(x: &PhaseCoords, space: &SplitSpace) -> Result<DMatrix<f64>> {
    let n = x.dim();
    space.check(&x.sigma)?;
    space.check(&x.delta)?;
    if !(x.theta > 0.0) || !x.theta.is_finite() {
        return Err(Error::SingularForm);
    }
    let theta = x.theta;
    let inv2 = 1.0 / (theta * theta);
    let nn = n * n;
    let dim = 2 + 2 * nn;
    let (s0, d0) = (2, 2 + nn);
    let g = space.metric();
    let g_inv = space.metric_inverse();
    // α's σ·dΔ term reads Σ P_ij dΔ_ij with P = g σ g⁻¹.
    let p = space.raw_gradient(&x.sigma);

    let mut w = DMatrix::zeros(dim, dim);
    w[(0, 1)] = inv2;
    w[(1, 0)] = -inv2;
    for ij in 0..nn {
        let v = -inv2 * p[(ij / n, ij % n)];
        w[(0, d0 + ij)] = v;
        w[(d0 + ij, 0)] = -v;
    }
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = g[(i, k)] * g_inv[(l, j)] / theta;
                    if v != 0.0 {
                        w[(s0 + k * n + l, d0 + i * n + j)] = v;
                        w[(d0 + i * n + j, s0 + k * n + l)] = -v;
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Hamiltonian vector fields of a batch of gradients at one point.
pub struct BracketSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BracketSolver {
    pub fn new(x: &PhaseCoords, space: &SplitSpace) -> Result<Self> {
        let w = symplectic_matrix(x, space)?;
        // i_X ω = dF  ⇔  Wᵀ X = dF
        let lu = w.transpose().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularForm);
        }
        Ok(Self { lu })
    }

    pub fn hamiltonian_field(&self, df: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lu.solve(df).ok_or(Error::SingularForm)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularForm);
        }
        Ok(x)
    }

    /// `[F, G] = dG(X_F)` from the two gradients.
    pub fn bracket(&self, df: &DVector<f64>, dg: &DVector<f64>) -> Result<f64> {
        Ok(dg.dot(&self.hamiltonian_field(df)?))
    }
}

pub fn poisson_bracket(
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    x: &PhaseCoords,
    space: &SplitSpace,
) -> Result<f64> {
    BracketSolver::new(x, space)?.bracket(&f.gradient(x), &g.gradient(x))
}

impl FreeEnergyModel {
    /// Phase coordinates of the state-manifold point over `(θ, Δ)`.
    pub fn lift(&self, p: &ThermoPoint) -> Result<PhaseCoords> {
        let r = self.energy_entropy(p)?;
        Ok(PhaseCoords {
            theta: p.theta,
            epsilon: r.epsilon,
            sigma: r.sigma,
            delta: p.delta.clone(),
        })
    }

    /// Gradients of the defining functions `F_ε = ε − ε(θ,Δ)` and
    /// `F_ij = σ_ij − σ_ij(θ,Δ)`. They depend on `(θ, Δ)` only.
    pub fn defining_gradients(&self, p: &ThermoPoint) -> Result<Vec<DVector<f64>>> {
        let n = self.space().dim();
        let nn = n * n;
        let dim = 2 + 2 * nn;
        let (s0, d0) = (2, 2 + nn);
        let law = self.law();
        let space = self.space();
        let mut out = Vec::with_capacity(nn + 1);

        let mut f_eps = DVector::zeros(dim);
        f_eps[0] = -self.heat_capacity(p.theta, &p.delta)?;
        f_eps[1] = 1.0;
        let e_d = self.energy_delta_gradient(p.theta, &p.delta)?;
        for kl in 0..nn {
            f_eps[d0 + kl] = -e_d[(kl / n, kl % n)];
        }
        out.push(f_eps);

        let s_t = law.stress_theta(p.theta, &p.delta, space)?;
        let jac = self.stress_jacobian(p.theta, &p.delta)?;
        for ij in 0..nn {
            let (i, j) = (ij / n, ij % n);
            let mut f = DVector::zeros(dim);
            f[0] = -s_t.get(i, j);
            f[s0 + ij] = 1.0;
            for (kl, col) in jac.iter().enumerate() {
                f[d0 + kl] = -col.get(i, j);
            }
            out.push(f);
        }
        Ok(out)
    }

    /// Largest `|[F_k, F_l]|` over all pairs at the given state points.
    pub fn involutivity_check(&self, samples: &[ThermoPoint]) -> Result<f64> {
        self.involutivity_residual(samples, 0.0)
    }

    /// As [`Self::involutivity_check`] but evaluated with every stress entry
    /// shifted by `sigma_shift`, i.e. off the state manifold.
    pub fn involutivity_residual(&self, samples: &[ThermoPoint], sigma_shift: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in samples {
            let mut x = self.lift(p)?;
            if sigma_shift != 0.0 {
                let n = x.dim();
                x.sigma = &x.sigma + &LinOperator::from_row_slice(n, &vec![sigma_shift; n * n])?;
            }
            let solver = BracketSolver::new(&x, self.space())?;
            let grads = self.defining_gradients(p)?;
            let fields = grads
                .iter()
                .map(|g| solver.hamiltonian_field(g))
                .collect::<Result<Vec<_>>>()?;
            for (k, xf) in fields.iter().enumerate() {
                for g in &grads[k + 1..] {
                    worst = worst.max(g.dot(xf).abs());
                }
            }
        }
        Ok(worst)
    }

}
