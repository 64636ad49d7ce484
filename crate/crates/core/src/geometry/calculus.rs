//! Levi-Civita calculus on a chart: Christoffel symbols, covariant
//! differentials, divergences, index raising/lowering.
//!
//! Index conventions: vectors carry upper indices, one-forms lower ones; an
//! operator field `A` is stored row-major with `A[i][k] = a_i^k`, row `i`
//! the vector index and column `k` the form index.

use nalgebra::DMatrix;

use super::chart::{ChartGeometry, MetricJet};
use super::dual::{Dual, TIME_SLOT};
use super::expr::Expr;
use crate::error::{Error, Result};

/// `Γ^k_{ij}` at a point, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    /// Levi-Civita symbols `½ g^{kl}(∂_i g_lj + ∂_j g_li − ∂_l g_ij)`.
    pub fn from_jet(jet: &MetricJet) -> Self {
        let d = jet.g.nrows();
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in i..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += jet.g_inv[(k, l)]
                            * (jet.dg[i][(l, j)] + jet.dg[j][(l, i)] - jet.dg[l][(i, j)]);
                    }
                    out.data[(k * d + i) * d + j] = 0.5 * s;
                    out.data[(k * d + j) * d + i] = 0.5 * s;
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// `Σ_i Γ^i_{ij}`, equal to `∂_j log √det g`.
    pub fn contracted(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, i, j)).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    OneForm,
    Operator,
}

impl FieldKind {
    pub fn len(self, dim: usize) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector | FieldKind::OneForm => dim,
            FieldKind::Operator => dim * dim,
        }
    }
}

/// Value, spatial gradient and time derivative of a field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub value: Vec<f64>,
    /// `grad[c][l] = ∂_l` of component `c`.
    pub grad: Vec<Vec<f64>>,
    pub dt: Vec<f64>,
}

/// A field given by analytic expressions in `x1 … xd` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOnChart {
    kind: FieldKind,
    dim: usize,
    exprs: Vec<Expr>,
}

impl FieldOnChart {
    pub fn new(kind: FieldKind, dim: usize, exprs: Vec<Expr>) -> Result<Self> {
        if exprs.len() != kind.len(dim) {
            return Err(Error::DimensionMismatch {
                expected: kind.len(dim),
                got: exprs.len(),
            });
        }
        if let Some(e) = exprs.iter().find(|e| e.arity() > dim) {
            return Err(Error::Config(format!(
                "field component uses x{} on a {dim}-dimensional chart",
                e.arity()
            )));
        }
        Ok(Self { kind, dim, exprs })
    }

    pub fn parse<S: AsRef<str>>(kind: FieldKind, dim: usize, src: &[S]) -> Result<Self> {
        let exprs = src
            .iter()
            .map(|s| Expr::parse(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kind, dim, exprs)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The operator field `X ⊗ ω`, i.e. `a_i^k = X^i ω_k`.
    pub fn outer(x: &FieldOnChart, w: &FieldOnChart) -> Result<Self> {
        if x.kind != FieldKind::Vector || w.kind != FieldKind::OneForm || x.dim != w.dim {
            return Err(Error::Config("outer product needs a vector and a one-form".into()));
        }
        let mut exprs = Vec::with_capacity(x.dim * x.dim);
        for xi in &x.exprs {
            for wk in &w.exprs {
                exprs.push(Expr::product(xi.clone(), wk.clone()));
            }
        }
        Self::new(FieldKind::Operator, x.dim, exprs)
    }

    pub fn eval_dual(&self, x: &[f64], t: f64) -> Result<Vec<Dual>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let xs: Vec<Dual> = x.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect();
        let ts = Dual::var(t, TIME_SLOT);
        let out: Vec<Dual> = self.exprs.iter().map(|e| e.eval(&xs, ts)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field evaluation"));
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let out: Vec<f64> = self.exprs.iter().map(|e| e.eval(x, t)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field evaluation"));
        }
        Ok(out)
    }

    pub fn jet(&self, x: &[f64], t: f64) -> Result<FieldJet> {
        let d = self.dim;
        let duals = self.eval_dual(x, t)?;
        Ok(FieldJet {
            value: duals.iter().map(|v| v.re).collect(),
            grad: duals.iter().map(|v| v.du[..d].to_vec()).collect(),
            dt: duals.iter().map(|v| v.du[TIME_SLOT]).collect(),
        })
    }
}

/// `(d∇X)^i_j = ∂_j X^i + Γ^i_{kj} X^k`.
pub fn covariant_differential_of(x: &FieldJet, gam: &Christoffel) -> DMatrix<f64> {
    let d = gam.dim();
    DMatrix::from_fn(d, d, |i, j| {
        x.grad[i][j] + (0..d).map(|k| gam.get(i, k, j) * x.value[k]).sum::<f64>()
    })
}

/// Coordinate divergence of an operator field:
/// `(div A)_k = ∂_i a_i^k + a_j^k Γ^i_{ij} − a_i^j Γ^j_{ik}`.
pub fn divergence_op_of(a: &FieldJet, gam: &Christoffel) -> Vec<f64> {
    let d = gam.dim();
    let tr = gam.contracted();
    (0..d)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..d {
                s += a.grad[i * d + k][i];
                s += a.value[i * d + k] * tr[i];
                for j in 0..d {
                    s -= a.value[i * d + j] * gam.get(j, i, k);
                }
            }
            s
        })
        .collect()
}

/// `∇_Z` of a field of the given kind (scalar, vector or one-form).
pub fn covariant_derivative_of(kind: FieldKind, f: &FieldJet, z: &[f64], gam: &Christoffel) -> Vec<f64> {
    let d = gam.dim();
    let directional = |c: usize| (0..d).map(|j| z[j] * f.grad[c][j]).sum::<f64>();
    match kind {
        FieldKind::Scalar => vec![directional(0)],
        FieldKind::Vector => (0..d)
            .map(|i| {
                let mut s = directional(i);
                for j in 0..d {
                    for k in 0..d {
                        s += gam.get(i, j, k) * z[j] * f.value[k];
                    }
                }
                s
            })
            .collect(),
        FieldKind::OneForm => (0..d)
            .map(|k| {
                let mut s = directional(k);
                for j in 0..d {
                    for i in 0..d {
                        s -= gam.get(i, j, k) * z[j] * f.value[i];
                    }
                }
                s
            })
            .collect(),
        FieldKind::Operator => {
            let mut out = vec![0.0; d * d];
            for i in 0..d {
                for k in 0..d {
                    let mut s = directional(i * d + k);
                    for j in 0..d {
                        for l in 0..d {
                            s += z[j] * gam.get(i, j, l) * f.value[l * d + k];
                            s -= z[j] * gam.get(l, j, k) * f.value[i * d + l];
                        }
                    }
                    out[i * d + k] = s;
                }
            }
            out
        }
    }
}

impl ChartGeometry {
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        Ok(Christoffel::from_jet(&self.metric_jet(x)?))
    }

    fn check_field(&self, f: &FieldOnChart, kind: FieldKind) -> Result<()> {
        if f.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.dim,
            });
        }
        if f.kind != kind {
            return Err(Error::Config(format!("expected a {kind:?} field, got {:?}", f.kind)));
        }
        Ok(())
    }

    pub fn covariant_differential(&self, x_field: &FieldOnChart, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_field(x_field, FieldKind::Vector)?;
        Ok(covariant_differential_of(&x_field.jet(x, 0.0)?, &self.christoffel(x)?))
    }

    /// `Tr(d∇X)`.
    pub fn divergence_vec(&self, x_field: &FieldOnChart, x: &[f64]) -> Result<f64> {
        Ok(self.covariant_differential(x_field, x)?.trace())
    }

    /// `(1/√det g) Σ ∂_i(√det g X^i)`, expanded with `∂_i log √det g = ½ Tr(g⁻¹ ∂_i g)`.
    pub fn divergence_lie(&self, x_field: &FieldOnChart, x: &[f64]) -> Result<f64> {
        self.check_field(x_field, FieldKind::Vector)?;
        let jet = self.metric_jet(x)?;
        let f = x_field.jet(x, 0.0)?;
        let mut s = 0.0;
        for i in 0..self.dim() {
            let log_vol = 0.5 * (&jet.g_inv * &jet.dg[i]).trace();
            s += f.grad[i][i] + f.value[i] * log_vol;
        }
        Ok(s)
    }

    pub fn divergence_op(&self, a: &FieldOnChart, x: &[f64]) -> Result<Vec<f64>> {
        self.check_field(a, FieldKind::Operator)?;
        Ok(divergence_op_of(&a.jet(x, 0.0)?, &self.christoffel(x)?))
    }

    /// `α^♯ = g⁻¹ α`.
    pub fn sharp(&self, alpha: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let jet = self.metric_jet(x)?;
        Ok(mat_vec(&jet.g_inv, alpha))
    }

    /// `X^♭ = g X`.
    pub fn flat(&self, v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        Ok(mat_vec(&self.metric(x)?, v))
    }

    pub fn inner(&self, u: &[f64], v: &[f64], x: &[f64]) -> Result<f64> {
        let gv = self.flat(v, x)?;
        Ok(u.iter().zip(&gv).map(|(a, b)| a * b).sum())
    }

    /// `∇_Z F` for a direction `Z` at `x`.
    pub fn covariant_derivative(&self, f: &FieldOnChart, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.covariant_derivative_at(f, z, x, 0.0)
    }

    fn covariant_derivative_at(&self, f: &FieldOnChart, z: &[f64], x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_field(f, f.kind)?;
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(covariant_derivative_of(f.kind, &f.jet(x, t)?, z, &self.christoffel(x)?))
    }

    /// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
    pub fn lie_bracket(&self, xf: &FieldOnChart, yf: &FieldOnChart, x: &[f64]) -> Result<Vec<f64>> {
        self.check_field(xf, FieldKind::Vector)?;
        self.check_field(yf, FieldKind::Vector)?;
        let (a, b) = (xf.jet(x, 0.0)?, yf.jet(x, 0.0)?);
        let d = self.dim();
        Ok((0..d)
            .map(|i| {
                (0..d)
                    .map(|j| a.value[j] * b.grad[i][j] - b.value[j] * a.grad[i][j])
                    .sum()
            })
            .collect())
    }

    /// `∂F/∂t + ∇_X F` at `(x, t)`.
    pub fn material_derivative(
        &self,
        f: &FieldOnChart,
        velocity: &FieldOnChart,
        x: &[f64],
        t: f64,
    ) -> Result<Vec<f64>> {
        self.check_field(velocity, FieldKind::Vector)?;
        let v = velocity.eval(x, t)?;
        let jet = f.jet(x, t)?;
        let nabla = covariant_derivative_of(f.kind, &jet, &v, &self.christoffel(x)?);
        Ok(nabla.iter().zip(&jet.dt).map(|(a, b)| a + b).collect())
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}
