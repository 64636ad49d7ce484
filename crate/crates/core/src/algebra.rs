//! Euclidean linear algebra on a split tangent model `T = V ⊕ H`.
//!
//! Coordinates are adapted: the `m` vertical directions come first, the `n`
//! horizontal ones after, so the metric is `diag(g_F, g_B)` and the vertical
//! projector is the 0/1 diagonal `diag(I_m, 0_n)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Euclidean space with a vertical/horizontal orthogonal splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpace {
    n: usize,
    m: usize,
    g_b: DMatrix<f64>,
    g_f: DMatrix<f64>,
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    diagonal: bool,
}

impl SplitSpace {
    /// Builds the space from the fiber metric `g_f` (m×m) and base metric `g_b` (n×n).
    pub fn new(g_f: DMatrix<f64>, g_b: DMatrix<f64>) -> Result<Self> {
        check_spd(&g_f, "fiber metric")?;
        check_spd(&g_b, "base metric")?;
        let m = g_f.nrows();
        let n = g_b.nrows();
        if n + m == 0 {
            return Err(Error::InvalidMetric("total dimension is zero".into()));
        }
        let mut g = DMatrix::zeros(n + m, n + m);
        g.view_mut((0, 0), (m, m)).copy_from(&g_f);
        g.view_mut((m, m), (n, n)).copy_from(&g_b);
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidMetric("metric is not invertible".into()))?;
        let diagonal = (0..n + m).all(|i| (0..n + m).all(|j| i == j || g[(i, j)] == 0.0));
        Ok(Self {
            n,
            m,
            g_b,
            g_f,
            g,
            g_inv,
            diagonal,
        })
    }

    /// Orthonormal coordinates: `g_F = I_m`, `g_B = I_n`.
    pub fn euclidean(n: usize, m: usize) -> Result<Self> {
        Self::new(DMatrix::identity(m, m), DMatrix::identity(n, n))
    }

    /// Plain Newtonian case without inner structure (`m = 0`) and a general metric.
    pub fn plain(g: DMatrix<f64>) -> Result<Self> {
        Self::new(DMatrix::zeros(0, 0), g)
    }

    /// Horizontal dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Vertical dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total dimension `N = n + m`.
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn metric_inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    pub fn base_metric(&self) -> &DMatrix<f64> {
        &self.g_b
    }

    pub fn fiber_metric(&self) -> &DMatrix<f64> {
        &self.g_f
    }

    pub(crate) fn check(&self, a: &LinOperator) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        Ok(())
    }

    /// Metric adjoint `A* = g⁻¹ Aᵀ g`, so that `g(Ax, y) = g(x, A*y)`.
    pub fn adjoint(&self, a: &LinOperator) -> Result<LinOperator> {
        self.check(a)?;
        if self.diagonal {
            let (gi, g) = (&self.g_inv, &self.g);
            return Ok(LinOperator(DMatrix::from_fn(a.dim(), a.dim(), |i, j| {
                gi[(i, i)] * a.0[(j, i)] * g[(j, j)]
            })));
        }
        Ok(LinOperator(&self.g_inv * a.0.transpose() * &self.g))
    }

    /// The stress–rate pairing `⟨σ, Δ⟩ = Tr(σ Δ*)`.
    pub fn pairing(&self, sigma: &LinOperator, delta: &LinOperator) -> Result<f64> {
        self.check(sigma)?;
        let adj = self.adjoint(delta)?;
        Ok(trace_of_product(&sigma.0, &adj.0))
    }

    /// Orthogonal projector onto the vertical subspace.
    pub fn projector_v(&self) -> LinOperator {
        let mut p = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.m {
            p[(i, i)] = 1.0;
        }
        LinOperator(p)
    }

    /// Coordinate gradient of the linear functional `H ↦ ⟨σ, H⟩`, i.e. `g σ g⁻¹`.
    pub(crate) fn raw_gradient(&self, sigma: &LinOperator) -> DMatrix<f64> {
        &self.g * &sigma.0 * &self.g_inv
    }

    /// Deterministic sample from `O(g_F) × O(g_B)`.
    ///
    /// Each block is `L⁻ᵀ O Lᵀ` where `g = L Lᵀ` and `O` is Haar-orthogonal
    /// (QR of a Gaussian matrix with sign-corrected diagonal).
    pub fn random_group_element(&self, seed: u64) -> LinOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_group_element_with(&mut rng)
    }

    pub fn random_group_element_with<R: Rng>(&self, rng: &mut R) -> LinOperator {
        let mut q = DMatrix::zeros(self.dim(), self.dim());
        let qf = metric_orthogonal(&self.g_f, rng);
        let qb = metric_orthogonal(&self.g_b, rng);
        q.view_mut((0, 0), (self.m, self.m)).copy_from(&qf);
        q.view_mut((self.m, self.m), (self.n, self.n)).copy_from(&qb);
        LinOperator(q)
    }

    /// Random operator with i.i.d. uniform entries in `[-1, 1]`.
    pub fn random_operator<R: Rng>(&self, rng: &mut R) -> LinOperator {
        let n = self.dim();
        LinOperator(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)))
    }

    /// `Q A Q*` for a group element `Q` (where `Q* = Q⁻¹`).
    pub fn conjugate(&self, q: &LinOperator, a: &LinOperator) -> Result<LinOperator> {
        let qs = self.adjoint(q)?;
        Ok(LinOperator(&q.0 * &a.0 * qs.0))
    }
}

fn check_spd(g: &DMatrix<f64>, what: &str) -> Result<()> {
    if !g.is_square() {
        return Err(Error::InvalidMetric(format!("{what} is not square")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMetric(format!("{what} has non-finite entries")));
    }
    if g.nrows() == 0 {
        return Ok(());
    }
    let scale = g.amax().max(1.0);
    for i in 0..g.nrows() {
        for j in i + 1..g.ncols() {
            if (g[(i, j)] - g[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidMetric(format!("{what} is not symmetric")));
            }
        }
    }
    let eig = SymmetricEigen::new(g.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidMetric(format!(
            "{what} is not positive definite"
        )));
    }
    Ok(())
}

fn metric_orthogonal<R: Rng>(g: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let k = g.nrows();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let z = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = z.qr();
    let mut o = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            o.column_mut(j).neg_mut();
        }
    }
    // g is SPD (checked at construction) so Cholesky succeeds.
    let l = g.clone().cholesky().expect("metric is SPD").unpack();
    let l_inv_t = l
        .transpose()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    l_inv_t * o * l.transpose()
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut t = 0.0;
    for i in 0..n {
        for k in 0..n {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

/// An element of `End T` in adapted coordinates.
///
/// Stress lives in `End T*`; it is stored here through the metric
/// identification, so one type carries both roles.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOperator(pub(crate) DMatrix<f64>);

impl LinOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        Ok(Self(matrix))
    }

    /// Row-major entries of an `n×n` operator.
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// Matrix unit `E_ij`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Row-major entries.
    pub fn to_row_vec(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n * n).map(|k| self.0[(k / n, k % n)]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for &LinOperator {
    type Output = LinOperator;
    fn add(self, rhs: &LinOperator) -> LinOperator {
        LinOperator(&self.0 + &rhs.0)
    }
}

impl Add for LinOperator {
    type Output = LinOperator;
    fn add(self, rhs: LinOperator) -> LinOperator {
        LinOperator(self.0 + rhs.0)
    }
}

impl AddAssign<&LinOperator> for LinOperator {
    fn add_assign(&mut self, rhs: &LinOperator) {
        self.0 += &rhs.0;
    }
}

impl Sub for &LinOperator {
    type Output = LinOperator;
    fn sub(self, rhs: &LinOperator) -> LinOperator {
        LinOperator(&self.0 - &rhs.0)
    }
}

impl Sub for LinOperator {
    type Output = LinOperator;
    fn sub(self, rhs: LinOperator) -> LinOperator {
        LinOperator(self.0 - rhs.0)
    }
}

impl Mul for &LinOperator {
    type Output = LinOperator;
    fn mul(self, rhs: &LinOperator) -> LinOperator {
        LinOperator(&self.0 * &rhs.0)
    }
}

impl Mul for LinOperator {
    type Output = LinOperator;
    fn mul(self, rhs: LinOperator) -> LinOperator {
        LinOperator(self.0 * rhs.0)
    }
}

impl Mul<&LinOperator> for f64 {
    type Output = LinOperator;
    fn mul(self, rhs: &LinOperator) -> LinOperator {
        LinOperator(&rhs.0 * self)
    }
}

impl Neg for LinOperator {
    type Output = LinOperator;
    fn neg(self) -> LinOperator {
        LinOperator(-self.0)
    }
}
