//! Discretised medium: per-node geometry, right-hand side, time stepping
//! and conservation diagnostics.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Conductivity, ForceSign, InitialFields, ScenarioConfig};
use super::grid::Grid;
use super::temperature::TemperatureBracket;
use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};
use crate::geometry::{ChartGeometry, Christoffel, Expr, MetricJet};
use crate::thermo::{FreeEnergyModel, ThermoPoint};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "INNER_MEDIA_THREADS";

/// Evolved fields. `velocity` is node-major with `d` components per node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediumState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub velocity: Vec<f64>,
    pub eps: Vec<f64>,
    /// Temperatures from an earlier evaluation, used only as starting
    /// points for recovery; may be empty.
    #[serde(skip)]
    pub theta_guess: Vec<f64>,
}

/// Time derivatives of the evolved fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub rho: Vec<f64>,
    pub velocity: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Per-node quantities reconstructed from a state.
#[derive(Debug, Clone)]
pub struct Derived {
    pub theta: Vec<f64>,
    pub delta: Vec<LinOperator>,
    pub sigma: Vec<LinOperator>,
}

#[derive(Debug, Clone)]
struct Node {
    x: Vec<f64>,
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    gamma: Christoffel,
    /// `Σ_i Γ^i_{ij}`
    gamma_tr: Vec<f64>,
    vol: f64,
    model: FreeEnergyModel,
    chi: DMatrix<f64>,
}

/// A chart, a grid on it and the constitutive data at every node.
#[derive(Debug, Clone)]
pub struct Medium {
    chart: ChartGeometry,
    grid: Grid,
    nodes: Vec<Node>,
    force_sign: ForceSign,
    bracket: TemperatureBracket,
    cfl: f64,
    pool: Option<Arc<rayon::ThreadPool>>,
}

fn at_node(node: usize, x: &[f64]) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::AtNode {
        node,
        x: x.to_vec(),
        source: Box::new(e),
    }
}

/// Split space at a node; the metric must be block diagonal in (fiber, base).
fn node_space(jet: &MetricJet, m: usize) -> Result<SplitSpace> {
    let g = &jet.g;
    let d = g.nrows();
    let scale = g.amax();
    for i in 0..m {
        for j in m..d {
            if g[(i, j)].abs() > 1e-12 * scale {
                return Err(Error::InvalidMetric(
                    "metric is not block diagonal in the model's vertical/horizontal split".into(),
                ));
            }
        }
    }
    SplitSpace::new(
        g.view((0, 0), (m, m)).into_owned(),
        g.view((m, m), (d - m, d - m)).into_owned(),
    )
}

fn conductivity_at(chi: &Conductivity, d: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    let m = match chi {
        Conductivity::Scalar(c) => DMatrix::identity(d, d) * *c,
        Conductivity::Field(src) => {
            let e = Expr::parse(src)?;
            if e.arity() > d {
                return Err(Error::Config(format!("conductivity `{src}` uses x{}", e.arity())));
            }
            DMatrix::identity(d, d) * e.eval(x, 0.0)
        }
        Conductivity::Matrix(rows) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Config(format!("conductivity must be {d}×{d}")));
            }
            DMatrix::from_fn(d, d, |i, j| rows[i][j])
        }
    };
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("conductivity"));
    }
    let sym = (&m + m.transpose()) * 0.5;
    let min_eig = sym.symmetric_eigenvalues().min();
    if min_eig < -1e-12 * m.amax() {
        return Err(Error::Config("conductivity must be positive semi-definite".into()));
    }
    Ok(m)
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First error in node order, so failures are reported deterministically.
fn first_error<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

impl Medium {
    pub fn new(
        chart: ChartGeometry,
        sizes: Vec<usize>,
        model: &FreeEnergyModel,
        chi: &Conductivity,
        force_sign: ForceSign,
        bracket: TemperatureBracket,
        cfl: f64,
    ) -> Result<Self> {
        let d = chart.dim();
        if let Some(a) = chart.periodic().iter().position(|p| !p) {
            return Err(Error::Config(format!(
                "the solver needs periodic axes; axis {} is not",
                a + 1
            )));
        }
        if model.space().dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: model.space().dim(),
            });
        }
        if let Some(b) = chart.bundle() {
            if b.fiber_dim != model.space().m() {
                return Err(Error::Config(format!(
                    "model has {} vertical dimensions, chart fiber has {}",
                    model.space().m(),
                    b.fiber_dim
                )));
            }
        }
        let grid = Grid::new(sizes, chart.domain().to_vec())?;
        let m = model.space().m();
        let nodes = (0..grid.len())
            .map(|k| {
                let x = grid.coords(k);
                let build = || -> Result<Node> {
                    let jet = chart.metric_jet(&x)?;
                    let gamma = Christoffel::from_jet(&jet);
                    let gamma_tr = gamma.contracted();
                    let model = model.with_space(node_space(&jet, m)?)?;
                    Ok(Node {
                        vol: jet.g.determinant().sqrt(),
                        chi: conductivity_at(chi, d, &x)?,
                        g: jet.g,
                        g_inv: jet.g_inv,
                        gamma,
                        gamma_tr,
                        model,
                        x: x.clone(),
                    })
                };
                build().map_err(at_node(k, &x))
            })
            .collect::<Result<Vec<_>>>()?;
        let pool = match std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()) {
            Some(n) if n >= 1 => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )),
            _ => None,
        };
        Ok(Self {
            chart,
            grid,
            nodes,
            force_sign,
            bracket,
            cfl,
            pool,
        })
    }

    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let chart = ChartGeometry::from_spec(&config.chart)?;
        let model = FreeEnergyModel::from_spec(&config.model)?;
        Self::new(
            chart,
            config.grid.clone(),
            &model,
            &config.chi,
            config.force_sign,
            config.theta_bracket,
            config.cfl,
        )
    }

    pub fn chart(&self) -> &ChartGeometry {
        &self.chart
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn force_sign(&self) -> ForceSign {
        self.force_sign
    }

    fn par_nodes<T: Send, F>(&self, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T + Sync + Send,
    {
        let run = || (0..self.grid.len()).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(p) => p.install(run),
            None => run(),
        }
    }

    /// Evaluates initial expressions at the nodes; θ input is converted to
    /// ε with the discrete rate of deformation.
    pub fn initial_state(&self, init: &InitialFields, seed: u64, noise: f64) -> Result<MediumState> {
        let d = self.dim();
        if init.velocity.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: init.velocity.len(),
            });
        }
        let parse = |s: &str| -> Result<Expr> {
            let e = Expr::parse(s)?;
            if e.arity() > d {
                return Err(Error::Config(format!("initial field `{s}` uses x{}", e.arity())));
            }
            Ok(e)
        };
        let rho_e = parse(&init.rho)?;
        let vel_e = init.velocity.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let n = self.grid.len();
        let mut state = MediumState {
            t: 0.0,
            rho: Vec::with_capacity(n),
            velocity: Vec::with_capacity(n * d),
            eps: vec![0.0; n],
            theta_guess: Vec::new(),
        };
        for node in &self.nodes {
            state.rho.push(rho_e.eval(&node.x, 0.0));
            for e in &vel_e {
                state.velocity.push(e.eval(&node.x, 0.0));
            }
        }
        if let Some(src) = &init.eps {
            let e = parse(src)?;
            for (k, node) in self.nodes.iter().enumerate() {
                state.eps[k] = e.eval(&node.x, 0.0);
            }
        } else if let Some(src) = &init.theta {
            let e = parse(src)?;
            for (k, node) in self.nodes.iter().enumerate() {
                let theta = e.eval(&node.x, 0.0);
                let delta = self.delta_at(&state.velocity, k);
                state.eps[k] = node.model.energy(theta, &delta).map_err(at_node(k, &node.x))?;
                state.theta_guess.push(theta);
            }
        }
        if noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for e in &mut state.eps {
                *e *= 1.0 + noise * rng.random_range(-1.0..1.0);
            }
        }
        self.check_state(&state)?;
        Ok(state)
    }

    fn check_state(&self, s: &MediumState) -> Result<()> {
        let d = self.dim();
        for (k, node) in self.nodes.iter().enumerate() {
            let vals = [s.rho[k], s.eps[k]];
            if vals.iter().chain(&s.velocity[k * d..(k + 1) * d]).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("state")).map_err(at_node(k, &node.x));
            }
            if !(s.rho[k] > 0.0) {
                return Err(Error::Numerical(format!("density {} is not positive", s.rho[k])))
                    .map_err(at_node(k, &node.x));
            }
        }
        Ok(())
    }

    /// `d∇X` at `node` from central differences.
    fn delta_at(&self, velocity: &[f64], node: usize) -> LinOperator {
        let d = self.dim();
        let nd = &self.nodes[node];
        let x = &velocity[node * d..(node + 1) * d];
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut v = self.grid.diff(|q| velocity[q * d + i], node, j);
                for (k, xk) in x.iter().enumerate() {
                    v += nd.gamma.get(i, k, j) * xk;
                }
                m[(i, j)] = v;
            }
        }
        LinOperator(m)
    }

    /// θ, Δ and σ at every node.
    pub fn derived(&self, s: &MediumState) -> Result<Derived> {
        let per_node = self.par_nodes(|k| -> Result<(f64, LinOperator, LinOperator)> {
            let node = &self.nodes[k];
            let delta = self.delta_at(&s.velocity, k);
            let f = || -> Result<_> {
                let guess = s.theta_guess.get(k).copied();
                let theta = node.model.recover_temperature_near(s.eps[k], &delta, self.bracket, guess)?;
                let p = ThermoPoint::new(theta, delta)?;
                let sigma = node.model.stress(&p)?;
                Ok((theta, p.delta, sigma))
            };
            f().map_err(at_node(k, &node.x))
        });
        let mut out = Derived {
            theta: Vec::with_capacity(per_node.len()),
            delta: Vec::with_capacity(per_node.len()),
            sigma: Vec::with_capacity(per_node.len()),
        };
        for (theta, delta, sigma) in first_error(per_node)? {
            out.theta.push(theta);
            out.delta.push(delta);
            out.sigma.push(sigma);
        }
        Ok(out)
    }

    /// `√g J_q` at every node, node-major.
    fn weighted_heat_flux(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let per_node = self.par_nodes(|k| {
            let node = &self.nodes[k];
            let dtheta: Vec<f64> = (0..d).map(|j| self.grid.diff(|q| theta[q], k, j)).collect();
            let grad = mat_vec(&node.g_inv, &dtheta);
            mat_vec(&node.chi, &grad)
                .into_iter()
                .map(|v| -node.vol * v)
                .collect::<Vec<f64>>()
        });
        per_node.into_iter().flatten().collect()
    }

    /// Covariant divergence of the operator field σ at a node.
    fn stress_divergence(&self, sigma: &[LinOperator], k: usize) -> Vec<f64> {
        let d = self.dim();
        let node = &self.nodes[k];
        let s = &sigma[k];
        (0..d)
            .map(|c| {
                let mut v = 0.0;
                for i in 0..d {
                    v += self.grid.diff(|q| sigma[q].get(i, c), k, i);
                    v += s.get(i, c) * node.gamma_tr[i];
                    for j in 0..d {
                        v -= s.get(i, j) * node.gamma.get(j, i, c);
                    }
                }
                v
            })
            .collect()
    }

    /// `(1/√g) Σ_i ∂_i F^i` for a weighted node-major flux `F = √g J`.
    fn weighted_divergence(&self, flux: &[f64], k: usize) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|i| self.grid.diff(|q| flux[q * d + i], k, i))
            .sum::<f64>()
            / self.nodes[k].vol
    }

    pub fn rhs(&self, s: &MediumState) -> Result<Rates> {
        let derived = self.derived(s)?;
        self.rhs_with(s, &derived)
    }

    /// Right-hand side of the mass, momentum and internal-energy equations.
    pub fn rhs_with(&self, s: &MediumState, der: &Derived) -> Result<Rates> {
        let d = self.dim();
        let sign = self.force_sign.value();
        let flux = self.weighted_heat_flux(&der.theta);
        let per_node = self.par_nodes(|k| -> Result<(f64, Vec<f64>, f64)> {
            let node = &self.nodes[k];
            let x = &s.velocity[k * d..(k + 1) * d];
            let delta = &der.delta[k];
            let div_x = delta.trace();
            let x_rho: f64 = (0..d).map(|j| x[j] * self.grid.diff(|q| s.rho[q], k, j)).sum();
            let x_eps: f64 = (0..d).map(|j| x[j] * self.grid.diff(|q| s.eps[q], k, j)).sum();
            let div_sigma = mat_vec(&node.g_inv, &self.stress_divergence(&der.sigma, k));
            let power = node
                .model
                .space()
                .pairing(&der.sigma[k], delta)
                .map_err(at_node(k, &node.x))?;

            let rho = s.rho[k];
            let d_rho = -x_rho - rho * div_x;
            let nabla_xx = mat_vec(delta.matrix(), x);
            let d_vel: Vec<f64> = (0..d)
                .map(|i| -nabla_xx[i] + sign * div_sigma[i] / rho)
                .collect();
            let d_eps = -x_eps - s.eps[k] * div_x - self.weighted_divergence(&flux, k) + sign * power;
            if !d_rho.is_finite() || !d_eps.is_finite() || d_vel.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite time derivative".into()))
                    .map_err(at_node(k, &node.x));
            }
            Ok((d_rho, d_vel, d_eps))
        });
        let mut out = Rates {
            rho: Vec::with_capacity(s.rho.len()),
            velocity: Vec::with_capacity(s.velocity.len()),
            eps: Vec::with_capacity(s.eps.len()),
        };
        for (r, v, e) in first_error(per_node)? {
            out.rho.push(r);
            out.velocity.extend(v);
            out.eps.push(e);
        }
        Ok(out)
    }

    /// Largest admissible step:
    /// `cfl · min(h/(|X| + √(|σ|/ρ)), h²ρ/(2dK), h²c/(2d|χ|))`
    /// over nodes, with `K` a bound on `|∂σ/∂Δ|` and `c = ∂ε/∂θ`.
    pub fn stable_dt(&self, s: &MediumState, der: &Derived) -> Result<f64> {
        let d = self.dim();
        let h = self.grid.min_spacing();
        let per_node = self.par_nodes(|k| -> Result<f64> {
            let node = &self.nodes[k];
            let x = &s.velocity[k * d..(k + 1) * d];
            let rho = s.rho[k];
            let speed = dot(x, &mat_vec(&node.g, x)).sqrt() + (der.sigma[k].matrix().amax() / rho).sqrt();
            let mut bound = h / speed;
            let jac = node
                .model
                .stress_jacobian(der.theta[k], &der.delta[k])
                .map_err(at_node(k, &node.x))?;
            let stiffness = (0..d * d)
                .map(|ij| jac.iter().map(|col| col.get(ij / d, ij % d).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            if stiffness > 0.0 {
                bound = bound.min(h * h * rho / (2.0 * d as f64 * stiffness));
            }
            let chi = (0..d)
                .map(|i| (0..d).map(|j| node.chi[(i, j)].abs()).sum::<f64>())
                .fold(0.0, f64::max);
            if chi > 0.0 {
                let c = node
                    .model
                    .heat_capacity(der.theta[k], &der.delta[k])
                    .map_err(at_node(k, &node.x))?;
                bound = bound.min(h * h * c.max(0.0) / (2.0 * d as f64 * chi));
            }
            Ok(bound)
        });
        let min = first_error(per_node)?.into_iter().fold(f64::INFINITY, f64::min);
        Ok(self.cfl * min)
    }

    /// One classical RK4 step; errors before stepping if `dt` exceeds
    /// [`Self::stable_dt`].
    pub fn step_rk4(&self, s: &MediumState, dt: f64) -> Result<MediumState> {
        let der = self.derived(s)?;
        let bound = self.stable_dt(s, &der)?;
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, bound });
        }
        let k1 = self.rhs_with(s, &der)?;
        let mut f = |y: &[f64], t: f64, first: bool| -> Result<Vec<f64>> {
            let rates = if first {
                k1.clone()
            } else {
                self.rhs(&self.unpack(y, t, &der.theta)?)?
            };
            Ok(pack_rates(&rates))
        };
        let y = pack_state(s);
        let next = rk4_step(&y, s.t, dt, &mut f)?;
        self.unpack(&next, s.t + dt, &der.theta)
    }

    fn unpack(&self, y: &[f64], t: f64, theta_guess: &[f64]) -> Result<MediumState> {
        let n = self.grid.len();
        let d = self.dim();
        let s = MediumState {
            t,
            rho: y[..n].to_vec(),
            velocity: y[n..n + n * d].to_vec(),
            eps: y[n + n * d..].to_vec(),
            theta_guess: theta_guess.to_vec(),
        };
        self.check_state(&s)?;
        Ok(s)
    }

    /// `∫ ρ Ω`.
    pub fn mass(&self, s: &MediumState) -> f64 {
        let cell = self.grid.cell_volume();
        self.nodes.iter().zip(&s.rho).map(|(n, r)| r * n.vol).sum::<f64>() * cell
    }

    /// `∫ ρ X^♭ Ω` on flat charts.
    pub fn momentum(&self, s: &MediumState) -> Option<Vec<f64>> {
        if !self.chart.is_flat() {
            return None;
        }
        let d = self.dim();
        let cell = self.grid.cell_volume();
        let mut total = vec![0.0; d];
        for (k, node) in self.nodes.iter().enumerate() {
            let flat = mat_vec(&node.g, &s.velocity[k * d..(k + 1) * d]);
            for c in 0..d {
                total[c] += s.rho[k] * flat[c] * node.vol;
            }
        }
        Some(total.into_iter().map(|v| v * cell).collect())
    }

    fn energy_density(&self, s: &MediumState, k: usize) -> f64 {
        let d = self.dim();
        let x = &s.velocity[k * d..(k + 1) * d];
        0.5 * s.rho[k] * dot(x, &mat_vec(&self.nodes[k].g, x)) + s.eps[k]
    }

    /// `∫ (ρ|X|²/2 + ε) Ω`.
    pub fn energy(&self, s: &MediumState) -> f64 {
        let cell = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|k| self.energy_density(s, k) * self.nodes[k].vol)
            .sum::<f64>()
            * cell
    }

    /// Pointwise residual of
    /// `ρ d/dt(|X|²/2) = s·(div(σ(X)) − ⟨σ, Δ⟩)` with `s` the force sign,
    /// using `∂X/∂t` from the right-hand side.
    pub fn kinetic_identity_residual(&self, s: &MediumState) -> Result<Vec<f64>> {
        let der = self.derived(s)?;
        let rates = self.rhs_with(s, &der)?;
        self.kinetic_identity_residual_with(s, &der, &rates)
    }

    pub fn kinetic_identity_residual_with(
        &self,
        s: &MediumState,
        der: &Derived,
        rates: &Rates,
    ) -> Result<Vec<f64>> {
        let d = self.dim();
        let sign = self.force_sign.value();
        let half_sq: Vec<f64> = (0..self.grid.len())
            .map(|k| {
                let x = &s.velocity[k * d..(k + 1) * d];
                0.5 * dot(x, &mat_vec(&self.nodes[k].g, x))
            })
            .collect();
        let sigma_x: Vec<f64> = (0..self.grid.len())
            .flat_map(|k| {
                let x = &s.velocity[k * d..(k + 1) * d];
                mat_vec(der.sigma[k].matrix(), x)
                    .into_iter()
                    .map(move |v| v * self.nodes[k].vol)
            })
            .collect();
        let per_node = self.par_nodes(|k| -> Result<f64> {
            let node = &self.nodes[k];
            let x = &s.velocity[k * d..(k + 1) * d];
            let dx = &rates.velocity[k * d..(k + 1) * d];
            let transport: f64 = (0..d).map(|j| x[j] * self.grid.diff(|q| half_sq[q], k, j)).sum();
            let lhs = s.rho[k] * (dot(x, &mat_vec(&node.g, dx)) + transport);
            let power = node.model.space().pairing(&der.sigma[k], &der.delta[k])?;
            let rhs = sign * (self.weighted_divergence(&sigma_x, k) - power);
            Ok(lhs - rhs)
        });
        first_error(per_node)
    }

    /// Residual of `∂ω/∂t + div(X⊗ω − s·σ) = 0`, `ω = ρX^♭` (flat charts).
    pub fn momentum_flux_residual(&self, s: &MediumState) -> Result<Vec<f64>> {
        if !self.chart.is_flat() {
            return Err(Error::Config("momentum flux form needs a flat chart".into()));
        }
        let d = self.dim();
        let sign = self.force_sign.value();
        let der = self.derived(s)?;
        let rates = self.rhs_with(s, &der)?;
        let omega: Vec<f64> = (0..s.velocity.len()).map(|q| s.rho[q / d] * s.velocity[q]).collect();
        let mut out = Vec::with_capacity(s.velocity.len());
        for k in 0..self.grid.len() {
            for c in 0..d {
                let q = k * d + c;
                let dt_omega = rates.rho[k] * s.velocity[q] + s.rho[k] * rates.velocity[q];
                let mut div = 0.0;
                for i in 0..d {
                    div += self.grid.diff(
                        |p| s.velocity[p * d + i] * omega[p * d + c] - sign * der.sigma[p].get(i, c),
                        k,
                        i,
                    );
                }
                out.push(dt_omega + div);
            }
        }
        Ok(out)
    }

    /// Residual of `∂e/∂t + div(eX − s·σ(X) + J_q) = 0`.
    pub fn energy_flux_residual(&self, s: &MediumState) -> Result<Vec<f64>> {
        let d = self.dim();
        let sign = self.force_sign.value();
        let der = self.derived(s)?;
        let rates = self.rhs_with(s, &der)?;
        let heat = self.weighted_heat_flux(&der.theta);
        let mut flux = vec![0.0; s.velocity.len()];
        for k in 0..self.grid.len() {
            let x = &s.velocity[k * d..(k + 1) * d];
            let e = self.energy_density(s, k);
            let sx = mat_vec(der.sigma[k].matrix(), x);
            for i in 0..d {
                flux[k * d + i] = self.nodes[k].vol * (e * x[i] - sign * sx[i]) + heat[k * d + i];
            }
        }
        Ok((0..self.grid.len())
            .map(|k| {
                let node = &self.nodes[k];
                let x = &s.velocity[k * d..(k + 1) * d];
                let dx = &rates.velocity[k * d..(k + 1) * d];
                let dt_e = 0.5 * rates.rho[k] * dot(x, &mat_vec(&node.g, x))
                    + s.rho[k] * dot(x, &mat_vec(&node.g, dx))
                    + rates.eps[k];
                dt_e + self.weighted_divergence(&flux, k)
            })
            .collect())
    }

    /// Largest fiber-direction difference of base velocity components
    /// (product charts only).
    pub fn projectability_defect(&self, s: &MediumState) -> Option<f64> {
        let m = self.chart.bundle()?.fiber_dim;
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.len() {
            for b in m..d {
                for a in 0..m {
                    worst = worst.max(self.grid.diff(|q| s.velocity[q * d + b], k, a).abs());
                }
            }
        }
        Some(worst)
    }
}

fn pack_state(s: &MediumState) -> Vec<f64> {
    [s.rho.as_slice(), &s.velocity, &s.eps].concat()
}

fn pack_rates(r: &Rates) -> Vec<f64> {
    [r.rho.as_slice(), &r.velocity, &r.eps].concat()
}

/// Classical four-stage Runge–Kutta step for `y' = f(y, t)`. The flag
/// passed to `f` is true for the first stage only.
pub fn rk4_step<F>(y: &[f64], t: f64, dt: f64, f: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64, bool) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(v, d)| v + a * d).collect() };
    let k1 = f(y, t, true)?;
    let k2 = f(&axpy(0.5 * dt, &k1), t + 0.5 * dt, false)?;
    let k3 = f(&axpy(0.5 * dt, &k2), t + 0.5 * dt, false)?;
    let k4 = f(&axpy(dt, &k3), t + dt, false)?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_exact_on_cubic_rates() {
        let mut f = |_: &[f64], t: f64, _| Ok(vec![1.0 + 2.0 * t - 3.0 * t * t + 4.0 * t * t * t]);
        let exact = |t: f64| 0.5 + t + t * t - t.powi(3) + t.powi(4);
        let y = rk4_step(&[exact(0.3)], 0.3, 0.7, &mut f).unwrap();
        assert!((y[0] - exact(1.0)).abs() < 1e-13);
        let mut zero = |y: &[f64], _, _| Ok(vec![0.0; y.len()]);
        assert_eq!(rk4_step(&[1.0, 2.0], 0.0, 0.1, &mut zero).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |steps: usize| {
            let dt = 1.0 / steps as f64;
            let mut y = vec![1.0];
            let mut f = |y: &[f64], t: f64, _| Ok(vec![y[0] * t.cos()]);
            for i in 0..steps {
                y = rk4_step(&y, i as f64 * dt, dt, &mut f).unwrap();
            }
            (y[0] - 1f64.sin().exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
