//! Randomised checks of the Levi-Civita identities on a chart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::calculus::{covariant_derivative_of, FieldKind, FieldOnChart};
use super::chart::ChartGeometry;
use super::dual::Dual;
use crate::error::Result;

pub const DIV_TOL: f64 = 1e-10;
pub const PRODUCT_RULE_TOL: f64 = 1e-9;
pub const TORSION_TOL: f64 = 1e-9;
pub const COMPATIBILITY_TOL: f64 = 1e-9;

fn num(c: f64) -> String {
    format!("({c:.6})")
}

/// A random analytic field written as expression strings.
pub fn random_field_source<R: Rng>(kind: FieldKind, dim: usize, rng: &mut R) -> Vec<String> {
    (0..kind.len(dim))
        .map(|_| {
            let mut terms = vec![num(rng.random_range(-1.0..1.0))];
            for _ in 0..3 {
                let mut coeff = || num(rng.random_range(-1.0..1.0));
                let c = coeff();
                let k = coeff();
                let p = coeff();
                let a = rng.random_range(1..=dim);
                let b = rng.random_range(1..=dim);
                terms.push(match rng.random_range(0..4) {
                    0 => format!("{c}*x{a}*x{b}"),
                    1 => format!("{c}*sin({k}*x{a} + {p})"),
                    2 => format!("{c}*cos({k}*x{a})*x{b}"),
                    _ => format!("{c}*exp({k}*sin(x{a}))"),
                });
            }
            terms.join(" + ")
        })
        .collect()
}

pub fn random_field<R: Rng>(kind: FieldKind, dim: usize, rng: &mut R) -> Result<FieldOnChart> {
    FieldOnChart::parse(kind, dim, &random_field_source(kind, dim, rng))
}

/// Largest residual of each identity over the trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub chart: String,
    pub trials: usize,
    /// `|Tr(d∇X) − (1/√g) ∂_i(√g X^i)|`
    pub divergence: f64,
    /// `|div(X⊗ω) − (div X) ω − ∇_X ω|`
    pub product_rule: f64,
    /// `|∇_X Y − ∇_Y X − [X, Y]|`
    pub torsion: f64,
    /// `|Z g(X,Y) − g(∇_Z X, Y) − g(X, ∇_Z Y)|`
    pub metric_compatibility: f64,
}

impl IdentityReport {
    /// `(name, residual, tolerance)` rows.
    pub fn rows(&self) -> [(&'static str, f64, f64); 4] {
        [
            ("divergence", self.divergence, DIV_TOL),
            ("product_rule", self.product_rule, PRODUCT_RULE_TOL),
            ("torsion", self.torsion, TORSION_TOL),
            ("metric_compatibility", self.metric_compatibility, COMPATIBILITY_TOL),
        ]
    }

    pub fn passes(&self, tolerance_scale: f64) -> bool {
        self.rows().iter().all(|(_, r, tol)| *r <= tol * tolerance_scale)
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Runs the four identities on `trials` random fields and points.
pub fn identity_suite(chart: &ChartGeometry, trials: usize, seed: u64) -> Result<IdentityReport> {
    let d = chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = IdentityReport {
        chart: chart.kind().to_string(),
        trials,
        divergence: 0.0,
        product_rule: 0.0,
        torsion: 0.0,
        metric_compatibility: 0.0,
    };
    for _ in 0..trials {
        let p: Vec<f64> = chart
            .domain()
            .iter()
            .map(|&[lo, hi]| rng.random_range(lo..hi))
            .collect();
        let xf = random_field(FieldKind::Vector, d, &mut rng)?;
        let yf = random_field(FieldKind::Vector, d, &mut rng)?;
        let w = random_field(FieldKind::OneForm, d, &mut rng)?;
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();

        let gam = chart.christoffel(&p)?;
        let xv = xf.eval(&p, 0.0)?;
        let yv = yf.eval(&p, 0.0)?;

        let div = chart.divergence_vec(&xf, &p)?;
        report.divergence = report
            .divergence
            .max((div - chart.divergence_lie(&xf, &p)?).abs());

        let a = FieldOnChart::outer(&xf, &w)?;
        let div_a = chart.divergence_op(&a, &p)?;
        let wv = w.eval(&p, 0.0)?;
        let nabla_w = covariant_derivative_of(FieldKind::OneForm, &w.jet(&p, 0.0)?, &xv, &gam);
        report.product_rule = report
            .product_rule
            .max(max_abs((0..d).map(|k| div_a[k] - div * wv[k] - nabla_w[k])));

        let nxy = chart.covariant_derivative(&yf, &xv, &p)?;
        let nyx = chart.covariant_derivative(&xf, &yv, &p)?;
        let br = chart.lie_bracket(&xf, &yf, &p)?;
        report.torsion = report
            .torsion
            .max(max_abs((0..d).map(|i| nxy[i] - nyx[i] - br[i])));

        // Z(g(X,Y)) from a single dual-number evaluation of the contraction
        let xs: Vec<Dual> = p.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect();
        let g = chart.metric_field().components(&xs);
        let (xd, yd) = (xf.eval_dual(&p, 0.0)?, yf.eval_dual(&p, 0.0)?);
        let mut gxy = Dual::constant(0.0);
        for i in 0..d {
            for j in 0..d {
                gxy = gxy + g[i * d + j] * xd[i] * yd[j];
            }
        }
        let lhs: f64 = (0..d).map(|l| z[l] * gxy.du[l]).sum();
        let nzx = chart.covariant_derivative(&xf, &z, &p)?;
        let nzy = chart.covariant_derivative(&yf, &z, &p)?;
        let rhs = chart.inner(&nzx, &yv, &p)? + chart.inner(&xv, &nzy, &p)?;
        report.metric_compatibility = report.metric_compatibility.max((lhs - rhs).abs());
    }
    Ok(report)
}
