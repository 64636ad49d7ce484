//! Coordinate charts: metric fields, specification format and registry.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dual::{Dual, DUAL_WIDTH};
use super::expr::Expr;
use crate::error::{Error, Result};

/// Largest supported chart dimension (one tangent slot is kept for `t`).
pub const MAX_CHART_DIM: usize = DUAL_WIDTH - 1;

/// A metric field `x ↦ g(x)` evaluated over dual numbers.
pub trait MetricField: Debug + Send + Sync {
    fn dim(&self) -> usize;
    /// Row-major `d × d` components at `x` (`x.len() == dim`).
    fn components(&self, x: &[Dual]) -> Vec<Dual>;
}

#[derive(Debug, Clone)]
pub struct FlatMetric {
    pub dim: usize,
}

impl MetricField for FlatMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self, _x: &[Dual]) -> Vec<Dual> {
        let d = self.dim;
        (0..d * d)
            .map(|k| Dual::constant(if k / d == k % d { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// `diag(f_1(x), …, f_d(x))`.
#[derive(Debug, Clone)]
pub struct DiagonalMetric {
    pub diag: Vec<Expr>,
}

impl MetricField for DiagonalMetric {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn components(&self, x: &[Dual]) -> Vec<Dual> {
        let d = self.diag.len();
        let t = Dual::constant(0.0);
        let mut out = vec![Dual::constant(0.0); d * d];
        for (i, e) in self.diag.iter().enumerate() {
            out[i * d + i] = e.eval(x, t);
        }
        out
    }
}

/// Full table of component expressions (must be symmetric).
#[derive(Debug, Clone)]
pub struct TableMetric {
    pub dim: usize,
    pub entries: Vec<Expr>,
}

impl MetricField for TableMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self, x: &[Dual]) -> Vec<Dual> {
        let t = Dual::constant(0.0);
        self.entries.iter().map(|e| e.eval(x, t)).collect()
    }
}

/// `diag(g_F(fiber), g_B(base))` with fiber coordinates first.
#[derive(Debug, Clone)]
pub struct ProductMetric {
    pub fiber: Arc<dyn MetricField>,
    pub base: Arc<dyn MetricField>,
}

impl MetricField for ProductMetric {
    fn dim(&self) -> usize {
        self.fiber.dim() + self.base.dim()
    }

    fn components(&self, x: &[Dual]) -> Vec<Dual> {
        let (m, n) = (self.fiber.dim(), self.base.dim());
        let d = m + n;
        let gf = self.fiber.components(&x[..m]);
        let gb = self.base.components(&x[m..]);
        let mut out = vec![Dual::constant(0.0); d * d];
        for i in 0..m {
            for j in 0..m {
                out[i * d + j] = gf[i * m + j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[(m + i) * d + m + j] = gb[i * n + j];
            }
        }
        out
    }
}

/// Bundle structure of a product chart.
#[derive(Debug, Clone)]
pub struct BundleSplit {
    pub fiber_dim: usize,
    pub base_dim: usize,
    /// Horizontal-lift coefficients `C^a_b(x)`, row-major `fiber × base`;
    /// `None` is the trivial product connection.
    pub connection: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricExprs {
    /// One expression per diagonal entry.
    Diagonal(Vec<String>),
    /// Full rows.
    Table(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub fiber: Box<ChartSpec>,
    pub base: Box<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection_table: Option<Vec<Vec<String>>>,
}

/// JSON chart description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricExprs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductSpec>,
}

impl ChartSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A coordinate chart with metric, box domain and periodicity flags.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    pub(crate) kind: String,
    pub(crate) metric: Arc<dyn MetricField>,
    pub(crate) domain: Vec<[f64; 2]>,
    pub(crate) periodic: Vec<bool>,
    pub(crate) bundle: Option<BundleSplit>,
}

impl ChartGeometry {
    pub fn new(
        kind: &str,
        metric: Arc<dyn MetricField>,
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        bundle: Option<BundleSplit>,
    ) -> Result<Self> {
        let d = metric.dim();
        if d == 0 || d > MAX_CHART_DIM {
            return Err(Error::Config(format!(
                "chart dimension {d} outside 1..={MAX_CHART_DIM}"
            )));
        }
        if domain.len() != d || periodic.len() != d {
            return Err(Error::Config(format!(
                "domain and periodic flags need {d} entries"
            )));
        }
        if domain.iter().any(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Config("domain intervals must satisfy lo < hi".into()));
        }
        Ok(Self {
            kind: kind.to_ascii_lowercase(),
            metric,
            domain,
            periodic,
            bundle,
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(
            "flat",
            Arc::new(FlatMetric { dim }),
            vec![[0.0, 1.0]; dim],
            vec![true; dim],
            None,
        )
    }

    pub fn from_spec(spec: &ChartSpec) -> Result<Self> {
        ChartRegistry::with_builtins().build(spec)
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn is_flat(&self) -> bool {
        self.kind == "flat"
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn bundle(&self) -> Option<&BundleSplit> {
        self.bundle.as_ref()
    }

    pub fn metric_field(&self) -> &Arc<dyn MetricField> {
        &self.metric
    }

    pub fn with_domain(mut self, domain: Vec<[f64; 2]>, periodic: Vec<bool>) -> Result<Self> {
        let bundle = self.bundle.take();
        Self::new(&self.kind, self.metric, domain, periodic, bundle)
    }

    /// `g`, `g⁻¹` and `∂_l g` at `x`; errors if `g(x)` is not SPD.
    pub fn metric_jet(&self, x: &[f64]) -> Result<MetricJet> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let xs: Vec<Dual> = x.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect();
        let comps = self.metric.components(&xs);
        if comps.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMetric(format!("non-finite metric at {x:?}")));
        }
        let g = DMatrix::from_fn(d, d, |i, j| comps[i * d + j].re);
        let dg = (0..d)
            .map(|l| DMatrix::from_fn(d, d, |i, j| comps[i * d + j].du[l]))
            .collect();
        let scale = g.amax().max(1.0);
        if (&g - g.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidMetric(format!("asymmetric metric at {x:?}")));
        }
        let g_inv = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidMetric(format!("metric not positive definite at {x:?}")))?
            .inverse();
        Ok(MetricJet { g, g_inv, dg })
    }

    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.metric_jet(x)?.g)
    }

    /// Riemannian volume density `√det g`.
    pub fn volume_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.metric(x)?.determinant().sqrt())
    }
}

/// Metric and its first derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[l][(i, j)] = ∂_l g_ij`.
    pub dg: Vec<DMatrix<f64>>,
}

pub type ChartBuilder = fn(&ChartSpec, &ChartRegistry) -> Result<ChartGeometry>;

/// Chart constructors keyed by `kind`.
#[derive(Clone)]
pub struct ChartRegistry {
    builders: BTreeMap<String, ChartBuilder>,
}

impl ChartRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("flat", build_flat);
        r.register("diagonal", build_diagonal);
        r.register("table", build_table);
        r.register("product", build_product);
        r
    }

    pub fn register(&mut self, kind: &str, builder: ChartBuilder) {
        self.builders.insert(kind.to_ascii_lowercase(), builder);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &ChartSpec) -> Result<ChartGeometry> {
        let kind = spec.kind.to_ascii_lowercase();
        let builder = self.builders.get(&kind).ok_or_else(|| Error::Unknown {
            what: "chart kind",
            name: spec.kind.clone(),
        })?;
        builder(spec, self)
    }
}

fn parse_exprs(src: &[String], dim: usize) -> Result<Vec<Expr>> {
    src.iter()
        .map(|s| {
            let e = Expr::parse(s)?;
            if e.arity() > dim {
                return Err(Error::Config(format!(
                    "expression `{s}` uses x{} but the chart has dimension {dim}",
                    e.arity()
                )));
            }
            Ok(e)
        })
        .collect()
}

fn finish(spec: &ChartSpec, metric: Arc<dyn MetricField>, bundle: Option<BundleSplit>) -> Result<ChartGeometry> {
    let d = metric.dim();
    if let Some(dim) = spec.dim {
        if dim != d {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d,
            });
        }
    }
    let domain = spec.domain.clone().unwrap_or_else(|| vec![[0.0, 1.0]; d]);
    let periodic = spec.periodic.clone().unwrap_or_else(|| vec![true; d]);
    ChartGeometry::new(&spec.kind, metric, domain, periodic, bundle)
}

fn build_flat(spec: &ChartSpec, _: &ChartRegistry) -> Result<ChartGeometry> {
    if spec.metric.is_some() {
        return Err(Error::Config("flat charts take no metric expressions".into()));
    }
    let dim = spec
        .dim
        .or_else(|| spec.domain.as_ref().map(Vec::len))
        .ok_or_else(|| Error::Config("flat chart needs `dim`".into()))?;
    finish(spec, Arc::new(FlatMetric { dim }), None)
}

fn build_diagonal(spec: &ChartSpec, _: &ChartRegistry) -> Result<ChartGeometry> {
    let Some(MetricExprs::Diagonal(diag)) = &spec.metric else {
        return Err(Error::Config("diagonal chart needs a list of metric expressions".into()));
    };
    let diag = parse_exprs(diag, diag.len())?;
    finish(spec, Arc::new(DiagonalMetric { diag }), None)
}

fn build_table(spec: &ChartSpec, _: &ChartRegistry) -> Result<ChartGeometry> {
    let Some(MetricExprs::Table(rows)) = &spec.metric else {
        return Err(Error::Config("table chart needs metric rows".into()));
    };
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("metric table must be square".into()));
    }
    let flat: Vec<String> = rows.iter().flatten().cloned().collect();
    let entries = parse_exprs(&flat, d)?;
    finish(spec, Arc::new(TableMetric { dim: d, entries }), None)
}

fn build_product(spec: &ChartSpec, reg: &ChartRegistry) -> Result<ChartGeometry> {
    let p = spec
        .product
        .as_ref()
        .ok_or_else(|| Error::Config("product chart needs `product`".into()))?;
    let fiber = reg.build(&p.fiber)?;
    let base = reg.build(&p.base)?;
    let (m, n) = (fiber.dim(), base.dim());
    let connection = match &p.connection_table {
        None => None,
        Some(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!(
                    "connection table must be {m} x {n} (fiber x base)"
                )));
            }
            let flat: Vec<String> = rows.iter().flatten().cloned().collect();
            Some(parse_exprs(&flat, m + n)?)
        }
    };
    let metric = Arc::new(ProductMetric {
        fiber: fiber.metric.clone(),
        base: base.metric.clone(),
    });
    let mut spec = spec.clone();
    if spec.domain.is_none() {
        spec.domain = Some([fiber.domain.clone(), base.domain.clone()].concat());
    }
    if spec.periodic.is_none() {
        spec.periodic = Some([fiber.periodic.clone(), base.periodic.clone()].concat());
    }
    finish(
        &spec,
        metric,
        Some(BundleSplit {
            fiber_dim: m,
            base_dim: n,
            connection,
        }),
    )
}

/// Names accepted by [`builtin_chart`].
pub const BUILTIN_CHARTS: [&str; 4] = ["flat", "polar", "skew", "bundle"];

/// Built-in charts used by the identity suites.
///
/// * `flat`: Euclidean plane, unit periodic box;
/// * `polar`: `diag(1, x1²)` on `r ∈ [0.5, 2]`, `φ ∈ [0, 2π]`;
/// * `skew`: a non-diagonal analytic metric on the plane;
/// * `bundle`: one fiber coordinate over a curved 2D base, with a connection.
pub fn builtin_chart(name: &str) -> Result<ChartGeometry> {
    let json = match name {
        "flat" => r#"{"kind":"flat","dim":2}"#,
        "polar" => {
            r#"{"kind":"diagonal","metric":["1","x1^2"],
                "domain":[[0.5,2.0],[0.0,6.283185307179586]],"periodic":[false,true]}"#
        }
        "skew" => {
            r#"{"kind":"table",
                "metric":[["2 + sin(x1)","0.5*cos(x2)"],["0.5*cos(x2)","1.5 + 0.25*x1^2"]],
                "domain":[[-1.0,1.0],[0.0,6.283185307179586]]}"#
        }
        "bundle" => {
            r#"{"kind":"product","product":{
                "fiber":{"kind":"diagonal","metric":["1.5"],"domain":[[0.0,6.283185307179586]]},
                "base":{"kind":"diagonal","metric":["1 + 0.3*sin(x1)","1 + 0.2*cos(x1)*cos(x2)"],
                        "domain":[[0.0,6.283185307179586],[0.0,6.283185307179586]]},
                "connection_table":[["0.4*sin(x2)","0.1*cos(x3)"]]}}"#
        }
        _ => {
            return Err(Error::Unknown {
                what: "built-in chart",
                name: name.into(),
            })
        }
    };
    ChartGeometry::from_spec(&ChartSpec::from_json(json)?)
}
