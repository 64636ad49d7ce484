//! Riemannian calculus on coordinate charts.
//!
//! Metrics and fields are analytic expressions (see [`expr`] for the
//! grammar) differentiated exactly with forward-mode dual numbers.

pub mod bundle;
pub mod calculus;
pub mod chart;
pub mod dual;
pub mod expr;
pub mod identities;

pub use bundle::{ProjectabilityReport, Verdict, PROJECTABILITY_TOL};
pub use calculus::{
    covariant_derivative_of, covariant_differential_of, divergence_op_of, Christoffel, FieldJet,
    FieldKind, FieldOnChart,
};
pub use chart::{
    builtin_chart, BundleSplit, ChartBuilder, ChartGeometry, ChartRegistry, ChartSpec,
    MetricExprs, MetricField, MetricJet, ProductSpec, BUILTIN_CHARTS, MAX_CHART_DIM,
};
pub use dual::{Dual, Scalar};
pub use expr::Expr;
pub use identities::{identity_suite, random_field, random_field_source, IdentityReport};
