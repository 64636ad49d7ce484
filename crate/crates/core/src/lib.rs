//! Thermodynamics and conservation laws for Newtonian media with inner structure.
//!
//! The crate is organised bottom-up:
//!
//! * [`algebra`] – split Euclidean spaces, metric adjoints, the stress–rate pairing;
//! * [`invariants`] – trace-word invariants of the orthogonal group actions;
//! * [`thermo`] – free-energy models, state equations, stability and brackets;
//! * [`geometry`] – coordinate charts and covariant calculus with dual numbers;
//! * [`solver`] – explicit periodic solver for the mass/momentum/energy system.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// follow the tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod error;
pub mod geometry;
pub mod invariants;
pub mod solver;
pub mod thermo;

pub use algebra::{LinOperator, SplitSpace};
pub use error::{Error, Result};
