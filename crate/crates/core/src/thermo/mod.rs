//! Free-energy state models on the Lagrangian state manifold: stress,
//! energy and entropy, the stability form κ, phase classification and the
//! Poisson-bracket involutivity of the state equations.

mod bracket;
mod generic;
mod hookean;
mod model;
mod poly;
mod stability;

pub use bracket::{
    poisson_bracket, symplectic_matrix, BracketSolver, Coordinate, Explicit, PhaseCoords,
    PhaseFunction, INVOLUTIVITY_TOL,
};
pub use generic::{GenericLaw, InvariantTerm};
pub use hookean::{HookeanPlain, HookeanSplit, THERMAL_COEFF};
pub use model::{
    EnergyConvention, FreeEnergy, FreeEnergyModel, ModelBuilder, ModelRegistry, ModelSpec,
    ThermoPoint, ThermoResponse,
};
pub use poly::{Poly, MAX_POLY_DEGREE};
pub use stability::{
    classify_spectrum, Classification, PhasePoint, BOUNDARY_SCAN, BOUNDARY_TOL, DEGENERACY_TOL,
};
