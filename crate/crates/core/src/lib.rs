//! Symbolic constrained-dynamics engine for 1+1 dimensional field theories
//! whose Lagrangians are first order (linear) in time derivatives.
//!
//! The crate is layered:
//!
//! * [`expr`] - exact symbolic expressions over jet atoms with a canonical
//!   normal form, the foundation everything else sits on.
//! * [`parser`] - the `.lag` input grammar (field declarations plus one
//!   Lagrangian density).
//! * [`varcalc`] - variational calculus on densities: total derivatives,
//!   Euler operators, equivalence modulo total spatial derivatives, exact
//!   spatial antiderivatives, and Poisson brackets with Hamiltonian
//!   functionals.
//! * [`dba`] - the constraint analysis itself: momenta, primary constraints,
//!   the consistency sweep that determines multipliers and higher-generation
//!   constraints, Hamilton equations, and the report structure.
//! * [`numerics`] - a periodic pseudospectral backend used to validate the
//!   symbolic results numerically and to time-step the resulting equations.
//! * [`corpus`] - the built-in example systems shipped with the engine.

pub mod corpus;
pub mod dba;
pub mod expr;
pub mod numerics;
pub mod parser;
pub mod varcalc;
