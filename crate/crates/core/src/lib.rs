//! Scenario-based verification of uncertain parametric Markov models.

// index loops mirror the matrix and vector algebra they implement
#![allow(clippy::needless_range_loop)]

pub mod checker;
pub mod costsyn;
pub mod graph;
pub mod linsolve;
pub mod lp;
pub mod model;
pub mod modelio;
pub mod polynomial;
pub mod sampling;
pub mod scenario;
pub mod selftest;

pub use model::{ConcreteModel, Diagnostic, ModelError, ParametricModel, Specification, Valuation};
pub use polynomial::{Parameter, ParameterKind, Polynomial};
