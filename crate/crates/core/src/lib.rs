//! Stochastic and mean-field chemical kinetics.
//!
//! The crate is organised around [`model::ReactionNetwork`]:
//!
//! - [`dsl`] reads and writes the line-oriented network text format;
//! - [`reversibility`] checks Poisson invariance, unitarity, detailed
//!   balance and the Kolmogorov cycle criterion;
//! - [`kinetics`] integrates the mean-field equations and studies their
//!   fixed points and entropy;
//! - [`fluctuations`] linearises around fixed points (Onsager relations,
//!   Ornstein-Uhlenbeck covariance, Kubo formula);
//! - [`ssa`] simulates the Markov jump process exactly;
//! - [`lattice`] couples per-site reactions with random walks and compares
//!   against limiting transport PDEs.

pub mod dsl;
pub mod exact;
pub mod fluctuations;
pub mod io;
pub mod kinetics;
pub mod lattice;
pub mod model;
pub mod quadrature;
pub mod reversibility;
pub mod ssa;

pub use dsl::{parse_network, serialize_network, ParseError};
pub use model::{Concentrations, ModelError, Reaction, ReactionKind, ReactionNetwork, State};
