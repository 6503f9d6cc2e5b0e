//! Gaussian surface measures and trace calculus on sublevel domains.
//!
//! A finite-dimensional Gaussian measure `N(0, Q)` is represented in the
//! eigenbasis of `Q`. On top of it the crate builds:
//!
//! * Cameron–Martin calculus: H-gradients, Gaussian divergence, the
//!   Ornstein–Uhlenbeck generator and its Mehler semigroup, Hermite expansions
//!   ([`gauss_core`]);
//! * sublevel domains `O = {G < 0}` such as halfspaces, regions below graphs,
//!   balls and ellipsoids ([`domains`]);
//! * the Gaussian surface measure on level sets of `G`, by explicit quadrature
//!   and by kernel estimates of pushforward densities ([`surface_measure`]);
//! * a Monte Carlo harness for integration-by-parts and trace identities
//!   ([`trace_identities`]);
//! * trace-space norms, the extension operator and the boundary projection on
//!   halfspaces ([`halfspace_spectral`]);
//! * an experiment runner with reproducible CSV output ([`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod domains;
pub mod error;
pub mod gauss_core;
pub mod halfspace_spectral;
pub mod surface_measure;
pub mod trace_identities;

pub use domains::{DomainKind, EllipsoidSpec, LevelSetDomain};
pub use error::{Error, Result};
pub use gauss_core::{Estimate, GaussianSpace, HermiteExpansion, SamplerState, ScalarField, VectorFieldH};
