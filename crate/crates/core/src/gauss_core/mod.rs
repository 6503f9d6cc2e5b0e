//! Gaussian measure, Cameron–Martin calculus, Ornstein–Uhlenbeck operators
//! and Hermite expansions.

pub mod field;
pub mod hermite;
pub mod mc;
pub mod ou;
pub mod quadrature;
pub mod rng;
pub mod space;

pub use field::{DerivativeSource, ScalarField, Smoothness, VectorFieldH};
pub use hermite::{hermite_basis_field, hermite_transform, HermiteExpansion, MultiIndex};
pub use mc::{Estimate, Proposal};
pub use ou::{gaussian_divergence, mehler_apply, mehler_apply_auto, mehler_apply_mc, ou_apply};
pub use rng::SamplerState;
pub use space::{h_coords, h_gradient, h_hessian_coords, sample_gaussian, vhat_eval, GaussianSpace};
