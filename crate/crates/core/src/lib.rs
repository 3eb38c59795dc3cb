//! Exact-propagator evolution of three harmonically coupled particles, each
//! starting in a two-component Schrödinger-cat state, and the decoherence of
//! particle 1's reduced density.
//!
//! Pipeline: [`model::ModelConfig`] → [`normal_modes::diagonalize`] →
//! [`propagator::coefficients`] → [`cat_state::PacketSet`] →
//! [`reduced_density::marginalize`]. The [`classical`] module gives the
//! matching eight-orbit ensemble and its crossings; [`oracle`] holds the
//! brute-force cross-checks.

pub mod cat_state;
pub mod classical;
pub mod error;
pub mod model;
pub mod normal_modes;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod reduced_density;

pub use error::{Error, Result};
pub use model::ModelConfig;
