//! Parameter space of the exponential family `E_k(z) = e^z + k`.
//!
//! - [`dynamics`]: forward orbits, escape classification and periodic orbits.
//! - [`symbolic`]: external addresses, lexicographic order and kneading sequences.
//! - [`rays`]: parameter rays by pullback and continuation, with landing estimates.
//! - [`components`]: hyperbolic components, internal rays, boundaries and bifurcations.
//! - [`render`]: period-coloured images of parameter space.
//! - [`verify`]: the end-to-end checks run by `expmap verify` and the acceptance tests.

pub mod components;
pub mod config;
pub mod dynamics;
pub mod numerics;
pub mod rays;
pub mod render;
pub mod symbolic;
pub mod verify;

pub use config::Config;
pub use dynamics::Complex;
