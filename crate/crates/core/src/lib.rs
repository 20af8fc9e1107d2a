//! Symbolic jet-bundle calculus.
//!
//! Total derivatives and Euler operators on infinite jets, the exterior algebra in
//! the Cartan basis, equation manifolds given in solved form, internal Lagrangians
//! with their presymplectic structures, and spatial gradings with a gauge-triviality
//! oracle. A small problem description language drives everything from the CLI.

pub mod eqmanifold;
pub mod error;
pub mod forms;
pub mod frontend;
pub mod jetcalc;
pub mod spatial;
pub mod symexpr;
pub mod variational;

pub use error::Error;
