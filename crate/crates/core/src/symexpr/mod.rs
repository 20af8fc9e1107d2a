//! Canonical exact symbolic expressions over jet coordinates, base coordinates and
//! opaque function symbols.
//!
//! An [`Expression`] is a Laurent polynomial with [`BigRational`](num_rational::BigRational)
//! coefficients in [`Atom`]s. Terms live in a sorted map keyed by [`Monomial`], so the
//! representation is canonical and `==` decides mathematical equality on this fragment.

mod atom;
mod expr;
mod multi_index;

pub use atom::{Atom, OpaqueFn};
pub use expr::{atom_text, jet_text, Expression, Monomial};
pub use multi_index::MultiIndex;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("denominator is not a single monomial")]
    NonMonomialDenominator,
    #[error("cannot substitute a compound expression into an argument of opaque function `{function}`")]
    OpaqueArgument { function: String },
}

/// Names used when rendering atoms as text.
pub trait Naming {
    fn independent_name(&self, i: usize) -> &str;
    fn dependent_name(&self, k: usize) -> &str;
}
