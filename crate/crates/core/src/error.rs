use thiserror::Error;

use crate::eqmanifold::EqError;
use crate::forms::FormError;
use crate::frontend::ParseError;
use crate::jetcalc::JetError;
use crate::spatial::SpatialError;
use crate::symexpr::ExprError;
use crate::variational::VariationalError;

/// Any error the library can report, tagged by the module that raised it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("expression: {0}")]
    Expr(#[from] ExprError),
    #[error("jet calculus: {0}")]
    Jet(#[from] JetError),
    #[error("forms: {0}")]
    Form(#[from] FormError),
    #[error("equation: {0}")]
    Equation(#[from] EqError),
    #[error("variational: {0}")]
    Variational(#[from] VariationalError),
    #[error("spatial: {0}")]
    Spatial(#[from] SpatialError),
    #[error("{0}")]
    Parse(#[from] ParseError),
}
