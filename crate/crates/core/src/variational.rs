//! Integration by parts, presymplectic potential currents `ω_L`, internal Lagrangians
//! and presymplectic structures.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::eqmanifold::{EqError, SolvedEquation};
use crate::forms::{
    cartan_degree_filter, contract_evolutionary, horizontal_differential, lie_derivative_evolutionary,
    DifferentialForm, FormError, Generator,
};
use crate::jetcalc::{euler_derivative, total_derivative, EvolutionaryField, JetContext, JetError};
use crate::symexpr::{Atom, Expression, MultiIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VariationalError {
    #[error("the Euler derivative with respect to `{component}` does not vanish on the equation: {value}")]
    OffShell { component: String, value: String },
    #[error("d(l) has Cartan-degree-one terms on the equation: {residual}")]
    NotPresymplectic { residual: String },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Equation(#[from] EqError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Which direction integration by parts peels from a multi-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IbpOrder {
    #[default]
    LargestIndex,
    SmallestIndex,
}

/// `L = λ dx^0 ∧ … ∧ dx^{n−1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lagrangian {
    pub density: Expression,
}

impl Lagrangian {
    pub fn new(density: Expression) -> Self {
        Self { density }
    }

    pub fn form(&self, n: usize) -> DifferentialForm {
        DifferentialForm::volume(n).scale(&self.density)
    }

    pub fn euler(&self, ctx: &JetContext) -> Result<Vec<Expression>, JetError> {
        (0..ctx.m()).map(|k| euler_derivative(ctx, &self.density, k)).collect()
    }
}

/// Result of integrating `Σ ∂λ/∂u^k_α D_α(φ^k)` by parts: the boundary current and the
/// remaining coefficients of `φ^k`, which are the Euler derivatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IbpResult {
    pub omega: DifferentialForm,
    pub remainder: Vec<Expression>,
}

/// Builds `ω_L` with `L_{E_φ}L = ⟨E(L), φ⟩ + d_h(E_φ ⌟ ω_L)`.
///
/// The largest `(k, α)` with `|α| ≥ 1` is peeled first; `c·D_α φ = D_s(c·D_{α−s}φ) − D_s(c)·D_{α−s}φ`
/// contributes `c θ^k_{α−s} ∧ (∂_s ⌟ vol)` to the current.
pub fn presymplectic_potential(
    ctx: &JetContext,
    lagrangian: &Lagrangian,
    order: IbpOrder,
) -> Result<IbpResult, JetError> {
    let lambda = &lagrangian.density;
    // rejects opaque functions of jets, which integration by parts cannot handle
    lagrangian.euler(ctx)?;
    let n = ctx.n();
    let mut pending: BTreeMap<(usize, MultiIndex), Expression> = BTreeMap::new();
    for c in lambda.coordinates() {
        if let Atom::Jet(k, alpha) = &c {
            pending.insert((*k, alpha.clone()), lambda.partial(&c));
        }
    }
    let mut omega = DifferentialForm::zero();
    while let Some(key) = pending.keys().rev().find(|(_, a)| !a.is_zero()).cloned() {
        let coef = pending.remove(&key).expect("key present");
        let (k, alpha) = key;
        let s = match order {
            IbpOrder::LargestIndex => alpha.max_index(),
            IbpOrder::SmallestIndex => alpha.min_index(),
        }
        .expect("nonzero multi-index");
        let lower = alpha.without_index(s).expect("direction present");
        omega += DifferentialForm::generator(Generator::Theta(k, lower.clone()))
            .wedge(&DifferentialForm::volume_interior(n, s))
            .scale(&coef);
        let entry = pending.entry((k, lower)).or_default();
        *entry -= &total_derivative(s, &coef);
    }
    let remainder = (0..ctx.m())
        .map(|k| pending.remove(&(k, MultiIndex::zero())).unwrap_or_default())
        .collect();
    Ok(IbpResult { omega, remainder })
}

/// A representative `l = (L + ω_L)|_E` together with its differential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InternalLagrangian {
    pub omega_l: DifferentialForm,
    pub l: DifferentialForm,
    pub dl: DifferentialForm,
}

pub fn internal_lagrangian(
    eq: &SolvedEquation,
    lagrangian: &Lagrangian,
    order: IbpOrder,
) -> Result<InternalLagrangian, VariationalError> {
    let ctx = eq.context();
    for (k, e) in lagrangian.euler(ctx)?.iter().enumerate() {
        let on_shell = eq.restrict(e)?;
        if !on_shell.is_zero() {
            return Err(VariationalError::OffShell {
                component: ctx.dependents()[k].clone(),
                value: ctx.text(&on_shell),
            });
        }
    }
    let omega_l = presymplectic_potential(ctx, lagrangian, order)?.omega;
    let l = eq.restrict_form(&(lagrangian.form(ctx.n()) + omega_l.clone()))?;
    let dl = eq.exterior_derivative(&l)?;
    let low = &dl - &cartan_degree_filter(&dl, 2);
    if !low.is_zero() {
        return Err(VariationalError::NotPresymplectic {
            residual: low.to_text(ctx),
        });
    }
    Ok(InternalLagrangian { omega_l, l, dl })
}

/// `d(l)` on the equation and its Cartan-degree-two part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presymplectic {
    pub dl: DifferentialForm,
    pub cartan2: DifferentialForm,
}

pub fn presymplectic_structure(rep: &InternalLagrangian) -> Presymplectic {
    Presymplectic {
        dl: rep.dl.clone(),
        cartan2: cartan_degree_filter(&rep.dl, 2),
    }
}

/// Checks `L_{E_φ}L − ⟨E(L), φ⟩ − d_h(E_φ ⌟ ω_L) = 0`.
pub fn verify_omega_identity(
    ctx: &JetContext,
    lagrangian: &Lagrangian,
    omega_l: &DifferentialForm,
    phi: &EvolutionaryField,
) -> Result<bool, VariationalError> {
    let n = ctx.n();
    let lie = lie_derivative_evolutionary(n, phi, &lagrangian.form(n));
    let mut pairing = Expression::zero();
    for (k, e) in lagrangian.euler(ctx)?.iter().enumerate() {
        pairing += e * &phi.component(k);
    }
    let boundary = horizontal_differential(n, &contract_evolutionary(phi, omega_l))?;
    let residual = &(&lie - &DifferentialForm::volume(n).scale(&pairing)) - &boundary;
    Ok(residual.is_zero())
}

/// A characteristic whose components are opaque functions of all base coordinates and
/// all jets up to `order`.
pub fn opaque_test_field(ctx: &JetContext, order: u32) -> EvolutionaryField {
    let mut args: Vec<Atom> = (0..ctx.n()).map(Atom::Base).collect();
    args.extend(ctx.jet_coordinates(order));
    EvolutionaryField::new(
        ctx.dependents()
            .iter()
            .map(|name| Expression::opaque(&format!("phi_{name}"), args.clone()))
            .collect(),
    )
}
