//! Jet-space differential operators: total derivatives, the Euler operator,
//! evolutionary vector fields and linearization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::symexpr::{Atom, Expression, MultiIndex, Naming, OpaqueFn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JetError {
    #[error("a jet context needs at least one independent and one dependent variable")]
    EmptyContext,
    #[error("name `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("opaque function `{0}` is not declared")]
    UnknownFunction(String),
    #[error("index {index} is out of range for {what}")]
    OutOfRange { what: &'static str, index: usize },
    #[error(
        "Euler derivative with respect to `{variable}` is unsupported: opaque function `{function}` depends on its jets"
    )]
    OpaqueInEuler { variable: String, function: String },
    #[error("expected {expected} components, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Bundle data: names of the independent and dependent variables and the declared
/// opaque function signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetContext {
    independents: Vec<String>,
    dependents: Vec<String>,
    opaque: BTreeMap<String, Arc<OpaqueFn>>,
}

impl JetContext {
    pub fn new<S: Into<String>>(
        independents: impl IntoIterator<Item = S>,
        dependents: impl IntoIterator<Item = S>,
    ) -> Result<Self, JetError> {
        let ctx = JetContext {
            independents: independents.into_iter().map(Into::into).collect(),
            dependents: dependents.into_iter().map(Into::into).collect(),
            opaque: BTreeMap::new(),
        };
        if ctx.independents.is_empty() || ctx.dependents.is_empty() {
            return Err(JetError::EmptyContext);
        }
        let mut seen = BTreeSet::new();
        for name in ctx.independents.iter().chain(&ctx.dependents) {
            if !seen.insert(name.as_str()) {
                return Err(JetError::DuplicateName(name.clone()));
            }
        }
        Ok(ctx)
    }

    /// Number of independent variables.
    pub fn n(&self) -> usize {
        self.independents.len()
    }

    /// Number of dependent variables.
    pub fn m(&self) -> usize {
        self.dependents.len()
    }

    pub fn independents(&self) -> &[String] {
        &self.independents
    }

    pub fn dependents(&self) -> &[String] {
        &self.dependents
    }

    pub fn independent_index(&self, name: &str) -> Option<usize> {
        self.independents.iter().position(|s| s == name)
    }

    pub fn dependent_index(&self, name: &str) -> Option<usize> {
        self.dependents.iter().position(|s| s == name)
    }

    pub fn is_name_taken(&self, name: &str) -> bool {
        self.independent_index(name).is_some() || self.dependent_index(name).is_some() || self.opaque.contains_key(name)
    }

    /// Declares `name(args)`; arguments must be coordinates of this context.
    pub fn declare_opaque(&mut self, name: &str, args: Vec<Atom>) -> Result<Arc<OpaqueFn>, JetError> {
        if self.is_name_taken(name) {
            return Err(JetError::DuplicateName(name.to_string()));
        }
        for a in &args {
            self.check_atom(a)?;
        }
        let f = Arc::new(OpaqueFn::new(name, args));
        self.opaque.insert(name.to_string(), f.clone());
        Ok(f)
    }

    pub fn opaque(&self, name: &str) -> Option<&Arc<OpaqueFn>> {
        self.opaque.get(name)
    }

    pub fn opaque_functions(&self) -> impl Iterator<Item = &Arc<OpaqueFn>> {
        self.opaque.values()
    }

    /// The context extended by further dependent variables (indices continue after `m`).
    pub fn with_extra_dependents(&self, names: &[String]) -> Result<JetContext, JetError> {
        let mut ctx = self.clone();
        for name in names {
            if ctx.is_name_taken(name) {
                return Err(JetError::DuplicateName(name.clone()));
            }
            ctx.dependents.push(name.clone());
        }
        Ok(ctx)
    }

    pub fn check_atom(&self, a: &Atom) -> Result<(), JetError> {
        match a {
            Atom::Base(i) if *i >= self.n() => Err(JetError::OutOfRange {
                what: "independent variables",
                index: *i,
            }),
            Atom::Jet(k, _) if *k >= self.m() => Err(JetError::OutOfRange {
                what: "dependent variables",
                index: *k,
            }),
            Atom::Jet(_, alpha) if alpha.width() > self.n() => Err(JetError::OutOfRange {
                what: "independent variables",
                index: alpha.width() - 1,
            }),
            Atom::Fn(c) | Atom::FnPartial(c, _) => c.args.iter().try_for_each(|x| self.check_atom(x)),
            _ => Ok(()),
        }
    }

    /// Checks that every atom of `e` refers to variables of this context.
    pub fn validate(&self, e: &Expression) -> Result<(), JetError> {
        e.atoms().iter().try_for_each(|a| self.check_atom(a))
    }

    pub fn text(&self, e: &Expression) -> String {
        e.to_text(self)
    }

    /// Jet coordinates `u^k_α` of every dependent with `|α| ≤ order`.
    pub fn jet_coordinates(&self, order: u32) -> Vec<Atom> {
        let alphas = MultiIndex::all_up_to(self.n(), order);
        (0..self.m())
            .flat_map(|k| alphas.iter().map(move |a| Atom::jet(k, a.clone())))
            .collect()
    }
}

impl Naming for JetContext {
    fn independent_name(&self, i: usize) -> &str {
        &self.independents[i]
    }
    fn dependent_name(&self, k: usize) -> &str {
        &self.dependents[k]
    }
}

/// `D_{x^i}` applied to a coordinate atom.
fn coordinate_total_derivative(i: usize, a: &Atom) -> Expression {
    match a {
        Atom::Base(j) if *j == i => Expression::one(),
        Atom::Base(_) => Expression::zero(),
        Atom::Jet(k, alpha) => Expression::jet(*k, alpha.with_index(i)),
        _ => unreachable!("derivations are only evaluated on coordinates"),
    }
}

/// `D_{x^i}(e)`; opaque atoms are differentiated through their arguments.
pub fn total_derivative(i: usize, e: &Expression) -> Expression {
    e.derive_with(&mut |a: &Atom| coordinate_total_derivative(i, a))
}

/// `D_α(e)`, applying one direction at a time.
pub fn total_derivative_multi(alpha: &MultiIndex, e: &Expression) -> Expression {
    let mut out = e.clone();
    for i in alpha.expand() {
        if out.is_zero() {
            break;
        }
        out = total_derivative(i, &out);
    }
    out
}

/// Jet coordinates of dependent `k` that `e` depends on, outside of opaque arguments.
fn direct_jets(e: &Expression, k: usize) -> BTreeSet<MultiIndex> {
    e.atoms()
        .into_iter()
        .filter_map(|a| match a {
            Atom::Jet(j, alpha) if j == k => Some(alpha),
            _ => None,
        })
        .collect()
}

/// The variational derivative `δλ/δu^k = Σ (−1)^{|α|} D_α(∂λ/∂u^k_α)`.
pub fn euler_derivative(ctx: &JetContext, lambda: &Expression, k: usize) -> Result<Expression, JetError> {
    if k >= ctx.m() {
        return Err(JetError::OutOfRange {
            what: "dependent variables",
            index: k,
        });
    }
    for a in lambda.atoms() {
        if let Some(call) = a.call() {
            if call.args.iter().any(|x| matches!(x, Atom::Jet(j, _) if *j == k)) {
                return Err(JetError::OpaqueInEuler {
                    variable: ctx.dependents[k].clone(),
                    function: call.name.clone(),
                });
            }
        }
    }
    let mut out = Expression::zero();
    for alpha in direct_jets(lambda, k) {
        let p = lambda.partial(&Atom::jet(k, alpha.clone()));
        let term = total_derivative_multi(&alpha, &p);
        if alpha.order() % 2 == 0 {
            out += term;
        } else {
            out -= &term;
        }
    }
    Ok(out)
}

/// Evolutionary vector field `E_φ` given by its characteristic `φ = (φ^1, …, φ^m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionaryField {
    pub components: Vec<Expression>,
}

impl EvolutionaryField {
    pub fn new(components: Vec<Expression>) -> Self {
        Self { components }
    }

    pub fn zero(m: usize) -> Self {
        Self::new(vec![Expression::zero(); m])
    }

    pub fn component(&self, k: usize) -> Expression {
        self.components.get(k).cloned().unwrap_or_default()
    }

    /// `E_φ(u^k_α) = D_α(φ^k)`.
    pub fn on_jet(&self, k: usize, alpha: &MultiIndex) -> Expression {
        total_derivative_multi(alpha, &self.component(k))
    }
}

/// `E_φ(e) = Σ D_α(φ^k) ∂e/∂u^k_α`.
pub fn apply_evolutionary(x: &EvolutionaryField, e: &Expression) -> Expression {
    let mut cache: HashMap<(usize, MultiIndex), Expression> = HashMap::new();
    e.derive_with(&mut |a: &Atom| match a {
        Atom::Jet(k, alpha) => cache
            .entry((*k, alpha.clone()))
            .or_insert_with(|| x.on_jet(*k, alpha))
            .clone(),
        _ => Expression::zero(),
    })
}

/// `l_F(φ) = E_φ(F)` componentwise.
pub fn linearization(f: &[Expression], phi: &EvolutionaryField) -> Vec<Expression> {
    f.iter().map(|fj| apply_evolutionary(phi, fj)).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ctx_xy() -> JetContext {
        JetContext::new(["x", "y"], ["u", "v"]).unwrap()
    }
    fn ctx_tx() -> JetContext {
        JetContext::new(["t", "x"], ["u"]).unwrap()
    }
    fn j(k: usize, dirs: &[usize]) -> Expression {
        Expression::jet(k, MultiIndex::from_indices(dirs.iter().copied()))
    }
    fn ja(k: usize, dirs: &[usize]) -> Atom {
        Atom::jet(k, MultiIndex::from_indices(dirs.iter().copied()))
    }
    fn u() -> Expression {
        j(0, &[])
    }
    fn r(n: i64, d: i64) -> Expression {
        Expression::ratio(n, d)
    }

    #[test]
    fn context_validation() {
        assert_eq!(
            JetContext::new(["x", "x"], ["u"]),
            Err(JetError::DuplicateName("x".into()))
        );
        assert_eq!(
            JetContext::new(Vec::<&str>::new(), vec!["u"]),
            Err(JetError::EmptyContext)
        );
        let ctx = ctx_xy();
        assert!(ctx.validate(&j(1, &[0, 1])).is_ok());
        assert!(ctx.validate(&j(2, &[])).is_err());
        assert!(ctx.validate(&Expression::jet(0, MultiIndex::unit(2))).is_err());
    }

    #[test]
    fn total_derivative_examples() {
        let ux = j(0, &[0]);
        assert_eq!(
            total_derivative(0, &(&u() * &ux)),
            &ux.pow(2).unwrap() + &(&u() * &j(0, &[0, 0]))
        );
        assert_eq!(total_derivative(0, &Expression::base(0)), Expression::one());

        // D_y f(y, u_y) = f{1} + f{2} u_yy
        let f = OpaqueFn::new("f", vec![Atom::Base(1), ja(0, &[1])]);
        let fa = Atom::opaque(f.clone());
        let p1 = fa.opaque_partial(0).unwrap();
        let p2 = fa.opaque_partial(1).unwrap();
        let expected = &Expression::atom(p1) + &(&Expression::atom(p2) * &j(0, &[1, 1]));
        assert_eq!(total_derivative(1, &Expression::atom(fa)), expected);
    }

    #[test]
    fn multi_derivative_examples() {
        assert_eq!(
            total_derivative_multi(&MultiIndex::from_indices([0, 1]), &u()),
            j(0, &[0, 1])
        );
        let ux = j(0, &[0]);
        let expected = &(&Expression::int(2) * &ux.pow(2).unwrap()) + &(&Expression::int(2) * &(&u() * &j(0, &[0, 0])));
        assert_eq!(
            total_derivative_multi(&MultiIndex::from_indices([0, 0]), &u().pow(2).unwrap()),
            expected
        );
        let e = &u() + &Expression::base(1);
        assert_eq!(total_derivative_multi(&MultiIndex::zero(), &e), e);
    }

    #[test]
    fn leibniz_oracle() {
        let uy = j(0, &[1]);
        let lhs = total_derivative(0, &(&u() * &uy));
        let rhs = &(&j(0, &[0]) * &uy) + &(&u() * &j(0, &[0, 1]));
        assert!((&lhs - &rhs).is_zero());
    }

    #[test]
    fn euler_laplace() {
        let ctx = ctx_xy();
        let lambda = &r(-1, 2) * &(&j(0, &[0]).pow(2).unwrap() + &j(0, &[1]).pow(2).unwrap());
        assert_eq!(
            euler_derivative(&ctx, &lambda, 0).unwrap(),
            &j(0, &[0, 0]) + &j(0, &[1, 1])
        );
    }

    #[test]
    fn euler_kills_divergence() {
        let ctx = ctx_xy();
        let e = &(&u() * &j(1, &[1]).pow(2).unwrap()) + &Expression::base(0);
        let div = total_derivative(0, &e);
        for k in 0..2 {
            assert!(euler_derivative(&ctx, &div, k).unwrap().is_zero());
        }
    }

    #[test]
    fn euler_pkdv_matches_derivative_of_residual() {
        let ctx = ctx_tx();
        let (ut, ux, uxx) = (j(0, &[0]), j(0, &[1]), j(0, &[1, 1]));
        let lambda = &(&(&(&ux * &ut) * &r(1, 2)) - &ux.pow(3).unwrap()) + &(&uxx.pow(2).unwrap() * &r(1, 2));
        let e = euler_derivative(&ctx, &lambda, 0).unwrap();
        let residual = &(&ut - &(&Expression::int(3) * &ux.pow(2).unwrap())) - &j(0, &[1, 1, 1]);
        assert_eq!(e, -&total_derivative(1, &residual));
        let expected = &(&-&j(0, &[0, 1]) + &(&Expression::int(6) * &(&ux * &uxx))) + &j(0, &[1, 1, 1, 1]);
        assert_eq!(e, expected);
    }

    #[test]
    fn euler_rejects_opaque_of_varied_jets() {
        let ctx = ctx_xy();
        let lam = Expression::opaque("f", vec![Atom::Base(0), ja(0, &[0])]);
        assert!(matches!(
            euler_derivative(&ctx, &lam, 0),
            Err(JetError::OpaqueInEuler { .. })
        ));
        assert!(euler_derivative(&ctx, &lam, 1).unwrap().is_zero());
    }

    #[test]
    fn evolutionary_examples() {
        let phi = Expression::opaque("phi", vec![Atom::Base(0), Atom::dependent(0)]);
        let x = EvolutionaryField::new(vec![phi.clone(), Expression::zero()]);
        let alpha = MultiIndex::from_indices([0, 1]);
        assert_eq!(
            apply_evolutionary(&x, &Expression::jet(0, alpha.clone())),
            total_derivative_multi(&alpha, &phi)
        );
        assert!(apply_evolutionary(&x, &Expression::base(0)).is_zero());

        let x = EvolutionaryField::new(vec![j(0, &[0])]);
        let lam = &j(0, &[0]).pow(2).unwrap() * &r(1, 2);
        assert_eq!(apply_evolutionary(&x, &lam), &j(0, &[0]) * &j(0, &[0, 0]));
    }

    #[test]
    fn linearization_examples() {
        let phi = EvolutionaryField::new(vec![j(0, &[0])]);
        assert_eq!(linearization(&[j(0, &[0, 1])], &phi), vec![j(0, &[0, 0, 1])]);

        let f = &(&j(0, &[1, 1]) + &(&Expression::int(3) * &j(0, &[0, 0]))) - &u();
        let id = EvolutionaryField::new(vec![u()]);
        assert_eq!(linearization(std::slice::from_ref(&f), &id), vec![f]);

        let laplace = &j(0, &[1, 1]) + &j(0, &[0, 0]);
        let shift = EvolutionaryField::new(vec![Expression::one()]);
        assert!(linearization(&[laplace], &shift)[0].is_zero());
    }

    fn jet_expr() -> impl Strategy<Value = Expression> {
        let atom = prop_oneof![
            (0usize..2).prop_map(Expression::base),
            (0usize..2, proptest::collection::vec(0usize..2, 0..3))
                .prop_map(|(k, d)| Expression::jet(k, MultiIndex::from_indices(d))),
            Just(Expression::opaque(
                "f",
                vec![Atom::Base(1), Atom::jet(0, MultiIndex::unit(0))]
            )),
        ];
        let term = (-3i64..4, proptest::collection::vec(atom, 0..3));
        proptest::collection::vec(term, 0..4).prop_map(|ts| {
            ts.into_iter().fold(Expression::zero(), |acc, (c, fs)| {
                acc + fs.iter().fold(Expression::int(c), |t, f| &t * f)
            })
        })
    }

    proptest! {
        #[test]
        fn total_derivatives_commute(e in jet_expr()) {
            prop_assert_eq!(total_derivative(0, &total_derivative(1, &e)), total_derivative(1, &total_derivative(0, &e)));
        }

        #[test]
        fn leibniz(a in jet_expr(), b in jet_expr(), i in 0usize..2) {
            let lhs = total_derivative(i, &(&a * &b));
            let rhs = &(&total_derivative(i, &a) * &b) + &(&a * &total_derivative(i, &b));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn evolutionary_commutes_with_total_derivative(e in jet_expr(), p in jet_expr(), q in jet_expr(), i in 0usize..2) {
            let x = EvolutionaryField::new(vec![p, q]);
            prop_assert_eq!(apply_evolutionary(&x, &total_derivative(i, &e)), total_derivative(i, &apply_evolutionary(&x, &e)));
        }
    }
}
