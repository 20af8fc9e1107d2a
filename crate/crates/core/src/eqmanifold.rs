//! Equations in solved form, their infinite prolongation as a rewrite system, and
//! restriction of expressions and forms to the equation manifold.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use thiserror::Error;

use crate::forms::{self, vertical_differential, DifferentialForm, Generator};
use crate::jetcalc::{apply_evolutionary, total_derivative, EvolutionaryField, JetContext, JetError};
use crate::symexpr::{jet_text, Atom, ExprError, Expression, MultiIndex};

/// Recursion bound for prolongation; exceeding it means the rule set does not terminate.
const MAX_DEPTH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EqError {
    #[error("right-hand side of the rule for `{head}` contains the principal coordinate `{coordinate}`")]
    PrincipalInRhs { head: String, coordinate: String },
    #[error("rule head `{head}` is a derivative of rule head `{other}`")]
    NonMinimal { head: String, other: String },
    #[error("`{0}` is not the head of a rule")]
    NotPrincipal(String),
    #[error("rewriting `{coordinate}` leads back to itself; the rule for `{head}` is not oriented")]
    Cycle { head: String, coordinate: String },
    #[error("rewriting `{0}` exceeded the depth limit")]
    DepthExceeded(String),
    #[error("cannot restrict opaque function `{function}`: its argument `{coordinate}` is principal")]
    OpaqueArgument { function: String, coordinate: String },
    #[error("[D̄_{first}, D̄_{second}] does not vanish on `{coordinate}`: residual {residual}")]
    Integrability {
        first: String,
        second: String,
        coordinate: String,
        residual: String,
    },
    #[error("characteristic has {got} components, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub dependent: usize,
    pub head: MultiIndex,
    pub rhs: Expression,
}

impl Rule {
    pub fn head_atom(&self) -> Atom {
        Atom::jet(self.dependent, self.head.clone())
    }

    /// `F = head − rhs`.
    pub fn residual(&self) -> Expression {
        &Expression::atom(self.head_atom()) - &self.rhs
    }
}

/// A system `u^{k}_{α} = rhs` solved for distinct principal derivatives, with a lazily
/// grown cache of normal forms of all principal coordinates.
#[derive(Debug)]
pub struct SolvedEquation {
    ctx: JetContext,
    rules: Vec<Rule>,
    cache: RwLock<HashMap<(usize, MultiIndex), Expression>>,
}

impl Clone for SolvedEquation {
    fn clone(&self) -> Self {
        let cache = self.cache.read().expect("rule cache poisoned").clone();
        SolvedEquation {
            ctx: self.ctx.clone(),
            rules: self.rules.clone(),
            cache: RwLock::new(cache),
        }
    }
}

impl SolvedEquation {
    pub fn new(ctx: JetContext, rules: Vec<Rule>) -> Result<Self, EqError> {
        for r in &rules {
            ctx.check_atom(&r.head_atom())?;
            ctx.validate(&r.rhs)?;
        }
        for (i, a) in rules.iter().enumerate() {
            for (j, b) in rules.iter().enumerate() {
                if i != j && a.dependent == b.dependent && b.head.divides(&a.head) && (i > j || a.head != b.head) {
                    return Err(EqError::NonMinimal {
                        head: jet_text(a.dependent, &a.head, &ctx),
                        other: jet_text(b.dependent, &b.head, &ctx),
                    });
                }
            }
        }
        let eq = SolvedEquation {
            ctx,
            rules,
            cache: RwLock::new(HashMap::new()),
        };
        for r in &eq.rules {
            for c in r.rhs.coordinates() {
                if eq.is_principal(&c) {
                    return Err(EqError::PrincipalInRhs {
                        head: eq.atom_text(&r.head_atom()),
                        coordinate: eq.atom_text(&c),
                    });
                }
            }
        }
        Ok(eq)
    }

    /// The free jet space: no rules, every coordinate is internal.
    pub fn free(ctx: JetContext) -> Self {
        SolvedEquation {
            ctx,
            rules: Vec::new(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    fn atom_text(&self, a: &Atom) -> String {
        crate::symexpr::atom_text(a, &self.ctx)
    }

    /// The first declared rule whose head divides `u^k_β`.
    pub fn rule_for(&self, k: usize, beta: &MultiIndex) -> Option<&Rule> {
        self.rules.iter().find(|r| r.dependent == k && r.head.divides(beta))
    }

    pub fn is_principal(&self, a: &Atom) -> bool {
        match a {
            Atom::Jet(k, beta) => self.rule_for(*k, beta).is_some(),
            _ => false,
        }
    }

    /// Normal form of `u^k_β` on the equation, or `None` for internal coordinates.
    pub fn normal_form(&self, k: usize, beta: &MultiIndex) -> Result<Option<Expression>, EqError> {
        self.normal_form_inner(k, beta, &mut Vec::new())
    }

    fn normal_form_inner(
        &self,
        k: usize,
        beta: &MultiIndex,
        stack: &mut Vec<(usize, MultiIndex)>,
    ) -> Result<Option<Expression>, EqError> {
        let key = (k, beta.clone());
        if let Some(v) = self.cache.read().expect("rule cache poisoned").get(&key) {
            return Ok(Some(v.clone()));
        }
        let Some(rule) = self.rule_for(k, beta) else {
            return Ok(None);
        };
        if stack.contains(&key) {
            return Err(EqError::Cycle {
                head: jet_text(rule.dependent, &rule.head, &self.ctx),
                coordinate: jet_text(k, beta, &self.ctx),
            });
        }
        if stack.len() >= MAX_DEPTH {
            return Err(EqError::DepthExceeded(jet_text(k, beta, &self.ctx)));
        }
        stack.push(key.clone());
        let value = if *beta == rule.head {
            Ok(rule.rhs.clone())
        } else {
            // peel the largest direction of β − head and differentiate the shorter rule
            let gamma = beta.checked_sub(&rule.head).expect("head divides coordinate");
            let s = gamma.max_index().expect("nonzero offset");
            let shorter = beta.without_index(s).expect("direction present");
            let prev = self
                .normal_form_inner(k, &shorter, stack)?
                .expect("shorter coordinate is still principal");
            self.restrict_inner(&total_derivative(s, &prev), stack)
        };
        stack.pop();
        let value = value?;
        self.cache
            .write()
            .expect("rule cache poisoned")
            .insert(key, value.clone());
        Ok(Some(value))
    }

    /// The prolonged rule `D_γ(head) = D_γ(rhs)` in normal form.
    pub fn prolong_rule(&self, principal: &Atom, gamma: &MultiIndex) -> Result<(Atom, Expression), EqError> {
        let not_head = || EqError::NotPrincipal(self.atom_text(principal));
        let (k, alpha) = principal.as_jet().ok_or_else(not_head)?;
        if !self.rules.iter().any(|r| r.dependent == k && r.head == *alpha) {
            return Err(not_head());
        }
        let target = alpha.add(gamma);
        let rhs = self
            .normal_form(k, &target)?
            .expect("derivative of a head is principal");
        Ok((Atom::jet(k, target), rhs))
    }

    /// Rewrites every principal coordinate of `e` to its normal form.
    pub fn restrict(&self, e: &Expression) -> Result<Expression, EqError> {
        if self.rules.is_empty() {
            return Ok(e.clone());
        }
        self.restrict_inner(e, &mut Vec::new())
    }

    fn restrict_inner(&self, e: &Expression, stack: &mut Vec<(usize, MultiIndex)>) -> Result<Expression, EqError> {
        let mut map = BTreeMap::new();
        for c in e.coordinates() {
            if let Atom::Jet(k, beta) = &c {
                if let Some(v) = self.normal_form_inner(*k, beta, stack)? {
                    map.insert(c, v);
                }
            }
        }
        if map.is_empty() {
            return Ok(e.clone());
        }
        e.substitute(&map).map_err(|err| match err {
            ExprError::OpaqueArgument { function } => {
                let coordinate = e
                    .atoms()
                    .iter()
                    .filter_map(|a| a.call())
                    .filter(|c| c.name == function)
                    .flat_map(|c| c.args.iter())
                    .find(|a| map.contains_key(*a))
                    .map(|a| self.atom_text(a))
                    .unwrap_or_default();
                EqError::OpaqueArgument { function, coordinate }
            }
            other => other.into(),
        })
    }

    /// `D̄_i = restrict ∘ D_i`.
    pub fn restricted_total_derivative(&self, i: usize, e: &Expression) -> Result<Expression, EqError> {
        self.restrict(&total_derivative(i, e))
    }

    pub fn restricted_total_derivative_multi(&self, alpha: &MultiIndex, e: &Expression) -> Result<Expression, EqError> {
        let mut out = e.clone();
        for i in alpha.expand() {
            out = self.restricted_total_derivative(i, &out)?;
        }
        Ok(out)
    }

    /// `θ_c` on the equation: principal Cartan forms become `Σ ∂nf/∂c' θ̄_{c'}`.
    fn restrict_generator(&self, g: &Generator) -> Result<DifferentialForm, EqError> {
        if let Generator::Theta(k, alpha) = g {
            if let Some(nf) = self.normal_form(*k, alpha)? {
                return Ok(vertical_differential(&nf));
            }
        }
        Ok(DifferentialForm::generator(g.clone()))
    }

    pub fn restrict_form(&self, w: &DifferentialForm) -> Result<DifferentialForm, EqError> {
        if self.rules.is_empty() {
            return Ok(w.clone());
        }
        let mut images: HashMap<Generator, DifferentialForm> = HashMap::new();
        let mut out = DifferentialForm::zero();
        for (gens, c) in w.terms() {
            let mut acc = DifferentialForm::scalar(self.restrict(c)?);
            for g in gens {
                if acc.is_zero() {
                    break;
                }
                if !images.contains_key(g) {
                    images.insert(g.clone(), self.restrict_generator(g)?);
                }
                acc = acc.wedge(&images[g]);
            }
            out += acc;
        }
        Ok(out)
    }

    /// Exterior derivative on the equation manifold of a form in internal coordinates.
    pub fn exterior_derivative(&self, w: &DifferentialForm) -> Result<DifferentialForm, EqError> {
        self.restrict_form(&forms::exterior_derivative(self.ctx.n(), w))
    }

    /// Internal coordinates `u^k_α` with `|α| ≤ order`.
    pub fn internal_coordinates(&self, order: u32) -> Vec<Atom> {
        self.ctx
            .jet_coordinates(order)
            .into_iter()
            .filter(|a| !self.is_principal(a))
            .collect()
    }

    /// Checks `[D̄_i, D̄_j] = 0` on every internal coordinate up to `order`.
    pub fn check_integrability(&self, order: u32) -> Result<(), EqError> {
        let n = self.ctx.n();
        for c in self.internal_coordinates(order) {
            let e = Expression::atom(c.clone());
            let first: Vec<Expression> = (0..n)
                .map(|i| self.restricted_total_derivative(i, &e))
                .collect::<Result<_, _>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let a = self.restricted_total_derivative(i, &first[j])?;
                    let b = self.restricted_total_derivative(j, &first[i])?;
                    let residual = &a - &b;
                    if !residual.is_zero() {
                        return Err(EqError::Integrability {
                            first: self.ctx.independents()[i].clone(),
                            second: self.ctx.independents()[j].clone(),
                            coordinate: self.atom_text(&c),
                            residual: self.ctx.text(&residual),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `l_E(φ) = E_φ(F)|_E` for each rule residual `F`.
    pub fn linearization_on_shell(&self, phi: &EvolutionaryField) -> Result<Vec<Expression>, EqError> {
        if phi.components.len() != self.ctx.m() {
            return Err(EqError::Arity {
                expected: self.ctx.m(),
                got: phi.components.len(),
            });
        }
        self.rules
            .iter()
            .map(|r| self.restrict(&apply_evolutionary(phi, &r.residual())))
            .collect()
    }

    /// `φ ∈ ker l_E`.
    pub fn is_symmetry(&self, phi: &EvolutionaryField) -> Result<bool, EqError> {
        Ok(self.linearization_on_shell(phi)?.iter().all(Expression::is_zero))
    }
}
