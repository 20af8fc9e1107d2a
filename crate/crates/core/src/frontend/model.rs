use std::collections::BTreeMap;

use crate::eqmanifold::{EqError, Rule, SolvedEquation};
use crate::forms::DifferentialForm;
use crate::jetcalc::{total_derivative, EvolutionaryField, JetContext};
use crate::spatial::{ConstraintResolution, SSymmetryCandidate, SpatialFrame};
use crate::symexpr::{Atom, Expression, MultiIndex};

use super::ast::{Expectation, Expr, FormKey, GaugeOutcome, Located, Node, Program, Statement};
use super::ParseError;

/// An expectation with its values evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expect {
    Euler { dependent: usize, value: Expression },
    Form { key: FormKey, value: DifferentialForm },
    Gauge { candidate: usize, outcome: GaugeOutcome },
    Contract { candidate: usize, value: DifferentialForm },
    Symmetry { characteristic: usize, value: bool },
    Restrict { expr: Expression, value: Expression },
    Prolong { jet: Atom, value: Expression },
}

#[derive(Debug, Clone)]
pub struct NamedCandidate {
    pub name: String,
    pub line: usize,
    pub candidate: SSymmetryCandidate,
}

#[derive(Debug, Clone)]
pub struct NamedCharacteristic {
    pub name: String,
    pub line: usize,
    pub field: EvolutionaryField,
}

/// A program elaborated into library objects.
#[derive(Debug, Clone)]
pub struct Model {
    pub ctx: JetContext,
    pub equation: SolvedEquation,
    pub lagrangian: Option<Expression>,
    pub frame: Option<SpatialFrame>,
    pub resolution: Option<ConstraintResolution>,
    pub candidates: Vec<NamedCandidate>,
    pub characteristics: Vec<NamedCharacteristic>,
    pub expectations: Vec<Located<Expect>>,
}

fn err<T>(e: &Located<T>, message: impl Into<String>) -> ParseError {
    ParseError::semantic(e.line, e.col, message)
}

/// Evaluates expression trees against a context.
pub struct Evaluator<'c> {
    pub ctx: &'c JetContext,
}

impl Evaluator<'_> {
    fn direction(&self, e: &Expr, name: &str) -> Result<usize, ParseError> {
        self.ctx
            .independent_index(name)
            .ok_or_else(|| err(e, format!("unknown independent variable '{name}'")))
    }

    fn jet(&self, e: &Expr, dep: &str, dirs: &[String]) -> Result<Atom, ParseError> {
        let k = self
            .ctx
            .dependent_index(dep)
            .ok_or_else(|| err(e, format!("unknown dependent variable '{dep}'")))?;
        let mut idx = Vec::with_capacity(dirs.len());
        for d in dirs {
            idx.push(self.direction(e, d)?);
        }
        Ok(Atom::jet(k, MultiIndex::from_indices(idx)))
    }

    /// A coordinate atom: an independent variable or a jet.
    pub fn coordinate(&self, e: &Expr) -> Result<Atom, ParseError> {
        match &e.node {
            Node::Name(n) => match self.ctx.independent_index(n) {
                Some(i) => Ok(Atom::Base(i)),
                None => self.jet(e, n, &[]),
            },
            Node::Jet(d, dirs) => self.jet(e, d, dirs),
            _ => Err(err(e, "expected a coordinate")),
        }
    }

    pub fn form(&self, e: &Expr) -> Result<DifferentialForm, ParseError> {
        let scalar = |f: Expression| Ok(DifferentialForm::scalar(f));
        match &e.node {
            Node::Int(n) => scalar(Expression::constant(n.clone().into())),
            Node::Name(n) => {
                if let Some(i) = self.ctx.independent_index(n) {
                    return scalar(Expression::base(i));
                }
                if let Some(k) = self.ctx.dependent_index(n) {
                    return scalar(Expression::dependent(k));
                }
                match self.ctx.opaque(n) {
                    Some(f) => scalar(Expression::atom(Atom::Fn(f.clone()))),
                    None => Err(err(e, format!("unknown name '{n}'"))),
                }
            }
            Node::Jet(d, dirs) => scalar(Expression::atom(self.jet(e, d, dirs)?)),
            Node::Partial(f, pos) => {
                let call = self
                    .ctx
                    .opaque(f)
                    .ok_or_else(|| err(e, format!("unknown opaque function '{f}'")))?;
                if let Some(p) = pos.iter().find(|p| **p > call.args.len()) {
                    return Err(err(e, format!("'{f}' has no argument {p}")));
                }
                let beta = MultiIndex::from_indices(pos.iter().map(|p| p - 1));
                scalar(Expression::atom(Atom::FnPartial(call.clone(), beta)))
            }
            Node::Dx(x) => Ok(DifferentialForm::dx(self.direction(e, x)?)),
            Node::Theta(d, dirs) => match self.jet(e, d, dirs)? {
                Atom::Jet(k, alpha) => Ok(DifferentialForm::theta(k, alpha)),
                _ => unreachable!("jet"),
            },
            Node::TotalD(x, inner) => {
                let i = self.direction(e, x)?;
                scalar(total_derivative(i, &self.scalar(inner)?))
            }
            Node::Neg(a) => Ok(-self.form(a)?),
            Node::Add(a, b) => Ok(self.form(a)? + self.form(b)?),
            Node::Sub(a, b) => Ok(self.form(a)? - self.form(b)?),
            Node::Mul(a, b) => {
                let (fa, fb) = (self.form(a)?, self.form(b)?);
                match (fa.as_scalar(), fb.as_scalar()) {
                    (Some(s), _) => Ok(fb.scale(&s)),
                    (_, Some(s)) => Ok(fa.scale(&s)),
                    _ => Err(err(e, "'*' needs a scalar factor; use '/\\' for the wedge product")),
                }
            }
            Node::Div(a, b) => {
                let num = self.form(a)?;
                let den = self.scalar(b)?;
                let inv = den.reciprocal().map_err(|x| err(b, x.to_string()))?;
                Ok(num.scale(&inv))
            }
            Node::Wedge(a, b) => Ok(self.form(a)?.wedge(&self.form(b)?)),
            Node::Pow(a, k) => {
                let base = self.scalar(a)?;
                scalar(base.pow(*k).map_err(|x| err(e, x.to_string()))?)
            }
        }
    }

    pub fn scalar(&self, e: &Expr) -> Result<Expression, ParseError> {
        self.form(e)?
            .as_scalar()
            .ok_or_else(|| err(e, "expected a scalar expression, found a form"))
    }
}

impl Model {
    pub fn build(program: &Program) -> Result<Model, ParseError> {
        let mut independents = Vec::new();
        let mut dependents = Vec::new();
        for s in &program.statements {
            match &s.node {
                Statement::Independents(n) => independents = n.clone(),
                Statement::Dependents(n) => dependents = n.clone(),
                _ => {}
            }
        }
        let mut ctx = JetContext::new(independents, dependents).map_err(|x| {
            let s = &program.statements[0];
            err(s, x.to_string())
        })?;

        let mut rules: Vec<(Rule, &Located<Statement>, &Expr)> = Vec::new();
        let mut lagrangian = None;
        let mut frame = None;
        let mut resolution = None;
        let mut candidates: Vec<NamedCandidate> = Vec::new();
        let mut characteristics: Vec<NamedCharacteristic> = Vec::new();
        let mut pending: Vec<&Located<Statement>> = Vec::new();

        for s in &program.statements {
            match &s.node {
                Statement::Independents(_) | Statement::Dependents(_) => {}
                Statement::Opaque { name, args } => {
                    let ev = Evaluator { ctx: &ctx };
                    let mut atoms = Vec::new();
                    for a in args {
                        atoms.push(ev.coordinate(a)?);
                    }
                    ctx.declare_opaque(name, atoms).map_err(|x| err(s, x.to_string()))?;
                }
                Statement::Equation { lhs, rhs } => {
                    let ev = Evaluator { ctx: &ctx };
                    let Atom::Jet(k, head) = ev.coordinate(lhs)? else {
                        return Err(err(lhs, "the left-hand side must be a jet coordinate"));
                    };
                    let rhs_value = ev.scalar(rhs)?;
                    rules.push((
                        Rule {
                            dependent: k,
                            head,
                            rhs: rhs_value,
                        },
                        s,
                        rhs,
                    ));
                }
                Statement::Lagrangian(e) => {
                    if lagrangian.is_some() {
                        return Err(err(s, "duplicate 'lagrangian'"));
                    }
                    lagrangian = Some(Evaluator { ctx: &ctx }.scalar(e)?);
                }
                Statement::Spatial(x) => {
                    let i = ctx
                        .independent_index(x)
                        .ok_or_else(|| err(s, format!("unknown independent variable '{x}'")))?;
                    frame = Some(SpatialFrame::new(i));
                }
                Statement::Candidate { name, entries } => {
                    if candidates.iter().any(|c| &c.name == name) {
                        return Err(err(s, format!("duplicate candidate '{name}'")));
                    }
                    let ev = Evaluator { ctx: &ctx };
                    let mut values = BTreeMap::new();
                    for (k, v) in entries {
                        let key = ev.coordinate(k)?;
                        if !matches!(key, Atom::Jet(..)) {
                            return Err(err(k, "candidate keys are jet coordinates"));
                        }
                        if values.insert(key, ev.scalar(v)?).is_some() {
                            return Err(err(k, "duplicate key"));
                        }
                    }
                    candidates.push(NamedCandidate {
                        name: name.clone(),
                        line: s.line,
                        candidate: SSymmetryCandidate { values },
                    });
                }
                Statement::Characteristic { name, entries } => {
                    if characteristics.iter().any(|c| &c.name == name) {
                        return Err(err(s, format!("duplicate characteristic '{name}'")));
                    }
                    let ev = Evaluator { ctx: &ctx };
                    let mut comps = vec![Expression::zero(); ctx.m()];
                    for (dep, v) in entries {
                        let k = ctx
                            .dependent_index(dep)
                            .ok_or_else(|| err(v, format!("unknown dependent variable '{dep}'")))?;
                        comps[k] = ev.scalar(v)?;
                    }
                    characteristics.push(NamedCharacteristic {
                        name: name.clone(),
                        line: s.line,
                        field: EvolutionaryField::new(comps),
                    });
                }
                Statement::Resolve { components, potential } => {
                    let mut idx = Vec::new();
                    for c in components {
                        idx.push(
                            ctx.dependent_index(c)
                                .ok_or_else(|| err(s, format!("unknown dependent variable '{c}'")))?,
                        );
                    }
                    let r = ConstraintResolution::new(idx, potential.clone());
                    let names = r.potential_names(components.len());
                    if let Some(clash) = names.iter().find(|n| ctx.is_name_taken(n)) {
                        return Err(err(
                            s,
                            format!("potential component '{clash}' clashes with a declared name"),
                        ));
                    }
                    resolution = Some(r);
                }
                Statement::Expect(_) => pending.push(s),
            }
        }

        for (rule, _, rhs) in &rules {
            for c in rule.rhs.coordinates() {
                if let Atom::Jet(k, beta) = &c {
                    if let Some((other, _, _)) =
                        rules.iter().find(|(r, _, _)| r.dependent == *k && r.head.divides(beta))
                    {
                        return Err(err(
                            rhs,
                            format!(
                                "right-hand side contains the principal coordinate '{}' (see the rule for '{}')",
                                crate::symexpr::jet_text(*k, beta, &ctx),
                                crate::symexpr::jet_text(other.dependent, &other.head, &ctx)
                            ),
                        ));
                    }
                }
            }
        }
        let rule_list: Vec<Rule> = rules.iter().map(|(r, _, _)| r.clone()).collect();
        let equation = SolvedEquation::new(ctx.clone(), rule_list).map_err(|x| {
            let at = match &x {
                EqError::NonMinimal { head, .. } => rules
                    .iter()
                    .find(|(r, _, _)| crate::symexpr::jet_text(r.dependent, &r.head, &ctx) == *head)
                    .map(|(_, s, _)| *s),
                _ => None,
            };
            match at.or_else(|| rules.first().map(|(_, s, _)| *s)) {
                Some(s) => err(s, x.to_string()),
                None => ParseError::semantic(1, 1, x.to_string()),
            }
        })?;

        let ev = Evaluator { ctx: &ctx };
        let mut expectations = Vec::new();
        for s in pending {
            let Statement::Expect(x) = &s.node else { unreachable!() };
            let find_candidate = |name: &str| {
                candidates
                    .iter()
                    .position(|c| c.name == name)
                    .ok_or_else(|| err(s, format!("unknown candidate '{name}'")))
            };
            let value = match x {
                Expectation::Euler { dependent, value } => Expect::Euler {
                    dependent: ctx
                        .dependent_index(dependent)
                        .ok_or_else(|| err(s, format!("unknown dependent variable '{dependent}'")))?,
                    value: ev.scalar(value)?,
                },
                Expectation::Form { key, value } => Expect::Form {
                    key: *key,
                    value: ev.form(value)?,
                },
                Expectation::Gauge { candidate, outcome } => Expect::Gauge {
                    candidate: find_candidate(candidate)?,
                    outcome: *outcome,
                },
                Expectation::Contract { candidate, value } => Expect::Contract {
                    candidate: find_candidate(candidate)?,
                    value: ev.form(value)?,
                },
                Expectation::Symmetry { characteristic, value } => Expect::Symmetry {
                    characteristic: characteristics
                        .iter()
                        .position(|c| &c.name == characteristic)
                        .ok_or_else(|| err(s, format!("unknown characteristic '{characteristic}'")))?,
                    value: *value,
                },
                Expectation::Restrict { expr, value } => Expect::Restrict {
                    expr: ev.scalar(expr)?,
                    value: ev.scalar(value)?,
                },
                Expectation::Prolong { jet, value } => Expect::Prolong {
                    jet: ev.coordinate(jet)?,
                    value: ev.scalar(value)?,
                },
            };
            expectations.push(Located::new(value, s.line, s.col));
        }

        Ok(Model {
            ctx,
            equation,
            lagrangian,
            frame,
            resolution,
            candidates,
            characteristics,
            expectations,
        })
    }

    pub fn has_equation(&self) -> bool {
        !self.equation.rules().is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load;

    const HEAD: &str = "independents x y\ndependents u\n";

    #[test]
    fn unknown_names() {
        let e = load(&format!("{HEAD}lagrangian v^2\n")).unwrap_err();
        assert_eq!((e.line, e.col), (3, 12));
        assert!(e.message.contains("unknown name 'v'"));
        let e = load(&format!("{HEAD}expect gauge X = true\n")).unwrap_err();
        assert!(e.message.contains("unknown candidate"));
    }

    #[test]
    fn principal_in_rhs() {
        let e = load(&format!("{HEAD}equation u[yy] = u[xyy]\n")).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("principal coordinate 'u[xyy]'"));
    }

    #[test]
    fn forms_and_partials() {
        let m = load(&format!(
            "{HEAD}opaque f(x, u)\nexpect omega = 1/2 * f{{2}} * th(u) /\\ d(x)\nexpect restrict D(x, f) = f{{1}} + f{{2}}*u[x]\n"
        ))
        .unwrap();
        assert_eq!(m.expectations.len(), 2);
        match &m.expectations[0].node {
            Expect::Form { value, .. } => assert_eq!(value.degree(), Some(2)),
            other => panic!("{other:?}"),
        }
        match &m.expectations[1].node {
            Expect::Restrict { expr, value } => assert_eq!(expr, value),
            other => panic!("{other:?}"),
        }
        let e = load(&format!("{HEAD}lagrangian d(x) * d(y)\n")).unwrap_err();
        assert!(e.message.contains("wedge"));
    }
}
