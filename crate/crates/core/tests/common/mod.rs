#![allow(dead_code)]

use std::collections::BTreeMap;

use jetvar::eqmanifold::SolvedEquation;
use jetvar::forms::{exterior_derivative, horizontal_differential, DifferentialForm, Generator};
use jetvar::frontend::ast::{Expr, Located, Node};
use jetvar::frontend::model::Evaluator;
use jetvar::frontend::{fixtures, load, parse_expression, serialize, Model};
use jetvar::jetcalc::{apply_evolutionary, euler_derivative, total_derivative, EvolutionaryField, JetContext};
use jetvar::symexpr::{Atom, Expression, MultiIndex};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 200;
const SEED: [u8; 32] = *b"jetvar-fixed-property-test-seed!";

/// A runner with a fixed seed so failures reproduce exactly.
pub fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &SEED),
    )
}

pub fn model(name: &str) -> Model {
    load(fixtures::fixture(name).expect("fixture")).expect("fixture loads")
}

pub fn all_models() -> Vec<(&'static str, Model)> {
    fixtures::names().map(|n| (n, model(n))).collect()
}

pub fn scalar(m: &Model, src: &str) -> Expression {
    let e = parse_expression(src, m.ctx.independents()).expect("expression parses");
    Evaluator { ctx: &m.ctx }.scalar(&e).expect("scalar evaluates")
}

pub fn form(m: &Model, src: &str) -> DifferentialForm {
    let e = parse_expression(src, m.ctx.independents()).expect("form parses");
    Evaluator { ctx: &m.ctx }.form(&e).expect("form evaluates")
}

pub fn candidate_index(m: &Model, name: &str) -> usize {
    m.candidates
        .iter()
        .position(|c| c.name == name)
        .expect("candidate exists")
}

pub fn jet(k: usize, dirs: &[usize]) -> Expression {
    Expression::jet(k, MultiIndex::from_indices(dirs.iter().copied()))
}

// Random scalar expressions over a free jet space.

fn leaf(n: usize, m: usize, order: u32, opaque: bool) -> BoxedStrategy<Expression> {
    let jets = MultiIndex::all_up_to(n, order);
    let coord = prop_oneof![
        (0..n).prop_map(Expression::base),
        (0..m, proptest::sample::select(jets.clone())).prop_map(|(k, a)| Expression::jet(k, a)),
    ];
    let constant = (-3i64..=3).prop_map(Expression::int);
    if !opaque {
        return prop_oneof![constant, coord.clone(), coord].boxed();
    }
    let args: Vec<Atom> = (0..n)
        .map(Atom::Base)
        .chain((0..m).map(Atom::dependent))
        .chain((0..n).map(|i| Atom::jet(0, MultiIndex::unit(i))))
        .collect();
    let f = Expression::opaque("f", args.clone());
    let g = Expression::opaque("g", args[..n + 1].to_vec());
    prop_oneof![constant, coord.clone(), coord, Just(f), Just(g)].boxed()
}

/// Polynomials in base coordinates, jets up to `order` and, optionally, two opaque functions.
pub fn expression(n: usize, m: usize, order: u32, opaque: bool) -> BoxedStrategy<Expression> {
    leaf(n, m, order, opaque)
        .prop_recursive(3, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner).prop_map(|(a, b)| a - b),
            ]
        })
        .boxed()
}

fn generator(n: usize, m: usize, order: u32) -> BoxedStrategy<Generator> {
    let jets = MultiIndex::all_up_to(n, order);
    prop_oneof![
        (0..n).prop_map(Generator::Dx),
        (0..m, proptest::sample::select(jets)).prop_map(|(k, a)| Generator::Theta(k, a)),
    ]
    .boxed()
}

/// Sums of up to four terms of degree up to three.
pub fn differential_form(n: usize, m: usize) -> BoxedStrategy<DifferentialForm> {
    let term = (
        expression(n, m, 2, true),
        proptest::collection::vec(generator(n, m, 2), 0..=3),
    )
        .prop_map(|(c, gens)| DifferentialForm::term(c, gens));
    proptest::collection::vec(term, 1..=4)
        .prop_map(|ts| ts.into_iter().fold(DifferentialForm::zero(), |acc, t| acc + t))
        .boxed()
}

pub fn horizontal_form(n: usize, m: usize) -> BoxedStrategy<DifferentialForm> {
    let gens = proptest::collection::btree_set(0..n, 0..n);
    let term = (expression(n, m, 2, true), gens)
        .prop_map(|(c, set)| DifferentialForm::term(c, set.into_iter().map(Generator::Dx).collect()));
    proptest::collection::vec(term, 1..=3)
        .prop_map(|ts| ts.into_iter().fold(DifferentialForm::zero(), |acc, t| acc + t))
        .boxed()
}

pub fn field(n: usize, m: usize) -> BoxedStrategy<EvolutionaryField> {
    proptest::collection::vec(expression(n, m, 2, true), m)
        .prop_map(EvolutionaryField::new)
        .boxed()
}

/// Random polynomials in the internal coordinates of an equation.
pub fn internal_expression(eq: &SolvedEquation, order: u32) -> BoxedStrategy<Expression> {
    let n = eq.context().n();
    let coords: Vec<Expression> = eq
        .internal_coordinates(order)
        .into_iter()
        .map(Expression::atom)
        .chain((0..n).map(Expression::base))
        .collect();
    let leaf = prop_oneof![
        (-2i64..=2).prop_map(Expression::int),
        proptest::sample::select(coords.clone()),
        proptest::sample::select(coords),
    ];
    leaf.prop_recursive(2, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner).prop_map(|(a, b)| a * b),
        ]
    })
    .boxed()
}

/// Random polynomials in arbitrary jets, including principal ones.
pub fn ambient_expression(eq: &SolvedEquation, order: u32) -> BoxedStrategy<Expression> {
    let ctx = eq.context();
    expression(ctx.n(), ctx.m(), order, false)
}

fn check(cond: bool, what: &str) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(what.to_string()))
    }
}

// Property bodies shared by the proptest suite and the acceptance run.

pub fn total_derivatives_commute(e: &Expression, i: usize, j: usize) -> Result<(), TestCaseError> {
    let a = total_derivative(i, &total_derivative(j, e));
    let b = total_derivative(j, &total_derivative(i, e));
    check(a == b, "D_i D_j != D_j D_i")
}

pub fn d_squared(n: usize, w: &DifferentialForm) -> Result<(), TestCaseError> {
    check(
        exterior_derivative(n, &exterior_derivative(n, w)).is_zero(),
        "d(d w) != 0",
    )
}

pub fn dh_squared(n: usize, w: &DifferentialForm) -> Result<(), TestCaseError> {
    let once = horizontal_differential(n, w).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let twice = horizontal_differential(n, &once).map_err(|e| TestCaseError::fail(e.to_string()))?;
    check(twice.is_zero(), "d_h(d_h w) != 0")
}

pub fn euler_kills_divergence(ctx: &JetContext, f: &Expression, i: usize) -> Result<(), TestCaseError> {
    let div = total_derivative(i, f);
    for k in 0..ctx.m() {
        let e = euler_derivative(ctx, &div, k).map_err(|e| TestCaseError::fail(e.to_string()))?;
        check(e.is_zero(), "Euler derivative of a total divergence")?;
    }
    Ok(())
}

pub fn evolutionary_commutes(phi: &EvolutionaryField, f: &Expression, i: usize) -> Result<(), TestCaseError> {
    let a = apply_evolutionary(phi, &total_derivative(i, f));
    let b = total_derivative(i, &apply_evolutionary(phi, f));
    check(a == b, "E_phi D_i != D_i E_phi")
}

pub fn restrict_homomorphism(eq: &SolvedEquation, a: &Expression, b: &Expression) -> Result<(), TestCaseError> {
    let r = |e: &Expression| eq.restrict(e).map_err(|x| TestCaseError::fail(x.to_string()));
    let (ra, rb) = (r(a)?, r(b)?);
    check(r(&(a + b))? == &ra + &rb, "restrict(a + b)")?;
    check(r(&(a * b))? == &ra * &rb, "restrict(a b)")?;
    check(r(&ra)? == ra, "restrict is idempotent")?;
    check(r(&Expression::one())? == Expression::one(), "restrict(1)")
}

pub fn restricted_derivatives_commute(eq: &SolvedEquation, e: &Expression) -> Result<(), TestCaseError> {
    let n = eq.context().n();
    let d = |i: usize, e: &Expression| {
        eq.restricted_total_derivative(i, e)
            .map_err(|x| TestCaseError::fail(x.to_string()))
    };
    for i in 0..n {
        for j in i + 1..n {
            check(d(i, &d(j, e)?)? == d(j, &d(i, e)?)?, "restricted D_i D_j != D_j D_i")?;
        }
    }
    Ok(())
}

// Random syntax trees for the round-trip property.

fn located(node: Node) -> Expr {
    Located::new(node, 1, 1)
}

const NAMES: [&str; 4] = ["u", "v", "x", "phi"];
const DIRS: [&str; 2] = ["x", "y"];

pub fn syntax_tree() -> BoxedStrategy<Expr> {
    let dirs = proptest::collection::vec(proptest::sample::select(DIRS.to_vec()), 1..=3)
        .prop_map(|d| d.into_iter().map(String::from).collect::<Vec<_>>());
    let leaf = prop_oneof![
        (0u32..50).prop_map(|i| located(Node::Int(i.into()))),
        proptest::sample::select(NAMES.to_vec()).prop_map(|s| located(Node::Name(s.into()))),
        (proptest::sample::select(vec!["u", "v"]), dirs.clone()).prop_map(|(u, d)| located(Node::Jet(u.into(), d))),
        proptest::collection::vec(1usize..=3, 1..=2).prop_map(|p| located(Node::Partial("phi".into(), p))),
        proptest::sample::select(DIRS.to_vec()).prop_map(|x| located(Node::Dx(x.into()))),
        (
            proptest::sample::select(vec!["u", "v"]),
            proptest::collection::vec(proptest::sample::select(DIRS.to_vec()), 0..=2)
        )
            .prop_map(|(u, d)| located(Node::Theta(u.into(), d.into_iter().map(String::from).collect()))),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| located(Node::Neg(b(a)))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| located(Node::Add(b(x), b(y)))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| located(Node::Sub(b(x), b(y)))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| located(Node::Mul(b(x), b(y)))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| located(Node::Div(b(x), b(y)))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| located(Node::Wedge(b(x), b(y)))),
            (inner.clone(), -3i32..=3).prop_map(move |(x, k)| located(Node::Pow(b(x), k))),
            (proptest::sample::select(DIRS.to_vec()), inner)
                .prop_map(move |(d, x)| located(Node::TotalD(d.into(), b(x)))),
        ]
    })
    .boxed()
}

pub fn syntax_round_trip(e: &Expr) -> Result<(), TestCaseError> {
    let text = serialize::expr(e);
    let indep: Vec<String> = DIRS.iter().map(|s| s.to_string()).collect();
    let back = parse_expression(&text, &indep).map_err(|x| TestCaseError::fail(format!("{text}: {x}")))?;
    check(&back == e, &format!("round trip changed {text}"))
}

/// Values of a characteristic's prolongation on every generator of the frame, restricted to `E`.
pub fn candidate_from_characteristic(
    st: &jetvar::spatial::SpatialStructure<'_>,
    phi: &EvolutionaryField,
    max_order: u32,
) -> jetvar::spatial::SSymmetryCandidate {
    let eq = st.equation();
    let ctx = eq.context();
    let mut values = BTreeMap::new();
    for k in 0..ctx.m() {
        for m in 0..=max_order {
            if st.generator_kind(k, m).expect("generator kind").is_some() {
                let atom = st.generator_atom(k, m);
                let (_, alpha) = atom.as_jet().expect("jet");
                let v = eq.restrict(&phi.on_jet(k, alpha)).expect("restricts");
                values.insert(atom.clone(), v);
            }
        }
    }
    jetvar::spatial::SSymmetryCandidate { values }
}
