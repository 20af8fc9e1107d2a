//! Renders a [`Program`] back to source text that parses to an equal program.

use std::fmt::Write;

use super::ast::{Expectation, Expr, Node, Program, Statement};

fn jet(dep: &str, dirs: &[String]) -> String {
    if dirs.is_empty() {
        dep.to_string()
    } else {
        format!("{dep}[{}]", dirs.join(","))
    }
}

fn precedence(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) | Node::Wedge(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn child(e: &Expr, min: u8) -> String {
    let s = expr(e);
    if precedence(&e.node) < min {
        format!("({s})")
    } else {
        s
    }
}

fn binary(a: &Expr, op: &str, b: &Expr, p: u8) -> String {
    format!("{} {op} {}", child(a, p), child(b, p + 1))
}

pub fn expr(e: &Expr) -> String {
    match &e.node {
        Node::Int(n) => n.to_string(),
        Node::Name(s) => s.clone(),
        Node::Jet(d, dirs) => jet(d, dirs),
        Node::Partial(f, pos) => {
            let pos: Vec<String> = pos.iter().map(|p| p.to_string()).collect();
            format!("{f}{{{}}}", pos.join(","))
        }
        Node::Dx(x) => format!("d({x})"),
        Node::Theta(d, dirs) => format!("th({})", jet(d, dirs)),
        Node::TotalD(x, inner) => format!("D({x}, {})", expr(inner)),
        Node::Neg(a) => format!("-{}", child(a, 3)),
        Node::Add(a, b) => binary(a, "+", b, 1),
        Node::Sub(a, b) => binary(a, "-", b, 1),
        Node::Mul(a, b) => binary(a, "*", b, 2),
        Node::Div(a, b) => binary(a, "/", b, 2),
        Node::Wedge(a, b) => binary(a, "/\\", b, 2),
        Node::Pow(a, k) => format!("{}^{k}", child(a, 5)),
    }
}

fn expectation(x: &Expectation) -> String {
    match x {
        Expectation::Euler { dependent, value } => format!("euler {dependent} = {}", expr(value)),
        Expectation::Form { key, value } => format!("{} = {}", key.keyword(), expr(value)),
        Expectation::Gauge { candidate, outcome } => format!("gauge {candidate} = {}", outcome.keyword()),
        Expectation::Contract { candidate, value } => format!("contract {candidate} = {}", expr(value)),
        Expectation::Symmetry { characteristic, value } => format!("symmetry {characteristic} = {value}"),
        Expectation::Restrict { expr: e, value } => format!("restrict {} = {}", expr(e), expr(value)),
        Expectation::Prolong { jet, value } => format!("prolong {} = {}", expr(jet), expr(value)),
    }
}

pub fn statement(s: &Statement) -> String {
    match s {
        Statement::Independents(names) => format!("independents {}", names.join(" ")),
        Statement::Dependents(names) => format!("dependents {}", names.join(" ")),
        Statement::Opaque { name, args } => {
            let args: Vec<String> = args.iter().map(expr).collect();
            format!("opaque {name}({})", args.join(", "))
        }
        Statement::Equation { lhs, rhs } => format!("equation {} = {}", expr(lhs), expr(rhs)),
        Statement::Lagrangian(e) => format!("lagrangian {}", expr(e)),
        Statement::Spatial(x) => format!("spatial {x}"),
        Statement::Candidate { name, entries } => {
            let mut out = format!("candidate {name} {{\n");
            for (k, v) in entries {
                let _ = writeln!(out, "  {} -> {}", expr(k), expr(v));
            }
            out.push('}');
            out
        }
        Statement::Characteristic { name, entries } => {
            let mut out = format!("characteristic {name} {{\n");
            for (k, v) in entries {
                let _ = writeln!(out, "  {k} -> {}", expr(v));
            }
            out.push('}');
            out
        }
        Statement::Resolve { components, potential } => {
            format!("resolve {} = antisym_potential({potential})", components.join(" "))
        }
        Statement::Expect(x) => format!("expect {}", expectation(x)),
    }
}

pub fn program(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.statements {
        out.push_str(&statement(&s.node));
        out.push('\n');
    }
    out
}
