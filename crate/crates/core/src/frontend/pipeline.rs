//! Runs every stage a model supports and compares against its expectations.

use std::fmt::Write;

use crate::eqmanifold::EqError;
use crate::forms::DifferentialForm;
use crate::jetcalc::{euler_derivative, JetError};
use crate::spatial::{SpatialError, SpatialStructure};
use crate::symexpr::{ExprError, Expression};
use crate::variational::{
    internal_lagrangian, opaque_test_field, presymplectic_potential, verify_omega_identity, IbpOrder,
    InternalLagrangian, Lagrangian, VariationalError,
};
use crate::Error;

use super::ast::{FormKey, GaugeOutcome};
use super::model::{Expect, Model};
use super::report::{Report, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Jet order for integrability checks and spatial tower inspection.
    pub max_order: u32,
}

impl Default for Options {
    fn default() -> Self {
        Self { max_order: 4 }
    }
}

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    /// Only the gauge classification of candidates.
    Gauge,
}

/// Errors that mean "outside the supported fragment" rather than "wrong".
pub fn is_refusal(e: &Error) -> bool {
    fn eq(e: &EqError) -> bool {
        matches!(
            e,
            EqError::OpaqueArgument { .. }
                | EqError::Cycle { .. }
                | EqError::DepthExceeded(_)
                | EqError::Jet(JetError::OpaqueInEuler { .. })
                | EqError::Expr(ExprError::OpaqueArgument { .. })
        )
    }
    match e {
        Error::Jet(JetError::OpaqueInEuler { .. }) | Error::Expr(ExprError::OpaqueArgument { .. }) => true,
        Error::Equation(x) => eq(x),
        Error::Variational(VariationalError::Jet(JetError::OpaqueInEuler { .. })) => true,
        Error::Variational(VariationalError::Equation(x)) => eq(x),
        Error::Spatial(x) => match x {
            SpatialError::Unsupported(_)
            | SpatialError::UnresolvedConstraint { .. }
            | SpatialError::NotCovered { .. } => true,
            SpatialError::Equation(y) => eq(y),
            SpatialError::Expr(ExprError::OpaqueArgument { .. }) => true,
            _ => false,
        },
        _ => false,
    }
}

fn error_status(e: &Error) -> Status {
    if is_refusal(e) {
        Status::Refused
    } else {
        Status::Fail
    }
}

fn diff(expected: &str, actual: &str) -> String {
    format!("expected: {expected}\n  actual: {actual}")
}

struct Run<'m> {
    model: &'m Model,
    opts: Options,
    report: Report,
    rep: Option<Result<InternalLagrangian, Error>>,
}

impl<'m> Run<'m> {
    fn lagrangian(&self) -> Option<Lagrangian> {
        self.model.lagrangian.clone().map(Lagrangian::new)
    }

    fn text(&self, e: &Expression) -> String {
        self.model.ctx.text(e)
    }

    fn form_text(&self, w: &DifferentialForm) -> String {
        w.to_text(&self.model.ctx)
    }

    fn push_error(&mut self, name: &str, line: Option<usize>, e: &Error) {
        self.report.push(name, line, error_status(e), Some(e.to_string()));
    }

    fn compare_expr(&mut self, name: &str, line: usize, expected: &Expression, actual: &Expression) {
        if expected == actual {
            self.report
                .push(name, Some(line), Status::Pass, Some(self.text(actual)));
        } else {
            let d = diff(&self.text(expected), &self.text(actual));
            self.report.push(name, Some(line), Status::Fail, Some(d));
        }
    }

    fn compare_form(&mut self, name: &str, line: usize, expected: &DifferentialForm, actual: &DifferentialForm) {
        if expected == actual {
            self.report
                .push(name, Some(line), Status::Pass, Some(self.form_text(actual)));
        } else {
            let d = diff(&self.form_text(expected), &self.form_text(actual));
            self.report.push(name, Some(line), Status::Fail, Some(d));
        }
    }

    fn internal(&mut self) -> Result<&InternalLagrangian, Error> {
        if self.rep.is_none() {
            let computed = match self.lagrangian() {
                None => Err(Error::Variational(VariationalError::NotPresymplectic {
                    residual: "no lagrangian declared".into(),
                })),
                Some(lag) => {
                    internal_lagrangian(&self.model.equation, &lag, IbpOrder::LargestIndex).map_err(Error::from)
                }
            };
            self.rep = Some(computed);
        }
        match self.rep.as_ref().expect("computed") {
            Ok(r) => Ok(r),
            Err(e) => Err(e.clone()),
        }
    }

    fn structure(&self) -> Result<SpatialStructure<'m>, Error> {
        let frame = self
            .model
            .frame
            .ok_or_else(|| SpatialError::Unsupported("no spatial frame declared".into()))?;
        Ok(SpatialStructure::new(&self.model.equation, frame, self.opts.max_order)?)
    }

    fn gauge(&mut self, candidate: usize) -> Result<GaugeOutcome, Error> {
        let rep = self.internal()?.clone();
        let st = self.structure()?;
        let cand = &self.model.candidates[candidate].candidate;
        match st.is_gauge_symmetry(&rep, cand, self.model.resolution.as_ref()) {
            Ok(true) => Ok(GaugeOutcome::True),
            Ok(false) => Ok(GaugeOutcome::False),
            Err(SpatialError::ConstraintViolation { .. } | SpatialError::IllDefined { .. }) => {
                Ok(GaugeOutcome::Invalid)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// `L_X l` computed directly agrees with Cartan's formula, and `X ⌟ dl` is trivial.
    fn lie_derivative_check(&mut self, candidate: usize) -> Result<bool, Error> {
        let rep = self.internal()?.clone();
        let st = self.structure()?;
        let ext = st.extend_s_symmetry(&self.model.candidates[candidate].candidate)?;
        if !ext.verify_cartan_formula(&rep.l)? {
            return Ok(false);
        }
        let frame = st.frame();
        let contracted = frame.reduce_mod_s2(&ext.contract(&rep.dl)?);
        Ok(st.is_gauge_trivial(&contracted, self.model.resolution.as_ref())?)
    }

    fn contraction(&mut self, candidate: usize) -> Result<DifferentialForm, Error> {
        let rep = self.internal()?.clone();
        let st = self.structure()?;
        let ext = st.extend_s_symmetry(&self.model.candidates[candidate].candidate)?;
        let frame = st.frame();
        Ok(frame.reduce_mod_s2(&ext.contract(&frame.s_presymplectic(&rep.dl))?))
    }

    fn global_checks(&mut self) {
        let m = self.model;
        if m.has_equation() {
            match m.equation.check_integrability(self.opts.max_order) {
                Ok(()) => self.report.push(
                    format!("integrability to order {}", self.opts.max_order),
                    None,
                    Status::Pass,
                    None,
                ),
                Err(e) => self.push_error("integrability", None, &e.into()),
            }
        }
        let Some(lag) = self.lagrangian() else { return };
        let phi = opaque_test_field(&m.ctx, 2);
        let identity = presymplectic_potential(&m.ctx, &lag, IbpOrder::LargestIndex)
            .map_err(Error::from)
            .and_then(|r| verify_omega_identity(&m.ctx, &lag, &r.omega, &phi).map_err(Error::from));
        match identity {
            Ok(true) => self.report.push("omega_L identity", None, Status::Pass, None),
            Ok(false) => self.report.push(
                "omega_L identity",
                None,
                Status::Fail,
                Some("L_E(L) - <E(L), phi> - d_h(E ⌟ omega_L) does not vanish".into()),
            ),
            Err(e) => self.push_error("omega_L identity", None, &e),
        }
        if m.has_equation() {
            match self.internal() {
                Ok(_) => self.report.push("internal lagrangian", None, Status::Pass, None),
                Err(e) => self.push_error("internal lagrangian", None, &e),
            }
        }
    }

    fn expectations(&mut self, scope: Scope) {
        let m = self.model;
        for x in &m.expectations {
            let line = x.line;
            match &x.node {
                Expect::Gauge { candidate, outcome } => {
                    let cname = &m.candidates[*candidate].name;
                    let name = format!("gauge {cname}");
                    match self.gauge(*candidate) {
                        Ok(got) if got == *outcome => {
                            self.report
                                .push(name, Some(line), Status::Pass, Some(got.keyword().into()));
                            if got == GaugeOutcome::True {
                                let cname = format!("lie derivative {cname}");
                                match self.lie_derivative_check(*candidate) {
                                    Ok(true) => self.report.push(cname, Some(line), Status::Pass, None),
                                    Ok(false) => self.report.push(
                                        cname,
                                        Some(line),
                                        Status::Fail,
                                        Some("L_X l is not trivial modulo S² and exact forms".into()),
                                    ),
                                    Err(e) => self.push_error(&cname, Some(line), &e),
                                }
                            }
                        }
                        Ok(got) => {
                            let d = diff(outcome.keyword(), got.keyword());
                            self.report.push(name, Some(line), Status::Fail, Some(d));
                        }
                        Err(e) => self.push_error(&name, Some(line), &e),
                    }
                }
                _ if scope == Scope::Gauge => {}
                Expect::Euler { dependent, value } => {
                    let name = format!("euler {}", m.ctx.dependents()[*dependent]);
                    let Some(lag) = &m.lagrangian else {
                        self.report
                            .push(name, Some(line), Status::Fail, Some("no lagrangian declared".into()));
                        continue;
                    };
                    match euler_derivative(&m.ctx, lag, *dependent) {
                        Ok(actual) => self.compare_expr(&name, line, value, &actual),
                        Err(e) => self.push_error(&name, Some(line), &e.into()),
                    }
                }
                Expect::Form { key, value } => {
                    let name = key.keyword();
                    let actual = match key {
                        FormKey::OmegaL => match self.lagrangian() {
                            Some(lag) => presymplectic_potential(&m.ctx, &lag, IbpOrder::LargestIndex)
                                .map(|r| r.omega)
                                .map_err(Error::from),
                            None => Err(VariationalError::NotPresymplectic {
                                residual: "no lagrangian declared".into(),
                            }
                            .into()),
                        },
                        FormKey::L => self.internal().map(|r| r.l.clone()),
                        FormKey::Dl => self.internal().map(|r| r.dl.clone()),
                        FormKey::Omega => self.internal().map(|r| r.dl.clone()).and_then(|dl| {
                            let st = self.structure()?;
                            Ok(st.frame().s_presymplectic(&dl))
                        }),
                    };
                    match actual {
                        Ok(a) => self.compare_form(name, line, value, &a),
                        Err(e) => self.push_error(name, Some(line), &e),
                    }
                }
                Expect::Contract { candidate, value } => {
                    let name = format!("contract {}", m.candidates[*candidate].name);
                    match self.contraction(*candidate) {
                        Ok(a) => self.compare_form(&name, line, value, &a),
                        Err(e) => self.push_error(&name, Some(line), &e),
                    }
                }
                Expect::Symmetry { characteristic, value } => {
                    let c = &m.characteristics[*characteristic];
                    let name = format!("symmetry {}", c.name);
                    match m.equation.is_symmetry(&c.field) {
                        Ok(got) if got == *value => self.report.push(name, Some(line), Status::Pass, None),
                        Ok(got) => self.report.push(
                            name,
                            Some(line),
                            Status::Fail,
                            Some(diff(&value.to_string(), &got.to_string())),
                        ),
                        Err(e) => self.push_error(&name, Some(line), &e.into()),
                    }
                }
                Expect::Restrict { expr, value } => {
                    let name = format!("restrict {}", self.text(expr));
                    match m.equation.restrict(expr) {
                        Ok(a) => self.compare_expr(&name, line, value, &a),
                        Err(e) => self.push_error(&name, Some(line), &e.into()),
                    }
                }
                Expect::Prolong { jet, value } => {
                    let name = format!("prolong {}", self.text(&Expression::atom(jet.clone())));
                    if !m.equation.is_principal(jet) {
                        self.report.push(
                            name,
                            Some(line),
                            Status::Fail,
                            Some("not a principal coordinate".into()),
                        );
                        continue;
                    }
                    match m.equation.restrict(&Expression::atom(jet.clone())) {
                        Ok(a) => self.compare_expr(&name, line, value, &a),
                        Err(e) => self.push_error(&name, Some(line), &e.into()),
                    }
                }
            }
        }
    }
}

/// Runs all checks of `model` and its expectations, in source order.
pub fn run_check(source: &str, model: &Model, opts: Options) -> Report {
    run_scoped(source, model, opts, Scope::All)
}

pub fn run_scoped(source: &str, model: &Model, opts: Options, scope: Scope) -> Report {
    let mut run = Run {
        model,
        opts,
        report: Report::new(source),
        rep: None,
    };
    if scope == Scope::All {
        run.global_checks();
    }
    run.expectations(scope);
    run.report
}

/// `δλ/δu^k` for every dependent.
pub fn euler_text(model: &Model) -> Result<String, Error> {
    let lag = model
        .lagrangian
        .as_ref()
        .ok_or_else(|| VariationalError::NotPresymplectic {
            residual: "no lagrangian declared".into(),
        })?;
    let mut out = String::new();
    for (k, name) in model.ctx.dependents().iter().enumerate() {
        let e = euler_derivative(&model.ctx, lag, k)?;
        let _ = writeln!(out, "euler {name} = {}", model.ctx.text(&e));
    }
    Ok(out)
}

/// Every principal coordinate up to `order` with its normal form.
pub fn prolong_text(model: &Model, order: u32) -> Result<String, Error> {
    let mut out = String::new();
    for c in model.ctx.jet_coordinates(order) {
        if model.equation.is_principal(&c) {
            let e = Expression::atom(c.clone());
            let nf = model.equation.restrict(&e)?;
            let _ = writeln!(out, "{} = {}", model.ctx.text(&e), model.ctx.text(&nf));
        }
    }
    Ok(out)
}

fn lagrangian_of(model: &Model) -> Result<Lagrangian, Error> {
    model.lagrangian.clone().map(Lagrangian::new).ok_or_else(|| {
        VariationalError::NotPresymplectic {
            residual: "no lagrangian declared".into(),
        }
        .into()
    })
}

pub fn internal_lagrangian_text(model: &Model) -> Result<String, Error> {
    let rep = internal_lagrangian(&model.equation, &lagrangian_of(model)?, IbpOrder::LargestIndex)?;
    Ok(format!(
        "omega_L = {}\nl = {}\n",
        rep.omega_l.to_text(&model.ctx),
        rep.l.to_text(&model.ctx)
    ))
}

pub fn presymplectic_text(model: &Model) -> Result<String, Error> {
    let rep = internal_lagrangian(&model.equation, &lagrangian_of(model)?, IbpOrder::LargestIndex)?;
    let mut out = format!("dl = {}\n", rep.dl.to_text(&model.ctx));
    if let Some(frame) = model.frame {
        let _ = writeln!(out, "omega = {}", frame.s_presymplectic(&rep.dl).to_text(&model.ctx));
    }
    Ok(out)
}
