//! Spatial frames, S-symmetries and the triviality test for gauge symmetries.
//!
//! A frame singles out a temporal direction `a`; the remaining directions are spatial.
//! Internal coordinates are organized as spatial derivatives `D̄_γ u^k_{m·a}` of
//! generators `u^k_{m·a}`, each classified by how its spatial tower looks on the
//! equation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use thiserror::Error;

use crate::eqmanifold::{EqError, SolvedEquation};
use crate::forms::{self, contract, DifferentialForm, FormError, Generator};
use crate::jetcalc::{JetContext, JetError};
use crate::symexpr::{jet_text, Atom, ExprError, Expression, MultiIndex};
use crate::variational::InternalLagrangian;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpatialError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("generator `{generator}` has a spatial constraint and no resolution was supplied")]
    UnresolvedConstraint { generator: String },
    #[error("constraint violated at `{coordinate}`: residual {residual}")]
    ConstraintViolation { coordinate: String, residual: String },
    #[error("candidate is ill-defined at `{coordinate}`: {reason}")]
    IllDefined { coordinate: String, reason: String },
    #[error("internal coordinate `{coordinate}` is not a spatial derivative of a generator")]
    NotCovered { coordinate: String },
    #[error("invalid constraint resolution: {0}")]
    Resolution(String),
    #[error(transparent)]
    Equation(#[from] EqError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A coordinate frame with temporal direction `temporal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialFrame {
    pub temporal: usize,
}

impl SpatialFrame {
    pub fn new(temporal: usize) -> Self {
        Self { temporal }
    }

    pub fn spatial_directions(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| i != self.temporal).collect()
    }

    /// Number of factors in `{θ, dx^a}`.
    pub fn s_degree(&self, gens: &[Generator]) -> usize {
        gens.iter()
            .filter(|g| match g {
                Generator::Theta(..) => true,
                Generator::Dx(i) => *i == self.temporal,
            })
            .count()
    }

    /// Terms of S-degree at least `p`.
    pub fn s_degree_filter(&self, w: &DifferentialForm, p: usize) -> DifferentialForm {
        w.filter_terms(|g| self.s_degree(g) >= p)
    }

    /// Terms of S-degree below `p`.
    pub fn s_truncate(&self, w: &DifferentialForm, p: usize) -> DifferentialForm {
        w.filter_terms(|g| self.s_degree(g) < p)
    }

    pub fn reduce_mod_s2(&self, w: &DifferentialForm) -> DifferentialForm {
        self.s_truncate(w, 2)
    }

    /// The S-presymplectic part of `d(l)`: everything modulo `S³`.
    pub fn s_presymplectic(&self, dl: &DifferentialForm) -> DifferentialForm {
        self.s_truncate(dl, 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorKind {
    /// Every spatial derivative is itself an internal coordinate.
    Free,
    /// Every first spatial derivative vanishes on the equation.
    Parameter,
    /// Some spatial derivative is rewritten by a nontrivial rule.
    Constrained,
}

/// Where a coordinate sits in the spatial picture.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Base,
    /// Spatial derivative `γ` of a free generator (or of a potential after resolution).
    Tower {
        var: (usize, u32),
        gamma: MultiIndex,
    },
    Parameter((usize, u32)),
}

/// The generator decomposition of an equation in a given frame.
#[derive(Debug)]
pub struct SpatialStructure<'a> {
    eq: &'a SolvedEquation,
    frame: SpatialFrame,
    max_order: u32,
    kinds: Mutex<HashMap<(usize, u32), Option<GeneratorKind>>>,
}

impl<'a> SpatialStructure<'a> {
    /// `max_order` bounds the spatial towers inspected when classifying generators.
    pub fn new(eq: &'a SolvedEquation, frame: SpatialFrame, max_order: u32) -> Result<Self, SpatialError> {
        let n = eq.context().n();
        if frame.temporal >= n {
            return Err(JetError::OutOfRange {
                what: "independent",
                index: frame.temporal,
            }
            .into());
        }
        if n < 2 {
            return Err(SpatialError::Unsupported(
                "a frame needs at least one spatial direction".into(),
            ));
        }
        Ok(Self {
            eq,
            frame,
            max_order: max_order.max(1),
            kinds: Mutex::new(HashMap::new()),
        })
    }

    pub fn equation(&self) -> &SolvedEquation {
        self.eq
    }

    pub fn frame(&self) -> SpatialFrame {
        self.frame
    }

    fn ctx(&self) -> &JetContext {
        self.eq.context()
    }

    fn n(&self) -> usize {
        self.ctx().n()
    }

    fn temporal_index(&self, m: u32) -> MultiIndex {
        let mut counts = vec![0; self.n()];
        counts[self.frame.temporal] = m;
        MultiIndex::from_counts(counts)
    }

    pub fn generator_atom(&self, k: usize, m: u32) -> Atom {
        Atom::jet(k, self.temporal_index(m))
    }

    /// Spatial multi-indices with `1 ≤ |γ| ≤ order`.
    fn spatial_indices(&self, order: u32) -> Vec<MultiIndex> {
        MultiIndex::all_up_to(self.n(), order)
            .into_iter()
            .filter(|g| !g.is_zero() && g.count(self.frame.temporal) == 0)
            .collect()
    }

    /// `u^k_β = D̄_γ u^k_{m·a}`.
    fn decompose(&self, beta: &MultiIndex) -> (u32, MultiIndex) {
        (
            beta.count(self.frame.temporal),
            beta.without_direction(self.frame.temporal),
        )
    }

    /// Kind of the generator `u^k_{m·a}`, or `None` when it is principal.
    pub fn generator_kind(&self, k: usize, m: u32) -> Result<Option<GeneratorKind>, SpatialError> {
        if let Some(kind) = self.kinds.lock().expect("kind cache poisoned").get(&(k, m)) {
            return Ok(*kind);
        }
        let base = self.temporal_index(m);
        let kind = if self.eq.is_principal(&Atom::jet(k, base.clone())) {
            None
        } else if self
            .spatial_indices(self.max_order)
            .iter()
            .all(|g| !self.eq.is_principal(&Atom::jet(k, base.add(g))))
        {
            Some(GeneratorKind::Free)
        } else {
            let mut parameter = true;
            for s in self.frame.spatial_directions(self.n()) {
                match self.eq.normal_form(k, &base.with_index(s))? {
                    Some(v) if v.is_zero() => {}
                    _ => {
                        parameter = false;
                        break;
                    }
                }
            }
            Some(if parameter {
                GeneratorKind::Parameter
            } else {
                GeneratorKind::Constrained
            })
        };
        self.kinds.lock().expect("kind cache poisoned").insert((k, m), kind);
        Ok(kind)
    }

    fn text(&self, a: &Atom) -> String {
        match a {
            Atom::Jet(k, alpha) if *k < self.ctx().m() => jet_text(*k, alpha, self.ctx()),
            _ => format!("{a:?}"),
        }
    }

    fn generator_text(&self, k: usize, m: u32) -> String {
        self.text(&self.generator_atom(k, m))
    }

    /// Internal coordinate `c` as `D̄_γ` of its generator; fails when the generator is principal.
    fn generator_of(&self, k: usize, beta: &MultiIndex) -> Result<(u32, MultiIndex, GeneratorKind), SpatialError> {
        let (m, gamma) = self.decompose(beta);
        match self.generator_kind(k, m)? {
            Some(kind) => Ok((m, gamma, kind)),
            None => Err(SpatialError::NotCovered {
                coordinate: jet_text(k, beta, self.ctx()),
            }),
        }
    }

    /// `D̄_s` restricted to spatial directions.
    fn spatial_derivative(&self, s: usize, e: &Expression) -> Result<Expression, SpatialError> {
        Ok(self.eq.restricted_total_derivative(s, e)?)
    }

    fn spatial_derivative_multi(&self, gamma: &MultiIndex, e: &Expression) -> Result<Expression, SpatialError> {
        Ok(self.eq.restricted_total_derivative_multi(gamma, e)?)
    }

    /// Generators `u^k_{m·a}` with `m ≤ max_order` of the given kinds.
    fn generators_up_to(&self, kinds: &[GeneratorKind]) -> Result<Vec<(usize, u32)>, SpatialError> {
        let mut out = Vec::new();
        for k in 0..self.ctx().m() {
            for m in 0..=self.max_order {
                match self.generator_kind(k, m)? {
                    Some(kind) if kinds.contains(&kind) => out.push((k, m)),
                    Some(_) => {}
                    None => break,
                }
            }
        }
        Ok(out)
    }

    /// Extends a candidate given on generators to all internal coordinates by commuting
    /// with the spatial total derivatives, checking it on every spatial constraint.
    pub fn extend_s_symmetry(&self, cand: &SSymmetryCandidate) -> Result<ExtendedSymmetry<'_, 'a>, SpatialError> {
        let mut values = BTreeMap::new();
        for (atom, value) in &cand.values {
            let ill = |reason: &str| SpatialError::IllDefined {
                coordinate: self.text(atom),
                reason: reason.into(),
            };
            let Atom::Jet(k, beta) = atom else {
                return Err(ill("not a jet coordinate"));
            };
            self.ctx().check_atom(atom)?;
            let (m, gamma) = self.decompose(beta);
            if !gamma.is_zero() {
                return Err(ill("spatial derivatives are determined by the generator value"));
            }
            if self.generator_kind(*k, m)?.is_none() {
                return Err(ill("principal coordinate"));
            }
            self.ctx().validate(value)?;
            let v = self.eq.restrict(value)?;
            values.insert((*k, m), v);
        }
        let ext = ExtendedSymmetry {
            structure: self,
            values,
            cache: Mutex::new(HashMap::new()),
        };
        ext.verify_constraints()?;
        Ok(ext)
    }

    /// Decides whether a degree-`n` form on the equation is trivial modulo `S²Λⁿ` and
    /// `d(SΛ^{n−1})`.
    pub fn is_gauge_trivial(
        &self,
        w: &DifferentialForm,
        resolution: Option<&ConstraintResolution>,
    ) -> Result<bool, SpatialError> {
        let n = self.n();
        w.require_degree(n)?;
        let resolved = resolution.map(|r| r.prepare(self)).transpose()?;
        let reduced = self.frame.reduce_mod_s2(w);
        let vol_s = DifferentialForm::volume_interior(n, self.frame.temporal);

        let mut horizontal = Expression::zero();
        let mut thetas: Vec<(Atom, Expression)> = Vec::new();
        for (gens, c) in reduced.terms() {
            let theta: Vec<&Generator> = gens.iter().filter(|g| g.is_theta()).collect();
            match theta.as_slice() {
                [] => horizontal += c,
                [g] => {
                    // normalize to b θ̄_c ∧ (∂_a ⌟ vol)
                    let reference = DifferentialForm::generator((*g).clone()).wedge(&vol_s);
                    let sign = reference.coefficient(gens);
                    thetas.push((g.jet_atom().expect("theta generator"), c * &sign));
                }
                _ => unreachable!("S-degree below two"),
            }
        }

        let (horizontal, thetas) = match &resolved {
            Some(r) => {
                let mut expanded = Vec::new();
                for (atom, b) in thetas {
                    let b = r.substitute(&b)?;
                    for (a2, sign) in r.theta_image(&atom)? {
                        expanded.push((a2, &b * &sign));
                    }
                }
                (r.substitute(&horizontal)?, expanded)
            }
            None => (horizontal, thetas),
        };

        let mut coeffs: BTreeMap<Slot, Expression> = BTreeMap::new();
        for (atom, b) in thetas {
            match self.slot(&atom, resolved.as_ref())? {
                Slot::Tower { var, gamma } => {
                    let mut moved = self.spatial_derivative_multi(&gamma, &b)?;
                    if gamma.order() % 2 == 1 {
                        moved = -moved;
                    }
                    *coeffs
                        .entry(Slot::Tower {
                            var,
                            gamma: MultiIndex::zero(),
                        })
                        .or_default() += moved;
                }
                slot @ Slot::Parameter(_) => *coeffs.entry(slot).or_default() += b,
                Slot::Base => unreachable!("theta of a jet coordinate"),
            }
        }
        for (slot, b) in &coeffs {
            let ok = match slot {
                Slot::Tower { .. } => b.is_zero(),
                _ => self.is_spatial_divergence(b, resolved.as_ref())?,
            };
            if !ok {
                return Ok(false);
            }
        }
        self.is_spatial_divergence(&horizontal, resolved.as_ref())
    }

    fn slot(&self, a: &Atom, resolved: Option<&Resolved>) -> Result<Slot, SpatialError> {
        let Atom::Jet(k, beta) = a else {
            return Ok(Slot::Base);
        };
        if let Some(r) = resolved {
            if *k >= self.ctx().m() {
                return Ok(Slot::Tower {
                    var: (*k, 0),
                    gamma: beta.clone(),
                });
            }
            if r.component_position(*k).is_some() {
                return Err(SpatialError::Unsupported(format!(
                    "`{}` survived the constraint resolution",
                    self.text(a)
                )));
            }
        }
        if self.eq.is_principal(a) {
            return Err(SpatialError::Unsupported(format!(
                "`{}` is principal; forms on the equation use internal coordinates",
                self.text(a)
            )));
        }
        let (m, gamma, kind) = self.generator_of(*k, beta)?;
        match kind {
            GeneratorKind::Free => Ok(Slot::Tower { var: (*k, m), gamma }),
            GeneratorKind::Parameter => Ok(Slot::Parameter((*k, m))),
            GeneratorKind::Constrained => Err(SpatialError::UnresolvedConstraint {
                generator: self.generator_text(*k, m),
            }),
        }
    }

    /// `f = Σ_s D̄_s(ε^s)` over the spatial directions, decided by the spatial Euler
    /// operator of every free variable with parameters held constant.
    fn is_spatial_divergence(&self, f: &Expression, resolved: Option<&Resolved>) -> Result<bool, SpatialError> {
        if f.is_zero() {
            return Ok(true);
        }
        let mut towers: BTreeMap<(usize, u32), Vec<(Atom, MultiIndex)>> = BTreeMap::new();
        for atom in f.atoms() {
            if let Some(call) = atom.call() {
                for arg in &call.args {
                    if matches!(self.slot(arg, resolved)?, Slot::Tower { .. }) {
                        return Err(SpatialError::Unsupported(format!(
                            "opaque function `{}` depends on the spatial jet `{}`",
                            call.name,
                            self.text(arg)
                        )));
                    }
                }
                continue;
            }
            if let Slot::Tower { var, gamma } = self.slot(&atom, resolved)? {
                towers.entry(var).or_default().push((atom, gamma));
            }
        }
        for jets in towers.values() {
            let mut euler = Expression::zero();
            for (atom, gamma) in jets {
                let mut term = self.spatial_derivative_multi(gamma, &f.partial(atom))?;
                if gamma.order() % 2 == 1 {
                    term = -term;
                }
                euler += term;
            }
            if !euler.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `D̄_i χ_j − D̄_j χ_i = 0` for all spatial `i, j`; `chi` is indexed by spatial position.
    pub fn is_spatial_gradient(&self, chi: &[Expression]) -> Result<bool, SpatialError> {
        let dirs = self.frame.spatial_directions(self.n());
        if chi.len() != dirs.len() {
            return Err(EqError::Arity {
                expected: dirs.len(),
                got: chi.len(),
            }
            .into());
        }
        for (p, &i) in dirs.iter().enumerate() {
            for (q, &j) in dirs.iter().enumerate().skip(p + 1) {
                let curl = &self.spatial_derivative(i, &chi[q])? - &self.spatial_derivative(j, &chi[p])?;
                if !curl.is_zero() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Contracts the extended candidate into the S-presymplectic form and tests triviality.
    pub fn is_gauge_symmetry(
        &self,
        rep: &InternalLagrangian,
        cand: &SSymmetryCandidate,
        resolution: Option<&ConstraintResolution>,
    ) -> Result<bool, SpatialError> {
        let ext = self.extend_s_symmetry(cand)?;
        let contracted = ext.contract(&self.frame.s_presymplectic(&rep.dl))?;
        self.is_gauge_trivial(&self.frame.reduce_mod_s2(&contracted), resolution)
    }
}

/// Values of a would-be S-symmetry on generator coordinates; unlisted generators get 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SSymmetryCandidate {
    pub values: BTreeMap<Atom, Expression>,
}

impl SSymmetryCandidate {
    pub fn new(values: impl IntoIterator<Item = (Atom, Expression)>) -> Self {
        Self {
            values: values.into_iter().collect(),
        }
    }
}

/// A candidate extended to every internal coordinate.
#[derive(Debug)]
pub struct ExtendedSymmetry<'s, 'a> {
    structure: &'s SpatialStructure<'a>,
    values: BTreeMap<(usize, u32), Expression>,
    cache: Mutex<HashMap<(usize, MultiIndex), Expression>>,
}

impl ExtendedSymmetry<'_, '_> {
    /// `X(c)` for an internal coordinate `c`.
    pub fn value(&self, c: &Atom) -> Result<Expression, SpatialError> {
        let Atom::Jet(k, beta) = c else {
            return Ok(Expression::zero());
        };
        let st = self.structure;
        if st.eq.is_principal(c) {
            return Err(SpatialError::IllDefined {
                coordinate: st.text(c),
                reason: "principal coordinate".into(),
            });
        }
        let (m, gamma, _) = st.generator_of(*k, beta)?;
        self.tower_value(*k, m, &gamma)
    }

    fn tower_value(&self, k: usize, m: u32, gamma: &MultiIndex) -> Result<Expression, SpatialError> {
        let st = self.structure;
        let key = (k, st.temporal_index(m).add(gamma));
        if let Some(v) = self.cache.lock().expect("value cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = match gamma.max_index() {
            None => self.values.get(&(k, m)).cloned().unwrap_or_default(),
            Some(s) => {
                let lower = gamma.without_index(s).expect("direction present");
                st.spatial_derivative(s, &self.tower_value(k, m, &lower)?)?
            }
        };
        self.cache.lock().expect("value cache poisoned").insert(key, v.clone());
        Ok(v)
    }

    /// `X` as a derivation on functions of internal coordinates.
    pub fn apply(&self, f: &Expression) -> Result<Expression, SpatialError> {
        let mut values = HashMap::new();
        for c in f.coordinates() {
            let v = self.value(&c)?;
            values.insert(c, v);
        }
        Ok(f.derive_with(&mut |a| values.get(a).cloned().unwrap_or_default()))
    }

    /// `X ⌟ ω` with `X ⌟ dx = 0` and `X ⌟ θ̄_c = X(c)`.
    pub fn contract(&self, w: &DifferentialForm) -> Result<DifferentialForm, SpatialError> {
        let mut values = HashMap::new();
        for g in w.generators() {
            if let Some(a) = g.jet_atom() {
                let v = self.value(&a)?;
                values.insert(g, v);
            }
        }
        Ok(contract(w, &mut |g| values.get(g).cloned().unwrap_or_default()))
    }

    /// `D̄_γ X(g) = X(nf(u^k_{m·a+γ}))` wherever a spatial derivative of a generator is principal.
    fn verify_constraints(&self) -> Result<(), SpatialError> {
        let st = self.structure;
        let depth = st.max_order.min(2);
        for (k, m) in st.generators_up_to(&[GeneratorKind::Parameter, GeneratorKind::Constrained])? {
            let base = st.temporal_index(m);
            for gamma in st.spatial_indices(depth) {
                let target = base.add(&gamma);
                let Some(nf) = st.eq.normal_form(k, &target)? else {
                    continue;
                };
                let lhs = self.tower_value(k, m, &gamma)?;
                let rhs = self.apply(&nf)?;
                let residual = &lhs - &rhs;
                if !residual.is_zero() {
                    return Err(SpatialError::ConstraintViolation {
                        coordinate: jet_text(k, &target, st.ctx()),
                        residual: st.ctx().text(&residual),
                    });
                }
            }
        }
        Ok(())
    }

    /// `L_X ω` on the equation computed directly: `L_X f = X(f)`, `L_X dx = 0` and
    /// `L_X θ̄_c = Σ_j [D̄_j X(c) − X(D̄_j c)] dx^j + Σ ∂X(c)/∂c' θ̄_{c'}`.
    pub fn lie_derivative(&self, w: &DifferentialForm) -> Result<DifferentialForm, SpatialError> {
        let st = self.structure;
        let n = st.n();
        let mut images: HashMap<Generator, DifferentialForm> = HashMap::new();
        for g in w.generators() {
            let Some(c) = g.jet_atom() else { continue };
            let xc = self.value(&c)?;
            let mut img = st.eq.restrict_form(&forms::vertical_differential(&xc))?;
            for j in 0..n {
                let dc = st.eq.restricted_total_derivative(j, &Expression::atom(c.clone()))?;
                let coef = &st.spatial_derivative(j, &xc)? - &self.apply(&dc)?;
                img += DifferentialForm::dx(j).scale(&coef);
            }
            images.insert(g, img);
        }
        let mut out = DifferentialForm::zero();
        for (gens, c) in w.terms() {
            let frame_form = DifferentialForm::term(Expression::one(), gens.clone());
            out += frame_form.scale(&self.apply(c)?);
            for (i, g) in gens.iter().enumerate() {
                let Some(img) = images.get(g) else { continue };
                let mut acc = DifferentialForm::scalar(c.clone());
                for (p, h) in gens.iter().enumerate() {
                    let factor = if p == i {
                        img.clone()
                    } else {
                        DifferentialForm::generator(h.clone())
                    };
                    acc = acc.wedge(&factor);
                }
                out += acc;
            }
        }
        Ok(out)
    }

    /// Checks `L_X l = X ⌟ d(l) + d(X ⌟ l)` on the equation, with the left side
    /// computed by [`Self::lie_derivative`].
    pub fn verify_cartan_formula(&self, l: &DifferentialForm) -> Result<bool, SpatialError> {
        let eq = self.structure.eq;
        let direct = self.lie_derivative(l)?;
        let cartan = self.contract(&eq.exterior_derivative(l)?)? + eq.exterior_derivative(&self.contract(l)?)?;
        Ok((&direct - &cartan).is_zero())
    }
}

/// Replaces a divergence-free vector `g^i` (one dependent per spatial direction, in
/// order) by `g^i = Σ_j D_j r^{ij}` with an antisymmetric potential `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintResolution {
    pub components: Vec<usize>,
    pub potential: String,
}

/// A resolution bound to a structure: potential variables are extra dependents.
#[derive(Debug, Clone)]
struct Resolved {
    ctx: JetContext,
    dirs: Vec<usize>,
    components: Vec<usize>,
    /// `(p, q)` with `p < q` spatial positions to the dependent index of `r^{pq}`.
    pairs: BTreeMap<(usize, usize), usize>,
}

impl ConstraintResolution {
    pub fn new(components: Vec<usize>, potential: impl Into<String>) -> Self {
        Self {
            components,
            potential: potential.into(),
        }
    }

    /// Names of the potential components `r^{pq}`, `p < q`, with 1-based spatial positions.
    pub fn potential_names(&self, count: usize) -> Vec<String> {
        let mut out = Vec::new();
        for p in 0..count {
            for q in p + 1..count {
                out.push(format!("{}{}{}", self.potential, p + 1, q + 1));
            }
        }
        out
    }

    fn prepare(&self, st: &SpatialStructure<'_>) -> Result<Resolved, SpatialError> {
        let ctx = st.ctx();
        let dirs = st.frame.spatial_directions(ctx.n());
        if self.components.len() != dirs.len() {
            return Err(SpatialError::Resolution(format!(
                "expected {} components, one per spatial direction, got {}",
                dirs.len(),
                self.components.len()
            )));
        }
        let distinct: BTreeSet<usize> = self.components.iter().copied().collect();
        if distinct.len() != self.components.len() || self.components.iter().any(|&k| k >= ctx.m()) {
            return Err(SpatialError::Resolution(
                "components must be distinct dependents".into(),
            ));
        }
        let names = self.potential_names(dirs.len());
        let ext = ctx.with_extra_dependents(&names)?;
        let mut pairs = BTreeMap::new();
        let mut next = ctx.m();
        for p in 0..dirs.len() {
            for q in p + 1..dirs.len() {
                pairs.insert((p, q), next);
                next += 1;
            }
        }
        let r = Resolved {
            ctx: ext,
            dirs,
            components: self.components.clone(),
            pairs,
        };
        r.verify(st)?;
        Ok(r)
    }
}

impl Resolved {
    fn component_position(&self, k: usize) -> Option<usize> {
        self.components.iter().position(|&c| c == k)
    }

    /// `g^p_β ↦ Σ_q ± r^{pq}_{β+q}` as signed potential atoms.
    fn image(&self, k: usize, beta: &MultiIndex, temporal: usize) -> Result<Vec<(Atom, Expression)>, SpatialError> {
        let p = self.component_position(k).expect("component");
        if beta.count(temporal) != 0 {
            return Err(SpatialError::Unsupported(format!(
                "temporal derivative `{}` of a resolved component",
                jet_text(k, beta, &self.ctx)
            )));
        }
        let mut out = Vec::new();
        for (q, &dir) in self.dirs.iter().enumerate() {
            let (var, sign) = match p.cmp(&q) {
                std::cmp::Ordering::Less => (self.pairs[&(p, q)], 1),
                std::cmp::Ordering::Greater => (self.pairs[&(q, p)], -1),
                std::cmp::Ordering::Equal => continue,
            };
            out.push((Atom::jet(var, beta.with_index(dir)), Expression::int(sign)));
        }
        Ok(out)
    }

    fn temporal(&self) -> usize {
        (0..self.ctx.n())
            .find(|i| !self.dirs.contains(i))
            .expect("temporal direction")
    }

    fn substitute(&self, e: &Expression) -> Result<Expression, SpatialError> {
        let temporal = self.temporal();
        let mut map = BTreeMap::new();
        for c in e.coordinates() {
            if let Atom::Jet(k, beta) = &c {
                if self.component_position(*k).is_some() {
                    let mut v = Expression::zero();
                    for (a, s) in self.image(*k, beta, temporal)? {
                        v += &Expression::atom(a) * &s;
                    }
                    map.insert(c, v);
                }
            }
        }
        if map.is_empty() {
            return Ok(e.clone());
        }
        e.substitute(&map).map_err(|err| match err {
            ExprError::OpaqueArgument { function } => {
                SpatialError::Unsupported(format!("opaque function `{function}` depends on a resolved component"))
            }
            other => other.into(),
        })
    }

    fn theta_image(&self, a: &Atom) -> Result<Vec<(Atom, Expression)>, SpatialError> {
        match a {
            Atom::Jet(k, beta) if self.component_position(*k).is_some() => self.image(*k, beta, self.temporal()),
            _ => Ok(vec![(a.clone(), Expression::one())]),
        }
    }

    /// The substitution must satisfy every spatial rule among the components identically.
    fn verify(&self, st: &SpatialStructure<'_>) -> Result<(), SpatialError> {
        for &k in &self.components {
            for gamma in st.spatial_indices(st.max_order.min(2)) {
                let Some(nf) = st.eq.normal_form(k, &gamma)? else {
                    continue;
                };
                let lhs = self.substitute(&Expression::jet(k, gamma.clone()))?;
                let residual = &lhs - &self.substitute(&nf)?;
                if !residual.is_zero() {
                    return Err(SpatialError::Resolution(format!(
                        "the potential does not satisfy the rule for `{}`: residual {}",
                        jet_text(k, &gamma, st.ctx()),
                        self.ctx.text(&residual)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqmanifold::Rule;
    use crate::jetcalc::total_derivative;
    use crate::variational::{internal_lagrangian, IbpOrder, Lagrangian};

    fn mi(d: &[usize]) -> MultiIndex {
        MultiIndex::from_indices(d.iter().copied())
    }
    fn j(d: &[usize]) -> Expression {
        Expression::jet(0, mi(d))
    }
    fn a(d: &[usize]) -> Atom {
        Atom::jet(0, mi(d))
    }
    fn eq_xy(head: &[usize], rhs: Expression) -> SolvedEquation {
        let ctx = JetContext::new(["x", "y"], ["u"]).unwrap();
        SolvedEquation::new(
            ctx,
            vec![Rule {
                dependent: 0,
                head: mi(head),
                rhs,
            }],
        )
        .unwrap()
    }
    fn laplace() -> SolvedEquation {
        eq_xy(&[1, 1], -j(&[0, 0]))
    }
    fn wave() -> SolvedEquation {
        eq_xy(&[0, 1], Expression::zero())
    }
    fn pkdv() -> SolvedEquation {
        let ctx = JetContext::new(["t", "x"], ["u"]).unwrap();
        let rhs = &(&Expression::int(3) * &j(&[1]).pow(2).unwrap()) + &j(&[1, 1, 1]);
        SolvedEquation::new(
            ctx,
            vec![Rule {
                dependent: 0,
                head: mi(&[0]),
                rhs,
            }],
        )
        .unwrap()
    }
    fn rep(eq: &SolvedEquation, lam: Expression) -> InternalLagrangian {
        internal_lagrangian(eq, &Lagrangian::new(lam), IbpOrder::LargestIndex).unwrap()
    }
    fn half() -> Expression {
        Expression::ratio(1, 2)
    }

    #[test]
    fn s_degree_examples() {
        let f = SpatialFrame::new(0);
        let t = DifferentialForm::theta(0, mi(&[]));
        let tx = DifferentialForm::theta(0, mi(&[1]));
        assert_eq!(f.s_degree(&[Generator::Dx(0), Generator::Dx(1)]), 1);
        let w = t.wedge(&tx).wedge(&DifferentialForm::dx(0));
        assert!(f.reduce_mod_s2(&w).is_zero());
        let v = t.wedge(&DifferentialForm::dx(1));
        assert_eq!(f.reduce_mod_s2(&v), v);
        assert_eq!(f.s_degree_filter(&(&v + &w), 3), w);
    }

    #[test]
    fn classification() {
        let lap = laplace();
        let st = SpatialStructure::new(&lap, SpatialFrame::new(1), 4).unwrap();
        assert_eq!(st.generator_kind(0, 0).unwrap(), Some(GeneratorKind::Free));
        assert_eq!(st.generator_kind(0, 1).unwrap(), Some(GeneratorKind::Free));
        assert_eq!(st.generator_kind(0, 2).unwrap(), None);
        let other = SpatialStructure::new(&lap, SpatialFrame::new(0), 4).unwrap();
        assert_eq!(other.generator_kind(0, 0).unwrap(), Some(GeneratorKind::Constrained));

        let w = wave();
        let st = SpatialStructure::new(&w, SpatialFrame::new(1), 4).unwrap();
        assert_eq!(st.generator_kind(0, 0).unwrap(), Some(GeneratorKind::Free));
        for m in 1..4 {
            assert_eq!(st.generator_kind(0, m).unwrap(), Some(GeneratorKind::Parameter));
        }
    }

    #[test]
    fn laplace_presymplectic_and_battery() {
        let eq = laplace();
        let lam = &(-half()) * &(&j(&[0]).pow(2).unwrap() + &j(&[1]).pow(2).unwrap());
        let r = rep(&eq, lam);
        let frame = SpatialFrame::new(1);
        let omega = DifferentialForm::theta(0, mi(&[1]))
            .wedge(&DifferentialForm::theta(0, mi(&[])))
            .wedge(&DifferentialForm::dx(0));
        assert_eq!(
            frame.reduce_mod_s2(&frame.s_presymplectic(&r.dl)),
            DifferentialForm::zero()
        );
        assert_eq!(frame.s_presymplectic(&r.dl), omega);
        let st = SpatialStructure::new(&eq, frame, 4).unwrap();
        let phi = Expression::opaque("phi", vec![Atom::Base(0), a(&[])]);
        let cases = [
            (Expression::zero(), Expression::zero(), true),
            (phi.clone(), Expression::zero(), false),
            (Expression::zero(), phi.clone(), false),
            (j(&[]), j(&[0]), false),
            (Expression::one(), Expression::zero(), false),
        ];
        for (p, c, trivial) in cases {
            let cand = SSymmetryCandidate::new([(a(&[]), p), (a(&[1]), c)]);
            assert_eq!(st.is_gauge_symmetry(&r, &cand, None).unwrap(), trivial);
        }
    }

    #[test]
    fn wave_parameter_generators() {
        let eq = wave();
        let r = rep(&eq, &(-half()) * &(&j(&[0]) * &j(&[1])));
        let st = SpatialStructure::new(&eq, SpatialFrame::new(1), 4).unwrap();
        let p0 = Expression::opaque("p0", vec![Atom::Base(1), a(&[1]), a(&[1, 1])]);
        for value in [p0, j(&[1]).pow(2).unwrap(), &Expression::base(1) * &j(&[1, 1])] {
            let cand = SSymmetryCandidate::new([(a(&[1]), value)]);
            assert!(st.is_gauge_symmetry(&r, &cand, None).unwrap());
        }
        let cand = SSymmetryCandidate::new([(a(&[1]), j(&[]))]);
        assert!(matches!(
            st.extend_s_symmetry(&cand),
            Err(SpatialError::ConstraintViolation { .. })
        ));
        let cand = SSymmetryCandidate::new([(a(&[0]), j(&[]))]);
        assert!(matches!(
            st.extend_s_symmetry(&cand),
            Err(SpatialError::IllDefined { .. })
        ));
    }

    #[test]
    fn pkdv_gauge() {
        let eq = pkdv();
        let lam = &(&(&half() * &j(&[1])) * &j(&[0])) - &j(&[1]).pow(3).unwrap();
        let lam = &lam + &(&half() * &j(&[1, 1]).pow(2).unwrap());
        let r = rep(&eq, lam);
        let st = SpatialStructure::new(&eq, SpatialFrame::new(0), 4).unwrap();
        let g = Expression::opaque("g", vec![Atom::Base(0)]);
        let cand = SSymmetryCandidate::new([(a(&[]), g)]);
        assert!(st.is_gauge_symmetry(&r, &cand, None).unwrap());
        for value in [j(&[]), j(&[1]), &Expression::base(1) * &j(&[1])] {
            let cand = SSymmetryCandidate::new([(a(&[]), value)]);
            assert!(!st.is_gauge_symmetry(&r, &cand, None).unwrap());
        }
    }

    #[test]
    fn divergence_test() {
        let eq = pkdv();
        let st = SpatialStructure::new(&eq, SpatialFrame::new(0), 4).unwrap();
        let vol = DifferentialForm::volume(2);
        let div = &j(&[]) * &j(&[1]);
        assert!(st.is_gauge_trivial(&vol.scale(&div), None).unwrap());
        assert!(!st.is_gauge_trivial(&vol.scale(&j(&[]).pow(2).unwrap()), None).unwrap());
        let f = Expression::opaque("f", vec![a(&[])]);
        assert!(matches!(
            st.is_gauge_trivial(&vol.scale(&f), None),
            Err(SpatialError::Unsupported(_))
        ));
    }

    #[test]
    fn spatial_gradient() {
        let eq = pkdv();
        let st = SpatialStructure::new(&eq, SpatialFrame::new(0), 4).unwrap();
        assert!(st.is_spatial_gradient(&[j(&[])]).unwrap());
        let ctx = JetContext::new(["t", "x", "y"], ["u"]).unwrap();
        let free = SolvedEquation::free(ctx);
        let st = SpatialStructure::new(&free, SpatialFrame::new(0), 3).unwrap();
        let f = j(&[]).pow(2).unwrap();
        let grad = [total_derivative(1, &f), total_derivative(2, &f)];
        assert!(st.is_spatial_gradient(&grad).unwrap());
        assert!(!st.is_spatial_gradient(&[j(&[2]), Expression::zero()]).unwrap());
    }

    /// Divergence-free pair `(e1, e2)` in the plane with `e1_x = −e2_y`.
    fn divergence_free() -> SolvedEquation {
        let ctx = JetContext::new(["t", "x", "y"], ["e1", "e2"]).unwrap();
        SolvedEquation::new(
            ctx,
            vec![Rule {
                dependent: 0,
                head: mi(&[1]),
                rhs: -Expression::jet(1, mi(&[2])),
            }],
        )
        .unwrap()
    }

    #[test]
    fn resolution() {
        let eq = divergence_free();
        let st = SpatialStructure::new(&eq, SpatialFrame::new(0), 3).unwrap();
        assert_eq!(st.generator_kind(0, 0).unwrap(), Some(GeneratorKind::Constrained));
        let vol_s = DifferentialForm::volume_interior(3, 0);
        let w = DifferentialForm::theta(0, mi(&[]))
            .wedge(&vol_s)
            .scale(&Expression::jet(1, mi(&[])));
        assert!(matches!(
            st.is_gauge_trivial(&w, None),
            Err(SpatialError::UnresolvedConstraint { .. })
        ));
        let res = ConstraintResolution::new(vec![0, 1], "r");
        assert_eq!(res.potential_names(2), vec!["r12".to_string()]);
        // e2 θ(e1) + e1 θ(e2) ≡ 2 r_xy θ(r)
        let w = &w
            + &DifferentialForm::theta(1, mi(&[]))
                .wedge(&vol_s)
                .scale(&Expression::jet(0, mi(&[])));
        assert!(!st.is_gauge_trivial(&w, Some(&res)).unwrap());
        let w = &(&w
            - &DifferentialForm::theta(1, mi(&[]))
                .wedge(&vol_s)
                .scale(&Expression::jet(0, mi(&[]))))
            - &DifferentialForm::theta(1, mi(&[]))
                .wedge(&vol_s)
                .scale(&Expression::jet(0, mi(&[])));
        assert!(st.is_gauge_trivial(&w, Some(&res)).unwrap());
        let closed = &DifferentialForm::theta(0, mi(&[]))
            .wedge(&vol_s)
            .scale(&Expression::base(1))
            + &DifferentialForm::theta(1, mi(&[]))
                .wedge(&vol_s)
                .scale(&Expression::base(2));
        assert!(st.is_gauge_trivial(&closed, Some(&res)).unwrap());
        let bad = ConstraintResolution::new(vec![1, 0], "r");
        assert!(matches!(
            st.is_gauge_trivial(&closed, Some(&bad)),
            Err(SpatialError::Resolution(_))
        ));
    }

    #[test]
    fn constraint_checked_on_candidates() {
        let eq = divergence_free();
        let st = SpatialStructure::new(&eq, SpatialFrame::new(0), 3).unwrap();
        let ok = SSymmetryCandidate::new([
            (Atom::dependent(0), Expression::jet(1, mi(&[2, 2]))),
            (Atom::dependent(1), -Expression::jet(1, mi(&[1, 2]))),
        ]);
        assert!(st.extend_s_symmetry(&ok).is_ok());
        let bad = SSymmetryCandidate::new([(Atom::dependent(0), Expression::base(1))]);
        assert!(matches!(
            st.extend_s_symmetry(&bad),
            Err(SpatialError::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn lie_derivative_routes_agree() {
        let eq = wave();
        let r = rep(&eq, &(-half()) * &(&j(&[0]) * &j(&[1])));
        let st = SpatialStructure::new(&eq, SpatialFrame::new(1), 4).unwrap();
        let p0 = Expression::opaque("p0", vec![Atom::Base(1), a(&[1]), a(&[1, 1])]);
        let cand = SSymmetryCandidate::new([(a(&[1]), p0), (a(&[]), j(&[0]).pow(2).unwrap())]);
        let ext = st.extend_s_symmetry(&cand).unwrap();
        assert!(ext.verify_cartan_formula(&r.l).unwrap());
        let on_x = ext.value(&a(&[0, 0])).unwrap();
        assert_eq!(
            on_x,
            &Expression::int(2) * &(&j(&[0, 0]).pow(2).unwrap() + &(&j(&[0]) * &j(&[0, 0, 0])))
        );
    }
}
