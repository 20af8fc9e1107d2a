//! Differential forms on infinite jets in the basis `{dx^i, θ^k_α}`.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::jetcalc::{total_derivative, EvolutionaryField};
use crate::symexpr::{jet_text, Atom, Expression, MultiIndex, Naming};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("form is not horizontal")]
    NotHorizontal,
    #[error("form is not homogeneous of degree {expected}")]
    WrongDegree { expected: usize },
}

/// Basis 1-forms. `Dx` sorts before `Theta`; Cartan forms sort by dependent, then
/// multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    Dx(usize),
    Theta(usize, MultiIndex),
}

impl Generator {
    pub fn is_theta(&self) -> bool {
        matches!(self, Generator::Theta(..))
    }

    /// The Cartan form `θ_c` of a jet coordinate atom.
    pub fn theta_of(a: &Atom) -> Option<Generator> {
        a.as_jet().map(|(k, alpha)| Generator::Theta(k, alpha.clone()))
    }

    pub fn jet_atom(&self) -> Option<Atom> {
        match self {
            Generator::Theta(k, alpha) => Some(Atom::jet(*k, alpha.clone())),
            Generator::Dx(_) => None,
        }
    }

    pub fn to_text(&self, names: &dyn Naming) -> String {
        match self {
            Generator::Dx(i) => format!("d({})", names.independent_name(*i)),
            Generator::Theta(k, alpha) => format!("th({})", jet_text(*k, alpha, names)),
        }
    }
}

/// Sorts a generator list into strictly increasing order, returning the permutation
/// sign, or `None` when a generator repeats.
fn normalize(gens: &mut [Generator]) -> Option<i64> {
    let mut sign = 1;
    for i in 1..gens.len() {
        let mut j = i;
        while j > 0 && gens[j - 1] > gens[j] {
            gens.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if gens.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// A sum of terms `coefficient · g_1 ∧ … ∧ g_p` with strictly increasing generator tuples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DifferentialForm {
    terms: BTreeMap<Vec<Generator>, Expression>,
}

impl DifferentialForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(f: Expression) -> Self {
        Self::term(f, Vec::new())
    }

    pub fn generator(g: Generator) -> Self {
        Self::term(Expression::one(), vec![g])
    }

    pub fn dx(i: usize) -> Self {
        Self::generator(Generator::Dx(i))
    }

    pub fn theta(k: usize, alpha: MultiIndex) -> Self {
        Self::generator(Generator::Theta(k, alpha))
    }

    /// `f · g_1 ∧ … ∧ g_p` for generators in any order.
    pub fn term(f: Expression, mut gens: Vec<Generator>) -> Self {
        let mut out = Self::zero();
        if let Some(sign) = normalize(&mut gens) {
            let f = if sign < 0 { -f } else { f };
            out.add_term(gens, f);
        }
        out
    }

    /// `dx^0 ∧ … ∧ dx^{n−1}`.
    pub fn volume(n: usize) -> Self {
        Self::term(Expression::one(), (0..n).map(Generator::Dx).collect())
    }

    /// `∂_s ⌟ (dx^0 ∧ … ∧ dx^{n−1})`.
    pub fn volume_interior(n: usize, s: usize) -> Self {
        contract(&Self::volume(n), &mut |g| match g {
            Generator::Dx(i) if *i == s => Expression::one(),
            _ => Expression::zero(),
        })
    }

    fn add_term(&mut self, gens: Vec<Generator>, f: Expression) {
        if f.is_zero() {
            return;
        }
        match self.terms.entry(gens) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += f;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Generator>, &Expression)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a sorted generator tuple.
    pub fn coefficient(&self, gens: &[Generator]) -> Expression {
        self.terms.get(gens).cloned().unwrap_or_default()
    }

    /// The scalar part, if this is a 0-form.
    pub fn as_scalar(&self) -> Option<Expression> {
        match self.terms.len() {
            0 => Some(Expression::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    /// The common degree of all terms (`Some(0)` for the zero form).
    pub fn degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(Vec::len);
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    pub fn require_degree(&self, expected: usize) -> Result<(), FormError> {
        if self.is_zero() || self.degree() == Some(expected) {
            Ok(())
        } else {
            Err(FormError::WrongDegree { expected })
        }
    }

    pub fn is_horizontal(&self) -> bool {
        self.terms.keys().all(|g| !g.iter().any(Generator::is_theta))
    }

    /// Multiplies every coefficient by `f`.
    pub fn scale(&self, f: &Expression) -> Self {
        let mut out = Self::zero();
        for (g, c) in &self.terms {
            out.add_term(g.clone(), c * f);
        }
        out
    }

    pub fn map_coefficients<E>(&self, mut f: impl FnMut(&Expression) -> Result<Expression, E>) -> Result<Self, E> {
        let mut out = Self::zero();
        for (g, c) in &self.terms {
            out.add_term(g.clone(), f(c)?);
        }
        Ok(out)
    }

    /// Keeps the terms whose generator tuple satisfies `keep`.
    pub fn filter_terms(&self, mut keep: impl FnMut(&[Generator]) -> bool) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(g, _)| keep(g))
                .map(|(g, c)| (g.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (g1, c1) in &self.terms {
            for (g2, c2) in &other.terms {
                let mut gens = g1.clone();
                gens.extend(g2.iter().cloned());
                if let Some(sign) = normalize(&mut gens) {
                    let c = c1 * c2;
                    out.add_term(gens, if sign < 0 { -c } else { c });
                }
            }
        }
        out
    }

    pub fn generators(&self) -> std::collections::BTreeSet<Generator> {
        self.terms.keys().flatten().cloned().collect()
    }

    pub fn to_text(&self, names: &dyn Naming) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (gens, c)) in self.terms.iter().enumerate() {
            let single_negative = c.single_term().is_some_and(|(_, k)| k < &num_traits::Zero::zero());
            let (neg, coef) = if c.len() == 1 {
                if single_negative {
                    (true, -c)
                } else {
                    (false, c.clone())
                }
            } else {
                (false, c.clone())
            };
            let coef_text = if coef.len() > 1 {
                format!("({})", coef.to_text(names))
            } else {
                coef.to_text(names)
            };
            let gens_text: Vec<String> = gens.iter().map(|g| g.to_text(names)).collect();
            let body = if gens.is_empty() {
                coef_text
            } else if coef == Expression::one() {
                gens_text.join(" /\\ ")
            } else {
                format!("{coef_text} * {}", gens_text.join(" /\\ "))
            };
            match (i, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        out
    }
}

/// Number of Cartan generators in a tuple.
pub fn cartan_degree(gens: &[Generator]) -> usize {
    gens.iter().filter(|g| g.is_theta()).count()
}

/// Terms with at least `p` Cartan generators; `ω ∈ C^pΛ` iff the filter returns `ω`.
pub fn cartan_degree_filter(w: &DifferentialForm, p: usize) -> DifferentialForm {
    w.filter_terms(|g| cartan_degree(g) >= p)
}

/// `df = Σ D_i f dx^i + Σ ∂f/∂u^k_α θ^k_α` over `n` independent variables.
pub fn differential(n: usize, f: &Expression) -> DifferentialForm {
    let mut out = DifferentialForm::zero();
    for i in 0..n {
        out.add_term(vec![Generator::Dx(i)], total_derivative(i, f));
    }
    out += vertical_differential(f);
    out
}

/// The Cartan part `Σ ∂f/∂u^k_α θ^k_α` of `df`.
pub fn vertical_differential(f: &Expression) -> DifferentialForm {
    let mut out = DifferentialForm::zero();
    for c in f.coordinates() {
        if let Some(g) = Generator::theta_of(&c) {
            out.add_term(vec![g], f.partial(&c));
        }
    }
    out
}

/// `d(dx^i) = 0`, `d(θ^k_α) = Σ_j dx^j ∧ θ^k_{α+j}`.
fn generator_differential(n: usize, g: &Generator) -> DifferentialForm {
    match g {
        Generator::Dx(_) => DifferentialForm::zero(),
        Generator::Theta(k, alpha) => {
            let mut out = DifferentialForm::zero();
            for j in 0..n {
                out += DifferentialForm::term(
                    Expression::one(),
                    vec![Generator::Dx(j), Generator::Theta(*k, alpha.with_index(j))],
                );
            }
            out
        }
    }
}

pub fn exterior_derivative(n: usize, w: &DifferentialForm) -> DifferentialForm {
    let mut out = DifferentialForm::zero();
    let mut cache: HashMap<Generator, DifferentialForm> = HashMap::new();
    for (gens, c) in &w.terms {
        let rest = DifferentialForm::term(Expression::one(), gens.clone());
        out += differential(n, c).wedge(&rest);
        for (i, g) in gens.iter().enumerate() {
            let dg = cache
                .entry(g.clone())
                .or_insert_with(|| generator_differential(n, g))
                .clone();
            if dg.is_zero() {
                continue;
            }
            let before = DifferentialForm::term(Expression::one(), gens[..i].to_vec());
            let after = DifferentialForm::term(Expression::one(), gens[i + 1..].to_vec());
            let piece = before.wedge(&dg).wedge(&after).scale(c);
            if i % 2 == 0 {
                out += piece;
            } else {
                out -= &piece;
            }
        }
    }
    out
}

/// `d_h(f dx^J) = Σ D_k(f) dx^k ∧ dx^J`.
pub fn horizontal_differential(n: usize, w: &DifferentialForm) -> Result<DifferentialForm, FormError> {
    if !w.is_horizontal() {
        return Err(FormError::NotHorizontal);
    }
    let mut out = DifferentialForm::zero();
    for (gens, c) in &w.terms {
        for k in 0..n {
            let mut g = vec![Generator::Dx(k)];
            g.extend(gens.iter().cloned());
            out += DifferentialForm::term(total_derivative(k, c), g);
        }
    }
    Ok(out)
}

/// Interior product with the vector field whose value on each generator is given;
/// extended as a graded antiderivation.
pub fn contract(w: &DifferentialForm, value: &mut dyn FnMut(&Generator) -> Expression) -> DifferentialForm {
    let mut cache: HashMap<Generator, Expression> = HashMap::new();
    let mut out = DifferentialForm::zero();
    for (gens, c) in &w.terms {
        for (i, g) in gens.iter().enumerate() {
            let v = cache.entry(g.clone()).or_insert_with(|| value(g)).clone();
            if v.is_zero() {
                continue;
            }
            let mut rest = gens.clone();
            rest.remove(i);
            let f = c * &v;
            out.add_term(rest, if i % 2 == 0 { f } else { -f });
        }
    }
    out
}

/// `E_φ ⌟ ω`: `dx^i ↦ 0`, `θ^k_α ↦ D_α(φ^k)`.
pub fn contract_evolutionary(x: &EvolutionaryField, w: &DifferentialForm) -> DifferentialForm {
    contract(w, &mut |g| match g {
        Generator::Dx(_) => Expression::zero(),
        Generator::Theta(k, alpha) => x.on_jet(*k, alpha),
    })
}

/// `L_{E_φ} ω = E_φ ⌟ dω + d(E_φ ⌟ ω)`.
pub fn lie_derivative_evolutionary(n: usize, x: &EvolutionaryField, w: &DifferentialForm) -> DifferentialForm {
    let a = contract_evolutionary(x, &exterior_derivative(n, w));
    let b = exterior_derivative(n, &contract_evolutionary(x, w));
    a + b
}

impl AddAssign for DifferentialForm {
    fn add_assign(&mut self, rhs: Self) {
        for (g, c) in rhs.terms {
            self.add_term(g, c);
        }
    }
}

impl AddAssign<&DifferentialForm> for DifferentialForm {
    fn add_assign(&mut self, rhs: &Self) {
        for (g, c) in &rhs.terms {
            self.add_term(g.clone(), c.clone());
        }
    }
}

impl SubAssign<&DifferentialForm> for DifferentialForm {
    fn sub_assign(&mut self, rhs: &Self) {
        for (g, c) in &rhs.terms {
            self.add_term(g.clone(), -c);
        }
    }
}

impl Add for DifferentialForm {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Add<&DifferentialForm> for &DifferentialForm {
    type Output = DifferentialForm;
    fn add(self, rhs: &DifferentialForm) -> DifferentialForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for DifferentialForm {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= &rhs;
        self
    }
}

impl Sub<&DifferentialForm> for &DifferentialForm {
    type Output = DifferentialForm;
    fn sub(self, rhs: &DifferentialForm) -> DifferentialForm {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &DifferentialForm {
    type Output = DifferentialForm;
    fn neg(self) -> DifferentialForm {
        DifferentialForm {
            terms: self.terms.iter().map(|(g, c)| (g.clone(), -c)).collect(),
        }
    }
}

impl Neg for DifferentialForm {
    type Output = DifferentialForm;
    fn neg(self) -> DifferentialForm {
        -&self
    }
}

impl From<Expression> for DifferentialForm {
    fn from(f: Expression) -> Self {
        DifferentialForm::scalar(f)
    }
}
