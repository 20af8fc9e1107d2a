use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Atom, ExprError, MultiIndex, Naming, OpaqueFn};

/// Product of atom powers, sorted by atom; exponents are nonzero and may be negative
/// (the negative part is the single monomial denominator).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(Atom, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom, exp: i32) -> Self {
        if exp == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(a, exp)])
        }
    }

    pub fn factors(&self) -> &[(Atom, i32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree_in(&self, a: &Atom) -> i32 {
        self.0
            .binary_search_by(|(b, _)| b.cmp(a))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    fn inverse(&self) -> Monomial {
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), -e)).collect())
    }

    /// This monomial with the exponent of factor `idx` lowered by one.
    fn lowered(&self, idx: usize) -> Monomial {
        let mut v = self.0.clone();
        v[idx].1 -= 1;
        if v[idx].1 == 0 {
            v.remove(idx);
        }
        Monomial(v)
    }

    pub fn total_degree(&self) -> i32 {
        self.0.iter().map(|(_, e)| e).sum()
    }
}

/// Canonical exact-rational Laurent polynomial in atoms.
///
/// Zero coefficients are never stored, so structural equality is mathematical equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expression {
    terms: BTreeMap<Monomial, BigRational>,
}

pub(crate) fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Expression {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::constant(rational(n, d))
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn atom(a: Atom) -> Self {
        Self::term(BigRational::one(), Monomial::atom(a, 1))
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn base(i: usize) -> Self {
        Self::atom(Atom::Base(i))
    }

    pub fn jet(k: usize, alpha: MultiIndex) -> Self {
        Self::atom(Atom::Jet(k, alpha))
    }

    pub fn dependent(k: usize) -> Self {
        Self::atom(Atom::dependent(k))
    }

    pub fn opaque(name: &str, args: Vec<Atom>) -> Self {
        Self::atom(Atom::opaque(OpaqueFn::new(name, args)))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if the expression has no atoms.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    /// A single atom with coefficient one and exponent one.
    pub fn as_atom(&self) -> Option<&Atom> {
        let (m, c) = self.single_term()?;
        match m.factors() {
            [(a, 1)] if c.is_one() => Some(a),
            _ => None,
        }
    }

    pub fn single_term(&self) -> Option<(&Monomial, &BigRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn scale(&self, c: &BigRational) -> Expression {
        if c.is_zero() {
            return Expression::zero();
        }
        Expression {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn mul_monomial(&self, m: &Monomial, c: &BigRational) -> Expression {
        let mut out = Expression::zero();
        for (m2, c2) in &self.terms {
            out.add_term(m.mul(m2), c * c2);
        }
        out
    }

    /// Integer power; negative powers only for single-term expressions.
    pub fn pow(&self, k: i32) -> Result<Expression, ExprError> {
        if k >= 0 {
            let mut acc = Expression::one();
            for _ in 0..k {
                acc = &acc * self;
            }
            return Ok(acc);
        }
        let inv = self.reciprocal()?;
        inv.pow(-k)
    }

    pub fn reciprocal(&self) -> Result<Expression, ExprError> {
        match self.single_term() {
            Some((m, c)) => Ok(Expression::term(c.recip(), m.inverse())),
            None if self.is_zero() => Err(ExprError::DivisionByZero),
            None => Err(ExprError::NonMonomialDenominator),
        }
    }

    pub fn checked_div(&self, other: &Expression) -> Result<Expression, ExprError> {
        Ok(self * &other.reciprocal()?)
    }

    /// Atoms occurring as factors (opaque atoms are not looked into).
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (a, _) in m.factors() {
                out.insert(a.clone());
            }
        }
        out
    }

    /// Coordinate atoms this expression depends on, including through opaque arguments.
    pub fn coordinates(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (a, _) in m.factors() {
                a.collect_coordinates(&mut out);
            }
        }
        out
    }

    pub fn jet_coordinates(&self) -> BTreeSet<(usize, MultiIndex)> {
        self.coordinates()
            .into_iter()
            .filter_map(|a| match a {
                Atom::Jet(k, alpha) => Some((k, alpha)),
                _ => None,
            })
            .collect()
    }

    pub fn has_opaque(&self) -> bool {
        self.atoms().iter().any(|a| !a.is_coordinate())
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.terms.keys().any(|m| m.degree_in(a) != 0)
    }

    /// Applies the derivation determined by its values on coordinate atoms.
    ///
    /// Opaque atoms are differentiated by the chain rule through their arguments.
    pub fn derive_with<F>(&self, action: &mut F) -> Expression
    where
        F: FnMut(&Atom) -> Expression,
    {
        let mut memo: HashMap<Atom, Expression> = HashMap::new();
        let mut out = Expression::zero();
        for (m, c) in &self.terms {
            for (idx, (a, e)) in m.factors().iter().enumerate() {
                if !memo.contains_key(a) {
                    let d = atom_derivation(a, action, &mut memo);
                    memo.insert(a.clone(), d);
                }
                let da = &memo[a];
                if da.is_zero() {
                    continue;
                }
                let coeff = c * BigRational::from_integer(BigInt::from(*e));
                let rest = m.lowered(idx);
                for (m2, c2) in &da.terms {
                    out.add_term(rest.mul(m2), &coeff * c2);
                }
            }
        }
        out
    }

    /// Formal partial derivative treating coordinate atoms as independent; opaque
    /// functions contribute formal partials of every argument equal to `a`.
    pub fn partial(&self, a: &Atom) -> Expression {
        if !self.coordinates().contains(a) {
            return Expression::zero();
        }
        self.derive_with(&mut |b: &Atom| {
            if b == a {
                Expression::one()
            } else {
                Expression::zero()
            }
        })
    }

    /// Simultaneous substitution of atoms, followed by canonicalization.
    ///
    /// Opaque arguments can only be renamed (replacement must be a single atom).
    pub fn substitute(&self, rules: &BTreeMap<Atom, Expression>) -> Result<Expression, ExprError> {
        if rules.is_empty() {
            return Ok(self.clone());
        }
        let mut cache: HashMap<(Atom, i32), Expression> = HashMap::new();
        let mut out = Expression::zero();
        for (m, c) in &self.terms {
            let mut prod = Expression::constant(c.clone());
            let mut plain = Monomial::one();
            for (a, e) in m.factors() {
                if let Some(rep) = rules.get(a) {
                    let key = (a.clone(), *e);
                    if !cache.contains_key(&key) {
                        cache.insert(key.clone(), rep.pow(*e)?);
                    }
                    prod = &prod * &cache[&key];
                } else if let Some(new_atom) = substitute_in_opaque(a, rules)? {
                    prod = &prod * &Expression::term(BigRational::one(), Monomial::atom(new_atom, *e));
                } else {
                    plain = plain.mul(&Monomial::atom(a.clone(), *e));
                }
            }
            out += prod.mul_monomial(&plain, &BigRational::one());
        }
        Ok(out)
    }

    /// Renders with the given names; the output is re-parseable by the frontend.
    pub fn to_text(&self, names: &dyn Naming) -> String {
        let mut s = String::new();
        if self.terms.is_empty() {
            return "0".into();
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            s.push_str(&term_text(&c.abs(), m, names));
        }
        s
    }
}

fn substitute_in_opaque(a: &Atom, rules: &BTreeMap<Atom, Expression>) -> Result<Option<Atom>, ExprError> {
    let Some(call) = a.call() else {
        return Ok(None);
    };
    if !call.args.iter().any(|x| rules.contains_key(x)) {
        return Ok(None);
    }
    let mut args = Vec::with_capacity(call.args.len());
    for x in &call.args {
        match rules.get(x) {
            None => args.push(x.clone()),
            Some(rep) => match rep.as_atom() {
                Some(b) if b.is_coordinate() => args.push(b.clone()),
                _ => {
                    return Err(ExprError::OpaqueArgument {
                        function: call.name.clone(),
                    })
                }
            },
        }
    }
    let new_call = std::sync::Arc::new(OpaqueFn::new(call.name.clone(), args));
    Ok(Some(match a {
        Atom::Fn(_) => Atom::Fn(new_call),
        Atom::FnPartial(_, beta) => Atom::FnPartial(new_call, beta.clone()),
        _ => unreachable!(),
    }))
}

fn atom_derivation<F>(a: &Atom, action: &mut F, memo: &mut HashMap<Atom, Expression>) -> Expression
where
    F: FnMut(&Atom) -> Expression,
{
    match a {
        Atom::Base(_) | Atom::Jet(..) => action(a),
        Atom::Fn(call) | Atom::FnPartial(call, _) => {
            let mut out = Expression::zero();
            for (p, arg) in call.args.iter().enumerate() {
                if !memo.contains_key(arg) {
                    let d = atom_derivation(arg, action, memo);
                    memo.insert(arg.clone(), d);
                }
                let darg = &memo[arg];
                if darg.is_zero() {
                    continue;
                }
                let partial = a.opaque_partial(p).expect("opaque atom");
                out += &Expression::atom(partial) * darg;
            }
            out
        }
    }
}

fn rational_text(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn term_text(c: &BigRational, m: &Monomial, names: &dyn Naming) -> String {
    if m.is_one() {
        return rational_text(c);
    }
    let mut s = String::new();
    if !c.is_one() {
        s.push_str(&rational_text(c));
        s.push('*');
    }
    for (i, (a, e)) in m.factors().iter().enumerate() {
        if i > 0 {
            s.push('*');
        }
        s.push_str(&atom_text(a, names));
        if *e != 1 {
            let _ = write!(s, "^{e}");
        }
    }
    s
}

/// `x`, `u`, `u[xy]`, `f`, `f{1,2}`.
pub fn atom_text(a: &Atom, names: &dyn Naming) -> String {
    match a {
        Atom::Base(i) => names.independent_name(*i).to_string(),
        Atom::Jet(k, alpha) => jet_text(*k, alpha, names),
        Atom::Fn(c) => c.name.clone(),
        Atom::FnPartial(c, beta) => {
            let pos: Vec<String> = beta.expand().iter().map(|p| (p + 1).to_string()).collect();
            format!("{}{{{}}}", c.name, pos.join(","))
        }
    }
}

pub fn jet_text(k: usize, alpha: &MultiIndex, names: &dyn Naming) -> String {
    let dep = names.dependent_name(k);
    if alpha.is_zero() {
        return dep.to_string();
    }
    let dirs: Vec<&str> = alpha.expand().iter().map(|&i| names.independent_name(i)).collect();
    if dirs.iter().all(|d| d.chars().count() == 1) {
        format!("{dep}[{}]", dirs.concat())
    } else {
        format!("{dep}[{}]", dirs.join(","))
    }
}

impl Add<&Expression> for &Expression {
    type Output = Expression;
    fn add(self, rhs: &Expression) -> Expression {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Expression {
    type Output = Expression;
    fn add(mut self, rhs: Expression) -> Expression {
        self += rhs;
        self
    }
}

impl AddAssign<&Expression> for Expression {
    fn add_assign(&mut self, rhs: &Expression) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl AddAssign for Expression {
    fn add_assign(&mut self, rhs: Expression) {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
    }
}

impl Sub<&Expression> for &Expression {
    type Output = Expression;
    fn sub(self, rhs: &Expression) -> Expression {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for Expression {
    type Output = Expression;
    fn sub(mut self, rhs: Expression) -> Expression {
        self -= &rhs;
        self
    }
}

impl SubAssign<&Expression> for Expression {
    fn sub_assign(&mut self, rhs: &Expression) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl Mul<&Expression> for &Expression {
    type Output = Expression;
    fn mul(self, rhs: &Expression) -> Expression {
        let (small, large) = if self.terms.len() <= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = Expression::zero();
        for (m, c) in &small.terms {
            for (m2, c2) in &large.terms {
                out.add_term(m.mul(m2), c * c2);
            }
        }
        out
    }
}

impl Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        &self * &rhs
    }
}

impl Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        -&self
    }
}

impl From<i64> for Expression {
    fn from(n: i64) -> Self {
        Expression::int(n)
    }
}

impl From<Atom> for Expression {
    fn from(a: Atom) -> Self {
        Expression::atom(a)
    }
}
