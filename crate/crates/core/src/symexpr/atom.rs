use std::collections::BTreeSet;
use std::sync::Arc;

use super::MultiIndex;

/// An opaque function symbol applied to a fixed list of coordinate atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpaqueFn {
    pub name: String,
    pub args: Vec<Atom>,
}

impl OpaqueFn {
    pub fn new(name: impl Into<String>, args: Vec<Atom>) -> Self {
        Self {
            name: name.into(),
            args,
        }
    }
}

/// Indivisible symbols of an expression.
///
/// Variant order is the atom total order: base variables, then jet coordinates,
/// then opaque functions, then their formal partials.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// Independent variable `x^i`.
    Base(usize),
    /// Jet coordinate `u^k_α`; `Jet(k, 0)` is `u^k`.
    Jet(usize, MultiIndex),
    /// `f(args)`.
    Fn(Arc<OpaqueFn>),
    /// Formal partial of `f` with respect to its arguments; the multi-index counts
    /// derivatives per argument position.
    FnPartial(Arc<OpaqueFn>, MultiIndex),
}

impl Atom {
    pub fn base(i: usize) -> Atom {
        Atom::Base(i)
    }

    pub fn jet(k: usize, alpha: MultiIndex) -> Atom {
        Atom::Jet(k, alpha)
    }

    /// `u^k` itself.
    pub fn dependent(k: usize) -> Atom {
        Atom::Jet(k, MultiIndex::zero())
    }

    pub fn opaque(f: OpaqueFn) -> Atom {
        Atom::Fn(Arc::new(f))
    }

    pub fn is_coordinate(&self) -> bool {
        matches!(self, Atom::Base(_) | Atom::Jet(..))
    }

    pub fn as_jet(&self) -> Option<(usize, &MultiIndex)> {
        match self {
            Atom::Jet(k, a) => Some((*k, a)),
            _ => None,
        }
    }

    pub fn call(&self) -> Option<&Arc<OpaqueFn>> {
        match self {
            Atom::Fn(c) | Atom::FnPartial(c, _) => Some(c),
            _ => None,
        }
    }

    /// The partial of this opaque atom with respect to argument position `p`.
    pub(crate) fn opaque_partial(&self, p: usize) -> Option<Atom> {
        match self {
            Atom::Fn(c) => Some(Atom::FnPartial(c.clone(), MultiIndex::unit(p))),
            Atom::FnPartial(c, beta) => Some(Atom::FnPartial(c.clone(), beta.with_index(p))),
            _ => None,
        }
    }

    /// Coordinate atoms this atom depends on (itself, or the arguments of an opaque call).
    pub fn collect_coordinates(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Atom::Base(_) | Atom::Jet(..) => {
                out.insert(self.clone());
            }
            Atom::Fn(c) | Atom::FnPartial(c, _) => {
                for a in &c.args {
                    a.collect_coordinates(out);
                }
            }
        }
    }

    pub fn depends_on(&self, coordinate: &Atom) -> bool {
        match self {
            Atom::Base(_) | Atom::Jet(..) => self == coordinate,
            Atom::Fn(c) | Atom::FnPartial(c, _) => c.args.iter().any(|a| a.depends_on(coordinate)),
        }
    }
}
