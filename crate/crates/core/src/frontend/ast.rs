use num_bigint::BigInt;

/// A node together with its source position; equality ignores the position.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub node: T,
    pub line: usize,
    pub col: usize,
}

impl<T> Located<T> {
    pub fn new(node: T, line: usize, col: usize) -> Self {
        Self { node, line, col }
    }
}

impl<T: PartialEq> PartialEq for Located<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: Eq> Eq for Located<T> {}

/// Scalar and form expressions share one grammar; degrees are checked on evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Int(BigInt),
    /// An independent, a dependent or an opaque function.
    Name(String),
    /// `u[xy]`, stored as the dependent and its direction names.
    Jet(String, Vec<String>),
    /// `f{1,2}`: formal partial of an opaque function by 1-based argument positions.
    Partial(String, Vec<usize>),
    /// `d(x)`.
    Dx(String),
    /// `th(u[x])`.
    Theta(String, Vec<String>),
    /// `D(x, e)`: total derivative on the free jet space.
    TotalD(String, Box<Located<Node>>),
    Neg(Box<Located<Node>>),
    Add(Box<Located<Node>>, Box<Located<Node>>),
    Sub(Box<Located<Node>>, Box<Located<Node>>),
    Mul(Box<Located<Node>>, Box<Located<Node>>),
    Div(Box<Located<Node>>, Box<Located<Node>>),
    Wedge(Box<Located<Node>>, Box<Located<Node>>),
    Pow(Box<Located<Node>>, i32),
}

pub type Expr = Located<Node>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKey {
    OmegaL,
    L,
    Dl,
    Omega,
}

impl FormKey {
    pub fn keyword(&self) -> &'static str {
        match self {
            FormKey::OmegaL => "omega_L",
            FormKey::L => "l",
            FormKey::Dl => "dl",
            FormKey::Omega => "omega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeOutcome {
    True,
    False,
    /// The candidate does not extend to an S-symmetry.
    Invalid,
}

impl GaugeOutcome {
    pub fn keyword(&self) -> &'static str {
        match self {
            GaugeOutcome::True => "true",
            GaugeOutcome::False => "false",
            GaugeOutcome::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    Euler { dependent: String, value: Expr },
    Form { key: FormKey, value: Expr },
    Gauge { candidate: String, outcome: GaugeOutcome },
    Contract { candidate: String, value: Expr },
    Symmetry { characteristic: String, value: bool },
    Restrict { expr: Expr, value: Expr },
    Prolong { jet: Expr, value: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Independents(Vec<String>),
    Dependents(Vec<String>),
    Opaque { name: String, args: Vec<Expr> },
    Equation { lhs: Expr, rhs: Expr },
    Lagrangian(Expr),
    Spatial(String),
    Candidate { name: String, entries: Vec<(Expr, Expr)> },
    Characteristic { name: String, entries: Vec<(String, Expr)> },
    Resolve { components: Vec<String>, potential: String },
    Expect(Expectation),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub statements: Vec<Located<Statement>>,
}
