use super::ast::{Expectation, Expr, FormKey, GaugeOutcome, Located, Node, Program, Statement};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Words that cannot be declared as names.
pub const RESERVED: &[&str] = &[
    "d",
    "th",
    "D",
    "antisym_potential",
    "true",
    "false",
    "invalid",
    "independents",
    "dependents",
    "opaque",
    "equation",
    "lagrangian",
    "spatial",
    "candidate",
    "characteristic",
    "resolve",
    "expect",
];

const STATEMENTS: &[&str] = &[
    "opaque",
    "equation",
    "lagrangian",
    "spatial",
    "candidate",
    "characteristic",
    "resolve",
    "expect",
];

const EXPECT_KEYS: &[&str] = &[
    "euler", "omega_L", "l", "dl", "omega", "gauge", "contract", "symmetry", "restrict", "prolong",
];

pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        independents: Vec::new(),
    };
    p.program()
}

/// Parses a single expression against the given independent names.
pub fn parse_expression(src: &str, independents: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        independents: independents.to_vec(),
    };
    p.skip_newlines();
    let e = p.sum()?;
    p.skip_newlines();
    p.expect_tok(&Tok::Eof)?;
    Ok(e)
}

fn quoted(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| format!("'{w}'")).collect()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    independents: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.toks[(self.pos + offset).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<String>) -> ParseError {
        let t = self.peek();
        ParseError::new(t.line, t.col, expected, format!("found {}", t.tok.describe()))
    }

    fn expect_tok(&mut self, tok: &Tok) -> Result<Token, ParseError> {
        if &self.peek().tok == tok {
            Ok(self.bump())
        } else {
            let want = match tok {
                Tok::Newline | Tok::Eof => tok.symbol().to_string(),
                _ => format!("'{}'", tok.symbol()),
            };
            Err(self.error(vec![want]))
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == word)
    }

    fn expect_word(&mut self, word: &str) -> Result<Token, ParseError> {
        if self.at_ident(word) {
            Ok(self.bump())
        } else {
            Err(self.error(quoted(&[word])))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.line, t.col))
            }
            _ => Err(self.error(vec![what.to_string()])),
        }
    }

    /// A name being declared.
    fn declared(&mut self, what: &str) -> Result<String, ParseError> {
        let (s, line, col) = self.ident(what)?;
        if RESERVED.contains(&s.as_str()) {
            return Err(ParseError::new(
                line,
                col,
                vec![what.to_string()],
                format!("'{s}' is reserved"),
            ));
        }
        Ok(s)
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.bump();
        }
    }

    fn end_of_statement(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::Newline | Tok::Eof => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(vec!["end of line".into()])),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut statements = Vec::new();
        self.skip_newlines();
        let t = self.peek().clone();
        self.expect_word("independents")?;
        let names = self.name_list("independent variable name")?;
        self.independents = names.clone();
        statements.push(Located::new(Statement::Independents(names), t.line, t.col));
        self.end_of_statement()?;
        self.skip_newlines();
        let t = self.peek().clone();
        self.expect_word("dependents")?;
        let names = self.name_list("dependent variable name")?;
        statements.push(Located::new(Statement::Dependents(names), t.line, t.col));
        self.end_of_statement()?;
        loop {
            self.skip_newlines();
            if self.peek().tok == Tok::Eof {
                break;
            }
            let t = self.peek().clone();
            let s = self.statement()?;
            statements.push(Located::new(s, t.line, t.col));
            self.end_of_statement()?;
        }
        Ok(Program { statements })
    }

    fn name_list(&mut self, what: &str) -> Result<Vec<String>, ParseError> {
        let mut names = vec![self.declared(what)?];
        while matches!(self.peek().tok, Tok::Ident(_)) {
            names.push(self.declared(what)?);
        }
        Ok(names)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let word = match &self.peek().tok {
            Tok::Ident(s) if STATEMENTS.contains(&s.as_str()) => s.clone(),
            _ => return Err(self.error(quoted(STATEMENTS))),
        };
        self.bump();
        match word.as_str() {
            "opaque" => {
                let name = self.declared("function name")?;
                self.expect_tok(&Tok::LParen)?;
                let mut args = Vec::new();
                if self.peek().tok != Tok::RParen {
                    args.push(self.coordinate()?);
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        args.push(self.coordinate()?);
                    }
                }
                self.expect_tok(&Tok::RParen)?;
                Ok(Statement::Opaque { name, args })
            }
            "equation" => {
                let lhs = self.coordinate()?;
                self.expect_tok(&Tok::Eq)?;
                let rhs = self.sum()?;
                Ok(Statement::Equation { lhs, rhs })
            }
            "lagrangian" => Ok(Statement::Lagrangian(self.sum()?)),
            "spatial" => Ok(Statement::Spatial(self.ident("independent variable name")?.0)),
            "candidate" => {
                let name = self.declared("candidate name")?;
                let entries = self.block(|p| {
                    let key = p.coordinate()?;
                    p.expect_tok(&Tok::Arrow)?;
                    Ok((key, p.sum()?))
                })?;
                Ok(Statement::Candidate { name, entries })
            }
            "characteristic" => {
                let name = self.declared("characteristic name")?;
                let entries = self.block(|p| {
                    let key = p.ident("dependent variable name")?.0;
                    p.expect_tok(&Tok::Arrow)?;
                    Ok((key, p.sum()?))
                })?;
                Ok(Statement::Characteristic { name, entries })
            }
            "resolve" => {
                let mut components = vec![self.ident("dependent variable name")?.0];
                while matches!(self.peek().tok, Tok::Ident(_)) {
                    components.push(self.ident("dependent variable name")?.0);
                }
                self.expect_tok(&Tok::Eq)?;
                self.expect_word("antisym_potential")?;
                self.expect_tok(&Tok::LParen)?;
                let potential = self.declared("potential name")?;
                self.expect_tok(&Tok::RParen)?;
                Ok(Statement::Resolve { components, potential })
            }
            "expect" => Ok(Statement::Expect(self.expectation()?)),
            _ => unreachable!("statement keyword"),
        }
    }

    /// `{ entry (; | newline) ... }`, possibly spanning lines.
    fn block<T>(&mut self, mut entry: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        self.expect_tok(&Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            while matches!(self.peek().tok, Tok::Newline | Tok::Semi) {
                self.bump();
            }
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(out);
            }
            out.push(entry(self)?);
            match self.peek().tok {
                Tok::Newline | Tok::Semi | Tok::RBrace => {}
                _ => return Err(self.error(vec!["';'".into(), "end of line".into(), "'}'".into()])),
            }
        }
    }

    fn boolean(&mut self, allow_invalid: bool) -> Result<GaugeOutcome, ParseError> {
        let words: &[&str] = if allow_invalid {
            &["true", "false", "invalid"]
        } else {
            &["true", "false"]
        };
        match &self.peek().tok {
            Tok::Ident(s) if words.contains(&s.as_str()) => {
                let out = match s.as_str() {
                    "true" => GaugeOutcome::True,
                    "false" => GaugeOutcome::False,
                    _ => GaugeOutcome::Invalid,
                };
                self.bump();
                Ok(out)
            }
            _ => Err(self.error(quoted(words))),
        }
    }

    fn expectation(&mut self) -> Result<Expectation, ParseError> {
        let key = match &self.peek().tok {
            Tok::Ident(s) if EXPECT_KEYS.contains(&s.as_str()) => s.clone(),
            _ => return Err(self.error(quoted(EXPECT_KEYS))),
        };
        self.bump();
        match key.as_str() {
            "euler" => {
                let dependent = self.ident("dependent variable name")?.0;
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Euler {
                    dependent,
                    value: self.sum()?,
                })
            }
            "omega_L" | "l" | "dl" | "omega" => {
                let key = match key.as_str() {
                    "omega_L" => FormKey::OmegaL,
                    "l" => FormKey::L,
                    "dl" => FormKey::Dl,
                    _ => FormKey::Omega,
                };
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Form {
                    key,
                    value: self.sum()?,
                })
            }
            "gauge" => {
                let candidate = self.ident("candidate name")?.0;
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Gauge {
                    candidate,
                    outcome: self.boolean(true)?,
                })
            }
            "contract" => {
                let candidate = self.ident("candidate name")?.0;
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Contract {
                    candidate,
                    value: self.sum()?,
                })
            }
            "symmetry" => {
                let characteristic = self.ident("characteristic name")?.0;
                self.expect_tok(&Tok::Eq)?;
                let value = self.boolean(false)? == GaugeOutcome::True;
                Ok(Expectation::Symmetry { characteristic, value })
            }
            "restrict" => {
                let expr = self.sum()?;
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Restrict {
                    expr,
                    value: self.sum()?,
                })
            }
            _ => {
                let jet = self.coordinate()?;
                self.expect_tok(&Tok::Eq)?;
                Ok(Expectation::Prolong {
                    jet,
                    value: self.sum()?,
                })
            }
        }
    }

    /// A name or jet such as `u[xy]`.
    fn coordinate(&mut self) -> Result<Expr, ParseError> {
        let (name, line, col) = self.ident("variable name")?;
        if self.peek().tok == Tok::LBracket {
            let dirs = self.directions()?;
            Ok(Located::new(Node::Jet(name, dirs), line, col))
        } else {
            Ok(Located::new(Node::Name(name), line, col))
        }
    }

    /// `[xy]` or `[x1,x2]`.
    fn directions(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect_tok(&Tok::LBracket)?;
        let expected: Vec<String> = self.independents.iter().map(|s| format!("'{s}'")).collect();
        let mut words = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Ident(s) => {
                    words.push((s.clone(), self.peek().line, self.peek().col));
                    self.bump();
                }
                _ => return Err(self.error(expected)),
            }
            if self.peek().tok == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_tok(&Tok::RBracket)?;
        let mut dirs = Vec::new();
        let single = words.len() == 1;
        for (w, line, col) in words {
            if self.independents.contains(&w) {
                dirs.push(w);
            } else if single && w.chars().all(|c| self.independents.contains(&c.to_string())) {
                dirs.extend(w.chars().map(|c| c.to_string()));
            } else {
                return Err(ParseError::new(
                    line,
                    col,
                    expected,
                    format!("unknown independent variable in '{w}'"),
                ));
            }
        }
        Ok(dirs)
    }

    pub(crate) fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let ctor = match self.peek().tok {
                Tok::Plus => Node::Add,
                Tok::Minus => Node::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let (line, col) = (lhs.line, lhs.col);
            lhs = Located::new(ctor(Box::new(lhs), Box::new(rhs)), line, col);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let ctor = match self.peek().tok {
                Tok::Star => Node::Mul,
                Tok::Slash => Node::Div,
                Tok::Wedge => Node::Wedge,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let (line, col) = (lhs.line, lhs.col);
            lhs = Located::new(ctor(Box::new(lhs), Box::new(rhs)), line, col);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            let t = self.bump();
            let inner = self.unary()?;
            return Ok(Located::new(Node::Neg(Box::new(inner)), t.line, t.col));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if self.peek().tok == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let t = self.peek().clone();
        let Tok::Int(n) = &t.tok else {
            return Err(self.error(vec!["integer exponent".into()]));
        };
        let k: i32 = i32::try_from(n.clone()).map_err(|_| {
            ParseError::new(
                t.line,
                t.col,
                vec!["integer exponent".into()],
                "exponent too large".into(),
            )
        })?;
        self.bump();
        let (line, col) = (base.line, base.col);
        Ok(Located::new(
            Node::Pow(Box::new(base), if negative { -k } else { k }),
            line,
            col,
        ))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        let at = |node| Located::new(node, t.line, t.col);
        match &t.tok {
            Tok::Int(n) => {
                self.bump();
                Ok(at(Node::Int(n.clone())))
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect_tok(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(word) if word == "d" && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let x = self.ident("independent variable name")?.0;
                self.expect_tok(&Tok::RParen)?;
                Ok(at(Node::Dx(x)))
            }
            Tok::Ident(word) if word == "th" && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let c = self.coordinate()?;
                self.expect_tok(&Tok::RParen)?;
                match c.node {
                    Node::Jet(d, dirs) => Ok(at(Node::Theta(d, dirs))),
                    Node::Name(d) => Ok(at(Node::Theta(d, Vec::new()))),
                    _ => unreachable!("coordinate"),
                }
            }
            Tok::Ident(word) if word == "D" && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let x = self.ident("independent variable name")?.0;
                self.expect_tok(&Tok::Comma)?;
                let e = self.sum()?;
                self.expect_tok(&Tok::RParen)?;
                Ok(at(Node::TotalD(x, Box::new(e))))
            }
            Tok::Ident(word) if !RESERVED.contains(&word.as_str()) => {
                if *self.peek_at(1) == Tok::LBrace {
                    let name = word.clone();
                    self.bump();
                    self.bump();
                    let mut pos = vec![self.position()?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        pos.push(self.position()?);
                    }
                    self.expect_tok(&Tok::RBrace)?;
                    return Ok(at(Node::Partial(name, pos)));
                }
                self.coordinate()
            }
            _ => Err(self.error(vec![
                "number".into(),
                "name".into(),
                "'('".into(),
                "'-'".into(),
                "'d'".into(),
                "'th'".into(),
                "'D'".into(),
            ])),
        }
    }

    fn position(&mut self) -> Result<usize, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Int(n) => {
                let p = usize::try_from(n.clone()).ok().filter(|p| *p >= 1);
                let Some(p) = p else {
                    return Err(ParseError::new(
                        t.line,
                        t.col,
                        vec!["argument position".into()],
                        "positions start at 1".into(),
                    ));
                };
                self.bump();
                Ok(p)
            }
            _ => Err(self.error(vec!["argument position".into()])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::serialize;

    #[test]
    fn empty_file() {
        let e = parse("").unwrap_err();
        assert_eq!(e.expected, vec!["'independents'".to_string()]);
        assert_eq!((e.line, e.col), (1, 1));
        let e = parse("# only a comment\n\n").unwrap_err();
        assert_eq!(e.expected, vec!["'independents'".to_string()]);
    }

    #[test]
    fn located_errors() {
        let e = parse("independents x y\ndependents u\nequation u[yy] = -u[xx] +\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.expected.contains(&"number".to_string()));
        let e = parse("independents x y\ndependents u\nequation u[yz] = 0\n").unwrap_err();
        assert_eq!((e.line, e.col), (3, 12));
        let e = parse("independents x d\n").unwrap_err();
        assert_eq!((e.line, e.col), (1, 16));
        let e = parse("independents x\ndependents u\nexpect bogus = 1\n").unwrap_err();
        assert!(e.expected.contains(&"'omega_L'".to_string()));
    }

    #[test]
    fn precedence() {
        let ind = vec!["x".to_string(), "y".to_string()];
        let a = parse_expression("-u^2 * 3 + x / y - u[x] /\\ d(x)", &ind).unwrap();
        assert_eq!(serialize::expr(&a), "-u^2 * 3 + x / y - u[x] /\\ d(x)");
        let b = parse_expression("a - (b - c)", &ind).unwrap();
        assert_eq!(serialize::expr(&b), "a - (b - c)");
        let c = parse_expression("(-u)^-1 * f{1,2} + D(x, u[y])", &ind).unwrap();
        assert_eq!(serialize::expr(&c), "(-u)^-1 * f{1,2} + D(x, u[y])");
    }

    #[test]
    fn blocks() {
        let src = "independents x y\ndependents u\ncandidate X { u -> 1; u[y] -> x }\ncandidate Y {\n  u -> y\n\n  u[y] -> 2\n}\n";
        let p = parse(src).unwrap();
        match &p.statements[3].node {
            Statement::Candidate { entries, .. } => assert_eq!(entries.len(), 2),
            other => panic!("{other:?}"),
        }
        let again = parse(&serialize::program(&p)).unwrap();
        assert_eq!(again, p);
    }
}
