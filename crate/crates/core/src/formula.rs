//! Abstract syntax, concrete syntax and syntactic utilities for PECTL+N.
//!
//! The core constructors are exactly the logic's grammar. Everything else
//! (`false`, `|`, `->`, `<->`, `A`, `F`, `G`, `Ginf`, `P`, `H`) is expanded by
//! the parser. Disjunction is `!(!a & !b)` and `A ψ` is `!E(!ψ)`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateFormula {
    True,
    Prop(String),
    And(Box<StateFormula>, Box<StateFormula>),
    Not(Box<StateFormula>),
    Exists(Box<PathFormula>),
    Now(Box<StateFormula>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathFormula {
    State(Box<StateFormula>),
    And(Box<PathFormula>, Box<PathFormula>),
    Not(Box<PathFormula>),
    Next(Box<StateFormula>),
    Until(Box<StateFormula>, Box<StateFormula>),
    InfOften(Box<StateFormula>),
    Yesterday(Box<StateFormula>),
    Since(Box<StateFormula>, Box<StateFormula>),
}

use PathFormula as P;
use StateFormula as S;

impl StateFormula {
    pub fn prop(name: &str) -> Self {
        S::Prop(name.to_string())
    }

    pub fn ff() -> Self {
        S::Not(Box::new(S::True))
    }

    pub fn and(a: S, b: S) -> Self {
        S::And(Box::new(a), Box::new(b))
    }

    /// Raw negation, keeps double negations.
    pub fn not(a: S) -> Self {
        S::Not(Box::new(a))
    }

    /// Negation that identifies `!!f` with `f`.
    pub fn neg(a: S) -> Self {
        match a {
            S::Not(x) => *x,
            other => S::Not(Box::new(other)),
        }
    }

    pub fn or(a: S, b: S) -> Self {
        S::not(S::and(S::neg(a), S::neg(b)))
    }

    pub fn implies(a: S, b: S) -> Self {
        S::not(S::and(a, S::neg(b)))
    }

    pub fn iff(a: S, b: S) -> Self {
        S::and(S::implies(a.clone(), b.clone()), S::implies(b, a))
    }

    pub fn conj(items: impl IntoIterator<Item = S>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => S::True,
            Some(first) => it.fold(first, S::and),
        }
    }

    pub fn disj(items: impl IntoIterator<Item = S>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => S::ff(),
            Some(first) => it.fold(first, S::or),
        }
    }

    pub fn exists(p: P) -> Self {
        S::Exists(Box::new(p))
    }

    pub fn forall(p: P) -> Self {
        S::not(S::exists(P::not(p)))
    }

    pub fn now(a: S) -> Self {
        S::Now(Box::new(a))
    }

    pub fn ex(a: S) -> Self {
        S::exists(P::next(a))
    }

    pub fn ax(a: S) -> Self {
        S::forall(P::next(a))
    }

    pub fn ef(a: S) -> Self {
        S::exists(P::finally(a))
    }

    pub fn af(a: S) -> Self {
        S::forall(P::finally(a))
    }

    pub fn eg(a: S) -> Self {
        S::exists(P::globally(a))
    }

    pub fn ag(a: S) -> Self {
        S::forall(P::globally(a))
    }

    pub fn eu(a: S, b: S) -> Self {
        S::exists(P::until(a, b))
    }

    /// Past operators used at state level (their truth does not depend on the path).
    pub fn yesterday(a: S) -> Self {
        S::exists(P::yesterday(a))
    }

    pub fn once(a: S) -> Self {
        S::exists(P::since(S::True, a))
    }

    pub fn historically(a: S) -> Self {
        S::not(S::exists(P::since(S::True, S::neg(a))))
    }

    /// Number of symbols: propositions, constants and operators.
    pub fn size(&self) -> usize {
        match self {
            S::True | S::Prop(_) => 1,
            S::And(a, b) => 1 + a.size() + b.size(),
            S::Not(a) | S::Now(a) => 1 + a.size(),
            S::Exists(p) => 1 + p.size(),
        }
    }

    /// Number of operators (symbols minus leaves).
    pub fn connectives(&self) -> usize {
        match self {
            S::True | S::Prop(_) => 0,
            S::And(a, b) => 1 + a.connectives() + b.connectives(),
            S::Not(a) | S::Now(a) => 1 + a.connectives(),
            S::Exists(p) => 1 + p.connectives(),
        }
    }

    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            S::True => {}
            S::Prop(p) => {
                out.insert(p.clone());
            }
            S::And(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
            S::Not(a) | S::Now(a) => a.collect_props(out),
            S::Exists(p) => p.for_each_state_arg(&mut |s| s.collect_props(out)),
        }
    }

    pub fn is_false(&self) -> bool {
        matches!(self, S::Not(x) if **x == S::True)
    }
}

impl PathFormula {
    pub fn state(s: S) -> Self {
        P::State(Box::new(s))
    }

    /// Conjunction; two state embeds fold into one.
    pub fn and(a: P, b: P) -> Self {
        match (a, b) {
            (P::State(x), P::State(y)) => P::State(Box::new(S::and(*x, *y))),
            (a, b) => P::And(Box::new(a), Box::new(b)),
        }
    }

    /// Negation; collapses `!!ψ` and pushes into state embeds.
    pub fn not(a: P) -> Self {
        match a {
            P::Not(x) => *x,
            P::State(s) => P::State(Box::new(S::neg(*s))),
            other => P::Not(Box::new(other)),
        }
    }

    pub fn or(a: P, b: P) -> Self {
        P::not(P::and(P::not(a), P::not(b)))
    }

    pub fn next(a: S) -> Self {
        P::Next(Box::new(a))
    }

    pub fn until(a: S, b: S) -> Self {
        P::Until(Box::new(a), Box::new(b))
    }

    pub fn finally(a: S) -> Self {
        P::until(S::True, a)
    }

    pub fn globally(a: S) -> Self {
        P::not(P::finally(S::neg(a)))
    }

    pub fn inf_often(a: S) -> Self {
        P::InfOften(Box::new(a))
    }

    pub fn yesterday(a: S) -> Self {
        P::Yesterday(Box::new(a))
    }

    pub fn since(a: S, b: S) -> Self {
        P::Since(Box::new(a), Box::new(b))
    }

    pub fn size(&self) -> usize {
        match self {
            P::State(s) => s.size(),
            P::And(a, b) => 1 + a.size() + b.size(),
            P::Not(a) => 1 + a.size(),
            P::Next(a) | P::InfOften(a) | P::Yesterday(a) => 1 + a.size(),
            P::Until(a, b) | P::Since(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn connectives(&self) -> usize {
        match self {
            P::State(s) => s.connectives(),
            P::And(a, b) => 1 + a.connectives() + b.connectives(),
            P::Not(a) => 1 + a.connectives(),
            P::Next(a) | P::InfOften(a) | P::Yesterday(a) => 1 + a.connectives(),
            P::Until(a, b) | P::Since(a, b) => 1 + a.connectives() + b.connectives(),
        }
    }

    /// Visits the state formulas directly below this path formula's
    /// Boolean structure (embeds and temporal operator arguments).
    pub fn for_each_state_arg(&self, f: &mut impl FnMut(&S)) {
        match self {
            P::State(s) | P::Next(s) | P::InfOften(s) | P::Yesterday(s) => f(s),
            P::Until(a, b) | P::Since(a, b) => {
                f(a);
                f(b);
            }
            P::And(a, b) => {
                a.for_each_state_arg(f);
                b.for_each_state_arg(f);
            }
            P::Not(a) => a.for_each_state_arg(f),
        }
    }

    pub fn is_temporal_atom(&self) -> bool {
        matches!(
            self,
            P::Next(_) | P::Until(..) | P::InfOften(_) | P::Yesterday(_) | P::Since(..)
        )
    }

    /// A temporal atom or the negation of one: the shapes that are not
    /// Boolean combinations of path formulas.
    pub fn is_literal(&self) -> bool {
        match self {
            P::Not(x) => x.is_temporal_atom(),
            other => other.is_temporal_atom() || matches!(other, P::State(_)),
        }
    }
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared proposition `{name}` at position {pos}")]
    Undeclared { name: String, pos: usize },
    #[error("outside PECTL+N at position {pos}: {msg}")]
    OutsideFragment { pos: usize, msg: String },
    #[error("formula file: {0}")]
    File(String),
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Bang,
    Amp,
    Bar,
    Arrow,
    DArrow,
    LParen,
    RParen,
    Op(UnOp),
    Quant(bool),
    Bin(BinOp),
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnOp {
    X,
    F,
    G,
    Finf,
    Ginf,
    Y,
    P,
    H,
    N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    U,
    S,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '!' => {
                i += 1;
                Tok::Bang
            }
            '&' => {
                i += 1;
                Tok::Amp
            }
            '|' => {
                i += 1;
                Tok::Bar
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 2;
                Tok::Arrow
            }
            '<' if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') => {
                i += 3;
                Tok::DArrow
            }
            c if c.is_ascii_lowercase() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word),
                }
            }
            c if c.is_ascii_uppercase() => {
                let rest: String = chars[i..].iter().take(4).collect();
                if rest == "Finf" || rest == "Ginf" {
                    i += 4;
                    Tok::Op(if rest == "Finf" {
                        UnOp::Finf
                    } else {
                        UnOp::Ginf
                    })
                } else {
                    i += 1;
                    match c {
                        'E' => Tok::Quant(true),
                        'A' => Tok::Quant(false),
                        'X' => Tok::Op(UnOp::X),
                        'F' => Tok::Op(UnOp::F),
                        'G' => Tok::Op(UnOp::G),
                        'Y' => Tok::Op(UnOp::Y),
                        'P' => Tok::Op(UnOp::P),
                        'H' => Tok::Op(UnOp::H),
                        'N' => Tok::Op(UnOp::N),
                        'U' => Tok::Bin(BinOp::U),
                        'S' => Tok::Bin(BinOp::S),
                        other => {
                            return Err(FormulaError::Syntax {
                                pos: start,
                                msg: format!("unknown operator `{other}`"),
                            })
                        }
                    }
                }
            }
            other => {
                return Err(FormulaError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::Eof, chars.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Untyped parse tree

#[derive(Debug)]
enum Expr {
    Prop(String),
    True,
    False,
    Not(Box<Ex>),
    And(Box<Ex>, Box<Ex>),
    Or(Box<Ex>, Box<Ex>),
    Imp(Box<Ex>, Box<Ex>),
    Iff(Box<Ex>, Box<Ex>),
    Quant(bool, Box<Ex>),
    Un(UnOp, Box<Ex>),
    Bin(BinOp, Box<Ex>, Box<Ex>),
}

#[derive(Debug)]
struct Ex {
    e: Expr,
    pos: usize,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            pos: self.pos(),
            msg: msg.to_string(),
        })
    }

    fn implication(&mut self) -> Result<Ex, FormulaError> {
        let lhs = self.disjunction()?;
        let pos = self.pos();
        match self.peek() {
            Tok::Arrow => {
                self.bump();
                let rhs = self.implication()?;
                Ok(Ex {
                    e: Expr::Imp(Box::new(lhs), Box::new(rhs)),
                    pos,
                })
            }
            Tok::DArrow => {
                self.bump();
                let rhs = self.implication()?;
                Ok(Ex {
                    e: Expr::Iff(Box::new(lhs), Box::new(rhs)),
                    pos,
                })
            }
            _ => Ok(lhs),
        }
    }

    fn disjunction(&mut self) -> Result<Ex, FormulaError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Bar {
            let pos = self.pos();
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Ex {
                e: Expr::Or(Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ex, FormulaError> {
        let mut lhs = self.binary()?;
        while *self.peek() == Tok::Amp {
            let pos = self.pos();
            self.bump();
            let rhs = self.binary()?;
            lhs = Ex {
                e: Expr::And(Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn binary(&mut self) -> Result<Ex, FormulaError> {
        let lhs = self.unary()?;
        if let Tok::Bin(op) = *self.peek() {
            let pos = self.pos();
            self.bump();
            let rhs = self.binary()?;
            return Ok(Ex {
                e: Expr::Bin(op, Box::new(lhs), Box::new(rhs)),
                pos,
            });
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ex, FormulaError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let sub = self.unary()?;
                Ok(Ex {
                    e: Expr::Not(Box::new(sub)),
                    pos,
                })
            }
            Tok::Op(op) => {
                self.bump();
                let sub = self.unary()?;
                Ok(Ex {
                    e: Expr::Un(op, Box::new(sub)),
                    pos,
                })
            }
            Tok::Quant(e) => {
                self.bump();
                let sub = self.unary()?;
                Ok(Ex {
                    e: Expr::Quant(e, Box::new(sub)),
                    pos,
                })
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Ex, FormulaError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(name) => Ok(Ex {
                e: Expr::Prop(name),
                pos,
            }),
            Tok::True => Ok(Ex { e: Expr::True, pos }),
            Tok::False => Ok(Ex {
                e: Expr::False,
                pos,
            }),
            Tok::LParen => {
                let inner = self.implication()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::Eof => Err(FormulaError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            t => Err(FormulaError::Syntax {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
        }
    }
}

fn state_like(e: &Ex) -> bool {
    match &e.e {
        Expr::Prop(_) | Expr::True | Expr::False | Expr::Quant(..) => true,
        Expr::Un(UnOp::N, _) => true,
        Expr::Un(..) | Expr::Bin(..) => false,
        Expr::Not(a) => state_like(a),
        Expr::And(a, b) | Expr::Or(a, b) | Expr::Imp(a, b) | Expr::Iff(a, b) => {
            state_like(a) && state_like(b)
        }
    }
}

struct Typer<'a> {
    alphabet: &'a BTreeSet<String>,
}

impl Typer<'_> {
    fn state(&self, e: &Ex) -> Result<S, FormulaError> {
        Ok(match &e.e {
            Expr::Prop(name) => {
                if !self.alphabet.contains(name) {
                    return Err(FormulaError::Undeclared {
                        name: name.clone(),
                        pos: e.pos,
                    });
                }
                S::Prop(name.clone())
            }
            Expr::True => S::True,
            Expr::False => S::ff(),
            Expr::Not(a) => S::not(self.state(a)?),
            Expr::And(a, b) => S::and(self.state(a)?, self.state(b)?),
            Expr::Or(a, b) => S::or(self.state(a)?, self.state(b)?),
            Expr::Imp(a, b) => S::implies(self.state(a)?, self.state(b)?),
            Expr::Iff(a, b) => S::iff(self.state(a)?, self.state(b)?),
            Expr::Quant(true, a) => S::exists(self.path(a)?),
            Expr::Quant(false, a) => S::forall(self.path(a)?),
            Expr::Un(UnOp::N, a) => S::now(self.state(a)?),
            Expr::Un(UnOp::Y, a) => S::yesterday(self.state(a)?),
            Expr::Un(UnOp::P, a) => S::once(self.state(a)?),
            Expr::Un(UnOp::H, a) => S::historically(self.state(a)?),
            Expr::Bin(BinOp::S, a, b) => S::exists(P::since(self.state(a)?, self.state(b)?)),
            Expr::Un(op, _) => {
                return Err(FormulaError::OutsideFragment {
                    pos: e.pos,
                    msg: format!("future operator {op:?} outside a path quantifier"),
                })
            }
            Expr::Bin(BinOp::U, _, _) => {
                return Err(FormulaError::OutsideFragment {
                    pos: e.pos,
                    msg: "U outside a path quantifier".into(),
                })
            }
        })
    }

    /// Argument of a temporal operator: must be a state formula.
    fn arg(&self, e: &Ex) -> Result<S, FormulaError> {
        self.state(e).map_err(|err| match err {
            FormulaError::OutsideFragment { .. } => FormulaError::OutsideFragment {
                pos: e.pos,
                msg: "temporal operator applied to a path formula".into(),
            },
            other => other,
        })
    }

    fn path(&self, e: &Ex) -> Result<P, FormulaError> {
        if state_like(e) {
            return Ok(P::state(self.state(e)?));
        }
        Ok(match &e.e {
            Expr::Not(a) => P::not(self.path(a)?),
            Expr::And(a, b) => P::and(self.path(a)?, self.path(b)?),
            Expr::Or(a, b) => P::or(self.path(a)?, self.path(b)?),
            Expr::Imp(a, b) => P::or(P::not(self.path(a)?), self.path(b)?),
            Expr::Iff(a, b) => {
                let (x, y) = (self.path(a)?, self.path(b)?);
                P::and(P::or(P::not(x.clone()), y.clone()), P::or(P::not(y), x))
            }
            Expr::Un(op, a) => {
                let s = self.arg(a)?;
                match op {
                    UnOp::X => P::next(s),
                    UnOp::F => P::finally(s),
                    UnOp::G => P::globally(s),
                    UnOp::Finf => P::inf_often(s),
                    UnOp::Ginf => P::not(P::inf_often(S::neg(s))),
                    UnOp::Y => P::yesterday(s),
                    UnOp::P => P::since(S::True, s),
                    UnOp::H => P::not(P::since(S::True, S::neg(s))),
                    UnOp::N => unreachable!("N is state-like"),
                }
            }
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.arg(a)?, self.arg(b)?);
                match op {
                    BinOp::U => P::until(x, y),
                    BinOp::S => P::since(x, y),
                }
            }
            _ => unreachable!("state-like expressions handled above"),
        })
    }
}

/// Parses a formula over the declared proposition alphabet.
pub fn parse<I, T>(text: &str, alphabet: I) -> Result<StateFormula, FormulaError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let alphabet: BTreeSet<String> = alphabet
        .into_iter()
        .map(|s| s.as_ref().to_string())
        .collect();
    let mut parser = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let expr = parser.implication()?;
    if *parser.peek() != Tok::Eof {
        return parser.err("trailing input");
    }
    Typer {
        alphabet: &alphabet,
    }
    .state(&expr)
}

/// A parsed formula file: `props: p q r` on the first line, then the formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaFile {
    pub props: Vec<String>,
    pub formula: StateFormula,
}

pub fn parse_file(text: &str) -> Result<FormulaFile, FormulaError> {
    let mut lines = text.lines();
    let header = lines
        .by_ref()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| FormulaError::File("empty input".into()))?;
    let rest = header
        .trim()
        .strip_prefix("props:")
        .ok_or_else(|| FormulaError::File("first line must be `props: ...`".into()))?;
    let props: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
    for p in &props {
        let ok = p
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_lowercase() || c == '_')
            && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && p != "true"
            && p != "false";
        if !ok {
            return Err(FormulaError::File(format!(
                "invalid proposition name `{p}`"
            )));
        }
    }
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let formula = parse(&body, &props)?;
    Ok(FormulaFile { props, formula })
}

pub fn format_file(props: &[String], f: &StateFormula) -> String {
    format!("props: {}\n{}\n", props.join(" "), print(f))
}

// ---------------------------------------------------------------------------
// Printer

pub fn print(f: &StateFormula) -> String {
    let mut out = String::new();
    write_state(f, &mut out);
    out
}

pub fn print_path(p: &PathFormula) -> String {
    let mut out = String::new();
    write_path(p, &mut out);
    out
}

fn write_state(f: &S, out: &mut String) {
    match f {
        S::True => out.push_str("true"),
        S::Prop(p) => out.push_str(p),
        S::Not(x) if **x == S::True => out.push_str("false"),
        S::And(a, b) => {
            out.push('(');
            write_state(a, out);
            out.push_str(" & ");
            write_state(b, out);
            out.push(')');
        }
        S::Not(a) => {
            out.push('!');
            write_state(a, out);
        }
        S::Now(a) => {
            out.push_str("N ");
            write_state(a, out);
        }
        S::Exists(p) => {
            out.push_str("E(");
            let mut inner = String::new();
            write_path(p, &mut inner);
            let strip = matches!(**p, P::And(..) | P::Until(..) | P::Since(..));
            if strip {
                out.push_str(&inner[1..inner.len() - 1]);
            } else {
                out.push_str(&inner);
            }
            out.push(')');
        }
    }
}

fn write_path(p: &P, out: &mut String) {
    match p {
        P::State(s) => write_state(s, out),
        P::And(a, b) => {
            out.push('(');
            write_path(a, out);
            out.push_str(" & ");
            write_path(b, out);
            out.push(')');
        }
        P::Not(a) => {
            out.push('!');
            write_path(a, out);
        }
        P::Next(a) => {
            out.push_str("X ");
            write_state(a, out);
        }
        P::InfOften(a) => {
            out.push_str("Finf ");
            write_state(a, out);
        }
        P::Yesterday(a) => {
            out.push_str("Y ");
            write_state(a, out);
        }
        P::Until(a, b) | P::Since(a, b) => {
            out.push('(');
            write_state(a, out);
            out.push_str(if matches!(p, P::Until(..)) {
                " U "
            } else {
                " S "
            });
            write_state(b, out);
            out.push(')');
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_path(self))
    }
}

// ---------------------------------------------------------------------------
// Duals

/// Swaps conjunction and disjunction throughout the Boolean structure and
/// negates every maximal non-Boolean subformula. `!!ψ` counts as `ψ`.
pub fn dual(psi: &PathFormula) -> PathFormula {
    match psi {
        P::State(s) => P::state(dual_state(s)),
        P::And(a, b) => P::or(dual(a), dual(b)),
        P::Not(inner) => match &**inner {
            P::And(a, b) => P::and(dual(&P::not((**a).clone())), dual(&P::not((**b).clone()))),
            atom => atom.clone(),
        },
        atom => P::not(atom.clone()),
    }
}

pub fn dual_state(f: &StateFormula) -> StateFormula {
    match f {
        S::And(a, b) => S::or(dual_state(a), dual_state(b)),
        S::Not(inner) => match &**inner {
            S::And(a, b) => S::and(
                dual_state(&S::neg((**a).clone())),
                dual_state(&S::neg((**b).clone())),
            ),
            atom => atom.clone(),
        },
        atom => S::not(atom.clone()),
    }
}

// ---------------------------------------------------------------------------
// Closure

/// Companion formula `(EX EF∞ψ) ∧ ψ` for `EF∞ψ`.
pub fn finf_companion(psi: &StateFormula) -> StateFormula {
    let efinf = S::exists(P::inf_often(psi.clone()));
    S::and(S::ex(efinf), psi.clone())
}

/// All state subformulas, including those below path operators.
pub fn state_subformulas(f: &StateFormula) -> BTreeSet<StateFormula> {
    let mut out = BTreeSet::new();
    collect_subformulas(f, &mut out);
    out
}

fn collect_subformulas(f: &S, out: &mut BTreeSet<S>) {
    if !out.insert(f.clone()) {
        return;
    }
    match f {
        S::True | S::Prop(_) => {}
        S::And(a, b) => {
            collect_subformulas(a, out);
            collect_subformulas(b, out);
        }
        S::Not(a) | S::Now(a) => collect_subformulas(a, out),
        S::Exists(p) => p.for_each_state_arg(&mut |s| collect_subformulas(s, out)),
    }
}

pub fn closure(f: &StateFormula) -> BTreeSet<StateFormula> {
    let mut base = state_subformulas(f);
    let finf: Vec<S> = base
        .iter()
        .filter_map(|s| match s {
            S::Exists(p) => match &**p {
                P::InfOften(psi) => Some((**psi).clone()),
                _ => None,
            },
            _ => None,
        })
        .collect();
    for psi in finf {
        let comp = finf_companion(&psi);
        if let S::And(ex, _) = &comp {
            base.insert((**ex).clone());
        }
        base.insert(comp);
    }
    let mut out = BTreeSet::new();
    for s in base {
        out.insert(S::neg(s.clone()));
        out.insert(s);
    }
    out
}

// ---------------------------------------------------------------------------
// Fragments

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct FragmentProfile {
    pub uses_until: bool,
    pub uses_fairness: bool,
    pub uses_past: bool,
    pub uses_now: bool,
    pub uses_path_boolean: bool,
    pub fragment_name: String,
}

impl FragmentProfile {
    /// PECTL: no N and no Boolean combinations of path formulas.
    pub fn is_pectl(&self) -> bool {
        !self.uses_now && !self.uses_path_boolean
    }
}

pub fn fragment_name(
    until: bool,
    fairness: bool,
    past: bool,
    now: bool,
    path_boolean: bool,
) -> String {
    let base = if fairness {
        "ECTL"
    } else if until {
        "CTL"
    } else {
        "UB"
    };
    format!(
        "{}{}{}{}",
        if past { "P" } else { "" },
        base,
        if path_boolean { "+" } else { "" },
        if now { "N" } else { "" }
    )
}

pub fn classify(f: &StateFormula) -> FragmentProfile {
    let mut prof = FragmentProfile::default();
    classify_state(f, &mut prof);
    prof.fragment_name = fragment_name(
        prof.uses_until,
        prof.uses_fairness,
        prof.uses_past,
        prof.uses_now,
        prof.uses_path_boolean,
    );
    prof
}

fn classify_state(f: &S, prof: &mut FragmentProfile) {
    match f {
        S::True | S::Prop(_) => {}
        S::And(a, b) => {
            classify_state(a, prof);
            classify_state(b, prof);
        }
        S::Not(a) => classify_state(a, prof),
        S::Now(a) => {
            prof.uses_now = true;
            classify_state(a, prof);
        }
        S::Exists(p) => {
            if !p.is_literal() {
                prof.uses_path_boolean = true;
            }
            classify_path(p, prof);
        }
    }
}

fn classify_path(p: &P, prof: &mut FragmentProfile) {
    match p {
        P::State(s) => classify_state(s, prof),
        P::And(a, b) => {
            classify_path(a, prof);
            classify_path(b, prof);
        }
        P::Not(a) => classify_path(a, prof),
        P::Next(a) => classify_state(a, prof),
        P::Until(a, b) => {
            if **a != S::True {
                prof.uses_until = true;
            }
            classify_state(a, prof);
            classify_state(b, prof);
        }
        P::InfOften(a) => {
            prof.uses_fairness = true;
            classify_state(a, prof);
        }
        P::Yesterday(a) => {
            prof.uses_past = true;
            classify_state(a, prof);
        }
        P::Since(a, b) => {
            prof.uses_past = true;
            classify_state(a, prof);
            classify_state(b, prof);
        }
    }
}
