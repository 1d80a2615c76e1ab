//! Temporal formula syntax: AST, parser, printer and the rewrites the
//! decision procedures rely on.
//!
//! `G` and `H` never survive parsing; they are stored as `~F~` and `~P~`.
//! Double negations are collapsed by [`Formula::negate`], so a formula
//! and its negation always form a complementary pair.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// Somewhere in the future.
    F(Box<Formula>),
    /// Somewhere in the past.
    P(Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    /// Negation with `~~x` collapsed to `x`.
    pub fn negate(&self) -> Self {
        match self {
            Formula::Not(inner) => (**inner).clone(),
            other => Formula::Not(Box::new(other.clone())),
        }
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn future(a: Formula) -> Self {
        Formula::F(Box::new(a))
    }

    pub fn past(a: Formula) -> Self {
        Formula::P(Box::new(a))
    }

    /// `G a`, stored as `~F~a`.
    pub fn always_future(a: Formula) -> Self {
        Formula::future(a.negate()).negate()
    }

    /// `H a`, stored as `~P~a`.
    pub fn always_past(a: Formula) -> Self {
        Formula::past(a.negate()).negate()
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) => 1,
            Formula::Not(a) | Formula::F(a) | Formula::P(a) => 1 + a.size(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(a) | Formula::F(a) | Formula::P(a) => 1 + a.depth(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(_) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Implies(..) => 4,
            Formula::F(_) => 5,
            Formula::P(_) => 6,
        }
    }

    pub fn is_temporal_free(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::F(_) | Formula::P(_) => false,
            Formula::Not(a) => a.is_temporal_free(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
                a.is_temporal_free() && b.is_temporal_free()
            }
        }
    }

    /// Propositional letters in order of first occurrence.
    pub fn letters(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Formula::Not(a) | Formula::F(a) | Formula::P(a) => a.collect_letters(out),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
                a.collect_letters(out);
                b.collect_letters(out);
            }
        }
    }

    /// Every subformula occurrence, parents after children.
    pub fn subformulas(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        self.collect_subformulas(&mut out);
        out
    }

    fn collect_subformulas<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self {
            Formula::Atom(_) => {}
            Formula::Not(a) | Formula::F(a) | Formula::P(a) => a.collect_subformulas(out),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) => {
                a.collect_subformulas(out);
                b.collect_subformulas(out);
            }
        }
        out.push(self);
    }

    /// Rewrites `F a` to `a | F a` and `P a` to `a | P a`, innermost first.
    /// Satisfiability over the reflexive product frame equals satisfiability
    /// of the result over the irreflexive frame.
    pub fn reflexive_reduction(&self) -> Formula {
        match self {
            Formula::Atom(_) => self.clone(),
            Formula::Not(a) => Formula::Not(Box::new(a.reflexive_reduction())),
            Formula::Or(a, b) => Formula::or(a.reflexive_reduction(), b.reflexive_reduction()),
            Formula::And(a, b) => Formula::and(a.reflexive_reduction(), b.reflexive_reduction()),
            Formula::Implies(a, b) => {
                Formula::implies(a.reflexive_reduction(), b.reflexive_reduction())
            }
            Formula::F(a) => {
                let r = a.reflexive_reduction();
                Formula::or(r.clone(), Formula::future(r))
            }
            Formula::P(a) => {
                let r = a.reflexive_reduction();
                Formula::or(r.clone(), Formula::past(r))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Formula, ParseError> {
        Parser::new(text)?.parse_all()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_prec(&mut out, 0);
        out
    }

    // Precedence levels: 0 implication, 1 disjunction, 2 conjunction, 3 unary.
    fn write_prec(&self, out: &mut String, ctx: u8) {
        let own = match self {
            Formula::Implies(..) => 0,
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            _ => 3,
        };
        let paren = own < ctx;
        if paren {
            out.push('(');
        }
        match self {
            Formula::Atom(name) => out.push_str(name),
            Formula::Not(inner) => match &**inner {
                Formula::F(x) if matches!(&**x, Formula::Not(_)) => {
                    out.push_str("G ");
                    x.negate().write_prec(out, 3);
                }
                Formula::P(x) if matches!(&**x, Formula::Not(_)) => {
                    out.push_str("H ");
                    x.negate().write_prec(out, 3);
                }
                _ => {
                    out.push('~');
                    inner.write_prec(out, 3);
                }
            },
            Formula::F(a) => {
                out.push_str("F ");
                a.write_prec(out, 3);
            }
            Formula::P(a) => {
                out.push_str("P ");
                a.write_prec(out, 3);
            }
            Formula::Implies(a, b) => {
                a.write_prec(out, 1);
                out.push_str(" -> ");
                b.write_prec(out, 0);
            }
            Formula::Or(a, b) => {
                a.write_prec(out, 1);
                out.push_str(" | ");
                b.write_prec(out, 2);
            }
            Formula::And(a, b) => {
                a.write_prec(out, 2);
                out.push_str(" & ");
                b.write_prec(out, 3);
            }
        }
        if paren {
            out.push(')');
        }
    }
}

/// Structural order: size first, then operator, then children left to right.
impl Ord for Formula {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size()
            .cmp(&other.size())
            .then_with(|| self.tag().cmp(&other.tag()))
            .then_with(|| match (self, other) {
                (Formula::Atom(a), Formula::Atom(b)) => a.cmp(b),
                (Formula::Not(a), Formula::Not(b))
                | (Formula::F(a), Formula::F(b))
                | (Formula::P(a), Formula::P(b)) => a.cmp(b),
                (Formula::Or(a, b), Formula::Or(c, d))
                | (Formula::And(a, b), Formula::And(c, d))
                | (Formula::Implies(a, b), Formula::Implies(c, d)) => {
                    a.cmp(c).then_with(|| b.cmp(d))
                }
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Letter(String),
    Not,
    Future,
    Past,
    Always,
    Historically,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let bytes = text.as_bytes();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let start = i;
            let tok = match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    i += 1;
                    continue;
                }
                b'~' => Token::Not,
                b'F' => Token::Future,
                b'P' => Token::Past,
                b'G' => Token::Always,
                b'H' => Token::Historically,
                b'&' => Token::And,
                b'|' => Token::Or,
                b'(' => Token::LParen,
                b')' => Token::RParen,
                b'-' => {
                    if bytes.get(i + 1) == Some(&b'>') {
                        i += 1;
                        Token::Arrow
                    } else {
                        return Err(ParseError {
                            position: i,
                            message: "expected '->'".into(),
                        });
                    }
                }
                b'a'..=b'z' => {
                    let mut j = i + 1;
                    while j < bytes.len()
                        && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                    {
                        j += 1;
                    }
                    let name = text[i..j].to_string();
                    i = j;
                    tokens.push((start, Token::Letter(name)));
                    continue;
                }
                _ => {
                    return Err(ParseError {
                        position: i,
                        message: format!("unexpected character {:?}", c as char),
                    })
                }
            };
            i += 1;
            tokens.push((start, tok));
        }
        Ok(Parser {
            tokens,
            pos: 0,
            end: text.len(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.here(),
            message: message.into(),
        }
    }

    fn parse_all(mut self) -> Result<Formula, ParseError> {
        let f = self.implication()?;
        if self.pos != self.tokens.len() {
            return Err(self.error("trailing input"));
        }
        Ok(f)
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Token::Arrow) {
            self.pos += 1;
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.conjunction()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.conjunction()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        match tok {
            Token::Not => {
                self.pos += 1;
                Ok(self.unary()?.negate())
            }
            Token::Future => {
                self.pos += 1;
                Ok(Formula::future(self.unary()?))
            }
            Token::Past => {
                self.pos += 1;
                Ok(Formula::past(self.unary()?))
            }
            Token::Always => {
                self.pos += 1;
                Ok(Formula::always_future(self.unary()?))
            }
            Token::Historically => {
                self.pos += 1;
                Ok(Formula::always_past(self.unary()?))
            }
            Token::Letter(name) => {
                self.pos += 1;
                Ok(Formula::Atom(name))
            }
            Token::LParen => {
                self.pos += 1;
                let inner = self.implication()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.error("expected a formula")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Formula {
        Formula::atom("p")
    }
    fn q() -> Formula {
        Formula::atom("q")
    }

    #[test]
    fn unary_binds_tightest() {
        let f = Formula::parse("F p & ~q").unwrap();
        assert_eq!(f, Formula::and(Formula::future(p()), q().negate()));
    }

    #[test]
    fn implication_is_right_associative() {
        let f = Formula::parse("p -> q -> r").unwrap();
        assert_eq!(
            f,
            Formula::implies(p(), Formula::implies(q(), Formula::atom("r")))
        );
    }

    #[test]
    fn always_expands_to_negated_future() {
        let f = Formula::parse("G(p | P q)").unwrap();
        let inner = Formula::or(p(), Formula::past(q()));
        assert_eq!(
            f,
            Formula::Not(Box::new(Formula::future(Formula::Not(Box::new(inner)))))
        );
    }

    #[test]
    fn double_negation_collapses() {
        assert_eq!(Formula::parse("~~p").unwrap(), p());
        assert_eq!(p().negate().negate(), p());
        assert_eq!(p().negate(), Formula::Not(Box::new(p())));
        // G~p is ~F p, not ~F~~p.
        assert_eq!(
            Formula::parse("G ~p").unwrap(),
            Formula::future(p()).negate()
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = Formula::parse("p & ").unwrap_err();
        assert_eq!(e.position, 4);
        let e = Formula::parse("p - q").unwrap_err();
        assert_eq!(e.position, 2);
        let e = Formula::parse("(p | q").unwrap_err();
        assert_eq!(e.position, 6);
        assert!(Formula::parse("p q").is_err());
        assert!(Formula::parse("Q").is_err());
    }

    #[test]
    fn reflexive_reduction_examples() {
        let fp = Formula::parse("F p").unwrap();
        assert_eq!(fp.reflexive_reduction(), Formula::or(p(), Formula::future(p())));
        assert_eq!(p().reflexive_reduction(), p());
        // Hand recursion for F F p.
        let inner = Formula::or(p(), Formula::future(p()));
        let expected = Formula::or(inner.clone(), Formula::future(inner));
        assert_eq!(
            Formula::parse("F F p").unwrap().reflexive_reduction(),
            expected
        );
    }

    #[test]
    fn render_sugars_always_and_historically() {
        let f = Formula::parse("G p -> H ~q").unwrap();
        assert_eq!(f.render(), "G p -> ~P q");
        let f = Formula::parse("H (p | q)").unwrap();
        assert_eq!(f.render(), "H (p | q)");
        let f = Formula::parse("(p -> q) -> r").unwrap();
        assert_eq!(f.render(), "(p -> q) -> r");
        let f = Formula::parse("p | (q | r)").unwrap();
        assert_eq!(f.render(), "p | (q | r)");
        assert_eq!(Formula::parse(&f.render()).unwrap(), f);
    }

    #[test]
    fn structural_order_is_by_size_first() {
        let small = Formula::parse("F p").unwrap();
        let big = Formula::parse("p & q").unwrap();
        assert!(small < big);
        assert!(p() < q());
    }
}
