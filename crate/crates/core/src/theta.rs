//! Coefficient functions `θ(μ)` as a closed arithmetic expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'mu[' index ']' | '(' expr ')' | '-' factor
//! ```
//!
//! Expressions print in a canonical form that reparses to the same tree, so
//! archived models reload identically.

use alloc::boxed::Box;
use alloc::string::ToString;
use core::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }

    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Literals produced by the parser are always finite and nonnegative; a
/// leading minus becomes a [`ThetaExpression::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaExpression {
    Literal(f64),
    Param(usize),
    Neg(Box<ThetaExpression>),
    Binary(BinaryOp, Box<ThetaExpression>, Box<ThetaExpression>),
}

impl ThetaExpression {
    /// Parses `text`, rejecting parameter references `mu[i]` with `i >= p`.
    pub fn parse(text: &str, p: usize) -> Result<Self> {
        let mut parser = Parser {
            src: text.as_bytes(),
            pos: 0,
            p,
        };
        parser.skip_ws();
        if parser.pos == parser.src.len() {
            return Err(parser.error("empty expression"));
        }
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn constant(value: f64) -> Self {
        ThetaExpression::Literal(value)
    }

    pub fn param(index: usize) -> Self {
        ThetaExpression::Param(index)
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        match self {
            ThetaExpression::Literal(v) => *v,
            ThetaExpression::Param(i) => mu[*i],
            ThetaExpression::Neg(e) => -e.eval(mu),
            ThetaExpression::Binary(op, l, r) => {
                let (a, b) = (l.eval(mu), r.eval(mu));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                }
            }
        }
    }

    /// Largest `i` among the `mu[i]` references, if any.
    pub fn max_param_index(&self) -> Option<usize> {
        match self {
            ThetaExpression::Literal(_) => None,
            ThetaExpression::Param(i) => Some(*i),
            ThetaExpression::Neg(e) => e.max_param_index(),
            ThetaExpression::Binary(_, l, r) => l.max_param_index().max(r.max_param_index()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ThetaExpression::Binary(op, ..) => op.precedence(),
            _ => 3,
        }
    }
}

impl fmt::Display for ThetaExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaExpression::Literal(v) => write!(f, "{v:?}"),
            ThetaExpression::Param(i) => write!(f, "mu[{i}]"),
            ThetaExpression::Neg(e) => {
                if e.precedence() < 3 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            ThetaExpression::Binary(op, l, r) => {
                let prec = op.precedence();
                if l.precedence() < prec {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left associativity: an equal-precedence right operand keeps its parentheses
                if r.precedence() <= prec {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    p: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected '{}'", byte as char)))
        }
    }

    fn expr(&mut self) -> Result<ThetaExpression> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ThetaExpression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ThetaExpression> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ThetaExpression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<ThetaExpression> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(ThetaExpression::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'm') => self.param(),
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error("expected a number, mu[i], '(' or '-'")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn param(&mut self) -> Result<ThetaExpression> {
        if !self.src[self.pos..].starts_with(b"mu") {
            return Err(self.error("expected 'mu['"));
        }
        self.pos += 2;
        self.expect(b'[')?;
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if digits_start == self.pos {
            return Err(self.error("expected a parameter index"));
        }
        let text = core::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
        let index: usize = text.parse().map_err(|_| Error::Syntax {
            offset: digits_start,
            message: "parameter index too large".to_string(),
        })?;
        self.expect(b']')?;
        if index >= self.p {
            return Err(Error::IndexOutOfBounds { index, p: self.p });
        }
        Ok(ThetaExpression::Param(index))
    }

    fn number(&mut self) -> Result<ThetaExpression> {
        let start = self.pos;
        let bytes = self.src;
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = core::str::from_utf8(&bytes[start..end]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(ThetaExpression::Literal(v))
            }
            _ => Err(self.error("malformed number")),
        }
    }
}

impl core::str::FromStr for ThetaExpression {
    type Err = Error;

    /// Parses without a bound on parameter indices.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, usize::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_examples() {
        let e = ThetaExpression::parse("mu[0]*mu[1] + 2.0", 2).unwrap();
        assert_eq!(e.eval(&[3.0, 4.0]), 14.0);
        let e = ThetaExpression::parse("1/mu[0]", 1).unwrap();
        assert_eq!(e.eval(&[0.5]), 2.0);
    }

    #[test]
    fn bounds_error() {
        assert_eq!(
            ThetaExpression::parse("mu[2]", 2).unwrap_err(),
            Error::IndexOutOfBounds { index: 2, p: 2 }
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = ThetaExpression::parse("8 - 4 - 2", 0).unwrap();
        assert_eq!(e.eval(&[]), 2.0);
        let e = ThetaExpression::parse("8 / 4 / 2", 0).unwrap();
        assert_eq!(e.eval(&[]), 1.0);
        let e = ThetaExpression::parse("1 + 2 * 3 - -4", 0).unwrap();
        assert_eq!(e.eval(&[]), 11.0);
        let e = ThetaExpression::parse(" -(1 + 2) * 2.5e-1 ", 0).unwrap();
        assert_eq!(e.eval(&[]), -0.75);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let cases = [
            ("", 0),
            ("1 +", 3),
            ("mu[0", 4),
            ("(1 + 2", 6),
            ("1 2", 2),
            ("mu[x]", 3),
            ("1 $ 2", 2),
        ];
        for (text, offset) in cases {
            match ThetaExpression::parse(text, 1) {
                Err(Error::Syntax { offset: o, .. }) => assert_eq!(o, offset, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_printing() {
        let e = ThetaExpression::parse("mu[0]-(mu[1]-3)", 2).unwrap();
        assert_eq!(e.to_string(), "mu[0] - (mu[1] - 3.0)");
        let e = ThetaExpression::parse("-(mu[0]*2)/(1+mu[1])", 2).unwrap();
        assert_eq!(e.to_string(), "-(mu[0] * 2.0) / (1.0 + mu[1])");
    }

    fn arb_expr() -> impl Strategy<Value = ThetaExpression> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(ThetaExpression::Literal),
            (1e-9f64..1e-3).prop_map(ThetaExpression::Literal),
            (0usize..4).prop_map(ThetaExpression::Param),
        ];
        leaf.prop_recursive(6, 64, 2, |inner| {
            let op = prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul), Just(BinaryOp::Div)];
            prop_oneof![
                inner.clone().prop_map(|e| ThetaExpression::Neg(Box::new(e))),
                (op, inner.clone(), inner).prop_map(|(o, l, r)| ThetaExpression::Binary(o, Box::new(l), Box::new(r))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let text = e.to_string();
            let back = ThetaExpression::parse(&text, 4).unwrap();
            prop_assert_eq!(&back, &e);
        }
    }
}
