//! Recursive-descent parser for the immersion expression grammar.

use std::sync::Arc;

use thiserror::Error;

use super::{ExprAst, Func};

/// Parse failures, with byte positions into the source text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {position}: {message}")]
    SyntaxError { position: usize, message: String },

    #[error("unknown identifier `{name}` at {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("{func} takes exactly one argument (at {position})")]
    ArityError { func: String, position: usize },
}

/// Parses `text` into an expression over `d` parameters `u1..u{d}`.
pub fn parse(text: &str, d: usize) -> Result<Arc<ExprAst>, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        d,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::SyntaxError {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(ParseError::SyntaxError {
            position: p.pos,
            message: format!("unexpected `{}`", p.peek_char()),
        });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    d: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        self.peek().map(char::from).unwrap_or('\0')
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::add(lhs, rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::mul(lhs, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        // Unary minus wraps the whole factor so that -u1^2 = -(u1^2).
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ExprAst::neg(inner));
        }
        let base = self.base()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.int_exponent()?;
            return Ok(ExprAst::pow(base, n));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(ParseError::SyntaxError {
                position: start,
                message: "unexpected end of input".into(),
            }),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(ParseError::SyntaxError {
                        position: self.pos,
                        message: "expected `)`".into(),
                    });
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(ParseError::SyntaxError {
                position: start,
                message: format!("unexpected `{}`", self.peek_char()),
            }),
        }
    }

    fn number(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        let start = self.pos;
        let mut saw_digit = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            saw_digit = true;
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                saw_digit = true;
                self.pos += 1;
            }
        }
        if !saw_digit {
            return Err(ParseError::SyntaxError {
                position: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let mut exp_digits = false;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                exp_digits = true;
                self.pos += 1;
            }
            if !exp_digits {
                // "2e" with no digits: the 'e' was not an exponent marker.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::SyntaxError {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok(ExprAst::literal(value))
    }

    fn identifier(&mut self) -> Result<Arc<ExprAst>, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if let Some(rest) = name.strip_prefix('u') {
            if !rest.is_empty() && rest.bytes().all(|c| c.is_ascii_digit()) {
                let index: usize = rest.parse().map_err(|_| ParseError::SyntaxError {
                    position: start,
                    message: format!("malformed variable `{name}`"),
                })?;
                if index == 0 || index > self.d {
                    return Err(ParseError::UnknownIdentifier {
                        name,
                        position: start,
                    });
                }
                return Ok(ExprAst::variable(index - 1));
            }
        }
        let func = match name.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => {
                return Err(ParseError::UnknownIdentifier {
                    name,
                    position: start,
                })
            }
        };
        if !self.eat(b'(') {
            return Err(ParseError::SyntaxError {
                position: self.pos,
                message: format!("expected `(` after `{name}`"),
            });
        }
        let arg = self.expr()?;
        self.skip_ws();
        if self.peek() == Some(b',') {
            return Err(ParseError::ArityError {
                func: name,
                position: self.pos,
            });
        }
        if !self.eat(b')') {
            return Err(ParseError::SyntaxError {
                position: self.pos,
                message: "expected `)`".into(),
            });
        }
        Ok(ExprAst::call(func, arg))
    }

    fn int_exponent(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let negative = if matches!(self.peek(), Some(b'+' | b'-')) {
            self.bump() == Some(b'-')
        } else {
            false
        };
        let digits_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ParseError::SyntaxError {
                position: start,
                message: "expected integer exponent after `^`".into(),
            });
        }
        if self.peek() == Some(b'.') {
            return Err(ParseError::SyntaxError {
                position: self.pos,
                message: "exponent must be an integer".into(),
            });
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
        let magnitude: i32 = text.parse().map_err(|_| ParseError::SyntaxError {
            position: start,
            message: format!("exponent `{text}` out of range"),
        })?;
        Ok(if negative { -magnitude } else { magnitude })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval_jet2;
    use nalgebra::DVector;

    fn value(text: &str, d: usize, u: &[f64]) -> f64 {
        let ast = parse(text, d).unwrap();
        eval_jet2(&ast, &DVector::from_row_slice(u)).unwrap().value
    }

    #[test]
    fn polynomial_example() {
        assert_eq!(value("u1^2 + 2*u2^2", 2, &[1.0, 1.0]), 3.0);
    }

    #[test]
    fn function_call_example() {
        assert_eq!(value("sin(u1)*u3", 3, &[0.0, 5.0, 7.0]), 0.0);
    }

    #[test]
    fn out_of_range_variable() {
        assert!(matches!(
            parse("u4", 3),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("u0", 3),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn unknown_function() {
        assert!(matches!(
            parse("tanh(u1)", 1),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn arity_error_on_comma() {
        assert!(matches!(
            parse("sin(u1, u2)", 2),
            Err(ParseError::ArityError { .. })
        ));
    }

    #[test]
    fn precedence_and_unary_minus() {
        // ^ binds tighter than unary minus: -u1^2 = -(u1^2).
        assert_eq!(value("-u1^2", 1, &[3.0]), -9.0);
        // Multiplication binds tighter than addition.
        assert_eq!(value("1 + 2*3", 1, &[0.0]), 7.0);
        // Left associativity of subtraction.
        assert_eq!(value("10 - 4 - 3", 1, &[0.0]), 3.0);
        // Left associativity of division.
        assert_eq!(value("8 / 4 / 2", 1, &[0.0]), 1.0);
    }

    #[test]
    fn negative_exponent() {
        assert_eq!(value("2^-2", 1, &[0.0]), 0.25);
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(value("1.5e2", 1, &[0.0]), 150.0);
        assert_eq!(value("2E-1", 1, &[0.0]), 0.2);
        assert_eq!(value(".5", 1, &[0.0]), 0.5);
        assert_eq!(value("3.", 1, &[0.0]), 3.0);
    }

    #[test]
    fn whitespace_insignificant() {
        assert_eq!(
            value("  u1 \t+\n 2 * u2  ", 2, &[1.0, 2.0]),
            value("u1+2*u2", 2, &[1.0, 2.0])
        );
    }

    #[test]
    fn syntax_error_positions() {
        match parse("u1 + ", 2) {
            Err(ParseError::SyntaxError { position, .. }) => assert_eq!(position, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse("", 1).is_err());
        assert!(parse("(u1", 1).is_err());
        assert!(parse("u1^u2", 2).is_err());
        assert!(parse("u1^2.5", 1).is_err());
        assert!(parse("u1 u2", 2).is_err());
    }
}
