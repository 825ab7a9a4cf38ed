//! Recursive-descent parser for the expression grammar.
//!
//! Infix `+ - * / ^` with unary minus, parentheses, and function calls
//! `exp log sqrt sin cos`. `^` binds tighter than `*` and is
//! right-associative. Identifiers are `[A-Za-z_][A-Za-z0-9_]*`. Integer
//! literals become exact rationals; decimals and scientific notation
//! become floats.

use num::BigRational;
use num::bigint::BigInt;
use thiserror::Error;

use super::Expr;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        input: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let e = p.parse_sum()?;
    p.skip_ws();
    if p.pos < p.input.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.parse_product()?;
                acc = acc + rhs;
            } else if self.eat(b'-') {
                let rhs = self.parse_product()?;
                acc = acc - rhs;
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.parse_unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.parse_unary()?;
                acc = acc * rhs;
            } else if self.eat(b'/') {
                let rhs = self.parse_unary()?;
                acc = acc / rhs;
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.parse_unary()?;
            Ok(-inner)
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom()?;
        if self.eat(b'^') {
            // Right-associative; allow a unary minus in the exponent.
            let exp = self.parse_unary()?;
            Ok(base.pow(exp))
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.eat(b'(');
                let e = self.parse_sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(_) => Err(self.error("expected expression")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut is_float = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            is_float = true;
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        // Scientific exponent, only when followed by digits (or sign+digits).
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mut ahead = self.pos + 1;
            if matches!(self.input.get(ahead), Some(b'+') | Some(b'-')) {
                ahead += 1;
            }
            if matches!(self.input.get(ahead), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                self.pos = ahead;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        if text.is_empty() || text == "." {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        self.skip_ws();
        if is_float {
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            Ok(Expr::float(v))
        } else {
            let n: BigInt = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed integer `{text}`"),
            })?;
            Ok(Expr::Rational(BigRational::from_integer(n)))
        }
    }

    fn parse_ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.input[start..self.pos])
            .unwrap()
            .to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.eat(b'(');
            let arg = self.parse_sum()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            let f = match name.as_str() {
                "exp" => Expr::exp,
                "log" => Expr::log,
                "sqrt" => Expr::sqrt,
                "sin" => Expr::sin,
                "cos" => Expr::cos,
                _ => {
                    return Err(ParseError::UnknownFunction {
                        offset: start,
                        name,
                    })
                }
            };
            Ok(f(arg))
        } else {
            Ok(Expr::var(name))
        }
    }
}
