//! The `calc` tool: exact arithmetic over integers and decimals.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | number | "(" expr ")"
//! number := digits ["." digits]
//! ```
//!
//! Results are exact rationals; overflow and division by zero are errors.

use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Zero};
use thiserror::Error;

use crate::evaluator::Q;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalcError {
    #[error("unexpected `{found}` at offset {at}")]
    Unexpected { at: usize, found: String },
    #[error("unexpected end of expression")]
    End,
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

pub fn calc(expr: &str) -> Result<Q, CalcError> {
    let mut p = Parser { s: expr.as_bytes(), i: 0 };
    let v = p.expr()?;
    p.skip();
    if p.i < p.s.len() {
        return Err(p.unexpected());
    }
    Ok(v)
}

struct Parser<'s> {
    s: &'s [u8],
    i: usize,
}

impl Parser<'_> {
    fn skip(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.i).copied()
    }

    fn unexpected(&self) -> CalcError {
        match self.s.get(self.i) {
            None => CalcError::End,
            Some(&c) => CalcError::Unexpected { at: self.i, found: (c as char).to_string() },
        }
    }

    fn expr(&mut self) -> Result<Q, CalcError> {
        let mut v = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let r = self.term()?;
            v = if op == b'+' { v.checked_add(&r) } else { v.checked_sub(&r) }.ok_or(CalcError::Overflow)?;
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<Q, CalcError> {
        let mut v = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let r = self.factor()?;
            v = if op == b'*' {
                v.checked_mul(&r).ok_or(CalcError::Overflow)?
            } else {
                if r.is_zero() {
                    return Err(CalcError::DivisionByZero);
                }
                v.checked_div(&r).ok_or(CalcError::Overflow)?
            };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<Q, CalcError> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Q::zero().checked_sub(&self.factor()?).ok_or(CalcError::Overflow)
            }
            Some(b'(') => {
                self.i += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.unexpected());
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            _ => Err(self.unexpected()),
        }
    }

    fn number(&mut self) -> Result<Q, CalcError> {
        let mut n: i128 = 0;
        let mut d: i128 = 1;
        let mut frac = false;
        while let Some(&c) = self.s.get(self.i) {
            match c {
                b'0'..=b'9' => {
                    n = n.checked_mul(10).and_then(|n| n.checked_add(i128::from(c - b'0'))).ok_or(CalcError::Overflow)?;
                    if frac {
                        d = d.checked_mul(10).ok_or(CalcError::Overflow)?;
                    }
                }
                b'.' if !frac => {
                    frac = true;
                    if !self.s.get(self.i + 1).is_some_and(u8::is_ascii_digit) {
                        self.i += 1;
                        return Err(self.unexpected());
                    }
                }
                _ => break,
            }
            self.i += 1;
        }
        Ok(Q::new(n, d))
    }
}
