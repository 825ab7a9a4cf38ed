//! Pretty-printer emitting text in the parser's grammar; `parse(print(e))`
//! round-trips up to canonical ordering.

use num::{One, Signed};
use std::fmt;

use super::{big_rational_is_integer, Expr};

// Binding strengths, loosest to tightest.
const PREC_ADD: u8 = 0;
const PREC_MUL: u8 = 1;
const PREC_NEG: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(_) => PREC_ADD,
        Expr::Mul(_) => PREC_MUL,
        Expr::Neg(_) => PREC_NEG,
        Expr::Pow(_, _) => PREC_POW,
        Expr::Rational(r) => {
            if r.is_negative() {
                PREC_NEG
            } else if big_rational_is_integer(r) {
                PREC_ATOM
            } else {
                PREC_MUL // p/q reparses as a quotient
            }
        }
        Expr::Float(f) => {
            if f.0 < 0.0 {
                PREC_NEG
            } else {
                PREC_ATOM
            }
        }
        _ => PREC_ATOM,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Rational(r) => {
                if big_rational_is_integer(r) {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Expr::Float(x) => {
                if x.0 == x.0.trunc() && x.0.abs() < 1e15 {
                    write!(f, "{:.1}", x.0)
                } else {
                    write!(f, "{}", x.0)
                }
            }
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Add(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i == 0 {
                        write_prec(t, PREC_MUL, f)?;
                        continue;
                    }
                    // Render additive inverses with a binary minus.
                    if let Some(pos) = negated(t) {
                        write!(f, " - ")?;
                        write_prec(&pos, PREC_MUL, f)?;
                    } else {
                        write!(f, " + ")?;
                        write_prec(t, PREC_MUL, f)?;
                    }
                }
                Ok(())
            }
            Expr::Mul(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write_prec(t, PREC_NEG, f)?;
                }
                Ok(())
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_prec(a, PREC_NEG, f)
            }
            Expr::Pow(b, e) => {
                write_prec(b, PREC_ATOM, f)?;
                write!(f, "^")?;
                write_prec(e, PREC_ATOM, f)
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

/// If `t` is a term with an explicit negative sign, return its positive part.
fn negated(t: &Expr) -> Option<Expr> {
    match t {
        Expr::Neg(a) => Some((**a).clone()),
        Expr::Rational(r) if r.is_negative() => Some(Expr::Rational(-r.clone())),
        Expr::Float(x) if x.0 < 0.0 => Some(Expr::float(-x.0)),
        Expr::Mul(fs) => match fs.first() {
            Some(Expr::Rational(r)) if r.is_negative() => {
                let mut rest: Vec<Expr> = fs[1..].to_vec();
                let pos = -r.clone();
                if pos.is_one() && rest.len() == 1 {
                    Some(rest.pop().unwrap())
                } else if pos.is_one() {
                    Some(Expr::Mul(rest))
                } else {
                    let mut out = vec![Expr::Rational(pos)];
                    out.extend(rest);
                    Some(Expr::Mul(out))
                }
            }
            Some(Expr::Float(x)) if x.0 < 0.0 => {
                let mut out = vec![Expr::float(-x.0)];
                out.extend(fs[1..].iter().cloned());
                Some(Expr::Mul(out))
            }
            _ => None,
        },
        _ => None,
    }
}
