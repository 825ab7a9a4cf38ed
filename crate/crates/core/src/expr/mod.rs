//! Symbolic scalar expressions: parsing, exact differentiation,
//! simplification, substitution and numeric evaluation.
//!
//! Rational constants are kept exact (arbitrary-precision rationals) so that
//! algebraic cancellations like `t^(2p) * t^(-2p) -> 1` are literal. Decimal
//! literals are contaminating: any arithmetic touching a float folds to a
//! float. Fractional-power rewrites such as `(x*y)^e -> x^e * y^e` assume
//! symbols range over positive reals, which holds for every chart in this
//! crate (coordinates that range over all of R only carry integer powers).

mod display;
mod parser;
mod simplify;

pub use parser::{parse, ParseError};

use std::collections::{BTreeMap, BTreeSet};

use num::{BigRational, One, ToPrimitive, Zero};
use ordered_float::OrderedFloat;
use thiserror::Error;

use crate::scalar::Scalar;

/// Immutable symbolic expression tree. All operations are pure; values are
/// safe to share across threads.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Expr {
    /// Exact rational constant.
    Rational(BigRational),
    /// Floating-point constant (from decimal literals).
    Float(OrderedFloat<f64>),
    /// Named coordinate or parameter. The chart decides which role a name
    /// plays; differentiation only cares about the name itself.
    Var(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

/// Map from variable name to numeric value, used by [`Expr::eval`].
pub type Bindings<T = f64> = BTreeMap<String, T>;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Rational(BigRational::from_integer(n.into()))
    }

    pub fn rat(num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero denominator");
        Expr::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn float(x: f64) -> Expr {
        Expr::Float(OrderedFloat(x))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn pow(self, e: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(e))
    }

    pub fn powi(self, n: i64) -> Expr {
        self.pow(Expr::int(n))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn log(self) -> Expr {
        Expr::Log(Box::new(self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(Box::new(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Rational(r) => r.is_zero(),
            Expr::Float(f) => f.0 == 0.0,
            _ => false,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Expr::Rational(r) => r.is_one(),
            Expr::Float(f) => f.0 == 1.0,
            _ => false,
        }
    }

    /// True if simplification reaches literal zero.
    pub fn simplifies_to_zero(&self) -> bool {
        self.simplified().is_zero()
    }

    pub fn simplified(&self) -> Expr {
        simplify::simplify(self)
    }

    /// Free variable names, in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Rational(_) | Expr::Float(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Add(ts) | Expr::Mul(ts) => {
                for t in ts {
                    t.collect_vars(out);
                }
            }
            Expr::Pow(b, e) => {
                b.collect_vars(out);
                e.collect_vars(out);
            }
            Expr::Neg(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sqrt(a)
            | Expr::Sin(a)
            | Expr::Cos(a) => a.collect_vars(out),
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Expr::Rational(_) | Expr::Float(_) => false,
            Expr::Var(n) => n == name,
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().any(|t| t.contains_var(name)),
            Expr::Pow(b, e) => b.contains_var(name) || e.contains_var(name),
            Expr::Neg(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sqrt(a)
            | Expr::Sin(a)
            | Expr::Cos(a) => a.contains_var(name),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + match self {
            Expr::Rational(_) | Expr::Float(_) | Expr::Var(_) => 0,
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().map(Expr::node_count).sum(),
            Expr::Pow(b, e) => b.node_count() + e.node_count(),
            Expr::Neg(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sqrt(a)
            | Expr::Sin(a)
            | Expr::Cos(a) => a.node_count(),
        }
    }

    /// Numeric evaluation. Every free variable must be bound; domain
    /// violations report the offending subexpression.
    pub fn eval<T: Scalar>(&self, bindings: &Bindings<T>) -> Result<T, EvalError> {
        match self {
            Expr::Rational(r) => Ok(rational_to_scalar(r)),
            Expr::Float(f) => Ok(T::from_f64(f.0).expect("float conversion")),
            Expr::Var(name) => bindings
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Add(ts) => {
                let mut acc = T::zero();
                for t in ts {
                    acc = acc + t.eval(bindings)?;
                }
                Ok(acc)
            }
            Expr::Mul(ts) => {
                let mut acc = T::one();
                for t in ts {
                    acc = acc * t.eval(bindings)?;
                }
                Ok(acc)
            }
            Expr::Neg(a) => Ok(-a.eval(bindings)?),
            Expr::Pow(b, e) => {
                let base = b.eval(bindings)?;
                let exp = e.eval(bindings)?;
                eval_pow(self, base, exp)
            }
            Expr::Exp(a) => Ok(a.eval(bindings)?.exp()),
            Expr::Log(a) => {
                let x = a.eval(bindings)?;
                if x <= T::zero() {
                    Err(self.domain_error("log of nonpositive value"))
                } else {
                    Ok(x.ln())
                }
            }
            Expr::Sqrt(a) => {
                let x = a.eval(bindings)?;
                if x < T::zero() {
                    Err(self.domain_error("sqrt of negative value"))
                } else {
                    Ok(x.sqrt())
                }
            }
            Expr::Sin(a) => Ok(a.eval(bindings)?.sin()),
            Expr::Cos(a) => Ok(a.eval(bindings)?.cos()),
        }
    }

    fn domain_error(&self, reason: &str) -> EvalError {
        EvalError::Domain {
            expr: self.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Exact rule-based derivative with respect to variable `v`, simplified.
    pub fn differentiate(&self, v: &str) -> Expr {
        simplify::simplify(&self.diff_raw(v))
    }

    fn diff_raw(&self, v: &str) -> Expr {
        match self {
            Expr::Rational(_) | Expr::Float(_) => Expr::zero(),
            Expr::Var(name) => {
                if name == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Add(ts) => Expr::Add(ts.iter().map(|t| t.diff_raw(v)).collect()),
            Expr::Mul(ts) => {
                let mut terms = Vec::new();
                for (i, _) in ts.iter().enumerate() {
                    let mut factors: Vec<Expr> = Vec::with_capacity(ts.len());
                    for (k, f) in ts.iter().enumerate() {
                        factors.push(if k == i { f.diff_raw(v) } else { f.clone() });
                    }
                    terms.push(Expr::Mul(factors));
                }
                Expr::Add(terms)
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.diff_raw(v))),
            Expr::Pow(b, e) => {
                if !e.contains_var(v) {
                    // e * b^(e-1) * b'
                    Expr::Mul(vec![
                        (**e).clone(),
                        (**b).clone().pow(Expr::Add(vec![
                            (**e).clone(),
                            Expr::int(-1),
                        ])),
                        b.diff_raw(v),
                    ])
                } else {
                    // b^e * (e' log b + e b'/b)
                    Expr::Mul(vec![
                        self.clone(),
                        Expr::Add(vec![
                            Expr::Mul(vec![e.diff_raw(v), (**b).clone().log()]),
                            Expr::Mul(vec![
                                (**e).clone(),
                                b.diff_raw(v),
                                (**b).clone().powi(-1),
                            ]),
                        ]),
                    ])
                }
            }
            Expr::Exp(a) => Expr::Mul(vec![a.diff_raw(v), self.clone()]),
            Expr::Log(a) => Expr::Mul(vec![a.diff_raw(v), (**a).clone().powi(-1)]),
            Expr::Sqrt(a) => Expr::Mul(vec![
                a.diff_raw(v),
                Expr::rat(1, 2),
                (**a).clone().pow(Expr::rat(-1, 2)),
            ]),
            Expr::Sin(a) => Expr::Mul(vec![a.diff_raw(v), (**a).clone().cos()]),
            Expr::Cos(a) => Expr::Neg(Box::new(Expr::Mul(vec![
                a.diff_raw(v),
                (**a).clone().sin(),
            ]))),
        }
    }

    /// Simultaneous substitution of variables by expressions. No chain rule
    /// is applied; coordinate changes on metrics go through pullback.
    pub fn substitute(&self, replacements: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Rational(_) | Expr::Float(_) => self.clone(),
            Expr::Var(name) => replacements.get(name).cloned().unwrap_or_else(|| self.clone()),
            Expr::Add(ts) => Expr::Add(ts.iter().map(|t| t.substitute(replacements)).collect()),
            Expr::Mul(ts) => Expr::Mul(ts.iter().map(|t| t.substitute(replacements)).collect()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(replacements))),
            Expr::Pow(b, e) => Expr::Pow(
                Box::new(b.substitute(replacements)),
                Box::new(e.substitute(replacements)),
            ),
            Expr::Exp(a) => Expr::Exp(Box::new(a.substitute(replacements))),
            Expr::Log(a) => Expr::Log(Box::new(a.substitute(replacements))),
            Expr::Sqrt(a) => Expr::Sqrt(Box::new(a.substitute(replacements))),
            Expr::Sin(a) => Expr::Sin(Box::new(a.substitute(replacements))),
            Expr::Cos(a) => Expr::Cos(Box::new(a.substitute(replacements))),
        }
    }

    /// Substitute a single variable.
    pub fn subst(&self, name: &str, value: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(name.to_string(), value.clone());
        self.substitute(&map)
    }
}

fn eval_pow<T: Scalar>(node: &Expr, base: T, exp: T) -> Result<T, EvalError> {
    if base == T::zero() {
        if exp < T::zero() {
            return Err(node.domain_error("zero raised to a negative power"));
        }
        if exp == T::zero() {
            return Ok(T::one());
        }
        return Ok(T::zero());
    }
    if exp.fract() == T::zero() {
        let n = exp.to_f64().unwrap_or(f64::NAN);
        if n.abs() <= i32::MAX as f64 {
            return Ok(base.powi(n as i32));
        }
    }
    if base < T::zero() {
        return Err(node.domain_error("negative base with non-integer exponent"));
    }
    Ok(base.powf(exp))
}

fn rational_to_scalar<T: Scalar>(r: &BigRational) -> T {
    if let Some(x) = r.to_f64() {
        if x.is_finite() {
            return T::from_f64(x).expect("rational conversion");
        }
    }
    // Enormous numerator/denominator; divide as floats.
    let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
    let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
    T::from_f64(n / d).expect("rational conversion")
}

/// Convert an exact rational to f64.
pub fn rational_f64(r: &BigRational) -> f64 {
    rational_to_scalar(r)
}

pub(crate) fn big_rational_is_integer(r: &BigRational) -> bool {
    r.denom().is_one() || (-r.denom()).is_one()
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, Expr::Neg(Box::new(rhs))])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs.powi(-1)])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests;
