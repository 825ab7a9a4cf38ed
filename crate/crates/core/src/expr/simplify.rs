//! Canonicalizing simplifier.
//!
//! Pipeline per pass: constant folding, flattening of `Add`/`Mul`,
//! distribution of products over sums, power collection by base, exp/log
//! cancellation, collection of like terms with exact rational coefficients.
//! Passes rerun to a fixed point with an iteration cap of 32.
//!
//! Canonical form after a fixed point:
//! - no `Neg` or `Sqrt` nodes (rewritten to `Mul(-1, _)` and `Pow(_, 1/2)`),
//! - `Add`/`Mul` are flat, sorted, with collected terms/factors,
//! - at most one `Exp` factor per product,
//! - numeric coefficients lead each product.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

use super::{big_rational_is_integer, Expr};

const MAX_PASSES: usize = 32;

pub fn simplify(e: &Expr) -> Expr {
    let mut cur = simplify_pass(e);
    for _ in 1..MAX_PASSES {
        let next = simplify_pass(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
    cur
}

/// Numeric coefficient: exact rational unless contaminated by a float.
#[derive(Clone, Debug, PartialEq)]
enum Coeff {
    R(BigRational),
    F(f64),
}

impl Coeff {
    fn one() -> Coeff {
        Coeff::R(BigRational::one())
    }

    fn is_zero(&self) -> bool {
        match self {
            Coeff::R(r) => r.is_zero(),
            Coeff::F(f) => *f == 0.0,
        }
    }

    fn is_one(&self) -> bool {
        match self {
            Coeff::R(r) => r.is_one(),
            Coeff::F(f) => *f == 1.0,
        }
    }

    fn as_f64(&self) -> f64 {
        match self {
            Coeff::R(r) => super::rational_f64(r),
            Coeff::F(f) => *f,
        }
    }

    fn mul(&mut self, other: &Coeff) {
        match (&mut *self, other) {
            (Coeff::R(a), Coeff::R(b)) => *a *= b,
            _ => *self = Coeff::F(self.as_f64() * other.as_f64()),
        }
    }

    fn add(&mut self, other: &Coeff) {
        match (&mut *self, other) {
            (Coeff::R(a), Coeff::R(b)) => *a += b,
            _ => *self = Coeff::F(self.as_f64() + other.as_f64()),
        }
    }

    fn to_expr(&self) -> Expr {
        match self {
            Coeff::R(r) => Expr::Rational(r.clone()),
            Coeff::F(f) => Expr::float(*f),
        }
    }
}

fn simplify_pass(e: &Expr) -> Expr {
    match e {
        Expr::Rational(_) | Expr::Float(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => {
            let a = simplify_pass(a);
            mul_collect(vec![Expr::int(-1), a])
        }
        Expr::Sqrt(a) => {
            let a = simplify_pass(a);
            pow_rules(a, Expr::rat(1, 2))
        }
        Expr::Add(ts) => {
            let mut flat = Vec::new();
            for t in ts {
                flatten_add(simplify_pass(t), &mut flat);
            }
            add_collect(flat)
        }
        Expr::Mul(ts) => {
            let mut flat = Vec::new();
            for t in ts {
                flatten_mul(simplify_pass(t), &mut flat);
            }
            if flat.iter().any(|f| matches!(f, Expr::Add(_))) {
                expand_product(flat)
            } else {
                mul_collect(flat)
            }
        }
        Expr::Pow(b, x) => pow_rules(simplify_pass(b), simplify_pass(x)),
        Expr::Exp(a) => exp_rules(simplify_pass(a)),
        Expr::Log(a) => log_rules(simplify_pass(a)),
        Expr::Sin(a) => {
            let a = simplify_pass(a);
            match &a {
                _ if a.is_zero() => Expr::zero(),
                Expr::Float(f) => Expr::float(f.0.sin()),
                _ => a.sin(),
            }
        }
        Expr::Cos(a) => {
            let a = simplify_pass(a);
            match &a {
                _ if a.is_zero() => Expr::one(),
                Expr::Float(f) => Expr::float(f.0.cos()),
                _ => a.cos(),
            }
        }
    }
}

fn flatten_add(e: Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Add(ts) => {
            for t in ts {
                flatten_add(t, out);
            }
        }
        other => out.push(other),
    }
}

fn flatten_mul(e: Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Mul(ts) => {
            for t in ts {
                flatten_mul(t, out);
            }
        }
        Expr::Neg(a) => {
            out.push(Expr::int(-1));
            flatten_mul(*a, out);
        }
        other => out.push(other),
    }
}

/// Distribute a flat factor list containing at least one sum.
fn expand_product(factors: Vec<Expr>) -> Expr {
    let mut partials: Vec<Vec<Expr>> = vec![Vec::new()];
    for f in factors {
        match f {
            Expr::Add(ts) => {
                let mut next = Vec::with_capacity(partials.len() * ts.len());
                for p in &partials {
                    for t in &ts {
                        let mut q = p.clone();
                        flatten_mul(t.clone(), &mut q);
                        next.push(q);
                    }
                }
                partials = next;
            }
            other => {
                for p in &mut partials {
                    p.push(other.clone());
                }
            }
        }
    }
    let terms = partials.into_iter().map(mul_collect).collect();
    add_collect(terms)
}

/// Collect a flat, sum-free factor list into canonical product form.
fn mul_collect(factors: Vec<Expr>) -> Expr {
    let mut coeff = Coeff::one();
    let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    let mut exp_args: Vec<Expr> = Vec::new();
    let mut queue = factors;
    queue.reverse();
    while let Some(f) = queue.pop() {
        match f {
            Expr::Rational(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff.mul(&Coeff::R(r));
            }
            Expr::Float(x) => {
                if x.0 == 0.0 {
                    return Expr::zero();
                }
                coeff.mul(&Coeff::F(x.0));
            }
            Expr::Mul(fs) => queue.extend(fs.into_iter().rev()),
            Expr::Neg(a) => {
                coeff.mul(&Coeff::R(-BigRational::one()));
                queue.push(*a);
            }
            Expr::Exp(a) => flatten_add(*a, &mut exp_args),
            Expr::Pow(b, x) => bases.entry(*b).or_default().push(*x),
            other => bases.entry(other).or_default().push(Expr::one()),
        }
    }

    let mut out: Vec<Expr> = Vec::new();
    let push_factor = |f: Expr, coeff: &mut Coeff, out: &mut Vec<Expr>| match f {
        Expr::Rational(r) => coeff.mul(&Coeff::R(r)),
        Expr::Float(x) => coeff.mul(&Coeff::F(x.0)),
        f if f.is_one() => {}
        f => out.push(f),
    };
    for (base, exps) in bases {
        let total = add_collect(exps);
        let p = pow_rules(base, total);
        push_factor(p, &mut coeff, &mut out);
    }
    if !exp_args.is_empty() {
        let arg = add_collect(exp_args);
        push_factor(exp_rules(arg), &mut coeff, &mut out);
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    out.sort();
    if out.is_empty() {
        return coeff.to_expr();
    }
    if !coeff.is_one() {
        out.insert(0, coeff.to_expr());
    }
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        Expr::Mul(out)
    }
}

/// Split a term into numeric coefficient and sorted monomial factor list.
fn split_term(t: Expr) -> (Coeff, Vec<Expr>) {
    match t {
        Expr::Rational(r) => (Coeff::R(r), Vec::new()),
        Expr::Float(x) => (Coeff::F(x.0), Vec::new()),
        Expr::Mul(fs) => {
            let mut coeff = Coeff::one();
            let mut rest = Vec::new();
            for f in fs {
                match f {
                    Expr::Rational(r) => coeff.mul(&Coeff::R(r)),
                    Expr::Float(x) => coeff.mul(&Coeff::F(x.0)),
                    other => rest.push(other),
                }
            }
            rest.sort();
            (coeff, rest)
        }
        other => (Coeff::one(), vec![other]),
    }
}

/// Collect like terms of a flat term list; applies `sin^2 + cos^2 = 1`.
fn add_collect(terms: Vec<Expr>) -> Expr {
    let mut map: BTreeMap<Vec<Expr>, Coeff> = BTreeMap::new();
    for t in terms {
        if t.is_zero() {
            continue;
        }
        let (c, key) = split_term(t);
        match map.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut o) => o.get_mut().add(&c),
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pythagorean_rule(&mut map);

    let mut out: Vec<Expr> = Vec::new();
    for (key, c) in map {
        if c.is_zero() {
            continue;
        }
        if key.is_empty() {
            out.push(c.to_expr());
        } else if c.is_one() && key.len() == 1 {
            out.push(key.into_iter().next().unwrap());
        } else if c.is_one() {
            out.push(Expr::Mul(key));
        } else {
            let mut fs = Vec::with_capacity(key.len() + 1);
            fs.push(c.to_expr());
            fs.extend(key);
            out.push(Expr::Mul(fs));
        }
    }
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Add(out),
    }
}

/// Combine `c*M*sin(u)^2 + c*M*cos(u)^2 -> c*M`.
fn pythagorean_rule(map: &mut BTreeMap<Vec<Expr>, Coeff>) {
    let keys: Vec<Vec<Expr>> = map.keys().cloned().collect();
    for key in keys {
        if !map.contains_key(&key) {
            continue;
        }
        let sin_pos = key.iter().position(|f| match f {
            Expr::Pow(b, e) => matches!(&**b, Expr::Sin(_)) && **e == Expr::int(2),
            _ => false,
        });
        let Some(pos) = sin_pos else { continue };
        let arg = match &key[pos] {
            Expr::Pow(b, _) => match &**b {
                Expr::Sin(a) => (**a).clone(),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        };
        let mut partner = key.clone();
        partner[pos] = arg.cos().powi(2);
        partner.sort();
        let Some(c2) = map.get(&partner) else { continue };
        if *c2 != map[&key] || partner == key {
            continue;
        }
        let c = map.remove(&key).unwrap();
        map.remove(&partner);
        let mut reduced = key;
        reduced.remove(pos);
        match map.entry(reduced) {
            std::collections::btree_map::Entry::Occupied(mut o) => o.get_mut().add(&c),
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }
}

fn pow_rules(base: Expr, exp: Expr) -> Expr {
    if exp.is_zero() {
        return Expr::one();
    }
    if exp.is_one() {
        return base;
    }
    if base.is_one() {
        return Expr::one();
    }
    if base.is_zero() {
        if let Expr::Rational(r) = &exp {
            if r.is_positive() {
                return Expr::zero();
            }
        }
        return base.pow(exp);
    }
    match (base, exp) {
        (Expr::Rational(rb), Expr::Rational(re)) => fold_rational_pow(&rb, &re)
            .unwrap_or_else(|| Expr::Rational(rb).pow(Expr::Rational(re))),
        (Expr::Rational(rb), Expr::Float(fe)) => {
            let b = super::rational_f64(&rb);
            let v = b.powf(fe.0);
            if v.is_finite() {
                Expr::float(v)
            } else {
                Expr::Rational(rb).pow(Expr::Float(fe))
            }
        }
        (Expr::Float(fb), Expr::Rational(re)) => {
            let v = fb.0.powf(super::rational_f64(&re));
            if v.is_finite() {
                Expr::float(v)
            } else {
                Expr::Float(fb).pow(Expr::Rational(re))
            }
        }
        (Expr::Float(fb), Expr::Float(fe)) => {
            let v = fb.0.powf(fe.0);
            if v.is_finite() {
                Expr::float(v)
            } else {
                Expr::Float(fb).pow(Expr::Float(fe))
            }
        }
        // (x^a)^b -> x^(a*b); bases are positive by convention.
        (Expr::Pow(b2, e2), e) => {
            let inner = Expr::Mul(vec![*e2, e]);
            Expr::Pow(b2, Box::new(inner))
        }
        (Expr::Exp(a), e) => Expr::Exp(Box::new(Expr::Mul(vec![*a, e]))),
        (Expr::Mul(fs), e) => {
            let integer_exp = matches!(&e, Expr::Rational(r) if big_rational_is_integer(r));
            let has_negative = fs.iter().any(
                |f| matches!(f, Expr::Rational(r) if r.is_negative())
                    || matches!(f, Expr::Float(x) if x.0 < 0.0),
            );
            if integer_exp || !has_negative {
                Expr::Mul(
                    fs.into_iter()
                        .map(|f| f.pow(e.clone()))
                        .collect(),
                )
            } else {
                Expr::Mul(fs).pow(e)
            }
        }
        (Expr::Add(ts), Expr::Rational(re)) if big_rational_is_integer(&re) => {
            let n = re.to_integer().to_i64().unwrap_or(i64::MAX);
            if (2..=8).contains(&n) {
                Expr::Mul(vec![Expr::Add(ts); n as usize])
            } else if (-8..=-2).contains(&n) {
                Expr::Mul(vec![Expr::Add(ts); (-n) as usize]).powi(-1)
            } else {
                Expr::Add(ts).pow(Expr::Rational(re))
            }
        }
        (b, e) => b.pow(e),
    }
}

/// Exact rational power, or `None` when the result is irrational or the
/// exponent is out of practical range.
fn fold_rational_pow(base: &BigRational, exp: &BigRational) -> Option<Expr> {
    if big_rational_is_integer(exp) {
        let n = exp.to_integer().to_i32()?;
        return Some(Expr::Rational(num::pow::Pow::pow(base.clone(), n)));
    }
    if base.is_negative() {
        return None;
    }
    let q = exp.denom().to_u32()?;
    if q > 64 {
        return None;
    }
    let p = exp.numer().to_i32()?;
    let root_n = exact_nth_root(base.numer(), q)?;
    let root_d = exact_nth_root(base.denom(), q)?;
    let root = BigRational::new(root_n, root_d);
    Some(Expr::Rational(num::pow::Pow::pow(root, p)))
}

fn exact_nth_root(x: &BigInt, n: u32) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let root = x.nth_root(n);
    if num::pow::Pow::pow(&root, n) == *x {
        Some(root)
    } else {
        None
    }
}

fn exp_rules(arg: Expr) -> Expr {
    if arg.is_zero() {
        return Expr::one();
    }
    match arg {
        Expr::Float(f) => Expr::float(f.0.exp()),
        Expr::Log(x) => *x,
        Expr::Mul(fs) => {
            if let Some((x, rest)) = extract_single_log(&fs) {
                x.pow(Expr::Mul(rest))
            } else {
                Expr::Mul(fs).exp()
            }
        }
        Expr::Add(ts) => {
            let mut powers: Vec<Expr> = Vec::new();
            let mut rest: Vec<Expr> = Vec::new();
            for t in ts {
                match t {
                    Expr::Log(x) => powers.push(*x),
                    Expr::Mul(fs) => {
                        if let Some((x, r)) = extract_single_log(&fs) {
                            powers.push(x.pow(Expr::Mul(r)));
                        } else {
                            rest.push(Expr::Mul(fs));
                        }
                    }
                    other => rest.push(other),
                }
            }
            if powers.is_empty() {
                Expr::Add(rest).exp()
            } else {
                if !rest.is_empty() {
                    powers.push(Expr::Add(rest).exp());
                }
                Expr::Mul(powers)
            }
        }
        other => other.exp(),
    }
}

/// For a factor list with exactly one `Log(x)` factor, return `(x, rest)`.
fn extract_single_log(fs: &[Expr]) -> Option<(Expr, Vec<Expr>)> {
    let mut log_arg = None;
    let mut rest = Vec::new();
    for f in fs {
        match f {
            Expr::Log(x) => {
                if log_arg.is_some() {
                    return None;
                }
                log_arg = Some((**x).clone());
            }
            other => rest.push(other.clone()),
        }
    }
    log_arg.map(|x| (x, rest))
}

fn log_rules(arg: Expr) -> Expr {
    if arg.is_one() {
        return Expr::zero();
    }
    match arg {
        Expr::Float(f) if f.0 > 0.0 => Expr::float(f.0.ln()),
        Expr::Exp(x) => *x,
        Expr::Pow(b, e) => Expr::Mul(vec![*e, Expr::Log(b)]),
        Expr::Mul(fs) => Expr::Add(fs.into_iter().map(|f| f.log()).collect()),
        other => other.log(),
    }
}
