use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn s(text: &str) -> Expr {
    parse(text).unwrap().simplified()
}

fn ev(e: &Expr, binds: &[(&str, f64)]) -> f64 {
    let b: Bindings = binds.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    e.eval(&b).unwrap()
}

#[test]
fn parse_literal_power() {
    let e = parse("t^(4/3)").unwrap();
    match e {
        Expr::Pow(b, x) => {
            assert_eq!(*b, Expr::var("t"));
            assert_eq!(x.simplified(), Expr::rat(4, 3));
        }
        other => panic!("unexpected parse {other:?}"),
    }
}

#[test]
fn parse_exp_call() {
    let e = parse("exp(2*(eta - U))").unwrap();
    match e {
        Expr::Exp(inner) => assert!(inner.contains_var("eta") && inner.contains_var("U")),
        other => panic!("unexpected parse {other:?}"),
    }
}

#[test]
fn parse_error_offset() {
    match parse("x + ") {
        Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn parse_unknown_function() {
    assert!(matches!(
        parse("tanh(x)"),
        Err(ParseError::UnknownFunction { .. })
    ));
}

#[test]
fn eval_hubble_power() {
    // IEEE double: powf rounds in the last ulp for fractional exponents.
    let v = ev(&s("t^(4/3)"), &[("t", 8.0)]);
    assert!((v - 16.0).abs() <= 1e-12 * 16.0, "got {v}");
}

#[test]
fn eval_residual_rhs() {
    // 5/(4*Rhat) at Rhat = 1.
    assert_eq!(ev(&s("5/(4*Rhat)"), &[("Rhat", 1.0)]), 1.25);
}

#[test]
fn eval_domain_error() {
    let e = parse("log(x)").unwrap();
    let b: Bindings = [("x".to_string(), -1.0)].into();
    assert!(matches!(e.eval(&b), Err(EvalError::Domain { .. })));
}

#[test]
fn eval_unbound_error() {
    let e = parse("x + y").unwrap();
    let b: Bindings = [("x".to_string(), 1.0)].into();
    assert_eq!(e.eval(&b), Err(EvalError::Unbound("y".to_string())));
}

#[test]
fn diff_power_rule() {
    // d/dt t^(2p) = 2p t^(2p-1), with p = 1/3 fixed rationally.
    let e = s("t^(2/3)");
    let d = e.differentiate("t");
    assert_eq!(d, s("(2/3)*t^(-1/3)"));
}

#[test]
fn diff_log_radius() {
    // d/dRhat log(Rhat/Kc) = 1/Rhat
    let e = s("log(Rhat/Kc)");
    let d = e.differentiate("Rhat");
    assert_eq!(d, s("1/Rhat"));
}

#[test]
fn diff_constant_is_zero() {
    assert!(s("CU").differentiate("theta").is_zero());
}

#[test]
fn diff_exp_chain() {
    let e = s("exp(3*t)");
    let d = e.differentiate("t");
    let b = ev(&d, &[("t", 0.5)]);
    assert!((b - 3.0 * (1.5f64).exp()).abs() < 1e-12);
}

#[test]
fn simplify_exp_log_square() {
    // exp(2*log(Rhat/Kc)) -> Rhat^2/Kc^2, verified numerically at random
    // bindings (the derived oracle for this rewrite).
    let e = s("exp(2*log(Rhat/Kc))");
    assert_eq!(e, s("Rhat^2 * Kc^(-2)"));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let r = rng.gen_range(0.1..10.0);
        let k = rng.gen_range(0.1..10.0);
        let got = ev(&e, &[("Rhat", r), ("Kc", k)]);
        let want = (2.0 * (r / k).ln()).exp();
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

#[test]
fn simplify_power_cancellation() {
    assert!(s("t^(2/3) * t^(-2/3) - 1").is_zero());
}

#[test]
fn simplify_additive_inverse() {
    assert!(s("x + (-x)").is_zero());
}

#[test]
fn simplify_idempotent() {
    for text in [
        "exp(2*log(R/Kc))",
        "x^2 + 2*x + 1 - (x+1)^2",
        "sin(th)^2 + cos(th)^2",
        "(a+b)*(a-b) - a^2 + b^2",
        "sqrt(5)*sqrt(5)",
        "2^(1/2)*2^(1/2)",
        "(4*x)^(1/2)",
    ] {
        let once = s(text);
        assert_eq!(once.simplified(), once, "not idempotent for {text}");
    }
}

#[test]
fn simplify_exact_rational_roots() {
    assert_eq!(s("sqrt(5)*sqrt(5)"), Expr::int(5));
    assert_eq!(s("8^(1/3)"), Expr::int(2));
    assert_eq!(s("(9/4)^(1/2)"), Expr::rat(3, 2));
    assert_eq!(s("(4*x)^(1/2)"), s("2*x^(1/2)"));
}

#[test]
fn simplify_pythagorean() {
    assert_eq!(s("sin(th)^2 + cos(th)^2"), Expr::int(1));
    assert!(s("3*a*sin(th)^2 + 3*a*cos(th)^2 - 3*a").is_zero());
}

#[test]
fn simplify_binomial_difference() {
    assert!(s("(x+1)^2 - x^2 - 2*x - 1").is_zero());
}

#[test]
fn substitute_scaled_time() {
    // t -> u*ti inside t^(3/2)
    let e = s("t^(3/2)").subst("t", &s("u*ti"));
    assert_eq!(e.simplified(), s("u^(3/2)*ti^(3/2)"));
}

#[test]
fn substitute_identity() {
    let e = s("x");
    assert_eq!(e.substitute(&BTreeMap::new()), e);
}

#[test]
fn substitute_sqrt_roundtrip() {
    // R^2 with R -> sqrt(u) gives u.
    let e = s("R^2").subst("R", &parse("sqrt(u)").unwrap());
    assert_eq!(e.simplified(), Expr::var("u"));
    let got = ev(&e.simplified(), &[("u", 3.7)]);
    assert!((got - 3.7).abs() < 1e-15);
}

#[test]
fn float_contamination() {
    // Decimal literals fold to floats; exact rationals stay exact.
    assert!(matches!(s("0.5 * 4"), Expr::Float(_)));
    assert!(matches!(s("1/2 * 4"), Expr::Rational(_)));
}

// Random expression generator over a small variable set, for property tests.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-6i64..7).prop_map(Expr::int),
        (1i64..5, 1i64..5).prop_map(|(n, d)| Expr::rat(n, d)),
        Just(Expr::var("x")),
        Just(Expr::var("y")),
    ];
    leaf.prop_recursive(4, 40, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Add),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Mul),
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), -3i64..4).prop_map(|(e, n)| e.pow(Expr::int(n))),
            inner.clone().prop_map(Expr::exp),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(Expr::cos),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // simplify preserves values wherever both sides evaluate.
    #[test]
    fn prop_simplify_preserves_value(e in arb_expr(), x in 0.2f64..2.0, y in 0.2f64..2.0) {
        let binds: Bindings = [("x".to_string(), x), ("y".to_string(), y)].into();
        if let Ok(v) = e.eval(&binds) {
            if v.is_finite() && v.abs() < 1e12 {
                let sv = e.simplified().eval(&binds);
                if let Ok(sv) = sv {
                    prop_assert!((v - sv).abs() <= 1e-9 * (1.0 + v.abs()),
                        "value changed: {v} vs {sv} for {e}");
                }
            }
        }
    }

    // parse(print(e)) round-trips up to canonical ordering.
    #[test]
    fn prop_print_parse_roundtrip(e in arb_expr()) {
        let canon = e.simplified();
        let text = canon.to_string();
        let back = parse(&text).unwrap_or_else(|err| panic!("reparse of `{text}` failed: {err}"));
        prop_assert_eq!(back.simplified(), canon);
    }

    // exact derivatives match centered finite differences.
    #[test]
    fn prop_derivative_matches_fd(e in arb_expr(), x in 0.3f64..1.7) {
        let binds: Bindings = [("x".to_string(), x), ("y".to_string(), 0.7)].into();
        let d = e.differentiate("x");
        let h = 1e-6;
        let mut bp = binds.clone();
        bp.insert("x".to_string(), x + h);
        let mut bm = binds.clone();
        bm.insert("x".to_string(), x - h);
        let (fp, fm, dv) = (e.eval(&bp), e.eval(&bm), d.eval(&binds));
        if let (Ok(fp), Ok(fm), Ok(dv)) = (fp, fm, dv) {
            let fd = (fp - fm) / (2.0 * h);
            if fd.is_finite() && dv.is_finite() && fd.abs() < 1e8 {
                prop_assert!((dv - fd).abs() <= 1e-4 * (1.0 + dv.abs().max(fd.abs())),
                    "derivative mismatch {dv} vs {fd} for {e}");
            }
        }
    }
}

#[test]
fn derivative_fd_spot_checks() {
    // 50 deterministic random expressions via the seeded generator below.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let e = random_smooth_expr(&mut rng, 3);
        let x = rng.gen_range(0.4..1.6);
        let binds: Bindings = [("x".to_string(), x)].into();
        let d = e.differentiate("x");
        let h = 1e-6;
        let bp: Bindings = [("x".to_string(), x + h)].into();
        let bm: Bindings = [("x".to_string(), x - h)].into();
        if let (Ok(fp), Ok(fm), Ok(dv)) = (e.eval(&bp), e.eval(&bm), d.eval(&binds)) {
            let fd = (fp - fm) / (2.0 * h);
            if fd.is_finite() && fd.abs() < 1e6 {
                assert!(
                    (dv - fd).abs() <= 1e-5 * (1.0 + dv.abs().max(fd.abs())),
                    "mismatch {dv} vs {fd} for {e}"
                );
            }
        }
    }
}

fn random_smooth_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => Expr::int(rng.gen_range(-4..5)),
            1 => Expr::rat(rng.gen_range(1..5), rng.gen_range(1..5)),
            _ => Expr::var("x"),
        };
    }
    let a = random_smooth_expr(rng, depth - 1);
    let b = random_smooth_expr(rng, depth - 1);
    match rng.gen_range(0..7) {
        0 => a + b,
        1 => a - b,
        2 => a * b,
        3 => a.sin(),
        4 => a.cos(),
        5 => a.pow(Expr::int(rng.gen_range(1..4))),
        _ => (a * Expr::rat(1, 4)).exp(),
    }
}
