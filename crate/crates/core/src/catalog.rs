//! Constructors for the metric families under study: Minkowski space,
//! Kasner spacetimes, the T2-symmetric asymptotic model metric, its
//! homogeneous rescaling limit, and decay-tagged perturbations of the
//! model coefficients.
//!
//! Coordinate conventions: the model metric lives on the chart
//! `(t, theta, x, y)` with `t = R^2`; the limit metric lives on
//! `(Rhat, thetahat, xhat, yhat)`, with a `u`-chart variant where
//! `u = Rhat^2`.

use num::{BigRational, One};
use thiserror::Error;

use crate::expr::{parse, Bindings, EvalError, Expr, ParseError};
use crate::geometry::{Chart, GeometryError, Metric, Signature};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("spatial dimension must be at least 1, got {0}")]
    BadDimension(usize),
    #[error(
        "Kasner exponents must satisfy sum p = 1 and sum p^2 = 1; \
         got sum p = {sum}, sum p^2 = {sum_sq}"
    )]
    KasnerConstraint { sum: BigRational, sum_sq: BigRational },
    #[error("twist constant K must be nonzero")]
    ZeroTwist,
    #[error("Cinf must be positive, got {0}")]
    NonPositiveCinf(f64),
    #[error("L profile must be positive, but L({theta}) = {value}")]
    NonPositiveL { theta: f64, value: f64 },
    #[error("{slot} profile has unexpected free variables {vars:?}")]
    BadProfile { slot: &'static str, vars: Vec<String> },
    #[error("perturbing G is not allowed: the model requires |G - G(theta)| = 0")]
    ForbiddenGPerturbation,
    #[error(
        "decay exponent {exponent} for {target} exceeds the allowance {allowance}"
    )]
    DecayTooSlow {
        target: &'static str,
        exponent: f64,
        allowance: f64,
    },
    #[error("metric definition line {line}: {message}")]
    Definition { line: usize, message: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Kasner exponents, validated exactly in rational arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KasnerParams {
    exponents: Vec<BigRational>,
}

impl KasnerParams {
    pub fn new(exponents: Vec<BigRational>) -> Result<KasnerParams, CatalogError> {
        if exponents.is_empty() {
            return Err(CatalogError::BadDimension(0));
        }
        let sum: BigRational = exponents.iter().sum();
        let sum_sq: BigRational = exponents.iter().map(|p| p * p).sum();
        if !sum.is_one() || !sum_sq.is_one() {
            return Err(CatalogError::KasnerConstraint { sum, sum_sq });
        }
        Ok(KasnerParams { exponents })
    }

    /// Build from numerator/denominator pairs.
    pub fn from_pairs(pairs: &[(i64, i64)]) -> Result<KasnerParams, CatalogError> {
        KasnerParams::new(
            pairs
                .iter()
                .map(|&(n, d)| BigRational::new(n.into(), d.into()))
                .collect(),
        )
    }

    /// Rational parametrization of the 3d Kasner sphere:
    /// `p = (-u, 1+u, u(1+u)) / (1 + u + u^2)`.
    /// Every rational `u` gives exact exponents.
    pub fn from_sphere_parameter(u: BigRational) -> Result<KasnerParams, CatalogError> {
        let denom = BigRational::one() + &u + &u * &u;
        KasnerParams::new(vec![
            -&u / &denom,
            (BigRational::one() + &u) / &denom,
            &u * (BigRational::one() + &u) / &denom,
        ])
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[BigRational] {
        &self.exponents
    }
}

/// Minkowski metric diag(-1, 1, ..., 1) on `(t, x1..xn)`.
pub fn minkowski(n: usize) -> Result<Metric, CatalogError> {
    if n == 0 {
        return Err(CatalogError::BadDimension(n));
    }
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|k| format!("x{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let chart = Chart::new(&refs)?;
    let dim = n + 1;
    let mut comps = vec![vec![Expr::zero(); dim]; dim];
    comps[0][0] = Expr::int(-1);
    for k in 1..dim {
        comps[k][k] = Expr::one();
    }
    Ok(Metric::new(chart, Signature::Lorentzian, comps)?)
}

/// Kasner metric `g = -(1/n^2) dt^2 + sum_k t^{2 p_k} (dx^k)^2` on
/// `(t, x1..xn)`, `t > 0`. The lapse `1/n` makes `t` the Hubble time.
pub fn kasner(params: &KasnerParams) -> Result<Metric, CatalogError> {
    kasner_unchecked(params.exponents())
}

/// Kasner-form metric for arbitrary exponents, skipping the vacuum
/// constraints. Off the Kasner sphere the result is not Ricci-flat; this
/// exists so failure modes of the constraint checks can be exercised.
pub fn kasner_unchecked(exponents: &[BigRational]) -> Result<Metric, CatalogError> {
    let n = exponents.len();
    if n == 0 {
        return Err(CatalogError::BadDimension(0));
    }
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|k| format!("x{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let chart = Chart::new(&refs)?;
    let dim = n + 1;
    let mut comps = vec![vec![Expr::zero(); dim]; dim];
    comps[0][0] = Expr::Rational(-BigRational::new(1.into(), (n * n).into()));
    for (k, p) in exponents.iter().enumerate() {
        comps[k + 1][k + 1] =
            Expr::var("t").pow(Expr::Rational(BigRational::from_integer(2.into()) * p));
    }
    Ok(Metric::new(chart, Signature::Lorentzian, comps)?.with_range("t", 0.5, 3.0))
}

/// Parameters of the T2-symmetric asymptotic model: twist constant `K`,
/// constants `CU` and `Cinf`, and the theta-profiles `L > 0` and `G`.
///
/// The constants are expressions so they can be kept symbolic; `defaults`
/// supplies numeric values for any free constant names when sampling.
#[derive(Clone, Debug)]
pub struct T2ModelParams {
    pub twist: Expr,
    pub c_u: Expr,
    pub c_inf: Expr,
    pub lprofile: Expr,
    pub gprofile: Expr,
    defaults: Bindings,
}

/// Number of theta samples used to check `L > 0`.
const PROFILE_SAMPLES: usize = 33;

impl T2ModelParams {
    pub fn new(
        twist: Expr,
        c_u: Expr,
        c_inf: Expr,
        lprofile: Expr,
        gprofile: Expr,
        defaults: Bindings,
    ) -> Result<T2ModelParams, CatalogError> {
        let params = T2ModelParams {
            twist: twist.simplified(),
            c_u: c_u.simplified(),
            c_inf: c_inf.simplified(),
            lprofile: lprofile.simplified(),
            gprofile: gprofile.simplified(),
            defaults,
        };
        params.validate()?;
        Ok(params)
    }

    /// Small-expression test constants: `K=1, CU=0, Cinf=5/4, L=1, G=0`,
    /// chosen so `(4/(K sqrt 5)) Cinf^(1/2) = 2`.
    pub fn defaults() -> T2ModelParams {
        T2ModelParams::new(
            Expr::one(),
            Expr::zero(),
            Expr::rat(5, 4),
            Expr::one(),
            Expr::zero(),
            Bindings::new(),
        )
        .expect("default parameters are valid")
    }

    /// A non-default constant set exercising every parameter slot:
    /// `K=2, CU=0.3, Cinf=1, L=1 + 0.1 sin^2(theta), G=cos(theta)`.
    pub fn alternate() -> T2ModelParams {
        T2ModelParams::new(
            Expr::int(2),
            Expr::float(0.3),
            Expr::one(),
            parse("1 + 0.1*sin(theta)^2").expect("literal"),
            parse("cos(theta)").expect("literal"),
            Bindings::new(),
        )
        .expect("alternate parameters are valid")
    }

    /// Constants kept symbolic (`K`, `CU`, `Cinf` as free names) with the
    /// default numeric values attached for sampling.
    pub fn symbolic() -> T2ModelParams {
        let defaults: Bindings = [
            ("K".to_string(), 1.0),
            ("CU".to_string(), 0.0),
            ("Cinf".to_string(), 1.25),
        ]
        .into_iter()
        .collect();
        T2ModelParams::new(
            Expr::var("K"),
            Expr::var("CU"),
            Expr::var("Cinf"),
            Expr::one(),
            Expr::zero(),
            defaults,
        )
        .expect("symbolic parameters are valid")
    }

    pub fn with_gprofile(mut self, gprofile: Expr) -> Result<T2ModelParams, CatalogError> {
        self.gprofile = gprofile.simplified();
        self.validate()?;
        Ok(self)
    }

    pub fn with_lprofile(mut self, lprofile: Expr) -> Result<T2ModelParams, CatalogError> {
        self.lprofile = lprofile.simplified();
        self.validate()?;
        Ok(self)
    }

    pub fn bindings(&self) -> &Bindings {
        &self.defaults
    }

    /// True when `L` is a constant expression (no theta dependence).
    pub fn constant_lprofile(&self) -> bool {
        !self.lprofile.contains_var("theta")
    }

    fn validate(&self) -> Result<(), CatalogError> {
        for (slot, profile) in [("L", &self.lprofile), ("G", &self.gprofile)] {
            let extra: Vec<String> = profile
                .free_vars()
                .into_iter()
                .filter(|v| v != "theta" && !self.defaults.contains_key(v))
                .collect();
            if !extra.is_empty() {
                return Err(CatalogError::BadProfile { slot, vars: extra });
            }
        }
        // Constants must be numeric after applying the defaults.
        let k = self.twist.eval(&self.defaults)?;
        if k == 0.0 {
            return Err(CatalogError::ZeroTwist);
        }
        let c_inf = self.c_inf.eval(&self.defaults)?;
        if c_inf <= 0.0 {
            return Err(CatalogError::NonPositiveCinf(c_inf));
        }
        self.c_u.eval(&self.defaults)?;
        let mut b = self.defaults.clone();
        for i in 0..PROFILE_SAMPLES {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / PROFILE_SAMPLES as f64;
            b.insert("theta".to_string(), theta);
            let value = self.lprofile.eval(&b)?;
            if value <= 0.0 {
                return Err(CatalogError::NonPositiveL { theta, value });
            }
            self.gprofile.eval(&b)?;
        }
        Ok(())
    }
}

/// Which model coefficient a perturbation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationTarget {
    /// Additive in `eta`; the bound `|K^2 e^{2 eta} - R^2| = O(R^{7/4})`
    /// translates to an additive `O(R^{-1/4})` term in `eta` itself.
    Eta,
    /// `|U - CU| = O(R^{-1/2})`.
    U,
    /// `|a^{-1} - leading| = O(R^{-1})`.
    AInv,
    /// `|G - G(theta)| = 0`: any perturbation is rejected.
    G,
    /// `|H - leading| = O(R^{1/4})`.
    H,
}

impl PerturbationTarget {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationTarget::Eta => "eta",
            PerturbationTarget::U => "U",
            PerturbationTarget::AInv => "a^-1",
            PerturbationTarget::G => "G",
            PerturbationTarget::H => "H",
        }
    }

    /// Largest admissible decay exponent for an additive perturbation
    /// `profile(theta) * R^exponent`.
    pub fn allowance(self) -> Option<f64> {
        match self {
            PerturbationTarget::Eta => Some(-0.25),
            PerturbationTarget::U => Some(-0.5),
            PerturbationTarget::AInv => Some(-1.0),
            PerturbationTarget::G => None,
            PerturbationTarget::H => Some(0.25),
        }
    }
}

/// Additive perturbation `profile(theta) * R^exponent` of one model
/// coefficient.
#[derive(Clone, Debug)]
pub struct Perturbation {
    target: PerturbationTarget,
    profile: Expr,
    exponent: f64,
}

impl Perturbation {
    pub fn new(
        target: PerturbationTarget,
        profile: Expr,
        exponent: f64,
    ) -> Result<Perturbation, CatalogError> {
        let profile = profile.simplified();
        let extra: Vec<String> = profile
            .free_vars()
            .into_iter()
            .filter(|v| v != "theta")
            .collect();
        if !extra.is_empty() {
            return Err(CatalogError::BadProfile {
                slot: target.name(),
                vars: extra,
            });
        }
        match target.allowance() {
            None => {
                if !profile.is_zero() {
                    return Err(CatalogError::ForbiddenGPerturbation);
                }
            }
            Some(allowance) => {
                if exponent > allowance + 1e-12 {
                    return Err(CatalogError::DecayTooSlow {
                        target: target.name(),
                        exponent,
                        allowance,
                    });
                }
            }
        }
        Ok(Perturbation {
            target,
            profile,
            exponent,
        })
    }

    pub fn target(&self) -> PerturbationTarget {
        self.target
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// The additive term as an expression in `R` and `theta`; the exponent
    /// is converted to its exact binary rational.
    fn term(&self) -> Expr {
        let e = BigRational::from_float(self.exponent).expect("finite exponent");
        (self.profile.clone() * Expr::var("R").pow(Expr::Rational(e))).simplified()
    }
}

/// The asymptotic model metric on `(t, theta, x, y)` with `t = R^2`:
///
/// ```text
/// g = -(1/4) K^-2 e^{-2 CU} dt^2
///   + (4/5) K^-2 e^{-2 CU} Cinf L^2 t^{3/2} dtheta^2
///   + e^{2 CU} (dx + G dtheta)^2
///   + e^{-2 CU} t (dy + (4/(K sqrt 5)) Cinf^{1/2} L t^{1/4} dtheta)^2
/// ```
pub fn t2_model(params: &T2ModelParams) -> Result<Metric, CatalogError> {
    apply_perturbation(params, &[])
}

/// Model metric with coefficient functions replaced by
/// `leading + profile * R^exponent`; an empty list gives the exact model.
pub fn apply_perturbation(
    params: &T2ModelParams,
    perts: &[Perturbation],
) -> Result<Metric, CatalogError> {
    let delta = |t: PerturbationTarget| -> Expr {
        let terms: Vec<Expr> = perts
            .iter()
            .filter(|p| p.target == t)
            .map(Perturbation::term)
            .collect();
        if terms.is_empty() {
            Expr::zero()
        } else {
            Expr::Add(terms)
        }
    };
    let r = Expr::var("R");
    // e^{2 eta} = K^-2 R^2 e^{2 d_eta}; U = CU + d_U.
    let e2eta = params.twist.clone().powi(-2)
        * r.clone().powi(2)
        * Expr::exp(Expr::int(2) * delta(PerturbationTarget::Eta));
    let u = params.c_u.clone() + delta(PerturbationTarget::U);
    let ainv = leading_ainv(params) + delta(PerturbationTarget::AInv);
    let h = leading_h(params) + delta(PerturbationTarget::H);
    let g_fun = params.gprofile.clone();

    let e2u = Expr::exp(Expr::int(2) * u.clone());
    let em2u = Expr::exp(Expr::int(-2) * u);
    // e^{2(eta - U)}
    let e2eu = (e2eta * em2u.clone()).simplified();

    // Components in (R, theta, x, y) follow Eq-form
    // g = e^{2(eta-U)}(-dR^2 + a^-2 dtheta^2) + e^{2U}(dx + G dtheta)^2
    //   + e^{-2U} R^2 (dy + H dtheta)^2,
    // then t = R^2 turns -e^{2(eta-U)} dR^2 into -(1/4) e^{2(eta-U)}/t dt^2.
    let g_tt = Expr::rat(-1, 4) * e2eu.clone() * Expr::var("t").powi(-1);
    let g_thth = e2eu * ainv.clone().powi(2)
        + e2u.clone() * g_fun.clone().powi(2)
        + em2u.clone() * r.clone().powi(2) * h.clone().powi(2);
    let g_xx = e2u.clone();
    let g_xth = e2u * g_fun;
    let g_yy = em2u.clone() * r.clone().powi(2);
    let g_yth = em2u * r.powi(2) * h;

    let sqrt_t = Expr::var("t").pow(Expr::rat(1, 2));
    let sub = |e: Expr| e.subst("R", &sqrt_t).simplified();

    let chart = Chart::new(&["t", "theta", "x", "y"])?;
    let z = Expr::zero;
    let comps = vec![
        vec![sub(g_tt), z(), z(), z()],
        vec![z(), sub(g_thth), sub(g_xth.clone()), sub(g_yth.clone())],
        vec![z(), sub(g_xth), sub(g_xx), z()],
        vec![z(), sub(g_yth), z(), sub(g_yy)],
    ];
    Ok(Metric::new(chart, Signature::Lorentzian, comps)?
        .with_defaults(params.bindings().clone())
        .with_range("t", 0.5, 3.0)
        .with_range("theta", 0.0, 2.0 * std::f64::consts::PI))
}

/// Leading term of `a^-1`: `(2/sqrt 5) Cinf^{1/2} R^{1/2} L(theta)`.
fn leading_ainv(params: &T2ModelParams) -> Expr {
    Expr::int(2)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * Expr::var("R").pow(Expr::rat(1, 2))
        * params.lprofile.clone()
}

/// Leading term of `H`: `(4/(K sqrt 5)) Cinf^{1/2} R^{1/2} L(theta)`.
fn leading_h(params: &T2ModelParams) -> Expr {
    Expr::int(4)
        * params.twist.clone().powi(-1)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * Expr::var("R").pow(Expr::rat(1, 2))
        * params.lprofile.clone()
}

/// The homogeneous rescaling limit on `(Rhat, thetahat, xhat, yhat)`:
///
/// ```text
/// g_inf = e^{2(etahat - Uhat)} (-dRhat^2 + ahat^-2 dthetahat^2)
///       + e^{2 Uhat} dxhat^2
///       + e^{-2 Uhat} Rhat^2 (dyhat + Hhat dthetahat)^2
/// ```
///
/// with `e^{2 etahat} = K^-2 Rhat^2`, `ahat^-1 = (2/sqrt 5) Cinf^{1/2}
/// Rhat^{1/2}`, `Uhat = CU`, `Ghat = 0`, and `Hhat = (4/(K sqrt 5))
/// Cinf^{1/2} Rhat^{1/2}`. The profiles `L`, `G` play no role: the limit
/// is spatially homogeneous.
pub fn t2_limit(params: &T2ModelParams) -> Result<Metric, CatalogError> {
    let rhat = Expr::var("Rhat");
    let e2eta = params.twist.clone().powi(-2) * rhat.clone().powi(2);
    let ainv = Expr::int(2)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * rhat.clone().pow(Expr::rat(1, 2));
    let h = Expr::int(4)
        * params.twist.clone().powi(-1)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * rhat.clone().pow(Expr::rat(1, 2));
    let e2u = Expr::exp(Expr::int(2) * params.c_u.clone());
    let em2u = Expr::exp(Expr::int(-2) * params.c_u.clone());
    let e2eu = e2eta * em2u.clone();

    let g_rr = Expr::int(-1) * e2eu.clone();
    let g_thth = e2eu * ainv.powi(2) + em2u.clone() * rhat.clone().powi(2) * h.clone().powi(2);
    let g_xx = e2u;
    let g_yy = em2u.clone() * rhat.clone().powi(2);
    let g_yth = em2u * rhat.powi(2) * h;

    let chart = Chart::new(&["Rhat", "thetahat", "xhat", "yhat"])?;
    let z = Expr::zero;
    let comps = vec![
        vec![g_rr, z(), z(), z()],
        vec![z(), g_thth, z(), g_yth.clone()],
        vec![z(), z(), g_xx, z()],
        vec![z(), g_yth, z(), g_yy],
    ];
    Ok(Metric::new(chart, Signature::Lorentzian, comps)?
        .with_defaults(params.bindings().clone())
        .with_range("Rhat", 0.5, 2.0))
}

/// The limit metric in the `u`-chart (`u = Rhat^2`), the form the
/// rescaled model converges to on `(u, thetahat, xhat, yhat)`:
///
/// ```text
/// g_inf = -(1/4) K^-2 e^{-2 CU} du^2
///       + (4/5) K^-2 e^{-2 CU} Cinf u^{3/2} dthetahat^2
///       + e^{2 CU} dxhat^2
///       + e^{-2 CU} u (dyhat + (4/(K sqrt 5)) Cinf^{1/2} u^{1/4} dthetahat)^2
/// ```
pub fn t2_limit_u(params: &T2ModelParams) -> Result<Metric, CatalogError> {
    let u = Expr::var("u");
    let kinv2 = params.twist.clone().powi(-2);
    let e2u = Expr::exp(Expr::int(2) * params.c_u.clone());
    let em2u = Expr::exp(Expr::int(-2) * params.c_u.clone());
    let h = Expr::int(4)
        * params.twist.clone().powi(-1)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * u.clone().pow(Expr::rat(1, 4));

    let g_uu = Expr::rat(-1, 4) * kinv2.clone() * em2u.clone();
    let g_thth = Expr::rat(4, 5)
        * kinv2
        * em2u.clone()
        * params.c_inf.clone()
        * u.clone().pow(Expr::rat(3, 2))
        + em2u.clone() * u.clone() * h.clone().powi(2);
    let g_xx = e2u;
    let g_yy = em2u.clone() * u.clone();
    let g_yth = em2u * u * h;

    let chart = Chart::new(&["u", "thetahat", "xhat", "yhat"])?;
    let z = Expr::zero;
    let comps = vec![
        vec![g_uu, z(), z(), z()],
        vec![z(), g_thth, z(), g_yth.clone()],
        vec![z(), z(), g_xx, z()],
        vec![z(), g_yth, z(), g_yy],
    ];
    Ok(Metric::new(chart, Signature::Lorentzian, comps)?
        .with_defaults(params.bindings().clone())
        .with_range("u", 0.5, 2.0))
}

/// Parse a metric definition file. Line-oriented format; `#` starts a
/// comment. Directives:
///
/// ```text
/// chart t x1 x2 x3          # coordinate names, time first
/// signature lorentzian      # or riemannian (default lorentzian)
/// param K 1.0               # numeric default for a free parameter
/// range t 0.5 3.0           # sampling range for a coordinate
/// g t t -1                  # component by coordinate names, expr grammar
/// g x1 x1 t^(4/3)
/// ```
///
/// Unset components are zero; symmetric entries may be given once.
pub fn parse_metric_definition(text: &str) -> Result<Metric, CatalogError> {
    let mut chart: Option<Chart> = None;
    let mut signature = Signature::Lorentzian;
    let mut defaults = Bindings::new();
    let mut ranges: Vec<(String, f64, f64)> = Vec::new();
    let mut entries: Vec<(String, String, Expr)> = Vec::new();

    let err = |line: usize, message: &str| CatalogError::Definition {
        line,
        message: message.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let keyword = words.next().unwrap();
        match keyword {
            "chart" => {
                let names: Vec<&str> = words.collect();
                if chart.is_some() {
                    return Err(err(line, "duplicate chart declaration"));
                }
                chart = Some(Chart::new(&names)?);
            }
            "signature" => match words.next() {
                Some("lorentzian") => signature = Signature::Lorentzian,
                Some("riemannian") => signature = Signature::Riemannian,
                _ => return Err(err(line, "expected lorentzian or riemannian")),
            },
            "param" => {
                let name = words.next().ok_or_else(|| err(line, "param needs a name"))?;
                let value: f64 = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err(line, "param needs a numeric value"))?;
                defaults.insert(name.to_string(), value);
            }
            "range" => {
                let name = words.next().ok_or_else(|| err(line, "range needs a coordinate"))?;
                let lo: f64 = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err(line, "range needs two numbers"))?;
                let hi: f64 = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err(line, "range needs two numbers"))?;
                ranges.push((name.to_string(), lo, hi));
            }
            "g" => {
                let a = words.next().ok_or_else(|| err(line, "g needs two coordinate names"))?;
                let b = words.next().ok_or_else(|| err(line, "g needs two coordinate names"))?;
                let rest: Vec<&str> = words.collect();
                if rest.is_empty() {
                    return Err(err(line, "g needs a component expression"));
                }
                let expr = parse(&rest.join(" "))?;
                entries.push((a.to_string(), b.to_string(), expr));
            }
            other => {
                return Err(err(line, &format!("unknown directive `{other}`")));
            }
        }
    }

    let chart = chart.ok_or_else(|| err(0, "missing chart declaration"))?;
    let n = chart.dim();
    let index = |name: &str| chart.coords().iter().position(|c| c == name);
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for (a, b, expr) in entries {
        let (Some(i), Some(j)) = (index(&a), index(&b)) else {
            return Err(err(0, &format!("component ({a},{b}) names unknown coordinates")));
        };
        comps[i][j] = expr.clone();
        if i != j && comps[j][i].is_zero() {
            comps[j][i] = expr;
        }
    }
    let mut metric = Metric::new(chart, signature, comps)?.with_defaults(defaults);
    for (name, lo, hi) in ranges {
        metric = metric.with_range(&name, lo, hi);
    }
    Ok(metric)
}
