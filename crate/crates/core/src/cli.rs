//! Command-line front end.
//!
//! Four commands: `curvature` (full curvature of a named metric),
//! `verify` (run a named check suite), `converge` (rescaling convergence
//! study with CSV + JSON output), and `report` (constraint and backreaction
//! residuals of the limit geometry).  Exit codes: 0 success, 1 failed
//! check, 2 invalid configuration, 3 computation error.
//! `EINSTEIN_LIMITS_THREADS` caps the worker pool used for grid sweeps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::BigRational;
use serde_json::{Map, Value};

use crate::adm::{constraint_report, gw_trace_check, lefloch_residual};
use crate::catalog::{
    kasner, minkowski, parse_metric_definition, t2_limit, t2_model, KasnerParams, T2ModelParams,
};
use crate::expr::{parse, Bindings, Expr};
use crate::geometry::Metric;
use crate::rescaling::{convergence_study, kasner_type_iii_plan, pullback, RescalingError};
use crate::report::{
    constraint_value, convergence_csv, convergence_value, envelope, gw_trace_value,
    lefloch_value, number, render, tensor_value,
};

#[derive(Parser)]
#[command(
    name = "einstein-limits",
    version,
    about = "Curvature, rescaling-limit, and constraint verification for explicit vacuum metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Christoffel symbols, Riemann, Ricci, scalar and Einstein
    /// curvature, and the pointwise curvature norm of a metric.
    Curvature {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a named verification suite; exit 0 iff every check passes.
    Verify {
        /// Suite: erratum, kasner-pullback, lefloch, constraints, decay, all.
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        metric: MetricArgs,
        /// How residuals must vanish: symbolically, numerically, or
        /// symbolic-with-numeric-fallback.
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Measure sup-distance convergence of the rescaled family to its limit;
    /// writes CSV (t_i,j,sup_distance) and JSON with the fitted rate.
    Converge {
        #[command(flatten)]
        metric: MetricArgs,
        /// Comma-separated basepoint times, increasing, at least four.
        #[arg(long, default_value = "1e2,1e4,1e6,1e8")]
        ti: String,
        /// Grid points per axis on the compact set.
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// Output base path; `<out>.csv` and `<out>.json` are written.
        #[arg(long, default_value = "converge")]
        out: PathBuf,
    },
    /// Emit the constraint report of the limit geometry: Hamiltonian
    /// residual, backreaction identity, energy density, stress-energy trace.
    Report {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct MetricArgs {
    /// Metric family (minkowski, kasner, t2-model, t2-limit) or a path to a
    /// metric definition file.
    #[arg(long)]
    metric: Option<String>,
    /// Kasner exponents as comma-separated rationals, e.g. 2/3,2/3,-1/3.
    #[arg(long)]
    p: Option<String>,
    /// Twist constant K (nonzero).
    #[arg(long = "K")]
    twist: Option<String>,
    /// Asymptotic constant C_U.
    #[arg(long = "CU")]
    cu: Option<String>,
    /// Asymptotic constant C_inf (positive).
    #[arg(long = "Cinf")]
    cinf: Option<String>,
    /// Spatial profile L(theta) (positive).
    #[arg(long = "Lprofile")]
    lprofile: Option<String>,
    /// Spatial profile G(theta).
    #[arg(long = "Gprofile")]
    gprofile: Option<String>,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Residuals must simplify to literal zero.
    Symbolic,
    /// Residuals are bounded at sample points only.
    Numeric,
    /// Symbolic first, numeric fallback recorded in the report.
    Auto,
}

/// Errors carrying the exit-code contract: 2 config, 3 computation.
enum CliError {
    Config(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Compute(m) => m,
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn compute(msg: impl ToString) -> CliError {
    CliError::Compute(msg.to_string())
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {}", e.message());
        return e.code();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("EINSTEIN_LIMITS_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| config(format!("EINSTEIN_LIMITS_THREADS must be a positive integer, got {raw:?}")))?;
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Curvature { metric, out } => cmd_curvature(&metric, &out),
        Command::Verify {
            suite,
            metric,
            mode,
            out,
        } => cmd_verify(&suite, &metric, mode, &out),
        Command::Converge {
            metric,
            ti,
            grid,
            out,
        } => cmd_converge(&metric, &ti, grid, &out),
        Command::Report { metric, out } => cmd_report(&metric, &out),
    }
}

// ---------------------------------------------------------------------------
// Flag parsing helpers
// ---------------------------------------------------------------------------

fn parse_rational(text: &str) -> Result<BigRational, CliError> {
    let expr = parse(text)
        .map_err(|e| config(format!("cannot parse {text:?} as a rational: {e}")))?
        .simplified();
    match expr {
        Expr::Rational(r) => Ok(r),
        other => Err(config(format!(
            "expected a rational constant, got {other}"
        ))),
    }
}

fn parse_exponents(text: &str) -> Result<Vec<BigRational>, CliError> {
    text.split(',').map(|s| parse_rational(s.trim())).collect()
}

/// Parse a constant flag: a closed-form expression with no free variables.
fn parse_constant(flag: &str, text: &str) -> Result<Expr, CliError> {
    let expr = parse(text)
        .map_err(|e| config(format!("--{flag}: {e}")))?
        .simplified();
    if let Some(v) = expr.free_vars().into_iter().next() {
        return Err(config(format!("--{flag} must be constant; found variable {v}")));
    }
    Ok(expr)
}

/// Parse a profile flag: an expression in `theta` only.
fn parse_profile(flag: &str, text: &str) -> Result<Expr, CliError> {
    let expr = parse(text)
        .map_err(|e| config(format!("--{flag}: {e}")))?
        .simplified();
    let allowed: BTreeSet<String> = std::iter::once("theta".to_string()).collect();
    if let Some(v) = expr.free_vars().difference(&allowed).next() {
        return Err(config(format!(
            "--{flag} may depend on theta only; found variable {v}"
        )));
    }
    Ok(expr)
}

fn t2_params(args: &MetricArgs) -> Result<T2ModelParams, CliError> {
    let base = T2ModelParams::defaults();
    let twist = match &args.twist {
        Some(s) => parse_constant("K", s)?,
        None => base.twist.clone(),
    };
    let cu = match &args.cu {
        Some(s) => parse_constant("CU", s)?,
        None => base.c_u.clone(),
    };
    let cinf = match &args.cinf {
        Some(s) => parse_constant("Cinf", s)?,
        None => base.c_inf.clone(),
    };
    let lprofile = match &args.lprofile {
        Some(s) => parse_profile("Lprofile", s)?,
        None => base.lprofile.clone(),
    };
    let gprofile = match &args.gprofile {
        Some(s) => parse_profile("Gprofile", s)?,
        None => base.gprofile.clone(),
    };
    T2ModelParams::new(twist, cu, cinf, lprofile, gprofile, Bindings::new())
        .map_err(|e| config(e.to_string()))
}

fn kasner_params(args: &MetricArgs) -> Result<KasnerParams, CliError> {
    let exponents = match &args.p {
        Some(text) => parse_exponents(text)?,
        None => parse_exponents("2/3,2/3,-1/3")?,
    };
    KasnerParams::new(exponents).map_err(|e| config(e.to_string()))
}

/// Reject flags that do not apply to the chosen metric family.
fn check_flag_scope(name: &str, args: &MetricArgs) -> Result<(), CliError> {
    let kasner_like = name == "kasner";
    let t2_like = name == "t2-model" || name == "t2-limit";
    if args.p.is_some() && !kasner_like {
        return Err(config(format!("--p does not apply to metric {name:?}")));
    }
    let t2_flags = [
        ("K", args.twist.is_some()),
        ("CU", args.cu.is_some()),
        ("Cinf", args.cinf.is_some()),
        ("Lprofile", args.lprofile.is_some()),
        ("Gprofile", args.gprofile.is_some()),
    ];
    for (flag, present) in t2_flags {
        if present && !t2_like {
            return Err(config(format!("--{flag} does not apply to metric {name:?}")));
        }
    }
    Ok(())
}

/// Resolve the named metric family (or definition file) into a metric.
fn resolve_metric(args: &MetricArgs, default: &str) -> Result<(String, Metric), CliError> {
    let name = args.metric.clone().unwrap_or_else(|| default.to_string());
    if matches!(name.as_str(), "minkowski" | "kasner" | "t2-model" | "t2-limit") {
        check_flag_scope(&name, args)?;
    }
    let metric = match name.as_str() {
        "minkowski" => minkowski(4).map_err(|e| compute(e))?,
        "kasner" => kasner(&kasner_params(args)?).map_err(|e| config(e.to_string()))?,
        "t2-model" => t2_model(&t2_params(args)?).map_err(|e| config(e.to_string()))?,
        "t2-limit" => t2_limit(&t2_params(args)?).map_err(|e| config(e.to_string()))?,
        other => {
            let path = Path::new(other);
            if !path.is_file() {
                return Err(config(format!(
                    "unknown metric {other:?} (not a family name or a definition file)"
                )));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| config(format!("cannot read {other:?}: {e}")))?;
            parse_metric_definition(&text).map_err(|e| config(format!("{other}: {e}")))?
        }
    };
    Ok((name, metric))
}

fn write_or_print(out: &OutArgs, map: &Map<String, Value>) -> Result<(), CliError> {
    match &out.out {
        Some(path) => crate::report::write_json(path, map)
            .map_err(|e| config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{}", render(map));
            Ok(())
        }
    }
}

fn params_value(args: &MetricArgs, name: &str) -> Result<Value, CliError> {
    let mut map = Map::new();
    if name == "kasner" {
        let p = kasner_params(args)?;
        let list: Vec<Value> = p
            .exponents()
            .iter()
            .map(|r| Value::String(r.to_string()))
            .collect();
        map.insert("p".into(), Value::Array(list));
    }
    if name == "t2-model" || name == "t2-limit" {
        let p = t2_params(args)?;
        map.insert("K".into(), Value::String(p.twist.to_string()));
        map.insert("CU".into(), Value::String(p.c_u.to_string()));
        map.insert("Cinf".into(), Value::String(p.c_inf.to_string()));
        map.insert("Lprofile".into(), Value::String(p.lprofile.to_string()));
        map.insert("Gprofile".into(), Value::String(p.gprofile.to_string()));
    }
    Ok(Value::Object(map))
}

// ---------------------------------------------------------------------------
// curvature
// ---------------------------------------------------------------------------

/// Sample-point seed for numeric bounds in CLI reports.
const CLI_SEED: u64 = 0x5eed_0c11;

fn max_abs_at_samples(g: &Metric, exprs: &[&Expr]) -> Result<f64, CliError> {
    if exprs.iter().all(|e| e.is_zero()) {
        return Ok(0.0);
    }
    let points = g.sample_points(20, CLI_SEED);
    let mut max = 0.0f64;
    for e in exprs {
        for p in &points {
            let v: f64 = e.eval(p).map_err(|e| compute(e))?;
            max = max.max(v.abs());
        }
    }
    Ok(max)
}

/// Nonzero metric components as a JSON object keyed by coordinate pairs.
fn metric_value(g: &Metric) -> Value {
    let chart = g.chart();
    let mut components = Map::new();
    for a in 0..g.dim() {
        for b in a..g.dim() {
            let c = g.component(a, b);
            if !c.is_zero() {
                let key = format!("{},{}", chart.coord(a), chart.coord(b));
                components.insert(key, Value::String(c.to_string()));
            }
        }
    }
    let mut map = Map::new();
    map.insert("valence".into(), Value::String("dd".into()));
    map.insert("components".into(), Value::Object(components));
    Value::Object(map)
}

fn cmd_curvature(args: &MetricArgs, out: &OutArgs) -> Result<i32, CliError> {
    let (name, g) = resolve_metric(args, "kasner")?;
    let christoffel = g.christoffel().map_err(|e| compute(e))?;
    let riemann = g.riemann().map_err(|e| compute(e))?;
    let ricci = g.ricci().map_err(|e| compute(e))?;
    let scalar = g.scalar_curvature().map_err(|e| compute(e))?;
    let einstein = g.einstein_tensor().map_err(|e| compute(e))?;

    let idx = ricci.nonzero_indices();
    let ricci_refs: Vec<&Expr> = idx.iter().map(|i| ricci.get(i)).collect();
    let ricci_max_abs = max_abs_at_samples(&g, &ricci_refs)?;

    let lowered = g.riemann_lowered().map_err(|e| compute(e))?;
    let points = g.sample_points(3, CLI_SEED);
    let mut norms = Vec::new();
    for p in &points {
        let v = g.curvature_norm_with(&lowered, p).map_err(|e| compute(e))?;
        let mut m = Map::new();
        let mut point = Map::new();
        for (k, &x) in p {
            point.insert(k.clone(), number(x));
        }
        m.insert("point".into(), Value::Object(point));
        m.insert("norm".into(), number(v));
        norms.push(Value::Object(m));
    }

    let mut map = envelope("curvature");
    map.insert("metric".into(), Value::String(name.clone()));
    map.insert("params".into(), params_value(args, &name)?);
    map.insert("g".into(), metric_value(&g));
    map.insert("christoffel".into(), tensor_value(&christoffel));
    map.insert("riemann".into(), tensor_value(&riemann));
    map.insert("ricci".into(), tensor_value(&ricci));
    map.insert("ricci_max_abs".into(), number(ricci_max_abs));
    map.insert("scalar".into(), Value::String(scalar.to_string()));
    map.insert("einstein".into(), tensor_value(&einstein));
    map.insert("curvature_norm".into(), Value::Array(norms));
    write_or_print(out, &map)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Check {
    name: String,
    mode: &'static str,
    fallback: bool,
    residual: f64,
    pass: bool,
    detail: String,
}

impl Check {
    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(self.name.clone()));
        m.insert("mode".into(), Value::String(self.mode.into()));
        m.insert("fallback".into(), Value::Bool(self.fallback));
        m.insert("residual".into(), number(self.residual));
        m.insert("pass".into(), Value::Bool(self.pass));
        m.insert("detail".into(), Value::String(self.detail.clone()));
        Value::Object(m)
    }
}

/// Numeric tolerance for fallback residual bounds.
const NUMERIC_TOL: f64 = 1e-9;

/// Check that `exprs` all vanish, honoring the verification mode.
fn zero_check(
    name: &str,
    g: &Metric,
    exprs: &[&Expr],
    mode: Mode,
) -> Result<Check, CliError> {
    let symbolically_zero = exprs.iter().all(|e| e.is_zero());
    if symbolically_zero {
        return Ok(Check {
            name: name.into(),
            mode: "symbolic-zero",
            fallback: false,
            residual: 0.0,
            pass: true,
            detail: "simplified to zero".into(),
        });
    }
    if mode == Mode::Symbolic {
        let bound = max_abs_at_samples(g, exprs)?;
        return Ok(Check {
            name: name.into(),
            mode: "symbolic-zero",
            fallback: false,
            residual: bound,
            pass: false,
            detail: "did not simplify to zero".into(),
        });
    }
    let bound = max_abs_at_samples(g, exprs)?;
    Ok(Check {
        name: name.into(),
        mode: "numeric-bounded",
        fallback: mode == Mode::Auto,
        residual: bound,
        pass: bound <= NUMERIC_TOL,
        detail: format!("max |residual| over samples, tolerance {NUMERIC_TOL:e}"),
    })
}

fn boolean_check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        mode: "structural",
        fallback: false,
        residual: if pass { 0.0 } else { 1.0 },
        pass,
        detail,
    }
}

fn bound_check(name: &str, residual: f64, tol: f64, detail: String) -> Check {
    Check {
        name: name.into(),
        mode: "numeric-bounded",
        fallback: false,
        residual,
        pass: residual <= tol,
        detail,
    }
}

/// Named metric families a suite accepts (besides the default).
fn suite_metrics(suite: &str) -> Result<(&'static str, &'static [&'static str]), CliError> {
    match suite {
        "erratum" | "lefloch" | "constraints" => Ok(("t2-limit", &["t2-limit"])),
        "kasner-pullback" | "decay" => Ok(("kasner", &["kasner"])),
        "all" => Ok(("", &[])),
        other => Err(config(format!(
            "unknown suite {other:?} (expected erratum, kasner-pullback, lefloch, constraints, decay, or all)"
        ))),
    }
}

fn suite_checks(suite: &str, args: &MetricArgs, mode: Mode) -> Result<Vec<Check>, CliError> {
    match suite {
        "erratum" => erratum_checks(args, mode),
        "kasner-pullback" => kasner_pullback_checks(args, mode),
        "lefloch" => lefloch_checks(args, mode),
        "constraints" => constraints_checks(args, mode),
        "decay" => decay_checks(args),
        "all" => {
            let mut checks = erratum_checks(args, mode)?;
            checks.extend(kasner_pullback_checks(args, mode)?);
            checks.extend(lefloch_checks(args, mode)?);
            checks.extend(constraints_checks(args, mode)?);
            checks.extend(decay_checks(args)?);
            Ok(checks)
        }
        _ => unreachable!("suite validated earlier"),
    }
}

fn erratum_checks(args: &MetricArgs, mode: Mode) -> Result<Vec<Check>, CliError> {
    let params = t2_params(args)?;
    let g = t2_limit(&params).map_err(|e| compute(e))?;
    let report = gw_trace_check(&g).map_err(|e| compute(e))?;
    let mut checks = Vec::new();
    checks.push(zero_check("scalar_curvature", &g, &[&report.scalar], mode)?);
    checks.push(zero_check("stress_energy_trace", &g, &[&report.trace], mode)?);

    let einstein = g.einstein_tensor().map_err(|e| compute(e))?;
    let support = einstein.nonzero_indices();
    let expected = vec![vec![0usize, 0], vec![1, 1]];
    checks.push(boolean_check(
        "einstein_support",
        support == expected,
        format!("nonzero coordinate components {support:?}, expected RhatRhat and thetahatthetahat"),
    ));

    let mut labels: Vec<(String, String)> = report
        .frame_components
        .iter()
        .map(|(a, b, _)| (a.clone(), b.clone()))
        .collect();
    labels.sort();
    let frame_ok = labels
        == vec![
            ("Rhat".to_string(), "Rhat".to_string()),
            ("thetahat".to_string(), "thetahat".to_string()),
        ];
    checks.push(boolean_check(
        "frame_support",
        frame_ok,
        format!("frame components on legs {labels:?}"),
    ));

    if frame_ok {
        let mut b = Bindings::new();
        b.insert("Rhat".to_string(), 1.3);
        let mut values: Vec<f64> = Vec::new();
        for (_, _, e) in &report.frame_components {
            values.push(e.eval(&b).map_err(|e| compute(e))?);
        }
        let equal = (values[0] - values[1]).abs();
        checks.push(bound_check(
            "frame_components_equal",
            equal,
            1e-10 * values[0].abs().max(1.0),
            "|T(e_theta,e_theta) - T(e_0,e_0)| at Rhat = 1.3".into(),
        ));
        checks.push(boolean_check(
            "frame_components_positive",
            values.iter().all(|&v| v > 0.0),
            format!("values {values:?} at Rhat = 1.3"),
        ));
    }
    Ok(checks)
}

fn kasner_pullback_checks(args: &MetricArgs, mode: Mode) -> Result<Vec<Check>, CliError> {
    let params = kasner_params(args)?;
    let g = kasner(&params).map_err(|e| config(e.to_string()))?;
    // Any placeholder time works: the check substitutes the symbolic map.
    let plan = kasner_type_iii_plan(&params, &[10.0]).map_err(|e| compute(e))?;
    let scale = Expr::var("ti").powi(-2);
    let pulled = pullback(&g, plan.new_chart.clone(), &plan.maps, &scale)
        .map_err(|e| compute(e))?;

    // The expected limit is the same Kasner metric written in the chart of
    // the pullback (time coordinate u).
    let n = g.dim();
    let u = Expr::var(plan.new_chart.coord(0));
    let time = g.chart().coord(0).to_string();
    let mut diffs = Vec::new();
    for a in 0..n {
        for b in a..n {
            let expected = g.component(a, b).clone().subst(&time, &u).simplified();
            diffs.push((pulled.component(a, b).clone() - expected).simplified());
        }
    }
    let refs: Vec<&Expr> = diffs.iter().collect();
    // Numeric fallback needs the pulled-back chart's ranges, so bound on the
    // pulled metric rather than the source.
    Ok(vec![zero_check("kasner_pullback", &pulled, &refs, mode)?])
}

fn lefloch_checks(args: &MetricArgs, mode: Mode) -> Result<Vec<Check>, CliError> {
    let params = t2_params(args)?;
    let g = t2_limit(&params).map_err(|e| compute(e))?;
    let res = lefloch_residual(&params).map_err(|e| compute(e))?;
    let mut checks = vec![zero_check("lefloch_difference", &g, &[&res.difference], mode)?];
    let mut worst = 0.0f64;
    for &r in &[0.5, 1.0, 2.0] {
        let mut b = Bindings::new();
        b.insert("Rhat".to_string(), r);
        let lhs: f64 = res.lhs.eval(&b).map_err(|e| compute(e))?;
        worst = worst.max((lhs * r - 1.25).abs());
    }
    checks.push(bound_check(
        "lefloch_value",
        worst,
        1e-12,
        "max |LHS * Rhat - 5/4| at Rhat in {0.5, 1, 2}".into(),
    ));
    Ok(checks)
}

fn constraints_checks(args: &MetricArgs, mode: Mode) -> Result<Vec<Check>, CliError> {
    let params = t2_params(args)?;
    let g = crate::catalog::t2_limit_u(&params).map_err(|e| compute(e))?;
    let slice = crate::adm::adm_split(&g).map_err(|e| compute(e))?;
    let hamiltonian = crate::adm::hamiltonian_residual(&slice).map_err(|e| compute(e))?;
    let rho = crate::adm::energy_density(&slice).map_err(|e| compute(e))?;

    let mut checks = Vec::new();
    // The limit carries an effective fluid: the Hamiltonian residual equals
    // twice the energy density rather than vanishing.
    let gauss = (hamiltonian - Expr::rat(2, 1) * rho.clone()).simplified();
    checks.push(zero_check("gauss_consistency", &g, &[&gauss], mode)?);

    let time = g.chart().coord(0).to_string();
    let mut scaled: Vec<f64> = Vec::new();
    let mut positive = true;
    for &u in &[0.5f64, 1.0, 2.0, 10.0] {
        let mut b = Bindings::new();
        b.insert(time.clone(), u);
        let v: f64 = rho.eval(&b).map_err(|e| compute(e))?;
        positive &= v > 0.0;
        scaled.push(u * u * v);
    }
    checks.push(boolean_check(
        "energy_density_positive",
        positive,
        format!("u^2 * density values {scaled:?} at u in {{0.5, 1, 2, 10}}"),
    ));
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let spread = scaled
        .iter()
        .map(|v| (v - mean).abs() / mean.abs())
        .fold(0.0f64, f64::max);
    checks.push(bound_check(
        "energy_density_decay",
        spread,
        1e-9,
        "relative spread of u^2 * density over u in {0.5, 1, 2, 10}".into(),
    ));
    Ok(checks)
}

fn decay_checks(args: &MetricArgs) -> Result<Vec<Check>, CliError> {
    let params = kasner_params(args)?;
    let g = kasner(&params).map_err(|e| config(e.to_string()))?;
    let lowered = g.riemann_lowered().map_err(|e| compute(e))?;
    let time = g.chart().coord(0).to_string();
    let mut values: Vec<f64> = Vec::new();
    for &t in &[1.0f64, 10.0, 100.0] {
        let mut b = Bindings::new();
        b.insert(time.clone(), t);
        let norm = g.curvature_norm_with(&lowered, &b).map_err(|e| compute(e))?;
        values.push(t * t * norm);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = if mean.abs() > 0.0 {
        values
            .iter()
            .map(|v| (v - mean).abs() / mean.abs())
            .fold(0.0f64, f64::max)
    } else {
        0.0
    };
    Ok(vec![bound_check(
        "quadratic_decay",
        spread,
        1e-9,
        format!("relative spread of t^2 |Rm| over t in {{1, 10, 100}}; values {values:?}"),
    )])
}

fn cmd_verify(suite: &str, args: &MetricArgs, mode: Mode, out: &OutArgs) -> Result<i32, CliError> {
    let (default, allowed) = suite_metrics(suite)?;
    if let Some(metric) = &args.metric {
        if suite == "all" {
            return Err(config("suite \"all\" uses its own metrics; drop --metric"));
        }
        if !allowed.contains(&metric.as_str()) {
            return Err(config(format!(
                "suite {suite:?} verifies metric {default:?}, not {metric:?}"
            )));
        }
    }
    let checks = suite_checks(suite, args, mode)?;
    let all_pass = checks.iter().all(|c| c.pass);
    let mut map = envelope("verify");
    map.insert("suite".into(), Value::String(suite.into()));
    map.insert(
        "mode".into(),
        Value::String(
            match mode {
                Mode::Symbolic => "symbolic",
                Mode::Numeric => "numeric",
                Mode::Auto => "auto",
            }
            .into(),
        ),
    );
    map.insert(
        "checks".into(),
        Value::Array(checks.iter().map(|c| c.to_value()).collect()),
    );
    map.insert("pass".into(), Value::Bool(all_pass));
    write_or_print(out, &map)?;
    Ok(if all_pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

fn parse_times(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| config(format!("bad basepoint time {s:?}: {e}")))
        })
        .collect()
}

fn cmd_converge(args: &MetricArgs, ti: &str, grid: usize, out: &Path) -> Result<i32, CliError> {
    if let Some(metric) = &args.metric {
        if metric != "t2-model" {
            return Err(config(format!(
                "converge studies metric \"t2-model\", not {metric:?}"
            )));
        }
    }
    if grid < 2 {
        return Err(config(format!("--grid must be at least 2, got {grid}")));
    }
    let times = parse_times(ti)?;
    let params = t2_params(args)?;
    let g = t2_model(&params).map_err(|e| config(e.to_string()))?;
    let study = convergence_study(&g, &params, &times, 2, grid).map_err(|e| match e {
        RescalingError::BadTimes { .. } | RescalingError::SpanTooSmall { .. } => {
            config(e.to_string())
        }
        other => compute(other),
    })?;

    let base = out.with_extension("");
    let json_path = base.with_extension("json");
    let csv_path = base.with_extension("csv");
    let mut map = envelope("converge");
    map.insert("metric".into(), Value::String("t2-model".into()));
    map.insert(
        "params".into(),
        params_value(
            args,
            "t2-model",
        )?,
    );
    map.insert("study".into(), convergence_value(&study));
    crate::report::write_json(&json_path, &map)
        .map_err(|e| config(format!("cannot write {}: {e}", json_path.display())))?;
    std::fs::write(&csv_path, convergence_csv(&study))
        .map_err(|e| config(format!("cannot write {}: {e}", csv_path.display())))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: &MetricArgs, out: &OutArgs) -> Result<i32, CliError> {
    if let Some(metric) = &args.metric {
        if metric != "t2-limit" {
            return Err(config(format!(
                "report describes metric \"t2-limit\", not {metric:?}"
            )));
        }
    }
    let params = t2_params(args)?;
    let constraints = constraint_report(&params).map_err(|e| compute(e))?;
    let lefloch = lefloch_residual(&params).map_err(|e| compute(e))?;
    let g = t2_limit(&params).map_err(|e| compute(e))?;
    let trace = gw_trace_check(&g).map_err(|e| compute(e))?;

    let mut map = envelope("report");
    map.insert("metric".into(), Value::String("t2-limit".into()));
    map.insert("params".into(), params_value(args, "t2-limit")?);
    map.insert("constraints".into(), constraint_value(&constraints));
    map.insert("lefloch".into(), lefloch_value(&lefloch));
    map.insert("stress_energy".into(), gw_trace_value(&trace));
    write_or_print(out, &map)?;
    Ok(0)
}
