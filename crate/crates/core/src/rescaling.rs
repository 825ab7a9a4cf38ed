//! Type-III and type-II rescaling machinery: comparison maps, exact
//! symbolic pullbacks, sup-norm distances on compact sets, convergence-rate
//! fits, and the leading-order proper-time estimate.

use num::BigRational;
use rayon::prelude::*;
use thiserror::Error;

use crate::catalog::{t2_limit_u, CatalogError, KasnerParams, T2ModelParams};
use crate::expr::{Bindings, EvalError, Expr};
use crate::geometry::{Chart, GeometryError, Metric};

#[derive(Debug, Error)]
pub enum RescalingError {
    #[error("charts differ: {0:?} vs {1:?}")]
    ChartMismatch(Vec<String>, Vec<String>),
    #[error("map must supply one expression per old coordinate ({expected}, got {got})")]
    BadMap { expected: usize, got: usize },
    #[error("symbolically singular Jacobian")]
    SingularJacobian,
    #[error("need at least {need} increasing basepoint times, got {got}")]
    BadTimes { need: usize, got: usize },
    #[error("basepoint times must span at least {0} decades")]
    SpanTooSmall(f64),
    #[error("curvature norm vanishes at the basepoint; type-II rescaling undefined")]
    FlatBasepoint,
    #[error("invalid integration range: need R >= R0 > 0, got R0 = {0}, R = {1}")]
    BadRange(f64, f64),
    #[error("theta profile primitive is not invertible (non-monotone)")]
    NonMonotoneProfile,
    #[error("rescaled curvature norm at the basepoint is {0}, expected 1")]
    BadNormalization(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Exact symbolic pullback `scale * J^T (g ∘ map) J`.
///
/// `map[c]` expresses old coordinate `c` of `g` in the new coordinates;
/// the Jacobian is obtained by differentiation, old components are composed
/// with the map, and the result lives on `new_chart`.
pub fn pullback(
    g: &Metric,
    new_chart: Chart,
    map: &[Expr],
    scale: &Expr,
) -> Result<Metric, RescalingError> {
    let n = g.dim();
    if map.len() != n {
        return Err(RescalingError::BadMap {
            expected: n,
            got: map.len(),
        });
    }
    assert_eq!(new_chart.dim(), n, "pullback must preserve dimension");
    // J[c][a] = d map^c / d new_a.
    let mut jac = vec![vec![Expr::zero(); n]; n];
    for c in 0..n {
        for a in 0..n {
            jac[c][a] = map[c].differentiate(new_chart.coord(a));
        }
    }
    let det = crate::geometry::determinant(&jac).simplified();
    if det.is_zero() {
        return Err(RescalingError::SingularJacobian);
    }
    // Substitute old coordinates by the map in each component.
    let substitution: Bindings<Expr> = g
        .chart()
        .coords()
        .iter()
        .cloned()
        .zip(map.iter().cloned())
        .collect();
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for a in 0..n {
        for b in a..n {
            let mut terms = Vec::new();
            for c in 0..n {
                for d in 0..n {
                    if jac[c][a].is_zero() || jac[d][b].is_zero() {
                        continue;
                    }
                    let g_cd = g.component(c, d);
                    if g_cd.is_zero() {
                        continue;
                    }
                    terms.push(
                        jac[c][a].clone() * jac[d][b].clone() * g_cd.substitute(&substitution),
                    );
                }
            }
            let sum = if terms.is_empty() {
                Expr::zero()
            } else {
                Expr::Add(terms)
            };
            let entry = (scale.clone() * sum).simplified();
            comps[a][b] = entry.clone();
            comps[b][a] = entry;
        }
    }
    Ok(Metric::new(new_chart, g.signature(), comps)?.with_defaults(g.defaults().clone()))
}

/// Evaluation region: per-coordinate intervals and a uniform grid
/// resolution (points per axis).
#[derive(Clone, Debug)]
pub struct Region {
    pub ranges: Vec<(String, f64, f64)>,
    pub points_per_axis: usize,
}

impl Region {
    /// The compact set `K_j = C_j x [-j, j]^{n-1}` of a rescaling kind:
    /// `C_j = [1/j, j]` for type III, `[-j, j]` for type II.
    pub fn compact_set(kind: RescalingKind, chart: &Chart, j: u32, points: usize) -> Region {
        let j = j.max(1) as f64;
        let ranges = chart
            .coords()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 && kind == RescalingKind::TypeIii {
                    (c.clone(), 1.0 / j, j)
                } else {
                    (c.clone(), -j, j)
                }
            })
            .collect();
        Region {
            ranges,
            points_per_axis: points,
        }
    }

    /// All grid nodes (row-major, deterministic order).
    pub fn nodes(&self) -> Vec<Bindings> {
        let m = self.points_per_axis.max(2);
        let axes: Vec<Vec<f64>> = self
            .ranges
            .iter()
            .map(|(_, lo, hi)| {
                (0..m)
                    .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
                    .collect()
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        (0..total)
            .map(|mut flat| {
                let mut b = Bindings::new();
                for (axis, (name, _, _)) in self.ranges.iter().enumerate().rev() {
                    let k = flat % axes[axis].len();
                    flat /= axes[axis].len();
                    b.insert(name.clone(), axes[axis][k]);
                }
                b
            })
            .collect()
    }
}

/// Max over grid nodes, max over component pairs, of `|g1_ab - g2_ab|`.
pub fn sup_distance(g1: &Metric, g2: &Metric, region: &Region) -> Result<f64, RescalingError> {
    if g1.chart() != g2.chart() {
        return Err(RescalingError::ChartMismatch(
            g1.chart().coords().to_vec(),
            g2.chart().coords().to_vec(),
        ));
    }
    let nodes = region.nodes();
    let n = g1.dim();
    let results: Result<Vec<f64>, EvalError> = nodes
        .par_iter()
        .map(|point| {
            let b1 = g1.full_bindings(point);
            let b2 = g2.full_bindings(point);
            let mut max = 0.0f64;
            for a in 0..n {
                for b in a..n {
                    let d = (g1.component(a, b).eval(&b1)? - g2.component(a, b).eval(&b2)?).abs();
                    max = max.max(d);
                }
            }
            Ok(max)
        })
        .collect();
    Ok(results?.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RescalingKind {
    TypeIii,
    TypeIi,
}

/// A family of comparison maps: basepoint times, scale factors, and the
/// per-coordinate maps from limit coordinates to original coordinates.
/// Map expressions use the parameter `ti` (and `ci` for type II scales).
#[derive(Clone, Debug)]
pub struct RescalingPlan {
    pub kind: RescalingKind,
    /// Basepoint times, increasing.
    pub t_list: Vec<f64>,
    /// Scale factors `c_i` (type III: `t_i^-2`; type II: `|Rm(p_i)|`).
    pub scales: Vec<f64>,
    /// Old coordinates in terms of the new chart plus parameters `ti`, `ci`.
    pub maps: Vec<Expr>,
    pub new_chart: Chart,
}

impl RescalingPlan {
    /// Concrete maps and scale for entry `i`, with `ti`, `ci` substituted
    /// exactly (binary rationals).
    pub fn maps_for(&self, i: usize) -> (Vec<Expr>, Expr) {
        let ti = Expr::Rational(BigRational::from_float(self.t_list[i]).expect("finite t_i"));
        let ci = Expr::Rational(BigRational::from_float(self.scales[i]).expect("finite c_i"));
        let mut sub = Bindings::<Expr>::new();
        sub.insert("ti".to_string(), ti);
        sub.insert("ci".to_string(), ci.clone());
        let maps = self
            .maps
            .iter()
            .map(|m| m.substitute(&sub).simplified())
            .collect();
        (maps, ci)
    }
}

/// Type-III plan for a Kasner metric: `sigma(u) = t_i u`,
/// `eta_k(y) = t_i^{1 - p_k} y^k`, `c_i = t_i^{-2}`.
pub fn kasner_type_iii_plan(
    params: &KasnerParams,
    t_list: &[f64],
) -> Result<RescalingPlan, RescalingError> {
    check_times(t_list, 1, 0.0)?;
    let n = params.dimension();
    let names: Vec<String> = std::iter::once("u".to_string())
        .chain((1..=n).map(|k| format!("y{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let new_chart = Chart::new(&refs)?;
    let ti = Expr::var("ti");
    let mut maps = vec![(ti.clone() * Expr::var("u")).simplified()];
    for (k, p) in params.exponents().iter().enumerate() {
        let e = BigRational::from_integer(1.into()) - p;
        maps.push((ti.clone().pow(Expr::Rational(e)) * Expr::var(&format!("y{}", k + 1))).simplified());
    }
    Ok(RescalingPlan {
        kind: RescalingKind::TypeIii,
        t_list: t_list.to_vec(),
        scales: t_list.iter().map(|t| t.powi(-2)).collect(),
        maps,
        new_chart,
    })
}

/// Type-III plan for the T2 model with constant `L` profile: the hat maps
/// `t = t_i u`, `theta = t_i^{1/4} thetahat / L`, `x = t_i xhat`,
/// `y = t_i^{1/2} yhat`, with `c_i = t_i^{-2}`.
///
/// For non-constant `L` the theta map has no symbolic inverse; use
/// [`convergence_study`], which inverts it numerically.
pub fn t2_type_iii_plan(
    params: &T2ModelParams,
    t_list: &[f64],
) -> Result<RescalingPlan, RescalingError> {
    check_times(t_list, 1, 0.0)?;
    assert!(
        params.constant_lprofile(),
        "symbolic plan requires a constant L profile"
    );
    let new_chart = Chart::new(&["u", "thetahat", "xhat", "yhat"])?;
    let ti = Expr::var("ti");
    let maps = vec![
        (ti.clone() * Expr::var("u")).simplified(),
        (ti.clone().pow(Expr::rat(1, 4)) * Expr::var("thetahat") * params.lprofile.clone().powi(-1))
            .simplified(),
        (ti.clone() * Expr::var("xhat")).simplified(),
        (ti.pow(Expr::rat(1, 2)) * Expr::var("yhat")).simplified(),
    ];
    Ok(RescalingPlan {
        kind: RescalingKind::TypeIii,
        t_list: t_list.to_vec(),
        scales: t_list.iter().map(|t| t.powi(-2)).collect(),
        maps,
        new_chart,
    })
}

/// Scale expression `ci` used by plans: type III stores `c_i = t_i^-2`.
fn scale_expr() -> Expr {
    Expr::var("ci")
}

fn check_times(t_list: &[f64], need: usize, decades: f64) -> Result<(), RescalingError> {
    if t_list.len() < need || t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RescalingError::BadTimes {
            need,
            got: t_list.len(),
        });
    }
    if decades > 0.0 {
        let span = (t_list[t_list.len() - 1] / t_list[0]).log10();
        if span < decades {
            return Err(RescalingError::SpanTooSmall(decades));
        }
    }
    Ok(())
}

/// One row of a convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub t_i: f64,
    pub j: u32,
    pub sup_distance: f64,
}

/// Sup distances per basepoint time with a log-log rate fit.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// OLS slope of log(distance) against log(t_i); `None` when every
    /// distance is zero (exact coincidence).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Standard error of the slope estimate.
    pub slope_stderr: Option<f64>,
    /// Per-point fit residuals (log scale), empty when no fit was made.
    pub residuals: Vec<f64>,
    pub grid_points_per_axis: usize,
    pub j: u32,
}

/// Distances below this are treated as exact coincidence in the rate fit.
const COINCIDENCE_FLOOR: f64 = 1e-13;

/// Measure `sup |t_i^-2 (phi_i^* g) - g_inf|` on `K_j` for each `t_i` and
/// fit the decay rate.
///
/// `g` is the model metric on `(t, theta, x, y)` (possibly perturbed);
/// the comparison maps are the hat maps of the type-III plan. The theta
/// map inverts `thetahat = t_i^{-1/4} integral(L)` by monotone
/// root-finding (tolerance 1e-12) with the primitive computed by adaptive
/// quadrature, so non-constant `L` profiles are supported.
pub fn convergence_study(
    g: &Metric,
    params: &T2ModelParams,
    t_list: &[f64],
    j: u32,
    grid_points_per_axis: usize,
) -> Result<ConvergenceReport, RescalingError> {
    check_times(t_list, 4, 4.0)?;
    let limit = t2_limit_u(params)?;
    let region = Region::compact_set(
        RescalingKind::TypeIii,
        limit.chart(),
        j,
        grid_points_per_axis,
    );
    let nodes = region.nodes();
    let theta_map = ThetaMap::new(params)?;

    // Distinct thetahat grid values; the theta inversion is cached per
    // (t_i, thetahat) since every other axis reuses it.
    let thetahat_values: Vec<f64> = {
        let mut vals: Vec<f64> = nodes.iter().map(|n| n["thetahat"]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    };

    let mut rows = Vec::with_capacity(t_list.len());
    for &t_i in t_list {
        let quarter = t_i.powf(0.25);
        let mut theta_cache: std::collections::BTreeMap<u64, (f64, f64)> =
            std::collections::BTreeMap::new();
        for &th in &thetahat_values {
            let theta = theta_map.invert(quarter * th)?;
            let mut b = params.bindings().clone();
            b.insert("theta".to_string(), theta);
            let l_theta = params.lprofile.eval(&b)?;
            theta_cache.insert(th.to_bits(), (theta, l_theta));
        }
        let distances: Result<Vec<f64>, RescalingError> = nodes
            .par_iter()
            .map(|node| pulled_deviation(g, &limit, &theta_cache, t_i, node))
            .collect();
        let sup = distances?.into_iter().fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            t_i,
            j,
            sup_distance: sup,
        });
    }

    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_distance > COINCIDENCE_FLOOR)
        .map(|r| (r.t_i.ln(), r.sup_distance.ln()))
        .collect();
    let (slope, intercept, slope_stderr, residuals) = if fit_points.len() >= 2 {
        let (s, b, se, res) = ols(&fit_points);
        (Some(s), Some(b), se, res)
    } else {
        (None, None, None, Vec::new())
    };
    Ok(ConvergenceReport {
        rows,
        slope,
        intercept,
        slope_stderr,
        residuals,
        grid_points_per_axis,
        j,
    })
}

/// Deviation of the numerically pulled-back metric from the limit at one
/// grid node of the `(u, thetahat, xhat, yhat)` chart.
fn pulled_deviation(
    g: &Metric,
    limit: &Metric,
    theta_cache: &std::collections::BTreeMap<u64, (f64, f64)>,
    t_i: f64,
    node: &Bindings,
) -> Result<f64, RescalingError> {
    let u = node["u"];
    let thetahat = node["thetahat"];
    let quarter = t_i.powf(0.25);
    let (theta, l_theta) = theta_cache[&thetahat.to_bits()];
    // Diagonal Jacobian of the hat maps.
    let jac = [t_i, quarter / l_theta, t_i, t_i.sqrt()];

    let mut old_point = g.full_bindings(node);
    old_point.insert("t".to_string(), t_i * u);
    old_point.insert("theta".to_string(), theta);
    old_point.insert("x".to_string(), t_i * node["xhat"]);
    old_point.insert("y".to_string(), t_i.sqrt() * node["yhat"]);

    let limit_point = limit.full_bindings(node);
    let scale = t_i.powi(-2);
    let mut max = 0.0f64;
    for a in 0..4 {
        for b in a..4 {
            let g_ab = g.component(a, b);
            let pulled = if g_ab.is_zero() {
                0.0
            } else {
                scale * jac[a] * jac[b] * g_ab.eval(&old_point)?
            };
            let lim = limit.component(a, b).eval(&limit_point)?;
            max = max.max((pulled - lim).abs());
        }
    }
    Ok(max)
}

/// Inversion of `Lambda(theta) = integral_0^theta L`, the primitive of the
/// theta profile. `L > 0` makes it strictly increasing.
struct ThetaMap {
    lprofile: Expr,
    bindings: Bindings,
    constant: Option<f64>,
}

impl ThetaMap {
    fn new(params: &T2ModelParams) -> Result<ThetaMap, RescalingError> {
        let constant = if params.constant_lprofile() {
            Some(params.lprofile.eval(params.bindings())?)
        } else {
            None
        };
        Ok(ThetaMap {
            lprofile: params.lprofile.clone(),
            bindings: params.bindings().clone(),
            constant,
        })
    }

    fn profile_at(&self, theta: f64) -> Result<f64, RescalingError> {
        let mut b = self.bindings.clone();
        b.insert("theta".to_string(), theta);
        Ok(self.lprofile.eval(&b)?)
    }

    /// `integral_a^b L`, adaptive quadrature.
    fn segment(&self, a: f64, b: f64) -> Result<f64, RescalingError> {
        let f = |x: f64| self.profile_at(x);
        adaptive_simpson(&f, a, b, 1e-12)
    }

    /// Solve `Lambda(theta) = target` to 1e-12. The running value of
    /// `Lambda` at the bracket foot is updated incrementally, so the total
    /// quadrature work stays proportional to the bracket length.
    fn invert(&self, target: f64) -> Result<f64, RescalingError> {
        if let Some(l) = self.constant {
            return Ok(target / l);
        }
        // Bracket the root: L > 0 makes Lambda strictly increasing.
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut lam_lo = 0.0f64;
        let mut lam_hi = 0.0f64;
        let mut guard = 0;
        if target >= 0.0 {
            hi = 1.0f64.max(target);
            lam_hi = self.segment(0.0, hi)?;
            while lam_hi < target {
                let next = hi * 2.0;
                lam_hi += self.segment(hi, next)?;
                hi = next;
                guard += 1;
                if guard > 80 {
                    return Err(RescalingError::NonMonotoneProfile);
                }
            }
        } else {
            lo = (-1.0f64).min(target);
            lam_lo = self.segment(0.0, lo)?;
            while lam_lo > target {
                let next = lo * 2.0;
                lam_lo += self.segment(lo, next)?;
                lo = next;
                guard += 1;
                if guard > 80 {
                    return Err(RescalingError::NonMonotoneProfile);
                }
            }
        }
        let _ = lam_hi;
        // Bisection to 1e-12, integrating only the half-intervals.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                return Ok(mid);
            }
            let lam_mid = lam_lo + self.segment(lo, mid)?;
            if lam_mid < target {
                lo = mid;
                lam_lo = lam_mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Ordinary least squares on (x, y): returns slope, intercept, slope
/// standard error, residuals.
fn ols(points: &[(f64, f64)]) -> (f64, f64, Option<f64>, Vec<f64>) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = points
        .iter()
        .map(|p| p.1 - (slope * p.0 + intercept))
        .collect();
    let stderr = if points.len() > 2 {
        let sse: f64 = residuals.iter().map(|r| r * r).sum();
        Some((sse / (n - 2.0) / sxx).sqrt())
    } else {
        None
    };
    (slope, intercept, stderr, residuals)
}

/// Type-II plan: `c_i = |Rm(p_i)|`, `sigma(u) = |Rm(p_i)|^{-1/2} u + t_i`,
/// spatial identity. Each basepoint is a full coordinate point; its time
/// coordinate supplies `t_i`. After construction the plan is validated:
/// the rescaled pulled-back metric has curvature norm 1 at `u = 0` (within
/// 1e-9).
pub fn type_ii_plan(g: &Metric, points: &[Bindings]) -> Result<RescalingPlan, RescalingError> {
    assert!(!points.is_empty(), "need at least one basepoint");
    let lowered = g.riemann_lowered()?;
    let time = g.chart().time_coord().to_string();
    let mut t_list = Vec::new();
    let mut scales = Vec::new();
    for p in points {
        let norm = g.curvature_norm_with(&lowered, p)?;
        if norm <= 0.0 {
            return Err(RescalingError::FlatBasepoint);
        }
        t_list.push(p[&time]);
        scales.push(norm);
    }

    let names: Vec<String> = std::iter::once("u".to_string())
        .chain(g.chart().coords()[1..].iter().cloned())
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let new_chart = Chart::new(&refs)?;
    let mut maps = vec![
        (scale_expr().pow(Expr::rat(-1, 2)) * Expr::var("u") + Expr::var("ti")).simplified(),
    ];
    for c in new_chart.coords()[1..].iter() {
        maps.push(Expr::var(c));
    }
    let plan = RescalingPlan {
        kind: RescalingKind::TypeIi,
        t_list,
        scales,
        maps,
        new_chart: new_chart.clone(),
    };

    // Normalization check at each basepoint: |Rm| of c_i phi_i^* g at u=0
    // must be 1.
    for (i, p) in points.iter().enumerate() {
        let (maps, ci) = plan.maps_for(i);
        let pulled = pullback(g, new_chart.clone(), &maps, &ci)?;
        let mut origin = p.clone();
        origin.remove(&time);
        origin.insert("u".to_string(), 0.0);
        let norm = pulled.curvature_norm(&origin)?;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(RescalingError::BadNormalization(norm));
        }
    }
    Ok(plan)
}

/// Leading-order proper-time estimate between the `R0` and `R` slices:
/// adaptive quadrature (relative tolerance 1e-10) of
/// `e^{<eta> - <U>} = (r / |K|) e^{-CU}`.
pub fn proper_time_estimate(
    params: &T2ModelParams,
    r0: f64,
    r: f64,
) -> Result<f64, RescalingError> {
    if !(r0 > 0.0 && r >= r0) {
        return Err(RescalingError::BadRange(r0, r));
    }
    if r == r0 {
        return Ok(0.0);
    }
    let b = params.bindings();
    let k = params.twist.eval(b)?.abs();
    let c_u = params.c_u.eval(b)?;
    let factor = (-c_u).exp() / k;
    let f = |x: f64| -> Result<f64, RescalingError> { Ok(factor * x) };
    adaptive_simpson(&f, r0, r, 1e-10)
}

/// Adaptive Simpson quadrature with relative tolerance.
fn adaptive_simpson<E>(
    f: &dyn Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, E> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<E>(
        f: &dyn Fn(f64) -> Result<f64, E>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, E> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol * (1.0 + (left + right).abs()) {
            return Ok(left + right + delta / 15.0);
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, rel_tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Signature;
    use crate::catalog::{kasner, minkowski, t2_model};
    use crate::expr::parse;

    fn pt(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn kasner_233_params() -> KasnerParams {
        KasnerParams::from_pairs(&[(2, 3), (2, 3), (-1, 3)]).unwrap()
    }

    #[test]
    fn identity_pullback_is_identity() {
        let g = kasner(&kasner_233_params()).unwrap();
        let map: Vec<Expr> = g.chart().coords().iter().map(|c| Expr::var(c)).collect();
        let pulled = pullback(&g, g.chart().clone(), &map, &Expr::one()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(pulled.component(a, b), g.component(a, b));
            }
        }
    }

    #[test]
    fn kasner_pullback_reproduces_kasner_symbolically() {
        // sigma(u) = ti u, eta_k(y) = ti^{1-p_k} y^k, scale ti^-2, with ti
        // symbolic: the result is the Kasner metric in u, exactly.
        let params = kasner_233_params();
        let g = kasner(&params).unwrap();
        let plan = kasner_type_iii_plan(&params, &[10.0]).unwrap();
        let scale = Expr::var("ti").powi(-2);
        let pulled = pullback(&g, plan.new_chart.clone(), &plan.maps, &scale).unwrap();
        assert_eq!(*pulled.component(0, 0), Expr::rat(-1, 9));
        assert_eq!(
            *pulled.component(1, 1),
            parse("u^(4/3)").unwrap().simplified()
        );
        assert_eq!(
            *pulled.component(3, 3),
            parse("u^(-2/3)").unwrap().simplified()
        );
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert!(pulled.component(a, b).is_zero());
            }
        }
    }

    #[test]
    fn singular_map_is_rejected() {
        let g = minkowski(3).unwrap();
        let map = vec![Expr::var("t"), Expr::var("x1"), Expr::var("x1"), Expr::var("x3")];
        // x2 never appears: the Jacobian has a zero column.
        let chart = g.chart().clone();
        assert!(matches!(
            pullback(&g, chart, &map, &Expr::one()),
            Err(RescalingError::SingularJacobian)
        ));
    }

    #[test]
    fn scale_commutes_with_pullback() {
        let g = kasner(&kasner_233_params()).unwrap();
        let plan = kasner_type_iii_plan(&kasner_233_params(), &[100.0]).unwrap();
        let (maps, _) = plan.maps_for(0);
        let c = Expr::rat(1, 10000);
        let scaled = pullback(&g, plan.new_chart.clone(), &maps, &c).unwrap();
        let unscaled = pullback(&g, plan.new_chart.clone(), &maps, &Expr::one()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let want = (c.clone() * unscaled.component(a, b).clone()).simplified();
                assert_eq!(*scaled.component(a, b), want);
            }
        }
    }

    #[test]
    fn pullback_functoriality_affine() {
        // Pulling back along u -> 2u + 1 then u -> 3u equals pulling back
        // along the composition u -> 6u + 1, symbolically.
        let g = kasner(&kasner_233_params()).unwrap();
        let chart = |t: &str| {
            let names: Vec<String> = std::iter::once(t.to_string())
                .chain((1..=3).map(|k| format!("x{k}")))
                .collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            Chart::new(&refs).unwrap()
        };
        let spatial: Vec<Expr> = (1..=3).map(|k| Expr::var(&format!("x{k}"))).collect();
        let mut map1 = vec![parse("2*t + 1").unwrap()];
        map1.extend(spatial.clone());
        let mut map2 = vec![parse("3*t").unwrap()];
        map2.extend(spatial.clone());
        let mut composed = vec![parse("6*t + 1").unwrap()];
        composed.extend(spatial);

        let step1 = pullback(&g, chart("t"), &map1, &Expr::one()).unwrap();
        let step2 = pullback(&step1, chart("t"), &map2, &Expr::one()).unwrap();
        let direct = pullback(&g, chart("t"), &composed, &Expr::one()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let diff = (step2.component(a, b).clone() - direct.component(a, b).clone())
                    .simplified();
                assert!(diff.is_zero(), "mismatch at ({a},{b}): {diff}");
            }
        }
    }

    #[test]
    fn sup_distance_basics() {
        let g = minkowski(3).unwrap();
        let region = Region {
            ranges: g
                .chart()
                .coords()
                .iter()
                .map(|c| (c.clone(), 0.0, 1.0))
                .collect(),
            points_per_axis: 3,
        };
        assert_eq!(sup_distance(&g, &g, &region).unwrap(), 0.0);

        let doubled = {
            let comps: Vec<Vec<Expr>> = g
                .components()
                .iter()
                .map(|row| row.iter().map(|e| (Expr::int(2) * e.clone()).simplified()).collect())
                .collect();
            Metric::new(g.chart().clone(), Signature::Lorentzian, comps).unwrap()
        };
        assert_eq!(sup_distance(&g, &doubled, &region).unwrap(), 1.0);
    }

    #[test]
    fn sup_distance_is_a_pseudometric_on_grids() {
        let params = T2ModelParams::defaults();
        let a = t2_limit_u(&params).unwrap();
        let b = {
            let comps: Vec<Vec<Expr>> = a
                .components()
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| (Expr::rat(11, 10) * e.clone()).simplified())
                        .collect()
                })
                .collect();
            Metric::new(a.chart().clone(), Signature::Lorentzian, comps).unwrap()
        };
        let c = {
            let comps: Vec<Vec<Expr>> = a
                .components()
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| (Expr::rat(4, 5) * e.clone()).simplified())
                        .collect()
                })
                .collect();
            Metric::new(a.chart().clone(), Signature::Lorentzian, comps).unwrap()
        };
        let region = Region::compact_set(RescalingKind::TypeIii, a.chart(), 2, 4);
        let dab = sup_distance(&a, &b, &region).unwrap();
        let dba = sup_distance(&b, &a, &region).unwrap();
        let dac = sup_distance(&a, &c, &region).unwrap();
        let dbc = sup_distance(&b, &c, &region).unwrap();
        assert_eq!(dab, dba);
        assert!(dbc <= dab + dac + 1e-15);
    }

    #[test]
    fn chart_mismatch_is_rejected() {
        let g1 = minkowski(3).unwrap();
        let g2 = t2_limit_u(&T2ModelParams::defaults()).unwrap();
        let region = Region::compact_set(RescalingKind::TypeIii, g1.chart(), 1, 2);
        assert!(matches!(
            sup_distance(&g1, &g2, &region),
            Err(RescalingError::ChartMismatch(..))
        ));
    }

    #[test]
    fn convergence_study_polarized_model_coincides() {
        // G = 0, L = 1: the rescaled model equals the limit exactly.
        let params = T2ModelParams::defaults();
        let g = t2_model(&params).unwrap();
        let report =
            convergence_study(&g, &params, &[1e2, 1e4, 1e6, 1e8], 2, 4).unwrap();
        for row in &report.rows {
            assert!(
                row.sup_distance <= 1e-13,
                "distance {} at t_i = {}",
                row.sup_distance,
                row.t_i
            );
        }
        assert!(report.slope.is_none());
    }

    #[test]
    fn convergence_study_cross_term_rate() {
        // G = cos(theta): the t_i^{-3/4} cross term dominates.
        let params = T2ModelParams::defaults()
            .with_gprofile(parse("cos(theta)").unwrap())
            .unwrap();
        let g = t2_model(&params).unwrap();
        let report =
            convergence_study(&g, &params, &[1e2, 1e4, 1e6, 1e8], 2, 5).unwrap();
        let slope = report.slope.expect("nonzero distances");
        assert!((slope + 0.75).abs() <= 0.05, "slope {slope}");
        // Distances decay monotonically.
        for w in report.rows.windows(2) {
            assert!(w[1].sup_distance < w[0].sup_distance);
        }
    }

    #[test]
    fn convergence_study_nonconstant_lprofile() {
        // The numeric theta inversion path: L = 1 + 0.1 sin^2(theta).
        let params = T2ModelParams::alternate();
        let g = t2_model(&params).unwrap();
        let report =
            convergence_study(&g, &params, &[1e2, 1e4, 1e6, 1e8], 1, 3).unwrap();
        let slope = report.slope.expect("nonzero distances");
        assert!((slope + 0.75).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn convergence_study_needs_enough_times() {
        let params = T2ModelParams::defaults();
        let g = t2_model(&params).unwrap();
        assert!(matches!(
            convergence_study(&g, &params, &[1e2], 2, 3),
            Err(RescalingError::BadTimes { .. })
        ));
        assert!(matches!(
            convergence_study(&g, &params, &[1.0, 2.0, 3.0, 4.0], 2, 3),
            Err(RescalingError::SpanTooSmall(_))
        ));
    }

    #[test]
    fn type_ii_plan_normalizes_curvature() {
        let g = kasner(&kasner_233_params()).unwrap();
        let p = pt(&[("t", 10.0), ("x1", 0.0), ("x2", 0.0), ("x3", 0.0)]);
        let plan = type_ii_plan(&g, &[p]).unwrap();
        assert_eq!(plan.kind, RescalingKind::TypeIi);
        assert_eq!(plan.t_list, vec![10.0]);
        assert!(plan.scales[0] > 0.0);
    }

    #[test]
    fn type_ii_plan_rejects_flat_metrics() {
        let g = minkowski(3).unwrap();
        let p = pt(&[("t", 1.0), ("x1", 0.0), ("x2", 0.0), ("x3", 0.0)]);
        assert!(matches!(
            type_ii_plan(&g, &[p]),
            Err(RescalingError::FlatBasepoint)
        ));
    }

    #[test]
    fn type_ii_scale_halves_when_metric_doubles() {
        let g = kasner(&kasner_233_params()).unwrap();
        let doubled = {
            let comps: Vec<Vec<Expr>> = g
                .components()
                .iter()
                .map(|row| row.iter().map(|e| (Expr::int(2) * e.clone()).simplified()).collect())
                .collect();
            Metric::new(g.chart().clone(), Signature::Lorentzian, comps)
                .unwrap()
                .with_range("t", 0.5, 3.0)
        };
        let p = pt(&[("t", 2.0), ("x1", 0.0), ("x2", 0.0), ("x3", 0.0)]);
        let c1 = type_ii_plan(&g, &[p.clone()]).unwrap().scales[0];
        let c2 = type_ii_plan(&doubled, &[p]).unwrap().scales[0];
        assert!((c2 - 0.5 * c1).abs() <= 1e-12 * c1);
    }

    #[test]
    fn proper_time_matches_closed_form() {
        // K=1, CU=0: estimate(1, R) = (R^2 - 1)/2.
        let params = T2ModelParams::defaults();
        let r = 100.0;
        let est = proper_time_estimate(&params, 1.0, r).unwrap();
        let ratio = est / (r * r);
        assert!((ratio - 0.5).abs() / 0.5 <= 0.01, "ratio {ratio}");
        let r = 1e4;
        let est = proper_time_estimate(&params, 1.0, r).unwrap();
        let ratio = est / (r * r);
        assert!((ratio - 0.5).abs() / 0.5 <= 1e-4, "ratio {ratio}");
    }

    #[test]
    fn proper_time_edge_cases() {
        let params = T2ModelParams::defaults();
        assert_eq!(proper_time_estimate(&params, 2.0, 2.0).unwrap(), 0.0);
        assert!(matches!(
            proper_time_estimate(&params, -1.0, 2.0),
            Err(RescalingError::BadRange(..))
        ));
        // Doubling e^{CU} halves the estimate.
        let shifted = T2ModelParams::new(
            Expr::one(),
            parse("log(2.0)").unwrap(),
            Expr::rat(5, 4),
            Expr::one(),
            Expr::zero(),
            Bindings::new(),
        )
        .unwrap();
        let base = proper_time_estimate(&params, 1.0, 10.0).unwrap();
        let halved = proper_time_estimate(&shifted, 1.0, 10.0).unwrap();
        assert!((halved - 0.5 * base).abs() <= 1e-9 * base);
    }

    #[test]
    fn t2_plan_matches_eq_cross_term() {
        // Symbolic pullback of the model under the hat maps at finite t_i
        // shows the t_i^{-3/4} cross term in g_{xhat thetahat}.
        let params = T2ModelParams::defaults()
            .with_gprofile(parse("cos(theta)").unwrap())
            .unwrap();
        let g = t2_model(&params).unwrap();
        let plan = t2_type_iii_plan(&params, &[1e4]).unwrap();
        let scale = Expr::var("ti").powi(-2);
        let pulled = pullback(&g, plan.new_chart.clone(), &plan.maps, &scale).unwrap();
        // g_{xhat thetahat} = e^{2 CU} G L^-1 ti^{-3/4}; at defaults
        // = cos(ti^{1/4} thetahat) ti^{-3/4}.
        let b: Bindings = [
            ("ti".to_string(), 1e4),
            ("u".to_string(), 1.0),
            ("thetahat".to_string(), 0.3),
            ("xhat".to_string(), 0.0),
            ("yhat".to_string(), 0.0),
        ]
        .into_iter()
        .collect();
        let got = pulled.component(2, 1).eval(&b).unwrap();
        let want = (1e4f64.powf(0.25) * 0.3).cos() * 1e4f64.powf(-0.75);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}
