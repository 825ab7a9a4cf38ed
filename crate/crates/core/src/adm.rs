//! ADM decomposition and constraint checks: spatial metric, lapse, second
//! fundamental form, mean curvature, the Hamiltonian constraint residual,
//! the Gauss energy density, and the backreaction residual of the limit
//! metric.

use thiserror::Error;

use crate::catalog::{t2_limit, CatalogError, T2ModelParams};
use crate::expr::{Bindings, EvalError, Expr};
use crate::geometry::{Chart, GeometryError, Metric, Signature};

#[derive(Debug, Error)]
pub enum AdmError {
    #[error(
        "metric has a shift: g({time},{space}) != 0; \
         change coordinates to block form first"
    )]
    ShiftPresent { time: String, space: String },
    #[error("lapse is not real: g_tt >= 0 at {0:?}")]
    BadLapse(Bindings),
    #[error("spatial slice needs at least 2 coordinates")]
    SliceTooSmall,
    #[error(
        "Gauss consistency failed: slice energy density and frame G(e0,e0) \
         differ by {0} at a sample point"
    )]
    GaussMismatch(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// ADM data of a block-form metric `g = -L^2 dt^2 + h(t)`: spatial metric,
/// lapse, second fundamental form `K_ab = -(1/(2L)) d_t h_ab`, and mean
/// curvature `H = h^{ab} K_ab`.
///
/// The sign convention makes `H < 0` on expanding spacetimes (growing `h`).
#[derive(Clone, Debug)]
pub struct AdmSlice {
    /// The full spacetime metric the slice came from.
    metric: Metric,
    /// Spatial metric on the time slices, time as a parameter.
    spatial: Metric,
    lapse: Expr,
    second_form: Vec<Vec<Expr>>,
    mean_curvature: Expr,
}

impl AdmSlice {
    pub fn spacetime(&self) -> &Metric {
        &self.metric
    }

    /// Spatial metric as a Riemannian [`Metric`] on the spatial chart; the
    /// time coordinate appears as a parameter with a numeric default.
    pub fn spatial_metric(&self) -> &Metric {
        &self.spatial
    }

    pub fn lapse(&self) -> &Expr {
        &self.lapse
    }

    pub fn second_form(&self) -> &Vec<Vec<Expr>> {
        &self.second_form
    }

    pub fn mean_curvature(&self) -> &Expr {
        &self.mean_curvature
    }
}

/// Read off the ADM data of a block-form metric.
pub fn adm_split(g: &Metric) -> Result<AdmSlice, AdmError> {
    let n = g.dim();
    let time = g.chart().time_coord().to_string();
    for k in 1..n {
        if !g.component(0, k).is_zero() {
            return Err(AdmError::ShiftPresent {
                time: time.clone(),
                space: g.chart().coord(k).to_string(),
            });
        }
    }
    if n < 3 {
        return Err(AdmError::SliceTooSmall);
    }
    // L = sqrt(-g_tt); check positivity of -g_tt at sample points.
    let neg_gtt = (Expr::int(-1) * g.component(0, 0).clone()).simplified();
    for point in g.sample_points(5, 0x5eed_00ad) {
        let b = g.full_bindings(&point);
        if neg_gtt.eval(&b)? <= 0.0 {
            return Err(AdmError::BadLapse(point));
        }
    }
    let lapse = neg_gtt.pow(Expr::rat(1, 2)).simplified();

    let spatial_names: Vec<&str> = g.chart().coords()[1..]
        .iter()
        .map(String::as_str)
        .collect();
    let chart = Chart::new(&spatial_names)?;
    let m = n - 1;
    let mut h = vec![vec![Expr::zero(); m]; m];
    let mut k_ab = vec![vec![Expr::zero(); m]; m];
    // K_ab = -(1/(2L)) d_t h_ab.
    let half_inv_lapse = (Expr::rat(-1, 2) * lapse.clone().powi(-1)).simplified();
    for a in 0..m {
        for b in 0..m {
            h[a][b] = g.component(a + 1, b + 1).clone();
            k_ab[a][b] =
                (half_inv_lapse.clone() * h[a][b].differentiate(&time)).simplified();
        }
    }

    // Defaults for the spatial metric: parent defaults plus a numeric time.
    let mut defaults = g.defaults().clone();
    let (lo, hi) = g.ranges().get(&time).copied().unwrap_or((0.5, 2.0));
    defaults.entry(time.clone()).or_insert(0.5 * (lo + hi));
    let mut spatial = Metric::new(chart, Signature::Riemannian, h)?.with_defaults(defaults);
    for (coord, (lo, hi)) in g.ranges() {
        if coord != &time {
            spatial = spatial.with_range(coord, *lo, *hi);
        }
    }

    // H = h^{ab} K_ab.
    let h_inv = spatial.inverse()?;
    let mut terms = Vec::new();
    for a in 0..m {
        for b in 0..m {
            terms.push(h_inv.get(&[a, b]).clone() * k_ab[a][b].clone());
        }
    }
    let mean_curvature = Expr::Add(terms).simplified();

    Ok(AdmSlice {
        metric: g.clone(),
        spatial,
        lapse,
        second_form: k_ab,
        mean_curvature,
    })
}

/// Hamiltonian constraint residual `R_h - |K|^2 + H^2`, zero for vacuum.
pub fn hamiltonian_residual(s: &AdmSlice) -> Result<Expr, AdmError> {
    let r_h = s.spatial.scalar_curvature()?;
    let k2 = second_form_norm_squared(s)?;
    let h2 = s.mean_curvature.clone().powi(2);
    Ok((r_h - k2 + h2).simplified())
}

/// `|K|^2 = h^{ac} h^{bd} K_ab K_cd`.
fn second_form_norm_squared(s: &AdmSlice) -> Result<Expr, AdmError> {
    let m = s.spatial.dim();
    let h_inv = s.spatial.inverse()?;
    let mut terms = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    terms.push(
                        h_inv.get(&[a, c]).clone()
                            * h_inv.get(&[b, d]).clone()
                            * s.second_form[a][b].clone()
                            * s.second_form[c][d].clone(),
                    );
                }
            }
        }
    }
    Ok(Expr::Add(terms).simplified())
}

/// Gauss energy density `(1/2)(R_h - |K|^2 + H^2)`, equal to the frame
/// component `G(e_0, e_0)` of the Einstein tensor. The identity is
/// cross-validated against the direct `G(d_t, d_t)/L^2` computation;
/// disagreement beyond 1e-9 at sample points is an error.
pub fn energy_density(s: &AdmSlice) -> Result<Expr, AdmError> {
    let density = (Expr::rat(1, 2) * hamiltonian_residual(s)?).simplified();
    // Direct route: G(e_0, e_0) with e_0 = L^{-1} d_t.
    let einstein = s.metric.einstein_tensor()?;
    let frame_value = (einstein.get(&[0, 0]).clone() * s.lapse.clone().powi(-2)).simplified();
    let diff = (density.clone() - frame_value.clone()).simplified();
    if !diff.is_zero() {
        for point in s.metric.sample_points(5, 0x5eed_00ae) {
            let b = s.metric.full_bindings(&point);
            let d = diff.eval(&b)?.abs();
            let scale = 1.0 + density.eval(&b)?.abs();
            if d > 1e-9 * scale {
                return Err(AdmError::GaussMismatch(d));
            }
        }
    }
    Ok(density)
}

/// The backreaction constraint residual of the limit metric, from the
/// hat-coefficients `e^{2 etahat} = K^-2 Rhat^2`, `Uhat = CU`,
/// `ahat^-1 = (2/sqrt 5) Cinf^{1/2} Rhat^{1/2}`:
///
/// ```text
/// lhs = etahat_Rhat + (K^2 / (4 Rhat^3)) e^{2 etahat}
///     - ahat Rhat (ahat^-1 Uhat_Rhat^2 + ahat Uhat_thetahat^2)
/// ```
///
/// For a vacuum solution the constraint would equal zero's analogue; here
/// it evaluates to `5/(4 Rhat)` instead.
#[derive(Clone, Debug)]
pub struct LeflochResidual {
    /// The left-hand side as an expression in `Rhat` (and any symbolic
    /// constants).
    pub lhs: Expr,
    /// `lhs - 5/(4 Rhat)`; identically zero for the limit coefficients.
    pub difference: Expr,
    /// Computed ratio `G_RhatRhat / lhs` of the limit metric's Einstein
    /// component to the residual; reported, not asserted.
    pub proportionality: Expr,
}

pub fn lefloch_residual(params: &T2ModelParams) -> Result<LeflochResidual, AdmError> {
    let rhat = Expr::var("Rhat");
    let e2eta = (params.twist.clone().powi(-2) * rhat.clone().powi(2)).simplified();
    let etahat = (Expr::rat(1, 2) * Expr::log(e2eta.clone())).simplified();
    let eta_r = etahat.differentiate("Rhat").simplified();
    let term2 = (params.twist.clone().powi(2)
        * Expr::rat(1, 4)
        * rhat.clone().powi(-3)
        * e2eta)
        .simplified();
    let ainv = (Expr::int(2)
        * Expr::int(5).pow(Expr::rat(-1, 2))
        * params.c_inf.clone().pow(Expr::rat(1, 2))
        * rhat.clone().pow(Expr::rat(1, 2)))
    .simplified();
    let uhat = params.c_u.clone();
    let u_r = uhat.differentiate("Rhat");
    let u_th = uhat.differentiate("thetahat");
    let term3 = (ainv.clone().powi(-1)
        * rhat.clone()
        * (ainv.clone() * u_r.powi(2) + ainv.powi(-1) * u_th.powi(2)))
    .simplified();
    let lhs = (eta_r + term2 - term3).simplified();
    let difference = (lhs.clone() - Expr::rat(5, 4) * rhat.clone().powi(-1)).simplified();

    let g_inf = t2_limit(params)?;
    let einstein = g_inf.einstein_tensor()?;
    let proportionality =
        (einstein.get(&[0, 0]).clone() * lhs.clone().powi(-1)).simplified();
    Ok(LeflochResidual {
        lhs,
        difference,
        proportionality,
    })
}

/// Effective stress-energy diagnostics of a metric: the trace `g^{ab} T_ab`,
/// the scalar curvature, and the nonzero orthonormal-frame components of
/// `T = Ric - (1/2) R g`.
///
/// The frame seeds the time leg first and then the spatial coordinates in
/// reverse chart order; for the metric families here (cross terms of the
/// form `dtheta (dy + ...)`) this yields the frame dual to the natural
/// coframe, so the component support is coordinate-meaningful.
#[derive(Clone, Debug)]
pub struct GwTraceReport {
    /// `g^{ab} T_ab`, simplified.
    pub trace: Expr,
    /// Scalar curvature, simplified.
    pub scalar: Expr,
    /// Nonzero frame components as (label_a, label_b, expression), labels
    /// being the seed coordinates of the frame legs.
    pub frame_components: Vec<(String, String, Expr)>,
}

pub fn gw_trace_check(g: &Metric) -> Result<GwTraceReport, AdmError> {
    let n = g.dim();
    let t = g.stress_energy()?;
    let inv = g.inverse()?;
    let mut terms = Vec::new();
    for a in 0..n {
        for b in 0..n {
            terms.push(inv.get(&[a, b]).clone() * t.get(&[a, b]).clone());
        }
    }
    let trace = Expr::Add(terms).simplified();
    let scalar = g.scalar_curvature()?;

    let order: Vec<usize> = std::iter::once(0).chain((1..n).rev()).collect();
    let frame = g.orthonormal_frame(&order)?;
    let mut frame_components = Vec::new();
    for alpha in 0..n {
        for beta in alpha..n {
            let mut terms = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    terms.push(
                        frame.vector(alpha)[a].clone()
                            * frame.vector(beta)[b].clone()
                            * t.get(&[a, b]).clone(),
                    );
                }
            }
            let value = Expr::Add(terms).simplified();
            if !value.is_zero() {
                frame_components.push((
                    frame.label(alpha).to_string(),
                    frame.label(beta).to_string(),
                    value,
                ));
            }
        }
    }
    Ok(GwTraceReport {
        trace,
        scalar,
        frame_components,
    })
}

/// How a residual was verified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Simplified to literal zero.
    SymbolicZero,
    /// Bounded numerically at sample points.
    NumericBounded,
}

/// One checked residual.
#[derive(Clone, Debug)]
pub struct ResidualEntry {
    pub name: String,
    pub mode: VerifyMode,
    /// Residual expression, printed.
    pub expr: String,
    /// Maximum absolute value over the sample points (0 for symbolic zeros).
    pub max_abs: f64,
}

/// Constraint residuals of a metric: Hamiltonian, backreaction, and energy
/// density, each tagged with how it was verified.
#[derive(Clone, Debug)]
pub struct ConstraintReport {
    pub entries: Vec<ResidualEntry>,
}

/// Sample-point seed for residual bounds.
const RESIDUAL_SEED: u64 = 0x5eed_00af;

/// Build the constraint report for the limit metric family.
pub fn constraint_report(params: &T2ModelParams) -> Result<ConstraintReport, AdmError> {
    let g = crate::catalog::t2_limit_u(params)?;
    let slice = adm_split(&g)?;
    let mut entries = Vec::new();

    let hamiltonian = hamiltonian_residual(&slice)?;
    entries.push(entry("hamiltonian", &g, &hamiltonian)?);

    let lefloch = lefloch_residual(params)?;
    let sample = t2_limit(params)?;
    entries.push(entry("lefloch_difference", &sample, &lefloch.difference)?);

    let density = energy_density(&slice)?;
    entries.push(entry("energy_density", &g, &density)?);

    Ok(ConstraintReport { entries })
}

fn entry(name: &str, g: &Metric, residual: &Expr) -> Result<ResidualEntry, AdmError> {
    let (mode, max_abs) = if residual.is_zero() {
        (VerifyMode::SymbolicZero, 0.0)
    } else {
        let mut max = 0.0f64;
        for point in g.sample_points(5, RESIDUAL_SEED) {
            let b = g.full_bindings(&point);
            max = max.max(residual.eval(&b)?.abs());
        }
        (VerifyMode::NumericBounded, max)
    };
    Ok(ResidualEntry {
        name: name.to_string(),
        mode,
        expr: residual.to_string(),
        max_abs,
    })
}

#[cfg(test)]
mod tests {
    use num::BigRational;

    use super::*;
    use crate::catalog::{kasner, kasner_unchecked, minkowski, t2_limit_u, KasnerParams};
    use crate::expr::parse;

    fn kasner_233() -> Metric {
        kasner(&KasnerParams::from_pairs(&[(2, 3), (2, 3), (-1, 3)]).unwrap()).unwrap()
    }

    fn pt(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn kasner_split_components() {
        let s = adm_split(&kasner_233()).unwrap();
        assert_eq!(*s.lapse(), Expr::rat(1, 3));
        // K_kk = -3 p_k t^{2 p_k - 1}.
        assert_eq!(
            s.second_form()[0][0],
            parse("-2*t^(1/3)").unwrap().simplified()
        );
        assert_eq!(
            s.second_form()[2][2],
            parse("t^(-5/3)").unwrap().simplified()
        );
        assert_eq!(*s.mean_curvature(), parse("-3/t").unwrap().simplified());
    }

    #[test]
    fn kasner_hubble_time_relation() {
        // t = -n/H symbolically.
        let s = adm_split(&kasner_233()).unwrap();
        let t = (Expr::int(-3) * s.mean_curvature().clone().powi(-1)).simplified();
        assert_eq!(t, Expr::var("t"));
    }

    #[test]
    fn minkowski_split_is_static() {
        let s = adm_split(&minkowski(3).unwrap()).unwrap();
        assert_eq!(*s.lapse(), Expr::one());
        for row in s.second_form() {
            assert!(row.iter().all(Expr::is_zero));
        }
        assert!(s.mean_curvature().is_zero());
        assert!(hamiltonian_residual(&s).unwrap().is_zero());
        assert!(energy_density(&s).unwrap().is_zero());
    }

    #[test]
    fn shift_terms_are_rejected() {
        let chart = Chart::new(&["t", "x1", "x2", "x3"]).unwrap();
        let mut comps = vec![vec![Expr::zero(); 4]; 4];
        comps[0][0] = Expr::int(-1);
        comps[0][1] = Expr::rat(1, 10);
        comps[1][0] = Expr::rat(1, 10);
        for k in 1..4 {
            comps[k][k] = Expr::one();
        }
        let g = Metric::new(chart, Signature::Lorentzian, comps).unwrap();
        assert!(matches!(adm_split(&g), Err(AdmError::ShiftPresent { .. })));
    }

    #[test]
    fn kasner_hamiltonian_residual_vanishes() {
        let s = adm_split(&kasner_233()).unwrap();
        assert!(hamiltonian_residual(&s).unwrap().is_zero());
    }

    #[test]
    fn kasner_sphere_hamiltonian_property() {
        for u in [(1i64, 2i64), (3, 1), (-2, 5)] {
            let params =
                KasnerParams::from_sphere_parameter(BigRational::new(u.0.into(), u.1.into()))
                    .unwrap();
            let s = adm_split(&kasner(&params).unwrap()).unwrap();
            assert!(
                hamiltonian_residual(&s).unwrap().is_zero(),
                "residual nonzero at u = {u:?}"
            );
        }
    }

    #[test]
    fn off_sphere_hamiltonian_residual_nonzero() {
        let p = vec![
            BigRational::new(9.into(), 10.into()),
            BigRational::new(1.into(), 10.into()),
            BigRational::from_integer(0.into()),
        ];
        let s = adm_split(&kasner_unchecked(&p).unwrap()).unwrap();
        let residual = hamiltonian_residual(&s).unwrap();
        let v = residual.eval(&pt(&[("t", 1.0)])).unwrap();
        assert!(v.abs() > 1e-3, "residual {v}");
    }

    #[test]
    fn limit_energy_density_positive_and_scaling() {
        let g = t2_limit_u(&T2ModelParams::defaults()).unwrap();
        let s = adm_split(&g).unwrap();
        let density = energy_density(&s).unwrap();
        let at = |u: f64| density.eval(&pt(&[("u", u)])).unwrap();
        let reference = at(1.0);
        assert!(reference > 0.0);
        for u in [0.5, 1.0, 2.0, 10.0] {
            assert!(at(u) > 0.0, "density at u = {u}");
            let scaled = u * u * at(u);
            assert!(
                (scaled - reference).abs() <= 1e-9 * reference,
                "u^2 density not constant at u = {u}: {scaled} vs {reference}"
            );
        }
    }

    #[test]
    fn lefloch_residual_closed_form() {
        let res = lefloch_residual(&T2ModelParams::defaults()).unwrap();
        assert!(res.difference.is_zero(), "difference {}", res.difference);
        let lhs_at = |r: f64| res.lhs.eval(&pt(&[("Rhat", r)])).unwrap();
        assert!((lhs_at(1.0) - 1.25).abs() <= 1e-12);
        assert!((lhs_at(2.0) - 0.625).abs() <= 1e-12);
        assert!((lhs_at(0.5) - 2.5).abs() <= 1e-12);
    }

    #[test]
    fn lefloch_residual_symbolic_parameters() {
        let res = lefloch_residual(&T2ModelParams::symbolic()).unwrap();
        assert!(res.difference.is_zero(), "difference {}", res.difference);
    }

    #[test]
    fn gw_trace_check_limit_metric() {
        let g = crate::catalog::t2_limit(&T2ModelParams::defaults()).unwrap();
        let report = gw_trace_check(&g).unwrap();
        assert!(report.trace.is_zero(), "trace {}", report.trace);
        assert!(report.scalar.is_zero(), "scalar {}", report.scalar);
        let mut labels: Vec<(String, String)> = report
            .frame_components
            .iter()
            .map(|(a, b, _)| (a.clone(), b.clone()))
            .collect();
        labels.sort();
        assert_eq!(
            labels,
            vec![
                ("Rhat".to_string(), "Rhat".to_string()),
                ("thetahat".to_string(), "thetahat".to_string()),
            ]
        );
        // The two nonzero components are equal and positive.
        let b = pt(&[("Rhat", 1.3)]);
        let values: Vec<f64> = report
            .frame_components
            .iter()
            .map(|(_, _, e)| e.eval(&b).unwrap())
            .collect();
        assert!(values[0] > 0.0);
        assert!((values[0] - values[1]).abs() <= 1e-10 * values[0]);
    }

    #[test]
    fn gw_trace_check_vacuum_metric() {
        let report = gw_trace_check(&kasner_233()).unwrap();
        assert!(report.trace.is_zero());
        assert!(report.scalar.is_zero());
        assert!(report.frame_components.is_empty());
    }

    #[test]
    fn gw_trace_check_detects_broken_limit() {
        // The limit metric with Hhat forced to zero is not trace-free.
        let params = T2ModelParams::defaults();
        let g = t2_limit(&params).unwrap();
        let chart = g.chart().clone();
        let mut comps = g.components().clone();
        comps[1][3] = Expr::zero();
        comps[3][1] = Expr::zero();
        // Drop the H^2 part of g_thth as well: keep only e^{2(eta-U)} a^-2.
        comps[1][1] = parse("(4/5)*(5/4)*Rhat^3").unwrap().simplified();
        let broken = Metric::new(chart, Signature::Lorentzian, comps).unwrap();
        let report = gw_trace_check(&broken).unwrap();
        let v = report.trace.eval(&pt(&[("Rhat", 1.0)])).unwrap();
        assert!(v.abs() > 1e-6, "trace {v}");
    }

    #[test]
    fn constraint_report_modes() {
        let report = constraint_report(&T2ModelParams::defaults()).unwrap();
        let by_name = |n: &str| {
            report
                .entries
                .iter()
                .find(|e| e.name == n)
                .unwrap_or_else(|| panic!("missing entry {n}"))
        };
        assert_eq!(by_name("lefloch_difference").mode, VerifyMode::SymbolicZero);
        let density = by_name("energy_density");
        assert_eq!(density.mode, VerifyMode::NumericBounded);
        assert!(density.max_abs > 0.0);
    }
}
