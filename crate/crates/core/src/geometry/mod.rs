//! Coordinate tensor calculus on Lorentzian (and Riemannian) metrics:
//! Christoffel symbols, Riemann/Ricci/Einstein tensors, scalar curvature,
//! orthonormal frames and the frame curvature norm.
//!
//! Sign conventions: signature (-,+,...,+);
//! `R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma Gamma - Gamma Gamma`;
//! `Ric_bd = R^a_bad`; `G = Ric - R g / 2`.

pub mod numeric;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signature {
    /// (-,+,...,+); the first chart coordinate is the time coordinate.
    Lorentzian,
    /// All-plus; no distinguished coordinate.
    Riemannian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    Up,
    Down,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("chart needs at least 2 unique coordinates, got {0:?}")]
    BadChart(Vec<String>),
    #[error("metric components are not symmetric at ({0},{1})")]
    NotSymmetric(usize, usize),
    #[error("symbolically singular determinant")]
    Singular,
    #[error("metric does not have the declared signature at sample point {0:?}")]
    WrongSignature(Bindings),
    #[error("coordinate vector d/d{0} is not timelike at the evaluation point")]
    NotTimelike(String),
    #[error("degenerate frame: Gram-Schmidt hit a null direction at index {0}")]
    DegenerateFrame(usize),
    #[error("charts differ: {0:?} vs {1:?}")]
    ChartMismatch(Vec<String>, Vec<String>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Ordered coordinate names; for Lorentzian metrics the time coordinate
/// comes first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    coords: Vec<String>,
}

impl Chart {
    pub fn new(coords: &[&str]) -> Result<Chart, GeometryError> {
        let coords: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
        let mut seen = coords.clone();
        seen.sort();
        seen.dedup();
        if coords.len() < 2 || seen.len() != coords.len() {
            return Err(GeometryError::BadChart(coords));
        }
        Ok(Chart { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &str {
        &self.coords[i]
    }

    pub fn time_coord(&self) -> &str {
        &self.coords[0]
    }
}

/// Symmetric matrix of expressions on a chart, with parameter defaults for
/// numeric checks and per-coordinate sampling ranges.
#[derive(Clone, Debug)]
pub struct Metric {
    chart: Chart,
    signature: Signature,
    components: Vec<Vec<Expr>>,
    /// Numeric values for free parameters (names that are not coordinates).
    defaults: Bindings,
    /// Interior sampling ranges per coordinate.
    ranges: BTreeMap<String, (f64, f64)>,
}

impl Metric {
    pub fn new(
        chart: Chart,
        signature: Signature,
        components: Vec<Vec<Expr>>,
    ) -> Result<Metric, GeometryError> {
        let n = chart.dim();
        assert_eq!(components.len(), n, "component row count");
        let components: Vec<Vec<Expr>> = components
            .iter()
            .map(|row| {
                assert_eq!(row.len(), n, "component column count");
                row.iter().map(Expr::simplified).collect()
            })
            .collect();
        for a in 0..n {
            for b in (a + 1)..n {
                let diff = (components[a][b].clone() - components[b][a].clone()).simplified();
                if !diff.is_zero() {
                    return Err(GeometryError::NotSymmetric(a, b));
                }
            }
        }
        let ranges = chart
            .coords()
            .iter()
            .map(|c| (c.clone(), (0.5, 2.0)))
            .collect();
        Ok(Metric {
            chart,
            signature,
            components,
            defaults: Bindings::new(),
            ranges,
        })
    }

    pub fn with_defaults(mut self, defaults: Bindings) -> Metric {
        self.defaults = defaults;
        self
    }

    pub fn with_range(mut self, coord: &str, lo: f64, hi: f64) -> Metric {
        self.ranges.insert(coord.to_string(), (lo, hi));
        self
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn component(&self, a: usize, b: usize) -> &Expr {
        &self.components[a][b]
    }

    pub fn components(&self) -> &Vec<Vec<Expr>> {
        &self.components
    }

    pub fn defaults(&self) -> &Bindings {
        &self.defaults
    }

    pub fn ranges(&self) -> &BTreeMap<String, (f64, f64)> {
        &self.ranges
    }

    /// Parameter names: free variables that are not chart coordinates.
    pub fn parameters(&self) -> Vec<String> {
        let mut names = std::collections::BTreeSet::new();
        for row in &self.components {
            for c in row {
                names.extend(c.free_vars());
            }
        }
        names
            .into_iter()
            .filter(|n| !self.chart.coords().contains(n))
            .collect()
    }

    /// Merge a coordinate point with the stored parameter defaults.
    pub fn full_bindings(&self, point: &Bindings) -> Bindings {
        let mut b = self.defaults.clone();
        for (k, v) in point {
            b.insert(k.clone(), *v);
        }
        b
    }

    /// Evaluate the component matrix at a point (defaults supply parameters).
    pub fn eval_at(&self, point: &Bindings) -> Result<Vec<Vec<f64>>, EvalError> {
        let b = self.full_bindings(point);
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for a in 0..n {
            for c in 0..n {
                out[a][c] = self.components[a][c].eval(&b)?;
            }
        }
        Ok(out)
    }

    /// Deterministic interior sample points in the declared ranges.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Bindings> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.chart
                    .coords()
                    .iter()
                    .map(|c| {
                        let (lo, hi) = self.ranges.get(c).copied().unwrap_or((0.5, 2.0));
                        let span = hi - lo;
                        (c.clone(), lo + 0.1 * span + rng.gen::<f64>() * 0.8 * span)
                    })
                    .collect()
            })
            .collect()
    }

    /// Check the declared signature by leading-principal-minor signs at
    /// deterministic sample points.
    pub fn check_signature(&self, samples: usize) -> Result<(), GeometryError> {
        for point in self.sample_points(samples, SIGNATURE_SEED) {
            let m = self.eval_at(&point)?;
            if !signature_matches(&m, self.signature) {
                return Err(GeometryError::WrongSignature(point));
            }
        }
        Ok(())
    }

    /// Symbolic inverse via cofactors; components simplified.
    pub fn inverse(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let det = determinant(&self.components).simplified();
        if det.is_zero() {
            return Err(GeometryError::Singular);
        }
        let inv_det = det.powi(-1);
        let mut field = TensorField::zeros(self.chart.clone(), &[IndexKind::Up, IndexKind::Up]);
        for a in 0..n {
            for b in 0..n {
                let cof = cofactor(&self.components, b, a);
                let entry = (cof * inv_det.clone()).simplified();
                field.set(&[a, b], entry);
            }
        }
        Ok(field)
    }

    /// Christoffel symbols `Gamma^a_bc`, symmetric in the lower pair.
    pub fn christoffel(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let inv = self.inverse()?;
        // Precompute partials of the metric.
        let mut dg = vec![vec![vec![Expr::zero(); n]; n]; n];
        for c in 0..n {
            let v = self.chart.coord(c).to_string();
            for a in 0..n {
                for b in 0..n {
                    dg[c][a][b] = self.components[a][b].differentiate(&v);
                }
            }
        }
        let mut field = TensorField::zeros(
            self.chart.clone(),
            &[IndexKind::Up, IndexKind::Down, IndexKind::Down],
        );
        for a in 0..n {
            for b in 0..n {
                for c in b..n {
                    let mut terms = Vec::new();
                    for d in 0..n {
                        let bracket = Expr::Add(vec![
                            dg[b][d][c].clone(),
                            dg[c][d][b].clone(),
                            Expr::Neg(Box::new(dg[d][b][c].clone())),
                        ]);
                        terms.push(inv.get(&[a, d]).clone() * bracket);
                    }
                    let gamma =
                        (Expr::rat(1, 2) * Expr::Add(terms)).simplified();
                    field.set(&[a, b, c], gamma.clone());
                    field.set(&[a, c, b], gamma);
                }
            }
        }
        Ok(field)
    }

    /// Riemann tensor `R^a_bcd`.
    pub fn riemann(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let gamma = self.christoffel()?;
        let mut field = TensorField::zeros(
            self.chart.clone(),
            &[
                IndexKind::Up,
                IndexKind::Down,
                IndexKind::Down,
                IndexKind::Down,
            ],
        );
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    // Antisymmetry in (c,d): fill d > c and negate.
                    for d in (c + 1)..n {
                        let vc = self.chart.coord(c).to_string();
                        let vd = self.chart.coord(d).to_string();
                        let mut terms = vec![
                            gamma.get(&[a, d, b]).differentiate(&vc),
                            Expr::Neg(Box::new(gamma.get(&[a, c, b]).differentiate(&vd))),
                        ];
                        for e in 0..n {
                            terms.push(gamma.get(&[a, c, e]).clone() * gamma.get(&[e, d, b]).clone());
                            terms.push(Expr::Neg(Box::new(
                                gamma.get(&[a, d, e]).clone() * gamma.get(&[e, c, b]).clone(),
                            )));
                        }
                        let r = Expr::Add(terms).simplified();
                        field.set(&[a, b, d, c], Expr::Neg(Box::new(r.clone())).simplified());
                        field.set(&[a, b, c, d], r);
                    }
                }
            }
        }
        Ok(field)
    }

    /// Fully covariant Riemann tensor `R_abcd`.
    pub fn riemann_lowered(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let up = self.riemann()?;
        let mut field = TensorField::zeros(self.chart.clone(), &[IndexKind::Down; 4]);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut terms = Vec::new();
                        for e in 0..n {
                            terms.push(
                                self.components[a][e].clone() * up.get(&[e, b, c, d]).clone(),
                            );
                        }
                        field.set(&[a, b, c, d], Expr::Add(terms).simplified());
                    }
                }
            }
        }
        Ok(field)
    }

    /// Ricci tensor `Ric_bd = R^a_bad`.
    pub fn ricci(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let riem = self.riemann()?;
        let mut field = TensorField::zeros(self.chart.clone(), &[IndexKind::Down, IndexKind::Down]);
        for b in 0..n {
            for d in 0..n {
                let terms = (0..n).map(|a| riem.get(&[a, b, a, d]).clone()).collect();
                field.set(&[b, d], Expr::Add(terms).simplified());
            }
        }
        Ok(field)
    }

    /// Scalar curvature `R = g^bd Ric_bd`.
    pub fn scalar_curvature(&self) -> Result<Expr, GeometryError> {
        let n = self.dim();
        let inv = self.inverse()?;
        let ric = self.ricci()?;
        let mut terms = Vec::new();
        for b in 0..n {
            for d in 0..n {
                terms.push(inv.get(&[b, d]).clone() * ric.get(&[b, d]).clone());
            }
        }
        Ok(Expr::Add(terms).simplified())
    }

    /// Einstein tensor `G_ab = Ric_ab - R g_ab / 2`.
    pub fn einstein_tensor(&self) -> Result<TensorField, GeometryError> {
        let n = self.dim();
        let ric = self.ricci()?;
        let scalar = self.scalar_curvature()?;
        let mut field = TensorField::zeros(self.chart.clone(), &[IndexKind::Down, IndexKind::Down]);
        for a in 0..n {
            for b in 0..n {
                let e = (ric.get(&[a, b]).clone()
                    - Expr::rat(1, 2) * scalar.clone() * self.components[a][b].clone())
                .simplified();
                field.set(&[a, b], e);
            }
        }
        Ok(field)
    }

    /// Effective stress-energy `T = Ric - R g / 2` of a (possibly
    /// non-vacuum) metric; identical to the Einstein tensor.
    pub fn stress_energy(&self) -> Result<TensorField, GeometryError> {
        self.einstein_tensor()
    }

    /// Divergence of the Einstein tensor with raised indices,
    /// `div^b = nabla_a G^ab`; zero by the contracted Bianchi identity.
    pub fn einstein_divergence(&self) -> Result<Vec<Expr>, GeometryError> {
        let n = self.dim();
        let inv = self.inverse()?;
        let gamma = self.christoffel()?;
        let g_low = self.einstein_tensor()?;
        // Raise both indices.
        let mut g_up = vec![vec![Expr::zero(); n]; n];
        for a in 0..n {
            for b in 0..n {
                let mut terms = Vec::new();
                for c in 0..n {
                    for d in 0..n {
                        terms.push(
                            inv.get(&[a, c]).clone()
                                * inv.get(&[b, d]).clone()
                                * g_low.get(&[c, d]).clone(),
                        );
                    }
                }
                g_up[a][b] = Expr::Add(terms).simplified();
            }
        }
        let mut out = Vec::with_capacity(n);
        for b in 0..n {
            let mut terms = Vec::new();
            for a in 0..n {
                terms.push(g_up[a][b].differentiate(self.chart.coord(a)));
                for e in 0..n {
                    terms.push(gamma.get(&[a, a, e]).clone() * g_up[e][b].clone());
                    terms.push(gamma.get(&[b, a, e]).clone() * g_up[a][e].clone());
                }
            }
            out.push(Expr::Add(terms).simplified());
        }
        Ok(out)
    }

    /// Orthonormal frame with `e_0` along the time coordinate vector and the
    /// spatial legs built by Gram-Schmidt in chart order.
    pub fn coordinate_frame(&self) -> Result<Frame, GeometryError> {
        let order: Vec<usize> = (0..self.dim()).collect();
        self.orthonormal_frame(&order)
    }

    /// Orthonormal frame built by Gram-Schmidt on the coordinate vectors
    /// taken in the given order. `order` must be a permutation of the
    /// coordinate indices; for Lorentzian metrics it must start with 0 so
    /// the first leg is timelike. Frame legs keep the seed order, so
    /// `vector(alpha)` was seeded from coordinate `order[alpha]`.
    pub fn orthonormal_frame(&self, order: &[usize]) -> Result<Frame, GeometryError> {
        let n = self.dim();
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        assert!(
            sorted == (0..n).collect::<Vec<_>>(),
            "order must be a permutation of 0..{n}"
        );
        if self.signature == Signature::Lorentzian {
            assert_eq!(order[0], 0, "Lorentzian frames must start with the time leg");
        }
        let mut vectors: Vec<Vec<Expr>> = Vec::with_capacity(n);
        let mut signs: Vec<i64> = Vec::with_capacity(n);
        for (k, &seed) in order.iter().enumerate() {
            let mut v = vec![Expr::zero(); n];
            v[seed] = Expr::one();
            // Subtract projections onto the previous frame legs.
            for (i, e) in vectors.iter().enumerate() {
                let coef = self.ip(&v, e);
                let sign = Expr::int(signs[i]);
                for (a, comp) in v.iter_mut().enumerate() {
                    *comp = (comp.clone() - sign.clone() * coef.clone() * e[a].clone())
                        .simplified();
                }
            }
            let norm2 = self.ip(&v, &v);
            let expected_sign = if self.signature == Signature::Lorentzian && k == 0 {
                -1
            } else {
                1
            };
            if norm2.is_zero() {
                return Err(GeometryError::DegenerateFrame(k));
            }
            let scale = (Expr::int(expected_sign) * norm2)
                .simplified()
                .pow(Expr::rat(-1, 2));
            for comp in v.iter_mut() {
                *comp = (comp.clone() * scale.clone()).simplified();
            }
            vectors.push(v);
            signs.push(expected_sign);
        }
        Ok(Frame {
            chart: self.chart.clone(),
            vectors,
            seeds: order.to_vec(),
        })
    }

    /// Metric inner product of two coordinate-component vectors.
    fn ip(&self, u: &[Expr], v: &[Expr]) -> Expr {
        let n = self.dim();
        let mut terms = Vec::new();
        for a in 0..n {
            for b in 0..n {
                terms.push(u[a].clone() * v[b].clone() * self.components[a][b].clone());
            }
        }
        Expr::Add(terms).simplified()
    }

    /// Frame curvature norm `|Rm|` at a point: root-sum-of-squares of the
    /// orthonormal-frame Riemann components. Numeric.
    pub fn curvature_norm(&self, point: &Bindings) -> Result<f64, GeometryError> {
        let lowered = self.riemann_lowered()?;
        self.curvature_norm_with(&lowered, point)
    }

    /// Same as [`curvature_norm`], with the lowered Riemann tensor supplied
    /// by the caller (for loops over many points).
    pub fn curvature_norm_with(
        &self,
        lowered: &TensorField,
        point: &Bindings,
    ) -> Result<f64, GeometryError> {
        let n = self.dim();
        let b = self.full_bindings(point);
        let frame = self.numeric_frame(&b)?;
        let mut rl = vec![0.0; n * n * n * n];
        for a in 0..n {
            for bb in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        rl[((a * n + bb) * n + c) * n + d] =
                            lowered.get(&[a, bb, c, d]).eval(&b)?;
                    }
                }
            }
        }
        // Contract pairs of indices one at a time.
        let contract = |t: &[f64], e: &[Vec<f64>]| {
            let mut out = vec![0.0; n * n * n * n];
            for i in 0..n * n * n {
                for alpha in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += e[alpha][a] * t[i * n + a];
                    }
                    out[alpha * n * n * n + i] = acc;
                }
            }
            out
        };
        // Each pass contracts the last index and rotates it to the front, so
        // four passes contract all indices.
        let mut t = rl;
        for _ in 0..4 {
            t = contract(&t, &frame);
        }
        Ok(t.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Numeric orthonormal frame at a point (rows are frame vectors).
    pub fn numeric_frame(&self, bindings: &Bindings) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.dim();
        let g = {
            let mut m = vec![vec![0.0; n]; n];
            for a in 0..n {
                for b in 0..n {
                    m[a][b] = self.components[a][b].eval(bindings)?;
                }
            }
            m
        };
        let ip = |u: &[f64], v: &[f64]| {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += u[a] * g[a][b] * v[b];
                }
            }
            acc
        };
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut signs: Vec<f64> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            for (i, e) in frame.iter().enumerate() {
                let coef = signs[i] * ip(&v, e);
                for a in 0..n {
                    v[a] -= coef * e[a];
                }
            }
            let norm2 = ip(&v, &v);
            let lorentz_time = self.signature == Signature::Lorentzian && k == 0;
            if lorentz_time && norm2 >= 0.0 {
                return Err(GeometryError::NotTimelike(
                    self.chart.time_coord().to_string(),
                ));
            }
            let expected = if lorentz_time { -norm2 } else { norm2 };
            if expected <= 1e-300 {
                return Err(GeometryError::DegenerateFrame(k));
            }
            let inv_norm = expected.sqrt().recip();
            for comp in v.iter_mut() {
                *comp *= inv_norm;
            }
            frame.push(v);
            signs.push(if lorentz_time { -1.0 } else { 1.0 });
        }
        Ok(frame)
    }
}

/// Multi-index array of expressions with declared index valence.
#[derive(Clone, Debug)]
pub struct TensorField {
    chart: Chart,
    valence: Vec<IndexKind>,
    components: Vec<Expr>,
}

impl TensorField {
    pub fn zeros(chart: Chart, valence: &[IndexKind]) -> TensorField {
        let size = chart.dim().pow(valence.len() as u32);
        TensorField {
            chart,
            valence: valence.to_vec(),
            components: vec![Expr::zero(); size],
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn valence(&self) -> &[IndexKind] {
        &self.valence
    }

    pub fn rank(&self) -> usize {
        self.valence.len()
    }

    fn offset(&self, indices: &[usize]) -> usize {
        assert_eq!(indices.len(), self.valence.len(), "index count");
        let n = self.chart.dim();
        indices.iter().fold(0, |acc, &i| {
            assert!(i < n, "index out of range");
            acc * n + i
        })
    }

    pub fn get(&self, indices: &[usize]) -> &Expr {
        &self.components[self.offset(indices)]
    }

    pub fn set(&mut self, indices: &[usize], value: Expr) {
        let off = self.offset(indices);
        self.components[off] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Expr> {
        self.components.iter()
    }

    /// Maximum absolute value over all components at a point.
    pub fn max_abs_at(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        let mut max = 0.0f64;
        for c in &self.components {
            max = max.max(c.eval(bindings)?.abs());
        }
        Ok(max)
    }

    /// True if every component simplifies to literal zero.
    pub fn is_symbolically_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Indices of components that are not symbolically zero.
    pub fn nonzero_indices(&self) -> Vec<Vec<usize>> {
        let n = self.chart.dim();
        let rank = self.rank();
        let mut out = Vec::new();
        for (flat, c) in self.components.iter().enumerate() {
            if !c.is_zero() {
                let mut idx = vec![0; rank];
                let mut rem = flat;
                for slot in (0..rank).rev() {
                    idx[slot] = rem % n;
                    rem /= n;
                }
                out.push(idx);
            }
        }
        out
    }

    pub fn total_node_count(&self) -> usize {
        self.components.iter().map(Expr::node_count).sum()
    }
}

/// Orthonormal frame: rows are vector fields in coordinate components,
/// with `e_0` declared timelike for Lorentzian metrics.
#[derive(Clone, Debug)]
pub struct Frame {
    chart: Chart,
    vectors: Vec<Vec<Expr>>,
    /// `seeds[alpha]` is the coordinate index the leg `alpha` was seeded
    /// from during Gram-Schmidt.
    seeds: Vec<usize>,
}

impl Frame {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Coordinate name the frame leg was seeded from.
    pub fn label(&self, alpha: usize) -> &str {
        self.chart.coord(self.seeds[alpha])
    }

    pub fn vector(&self, alpha: usize) -> &[Expr] {
        &self.vectors[alpha]
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Contract a rank-2 covariant tensor with two frame legs, numerically.
    pub fn contract2_at(
        &self,
        tensor: &TensorField,
        alpha: usize,
        beta: usize,
        bindings: &Bindings,
    ) -> Result<f64, EvalError> {
        let n = self.dim();
        let mut acc = 0.0;
        for a in 0..n {
            let ea = self.vectors[alpha][a].eval(bindings)?;
            if ea == 0.0 {
                continue;
            }
            for b in 0..n {
                let eb = self.vectors[beta][b].eval(bindings)?;
                if eb == 0.0 {
                    continue;
                }
                acc += ea * eb * tensor.get(&[a, b]).eval(bindings)?;
            }
        }
        Ok(acc)
    }
}

/// Laplace-expansion determinant of a symbolic matrix (unsimplified).
pub(crate) fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::with_capacity(n);
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let sub = minor(m, 0, j);
        let mut term = m[0][j].clone() * determinant(&sub);
        if j % 2 == 1 {
            term = Expr::Neg(Box::new(term));
        }
        terms.push(term);
    }
    if terms.is_empty() {
        Expr::zero()
    } else {
        Expr::Add(terms)
    }
}

/// Signed cofactor `C_ij` of a symbolic matrix.
pub(crate) fn cofactor(m: &[Vec<Expr>], i: usize, j: usize) -> Expr {
    let sub = minor(m, i, j);
    let det = determinant(&sub);
    if (i + j) % 2 == 1 {
        Expr::Neg(Box::new(det))
    } else {
        det
    }
}

fn minor(m: &[Vec<Expr>], i: usize, j: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != i)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != j)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Signature test via signs of leading principal minors.
fn signature_matches(m: &[Vec<f64>], signature: Signature) -> bool {
    let n = m.len();
    for k in 1..=n {
        let sub: Vec<Vec<f64>> = (0..k).map(|i| m[i][..k].to_vec()).collect();
        let d = det_f64(&sub);
        let ok = match signature {
            // diag(-1, 1, ..., 1): every leading minor is negative.
            Signature::Lorentzian => d < 0.0,
            Signature::Riemannian => d > 0.0,
        };
        if !ok {
            return false;
        }
    }
    true
}

pub(crate) fn det_f64(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

const SIGNATURE_SEED: u64 = 0x5eed_0001;
