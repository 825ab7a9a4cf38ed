//! Finite-difference curvature from metric evaluations only.
//!
//! This is the independent numeric route used to cross-validate the
//! symbolic tensors: it never touches symbolic differentiation, only
//! pointwise evaluation of the metric components. Derivatives are
//! 4th-order centered stencils.

use crate::expr::Bindings;

use super::{GeometryError, Metric};

/// Relative step for the outer (metric) differences.
pub const DEFAULT_STEP: f64 = 1e-3;

pub struct FdCurvature<'a> {
    metric: &'a Metric,
    step: f64,
}

impl<'a> FdCurvature<'a> {
    pub fn new(metric: &'a Metric) -> FdCurvature<'a> {
        FdCurvature {
            metric,
            step: DEFAULT_STEP,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn step_for(&self, point: &Bindings, coord: &str) -> f64 {
        let x = point.get(coord).copied().unwrap_or(0.0);
        self.step * (1.0 + x.abs())
    }

    /// Metric components at a point (bindings must be complete).
    fn metric_at(&self, point: &Bindings) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                out[a][b] = self.metric.component(a, b).eval(point)?;
            }
        }
        Ok(out)
    }

    /// Christoffel symbols by 4th-order differencing of the metric.
    pub fn christoffel_at(
        &self,
        point: &Bindings,
    ) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
        let n = self.dim();
        let full = self.metric.full_bindings(point);
        let g = self.metric_at(&full)?;
        let inv = invert(&g).ok_or(GeometryError::Singular)?;
        // dg[c][a][b] = d g_ab / d x^c
        let mut dg = vec![vec![vec![0.0; n]; n]; n];
        for c in 0..n {
            let coord = self.metric.chart().coord(c).to_string();
            let h = self.step_for(&full, &coord);
            let mut stencil = Vec::with_capacity(4);
            for k in [-2.0, -1.0, 1.0, 2.0] {
                let mut p = full.clone();
                *p.get_mut(&coord).unwrap() += k * h;
                stencil.push(self.metric_at(&p)?);
            }
            for a in 0..n {
                for b in 0..n {
                    dg[c][a][b] = fourth_order(
                        stencil[0][a][b],
                        stencil[1][a][b],
                        stencil[2][a][b],
                        stencil[3][a][b],
                        h,
                    );
                }
            }
        }
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for d in 0..n {
                        acc += inv[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                    }
                    gamma[a][b][c] = 0.5 * acc;
                }
            }
        }
        Ok(gamma)
    }

    /// Riemann tensor `R^a_bcd` by differencing the FD Christoffels.
    pub fn riemann_at(
        &self,
        point: &Bindings,
    ) -> Result<Vec<Vec<Vec<Vec<f64>>>>, GeometryError> {
        let n = self.dim();
        let full = self.metric.full_bindings(point);
        let gamma = self.christoffel_at(&full)?;
        // dgamma[c][a][b][d] = d Gamma^a_bd / d x^c
        let mut dgamma = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for c in 0..n {
            let coord = self.metric.chart().coord(c).to_string();
            let h = self.step_for(&full, &coord);
            let mut stencil = Vec::with_capacity(4);
            for k in [-2.0, -1.0, 1.0, 2.0] {
                let mut p = full.clone();
                *p.get_mut(&coord).unwrap() += k * h;
                stencil.push(self.christoffel_at(&p)?);
            }
            for a in 0..n {
                for b in 0..n {
                    for d in 0..n {
                        dgamma[c][a][b][d] = fourth_order(
                            stencil[0][a][b][d],
                            stencil[1][a][b][d],
                            stencil[2][a][b][d],
                            stencil[3][a][b][d],
                            h,
                        );
                    }
                }
            }
        }
        let mut riem = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut acc = dgamma[c][a][d][b] - dgamma[d][a][c][b];
                        for e in 0..n {
                            acc += gamma[a][c][e] * gamma[e][d][b]
                                - gamma[a][d][e] * gamma[e][c][b];
                        }
                        riem[a][b][c][d] = acc;
                    }
                }
            }
        }
        Ok(riem)
    }
}

/// 4th-order centered first derivative from the stencil
/// `(f(-2h), f(-h), f(+h), f(+2h))`.
fn fourth_order(m2: f64, m1: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
}

/// Gauss-Jordan inverse.
pub fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut ext = row.clone();
            ext.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            ext
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(pivot, col);
        let p = a[col][col];
        for x in a[col].iter_mut() {
            *x /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col];
            if f == 0.0 {
                continue;
            }
            for k in 0..2 * n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}
