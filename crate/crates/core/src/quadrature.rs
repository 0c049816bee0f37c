//! Tensor-grid quadrature on the unit cube.
//!
//! Grids are uniform with `m` points per axis, endpoints included, stored in
//! row-major order with axis 0 varying slowest. All sums go through
//! [`pairwise_sum`] so results do not depend on how work was split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuadRule {
    #[default]
    Trapezoid,
    Simpson,
}

impl QuadRule {
    pub fn check_resolution(self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::InsufficientResolution { resolution: m, required: 2 });
        }
        if self == QuadRule::Simpson && (m < 3 || m.is_multiple_of(2)) {
            return Err(Error::InvalidArgument(format!(
                "simpson rule needs an odd number of points per axis, got {m}"
            )));
        }
        Ok(())
    }
}

/// Grid spacing for `m` points on [0, 1].
#[inline]
pub fn spacing(m: usize) -> f64 {
    1.0 / (m - 1) as f64
}

/// Node coordinate `i` of an `m`-point grid.
#[inline]
pub fn node(i: usize, m: usize) -> f64 {
    if i + 1 == m {
        1.0
    } else {
        i as f64 / (m - 1) as f64
    }
}

/// Locate `t` in the grid: returns the cell index `k` (0..m-1) and the
/// fractional position in that cell, so that `t = (k + frac) h`.
#[inline]
pub fn locate(t: f64, m: usize) -> (usize, f64) {
    let cells = (m - 1) as f64;
    let s = (t.clamp(0.0, 1.0)) * cells;
    let k = (s.floor() as usize).min(m - 2);
    (k, s - k as f64)
}

/// Full-interval weights of the composite rule.
pub fn axis_weights(m: usize, rule: QuadRule) -> Vec<f64> {
    let h = spacing(m);
    let mut w = vec![h; m];
    match rule {
        QuadRule::Trapezoid => {
            w[0] = 0.5 * h;
            w[m - 1] = 0.5 * h;
        }
        QuadRule::Simpson => {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = if i == 0 || i == m - 1 {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
        }
    }
    w
}

/// Weights for the integral over `[a, b]` of the piecewise-linear interpolant
/// (node-aligned interior handled by `rule`, partial cells exactly).
pub fn interval_weights(m: usize, rule: QuadRule, a: f64, b: f64) -> Vec<f64> {
    let h = spacing(m);
    let mut w = vec![0.0; m];
    if b <= a {
        return w;
    }
    let eps = 1e-12;
    let sa = a / h;
    let sb = b / h;
    let ia = if (sa - sa.round()).abs() < eps { sa.round() as usize } else { sa.ceil() as usize };
    let ib = if (sb - sb.round()).abs() < eps { sb.round() as usize } else { sb.floor() as usize };

    // Exact integral of the linear piece on cell k over fractional [u0, u1].
    let mut linear_piece = |k: usize, u0: f64, u1: f64| {
        let left = h * ((u1 - u0) - 0.5 * (u1 * u1 - u0 * u0));
        let right = h * 0.5 * (u1 * u1 - u0 * u0);
        w[k] += left;
        w[k + 1] += right;
    };

    if ia > ib {
        let (k, u0) = locate(a, m);
        let u1 = sb - k as f64;
        linear_piece(k, u0, u1.min(1.0));
        return w;
    }
    if ia > 0 && sa < ia as f64 {
        let k = ia - 1;
        linear_piece(k, sa - k as f64, 1.0);
    }
    if ib + 1 < m && sb > ib as f64 {
        let k = ib;
        linear_piece(k, 0.0, sb - k as f64);
    }
    let cells = ib - ia;
    if cells > 0 {
        match rule {
            QuadRule::Trapezoid => {
                for k in ia..ib {
                    w[k] += 0.5 * h;
                    w[k + 1] += 0.5 * h;
                }
            }
            QuadRule::Simpson => {
                let even_end = ia + cells - cells % 2;
                let mut k = ia;
                while k < even_end {
                    w[k] += h / 3.0;
                    w[k + 1] += 4.0 * h / 3.0;
                    w[k + 2] += h / 3.0;
                    k += 2;
                }
                if even_end < ib {
                    w[even_end] += 0.5 * h;
                    w[ib] += 0.5 * h;
                }
            }
        }
    }
    w
}

/// Sum by recursive halving. The result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Decompose a flat row-major index into per-axis indices.
pub fn unravel(mut flat: usize, m: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % m;
        flat /= m;
    }
}

/// Tensor-product evaluation grid used for divergence and loss integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub dim: usize,
    pub points_per_axis: usize,
    pub rule: QuadRule,
    weights: Vec<f64>,
}

impl EvalGrid {
    pub fn new(dim: usize, points_per_axis: usize, rule: QuadRule) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        rule.check_resolution(points_per_axis)?;
        Ok(Self { dim, points_per_axis, rule, weights: axis_weights(points_per_axis, rule) })
    }

    /// 129 points per axis up to d = 2, 33 for d = 3 and above.
    pub fn default_for(dim: usize) -> Self {
        let m = if dim <= 2 { 129 } else { 33 };
        Self::new(dim, m, QuadRule::Trapezoid).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates and quadrature weight of flat node `flat`.
    pub fn point(&self, flat: usize, coords: &mut [f64]) -> f64 {
        let m = self.points_per_axis;
        let mut idx = [0usize; 8];
        let idx = &mut idx[..self.dim];
        unravel(flat, m, idx);
        let mut w = 1.0;
        for (c, &i) in coords.iter_mut().zip(idx.iter()) {
            *c = node(i, m);
            w *= self.weights[i];
        }
        w
    }

    /// All node coordinates (flat, `len() * dim`) and weights.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut xs = vec![0.0; n * self.dim];
        let mut ws = vec![0.0; n];
        for i in 0..n {
            ws[i] = self.point(i, &mut xs[i * self.dim..(i + 1) * self.dim]);
        }
        (xs, ws)
    }
}
