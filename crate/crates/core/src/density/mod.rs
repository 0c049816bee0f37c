//! Positive probability densities on the unit cube, stored on uniform tensor
//! grids and interpolated multilinearly between nodes.

pub mod families;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{axis_weights, interval_weights, locate, node, spacing, QuadRule};

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;

/// Anything that can be evaluated as a density on `[0,1]^d`.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Known lower and upper bounds over the whole cube, when available.
    fn bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Density sampled on an `m^d` grid (endpoints included).
///
/// Values are strictly positive; `kappa` caches the smallest one, which is
/// also the minimum of the multilinear interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    dim: usize,
    resolution: usize,
    values: Vec<f64>,
    kappa: f64,
    quad_rule: QuadRule,
}

/// On-disk schema of a density file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDensityFile {
    pub dim: usize,
    pub resolution: usize,
    pub values: Vec<f64>,
    #[serde(default)]
    pub quad_rule: QuadRule,
}

fn check_positive(values: &[f64]) -> Result<f64> {
    let mut kappa = f64::INFINITY;
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveDensity { index, value });
        }
        kappa = kappa.min(value);
    }
    Ok(kappa)
}

impl GridDensity {
    pub fn new(dim: usize, resolution: usize, values: Vec<f64>, quad_rule: QuadRule) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension must be in 1..={MAX_DIM}")));
        }
        quad_rule.check_resolution(resolution)?;
        let expected = resolution
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        let kappa = check_positive(&values)?;
        Ok(Self { dim, resolution, values, kappa, quad_rule })
    }

    /// Tabulate `f` on the grid. The result is not normalized.
    pub fn from_fn(
        dim: usize,
        resolution: usize,
        quad_rule: QuadRule,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let n = resolution.pow(dim as u32);
        let mut x = vec![0.0; dim];
        let mut idx = vec![0usize; dim];
        let values = (0..n)
            .map(|flat| {
                crate::quadrature::unravel(flat, resolution, &mut idx);
                for (xi, &i) in x.iter_mut().zip(&idx) {
                    *xi = node(i, resolution);
                }
                f(&x)
            })
            .collect();
        Self::new(dim, resolution, values, quad_rule)
    }

    pub fn uniform(dim: usize, resolution: usize) -> Result<Self> {
        Self::new(dim, resolution, vec![1.0; resolution.pow(dim as u32)], QuadRule::Trapezoid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MIN, f64::max)
    }
    pub fn quad_rule(&self) -> QuadRule {
        self.quad_rule
    }

    pub fn with_quad_rule(&self, rule: QuadRule) -> Result<Self> {
        rule.check_resolution(self.resolution)?;
        Ok(Self { quad_rule: rule, ..self.clone() })
    }

    pub fn to_file(&self) -> GridDensityFile {
        GridDensityFile {
            dim: self.dim,
            resolution: self.resolution,
            values: self.values.clone(),
            quad_rule: self.quad_rule,
        }
    }

    pub fn from_file(file: GridDensityFile) -> Result<Self> {
        Self::new(file.dim, file.resolution, file.values, file.quad_rule)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("density serializes")
    }

    /// Quadrature integral over the whole cube.
    pub fn total(&self) -> f64 {
        let w = axis_weights(self.resolution, self.quad_rule);
        let weights: Vec<&[f64]> = (0..self.dim).map(|_| w.as_slice()).collect();
        contract_all(&self.values, self.resolution, &weights)
    }

    /// Rescale so that the quadrature integral is 1.
    pub fn normalize(&self) -> Result<Self> {
        check_positive(&self.values)?;
        let total = self.total();
        let values: Vec<f64> = self.values.iter().map(|v| v / total).collect();
        Self::new(self.dim, self.resolution, values, self.quad_rule)
    }

    /// Integral over the axis-aligned box `[lo_i, hi_i]`.
    pub fn integrate(&self, bounds: &[(f64, f64)]) -> Result<f64> {
        if bounds.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bounds.len() });
        }
        const SLACK: f64 = 1e-12;
        let mut per_axis = Vec::with_capacity(self.dim);
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if lo < -SLACK || hi > 1.0 + SLACK || lo > hi || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::BoxOutOfDomain { axis, lo, hi });
            }
            let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
            per_axis.push(if lo == 0.0 && hi == 1.0 {
                axis_weights(self.resolution, self.quad_rule)
            } else {
                interval_weights(self.resolution, self.quad_rule, lo, hi)
            });
        }
        let weights: Vec<&[f64]> = per_axis.iter().map(|w| w.as_slice()).collect();
        Ok(contract_all(&self.values, self.resolution, &weights))
    }

    /// Density of the leading `keep` coordinates, obtained by quadrature over
    /// the trailing ones and renormalized.
    pub fn marginal(&self, keep: usize) -> Result<Self> {
        if keep == 0 || keep > self.dim {
            return Err(Error::InvalidArgument(format!(
                "marginal must keep 1..={} axes, got {keep}",
                self.dim
            )));
        }
        let values = self.marginal_values(keep, self.quad_rule);
        Self::new(keep, self.resolution, values, self.quad_rule)?.normalize()
    }

    /// Unnormalized marginal values on the `m^keep` grid.
    pub(crate) fn marginal_values(&self, keep: usize, rule: QuadRule) -> Vec<f64> {
        let w = axis_weights(self.resolution, rule);
        let mut vals = self.values.clone();
        for _ in keep..self.dim {
            vals = contract_last(&vals, self.resolution, &w);
        }
        vals
    }

    /// Conditional distribution function of axis `axis` (1-based) given the
    /// leading `axis - 1` coordinates.
    pub fn conditional_cdf(&self, axis: usize, context: &[f64]) -> Result<ConditionalCdf> {
        if axis == 0 || axis > self.dim {
            return Err(Error::InvalidArgument(format!("axis must be in 1..={}", self.dim)));
        }
        if context.len() != axis - 1 {
            return Err(Error::DimensionMismatch { expected: axis - 1, got: context.len() });
        }
        if context.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidArgument("context outside [0,1]".into()));
        }
        let m = self.resolution;
        // trapezoid keeps the CDF consistent with the multilinear interpolant
        let joint = if axis == self.dim {
            self.values.clone()
        } else {
            self.marginal_values(axis, QuadRule::Trapezoid)
        };
        let slice = interpolate_slice(&joint, m, context);
        ConditionalCdf::from_slice(axis, context.to_vec(), slice)
    }

    /// Wrapped-Gaussian smoothing, applied per axis on the periodic grid.
    ///
    /// The nodes at 0 and 1 are the same point on the circle; their values
    /// are averaged before convolving, which conserves trapezoid mass.
    pub fn mollify(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let m = self.resolution;
        let kernel = wrapped_gaussian_kernel(sigma, m);
        let mut vals = self.values.clone();
        let stride_of = |axis: usize| m.pow((self.dim - 1 - axis) as u32);
        let period = m - 1;
        let mut line = vec![0.0; period];
        let mut out_line = vec![0.0; period];
        for axis in 0..self.dim {
            let stride = stride_of(axis);
            let n = vals.len();
            for start in 0..n {
                // start must have axis index 0
                if (start / stride) % m != 0 {
                    continue;
                }
                for (r, slot) in line.iter_mut().enumerate() {
                    *slot = vals[start + r * stride];
                }
                line[0] = 0.5 * (vals[start] + vals[start + period * stride]);
                for (i, o) in out_line.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (r, &w) in kernel.iter().enumerate() {
                        if w != 0.0 {
                            acc += w * line[(i + period - r) % period];
                        }
                    }
                    *o = acc;
                }
                for (r, &o) in out_line.iter().enumerate() {
                    vals[start + r * stride] = o;
                }
                vals[start + period * stride] = out_line[0];
            }
        }
        Self::new(self.dim, m, vals, self.quad_rule)?.normalize()
    }

    /// Multilinear interpolation.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        multilinear(&self.values, self.resolution, x)
    }

    /// Per-axis permutation: new axis `i` is old axis `order[i]`.
    pub fn permute_axes(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.dim)?;
        let m = self.resolution;
        let n = self.values.len();
        let mut idx = vec![0usize; self.dim];
        let mut out = vec![0.0; n];
        for (flat, slot) in out.iter_mut().enumerate() {
            crate::quadrature::unravel(flat, m, &mut idx);
            let mut old = vec![0usize; self.dim];
            for (new_axis, &old_axis) in order.iter().enumerate() {
                old[old_axis] = idx[new_axis];
            }
            let src = old.iter().fold(0usize, |acc, &i| acc * m + i);
            *slot = self.values[src];
        }
        Self::new(self.dim, m, out, self.quad_rule)
    }
}

impl Density for GridDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.interpolate(x)
    }
    fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.kappa, self.max_value()))
    }
}

pub(crate) fn check_permutation(order: &[usize], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    if order.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: order.len() });
    }
    for &o in order {
        if o >= dim || seen[o] {
            return Err(Error::InvalidArgument(format!("{order:?} is not a permutation")));
        }
        seen[o] = true;
    }
    Ok(())
}

/// Contract the last axis of a row-major `m^k` tensor against `w`.
pub(crate) fn contract_last(vals: &[f64], m: usize, w: &[f64]) -> Vec<f64> {
    vals.chunks_exact(m)
        .map(|row| row.iter().zip(w).map(|(v, wi)| v * wi).sum())
        .collect()
}

/// Contract every axis; `weights[a]` applies to axis `a`.
pub(crate) fn contract_all(vals: &[f64], m: usize, weights: &[&[f64]]) -> f64 {
    let mut cur = vals.to_vec();
    for w in weights.iter().rev() {
        cur = contract_last(&cur, m, w);
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}

/// Multilinear interpolation of a row-major `m^k` tensor at `x` (length k).
pub(crate) fn multilinear(vals: &[f64], m: usize, x: &[f64]) -> f64 {
    let k = x.len();
    if k == 0 {
        return vals[0];
    }
    let mut cells = [0usize; 8];
    let mut fracs = [0.0f64; 8];
    for a in 0..k {
        let (c, u) = locate(x[a], m);
        cells[a] = c;
        fracs[a] = u;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << k) {
        let mut w = 1.0;
        let mut flat = 0usize;
        for a in 0..k {
            let bit = (corner >> (k - 1 - a)) & 1;
            w *= if bit == 1 { fracs[a] } else { 1.0 - fracs[a] };
            flat = flat * m + cells[a] + bit;
        }
        if w != 0.0 {
            acc += w * vals[flat];
        }
    }
    acc
}

/// Interpolate a `m^(k+1)` tensor over its first `k` axes at `context`,
/// returning the length-`m` slice along the last axis.
pub(crate) fn interpolate_slice(vals: &[f64], m: usize, context: &[f64]) -> Vec<f64> {
    let k = context.len();
    let mut out = vec![0.0; m];
    if k == 0 {
        out.copy_from_slice(&vals[..m]);
        return out;
    }
    let mut cells = vec![0usize; k];
    let mut fracs = vec![0.0; k];
    for a in 0..k {
        let (c, u) = locate(context[a], m);
        cells[a] = c;
        fracs[a] = u;
    }
    for corner in 0..(1usize << k) {
        let mut w = 1.0;
        let mut flat = 0usize;
        for a in 0..k {
            let bit = (corner >> (k - 1 - a)) & 1;
            w *= if bit == 1 { fracs[a] } else { 1.0 - fracs[a] };
            flat = flat * m + cells[a] + bit;
        }
        if w != 0.0 {
            let base = flat * m;
            for (o, v) in out.iter_mut().zip(&vals[base..base + m]) {
                *o += w * v;
            }
        }
    }
    out
}

/// Circular kernel weights `w[r]`, r = 0..m-1 offsets on the period-(m-1)
/// grid, truncated at 8 sigma and renormalized to unit sum.
pub fn wrapped_gaussian_kernel(sigma: f64, m: usize) -> Vec<f64> {
    let period = m - 1;
    let h = spacing(m);
    let reach = (8.0 * sigma / h).floor() as i64;
    let mut w = vec![0.0; period];
    for k in -reach..=reach {
        let t = k as f64 * h;
        let r = k.rem_euclid(period as i64) as usize;
        w[r] += (-0.5 * (t / sigma).powi(2)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Lower bound on the mollified density of any unit-mass input:
/// `(min_r w_r / h)^d`, zero when the truncated kernel misses part of the circle.
pub fn mollify_floor(sigma: f64, m: usize, dim: usize) -> f64 {
    let w = wrapped_gaussian_kernel(sigma, m);
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    (wmin / spacing(m)).powi(dim as i32)
}

/// Distribution function of one coordinate given the preceding ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCdf {
    pub axis: usize,
    pub context: Vec<f64>,
    pub knots: Vec<f64>,
    pub cdf_values: Vec<f64>,
    /// Conditional density at the knots.
    pub pdf_values: Vec<f64>,
}

impl ConditionalCdf {
    fn from_slice(axis: usize, context: Vec<f64>, slice: Vec<f64>) -> Result<Self> {
        let m = slice.len();
        let h = spacing(m);
        let mut cum = vec![0.0; m];
        for k in 1..m {
            cum[k] = cum[k - 1] + 0.5 * h * (slice[k - 1] + slice[k]);
        }
        let total = cum[m - 1];
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroMarginal);
        }
        let mut cdf_values: Vec<f64> = cum.iter().map(|c| c / total).collect();
        cdf_values[0] = 0.0;
        cdf_values[m - 1] = 1.0;
        Ok(Self {
            axis,
            context,
            knots: (0..m).map(|i| node(i, m)).collect(),
            cdf_values,
            pdf_values: slice.iter().map(|v| v / total).collect(),
        })
    }

    /// CDF at `t`: exact integral of the piecewise-linear conditional density.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let m = self.knots.len();
        let h = spacing(m);
        let (k, u) = locate(t, m);
        let (a, b) = (self.pdf_values[k], self.pdf_values[k + 1]);
        (self.cdf_values[k] + h * (a * (u - 0.5 * u * u) + b * 0.5 * u * u)).clamp(0.0, 1.0)
    }
}
