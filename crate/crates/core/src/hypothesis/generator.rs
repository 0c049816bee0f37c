//! Triangular monotone spline maps with parameter-dependent coefficients.

use super::basis::{BSplineBasis, MAX_COEFS};
use crate::error::{Error, Result};

/// Per-component parameter offsets.
///
/// Component `j` (0-based) carries `N - 2` free increments `theta_k` followed
/// by `(N - 2) * j * c` coupling weights `eta[k][l][q]`, where `c` is the
/// coupling degree and `N` the number of spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub dim: usize,
    pub n_coefs: usize,
    pub coupling_degree: usize,
    offsets: Vec<usize>,
}

impl ParamLayout {
    pub fn new(dim: usize, n_coefs: usize, coupling_degree: usize) -> Self {
        let mut offsets = Vec::with_capacity(dim + 1);
        let mut acc = 0;
        for j in 0..dim {
            offsets.push(acc);
            acc += (n_coefs - 2) * (1 + j * coupling_degree);
        }
        offsets.push(acc);
        Self { dim, n_coefs, coupling_degree, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets[self.dim]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component_range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Index of `theta_k`, k in 1..=N-2.
    #[inline]
    pub fn theta(&self, j: usize, k: usize) -> usize {
        self.offsets[j] + k - 1
    }

    /// Index of `eta[k][l][q]`, k in 1..=N-2, l < j, q in 1..=c.
    #[inline]
    pub fn eta(&self, j: usize, k: usize, l: usize, q: usize) -> usize {
        let c = self.coupling_degree;
        self.offsets[j] + (self.n_coefs - 2) + ((k - 1) * j + l) * c + (q - 1)
    }

    /// True for coupling weights, false for increments.
    pub fn is_coupling(&self, index: usize) -> bool {
        let j = (0..self.dim).find(|&j| self.component_range(j).contains(&index)).unwrap_or(0);
        index - self.offsets[j] >= self.n_coefs - 2
    }

    /// Component owning parameter `index`, and for increments/couplings the
    /// increment index `k`.
    pub fn locate(&self, index: usize) -> (usize, usize) {
        let j = (0..self.dim).find(|&j| self.component_range(j).contains(&index)).unwrap_or(0);
        let local = index - self.offsets[j];
        let n = self.n_coefs - 2;
        if local < n {
            (j, local + 1)
        } else {
            let c = self.coupling_degree.max(1);
            (j, (local - n) / (j.max(1) * c) + 1)
        }
    }
}

/// Evaluator behind every parametric generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineComponents {
    basis: BSplineBasis,
    greville: Vec<f64>,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl SplineComponents {
    pub fn new(basis: BSplineBasis, layout: ParamLayout, params: Vec<f64>) -> Result<Self> {
        if params.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), got: params.len() });
        }
        if basis.n_coefs() > MAX_COEFS || basis.n_coefs() != layout.n_coefs {
            return Err(Error::InvalidArgument(format!(
                "basis with {} coefficients is not supported",
                basis.n_coefs()
            )));
        }
        let greville = basis.greville();
        Ok(Self { basis, greville, layout, params })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Spline coefficients of component `j` for context `ctx = y[..j]`.
    fn coefs(&self, j: usize, ctx: &[f64], out: &mut [f64; MAX_COEFS]) {
        let n = self.layout.n_coefs;
        let c = self.layout.coupling_degree;
        let mut powers = [[0.0f64; 8]; 8];
        for (l, &x) in ctx.iter().enumerate().take(j) {
            let z = 2.0 * x - 1.0;
            let mut p = 1.0;
            for q in 1..=c {
                p *= z;
                powers[l][q] = p;
            }
        }
        out[0] = 0.0;
        let mut s = 0.0;
        for k in 1..n - 1 {
            let mut inc = self.params[self.layout.theta(j, k)];
            for (l, pw) in powers.iter().enumerate().take(j) {
                for q in 1..=c {
                    inc += self.params[self.layout.eta(j, k, l, q)] * pw[q];
                }
            }
            s += inc;
            out[k] = self.greville[k] + s;
        }
        out[n - 1] = 1.0;
    }

    /// Component `j` at `y` (only `y[..=j]` is read).
    pub fn value(&self, j: usize, y: &[f64]) -> f64 {
        let mut c = [0.0; MAX_COEFS];
        self.coefs(j, &y[..j], &mut c);
        self.basis.eval(&c[..self.layout.n_coefs], y[j])
    }

    /// Component `j` and its partial derivative in `y[j]`.
    pub fn value_and_partial(&self, j: usize, y: &[f64]) -> (f64, f64) {
        let mut c = [0.0; MAX_COEFS];
        self.coefs(j, &y[..j], &mut c);
        self.basis.eval_with_derivative(&c[..self.layout.n_coefs], y[j])
    }

    /// Solve component `j` for its last argument given the context.
    pub fn solve(&self, j: usize, ctx: &[f64], target: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::RootNotBracketed { axis: j + 1, target });
        }
        if target == 0.0 || target == 1.0 {
            return Ok(target);
        }
        let mut c = [0.0; MAX_COEFS];
        self.coefs(j, ctx, &mut c);
        let coefs = &c[..self.layout.n_coefs];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = target;
        for _ in 0..200 {
            let (v, dv) = self.basis.eval_with_derivative(coefs, t);
            let r = v - target;
            if r.abs() <= 2e-16 {
                return Ok(t);
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= 1e-15 {
                break;
            }
            let next = t - r / dv;
            t = if dv > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        let v = self.basis.eval(coefs, t);
        if (v - target).abs() > 1e-9 {
            return Err(Error::RootNotBracketed { axis: j + 1, target });
        }
        Ok(t)
    }
}
