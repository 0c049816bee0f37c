//! Grid estimates of C^{k,alpha} norms.
//!
//! Estimates are lower bounds on the true norm: derivatives come from finite
//! differences on the grid and every sup is taken over finitely many nodes or
//! node pairs.

use serde::{Deserialize, Serialize};

use crate::density::MAX_DIM;
use crate::error::{Error, Result};
use crate::quadrature::{node, spacing, unravel};
use crate::rosenblatt::{factorial, TriangularMap};

/// Above this many nodes the pairwise quotient uses a stratified subsample.
pub const ALL_PAIRS_LIMIT: usize = 10_000;

/// Values of a map `[0,1]^dim -> R^codim` on a uniform `m^dim` grid,
/// node-major (`values[node * codim + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMap {
    pub dim: usize,
    pub codim: usize,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl SampledMap {
    pub fn new(dim: usize, codim: usize, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || codim == 0 {
            return Err(Error::InvalidArgument("bad dimensions for sampled map".into()));
        }
        let expected = resolution.pow(dim as u32) * codim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(Self { dim, codim, resolution, values })
    }

    pub fn from_fn<F: Fn(&[f64], &mut [f64])>(dim: usize, codim: usize, resolution: usize, f: F) -> Result<Self> {
        let n = resolution.pow(dim as u32);
        let mut values = vec![0.0; n * codim];
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        for i in 0..n {
            unravel(i, resolution, &mut idx);
            for (xi, &k) in x.iter_mut().zip(&idx) {
                *xi = node(k, resolution);
            }
            f(&x, &mut values[i * codim..(i + 1) * codim]);
        }
        Self::new(dim, codim, resolution, values)
    }

    pub fn from_map(map: &TriangularMap, resolution: usize) -> Result<Self> {
        let d = map.dim();
        let n = resolution.pow(d as u32);
        let mut values = vec![0.0; n * d];
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        for i in 0..n {
            unravel(i, resolution, &mut idx);
            for (xi, &k) in x.iter_mut().zip(&idx) {
                *xi = node(k, resolution);
            }
            map.apply_into(&x, &mut values[i * d..(i + 1) * d])?;
        }
        Self::new(d, d, resolution, values)
    }

    fn n_nodes(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    /// First derivative along `axis` of a node-major field with `codim` channels:
    /// central in the interior, one-sided second order at the ends.
    fn diff(&self, field: &[f64], axis: usize) -> Vec<f64> {
        let m = self.resolution;
        let c = self.codim;
        let h = spacing(m);
        let stride = m.pow((self.dim - 1 - axis) as u32) * c;
        let mut out = vec![0.0; field.len()];
        let mut idx = vec![0usize; self.dim];
        for node_i in 0..self.n_nodes() {
            unravel(node_i, m, &mut idx);
            let i = idx[axis];
            let at = |off: isize| (node_i * c) as isize + off * stride as isize;
            for ch in 0..c {
                let v = |off: isize| field[(at(off) + ch as isize) as usize];
                out[node_i * c + ch] = if i == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else if i == m - 1 {
                    (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h)
                } else {
                    (v(1) - v(-1)) / (2.0 * h)
                };
            }
        }
        out
    }

    fn node_norms(&self, field: &[f64]) -> Vec<f64> {
        field.chunks_exact(self.codim).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    fn coords(&self, node_i: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_DIM];
        unravel(node_i, self.resolution, &mut idx[..self.dim]);
        for (o, &k) in out.iter_mut().zip(&idx[..self.dim]) {
            *o = node(k, self.resolution);
        }
    }

    /// Node pairs used for the Holder quotient.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes();
        if n <= ALL_PAIRS_LIMIT {
            return (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        }
        // strata: an evenly strided subset with all its pairs, plus every
        // nearest-neighbour pair on the full grid
        let stride = n.div_ceil(2_000);
        let sub: Vec<usize> = (0..n).step_by(stride).collect();
        let mut out: Vec<(usize, usize)> =
            sub.iter().enumerate().flat_map(|(a, &i)| sub[a + 1..].iter().map(move |&j| (i, j))).collect();
        let m = self.resolution;
        let mut idx = vec![0usize; self.dim];
        for i in 0..n {
            unravel(i, m, &mut idx);
            for axis in 0..self.dim {
                if idx[axis] + 1 < m {
                    out.push((i, i + m.pow((self.dim - 1 - axis) as u32)));
                }
            }
        }
        out
    }
}

/// Multi-indices of total order `k` in `d` variables.
fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![k]];
    }
    (0..=k)
        .flat_map(|first| {
            multi_indices(d - 1, k - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub k: usize,
    pub alpha: f64,
    pub ck_norm: f64,
    pub holder_seminorm: f64,
    pub total: f64,
}

/// Lower-bound estimate of the C^{k,alpha} norm of a sampled map.
pub fn estimate_holder_norm(map: &SampledMap, k: usize, alpha: f64) -> Result<HolderEstimate> {
    if map.resolution < k + 2 || map.resolution < 3 {
        return Err(Error::InsufficientResolution { resolution: map.resolution, required: (k + 2).max(3) });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let d = map.dim;
    let mut ck_norm = 0.0f64;
    let mut top: Vec<Vec<f64>> = Vec::new();
    for order in 0..=k {
        for n in multi_indices(d, order) {
            let mut field = map.values.clone();
            for (axis, &times) in n.iter().enumerate() {
                for _ in 0..times {
                    field = map.diff(&field, axis);
                }
            }
            let sup = map.node_norms(&field).into_iter().fold(0.0, f64::max);
            ck_norm = ck_norm.max(sup);
            if order == k {
                top.push(field);
            }
        }
    }
    let pairs = map.pairs();
    let c = map.codim;
    let mut seminorm = 0.0f64;
    let (mut xa, mut xb) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
    for field in &top {
        for &(i, j) in &pairs {
            map.coords(i, &mut xa[..d]);
            map.coords(j, &mut xb[..d]);
            let dist: f64 = (0..d).map(|a| (xa[a] - xb[a]).powi(2)).sum::<f64>().sqrt();
            let diff: f64 = (0..c).map(|ch| (field[i * c + ch] - field[j * c + ch]).powi(2)).sum::<f64>().sqrt();
            seminorm = seminorm.max(diff / dist.powf(alpha));
        }
    }
    Ok(HolderEstimate { k, alpha, ck_norm, holder_seminorm: seminorm, total: ck_norm + seminorm })
}

/// Lipschitz bound for the inverse of a triangular map: `d! c1^(d-1) / jac_inf`.
pub fn inverse_lipschitz_bound(c1_norm: f64, jac_inf: f64, d: usize) -> Result<f64> {
    if !(jac_inf > 0.0) {
        return Err(Error::DegenerateJacobian { axis: 0, value: jac_inf });
    }
    if !(c1_norm > 0.0) || d == 0 {
        return Err(Error::InvalidArgument("c1_norm and d must be positive".into()));
    }
    Ok(factorial(d) * c1_norm.powi(d as i32 - 1) / jac_inf)
}
