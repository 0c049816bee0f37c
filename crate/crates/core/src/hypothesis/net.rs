//! Lattice covers of the parameter box in the sup-norm of the induced maps.

use serde::{Deserialize, Serialize};

use super::GeneratorFamily;
use crate::error::{Error, Result};
use crate::rng::{streams, UniformStream};

pub const DEFAULT_NET_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetMetric {
    SupNorm,
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    lo: f64,
    step: f64,
    count: usize,
}

/// Cell-centred lattice over the parameter box.
///
/// Every box member lies within `epsilon` (sup-norm of the maps) of some
/// member; neighbouring members differ by at most `2 epsilon`. Members are
/// addressed by index in mixed radix, last parameter fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsNet {
    pub epsilon: f64,
    pub metric: NetMetric,
    /// Sup-norm Lipschitz constant of params -> map, w.r.t. the max-norm on params.
    pub lipschitz: f64,
    axes: Vec<Axis>,
    len: usize,
}

/// sup_x of sum_{i=k}^{N-2} B_i(x): the sensitivity of a component to increment `k`.
fn increment_sensitivity(family: &GeneratorFamily, k: usize) -> f64 {
    let basis = family.basis();
    let n = basis.n_coefs();
    let coefs: Vec<f64> = (0..n).map(|i| if i >= k && i + 1 < n { 1.0 } else { 0.0 }).collect();
    let grid = 4096;
    let mut best = 0.0f64;
    for i in 0..=grid {
        best = best.max(basis.eval(&coefs, i as f64 / grid as f64));
    }
    // slope of a 0/1-coefficient spline is at most the largest difference scale
    let slope = (0..n - 1).map(|i| basis.diff_scale(1, i)).fold(0.0, f64::max);
    (best + slope * 0.5 / grid as f64).min(1.0)
}

/// Per-parameter sensitivities `l_p` with |phi(p) - phi(p')|_j <= sum_p l_p |dp|.
pub fn parameter_lipschitz(family: &GeneratorFamily) -> Vec<f64> {
    let layout = family.layout();
    let n = basis_free(family);
    let sens: Vec<f64> = (1..=n).map(|k| increment_sensitivity(family, k)).collect();
    (0..family.n_params()).map(|i| sens[layout.locate(i).1 - 1]).collect()
}

fn basis_free(family: &GeneratorFamily) -> usize {
    family.basis().n_coefs() - 2
}

/// Family Lipschitz constant: sqrt(sum_j (sum_{p in j} l_p)^2).
pub fn family_lipschitz(family: &GeneratorFamily) -> f64 {
    let l = parameter_lipschitz(family);
    let layout = family.layout();
    (0..family.dim())
        .map(|j| layout.component_range(j).map(|i| l[i]).sum::<f64>().powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn build_eps_net(family: &GeneratorFamily, epsilon: f64) -> Result<EpsNet> {
    build_eps_net_capped(family, epsilon, DEFAULT_NET_CAP)
}

pub fn build_eps_net_capped(family: &GeneratorFamily, epsilon: f64, cap: usize) -> Result<EpsNet> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let lipschitz = family_lipschitz(family);
    let max_step = if lipschitz > 0.0 { 2.0 * epsilon / lipschitz } else { f64::INFINITY };
    let mut axes = Vec::with_capacity(family.n_params());
    let mut card: u128 = 1;
    for (lo, hi) in family.param_box() {
        let width = hi - lo;
        let count = if width <= 0.0 { 1 } else { ((width / max_step).ceil() as u128).max(1) };
        card = card.saturating_mul(count);
        if card > cap as u128 {
            return Err(Error::NetTooLarge { cardinality: card, cap });
        }
        let count = count as usize;
        axes.push(Axis { lo, step: width / count as f64, count });
    }
    Ok(EpsNet { epsilon, metric: NetMetric::SupNorm, lipschitz, axes, len: card as usize })
}

/// Lattice with a prescribed number of points per axis. `epsilon` is the
/// resulting covering radius.
pub fn build_eps_net_shape(family: &GeneratorFamily, shape: &[usize], cap: usize) -> Result<EpsNet> {
    let pbox = family.param_box();
    if shape.len() != pbox.len() {
        return Err(Error::DimensionMismatch { expected: pbox.len(), got: shape.len() });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidArgument("net shape entries must be positive".into()));
    }
    let card = shape.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if card > cap as u128 {
        return Err(Error::NetTooLarge { cardinality: card, cap });
    }
    let lipschitz = family_lipschitz(family);
    let axes: Vec<Axis> = pbox
        .iter()
        .zip(shape)
        .map(|(&(lo, hi), &count)| Axis { lo, step: (hi - lo) / count as f64, count })
        .collect();
    let max_step = axes.iter().map(|a| a.step).fold(0.0, f64::max);
    let epsilon = lipschitz * max_step / 2.0;
    Ok(EpsNet { epsilon, metric: NetMetric::SupNorm, lipschitz, axes, len: card as usize })
}

impl EpsNet {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_params(&self) -> usize {
        self.axes.len()
    }

    /// Points per parameter axis.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn member(&self, index: usize) -> Vec<f64> {
        assert!(index < self.len, "net index out of range");
        let mut out = vec![0.0; self.axes.len()];
        let mut rem = index;
        for (o, a) in out.iter_mut().zip(&self.axes).rev() {
            let i = rem % a.count;
            rem /= a.count;
            *o = a.lo + (i as f64 + 0.5) * a.step;
        }
        out
    }

    pub fn members(&self) -> Vec<Vec<f64>> {
        (0..self.len).map(|i| self.member(i)).collect()
    }

    /// Index of the lattice member nearest (max-norm) to `params`.
    pub fn nearest(&self, params: &[f64]) -> usize {
        self.axes.iter().zip(params).fold(0usize, |acc, (a, &p)| {
            let i = (((p - a.lo) / a.step).floor().max(0.0) as usize).min(a.count - 1);
            acc * a.count + i
        })
    }

    /// Net export: JSON array of parameter vectors.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.members()).expect("finite values serialize")
    }

    /// Largest observed sup-distance from random box members to their nearest
    /// net member (maps compared on `points` nodes per axis).
    pub fn verify_cover(&self, family: &GeneratorFamily, samples: usize, seed: u64, points: usize) -> Result<f64> {
        let rng = UniformStream::new(seed, streams::NET_CHECK, self.n_params().max(1));
        let pbox = family.param_box();
        let mut u = vec![0.0; self.n_params().max(1)];
        let mut worst = 0.0f64;
        for s in 0..samples {
            rng.point(s as u64, &mut u);
            let p: Vec<f64> = pbox.iter().zip(&u).map(|(&(lo, hi), &t)| lo + t * (hi - lo)).collect();
            let m = self.member(self.nearest(&p));
            worst = worst.max(family.sup_distance(&p, &m, points)?);
        }
        Ok(worst)
    }
}
