//! Finite-parameter generator and discriminator families with certified
//! norm and Jacobian bounds, and lattice nets over their parameter boxes.
//!
//! Component `j` of a generator is a clamped B-spline in `y_j` whose
//! coefficients are cumulative increments around the identity:
//!
//! ```text
//! S_0 = 0,  S_i = xi_i + sum_{k<=i} (theta_k + sum_{l<j, q<=c} eta_{k,l,q} (2 y_l - 1)^q),  S_{N-1} = 1
//! ```
//!
//! where `xi` are the Greville abscissae. All-zero parameters give the
//! identity. Norm bounds come from interval arithmetic on the coefficient
//! increments, so every map in the box is certified, not just sampled ones.

pub mod basis;
pub mod generator;
pub mod net;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::MAX_DIM;
use crate::divergence::DiscriminatorFn;
use crate::error::{Error, Result};
use crate::rosenblatt::{factorial, TriangularMap};

pub use basis::BSplineBasis;
pub use generator::{ParamLayout, SplineComponents};
pub use net::{build_eps_net, build_eps_net_capped, build_eps_net_shape, EpsNet, NetMetric, DEFAULT_NET_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    BernsteinTriangular,
    SplineTriangular,
}

fn default_interior() -> usize {
    2
}
fn default_coupling_ratio() -> f64 {
    0.5
}
fn is_default_interior(v: &usize) -> bool {
    *v == default_interior()
}
fn is_default_ratio(v: &f64) -> bool {
    *v == default_coupling_ratio()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    pub dim: usize,
    /// Smoothness order.
    pub k: usize,
    pub alpha: f64,
    /// Norm bound.
    #[serde(rename = "K")]
    pub k_bound: f64,
    pub family: FamilyKind,
    pub degree: usize,
    #[serde(default)]
    pub coupling_degree: usize,
    /// Interior knots per component (spline family only).
    #[serde(default = "default_interior", skip_serializing_if = "is_default_interior")]
    pub interior_knots: usize,
    /// Coupling half-width relative to the increment half-width.
    #[serde(default = "default_coupling_ratio", skip_serializing_if = "is_default_ratio")]
    pub coupling_ratio: f64,
    /// Fixed increment half-width; derived from `K` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_radius: Option<f64>,
}

impl HypothesisConfig {
    pub fn bernstein(dim: usize, k: usize, alpha: f64, k_bound: f64, degree: usize) -> Self {
        Self {
            dim,
            k,
            alpha,
            k_bound,
            family: FamilyKind::BernsteinTriangular,
            degree,
            coupling_degree: 0,
            interior_knots: default_interior(),
            coupling_ratio: default_coupling_ratio(),
            box_radius: None,
        }
    }

    /// `k > 1 - alpha + d/2`, the condition under which the rate bounds apply.
    pub fn regularity_ok(&self) -> bool {
        self.k as f64 > 1.0 - self.alpha + self.dim as f64 / 2.0
    }

    pub fn basis(&self) -> BSplineBasis {
        match self.family {
            FamilyKind::BernsteinTriangular => BSplineBasis::bernstein(self.degree),
            FamilyKind::SplineTriangular => BSplineBasis::uniform(self.degree, self.interior_knots),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dim == 0 || self.dim > MAX_DIM {
            return bad(format!("dim must be in 1..={MAX_DIM}"));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.k_bound > 1.0) || !self.k_bound.is_finite() {
            return bad(format!("K must exceed 1, got {}", self.k_bound));
        }
        if self.degree == 0 {
            return bad("degree must be at least 1".into());
        }
        if self.coupling_degree > 6 {
            return bad("coupling_degree must be at most 6".into());
        }
        if !(self.coupling_ratio >= 0.0) || !self.coupling_ratio.is_finite() {
            return bad("coupling_ratio must be nonnegative".into());
        }
        if self.basis().n_coefs() > basis::MAX_COEFS {
            return bad(format!("at most {} coefficients per component", basis::MAX_COEFS));
        }
        if let Some(r) = self.box_radius {
            if !(r >= 0.0) || !r.is_finite() {
                return bad("box_radius must be nonnegative".into());
            }
        }
        Ok(())
    }
}

/// Analytic bounds valid for every map they were computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    /// Upper bound on max over |n| <= k of sup |D^n phi|.
    pub ck_norm: f64,
    /// Upper bound on the alpha-Holder seminorm of the k-th derivatives.
    pub holder_seminorm: f64,
    pub total: f64,
    /// Upper bound on the C^1 norm.
    pub c1_norm: f64,
    pub diag_lower: Vec<f64>,
    pub diag_upper: Vec<f64>,
    /// Lower bound on the Jacobian determinant.
    pub jac_lower: f64,
    pub jac_upper: f64,
}

impl NormBounds {
    pub fn certifies(&self, k_bound: f64) -> bool {
        self.total <= k_bound
            && self.jac_lower >= 1.0 / k_bound
            && self.diag_lower.iter().all(|&v| v > 0.0)
    }
}

/// Interval envelope of one component's coefficient increments.
struct Envelope {
    /// Increments `a_k = S_k - S_{k-1}`, k = 1..N-1.
    inc: Vec<(f64, f64)>,
    /// `ctx[l][r-1][k-1]`: bound on |d^r a_k / d y_l^r|.
    ctx: Vec<Vec<Vec<f64>>>,
}

/// sup over [0,1] of |d^r (2x-1)^q / dx^r|.
fn poly_deriv_sup(q: usize, r: usize) -> f64 {
    if r > q {
        return 0.0;
    }
    let falling: f64 = ((q - r + 1)..=q).map(|v| v as f64).product();
    2f64.powi(r as i32) * falling
}

fn interval_sup(iv: &[(f64, f64)]) -> f64 {
    iv.iter().map(|&(lo, hi)| lo.abs().max(hi.abs())).fold(0.0, f64::max)
}

/// Coefficient intervals of the `s`-th derivative (s >= 1) from increment intervals.
fn derivative_intervals(basis: &BSplineBasis, inc: &[(f64, f64)], s: usize) -> Vec<(f64, f64)> {
    let mut cur: Vec<(f64, f64)> = inc
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let c = basis.diff_scale(1, i);
            (c * lo, c * hi)
        })
        .collect();
    for lvl in 2..=s {
        cur = (0..cur.len().saturating_sub(1))
            .map(|i| {
                let c = basis.diff_scale(lvl, i);
                let (a, b) = (cur[i], cur[i + 1]);
                (c * (b.0 - a.1), c * (b.1 - a.0))
            })
            .collect();
    }
    cur
}

fn diag_sup(basis: &BSplineBasis, inc: &[(f64, f64)], s: usize) -> f64 {
    if s > basis.degree() {
        return 0.0;
    }
    interval_sup(&derivative_intervals(basis, inc, s))
}

/// All multi-indices in `d` variables with total order `total`.
fn multi_indices(d: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(d, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, total, &mut Vec::with_capacity(d), &mut out);
    out
}

fn component_bound(basis: &BSplineBasis, env: &Envelope, j: usize, n: &[usize]) -> f64 {
    if n[j + 1..].iter().any(|&v| v > 0) {
        return 0.0;
    }
    let active: Vec<usize> = (0..j).filter(|&l| n[l] > 0).collect();
    let s = n[j];
    match active.len() {
        0 => {
            if s == 0 {
                1.0
            } else {
                diag_sup(basis, &env.inc, s)
            }
        }
        1 => {
            let l = active[0];
            let r = n[l];
            let g = match env.ctx[l].get(r - 1) {
                Some(g) => g,
                None => return 0.0,
            };
            if s == 0 {
                g[..g.len() - 1].iter().sum()
            } else {
                let iv: Vec<(f64, f64)> = g.iter().map(|&v| (-v, v)).collect();
                diag_sup(basis, &iv, s)
            }
        }
        _ => 0.0,
    }
}

fn bounds_from_envelopes(config: &HypothesisConfig, basis: &BSplineBasis, envs: &[Envelope]) -> NormBounds {
    let d = config.dim;
    let k = config.k;
    let vec_bound = |n: &[usize]| -> f64 {
        (0..d).map(|j| component_bound(basis, &envs[j], j, n).powi(2)).sum::<f64>().sqrt()
    };
    let mut ck_norm = 0.0f64;
    let mut c1_norm = 0.0f64;
    for order in 0..=k {
        for n in multi_indices(d, order) {
            let v = vec_bound(&n);
            ck_norm = ck_norm.max(v);
            if order <= 1 {
                c1_norm = c1_norm.max(v);
            }
        }
    }
    let diam_factor = (d as f64).powf((1.0 - config.alpha) / 2.0);
    let mut grad_sup = 0.0f64;
    for n in multi_indices(d, k) {
        let mut acc = 0.0;
        for c in 0..d {
            let mut m = n.clone();
            m[c] += 1;
            acc += vec_bound(&m).powi(2);
        }
        grad_sup = grad_sup.max(acc.sqrt());
    }
    let holder_seminorm = grad_sup * diam_factor;
    let mut diag_lower = Vec::with_capacity(d);
    let mut diag_upper = Vec::with_capacity(d);
    for env in envs {
        let iv = derivative_intervals(basis, &env.inc, 1);
        diag_lower.push(iv.iter().map(|v| v.0).fold(f64::INFINITY, f64::min));
        diag_upper.push(iv.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max));
    }
    let jac_lower = if diag_lower.iter().all(|&v| v > 0.0) { diag_lower.iter().product() } else { 0.0 };
    let jac_upper = diag_upper.iter().product();
    NormBounds {
        ck_norm,
        holder_seminorm,
        total: ck_norm + holder_seminorm,
        c1_norm,
        diag_lower,
        diag_upper,
        jac_lower,
        jac_upper,
    }
}

fn base_increments(greville: &[f64]) -> Vec<f64> {
    (1..greville.len()).map(|k| greville[k] - greville[k - 1]).collect()
}

fn box_envelopes(config: &HypothesisConfig, basis: &BSplineBasis, r: f64, rc: f64) -> Vec<Envelope> {
    let n = basis.n_coefs();
    let free = n - 2;
    let c = config.coupling_degree;
    let a0 = base_increments(&basis.greville());
    let max_r = config.k + 1;
    (0..config.dim)
        .map(|j| {
            let w = r + (j * c) as f64 * rc;
            let inc = (1..n)
                .map(|k| {
                    let hw = if k < n - 1 { w } else { free as f64 * w };
                    (a0[k - 1] - hw, a0[k - 1] + hw)
                })
                .collect();
            let ctx = (0..j)
                .map(|_| {
                    (1..=max_r)
                        .map(|order| {
                            let pi: f64 = (1..=c).map(|q| poly_deriv_sup(q, order)).sum();
                            (1..n)
                                .map(|k| if k < n - 1 { rc * pi } else { free as f64 * rc * pi })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            Envelope { inc, ctx }
        })
        .collect()
}

fn param_envelopes(
    config: &HypothesisConfig,
    basis: &BSplineBasis,
    layout: &ParamLayout,
    params: &[f64],
) -> Vec<Envelope> {
    let n = basis.n_coefs();
    let c = config.coupling_degree;
    let a0 = base_increments(&basis.greville());
    let max_r = config.k + 1;
    (0..config.dim)
        .map(|j| {
            let mut inc = Vec::with_capacity(n - 1);
            let (mut theta_sum, mut half_sum) = (0.0, 0.0);
            for k in 1..n - 1 {
                let theta = params[layout.theta(j, k)];
                let half: f64 = (0..j)
                    .flat_map(|l| (1..=c).map(move |q| (l, q)))
                    .map(|(l, q)| params[layout.eta(j, k, l, q)].abs())
                    .sum();
                theta_sum += theta;
                half_sum += half;
                let centre = a0[k - 1] + theta;
                inc.push((centre - half, centre + half));
            }
            let centre = a0[n - 2] - theta_sum;
            inc.push((centre - half_sum, centre + half_sum));
            let ctx = (0..j)
                .map(|l| {
                    (1..=max_r)
                        .map(|order| {
                            let mut g: Vec<f64> = (1..n - 1)
                                .map(|k| {
                                    (1..=c)
                                        .map(|q| params[layout.eta(j, k, l, q)].abs() * poly_deriv_sup(q, order))
                                        .sum()
                                })
                                .collect();
                            let last = g.iter().sum();
                            g.push(last);
                            g
                        })
                        .collect()
                })
                .collect();
            Envelope { inc, ctx }
        })
        .collect()
}

/// A parameter vector with its cached certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub coefficients: Vec<f64>,
    /// Lower bound on the product of diagonal partials.
    pub jac_lower: f64,
    /// Upper bound on the C^1 norm.
    pub c1_upper: f64,
    /// Upper bound on the C^{k,alpha} norm.
    pub norm_upper: f64,
}

/// Certified generator family: a config plus the parameter box it admits.
#[derive(Debug, Clone)]
pub struct GeneratorFamily {
    config: Arc<HypothesisConfig>,
    basis: BSplineBasis,
    layout: ParamLayout,
    radius: f64,
    coupling_radius: f64,
    box_bounds: NormBounds,
}

impl GeneratorFamily {
    pub fn new(config: HypothesisConfig) -> Result<Self> {
        config.validate()?;
        let basis = config.basis();
        let kb = config.k_bound;
        if config.family == FamilyKind::SplineTriangular && config.k + 1 > config.degree {
            return Err(Error::NotCertified {
                k_bound: kb,
                reason: format!(
                    "degree-{} splines are only C^{}; need degree >= k + 1",
                    config.degree,
                    config.degree - 1
                ),
            });
        }
        let layout = ParamLayout::new(config.dim, basis.n_coefs(), config.coupling_degree);
        let ratio = config.coupling_ratio;
        let bounds_at = |r: f64| bounds_from_envelopes(&config, &basis, &box_envelopes(&config, &basis, r, ratio * r));
        let identity = bounds_at(0.0);
        if !identity.certifies(kb) {
            return Err(Error::NotCertified {
                k_bound: kb,
                reason: format!("even the identity has norm bound {}", identity.total),
            });
        }
        let radius = if layout.is_empty() {
            0.0
        } else if let Some(r) = config.box_radius {
            if !bounds_at(r).certifies(kb) {
                return Err(Error::NotCertified {
                    k_bound: kb,
                    reason: format!("box radius {r} exceeds the certified range"),
                });
            }
            r
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if bounds_at(hi).certifies(kb) {
                lo = hi;
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if bounds_at(mid).certifies(kb) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            lo
        };
        let box_bounds = bounds_at(radius);
        Ok(Self {
            config: Arc::new(config),
            basis,
            layout,
            radius,
            coupling_radius: ratio * radius,
            box_bounds,
        })
    }

    pub fn config(&self) -> &HypothesisConfig {
        &self.config
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    /// Half-width for increment parameters.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coupling_radius(&self) -> f64 {
        self.coupling_radius
    }

    /// Bounds valid for every member of the box.
    pub fn box_bounds(&self) -> &NormBounds {
        &self.box_bounds
    }

    pub fn param_box(&self) -> Vec<(f64, f64)> {
        (0..self.n_params())
            .map(|i| {
                let r = self.half_width(i);
                (-r, r)
            })
            .collect()
    }

    pub(crate) fn half_width(&self, index: usize) -> f64 {
        if self.layout.is_coupling(index) {
            self.coupling_radius
        } else {
            self.radius
        }
    }

    pub fn neutral_params(&self) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: params.len() });
        }
        for (index, &value) in params.iter().enumerate() {
            let r = self.half_width(index);
            if !(value.abs() <= r * (1.0 + 1e-12)) {
                return Err(Error::ParamsOutOfBox { index, value, lo: -r, hi: r });
            }
        }
        Ok(())
    }

    /// Certificate of one parameter vector (tighter than the box bounds).
    pub fn generator_params(&self, params: &[f64]) -> Result<GeneratorParams> {
        self.check_params(params)?;
        let b = bounds_from_envelopes(&self.config, &self.basis, &param_envelopes(&self.config, &self.basis, &self.layout, params));
        Ok(GeneratorParams {
            coefficients: params.to_vec(),
            jac_lower: b.jac_lower,
            c1_upper: b.c1_norm,
            norm_upper: b.total,
        })
    }

    pub fn make_generator(&self, params: &[f64]) -> Result<TriangularMap> {
        self.check_params(params)?;
        let comps = SplineComponents::new(self.basis.clone(), self.layout.clone(), params.to_vec())?;
        Ok(TriangularMap::from_spline(comps, self.config.clone(), self.config.k_bound))
    }

    /// `(B1, B2)` with `B1 = 1 / (1 + d! K^(d+1))` and `B2 = 1 - B1`.
    pub fn discriminator_bounds(&self) -> (f64, f64) {
        discriminator_bounds(self.config.dim, self.config.k_bound)
    }

    /// `D = f_a / (f_a + f_b)` for the generators with parameters `a`, `b`.
    pub fn make_discriminator(&self, params_a: &[f64], params_b: &[f64]) -> Result<DiscriminatorFn> {
        let (lo, hi) = self.discriminator_bounds();
        let ga = self.make_generator(params_a)?;
        let gb = self.make_generator(params_b)?;
        if params_a == params_b {
            return DiscriminatorFn::constant(0.5, lo, hi, self.dim());
        }
        let fa = Arc::new(ga.pushforward_density()?);
        let fb = Arc::new(gb.pushforward_density()?);
        Ok(DiscriminatorFn::ratio(fa, fb, lo, hi))
    }

    /// Sup-distance between two members, sampled on a grid of `points` per axis.
    pub fn sup_distance(&self, a: &[f64], b: &[f64], points: usize) -> Result<f64> {
        let ga = SplineComponents::new(self.basis.clone(), self.layout.clone(), a.to_vec())?;
        let gb = SplineComponents::new(self.basis.clone(), self.layout.clone(), b.to_vec())?;
        let d = self.dim();
        let total = points.pow(d as u32);
        let mut y = vec![0.0; d];
        let mut idx = vec![0usize; d];
        let mut best = 0.0f64;
        for flat in 0..total {
            crate::quadrature::unravel(flat, points, &mut idx);
            for (yi, &i) in y.iter_mut().zip(&idx) {
                *yi = crate::quadrature::node(i, points);
            }
            let s: f64 = (0..d).map(|j| (ga.value(j, &y) - gb.value(j, &y)).powi(2)).sum();
            best = best.max(s.sqrt());
        }
        Ok(best)
    }
}

pub fn discriminator_bounds(dim: usize, k_bound: f64) -> (f64, f64) {
    let b1 = 1.0 / (1.0 + factorial(dim) * k_bound.powi(dim as i32 + 1));
    (b1, 1.0 - b1)
}

/// Convenience wrapper.
pub fn make_generator(family: &GeneratorFamily, params: &[f64]) -> Result<TriangularMap> {
    family.make_generator(params)
}

/// Convenience wrapper.
pub fn make_discriminator(family: &GeneratorFamily, params_a: &[f64], params_b: &[f64]) -> Result<DiscriminatorFn> {
    family.make_discriminator(params_a, params_b)
}
