//! Triangular monotone maps: exact Rosenblatt transforms of grid densities and
//! parametric spline generators, with inversion, Jacobians, sampling and
//! pushforward densities.
//!
//! A map is stored as a set of lower-triangular components in its natural
//! direction (conditional CDF tables map data to uniforms, spline generators
//! map uniforms to data). Evaluating against the natural direction solves the
//! triangular system one coordinate at a time.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{check_permutation, Density, GridDensity, GridDensityFile, MAX_DIM};
use crate::error::{Error, Result};
use crate::hypothesis::generator::SplineComponents;
use crate::hypothesis::{GeneratorFamily, HypothesisConfig};
use crate::quadrature::{axis_weights, locate, spacing, QuadRule};
use crate::rng::{streams, UniformStream};

/// Diagonal partials below this are treated as degenerate.
pub const MIN_PARTIAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Data to uniform (like the Rosenblatt transform).
    Forward,
    /// Uniform to data (like a generator).
    Inverse,
}

impl Direction {
    fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

/// Conditional CDF tables of a grid density.
///
/// Level `j` holds the (trapezoid) marginal of the first `j + 1` axes on the
/// `m^(j+1)` grid together with cumulative integrals along its last axis.
/// Component `j` at context `c` is the ratio of multilinearly weighted
/// cumulative integrals, which is exactly the conditional CDF of the
/// multilinear interpolant; its diagonal partials telescope to that
/// interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct RosenblattTable {
    source: GridDensity,
    m: usize,
    levels: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
}

struct Corners {
    base: [usize; 32],
    weight: [f64; 32],
    count: usize,
}

impl RosenblattTable {
    pub fn new(density: &GridDensity) -> Result<Self> {
        let d = density.dim();
        let m = density.resolution();
        let w = axis_weights(m, QuadRule::Trapezoid);
        let mut levels = vec![Vec::new(); d];
        levels[d - 1] = density.values().to_vec();
        for j in (0..d - 1).rev() {
            levels[j] = crate::density::contract_last(&levels[j + 1], m, &w);
        }
        let total: f64 = levels[0].iter().zip(&w).map(|(v, wi)| v * wi).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroMarginal);
        }
        // normalize so the interpolant has unit trapezoid mass
        for level in levels.iter_mut() {
            level.iter_mut().for_each(|v| *v /= total);
        }
        let h = spacing(m);
        let prefix = levels
            .iter()
            .map(|vals| {
                let mut out = vec![0.0; vals.len()];
                for (row, o) in vals.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
                    for k in 1..m {
                        o[k] = o[k - 1] + 0.5 * h * (row[k - 1] + row[k]);
                    }
                }
                out
            })
            .collect::<Vec<_>>();
        for p in &prefix {
            for row in p.chunks_exact(m) {
                if !(row[m - 1] > 0.0) {
                    return Err(Error::ZeroMarginal);
                }
            }
        }
        Ok(Self { source: density.clone(), m, levels, prefix })
    }

    pub fn source(&self) -> &GridDensity {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    fn corners(&self, ctx: &[f64]) -> Corners {
        let m = self.m;
        let k = ctx.len();
        let mut out = Corners { base: [0; 32], weight: [0.0; 32], count: 0 };
        let mut cells = [0usize; MAX_DIM];
        let mut fracs = [0.0f64; MAX_DIM];
        for a in 0..k {
            let (c, u) = locate(ctx[a], m);
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
                out.base[out.count] = flat * m;
                out.weight[out.count] = w;
                out.count += 1;
            }
        }
        out
    }

    /// Conditional CDF value and density of component `j` at `t`.
    fn eval(&self, j: usize, ctx: &[f64], t: f64) -> (f64, f64) {
        let m = self.m;
        let h = spacing(m);
        let cs = self.corners(ctx);
        let (f, p) = (&self.levels[j], &self.prefix[j]);
        let (k, u) = locate(t, m);
        let (mut num, mut den, mut dens) = (0.0, 0.0, 0.0);
        for c in 0..cs.count {
            let (b, w) = (cs.base[c], cs.weight[c]);
            let (a, bb) = (f[b + k], f[b + k + 1]);
            num += w * (p[b + k] + h * (a * (u - 0.5 * u * u) + bb * 0.5 * u * u));
            den += w * p[b + m - 1];
            dens += w * (a * (1.0 - u) + bb * u);
        }
        let value = if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            (num / den).clamp(0.0, 1.0)
        };
        (value, dens / den)
    }

    fn solve(&self, j: usize, ctx: &[f64], x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::RootNotBracketed { axis: j + 1, target: x });
        }
        if x == 0.0 || x == 1.0 {
            return Ok(x);
        }
        let m = self.m;
        let h = spacing(m);
        let cs = self.corners(ctx);
        let (f, p) = (&self.levels[j], &self.prefix[j]);
        let q = |k: usize| -> f64 { (0..cs.count).map(|c| cs.weight[c] * p[cs.base[c] + k]).sum() };
        let den = q(m - 1);
        let target = x * den;
        // largest k in [0, m-2] with q(k) <= target
        let (mut lo, mut hi) = (0usize, m - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if q(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = lo;
        let (mut a, mut b) = (0.0, 0.0);
        for c in 0..cs.count {
            a += cs.weight[c] * f[cs.base[c] + k];
            b += cs.weight[c] * f[cs.base[c] + k + 1];
        }
        let delta = (target - q(k)) / h;
        // (b - a)/2 u^2 + a u = delta, stable root
        let disc = (a * a + 2.0 * (b - a) * delta).max(0.0);
        let denom = a + disc.sqrt();
        if !(denom > 0.0) || !delta.is_finite() {
            return Err(Error::RootNotBracketed { axis: j + 1, target: x });
        }
        let u = (2.0 * delta / denom).clamp(0.0, 1.0);
        let (cell_lo, cell_hi) = (k as f64 * h, if k + 2 == m { 1.0 } else { (k + 1) as f64 * h });
        let mut t = (cell_lo + u * h).clamp(cell_lo, cell_hi);
        for _ in 0..2 {
            let (v, dv) = self.eval(j, ctx, t);
            let r = v - x;
            if r.abs() <= 1e-16 || !(dv > 0.0) {
                break;
            }
            t = (t - r / dv).clamp(cell_lo, cell_hi);
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Components {
    Identity,
    Table(Arc<RosenblattTable>),
    Spline(Arc<SplineComponents>, Arc<HypothesisConfig>),
}

/// Lower-triangular monotone map of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMap {
    dim: usize,
    direction: Direction,
    components: Components,
    /// Internal axis `i` is external axis `order[i]`.
    order: Vec<usize>,
    /// Recorded norm bound and its dimension, for generators from a certified family.
    k_bound: Option<f64>,
}

impl TriangularMap {
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension must be in 1..={MAX_DIM}")));
        }
        Ok(Self {
            dim,
            direction: Direction::Inverse,
            components: Components::Identity,
            order: (0..dim).collect(),
            k_bound: None,
        })
    }

    pub(crate) fn from_spline(
        components: SplineComponents,
        config: Arc<HypothesisConfig>,
        k_bound: f64,
    ) -> Self {
        let dim = components.dim();
        Self {
            dim,
            direction: Direction::Inverse,
            components: Components::Spline(Arc::new(components), config),
            order: (0..dim).collect(),
            k_bound: Some(k_bound),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Norm bound K recorded by the family that produced this map.
    pub fn k_bound(&self) -> Option<f64> {
        self.k_bound
    }

    /// Parameters of a spline generator.
    pub fn params(&self) -> Option<&[f64]> {
        match &self.components {
            Components::Spline(s, _) => Some(s.params()),
            _ => None,
        }
    }

    /// The same map with the opposite role.
    pub fn inverse(&self) -> Self {
        let mut out = self.clone();
        out.direction = self.direction.flip();
        out
    }

    /// Copy of this map acting on permuted coordinates.
    pub fn with_order(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.dim)?;
        if let Components::Table(_) = self.components {
            return Err(Error::InvalidArgument(
                "table maps fix their order at construction; use build_rosenblatt_ordered".into(),
            ));
        }
        let mut out = self.clone();
        out.order = order.to_vec();
        Ok(out)
    }

    fn natural(&self) -> Direction {
        match self.components {
            Components::Identity | Components::Spline(..) => Direction::Inverse,
            Components::Table(_) => Direction::Forward,
        }
    }

    /// Stored component `j` at internal point `z`: (value, diagonal partial).
    fn component(&self, j: usize, z: &[f64]) -> (f64, f64) {
        match &self.components {
            Components::Identity => (z[j], 1.0),
            Components::Table(t) => t.eval(j, &z[..j], z[j]),
            Components::Spline(s, _) => s.value_and_partial(j, z),
        }
    }

    fn solve_component(&self, j: usize, ctx: &[f64], x: f64) -> Result<f64> {
        match &self.components {
            Components::Identity => Ok(x),
            Components::Table(t) => t.solve(j, ctx, x),
            Components::Spline(s, _) => s.solve(j, ctx, x),
        }
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: y.len() });
        }
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("point outside the unit cube".into()));
        }
        Ok(())
    }

    fn to_internal(&self, y: &[f64], z: &mut [f64]) {
        for (zi, &o) in z.iter_mut().zip(&self.order) {
            *zi = y[o];
        }
    }

    fn to_external(&self, z: &[f64], y: &mut [f64]) {
        for (zi, &o) in z.iter().zip(&self.order) {
            y[o] = *zi;
        }
    }

    /// Evaluate the stored components (natural direction) on internal coordinates.
    fn forward_internal(&self, z: &[f64], out: &mut [f64]) {
        for j in 0..self.dim {
            out[j] = self.component(j, z).0;
        }
    }

    /// Solve the stored components on internal coordinates.
    fn solve_internal(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for j in 0..self.dim {
            let v = self.solve_component(j, &out[..j], x[j])?;
            out[j] = v;
        }
        Ok(())
    }

    /// Apply the map in its current direction, writing into `out`.
    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(y)?;
        let mut z = [0.0; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        let d = self.dim;
        self.to_internal(y, &mut z[..d]);
        if self.direction == self.natural() {
            self.forward_internal(&z[..d], &mut w[..d]);
        } else {
            self.solve_internal(&z[..d], &mut w[..d])?;
        }
        self.to_external(&w[..d], out);
        Ok(())
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(y, &mut out)?;
        Ok(out)
    }

    /// Solve `self(y) = x` for `y`.
    pub fn invert(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inverse().apply(x)
    }

    /// Diagonal partials of the map (current direction) at `y`, internal order.
    pub fn diagonal_partials(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(y)?;
        let d = self.dim;
        let mut z = [0.0; MAX_DIM];
        self.to_internal(y, &mut z[..d]);
        if self.direction == self.natural() {
            Ok((0..d).map(|j| self.component(j, &z[..d]).1).collect())
        } else {
            let mut w = [0.0; MAX_DIM];
            self.solve_internal(&z[..d], &mut w[..d])?;
            (0..d)
                .map(|j| {
                    let p = self.component(j, &w[..d]).1;
                    if p < MIN_PARTIAL {
                        Err(Error::DegenerateJacobian { axis: j + 1, value: p })
                    } else {
                        Ok(1.0 / p)
                    }
                })
                .collect()
        }
    }

    /// Jacobian determinant (product of diagonal partials).
    pub fn jacobian(&self, y: &[f64]) -> Result<f64> {
        Ok(self.diagonal_partials(y)?.iter().product())
    }

    /// `n` points `self(Z_i)` with `Z_i` uniform, keyed by `(seed, i)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointSet> {
        self.sample_stream(n, seed, streams::NOISE)
    }

    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<PointSet> {
        if self.direction != Direction::Inverse {
            return Err(Error::InvalidArgument("sampling needs a map in the generator role".into()));
        }
        let d = self.dim;
        let rng = UniformStream::new(seed, stream, d);
        let mut coords = vec![0.0; n * d];
        coords
            .par_chunks_mut(d)
            .enumerate()
            .try_for_each(|(i, out)| {
                let mut z = [0.0; MAX_DIM];
                rng.point(i as u64, &mut z[..d]);
                self.apply_into(&z[..d], out)
            })?;
        Ok(PointSet { dim: d, coords })
    }

    /// Density of the pushforward of the uniform law under this generator.
    pub fn pushforward_density(&self) -> Result<PushforwardDensity> {
        if self.direction != Direction::Inverse {
            return Err(Error::InvalidArgument(
                "pushforward density needs a map in the generator role".into(),
            ));
        }
        let bounds = match &self.components {
            Components::Identity => Some((1.0, 1.0)),
            Components::Table(t) => {
                let f = &t.levels[t.dim() - 1];
                let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = f.iter().cloned().fold(0.0, f64::max);
                Some((lo, hi))
            }
            Components::Spline(..) => self.k_bound.map(|k| {
                let d = self.dim as i32;
                (1.0 / (factorial(self.dim) * k.powi(d)), k)
            }),
        };
        if let Some((lo, _)) = bounds {
            if lo < MIN_PARTIAL {
                return Err(Error::DegenerateJacobian { axis: 0, value: lo });
            }
        }
        Ok(PushforwardDensity { base_map: self.clone(), inverse: self.inverse(), bounds })
    }

    pub fn to_descriptor(&self) -> MapDescriptor {
        let kind = match &self.components {
            Components::Identity => MapKind::Identity,
            Components::Table(t) => MapKind::Table { density: t.source.to_file() },
            Components::Spline(s, cfg) => {
                MapKind::Spline { config: (**cfg).clone(), params: s.params().to_vec() }
            }
        };
        MapDescriptor { dim: self.dim, direction: self.direction, order: self.order.clone(), kind }
    }

    pub fn from_descriptor(desc: MapDescriptor) -> Result<Self> {
        let map = match desc.kind {
            MapKind::Identity => TriangularMap::identity(desc.dim)?.with_order(&desc.order)?,
            MapKind::Table { density } => {
                // the stored density is already in internal order
                let g = GridDensity::from_file(density)?;
                let mut map = build_rosenblatt(&g)?;
                check_permutation(&desc.order, g.dim())?;
                map.order = desc.order;
                map
            }
            MapKind::Spline { config, params } => {
                let family = GeneratorFamily::new(config)?;
                family.make_generator(&params)?.with_order(&desc.order)?
            }
        };
        if map.dim != desc.dim {
            return Err(Error::DimensionMismatch { expected: desc.dim, got: map.dim });
        }
        let mut map = map;
        map.direction = desc.direction;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_descriptor()).expect("descriptor serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_descriptor(serde_json::from_str(s)?)
    }
}

/// Serializable map description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDescriptor {
    pub dim: usize,
    pub direction: Direction,
    pub order: Vec<usize>,
    pub kind: MapKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapKind {
    Identity,
    Table { density: GridDensityFile },
    Spline { config: HypothesisConfig, params: Vec<f64> },
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Rosenblatt transform of `density` in lexicographic order.
pub fn build_rosenblatt(density: &GridDensity) -> Result<TriangularMap> {
    let d = density.dim();
    Ok(TriangularMap {
        dim: d,
        direction: Direction::Forward,
        components: Components::Table(Arc::new(RosenblattTable::new(density)?)),
        order: (0..d).collect(),
        k_bound: None,
    })
}

/// Rosenblatt transform conditioning along `order` (internal axis `i` is
/// axis `order[i]` of the density).
pub fn build_rosenblatt_ordered(density: &GridDensity, order: &[usize]) -> Result<TriangularMap> {
    let permuted = density.permute_axes(order)?;
    let mut map = build_rosenblatt(&permuted)?;
    map.order = order.to_vec();
    Ok(map)
}

/// Density `x -> |J_{phi^-1}(x)|` of a generator `phi`.
#[derive(Debug, Clone)]
pub struct PushforwardDensity {
    base_map: TriangularMap,
    inverse: TriangularMap,
    bounds: Option<(f64, f64)>,
}

impl PushforwardDensity {
    pub fn base_map(&self) -> &TriangularMap {
        &self.base_map
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        self.inverse.jacobian(x)
    }
}

impl Density for PushforwardDensity {
    fn dim(&self) -> usize {
        self.base_map.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }
}

/// `n` points in `[0,1]^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// CSV with header `y1,...,yd`; values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("y{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
