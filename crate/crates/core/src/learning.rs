//! Empirical loss, minimax fits over finite nets, and Monte Carlo estimates
//! of the sampling error `sup |L_hat - L|`.
//!
//! Every sup is taken over an explicit net pair: a lattice of generators and
//! the discriminators `D_{a,b} = f_a / (f_a + f_b)` built from ordered pairs
//! of its members, plus the constant 1/2.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::bounds::{self, family_delta1_at};
use crate::density::{Density, GridDensity, MAX_DIM};
use crate::divergence::{js_from_tables, loss_from_tables, tabulate_discriminator, DiscriminatorFn, Tabulated};
use crate::error::{Error, Result};
use crate::hypothesis::{build_eps_net_capped, build_eps_net_shape, GeneratorFamily, GeneratorParams, DEFAULT_NET_CAP};
use crate::hypothesis::EpsNet;
use crate::quadrature::{pairwise_sum, EvalGrid, QuadRule};
use crate::rng::{mix_seed, streams, UniformStream};
use crate::rosenblatt::{build_rosenblatt, PointSet, PushforwardDensity, TriangularMap};

/// Quadrature grid used for theoretical losses.
pub fn learning_grid(dim: usize) -> EvalGrid {
    match dim {
        1 => EvalGrid::new(1, 1025, QuadRule::Simpson).expect("valid grid"),
        2 => EvalGrid::new(2, 129, QuadRule::Simpson).expect("valid grid"),
        _ => EvalGrid::default_for(dim),
    }
}

/// Seed of trial `t` in a Monte Carlo run.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix_seed(seed, trial as u64)
}

/// The law mu: an exact sampler together with its density.
#[derive(Debug, Clone)]
pub struct Target {
    sampler: TriangularMap,
    density: Arc<PushforwardDensity>,
}

impl Target {
    /// Target given by a grid density, sampled through its Rosenblatt map.
    pub fn from_grid(density: &GridDensity) -> Result<Self> {
        Self::from_sampler(build_rosenblatt(density)?.inverse())
    }

    /// Target given by a generator (e.g. a family member).
    pub fn from_sampler(sampler: TriangularMap) -> Result<Self> {
        let density = Arc::new(sampler.pushforward_density()?);
        Ok(Self { sampler, density })
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    pub fn sampler(&self) -> &TriangularMap {
        &self.sampler
    }

    pub fn density(&self) -> Arc<PushforwardDensity> {
        self.density.clone()
    }
}

/// Real points `Y_i ~ mu` and noise points `Z_i ~ U[0,1]^d`, regenerated
/// from `(seed, n)`; the first `m` points do not depend on `n >= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub n: usize,
    pub seed: u64,
    pub real_points: PointSet,
    pub noise_points: PointSet,
}

impl TrainingSample {
    pub fn draw(target: &Target, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let d = target.dim();
        let real_points = target.sampler.sample_stream(n, seed, streams::REAL)?;
        let rng = UniformStream::new(seed, streams::NOISE, d);
        let mut coords = vec![0.0; n * d];
        coords.par_chunks_mut(d).enumerate().for_each(|(i, out)| rng.point(i as u64, out));
        Ok(Self { n, seed, real_points, noise_points: PointSet { dim: d, coords } })
    }

    pub fn dim(&self) -> usize {
        self.real_points.dim
    }
}

fn half_mean(terms: &[f64]) -> f64 {
    0.5 * (pairwise_sum(terms) / terms.len() as f64)
}

fn check_unit(v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::DiscriminatorOutOfRange { value: v })
    }
}

/// `(1/2n) sum log D(Y_i) + (1/2n) sum log(1 - D(phi(Z_i)))`.
pub fn empirical_loss(d: &DiscriminatorFn, generator: &TriangularMap, sample: &TrainingSample) -> Result<f64> {
    let dim = sample.dim();
    if d.dim() != dim || generator.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: d.dim().min(generator.dim()) });
    }
    let real: Vec<f64> = sample
        .real_points
        .coords
        .par_chunks(dim)
        .map(|y| Ok(d.try_eval(y)?.ln()))
        .collect::<Result<_>>()?;
    let fake: Vec<f64> = sample
        .noise_points
        .coords
        .par_chunks(dim)
        .map(|z| {
            let mut x = [0.0; MAX_DIM];
            generator.apply_into(z, &mut x[..dim])?;
            Ok((1.0 - d.try_eval(&x[..dim])?).ln())
        })
        .collect::<Result<_>>()?;
    Ok(half_mean(&real) + half_mean(&fake))
}

/// Discriminator of a net pair, by generator index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscIndex {
    Half,
    Ratio(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetSpec {
    /// Covering radius in the sup-norm of the maps.
    Epsilon(f64),
    /// Lattice points per parameter.
    Shape(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetPair {
    pub epsilon: f64,
    pub generators: Vec<Vec<f64>>,
    pub discriminators: Vec<DiscIndex>,
}

impl NetPair {
    pub fn from_net(net: &EpsNet) -> Self {
        let g = net.len();
        let mut discriminators = Vec::with_capacity(g * g.saturating_sub(1) + 1);
        discriminators.push(DiscIndex::Half);
        for a in 0..g {
            for b in 0..g {
                if a != b {
                    discriminators.push(DiscIndex::Ratio(a, b));
                }
            }
        }
        Self { epsilon: net.epsilon, generators: net.members(), discriminators }
    }

    /// Both nets are capped at `cap` members.
    pub fn build(family: &GeneratorFamily, spec: &NetSpec, cap: usize) -> Result<Self> {
        let net = match spec {
            NetSpec::Epsilon(e) => build_eps_net_capped(family, *e, cap)?,
            NetSpec::Shape(s) => build_eps_net_shape(family, s, cap)?,
        };
        let g = net.len() as u128;
        let nd = g * (g - 1) + 1;
        if nd > cap as u128 {
            return Err(Error::NetTooLarge { cardinality: nd, cap });
        }
        Ok(Self::from_net(&net))
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_discriminators(&self) -> usize {
        self.discriminators.len()
    }
}

/// Per-generator inner maximizer over the discriminator net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowMax {
    pub value: f64,
    pub argmax: usize,
}

fn row_max(row: &[f64]) -> RowMax {
    let mut best = RowMax { value: f64::NEG_INFINITY, argmax: 0 };
    for (i, &v) in row.iter().enumerate() {
        if v > best.value {
            best = RowMax { value: v, argmax: i };
        }
    }
    best
}

fn argmin_by<F: Fn(usize) -> f64>(n: usize, f: F) -> usize {
    let mut best = 0;
    for i in 1..n {
        if f(i) < f(best) {
            best = i;
        }
    }
    best
}

/// `V(phi) = max_D L` vs `V_hat(phi) = max_D L_hat` on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Empirical minimax generator.
    pub phi_hat: usize,
    /// Minimizer of the net-restricted theoretical value.
    pub phi_star: usize,
    /// `V(phi_hat) - V(phi_star)`.
    pub excess: f64,
    /// `max |L_hat - L|` over the net pair.
    pub sampling_error: f64,
}

impl Decomposition {
    pub fn holds(&self) -> bool {
        self.excess >= 0.0 && self.excess <= 2.0 * self.sampling_error
    }
}

/// A net pair with theoretical losses precomputed by quadrature.
#[derive(Debug, Clone)]
pub struct NetEvaluator {
    family: GeneratorFamily,
    target: Target,
    grid: EvalGrid,
    pair: NetPair,
    generators: Vec<TriangularMap>,
    densities: Vec<Arc<PushforwardDensity>>,
    target_table: Tabulated,
    generator_tables: Vec<Tabulated>,
    theory: Vec<f64>,
}

impl NetEvaluator {
    pub fn new(family: &GeneratorFamily, target: &Target, pair: NetPair) -> Result<Self> {
        Self::with_grid(family, target, pair, learning_grid(family.dim()))
    }

    pub fn with_grid(family: &GeneratorFamily, target: &Target, pair: NetPair, grid: EvalGrid) -> Result<Self> {
        if target.dim() != family.dim() {
            return Err(Error::DimensionMismatch { expected: family.dim(), got: target.dim() });
        }
        if pair.generators.is_empty() {
            return Err(Error::InvalidArgument("empty generator net".into()));
        }
        let g = pair.generators.len();
        for d in &pair.discriminators {
            if let DiscIndex::Ratio(a, b) = *d {
                if a >= g || b >= g || a == b {
                    return Err(Error::InvalidArgument(format!("bad discriminator index ({a}, {b})")));
                }
            }
        }
        let generators =
            pair.generators.iter().map(|p| family.make_generator(p)).collect::<Result<Vec<_>>>()?;
        let densities = generators
            .iter()
            .map(|m| Ok(Arc::new(m.pushforward_density()?)))
            .collect::<Result<Vec<_>>>()?;
        let target_table = Tabulated::new(target.density.as_ref(), &grid)?;
        let generator_tables =
            densities.iter().map(|f| Tabulated::new(f.as_ref(), &grid)).collect::<Result<Vec<_>>>()?;
        let mut eval = Self {
            family: family.clone(),
            target: target.clone(),
            grid,
            pair,
            generators,
            densities,
            target_table,
            generator_tables,
            theory: Vec::new(),
        };
        let nd = eval.pair.discriminators.len();
        let dvals = (0..nd)
            .map(|k| tabulate_discriminator(&eval.discriminator(k)?, &eval.grid))
            .collect::<Result<Vec<_>>>()?;
        let mut theory = vec![0.0; g * nd];
        for (gi, tab) in eval.generator_tables.iter().enumerate() {
            for (k, dv) in dvals.iter().enumerate() {
                theory[gi * nd + k] = loss_from_tables(&eval.target_table, tab, dv, &eval.grid);
            }
        }
        eval.theory = theory;
        Ok(eval)
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn pair(&self) -> &NetPair {
        &self.pair
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    pub fn generator(&self, g: usize) -> &TriangularMap {
        &self.generators[g]
    }

    /// Discriminator `k` of the net as a function.
    pub fn discriminator(&self, k: usize) -> Result<DiscriminatorFn> {
        let (lo, hi) = self.family.discriminator_bounds();
        match self.pair.discriminators[k] {
            DiscIndex::Half => DiscriminatorFn::constant(0.5, lo, hi, self.family.dim()),
            DiscIndex::Ratio(a, b) => {
                let fa: Arc<dyn Density> = self.densities[a].clone();
                let fb: Arc<dyn Density> = self.densities[b].clone();
                Ok(DiscriminatorFn::ratio(fa, fb, lo, hi))
            }
        }
    }

    /// Theoretical losses `L(phi_g, D_k)`, generator-major.
    pub fn theoretical(&self) -> &[f64] {
        &self.theory
    }

    /// `d_JS(f_mu, f_g)` on the evaluation grid.
    pub fn js_to_target(&self, g: usize) -> f64 {
        js_from_tables(&self.target_table, &self.generator_tables[g], &self.grid)
    }

    fn density_values(&self, points: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.family.dim();
        self.densities
            .iter()
            .map(|f| points.par_chunks(d).map(|x| f.try_eval(x)).collect::<Result<Vec<_>>>())
            .collect()
    }

    fn log_terms(&self, k: usize, dens: &[Vec<f64>], n: usize, fake: bool) -> Result<Vec<f64>> {
        match self.pair.discriminators[k] {
            DiscIndex::Half => Ok(vec![0.5f64.ln(); n]),
            DiscIndex::Ratio(a, b) => (0..n)
                .map(|i| {
                    let (fa, fb) = (dens[a][i], dens[b][i]);
                    let v = check_unit(fa / (fa + fb))?;
                    Ok(if fake { (1.0 - v).ln() } else { v.ln() })
                })
                .collect(),
        }
    }

    /// Empirical losses `L_hat(phi_g, D_k)` on `sample`, generator-major.
    /// Each entry equals [`empirical_loss`] for the same pair bit for bit.
    pub fn empirical(&self, sample: &TrainingSample) -> Result<Vec<f64>> {
        let d = self.family.dim();
        if sample.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: sample.dim() });
        }
        let n = sample.n;
        let nd = self.pair.discriminators.len();
        let real_dens = self.density_values(&sample.real_points.coords)?;
        let real_half = (0..nd)
            .into_par_iter()
            .map(|k| Ok(half_mean(&self.log_terms(k, &real_dens, n, false)?)))
            .collect::<Result<Vec<f64>>>()?;
        let mut out = Vec::with_capacity(self.generators.len() * nd);
        for gen in &self.generators {
            let mut pts = vec![0.0; n * d];
            pts.par_chunks_mut(d)
                .zip(sample.noise_points.coords.par_chunks(d))
                .try_for_each(|(x, z)| gen.apply_into(z, x))?;
            let dens = self.density_values(&pts)?;
            let row = (0..nd)
                .into_par_iter()
                .map(|k| Ok(real_half[k] + half_mean(&self.log_terms(k, &dens, n, true)?)))
                .collect::<Result<Vec<f64>>>()?;
            out.extend(row);
        }
        Ok(out)
    }

    /// `max |L_hat - L|` over the net pair.
    pub fn sampling_error(&self, empirical: &[f64]) -> f64 {
        empirical.iter().zip(&self.theory).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max)
    }

    /// Inner maxima per generator of a generator-major loss table.
    pub fn inner_max(&self, table: &[f64]) -> Vec<RowMax> {
        table.chunks(self.pair.discriminators.len()).map(row_max).collect()
    }

    pub fn decompose(&self, empirical: &[f64]) -> Decomposition {
        let v_hat = self.inner_max(empirical);
        let v = self.inner_max(&self.theory);
        let phi_hat = argmin_by(v_hat.len(), |i| v_hat[i].value);
        let phi_star = argmin_by(v.len(), |i| v[i].value);
        Decomposition {
            phi_hat,
            phi_star,
            excess: v[phi_hat].value - v[phi_star].value,
            sampling_error: self.sampling_error(empirical),
        }
    }

    fn disc_params(&self, k: usize) -> DiscriminatorParams {
        let m = &self.pair.generators;
        match self.pair.discriminators[k] {
            DiscIndex::Half => DiscriminatorParams { a: m[0].clone(), b: m[0].clone() },
            DiscIndex::Ratio(a, b) => DiscriminatorParams { a: m[a].clone(), b: m[b].clone() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NetExhaustive,
    AlternatingGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub max_iter: usize,
    pub step: f64,
    /// Stop when the projected gradient norm drops below this.
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self { max_iter: 60, step: 0.5, tol: 1e-4, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub strategy: Strategy,
    pub net: NetSpec,
    pub net_cap: usize,
    pub gradient: GradientOptions,
}

impl FitOptions {
    pub fn net(spec: NetSpec) -> Self {
        Self { strategy: Strategy::NetExhaustive, net: spec, net_cap: DEFAULT_NET_CAP, gradient: GradientOptions::default() }
    }

    pub fn gradient(options: GradientOptions) -> Self {
        Self {
            strategy: Strategy::AlternatingGradient,
            net: NetSpec::Shape(Vec::new()),
            net_cap: DEFAULT_NET_CAP,
            gradient: options,
        }
    }
}

/// `D_{a,b}`; `a == b` is the constant 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerValue {
    pub generator: Vec<f64>,
    pub value: f64,
    pub maximizer: DiscriminatorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult {
    pub strategy: Strategy,
    pub n: usize,
    pub seed: u64,
    pub best_generator: GeneratorParams,
    pub inner_maximizer: DiscriminatorParams,
    pub inner_values: Vec<InnerValue>,
    /// `L_hat` at the returned generator and its inner maximizer.
    pub achieved_value: f64,
    pub js_to_target: f64,
    pub net_epsilon: Option<f64>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    /// Final projected gradient norm (gradient mode).
    pub gradient_norm: Option<f64>,
}

/// Exact min-max of `L_hat` over the evaluator's net pair.
pub fn net_minimax(eval: &NetEvaluator, sample: &TrainingSample) -> Result<MinimaxResult> {
    let emp = eval.empirical(sample)?;
    let rows = eval.inner_max(&emp);
    let best = argmin_by(rows.len(), |i| rows[i].value);
    let gens = &eval.pair.generators;
    let inner_values = rows
        .iter()
        .zip(gens)
        .map(|(r, g)| InnerValue { generator: g.clone(), value: r.value, maximizer: eval.disc_params(r.argmax) })
        .collect();
    Ok(MinimaxResult {
        strategy: Strategy::NetExhaustive,
        n: sample.n,
        seed: sample.seed,
        best_generator: eval.family.generator_params(&gens[best])?,
        inner_maximizer: eval.disc_params(rows[best].argmax),
        inner_values,
        achieved_value: rows[best].value,
        js_to_target: eval.js_to_target(best),
        net_epsilon: Some(eval.pair.epsilon),
        trace: Vec::new(),
        converged: true,
        gradient_norm: None,
    })
}

pub fn minimax_fit(
    family: &GeneratorFamily,
    target: &Target,
    sample: &TrainingSample,
    options: &FitOptions,
) -> Result<MinimaxResult> {
    match options.strategy {
        Strategy::NetExhaustive => {
            let pair = NetPair::build(family, &options.net, options.net_cap)?;
            net_minimax(&NetEvaluator::new(family, target, pair)?, sample)
        }
        Strategy::AlternatingGradient => gradient_fit(family, target, sample, &options.gradient),
    }
}

fn gradient_fit(
    family: &GeneratorFamily,
    target: &Target,
    sample: &TrainingSample,
    opts: &GradientOptions,
) -> Result<MinimaxResult> {
    if !(opts.step > 0.0) || !(opts.fd_step > 0.0) {
        return Err(Error::InvalidArgument("step sizes must be positive".into()));
    }
    let p = family.n_params();
    let pbox: Vec<(f64, f64)> = family.param_box().repeat(3);
    let objective = |x: &[f64]| -> Result<f64> {
        let gen = family.make_generator(&x[..p])?;
        let disc = family.make_discriminator(&x[p..2 * p], &x[2 * p..])?;
        empirical_loss(&disc, &gen, sample)
    };
    let project = |x: &mut [f64]| {
        for (v, &(lo, hi)) in x.iter_mut().zip(&pbox) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut x: Vec<f64> = family.neutral_params().repeat(3);
    let mut step = opts.step;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let value = objective(&x)?;
        // descent in the generator block, ascent in the discriminator blocks
        let dir = (0..3 * p)
            .into_par_iter()
            .map(|i| {
                let (lo, hi) = pbox[i];
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] = (x[i] + opts.fd_step).min(hi);
                xm[i] = (x[i] - opts.fd_step).max(lo);
                let g = (objective(&xp)? - objective(&xm)?) / (xp[i] - xm[i]);
                Ok(if i < p { -g } else { g })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut moved: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
        project(&mut moved);
        grad_norm = moved.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        trace.push(TraceEntry { iter, value, grad_norm, step });
        if grad_norm < opts.tol {
            converged = true;
            break;
        }
        let mut halvings = 0;
        let next = loop {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let inside = cand.iter().zip(&pbox).all(|(v, &(lo, hi))| (lo..=hi).contains(v));
            if inside || halvings == 4 {
                break cand;
            }
            step *= 0.5;
            halvings += 1;
        };
        x = next;
        project(&mut x);
    }
    let achieved_value = objective(&x)?;
    let gen = family.make_generator(&x[..p])?;
    let grid = learning_grid(family.dim());
    let js = js_from_tables(
        &Tabulated::new(target.density.as_ref(), &grid)?,
        &Tabulated::new(&gen.pushforward_density()?, &grid)?,
        &grid,
    );
    let maximizer = DiscriminatorParams { a: x[p..2 * p].to_vec(), b: x[2 * p..].to_vec() };
    Ok(MinimaxResult {
        strategy: Strategy::AlternatingGradient,
        n: sample.n,
        seed: sample.seed,
        best_generator: family.generator_params(&x[..p])?,
        inner_maximizer: maximizer.clone(),
        inner_values: vec![InnerValue { generator: x[..p].to_vec(), value: achieved_value, maximizer }],
        achieved_value,
        js_to_target: js,
        net_epsilon: None,
        trace,
        converged,
        gradient_norm: Some(grad_norm),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub n: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub values: Vec<f64>,
}

fn summarize(n: usize, epsilon: f64, values: Vec<f64>) -> SamplingSummary {
    let mean = values.iter().mean();
    let std = if values.len() > 1 { values.iter().std_dev() } else { 0.0 };
    let mut data = Data::new(values.clone());
    SamplingSummary {
        n,
        trials: values.len(),
        epsilon,
        mean,
        std,
        q05: data.quantile(0.05),
        q50: data.quantile(0.5),
        q95: data.quantile(0.95),
        values,
    }
}

fn per_trial<T: Send, F>(trials: usize, seed: u64, n: usize, eval: &NetEvaluator, f: F) -> Result<Vec<T>>
where
    F: Fn(&[f64]) -> T + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = TrainingSample::draw(&eval.target, n, trial_seed(seed, t))?;
            Ok(f(&eval.empirical(&sample)?))
        })
        .collect()
}

/// Monte Carlo distribution of the net sampling error at sample size `n`.
pub fn estimate_sampling_error(eval: &NetEvaluator, n: usize, trials: usize, seed: u64) -> Result<SamplingSummary> {
    let values = per_trial(trials, seed, n, eval, |emp| eval.sampling_error(emp))?;
    Ok(summarize(n, eval.pair.epsilon, values))
}

/// Error decomposition on each of `trials` fresh samples.
pub fn error_decomposition_trials(eval: &NetEvaluator, n: usize, trials: usize, seed: u64) -> Result<Vec<Decomposition>> {
    per_trial(trials, seed, n, eval, |emp| eval.decompose(emp))
}

fn default_delta() -> f64 {
    0.1
}

fn default_c1_star() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `K_n = max(K, log^beta n)` when set; fixed K otherwise.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub exact_integral: bool,
    #[serde(default = "default_c1_star")]
    pub c1_star: f64,
}

impl RateOptions {
    pub fn new(n_grid: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self { n_grid, trials, seed, delta: 0.1, beta: None, exact_integral: false, c1_star: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    #[serde(rename = "K")]
    pub k_bound: f64,
    pub bound_c_over_sqrt_n: Option<f64>,
    pub thm54_threshold: Option<f64>,
    pub thm54_probability: Option<f64>,
    pub thm54_log_probability: Option<f64>,
    pub exceed_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of log(mean) against log(n).
    pub slope: Option<f64>,
    pub regularity_ok: bool,
    pub epsilon: f64,
    pub n_generators: usize,
    pub n_discriminators: usize,
    pub delta: f64,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `log y` on `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn rate_experiment(eval: &NetEvaluator, opts: &RateOptions) -> Result<RateReport> {
    if opts.n_grid.is_empty() {
        return Err(Error::InvalidArgument("n_grid is empty".into()));
    }
    let cfg = eval.family.config();
    let (d, alpha, k) = (cfg.dim, cfg.alpha, cfg.k);
    let regularity_ok = cfg.regularity_ok();
    let mut warnings = Vec::new();
    if !regularity_ok {
        warnings.push(format!("k = {k} <= 1 - alpha + d/2: bound comparison suppressed"));
    }
    let mut rows = Vec::with_capacity(opts.n_grid.len());
    for &n in &opts.n_grid {
        let s = estimate_sampling_error(eval, n, opts.trials, opts.seed)?;
        let k_bound = match opts.beta {
            Some(beta) if n > 1 => cfg.k_bound.max(bounds::k_schedule(n as f64, beta)?),
            _ => cfg.k_bound,
        };
        let (bound, thm) = if regularity_ok {
            let delta1 = family_delta1_at(&eval.family, k_bound);
            let c = bounds::full_c(d, alpha, k, k_bound, delta1, opts.exact_integral, opts.c1_star)?;
            let thm = bounds::thm54_threshold_and_prob(
                d, alpha, k, k_bound, n as u64, opts.delta, delta1, opts.c1_star,
            )?;
            (Some(c / (n as f64).sqrt()), Some(thm))
        } else {
            (None, None)
        };
        let exceed_frac = thm.map(|t| {
            s.values.iter().filter(|&&v| v > t.threshold).count() as f64 / s.values.len() as f64
        });
        rows.push(RateRow {
            n,
            trials: s.trials,
            mean: s.mean,
            std: s.std,
            q05: s.q05,
            q50: s.q50,
            q95: s.q95,
            k_bound,
            bound_c_over_sqrt_n: bound,
            thm54_threshold: thm.map(|t| t.threshold),
            thm54_probability: thm.map(|t| t.probability),
            thm54_log_probability: thm.map(|t| t.log_probability),
            exceed_frac,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let slope = loglog_slope(&ns, &means);
    if slope.is_none() {
        warnings.push("slope undefined: fewer than two sample sizes".into());
    }
    Ok(RateReport {
        rows,
        slope,
        regularity_ok,
        epsilon: eval.pair.epsilon,
        n_generators: eval.pair.n_generators(),
        n_discriminators: eval.pair.n_discriminators(),
        delta: opts.delta,
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RateReport {
    pub const CSV_HEADER: &'static str =
        "n,trials,mean,std,q05,q50,q95,bound_C_over_sqrt_n,thm54_threshold,exceed_frac";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.trials,
                r.mean,
                r.std,
                r.q05,
                r.q50,
                r.q95,
                opt(r.bound_c_over_sqrt_n),
                opt(r.thm54_threshold),
                opt(r.exceed_frac)
            );
        }
        s
    }

    /// Log-log plot: mean with one-std error bars and the `C / sqrt(n)` envelope.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let mut ys: Vec<f64> = self.rows.iter().flat_map(|r| [r.mean - r.std, r.mean + r.std, r.mean]).collect();
        ys.extend(self.rows.iter().filter_map(|r| r.bound_c_over_sqrt_n));
        let ys: Vec<f64> = ys.into_iter().filter(|y| *y > 0.0 && y.is_finite()).map(f64::log10).collect();
        let xs: Vec<f64> = self.rows.iter().map(|r| (r.n as f64).log10()).collect();
        let range = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi > lo {
                (lo, hi)
            } else if lo.is_finite() {
                (lo - 0.5, lo + 0.5)
            } else {
                (0.0, 1.0)
            }
        };
        let (x0, x1) = range(&xs);
        let (y0, y1) = range(&ys);
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y.max(1e-300).log10() - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<path d="M{pad} {pad} V{:.2} H{:.2}" stroke="black" fill="none"/>"#,
            h - pad,
            w - pad
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">log10 n</text>"#, w / 2.0, h - 15.0);
        let _ = writeln!(
            s,
            r#"<text x="15" y="{:.2}" font-size="13" transform="rotate(-90 15 {:.2})" text-anchor="middle">log10 sampling error</text>"#,
            h / 2.0,
            h / 2.0
        );
        for (x, label) in [(x0, x0), (x1, x1)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label:.2}</text>"#, px(x), h - pad + 16.0);
        }
        for y in [y0, y1] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{y:.2}</text>"#, pad - 4.0, py(10f64.powf(y)) + 4.0);
        }
        let env: Vec<String> = self
            .rows
            .iter()
            .filter_map(|r| r.bound_c_over_sqrt_n.map(|b| format!("{:.2},{:.2}", px((r.n as f64).log10()), py(b))))
            .collect();
        if env.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" stroke="red" stroke-dasharray="6 4" fill="none"/>"#, env.join(" "));
        }
        let pts: Vec<String> =
            self.rows.iter().map(|r| format!("{:.2},{:.2}", px((r.n as f64).log10()), py(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" fill="none"/>"#, pts.join(" "));
        for r in &self.rows {
            let x = px((r.n as f64).log10());
            let lo = (r.mean - r.std).max(r.mean * 1e-3);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="steelblue"/>"#,
                py(lo),
                py(r.mean + r.std)
            );
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, py(r.mean));
        }
        let slope = self.slope.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">slope {slope}</text>"#, w - pad - 90.0, pad - 20.0);
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::HypothesisConfig;

    fn family() -> GeneratorFamily {
        GeneratorFamily::new(HypothesisConfig::bernstein(1, 3, 0.5, 2.0, 2)).unwrap()
    }

    fn setup(g: usize) -> (GeneratorFamily, NetEvaluator) {
        let f = family();
        let pair = NetPair::build(&f, &NetSpec::Shape(vec![g]), 1000).unwrap();
        let target = Target::from_sampler(f.make_generator(&pair.generators[1.min(g - 1)]).unwrap()).unwrap();
        let eval = NetEvaluator::new(&f, &target, pair).unwrap();
        (f, eval)
    }

    #[test]
    fn constant_half_gives_minus_log_two() {
        let target = Target::from_grid(&GridDensity::uniform(1, 33).unwrap()).unwrap();
        let s = TrainingSample::draw(&target, 257, 3).unwrap();
        let d = DiscriminatorFn::constant(0.5, 0.2, 0.8, 1).unwrap();
        let v = empirical_loss(&d, &TriangularMap::identity(1).unwrap(), &s).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_point_hand_value() {
        let target = Target::from_grid(&GridDensity::uniform(1, 33).unwrap()).unwrap();
        let s = TrainingSample::draw(&target, 1, 11).unwrap();
        let y = s.real_points.coords[0];
        let f: Arc<crate::divergence::EvalFn> = Arc::new(move |x: &[f64]| if x[0] == y { 0.2 } else { 0.8 });
        let d = DiscriminatorFn::custom(1, f, 0.1, 0.9).unwrap();
        let v = empirical_loss(&d, &TriangularMap::identity(1).unwrap(), &s).unwrap();
        assert!((v - 0.2f64.ln()).abs() < 1e-15);
        assert!((v + 1.60944).abs() < 1e-5);
    }

    #[test]
    fn out_of_range_discriminator_rejected() {
        let target = Target::from_grid(&GridDensity::uniform(1, 33).unwrap()).unwrap();
        let s = TrainingSample::draw(&target, 4, 1).unwrap();
        let f: Arc<crate::divergence::EvalFn> = Arc::new(|_: &[f64]| 1.0);
        let d = DiscriminatorFn::custom(1, f, 0.1, 0.9).unwrap();
        let r = empirical_loss(&d, &TriangularMap::identity(1).unwrap(), &s);
        assert!(matches!(r, Err(Error::DiscriminatorOutOfRange { .. })));
    }

    #[test]
    fn samples_are_deterministic_prefixes() {
        let (_, eval) = setup(3);
        let a = TrainingSample::draw(eval.target(), 50, 9).unwrap();
        let b = TrainingSample::draw(eval.target(), 80, 9).unwrap();
        assert_eq!(a, TrainingSample::draw(eval.target(), 50, 9).unwrap());
        assert_eq!(a.real_points.coords[..], b.real_points.coords[..50]);
        assert_eq!(a.noise_points.coords[..], b.noise_points.coords[..50]);
        assert!(b.real_points.coords.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cached_table_matches_empirical_loss() {
        let (_, eval) = setup(3);
        let s = TrainingSample::draw(eval.target(), 300, 4).unwrap();
        let emp = eval.empirical(&s).unwrap();
        let nd = eval.pair().n_discriminators();
        assert_eq!(nd, 7);
        for g in 0..3 {
            for k in 0..nd {
                let v = empirical_loss(&eval.discriminator(k).unwrap(), eval.generator(g), &s).unwrap();
                assert_eq!(v.to_bits(), emp[g * nd + k].to_bits(), "{g} {k}");
            }
        }
    }

    #[test]
    fn empirical_mean_is_close_to_theory() {
        let (_, eval) = setup(3);
        let nd = eval.pair().n_discriminators();
        let idx = 2 * nd + 3;
        let vals: Vec<f64> = (0..60)
            .map(|t| eval.empirical(&TrainingSample::draw(eval.target(), 400, t).unwrap()).unwrap()[idx])
            .collect();
        let m = vals.iter().mean();
        let sd = vals.iter().std_dev();
        let l = eval.theoretical()[idx];
        assert!((m - l).abs() <= 3.5 * sd / (60f64).sqrt(), "{m} {l} {sd}");
    }

    #[test]
    fn decomposition_holds() {
        let (_, eval) = setup(4);
        for dec in error_decomposition_trials(&eval, 200, 20, 5).unwrap() {
            assert!(dec.holds(), "{dec:?}");
        }
    }

    #[test]
    fn uniform_target_single_member_is_identity() {
        let f = family();
        let target = Target::from_grid(&GridDensity::uniform(1, 65).unwrap()).unwrap();
        let s = TrainingSample::draw(&target, 100, 2).unwrap();
        let r = minimax_fit(&f, &target, &s, &FitOptions::net(NetSpec::Shape(vec![1]))).unwrap();
        assert_eq!(r.best_generator.coefficients, vec![0.0]);
        assert!(r.js_to_target < 1e-8);
        assert!((r.achieved_value + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn minimax_value_invariant_under_reordering() {
        let (f, eval) = setup(4);
        let s = TrainingSample::draw(eval.target(), 150, 8).unwrap();
        let base = net_minimax(&eval, &s).unwrap();
        let mut pair = eval.pair().clone();
        let perm = [2usize, 0, 3, 1];
        let inv = [1usize, 3, 0, 2];
        pair.generators = perm.iter().map(|&i| eval.pair().generators[i].clone()).collect();
        pair.discriminators = eval
            .pair()
            .discriminators
            .iter()
            .rev()
            .map(|d| match *d {
                DiscIndex::Half => DiscIndex::Half,
                DiscIndex::Ratio(a, b) => DiscIndex::Ratio(inv[a], inv[b]),
            })
            .collect();
        let other = net_minimax(&NetEvaluator::new(&f, eval.target(), pair).unwrap(), &s).unwrap();
        assert_eq!(base.achieved_value, other.achieved_value);
        assert_eq!(base.best_generator, other.best_generator);
    }

    #[test]
    fn achieved_value_matches_returned_pair() {
        let (f, eval) = setup(3);
        let s = TrainingSample::draw(eval.target(), 200, 1).unwrap();
        let r = net_minimax(&eval, &s).unwrap();
        let g = f.make_generator(&r.best_generator.coefficients).unwrap();
        let d = f.make_discriminator(&r.inner_maximizer.a, &r.inner_maximizer.b).unwrap();
        let v = empirical_loss(&d, &g, &s).unwrap();
        assert!((v - r.achieved_value).abs() < 1e-12);
        assert!(r.js_to_target >= 0.0);
    }

    #[test]
    fn gradient_mode_is_feasible_and_consistent() {
        let (f, eval) = setup(3);
        let s = TrainingSample::draw(eval.target(), 300, 6).unwrap();
        let opts = GradientOptions { max_iter: 8, ..GradientOptions::default() };
        let r = minimax_fit(&f, eval.target(), &s, &FitOptions::gradient(opts)).unwrap();
        f.check_params(&r.best_generator.coefficients).unwrap();
        assert!(!r.trace.is_empty());
        assert!(r.gradient_norm.unwrap().is_finite());
        let g = f.make_generator(&r.best_generator.coefficients).unwrap();
        let d = f.make_discriminator(&r.inner_maximizer.a, &r.inner_maximizer.b).unwrap();
        assert!((empirical_loss(&d, &g, &s).unwrap() - r.achieved_value).abs() < 1e-12);
        assert!(r.js_to_target >= 0.0);
    }

    #[test]
    fn sampling_error_is_reproducible_and_decreasing() {
        let (_, eval) = setup(3);
        let a = estimate_sampling_error(&eval, 100, 1, 42).unwrap();
        let b = estimate_sampling_error(&eval, 100, 1, 42).unwrap();
        assert_eq!(a.values[0].to_bits(), b.values[0].to_bits());
        let small = estimate_sampling_error(&eval, 100, 20, 1).unwrap();
        let large = estimate_sampling_error(&eval, 10_000, 20, 1).unwrap();
        assert!(large.mean < small.mean);
    }

    #[test]
    fn rate_report_outputs() {
        let (_, eval) = setup(3);
        let single = rate_experiment(&eval, &RateOptions::new(vec![64], 3, 1)).unwrap();
        assert!(single.slope.is_none());
        assert!(!single.warnings.is_empty());
        let r = rate_experiment(&eval, &RateOptions::new(vec![64, 256], 3, 1)).unwrap();
        assert!(r.slope.is_some() && r.regularity_ok);
        let csv = r.to_csv();
        assert!(csv.starts_with(RateReport::CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
        assert!(r.rows.iter().all(|row| row.mean <= row.bound_c_over_sqrt_n.unwrap()));
        let svg = r.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
