//! KL and JS divergences, the theoretical GAN loss and the optimal
//! discriminator, all by tensor quadrature on an [`EvalGrid`].
//!
//! Densities are renormalized to unit quadrature mass on the evaluation grid
//! before any integral is taken, so the loss/JS identity holds to rounding
//! instead of to quadrature error.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, EvalGrid};

pub type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Constant(f64),
    /// `(a / sa) / (a / sa + b / sb)`.
    Ratio { a: Arc<dyn Density>, b: Arc<dyn Density>, sa: f64, sb: f64 },
    Custom(Arc<EvalFn>),
}

/// A discriminator `[0,1]^d -> (0,1)` with recorded range bounds.
#[derive(Clone)]
pub struct DiscriminatorFn {
    dim: usize,
    kind: Kind,
    lower: f64,
    upper: f64,
}

impl fmt::Debug for DiscriminatorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Constant(v) => format!("constant({v})"),
            Kind::Ratio { .. } => "ratio".to_string(),
            Kind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("DiscriminatorFn")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

fn check_range(lower: f64, upper: f64) -> Result<()> {
    if !(lower > 0.0 && lower <= upper && upper < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discriminator bounds [{lower}, {upper}] must lie inside (0, 1)"
        )));
    }
    Ok(())
}

impl DiscriminatorFn {
    pub fn constant(value: f64, lower: f64, upper: f64, dim: usize) -> Result<Self> {
        check_range(lower, upper)?;
        if !(lower..=upper).contains(&value) {
            return Err(Error::DiscriminatorOutOfRange { value });
        }
        Ok(Self { dim, kind: Kind::Constant(value), lower, upper })
    }

    /// `f_a / (f_a + f_b)`.
    pub fn ratio(a: Arc<dyn Density>, b: Arc<dyn Density>, lower: f64, upper: f64) -> Self {
        Self { dim: a.dim(), kind: Kind::Ratio { a, b, sa: 1.0, sb: 1.0 }, lower, upper }
    }

    pub fn custom(dim: usize, f: Arc<EvalFn>, lower: f64, upper: f64) -> Result<Self> {
        check_range(lower, upper)?;
        Ok(Self { dim, kind: Kind::Custom(f), lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Constant(v) => *v,
            Kind::Ratio { a, b, sa, sb } => {
                let fa = a.eval(x) / sa;
                let fb = b.eval(x) / sb;
                fa / (fa + fb)
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// Value at `x`, rejecting anything outside the open unit interval.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x);
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(Error::DiscriminatorOutOfRange { value: v })
        }
    }
}

/// Density values on an evaluation grid, rescaled to unit quadrature mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub values: Vec<f64>,
    /// Quadrature mass before rescaling.
    pub raw_mass: f64,
}

impl Tabulated {
    pub fn new(f: &dyn Density, grid: &EvalGrid) -> Result<Self> {
        if f.dim() != grid.dim {
            return Err(Error::DimensionMismatch { expected: grid.dim, got: f.dim() });
        }
        let d = grid.dim;
        let n = grid.len();
        let raw: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 8];
                let w = grid.point(i, &mut x[..d]);
                (f.eval(&x[..d]), w)
            })
            .collect();
        for (index, &(v, _)) in raw.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveDensity { index, value: v });
            }
        }
        let terms: Vec<f64> = raw.iter().map(|(v, w)| v * w).collect();
        let raw_mass = pairwise_sum(&terms);
        Ok(Self { values: raw.iter().map(|(v, _)| v / raw_mass).collect(), raw_mass })
    }
}

fn weights(grid: &EvalGrid) -> Vec<f64> {
    let d = grid.dim;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 8];
            grid.point(i, &mut x[..d])
        })
        .collect()
}

fn integrate<F: Fn(usize) -> f64 + Sync>(grid: &EvalGrid, term: F) -> f64 {
    let w = weights(grid);
    let terms: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| w[i] * term(i)).collect();
    pairwise_sum(&terms)
}

pub fn kl_from_tables(f: &Tabulated, g: &Tabulated, grid: &EvalGrid) -> f64 {
    integrate(grid, |i| {
        let (a, b) = (f.values[i], g.values[i]);
        a * (a / b).ln()
    })
}

pub fn js_from_tables(f: &Tabulated, g: &Tabulated, grid: &EvalGrid) -> f64 {
    integrate(grid, |i| {
        let (a, b) = (f.values[i], g.values[i]);
        let m = 0.5 * (a + b);
        0.5 * (a * (a / m).ln() + b * (b / m).ln())
    })
}

fn check_dims(f: &dyn Density, g: &dyn Density) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    Ok(())
}

pub fn kl_divergence_on(f: &dyn Density, g: &dyn Density, grid: &EvalGrid) -> Result<f64> {
    check_dims(f, g)?;
    Ok(kl_from_tables(&Tabulated::new(f, grid)?, &Tabulated::new(g, grid)?, grid))
}

/// `int f log(f/g)` on the default evaluation grid.
pub fn kl_divergence(f: &dyn Density, g: &dyn Density) -> Result<f64> {
    kl_divergence_on(f, g, &EvalGrid::default_for(f.dim()))
}

pub fn js_divergence_on(f: &dyn Density, g: &dyn Density, grid: &EvalGrid) -> Result<f64> {
    check_dims(f, g)?;
    Ok(js_from_tables(&Tabulated::new(f, grid)?, &Tabulated::new(g, grid)?, grid))
}

/// Jensen-Shannon divergence on the default evaluation grid.
pub fn js_divergence(f: &dyn Density, g: &dyn Density) -> Result<f64> {
    js_divergence_on(f, g, &EvalGrid::default_for(f.dim()))
}

/// `D = f_mu / (f_mu + f_phi)` for the grid-normalized densities.
pub fn optimal_discriminator_on(
    f_mu: Arc<dyn Density>,
    f_phi: Arc<dyn Density>,
    grid: &EvalGrid,
) -> Result<DiscriminatorFn> {
    check_dims(f_mu.as_ref(), f_phi.as_ref())?;
    let sa = Tabulated::new(f_mu.as_ref(), grid)?.raw_mass;
    let sb = Tabulated::new(f_phi.as_ref(), grid)?.raw_mass;
    let (lower, upper) = match (f_mu.bounds(), f_phi.bounds()) {
        (Some((lm, hm)), Some((lp, hp))) => {
            let (lm, hm, lp, hp) = (lm / sa, hm / sa, lp / sb, hp / sb);
            (lm / (lm + hp), hm / (hm + lp))
        }
        _ => (f64::MIN_POSITIVE, 1.0 - f64::EPSILON),
    };
    Ok(DiscriminatorFn { dim: f_mu.dim(), kind: Kind::Ratio { a: f_mu, b: f_phi, sa, sb }, lower, upper })
}

pub fn optimal_discriminator(f_mu: Arc<dyn Density>, f_phi: Arc<dyn Density>) -> Result<DiscriminatorFn> {
    let grid = EvalGrid::default_for(f_mu.dim());
    optimal_discriminator_on(f_mu, f_phi, &grid)
}

/// Discriminator values on the grid, checked to lie in (0, 1).
pub fn tabulate_discriminator(d: &DiscriminatorFn, grid: &EvalGrid) -> Result<Vec<f64>> {
    let dim = grid.dim;
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 8];
            grid.point(i, &mut x[..dim]);
            d.eval(&x[..dim])
        })
        .collect();
    if let Some(&v) = vals.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::DiscriminatorOutOfRange { value: v });
    }
    Ok(vals)
}

pub fn loss_from_tables(f_mu: &Tabulated, f_phi: &Tabulated, d: &[f64], grid: &EvalGrid) -> f64 {
    0.5 * integrate(grid, |i| f_mu.values[i] * d[i].ln() + f_phi.values[i] * (1.0 - d[i]).ln())
}

pub fn theoretical_loss_on(
    f_mu: &dyn Density,
    f_phi: &dyn Density,
    d: &DiscriminatorFn,
    grid: &EvalGrid,
) -> Result<f64> {
    check_dims(f_mu, f_phi)?;
    let dv = tabulate_discriminator(d, grid)?;
    Ok(loss_from_tables(&Tabulated::new(f_mu, grid)?, &Tabulated::new(f_phi, grid)?, &dv, grid))
}

/// `L = 1/2 int [f_mu log D + f_phi log(1 - D)]` on the default grid.
pub fn theoretical_loss(f_mu: &dyn Density, f_phi: &dyn Density, d: &DiscriminatorFn) -> Result<f64> {
    theoretical_loss_on(f_mu, f_phi, d, &EvalGrid::default_for(f_mu.dim()))
}
