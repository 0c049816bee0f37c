//! Built-in analytic test densities, tabulated on a grid and normalized.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GridDensity;
use crate::error::{Error, Result};
use crate::quadrature::{node, QuadRule};

fn default_resolution() -> usize {
    129
}
fn default_slope() -> f64 {
    1.0
}
fn default_coupling() -> f64 {
    0.8
}
fn default_sigma() -> f64 {
    0.08
}

/// A named family plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        dim: usize,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// `prod_j (1 + slope * y_j)`; in one dimension with slope 1 this is `(2/3)(1 + y)`.
    Tilted {
        dim: usize,
        #[serde(default = "default_slope")]
        slope: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// Independent factors `1 + a_j (y - 1/2) + b_j sin(2 pi y)`.
    Product {
        linear: Vec<f64>,
        wave: Vec<f64>,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// `exp(c * sum_j (2y_j - 1)(2y_{j+1} - 1)) * (1 + y_1 / 2)`.
    Coupled {
        dim: usize,
        #[serde(default = "default_coupling")]
        coupling: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// Two grid spikes smoothed by the wrapped Gaussian.
    BimodalMollified {
        dim: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

impl DensitySpec {
    pub fn tilted_1d() -> Self {
        DensitySpec::Tilted { dim: 1, slope: 1.0, resolution: 129 }
    }

    pub fn product_2d() -> Self {
        DensitySpec::Product { linear: vec![0.8, -0.5], wave: vec![0.3, 0.2], resolution: 129 }
    }

    pub fn coupled_2d() -> Self {
        DensitySpec::Coupled { dim: 2, coupling: 0.8, resolution: 129 }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Uniform { dim, .. }
            | DensitySpec::Tilted { dim, .. }
            | DensitySpec::Coupled { dim, .. }
            | DensitySpec::BimodalMollified { dim, .. } => *dim,
            DensitySpec::Product { linear, .. } => linear.len(),
        }
    }

    pub fn build(&self) -> Result<GridDensity> {
        let rule = QuadRule::Trapezoid;
        let g = match self {
            DensitySpec::Uniform { dim, resolution } => GridDensity::uniform(*dim, *resolution)?,
            DensitySpec::Tilted { dim, slope, resolution } => {
                if *slope <= -1.0 {
                    return Err(Error::InvalidArgument("tilted slope must exceed -1".into()));
                }
                GridDensity::from_fn(*dim, *resolution, rule, |y| {
                    y.iter().map(|v| 1.0 + slope * v).product()
                })?
            }
            DensitySpec::Product { linear, wave, resolution } => {
                if linear.len() != wave.len() || linear.is_empty() {
                    return Err(Error::InvalidArgument(
                        "product needs equally long, nonempty `linear` and `wave`".into(),
                    ));
                }
                GridDensity::from_fn(linear.len(), *resolution, rule, |y| {
                    y.iter()
                        .zip(linear.iter().zip(wave))
                        .map(|(v, (a, b))| 1.0 + a * (v - 0.5) + b * (2.0 * PI * v).sin())
                        .product()
                })?
            }
            DensitySpec::Coupled { dim, coupling, resolution } => {
                GridDensity::from_fn(*dim, *resolution, rule, |y| {
                    let s: f64 = y.windows(2).map(|w| (2.0 * w[0] - 1.0) * (2.0 * w[1] - 1.0)).sum();
                    (coupling * s).exp() * (1.0 + 0.5 * y[0])
                })?
            }
            DensitySpec::BimodalMollified { dim, sigma, resolution } => {
                let m = *resolution;
                let spike_a = (0.25 * (m - 1) as f64).round() as usize;
                let spike_b = (0.7 * (m - 1) as f64).round() as usize;
                let raw = GridDensity::from_fn(*dim, m, rule, |y| {
                    let at = |i: usize| y.iter().all(|&v| (v - node(i, m)).abs() < 1e-12);
                    if at(spike_a) {
                        1.0
                    } else if at(spike_b) {
                        0.6
                    } else {
                        1e-6
                    }
                })?;
                raw.normalize()?.mollify(*sigma)?
            }
        };
        g.normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_normalized_and_positive() {
        let specs = [
            DensitySpec::Uniform { dim: 2, resolution: 17 },
            DensitySpec::tilted_1d(),
            DensitySpec::product_2d(),
            DensitySpec::coupled_2d(),
            DensitySpec::BimodalMollified { dim: 1, sigma: 0.08, resolution: 65 },
            DensitySpec::BimodalMollified { dim: 2, sigma: 0.1, resolution: 33 },
        ];
        for s in specs {
            let g = s.build().unwrap();
            assert_eq!(g.dim(), s.dim());
            assert!((g.total() - 1.0).abs() < 1e-8);
            assert!(g.kappa() > 0.0);
        }
    }

    #[test]
    fn tilted_matches_closed_form() {
        let g = DensitySpec::tilted_1d().build().unwrap();
        assert!((g.interpolate(&[0.0]) - 2.0 / 3.0).abs() < 1e-12);
        assert!((g.interpolate(&[0.3]) - (2.0 / 3.0) * 1.3).abs() < 1e-12);
    }

    #[test]
    fn spec_json_names() {
        let s: DensitySpec = serde_json::from_str(r#"{"family":"bimodal-mollified","dim":1}"#).unwrap();
        assert!(matches!(s, DensitySpec::BimodalMollified { sigma, .. } if sigma == 0.08));
        assert!(serde_json::from_str::<DensitySpec>(r#"{"family":"tilted","dim":1,"bogus":1}"#).is_err());
    }
}
