use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rosegan::learning::GradientOptions;
use rosegan::{DensitySpec, HypothesisConfig, NetSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw points from the target through its exact sampler.
    Sample,
    /// Tabulate the target density.
    Density,
    /// Minimax fit of the hypothesis family to a training sample.
    Fit,
    /// Monte Carlo sampling error over a finite net pair.
    SamplingError,
    /// Sampling error over a grid of sample sizes, with bound comparison.
    Rate,
    /// Explicit bound constants.
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Density => "density",
            Command::Fit => "fit",
            Command::SamplingError => "sampling-error",
            Command::Rate => "rate",
            Command::Bounds => "bounds",
        }
    }

    pub fn stochastic(self) -> bool {
        !matches!(self, Command::Density | Command::Bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Net,
    Grad,
}

/// Where the real data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// A built-in family.
    Density(DensitySpec),
    /// A grid density JSON file.
    File(PathBuf),
    /// A member of the hypothesis family, by parameter vector.
    Generator(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub hypothesis: Option<HypothesisConfig>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub delta1: Option<f64>,
    #[serde(default)]
    pub c1_star: Option<f64>,
    #[serde(default)]
    pub exact_integral: bool,
    #[serde(default)]
    pub strategy: Option<StrategyArg>,
    #[serde(default)]
    pub net: Option<NetSpec>,
    #[serde(default)]
    pub net_cap: Option<usize>,
    #[serde(default)]
    pub gradient: Option<GradientOptions>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub exact_integral: bool,
    pub strategy: Option<StrategyArg>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        self.exact_integral |= o.exact_integral;
        if o.strategy.is_some() {
            self.strategy = o.strategy;
        }
        if o.delta.is_some() {
            self.delta = o.delta;
        }
        if o.beta.is_some() {
            self.beta = o.beta;
        }
    }

    /// Check everything `command` needs before any computation starts.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(invalid(format!("config is for `{}`, invoked `{}`", c.name(), command.name())));
            }
        }
        if command.stochastic() && self.seed.is_none() {
            return Err(invalid(format!("`{}` needs a seed", command.name())));
        }
        let need_target = !matches!(command, Command::Bounds);
        if need_target && self.target.is_none() {
            return Err(invalid("missing `target`"));
        }
        let need_family = matches!(command, Command::Fit | Command::SamplingError | Command::Rate | Command::Bounds)
            || matches!(self.target, Some(TargetSpec::Generator(_)));
        if need_family && self.hypothesis.is_none() {
            return Err(invalid("missing `hypothesis`"));
        }
        if matches!(command, Command::Sample | Command::Fit | Command::SamplingError | Command::Bounds) {
            match self.n {
                Some(n) if n > 0 => {}
                _ => return Err(invalid("`n` must be a positive integer")),
            }
        }
        if matches!(command, Command::SamplingError | Command::Rate) {
            match self.trials {
                Some(t) if t > 0 => {}
                _ => return Err(invalid("`trials` must be a positive integer")),
            }
        }
        if command == Command::Rate {
            match &self.n_grid {
                Some(g) if !g.is_empty() && g.iter().all(|&n| n > 0) => {}
                _ => return Err(invalid("`n_grid` must be a nonempty list of positive sizes")),
            }
        }
        for (name, v) in [("delta", self.delta), ("beta", self.beta), ("delta1", self.delta1), ("c1_star", self.c1_star)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("`{name}` must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
