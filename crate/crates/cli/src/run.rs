use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rosegan::bounds::{family_delta1, BoundInputs, BoundReport};
use rosegan::learning::{
    estimate_sampling_error, minimax_fit, rate_experiment, FitOptions, NetEvaluator, NetPair, NetSpec, RateOptions,
    Strategy, Target, TrainingSample,
};
use rosegan::hypothesis::DEFAULT_NET_CAP;
use rosegan::{GeneratorFamily, GridDensity, QuadRule};

use crate::config::{Command, RunConfig, StrategyArg, TargetSpec};
use crate::error::CliError;

/// Write `bytes` to `dir/name` via a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

fn to_json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("finite report serializes");
    s.push('\n');
    s.into_bytes()
}

fn family(cfg: &RunConfig) -> Result<GeneratorFamily, CliError> {
    let h = cfg.hypothesis.clone().ok_or_else(|| CliError::ConfigInvalid("missing `hypothesis`".into()))?;
    Ok(GeneratorFamily::new(h)?)
}

fn target_grid(cfg: &RunConfig) -> Result<Option<GridDensity>, CliError> {
    match cfg.target.as_ref() {
        Some(TargetSpec::Density(spec)) => Ok(Some(spec.build()?)),
        Some(TargetSpec::File(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
            Ok(Some(GridDensity::from_json(&text)?))
        }
        _ => Ok(None),
    }
}

fn target(cfg: &RunConfig) -> Result<Target, CliError> {
    match cfg.target.as_ref() {
        Some(TargetSpec::Generator(params)) => Ok(Target::from_sampler(family(cfg)?.make_generator(params)?)?),
        Some(_) => Ok(Target::from_grid(&target_grid(cfg)?.expect("grid target"))?),
        None => Err(CliError::ConfigInvalid("missing `target`".into())),
    }
}

fn net_spec(cfg: &RunConfig, fam: &GeneratorFamily) -> NetSpec {
    cfg.net.clone().unwrap_or_else(|| NetSpec::Shape(vec![5; fam.n_params()]))
}

fn evaluator(cfg: &RunConfig) -> Result<NetEvaluator, CliError> {
    let fam = family(cfg)?;
    let pair = NetPair::build(&fam, &net_spec(cfg, &fam), cfg.net_cap.unwrap_or(DEFAULT_NET_CAP))?;
    Ok(NetEvaluator::new(&fam, &target(cfg)?, pair)?)
}

fn bound_inputs(cfg: &RunConfig, fam: &GeneratorFamily, n: usize) -> BoundInputs {
    let h = fam.config();
    BoundInputs {
        d: h.dim,
        alpha: h.alpha,
        k: h.k,
        k_bound: h.k_bound,
        n: n as u64,
        delta: cfg.delta.unwrap_or(0.1),
        delta1: cfg.delta1.unwrap_or_else(|| family_delta1(fam)),
        c1_star: cfg.c1_star.unwrap_or(1.0),
        exact_integral: cfg.exact_integral,
    }
}

/// Run `command`; returns one summary line per stage.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    cfg.validate(command)?;
    let out = cfg.out_dir();
    let seed = cfg.seed.unwrap_or(0);
    let mut log = Vec::new();
    match command {
        Command::Sample => {
            let t = target(cfg)?;
            let n = cfg.n.unwrap_or(0);
            let pts = t.sampler().sample(n, seed)?;
            let p = write_atomic(&out, "samples.csv", pts.to_csv().as_bytes())?;
            log.push(format!("sample: {n} points in {} dims -> {}", pts.dim, p.display()));
        }
        Command::Density => {
            let grid = match target_grid(cfg)? {
                Some(g) => g,
                None => {
                    let t = target(cfg)?;
                    let f = t.density();
                    let g = GridDensity::from_fn(t.dim(), 129, QuadRule::Trapezoid, |x| {
                        rosegan::Density::eval(f.as_ref(), x)
                    })?;
                    g.normalize()?
                }
            };
            let p = write_atomic(&out, "density.json", grid.to_json().as_bytes())?;
            log.push(format!(
                "density: {} dims, resolution {}, max {:.6} -> {}",
                grid.dim(),
                grid.resolution(),
                grid.max_value(),
                p.display()
            ));
        }
        Command::Fit => {
            let fam = family(cfg)?;
            let t = target(cfg)?;
            let sample = TrainingSample::draw(&t, cfg.n.unwrap_or(0), seed)?;
            let mut opts = FitOptions::net(net_spec(cfg, &fam));
            opts.net_cap = cfg.net_cap.unwrap_or(DEFAULT_NET_CAP);
            if cfg.strategy == Some(StrategyArg::Grad) {
                opts.strategy = Strategy::AlternatingGradient;
            }
            if let Some(g) = &cfg.gradient {
                opts.gradient = g.clone();
            }
            let r = minimax_fit(&fam, &t, &sample, &opts)?;
            let p = write_atomic(&out, "fit.json", &to_json(&r))?;
            log.push(format!(
                "fit: value {:.6}, js_to_target {:.3e}, converged {} -> {}",
                r.achieved_value,
                r.js_to_target,
                r.converged,
                p.display()
            ));
            if !r.converged {
                log.push("fit: warning: gradient iteration cap reached".into());
            }
        }
        Command::SamplingError => {
            let eval = evaluator(cfg)?;
            let s = estimate_sampling_error(&eval, cfg.n.unwrap_or(0), cfg.trials.unwrap_or(0), seed)?;
            let p = write_atomic(&out, "sampling_error.json", &to_json(&s))?;
            log.push(format!(
                "sampling-error: n {}, mean {:.6e}, std {:.3e}, net eps {:.3e} -> {}",
                s.n,
                s.mean,
                s.std,
                s.epsilon,
                p.display()
            ));
        }
        Command::Rate => {
            let eval = evaluator(cfg)?;
            let grid = cfg.n_grid.clone().unwrap_or_default();
            let mut opts = RateOptions::new(grid.clone(), cfg.trials.unwrap_or(0), seed);
            opts.delta = cfg.delta.unwrap_or(0.1);
            opts.beta = cfg.beta;
            opts.exact_integral = cfg.exact_integral;
            opts.c1_star = cfg.c1_star.unwrap_or(1.0);
            let r = rate_experiment(&eval, &opts)?;
            write_atomic(&out, "rate.csv", r.to_csv().as_bytes())?;
            write_atomic(&out, "rate.svg", r.to_svg().as_bytes())?;
            let n_max = grid.iter().copied().max().unwrap_or(1);
            let b = BoundReport::compute(bound_inputs(cfg, eval.family(), n_max))?;
            write_atomic(&out, "bounds.json", &to_json(&b))?;
            let slope = r.slope.map_or_else(|| "undefined".to_string(), |s| format!("{s:.4}"));
            log.push(format!("rate: {} sizes, slope {slope} -> {}", r.rows.len(), out.display()));
            for w in &r.warnings {
                log.push(format!("rate: warning: {w}"));
            }
        }
        Command::Bounds => {
            let fam = family(cfg)?;
            let b = BoundReport::compute(bound_inputs(cfg, &fam, cfg.n.unwrap_or(0)))?;
            let p = write_atomic(&out, "bounds.json", &to_json(&b))?;
            log.push(b.table().trim_end().to_string());
            log.push(format!("bounds: regularity_ok {} -> {}", b.regularity_ok, p.display()));
        }
    }
    Ok(log)
}
