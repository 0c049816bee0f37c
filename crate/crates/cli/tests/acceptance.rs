//! One test per acceptance criterion; each prints a single PASS/FAIL line
//! (written straight to stdout so it shows without `--nocapture`).

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rosegan::bounds::{self, RhoMetricParams};
use rosegan::divergence::{
    js_divergence_on, loss_from_tables, optimal_discriminator_on, tabulate_discriminator, theoretical_loss_on, Tabulated,
};
use rosegan::hypothesis::discriminator_bounds;
use rosegan::learning::{
    empirical_loss, error_decomposition_trials, rate_experiment, NetEvaluator, NetPair, NetSpec, RateOptions, Target,
    TrainingSample,
};
use rosegan::rng::{mix_seed, streams, UniformStream};
use rosegan::rosenblatt::build_rosenblatt;
use rosegan::{Density, DensitySpec, EvalGrid, GeneratorFamily, HypothesisConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::Statistics;

fn report(id: u32, name: &str, pass: bool, detail: String, start: Instant) {
    let line = format!(
        "criterion {id:>2} [{}] {name}: {detail} ({:.1} s)\n",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn test_densities() -> Vec<(&'static str, DensitySpec)> {
    vec![
        ("tilted-1d", DensitySpec::tilted_1d()),
        ("product-2d", DensitySpec::product_2d()),
        ("coupled-2d", DensitySpec::coupled_2d()),
    ]
}

type DensityFn = Box<dyn Fn(&[f64]) -> f64>;

/// Closed forms of the built-in densities, normalized analytically (the
/// coupled constant by a 1D Simpson rule on `sinh(cu)/(cu)`).
fn analytic(name: &str) -> DensityFn {
    match name {
        "tilted-1d" => Box::new(|y: &[f64]| (2.0 / 3.0) * (1.0 + y[0])),
        "product-2d" => Box::new(|y: &[f64]| {
            let f = |v: f64, a: f64, b: f64| 1.0 + a * (v - 0.5) + b * (2.0 * std::f64::consts::PI * v).sin();
            f(y[0], 0.8, 0.3) * f(y[1], -0.5, 0.2)
        }),
        _ => {
            let c = 0.8f64;
            let m = 20_001;
            let mut z = 0.0;
            for i in 0..m {
                let y = i as f64 / (m - 1) as f64;
                let cu = c * (2.0 * y - 1.0);
                let g = if cu.abs() < 1e-12 { 1.0 } else { cu.sinh() / cu };
                let w = if i == 0 || i == m - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                z += w * g * (1.0 + 0.5 * y);
            }
            z /= 3.0 * (m - 1) as f64;
            Box::new(move |y: &[f64]| (c * (2.0 * y[0] - 1.0) * (2.0 * y[1] - 1.0)).exp() * (1.0 + 0.5 * y[0]) / z)
        }
    }
}

fn family_1d() -> GeneratorFamily {
    GeneratorFamily::new(HypothesisConfig::bernstein(1, 3, 0.5, 2.0, 2)).unwrap()
}

fn family_for(dim: usize) -> GeneratorFamily {
    if dim == 1 {
        GeneratorFamily::new(HypothesisConfig::bernstein(1, 3, 0.5, 2.0, 3)).unwrap()
    } else {
        let mut cfg = HypothesisConfig::bernstein(dim, 3, 0.5, 4.0, 3);
        cfg.coupling_degree = 1;
        GeneratorFamily::new(cfg).unwrap()
    }
}

fn random_params(family: &GeneratorFamily, seed: u64, index: u64) -> Vec<f64> {
    let rng = UniformStream::new(seed, streams::PERTURB, family.n_params());
    let mut u = vec![0.0; family.n_params()];
    rng.point(index, &mut u);
    family.param_box().iter().zip(&u).map(|(&(lo, hi), &t)| lo + t * (hi - lo)).collect()
}

#[test]
fn criterion_01_rosenblatt_correctness() {
    let start = Instant::now();
    let mut round = 0.0f64;
    let mut jac = 0.0f64;
    let mut jac_analytic = 0.0f64;
    for (name, spec) in test_densities() {
        let g = spec.build().unwrap();
        let d = g.dim();
        let psi = build_rosenblatt(&g).unwrap();
        let phi = psi.inverse();
        let rng = UniformStream::new(1, streams::NET_CHECK, d);
        let mut p = vec![0.0; d];
        for i in 0..1000 {
            rng.point(i, &mut p);
            let a = psi.apply(&phi.apply(&p).unwrap()).unwrap();
            let b = phi.apply(&psi.apply(&p).unwrap()).unwrap();
            for j in 0..d {
                round = round.max((a[j] - p[j]).abs()).max((b[j] - p[j]).abs());
            }
        }
        let f = analytic(name);
        let nodes = 17usize.pow(d as u32);
        for flat in 0..nodes {
            let y: Vec<f64> = (0..d).map(|j| ((flat / 17usize.pow(j as u32)) % 17) as f64 / 16.0).collect();
            let jv = psi.jacobian(&y).unwrap();
            jac = jac.max((jv - g.interpolate(&y)).abs());
            jac_analytic = jac_analytic.max((jv - f(&y)).abs());
        }
    }
    let pass = round < 1e-8 && jac < 1e-5;
    report(
        1,
        "Rosenblatt roundtrip and Jacobian",
        pass,
        format!(
            "roundtrip sup {round:.2e} (< 1e-8), |J - f_mu| {jac:.2e} (< 1e-5); vs closed form {jac_analytic:.2e} (grid discretization)"
        ),
        start,
    );
}

#[test]
fn criterion_02_generator_realizes_target() {
    let start = Instant::now();
    let n = 1_000_000usize;
    let bins = 32usize;
    let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    let mut worst_chi: f64 = 0.0;
    let mut l1 = f64::NAN;
    for (name, spec) in test_densities() {
        let g = spec.build().unwrap();
        let d = g.dim();
        let phi = build_rosenblatt(&g).unwrap().inverse();
        let pts = phi.sample(n, 2024).unwrap();
        let f = analytic(name);
        for axis in 0..d {
            // expected bin masses of the axis marginal by fine midpoint quadrature
            let fine = 256usize;
            let other = if d == 1 { 1 } else { 512 };
            let mut probs = vec![0.0; bins];
            for (b, p) in probs.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..fine {
                    let t = (b as f64 + (i as f64 + 0.5) / fine as f64) / bins as f64;
                    for k in 0..other {
                        let o = (k as f64 + 0.5) / other as f64;
                        let y = if d == 1 { vec![t] } else if axis == 0 { vec![t, o] } else { vec![o, t] };
                        s += f(&y);
                    }
                }
                *p = s / (fine * other * bins) as f64;
            }
            let mut counts = vec![0usize; bins];
            for row in pts.rows() {
                counts[((row[axis] * bins as f64) as usize).min(bins - 1)] += 1;
            }
            let chi: f64 = counts
                .iter()
                .zip(&probs)
                .map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
                .sum();
            worst_chi = worst_chi.max(chi);
            if d == 1 {
                l1 = counts.iter().zip(&probs).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum();
            }
        }
    }
    let pass = worst_chi < crit && l1 < 0.01;
    report(
        2,
        "generator realizes mu (10^6 samples)",
        pass,
        format!("max chi2 {worst_chi:.2} (< {crit:.2} at 1%, 31 dof), 1D L1 {l1:.4} (< 0.01)"),
        start,
    );
}

#[test]
fn criterion_03_js_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (i, (_, spec)) in test_densities().into_iter().enumerate() {
        let g = spec.build().unwrap();
        let fam = family_for(g.dim());
        let grid = EvalGrid::default_for(g.dim());
        let mu: Arc<dyn Density> = Arc::new(g);
        for r in 0..20 {
            let params = random_params(&fam, 30 + i as u64, r);
            fam.check_params(&params).unwrap();
            let f_phi: Arc<dyn Density> = Arc::new(fam.make_generator(&params).unwrap().pushforward_density().unwrap());
            let js = js_divergence_on(mu.as_ref(), f_phi.as_ref(), &grid).unwrap();
            let d_opt = optimal_discriminator_on(mu.clone(), f_phi.clone(), &grid).unwrap();
            let l = theoretical_loss_on(mu.as_ref(), f_phi.as_ref(), &d_opt, &grid).unwrap();
            worst = worst.max((js - (l + 2f64.ln())).abs());
            count += 1;
        }
    }
    report(
        3,
        "JS identity d_JS = L(phi, D_phi) + log 2",
        worst < 1e-8,
        format!("{count} certified generators, max deviation {worst:.2e} (< 1e-8)"),
        start,
    );
}

#[test]
fn criterion_04_optimal_discriminator() {
    let start = Instant::now();
    let mut violations = 0;
    let mut strict_checked = 0;
    let mut min_strict_gap = f64::INFINITY;
    let mut worst_negative = 0.0f64;
    for (i, (_, spec)) in test_densities().into_iter().enumerate() {
        let g = spec.build().unwrap();
        let d = g.dim();
        let fam = family_for(d);
        let grid = EvalGrid::default_for(d);
        let mu: Arc<dyn Density> = Arc::new(g);
        let mu_tab = Tabulated::new(mu.as_ref(), &grid).unwrap();
        let (nodes, _) = grid.nodes();
        for r in 0..4 {
            let params = random_params(&fam, 40 + i as u64, r);
            let f_phi: Arc<dyn Density> = Arc::new(fam.make_generator(&params).unwrap().pushforward_density().unwrap());
            let phi_tab = Tabulated::new(f_phi.as_ref(), &grid).unwrap();
            let d_opt = tabulate_discriminator(&optimal_discriminator_on(mu.clone(), f_phi, &grid).unwrap(), &grid).unwrap();
            let best = loss_from_tables(&mu_tab, &phi_tab, &d_opt, &grid);
            let rng = UniformStream::new(mix_seed(4, r + 10 * i as u64), streams::PERTURB, 2 + 2 * d);
            let mut u = vec![0.0; 2 + 2 * d];
            for k in 0..50 {
                rng.point(k, &mut u);
                // smooth bump of random amplitude, centre and width
                let amp = (u[0] - 0.5) * 0.1 * 10f64.powf(-3.0 * u[1]);
                let pert: Vec<f64> = (0..grid.len())
                    .map(|p| {
                        let mut e = 0.0;
                        for j in 0..d {
                            let x = nodes[p * d + j];
                            let w = 0.05 + 0.5 * u[2 + 2 * j + 1];
                            e += ((x - u[2 + 2 * j]) / w).powi(2);
                        }
                        let v = d_opt[p] + amp * (-e).exp();
                        v.clamp(1e-9, 1.0 - 1e-9)
                    })
                    .collect();
                let sup = pert.iter().zip(&d_opt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let l = loss_from_tables(&mu_tab, &phi_tab, &pert, &grid);
                let gap = best - l;
                if gap < 0.0 {
                    violations += 1;
                    worst_negative = worst_negative.min(gap);
                }
                if sup > 1e-3 {
                    strict_checked += 1;
                    min_strict_gap = min_strict_gap.min(gap);
                    if gap.is_nan() || gap <= 0.0 {
                        violations += 1;
                    }
                }
            }
        }
    }
    report(
        4,
        "optimal discriminator dominates perturbations",
        violations == 0,
        format!(
            "600 perturbations, {violations} violations, min strict gap {min_strict_gap:.2e} over {strict_checked} with sup|D - D_phi| > 1e-3"
        ),
        start,
    );
}

#[test]
fn criterion_05_discriminator_bounds() {
    let start = Instant::now();
    let mut outside = 0usize;
    let mut evals = 0usize;
    for d in [1usize, 2] {
        let fam = family_for(d);
        let (b1, b2) = fam.discriminator_bounds();
        let rng = UniformStream::new(5, streams::NET_CHECK, d);
        let mut x = vec![0.0; d];
        for pair in 0..10 {
            let a = random_params(&fam, 50 + d as u64, 2 * pair);
            let b = random_params(&fam, 50 + d as u64, 2 * pair + 1);
            let disc = fam.make_discriminator(&a, &b).unwrap();
            for i in 0..10_000 {
                rng.point(i, &mut x);
                let v = disc.eval(&x);
                evals += 1;
                if !(v >= b1 && v <= b2) {
                    outside += 1;
                }
            }
        }
    }
    let mut sum_exact = true;
    for d in 1..=4 {
        for k in [1.01, 1.5, 2.0, 3.0, 7.3, 10.0] {
            let (b1, b2) = discriminator_bounds(d, k);
            sum_exact &= b1 + b2 == 1.0;
        }
    }
    report(
        5,
        "discriminator values within [B1, B2]",
        outside == 0 && sum_exact,
        format!("{evals} evaluations, {outside} outside; B1 + B2 == 1 exactly: {sum_exact}"),
        start,
    );
}

#[test]
fn criterion_06_unbiased_empirical_loss() {
    let start = Instant::now();
    let g = DensitySpec::tilted_1d().build().unwrap();
    let target = Target::from_grid(&g).unwrap();
    let fam = family_for(1);
    let grid = rosegan::learning::learning_grid(1);
    let mut worst_ratio = 0.0f64;
    for p in 0..5u64 {
        let gen = fam.make_generator(&random_params(&fam, 60, 3 * p)).unwrap();
        let disc = fam
            .make_discriminator(&random_params(&fam, 60, 3 * p + 1), &random_params(&fam, 60, 3 * p + 2))
            .unwrap();
        let l = theoretical_loss_on(target.density().as_ref(), &gen.pushforward_density().unwrap(), &disc, &grid).unwrap();
        let vals: Vec<f64> = (0..200)
            .map(|t| {
                let s = TrainingSample::draw(&target, 1000, mix_seed(600 + p, t)).unwrap();
                empirical_loss(&disc, &gen, &s).unwrap()
            })
            .collect();
        let m = vals.iter().mean();
        let sd = vals.iter().std_dev();
        worst_ratio = worst_ratio.max((m - l).abs() / (sd / 200f64.sqrt()));
    }
    report(
        6,
        "unbiasedness of the empirical loss",
        worst_ratio <= 3.0,
        format!("max |mean - L| / (std/sqrt 200) = {worst_ratio:.3} (<= 3) over 5 pairs"),
        start,
    );
}

fn member_target(fam: &GeneratorFamily, pair: &NetPair, index: usize) -> Target {
    Target::from_sampler(fam.make_generator(&pair.generators[index]).unwrap()).unwrap()
}

#[test]
fn criterion_07_error_decomposition() {
    let start = Instant::now();
    let fam = family_1d();
    let pair = NetPair::build(&fam, &NetSpec::Shape(vec![9]), 1000).unwrap();
    let members = pair.n_generators() * pair.n_discriminators();
    // target off the lattice so that the net minimizer is not trivial
    let target = Target::from_grid(&DensitySpec::tilted_1d().build().unwrap()).unwrap();
    let eval = NetEvaluator::new(&fam, &target, pair).unwrap();
    let decs = error_decomposition_trials(&eval, 500, 100, 7).unwrap();
    let bad = decs.iter().filter(|d| !d.holds()).count();
    let max_ratio = decs
        .iter()
        .map(|d| if d.sampling_error > 0.0 { d.excess / (2.0 * d.sampling_error) } else { 0.0 })
        .fold(0.0, f64::max);
    let nontrivial = decs.iter().filter(|d| d.excess > 0.0).count();
    report(
        7,
        "finite error decomposition",
        bad == 0 && members <= 1000,
        format!(
            "{} of 100 trials hold; {} generator x {} discriminator ({} pairs); max excess/(2 err) {max_ratio:.3}; {nontrivial} trials with positive excess",
            100 - bad,
            eval.pair().n_generators(),
            eval.pair().n_discriminators(),
            members
        ),
        start,
    );
}

fn rate_setup() -> NetEvaluator {
    let fam = family_1d();
    let pair = NetPair::build(&fam, &NetSpec::Shape(vec![5]), 200).unwrap();
    let target = member_target(&fam, &pair, 1);
    NetEvaluator::new(&fam, &target, pair).unwrap()
}

#[test]
fn criterion_08_rate_reproduction() {
    let start = Instant::now();
    let eval = rate_setup();
    let grid = vec![1 << 6, 1 << 8, 1 << 10, 1 << 12, 1 << 14];
    let r = rate_experiment(&eval, &RateOptions::new(grid, 50, 8)).unwrap();
    let slope = r.slope.unwrap_or(f64::NAN);
    let dominated = r.rows.iter().all(|row| row.bound_c_over_sqrt_n.is_some_and(|b| row.mean <= b));
    let members = eval.pair().n_generators() * eval.pair().n_discriminators();
    report(
        8,
        "sampling-error rate",
        (slope + 0.5).abs() <= 0.1 && members <= 200,
        format!(
            "slope {slope:.4} (-0.5 +/- 0.1), net pair {members} members, mean <= C/sqrt(n) at every n: {dominated}"
        ),
        start,
    );
}

#[test]
fn criterion_09_concentration_dominance() {
    let start = Instant::now();
    let eval = rate_setup();
    let mut opts = RateOptions::new(vec![1 << 10], 500, 9);
    opts.delta = 0.25;
    let r = rate_experiment(&eval, &opts).unwrap();
    let row = &r.rows[0];
    let frac = row.exceed_frac.unwrap_or(f64::NAN);
    let prob = row.thm54_probability.unwrap_or(f64::NAN);
    report(
        9,
        "tail threshold exceedance",
        frac <= prob,
        format!(
            "n = 1024, 500 trials, K = {}: exceedance {frac} <= bound {prob:e} (log {:.3e}); threshold {:.3e}, max observed {:.3e}",
            row.k_bound,
            row.thm54_log_probability.unwrap_or(f64::NAN),
            row.thm54_threshold.unwrap_or(f64::NAN),
            row.q95.max(row.mean)
        ),
        start,
    );
}

#[test]
fn criterion_10_bound_algebra() {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for d in 1..=3 {
        for kb in [1.5, 2.0, 3.0] {
            let p1 = RhoMetricParams { d, k_bound: kb, n: 1 };
            let r1 = bounds::rho_metric(&p1, 0.3, 0.01).unwrap();
            for n in [4u64, 9, 1000, 65_536, 1_000_003] {
                let rn = bounds::rho_metric(&RhoMetricParams { n, ..p1 }, 0.3, 0.01).unwrap();
                ok &= rn == r1 / (n as f64).sqrt();
            }
        }
    }
    notes.push(format!("rho_n = rho_1/sqrt n: {ok}"));
    let mut dud = true;
    for exact in [false, true] {
        let one = bounds::dudley_bound(2, 0.5, 3, 2.0, 1, 1.0, exact, 1.0).unwrap();
        for n in [2u64, 100, 12_345, 1 << 20] {
            dud &= bounds::dudley_bound(2, 0.5, 3, 2.0, n, 1.0, exact, 1.0).unwrap() == one / (n as f64).sqrt();
        }
    }
    notes.push(format!("dudley(n) = dudley(1)/sqrt n: {dud}"));
    let mut div = true;
    for d in 1..=6 {
        for k in 1..=5 {
            for alpha in [0.1, 0.5, 1.0] {
                let b = d as f64 / (2.0 * (alpha + k as f64 - 1.0));
                let r = bounds::dudley_bound(d, alpha, k, 2.0, 10, 1.0, false, 1.0);
                let raised = matches!(r, Err(rosegan::Error::IntegralDivergent { .. }));
                div &= raised == (b >= 1.0);
            }
        }
    }
    notes.push(format!("IntegralDivergent iff b >= 1: {div}"));
    let gamma_at = |kb: f64| {
        let inputs = rosegan::BoundInputs {
            d: 2,
            alpha: 0.5,
            k: 3,
            k_bound: kb,
            n: 100,
            delta: 0.1,
            delta1: 0.7,
            c1_star: 1.0,
            exact_integral: false,
        };
        rosegan::BoundReport::compute(inputs).unwrap().gamma.unwrap().to_bits()
    };
    let gam = [1.1, 2.0, 50.0].iter().all(|&kb| gamma_at(kb) == gamma_at(3.0));
    notes.push(format!("gamma free of K: {gam}"));
    let ks = bounds::k_schedule(4f64.exp(), 0.5).unwrap();
    notes.push(format!("k_schedule(e^4, 0.5) = {ks}"));
    let inputs = rosegan::BoundInputs {
        d: 2,
        alpha: 0.5,
        k: 3,
        k_bound: 2.0,
        n: 1000,
        delta: 0.1,
        delta1: 1.0,
        c1_star: 1.0,
        exact_integral: false,
    };
    let a = serde_json::to_string(&rosegan::BoundReport::compute(inputs.clone()).unwrap()).unwrap();
    let b = serde_json::to_string(&rosegan::BoundReport::compute(inputs).unwrap()).unwrap();
    let stable = a == b;
    notes.push(format!("report bit-stable: {stable}"));
    report(10, "bound-calculator algebra", ok && dud && div && gam && ks == 2.0 && stable, notes.join(", "), start);
}

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_rosegan"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rosegan-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_11_cli_determinism() {
    let start = Instant::now();
    let dir = scratch("det");
    let hyp = r#"{"dim":1,"k":3,"alpha":0.5,"K":2.0,"family":"bernstein_triangular","degree":2}"#;
    let configs = [
        ("sample", r#"{"target":{"density":{"family":"coupled","dim":2}},"n":2000,"seed":3}"#.to_string(), vec!["samples.csv"]),
        ("density", r#"{"target":{"density":{"family":"tilted","dim":1}}}"#.to_string(), vec!["density.json"]),
        (
            "fit",
            format!(r#"{{"target":{{"density":{{"family":"tilted","dim":1}}}},"hypothesis":{hyp},"n":2000,"seed":4,"net":{{"shape":[7]}}}}"#),
            vec!["fit.json"],
        ),
        (
            "sampling-error",
            format!(r#"{{"target":{{"generator":[-0.1]}},"hypothesis":{hyp},"n":512,"trials":8,"seed":5,"net":{{"shape":[5]}}}}"#),
            vec!["sampling_error.json"],
        ),
        (
            "rate",
            format!(r#"{{"target":{{"generator":[-0.1]}},"hypothesis":{hyp},"n_grid":[64,256,1024],"trials":10,"seed":7,"net":{{"shape":[5]}}}}"#),
            vec!["rate.csv", "rate.svg", "bounds.json"],
        ),
        (
            "bounds",
            r#"{"hypothesis":{"dim":2,"k":3,"alpha":0.5,"K":2.0,"family":"bernstein_triangular","degree":3},"n":1000,"delta":0.1}"#.to_string(),
            vec!["bounds.json"],
        ),
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (cmd, cfg, artifacts) in &configs {
        let cfg_path = dir.join(format!("{cmd}.json"));
        std::fs::write(&cfg_path, cfg).unwrap();
        let mut outputs = Vec::new();
        for (run, threads) in [1, 2, 4, 1].iter().enumerate() {
            let out = dir.join(format!("{cmd}-{run}"));
            let status = Command::new(bin())
                .arg(cmd)
                .arg("--config")
                .arg(&cfg_path)
                .arg("--threads")
                .arg(threads.to_string())
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(status.status.success(), "{cmd}: {}", String::from_utf8_lossy(&status.stderr));
            outputs.push(artifacts.iter().map(|a| std::fs::read(out.join(a)).unwrap()).collect::<Vec<_>>());
        }
        files += artifacts.len();
        if outputs.iter().any(|o| *o != outputs[0]) {
            mismatches.push(*cmd);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    report(
        11,
        "CLI determinism across runs and thread counts",
        mismatches.is_empty(),
        format!("6 commands, {files} artifacts, threads 1/2/4/1; mismatching: {mismatches:?}"),
        start,
    );
}
