//! Explicit constants of the covering, chaining and concentration bounds.
//!
//! Notation: `a = d / (2(alpha + k))`, `b = d / (2(alpha + k - 1))`. The
//! entropy integral converges iff `b < 1`, which is the regularity condition
//! `k > 1 - alpha + d/2`. Every constant is "up to C1*", the unspecified
//! absolute constant of the covering-number estimate (default 1).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::hypothesis::{net::family_lipschitz, GeneratorFamily};
use crate::rosenblatt::factorial;

/// Covering-number constant `C1 = C1* d2^(1 + d1 / (2 s))` for smoothness `s`.
pub fn covering_constant(d1: usize, d2: usize, smoothness: f64, c1_star: f64) -> f64 {
    c1_star * (d2 as f64).powf(1.0 + d1 as f64 / (2.0 * smoothness))
}

/// Upper bound on `log N(B[0,K], sup, eps)`: `C1 (K/eps)^(d1/(alpha+k))`.
pub fn covering_bound(d1: usize, d2: usize, k: usize, alpha: f64, k_ball: f64, epsilon: f64, c1_star: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !(k_ball > 0.0) {
        return Err(Error::InvalidArgument("epsilon and K must be positive".into()));
    }
    let s = alpha + k as f64;
    Ok(covering_constant(d1, d2, s, c1_star) * (k_ball / epsilon).powf(d1 as f64 / s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoMetricParams {
    pub d: usize,
    #[serde(rename = "K")]
    pub k_bound: f64,
    pub n: u64,
}

impl RhoMetricParams {
    /// `1 + d! K^(d+1)`.
    pub fn factor_a(&self) -> f64 {
        1.0 + factorial(self.d) * self.k_bound.powi(self.d as i32 + 1)
    }

    /// `d^2 (d!)^3 K^(3d+2)`.
    pub fn factor_b(&self) -> f64 {
        let d = self.d as f64;
        d * d * factorial(self.d).powi(3) * self.k_bound.powi(3 * self.d as i32 + 2)
    }
}

/// `rho_n = (1 + d! K^(d+1)) / sqrt(n) * [dD + d^2 (d!)^3 K^(3d+2) dPhi]`.
pub fn rho_metric(p: &RhoMetricParams, d_disc: f64, d_gen: f64) -> Result<f64> {
    if d_disc < 0.0 || d_gen < 0.0 || p.n == 0 {
        return Err(Error::InvalidArgument("distances must be nonnegative and n >= 1".into()));
    }
    let rho1 = p.factor_a() * (d_disc + p.factor_b() * d_gen);
    Ok(rho1 / (p.n as f64).sqrt())
}

/// Entropy exponents `(a, b)`.
pub fn exponents(d: usize, alpha: f64, k: usize) -> (f64, f64) {
    let d = d as f64;
    let s = alpha + k as f64;
    (d / (2.0 * s), d / (2.0 * (s - 1.0)))
}

fn check_regular(d: usize, alpha: f64, k: usize) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) || k == 0 || d == 0 {
        return Err(Error::InvalidArgument("need d >= 1, k >= 1, alpha in (0, 1]".into()));
    }
    let (a, b) = exponents(d, alpha, k);
    if b >= 1.0 {
        return Err(Error::IntegralDivergent { exponent: b });
    }
    Ok((a, b))
}

/// `C2 = max{C1(d, alpha + k), C1(d, alpha + k - 1)}` with codimension `d`.
pub fn c2_constant(d: usize, alpha: f64, k: usize, c1_star: f64) -> f64 {
    let s = alpha + k as f64;
    covering_constant(d, d, s, c1_star).max(covering_constant(d, d, s - 1.0, c1_star))
}

/// `C3 = [C2 max{X^(d/(alpha+k)), Y^(d/(alpha+k-1))}]^(1/2)` with
/// `X = 2 d^2 (d!)^3 K^(3d+3) (1 + d! K^(d+1))`, `Y = 2K (1 + d! K^(d+1))`.
pub fn c3_constant(d: usize, alpha: f64, k: usize, k_bound: f64, c1_star: f64) -> f64 {
    let p = RhoMetricParams { d, k_bound, n: 1 };
    let df = d as f64;
    let s = alpha + k as f64;
    let x = 2.0 * df * df * factorial(d).powi(3) * k_bound.powi(3 * d as i32 + 3) * p.factor_a();
    let y = 2.0 * k_bound * p.factor_a();
    (c2_constant(d, alpha, k, c1_star) * x.powf(df / s).max(y.powf(df / (s - 1.0)))).sqrt()
}

fn bracket(delta1: f64, a: f64, b: f64, exact: bool) -> f64 {
    if exact {
        delta1.powf(1.0 - a) / (1.0 - a) + delta1.powf(1.0 - b) / (1.0 - b)
    } else {
        delta1.powf(1.0 - a) + delta1.powf(1.0 - b)
    }
}

/// The expectation constant `C = 12 C3 [delta1^(1-a) + delta1^(1-b)]`, or
/// with the antiderivative factors `1/(1-a)`, `1/(1-b)` when `exact`.
pub fn full_c(d: usize, alpha: f64, k: usize, k_bound: f64, delta1: f64, exact: bool, c1_star: f64) -> Result<f64> {
    let (a, b) = check_regular(d, alpha, k)?;
    Ok(12.0 * c3_constant(d, alpha, k, k_bound, c1_star) * bracket(delta1, a, b, exact))
}

/// Dudley bound `C / sqrt(n)` on the expected sampling error.
pub fn dudley_bound(
    d: usize,
    alpha: f64,
    k: usize,
    k_bound: f64,
    n: u64,
    delta1: f64,
    exact_integral: bool,
    c1_star: f64,
) -> Result<f64> {
    if n == 0 || !(delta1 > 0.0) {
        return Err(Error::InvalidArgument("need n >= 1 and delta1 > 0".into()));
    }
    Ok(full_c(d, alpha, k, k_bound, delta1, exact_integral, c1_star)? / (n as f64).sqrt())
}

/// `gamma = 48 d^2 (d!)^4 sqrt(C2) [delta1^(1-a) + delta1^(1-b)]`, free of K.
pub fn gamma_constant(d: usize, alpha: f64, k: usize, delta1: f64, c1_star: f64) -> Result<f64> {
    let (a, b) = check_regular(d, alpha, k)?;
    let df = d as f64;
    Ok(48.0 * df * df * factorial(d).powi(4) * c2_constant(d, alpha, k, c1_star).sqrt() * bracket(delta1, a, b, false))
}

/// `exp(-n t^2 / log^2 B1)`.
pub fn mcdiarmid_tail(b1: f64, n: u64, t: f64) -> Result<f64> {
    Ok(mcdiarmid_log_tail(b1, n, t)?.exp())
}

pub fn mcdiarmid_log_tail(b1: f64, n: u64, t: f64) -> Result<f64> {
    if !(b1 > 0.0 && b1 < 1.0) || t < 0.0 {
        return Err(Error::InvalidArgument("need B1 in (0, 1) and t >= 0".into()));
    }
    let l = b1.ln();
    Ok(-(n as f64) * t * t / (l * l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm54 {
    pub threshold: f64,
    pub probability: f64,
    /// Natural log of `probability` (which underflows for moderate K).
    pub log_probability: f64,
}

/// Threshold `2 gamma K^(4(d+1)) n^(delta - 1/2)` and its tail probability
/// `exp(-gamma^2 K^(8(d+1)) n^(2 delta) / log^2(1 + d! K^(d+1)))`.
pub fn thm54_threshold_and_prob(
    d: usize,
    alpha: f64,
    k: usize,
    k_bound: f64,
    n: u64,
    delta: f64,
    delta1: f64,
    c1_star: f64,
) -> Result<Thm54> {
    if !(k_bound > 1.0) || !(delta > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("need K > 1, delta > 0, n >= 1".into()));
    }
    let g = gamma_constant(d, alpha, k, delta1, c1_star)?;
    let kp = k_bound.powi(4 * (d as i32 + 1));
    let nf = n as f64;
    let threshold = 2.0 * g * kp * nf.powf(delta - 0.5);
    let la = RhoMetricParams { d, k_bound, n }.factor_a().ln();
    let log_probability = -(g * g * kp * kp * nf.powf(2.0 * delta)) / (la * la);
    Ok(Thm54 { threshold, probability: log_probability.exp(), log_probability })
}

/// `K = (log n)^beta`.
pub fn k_schedule(n: f64, beta: f64) -> Result<f64> {
    if !(n > 1.0) || !(beta > 0.0) {
        return Err(Error::InvalidArgument("need n > 1 and beta > 0".into()));
    }
    Ok(n.ln().powf(beta))
}

/// Partial sum over `n = 1..=n_max` of the tail probability plus an
/// integral-test bound on the remainder.
pub fn thm54_summability(
    d: usize,
    alpha: f64,
    k: usize,
    k_bound: f64,
    delta: f64,
    delta1: f64,
    c1_star: f64,
    n_max: u64,
) -> Result<(f64, f64)> {
    let mut partial = 0.0;
    for n in 1..=n_max {
        partial += thm54_threshold_and_prob(d, alpha, k, k_bound, n, delta, delta1, c1_star)?.probability;
    }
    // sum_{n > N} exp(-c n^p) <= int_N^inf exp(-c x^p) dx = c^(-1/p) Gamma(1/p, c N^p) / p
    let g = gamma_constant(d, alpha, k, delta1, c1_star)?;
    let la = RhoMetricParams { d, k_bound, n: 1 }.factor_a().ln();
    let c = g * g * k_bound.powi(8 * (d as i32 + 1)) / (la * la);
    let p = 2.0 * delta;
    let s = 1.0 / p;
    let x = c * (n_max as f64).powf(p);
    let tail = c.powf(-s) * gamma(s) * gamma_ur(s, x) / p;
    Ok((partial, tail))
}

/// `delta1 = rho_1` at the largest discriminator and generator distances of a family.
pub fn family_delta1(family: &GeneratorFamily) -> f64 {
    family_delta1_at(family, family.config().k_bound)
}

/// As [`family_delta1`], with the bound constants evaluated at `k_bound`.
pub fn family_delta1_at(family: &GeneratorFamily, k_bound: f64) -> f64 {
    let (b1, b2) = crate::hypothesis::discriminator_bounds(family.dim(), k_bound);
    let diam = 2.0 * family.radius().max(family.coupling_radius());
    let p = RhoMetricParams { d: family.dim(), k_bound, n: 1 };
    p.factor_a() * ((b2 - b1) + p.factor_b() * family_lipschitz(family) * diam)
}

fn default_delta() -> f64 {
    0.1
}
fn default_delta1() -> f64 {
    1.0
}
fn default_c1_star() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub d: usize,
    pub alpha: f64,
    pub k: usize,
    #[serde(rename = "K")]
    pub k_bound: f64,
    pub n: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_delta1")]
    pub delta1: f64,
    #[serde(default = "default_c1_star")]
    pub c1_star: f64,
    #[serde(default)]
    pub exact_integral: bool,
}

/// All constants for one parameter set. Fields that need the entropy
/// integral to converge are `None` when `regularity_ok` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub gamma: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub dudley_value: Option<f64>,
    /// Tail at `t = C n^(-1/2)`.
    pub mcdiarmid_tail: Option<f64>,
    pub thm54_threshold: Option<f64>,
    pub thm54_probability: Option<f64>,
    pub thm54_log_probability: Option<f64>,
    pub regularity_ok: bool,
    pub constants_note: String,
}

impl BoundReport {
    pub fn compute(inputs: BoundInputs) -> Result<Self> {
        let BoundInputs { d, alpha, k, k_bound, n, delta, delta1, c1_star, exact_integral } = inputs.clone();
        if d == 0 || k == 0 || !(alpha > 0.0 && alpha <= 1.0) || !(k_bound > 1.0) || n == 0 {
            return Err(Error::InvalidArgument("need d, k, n >= 1, alpha in (0, 1], K > 1".into()));
        }
        if !(delta > 0.0) || !(delta1 > 0.0) || !(c1_star > 0.0) {
            return Err(Error::InvalidArgument("delta, delta1 and C1* must be positive".into()));
        }
        let (b1, b2) = crate::hypothesis::discriminator_bounds(d, k_bound);
        let regularity_ok = check_regular(d, alpha, k).is_ok();
        let c = full_c(d, alpha, k, k_bound, delta1, exact_integral, c1_star).ok();
        let gamma = gamma_constant(d, alpha, k, delta1, c1_star).ok();
        let dudley_value = dudley_bound(d, alpha, k, k_bound, n, delta1, exact_integral, c1_star).ok();
        let mcdiarmid_tail = dudley_value.map(|t| mcdiarmid_tail(b1, n, t)).transpose()?;
        let thm = thm54_threshold_and_prob(d, alpha, k, k_bound, n, delta, delta1, c1_star).ok();
        Ok(Self {
            b1,
            b2,
            c1: covering_constant(d, d, alpha + k as f64, c1_star),
            c2: c2_constant(d, alpha, k, c1_star),
            c3: c3_constant(d, alpha, k, k_bound, c1_star),
            gamma,
            c,
            dudley_value,
            mcdiarmid_tail,
            thm54_threshold: thm.map(|t| t.threshold),
            thm54_probability: thm.map(|t| t.probability),
            thm54_log_probability: thm.map(|t| t.log_probability),
            regularity_ok,
            constants_note: format!("all constants up to C1* = {c1_star}"),
            inputs,
        })
    }

    /// Fixed-width text table of the report.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a (regularity fails)".to_string(), |x| format!("{x:.6e}"));
        let rows = [
            ("B1", format!("{:.6e}", self.b1)),
            ("B2", format!("{:.6e}", self.b2)),
            ("C1", format!("{:.6e}", self.c1)),
            ("C2", format!("{:.6e}", self.c2)),
            ("C3", format!("{:.6e}", self.c3)),
            ("gamma", opt(self.gamma)),
            ("C", opt(self.c)),
            ("dudley", opt(self.dudley_value)),
            ("mcdiarmid_tail", opt(self.mcdiarmid_tail)),
            ("thm54_threshold", opt(self.thm54_threshold)),
            ("thm54_probability", opt(self.thm54_probability)),
            ("thm54_log_prob", opt(self.thm54_log_probability)),
            ("regularity_ok", self.regularity_ok.to_string()),
        ];
        let mut s = String::new();
        for (name, v) in rows {
            s.push_str(&format!("{name:<18} {v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_examples() {
        let c1 = covering_constant(1, 1, 2.0, 1.0);
        assert_eq!(covering_bound(1, 1, 1, 1.0, 2.0, 2.0, 1.0).unwrap(), c1);
        assert_eq!(covering_bound(1, 1, 1, 1.0, 16.0, 1.0, 1.0).unwrap(), 4.0);
        let lo = covering_bound(2, 2, 3, 1.0, 5.0, 0.5, 1.0).unwrap();
        let hi = covering_bound(2, 2, 1, 1.0, 5.0, 0.5, 1.0).unwrap();
        assert!(lo < hi);
    }

    #[test]
    fn rho_examples() {
        let p = RhoMetricParams { d: 1, k_bound: 1.0, n: 1 };
        assert!((rho_metric(&p, 0.1, 0.2).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rho_metric(&p, 0.0, 0.0).unwrap(), 0.0);
        let p4 = RhoMetricParams { n: 4, ..p };
        assert_eq!(rho_metric(&p4, 0.1, 0.2).unwrap(), rho_metric(&p, 0.1, 0.2).unwrap() / 2.0);
    }

    #[test]
    fn dudley_scaling_and_divergence() {
        let one = dudley_bound(1, 0.5, 3, 2.0, 1, 1.0, false, 1.0).unwrap();
        for n in [4u64, 100, 12345] {
            let v = dudley_bound(1, 0.5, 3, 2.0, n, 1.0, false, 1.0).unwrap();
            assert_eq!(v, one / (n as f64).sqrt());
        }
        assert!(matches!(dudley_bound(4, 0.5, 1, 2.0, 1, 1.0, false, 1.0), Err(Error::IntegralDivergent { .. })));
    }

    #[test]
    fn exact_form_ratio_at_unit_diameter() {
        let (a, b) = exponents(2, 0.5, 3);
        let bracketed = dudley_bound(2, 0.5, 3, 2.0, 1, 1.0, false, 1.0).unwrap();
        let exact = dudley_bound(2, 0.5, 3, 2.0, 1, 1.0, true, 1.0).unwrap();
        let ratio = exact / bracketed;
        let (fa, fb) = (1.0 / (1.0 - a), 1.0 / (1.0 - b));
        assert!(ratio >= 1.0);
        assert!((ratio - 0.5 * (fa + fb)).abs() < 1e-12);
        assert!(ratio <= fa.max(fb));
        // numerical integral of eps^-a + eps^-b over (0, 1]
        let n = 200_000;
        let num: f64 = (0..n)
            .map(|i| {
                let e = (i as f64 + 0.5) / n as f64;
                e.powf(-a) + e.powf(-b)
            })
            .sum::<f64>()
            / n as f64;
        assert!((num - (fa + fb)).abs() / (fa + fb) < 1e-3);
    }

    #[test]
    fn gamma_is_free_of_k_and_dominates_c() {
        let g = gamma_constant(2, 0.5, 3, 1.0, 1.0).unwrap();
        assert_eq!(g, gamma_constant(2, 0.5, 3, 1.0, 1.0).unwrap());
        for kb in [1.01, 2.0, 5.0, 30.0] {
            let c = full_c(2, 0.5, 3, kb, 1.0, false, 1.0).unwrap();
            assert!(c <= g * kb.powi(12), "{kb}");
            let t = thm54_threshold_and_prob(2, 0.5, 3, kb, 10, 0.1, 1.0, 1.0).unwrap();
            assert!(t.threshold >= 0.0);
        }
        // unit diameter: bracket is exactly 2
        let (a, b) = exponents(1, 0.5, 3);
        assert_eq!(bracket(1.0, a, b, false), 2.0);
    }

    #[test]
    fn mcdiarmid_examples() {
        assert_eq!(mcdiarmid_tail(0.2, 100, 0.0).unwrap(), 1.0);
        let v = mcdiarmid_tail(0.2, 100, 0.2).unwrap();
        let expect = (-4.0 / 5f64.ln().powi(2)).exp();
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.2135).abs() < 1e-4);
        assert!(mcdiarmid_tail(0.2, 200, 0.2).unwrap() < v);
        assert!(mcdiarmid_tail(0.2, 100, 0.3).unwrap() < v);
    }

    #[test]
    fn thm54_shape() {
        let a = thm54_threshold_and_prob(1, 0.5, 3, 1.2, 10, 0.25, 1e-3, 1.0).unwrap();
        let b = thm54_threshold_and_prob(1, 0.5, 3, 1.2, 20, 0.25, 1e-3, 1.0).unwrap();
        assert!(b.log_probability < a.log_probability);
        let h1 = thm54_threshold_and_prob(1, 0.5, 3, 2.0, 10, 0.5, 1.0, 1.0).unwrap();
        let h2 = thm54_threshold_and_prob(1, 0.5, 3, 2.0, 1000, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(h1.threshold, h2.threshold);
        // the tail equals the McDiarmid tail at t = threshold / 2
        let (b1, _) = crate::hypothesis::discriminator_bounds(1, 1.2);
        let via = mcdiarmid_log_tail(b1, 10, a.threshold / 2.0).unwrap();
        assert!((via - a.log_probability).abs() <= 1e-12 * a.log_probability.abs());
    }

    #[test]
    fn summable() {
        let (partial, tail) = thm54_summability(1, 0.5, 3, 1.05, 0.25, 1e-2, 1.0, 1_000_000).unwrap();
        assert!(partial.is_finite() && partial < 1.0);
        assert!((0.0..1e-6).contains(&tail));
        // small gamma: slow decay, but the remainder bound is still finite
        let (p2, t2) = thm54_summability(1, 0.5, 3, 1.05, 0.25, 1e-4, 1.0, 10_000).unwrap();
        assert!(p2.is_finite() && t2.is_finite() && t2 > 0.0);
    }

    #[test]
    fn k_schedule_examples() {
        assert_eq!(k_schedule(std::f64::consts::E, 1.0).unwrap(), 1.0);
        assert_eq!(k_schedule(4f64.exp(), 0.5).unwrap(), 2.0);
    }

    #[test]
    fn report_fields() {
        let r = BoundReport::compute(BoundInputs {
            d: 2,
            alpha: 0.5,
            k: 3,
            k_bound: 2.0,
            n: 1000,
            delta: 0.1,
            delta1: 1.0,
            c1_star: 1.0,
            exact_integral: false,
        })
        .unwrap();
        assert!(r.regularity_ok);
        assert_eq!(r.b1 + r.b2, 1.0);
        assert!(r.c.unwrap() > 0.0 && r.gamma.unwrap() > 0.0);
        let tail = r.mcdiarmid_tail.unwrap();
        assert!((0.0..=1.0).contains(&tail));
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"regularity_ok\":true"));
        let bad = BoundReport::compute(BoundInputs { d: 4, k: 1, ..r.inputs.clone() }).unwrap();
        assert!(!bad.regularity_ok && bad.c.is_none());
    }

    #[test]
    fn monotone_over_lattice() {
        for d in 1..=2 {
            for k in 2..=4 {
                for alpha in [0.3, 1.0] {
                    if check_regular(d, alpha, k).is_err() {
                        continue;
                    }
                    let mut prev_k = 0.0;
                    for kb in [1.5, 2.0, 3.0] {
                        let v = dudley_bound(d, alpha, k, kb, 100, 1.0, false, 1.0).unwrap();
                        assert!(v >= prev_k);
                        prev_k = v;
                        let mut prev_n = f64::INFINITY;
                        for n in [1u64, 10, 100, 1000] {
                            let v = dudley_bound(d, alpha, k, kb, n, 1.0, true, 1.0).unwrap();
                            assert!(v <= prev_n);
                            prev_n = v;
                        }
                    }
                }
            }
        }
    }
}
