//! Clamped B-spline bases on [0, 1]. A Bernstein basis of degree `n` is the
//! special case with no interior knots.

use serde::{Deserialize, Serialize};

/// Largest number of coefficients a component may carry.
pub const MAX_COEFS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn bernstein(degree: usize) -> Self {
        let mut knots = vec![0.0; degree + 1];
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { degree, knots }
    }

    pub fn uniform(degree: usize, interior: usize) -> Self {
        let mut knots = vec![0.0; degree + 1];
        for i in 1..=interior {
            knots.push(i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { degree, knots }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_coefs(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Greville abscissae; using them as coefficients reproduces the identity.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.n_coefs())
            .map(|i| {
                if p == 0 {
                    self.knots[i]
                } else {
                    self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }

    fn find_span(&self, t: f64) -> usize {
        let n = self.n_coefs() - 1;
        let p = self.degree;
        if t >= self.knots[n + 1] {
            return n;
        }
        if t <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Nonzero basis functions of degree `deg` at `t` on span `span`
    /// (Cox-de Boor triangle). Fills `out[0..=deg]` for indices `span-deg..=span`.
    fn basis_funs(&self, span: usize, t: f64, deg: usize, out: &mut [f64]) {
        let u = &self.knots;
        let mut left = [0.0f64; MAX_COEFS];
        let mut right = [0.0f64; MAX_COEFS];
        out[0] = 1.0;
        for j in 1..=deg {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// Value and first derivative of the spline with coefficients `coefs`.
    pub fn eval_with_derivative(&self, coefs: &[f64], t: f64) -> (f64, f64) {
        let p = self.degree;
        let t = t.clamp(0.0, 1.0);
        let span = self.find_span(t);
        let mut n = [0.0f64; MAX_COEFS];
        self.basis_funs(span, t, p, &mut n);
        let mut value = 0.0;
        for r in 0..=p {
            value += coefs[span - p + r] * n[r];
        }
        if p == 0 {
            return (value, 0.0);
        }
        let mut nd = [0.0f64; MAX_COEFS];
        self.basis_funs(span, t, p - 1, &mut nd);
        let u = &self.knots;
        let mut deriv = 0.0;
        for r in 0..p {
            let i = span - p + 1 + r;
            let denom = u[i + p] - u[i];
            if denom > 0.0 {
                deriv += p as f64 * (coefs[i] - coefs[i - 1]) / denom * nd[r];
            }
        }
        (value, deriv)
    }

    pub fn eval(&self, coefs: &[f64], t: f64) -> f64 {
        let p = self.degree;
        let t = t.clamp(0.0, 1.0);
        let span = self.find_span(t);
        let mut n = [0.0f64; MAX_COEFS];
        self.basis_funs(span, t, p, &mut n);
        (0..=p).map(|r| coefs[span - p + r] * n[r]).sum()
    }

    /// Scale factor applied to coefficient differences at derivative level `s`
    /// (1-based) for output index `i`: `(p - s + 1) / (u[i+p+1] - u[i+s])`.
    pub(crate) fn diff_scale(&self, s: usize, i: usize) -> f64 {
        let p = self.degree;
        let denom = self.knots[i + p + 1] - self.knots[i + s];
        if denom > 0.0 {
            (p + 1 - s) as f64 / denom
        } else {
            0.0
        }
    }
}
