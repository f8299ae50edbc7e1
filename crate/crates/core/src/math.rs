//! Small statistics and numerics helpers shared by the experiment modules.

use crate::prelude::*;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64
}

/// Standard error of the sample mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Summary of a Monte Carlo mean estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        Self { value: mean(xs), std_err: std_error(xs) }
    }

    /// True when `target` lies within `k` standard errors (plus an absolute slack).
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.std_err + slack
    }
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r2: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len().min(y.len());
    let nf = n as f64;
    let mx = sum(x[..n].iter().copied()) / nf;
    let my = sum(y[..n].iter().copied()) / nf;
    let sxx = sum(x[..n].iter().map(|&a| (a - mx) * (a - mx)));
    let sxy = sum(x[..n].iter().zip(&y[..n]).map(|(&a, &b)| (a - mx) * (b - my)));
    let syy = sum(y[..n].iter().map(|&b| (b - my) * (b - my)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse = sum(x[..n].iter().zip(&y[..n]).map(|(&a, &b)| {
        let r = b - intercept - slope * a;
        r * r
    }));
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_se, intercept_se) = if n > 2 && sxx > 0.0 {
        let s2 = sse / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    LinearFit { slope, intercept, slope_se, intercept_se, r2, n }
}

/// Weighted least squares with weights `w_i = 1 / sigma_i^2`.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> LinearFit {
    let n = x.len().min(y.len()).min(sigma.len());
    let w: Vec<f64> = sigma[..n].iter().map(|s| 1.0 / (s * s).max(1e-300)).collect();
    let sw = sum(w.iter().copied());
    let mx = sum((0..n).map(|i| w[i] * x[i])) / sw;
    let my = sum((0..n).map(|i| w[i] * y[i])) / sw;
    let sxx = sum((0..n).map(|i| w[i] * (x[i] - mx) * (x[i] - mx)));
    let sxy = sum((0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)));
    let syy = sum((0..n).map(|i| w[i] * (y[i] - my) * (y[i] - my)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse = sum((0..n).map(|i| {
        let r = y[i] - intercept - slope * x[i];
        w[i] * r * r
    }));
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if sxx > 0.0 { (1.0 / sxx).sqrt() } else { 0.0 };
    let intercept_se = if sxx > 0.0 { (1.0 / sw + mx * mx / sxx).sqrt() } else { 0.0 };
    LinearFit { slope, intercept, slope_se, intercept_se, r2, n }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// `N(mean, sd^2)`.
pub fn ks_distance_normal(samples: &[f64], mean: f64, sd: f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = if sd > 0.0 {
            normal_cdf((x - mean) / sd)
        } else if x >= mean {
            1.0
        } else {
            0.0
        };
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    d
}

/// Asymptotic p-value of the one-sample KS statistic (Stephens' small-n correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        total += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// `log(mean(exp(xs)))` without overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (sum(xs.iter().map(|x| (x - m).exp())) / xs.len() as f64).ln()
}

/// Largest single summand of `mean(exp(xs))` as a fraction of the total; a
/// value above 0.1 marks a tail-dominated estimator.
pub fn max_weight_fraction(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return 1.0;
    }
    let total = sum(xs.iter().map(|x| (x - m).exp()));
    1.0 / total
}

/// Jackknife standard error of a statistic computed from groups of samples.
pub fn jackknife<F>(groups: usize, stat: F) -> Estimate
where
    F: Fn(Option<usize>) -> f64,
{
    let full = stat(None);
    if groups < 2 {
        return Estimate { value: full, std_err: 0.0 };
    }
    let loo: Vec<f64> = (0..groups).map(|g| stat(Some(g))).collect();
    let m = mean(&loo);
    let g = groups as f64;
    let var = (g - 1.0) / g * sum(loo.iter().map(|x| (x - m) * (x - m)));
    Estimate { value: full, std_err: var.sqrt() }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect()
}

/// Composite trapezoid rule on a possibly non-uniform grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    sum(t.windows(2).zip(y.windows(2)).map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1])))
}
