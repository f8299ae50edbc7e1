use super::dynamics::Dynamics;
use super::feynman_kac::Potential;
use super::legendre::RateCurve;
use crate::error::{Error, Result};
use crate::math::{linear_fit, linspace, trapezoid};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct LdpOptions {
    pub paths: usize,
    pub horizons: Vec<f64>,
    pub seed: u64,
    /// Minimum number of paths landing in `O` for a horizon to be used.
    pub min_hits: usize,
    pub rel_tol: f64,
    /// Absolute slack used when the predicted rate is zero.
    pub abs_tol: f64,
}

impl LdpOptions {
    pub fn new(paths: usize, seed: u64) -> Self {
        LdpOptions { paths, horizons: vec![4.0, 8.0, 16.0, 32.0], seed, min_hits: 50, rel_tol: 0.2, abs_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpRow {
    pub lo: f64,
    pub hi: f64,
    pub contains_mean: bool,
    /// `-inf_O I`.
    pub predicted: f64,
    /// Extrapolated `lim (1/t) log P`.
    pub empirical: f64,
    pub horizons: Vec<f64>,
    pub hits: Vec<usize>,
    pub log_p_over_t: Vec<f64>,
    pub rel_error: f64,
    pub pass: bool,
}

/// Compares `(1/t) log P((1/t) int psi in O)` against `-inf_O I`.
///
/// All horizons are read off the same paths. When `O` excludes the mean,
/// `(log P - log L(t)) / t` is regressed on `1/t`, where
/// `L(t) = int_O sqrt(t) exp(-t (I(x) - inf_O I)) dx` is the Bahadur-Rao
/// prefactor of the interval; the intercept estimates `-inf_O I`. When `O`
/// holds the mean, `log(P) / t` at the longest horizon is reported and
/// compared with `abs_tol`.
pub fn ldp_level1_check<D: Dynamics>(
    dynamics: &D,
    start: &D::State,
    psi: Potential<'_, D::State>,
    intervals: &[(f64, f64)],
    rate: &RateCurve,
    opts: &LdpOptions,
) -> Result<Vec<LdpRow>> {
    if opts.paths == 0 || opts.horizons.len() < 2 {
        return Err(Error::input("ldp_level1_check needs paths and at least two horizons"));
    }
    let dt = dynamics.dt();
    let marks: Vec<usize> = opts.horizons.iter().map(|h| ((h / dt).round() as usize).max(1)).collect();
    if marks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("horizons must be increasing"));
    }
    let last = *marks.last().unwrap();
    let averages = par_map(opts.paths, |i| -> Result<Vec<f64>> {
        let mut rng = substream(opts.seed, 0x1D9, i as u64);
        let mut x = start.clone();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for k in 1..=last {
            acc += dynamics.step_integrate(&mut x, &mut rng, psi)?;
            if k == marks[next] {
                out.push(acc / (k as f64 * dt));
                next += 1;
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean_point = rate.argmin();
    let mut rows = Vec::with_capacity(intervals.len());
    for &(lo, hi) in intervals {
        let contains_mean = lo <= mean_point && mean_point <= hi;
        let predicted = -rate.inf_over(lo, hi);
        let mut horizons = Vec::new();
        let mut hits = Vec::new();
        let mut log_p_over_t = Vec::new();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (h, &m) in marks.iter().enumerate() {
            let t = m as f64 * dt;
            let n = averages.iter().filter(|a| a[h] >= lo && a[h] <= hi).count();
            horizons.push(t);
            hits.push(n);
            let lp = (n as f64 / opts.paths as f64).ln() / t;
            log_p_over_t.push(lp);
            if n >= opts.min_hits {
                xs.push(1.0 / t);
                ys.push(if contains_mean { lp } else { lp - laplace_prefactor(rate, lo, hi, t) / t });
            }
        }
        if xs.len() < 2 {
            return Err(Error::Undersampled(alloc::format!(
                "interval [{lo}, {hi}]: fewer than two horizons with {} hits (hits {hits:?})",
                opts.min_hits
            )));
        }
        let empirical = if contains_mean { *ys.last().unwrap() } else { linear_fit(&xs, &ys).intercept };
        let err = (empirical - predicted).abs();
        let rel_error = if predicted != 0.0 { err / predicted.abs() } else { f64::NAN };
        let pass = err <= opts.rel_tol * predicted.abs() + if predicted == 0.0 { opts.abs_tol } else { 0.0 };
        rows.push(LdpRow {
            lo,
            hi,
            contains_mean,
            predicted,
            empirical,
            horizons,
            hits,
            log_p_over_t,
            rel_error,
            pass,
        });
    }
    Ok(rows)
}

fn laplace_prefactor(rate: &RateCurve, lo: f64, hi: f64, t: f64) -> f64 {
    let floor = rate.inf_over(lo, hi);
    let xs = linspace(lo, hi, 801);
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let i = rate.value_at(*x);
            if i.is_finite() { (-t * (i - floor)).exp() } else { 0.0 }
        })
        .collect();
    (t.sqrt() * trapezoid(&xs, &ys)).ln()
}
