use crate::error::{Error, Result};
use crate::math::{ks_distance_normal, ks_pvalue, linear_fit, mean, LinearFit};
use crate::prelude::*;

/// Time-weighted histogram of one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Occupation mass per bin; sums to the covered duration fraction.
    pub mass: Vec<f64>,
}

/// Running time averages `(1/t) int_0^t psi_k(y_s) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationRecord {
    pub times: Vec<f64>,
    /// `averages[k][i]` for observable `k` at `times[i]`; at `t = 0` the
    /// initial value.
    pub averages: Vec<Vec<f64>>,
    /// `int_0^T psi_k` per observable.
    pub integrals: Vec<f64>,
    pub duration: f64,
    pub histogram: Option<Histogram>,
}

impl OccupationRecord {
    pub fn final_averages(&self) -> Vec<f64> {
        self.averages.iter().map(|a| *a.last().unwrap_or(&f64::NAN)).collect()
    }

    /// Averages of the concatenated record (duration-weighted).
    pub fn concat_averages(&self, other: &OccupationRecord) -> Vec<f64> {
        let d = self.duration + other.duration;
        self.integrals.iter().zip(&other.integrals).map(|(a, b)| (a + b) / d).collect()
    }
}

/// Trapezoid occupation averages of sampled observable series.
///
/// `histogram = Some((k, lo, hi, bins))` also bins observable `k`.
pub fn occupation_measure(
    times: &[f64],
    series: &[Vec<f64>],
    histogram: Option<(usize, f64, f64, usize)>,
) -> Result<OccupationRecord> {
    if times.is_empty() {
        return Err(Error::input("empty time grid"));
    }
    for s in series {
        if s.len() != times.len() {
            return Err(Error::Dimension { expected: times.len(), found: s.len() });
        }
    }
    let t0 = times[0];
    let mut averages = Vec::with_capacity(series.len());
    let mut integrals = Vec::with_capacity(series.len());
    for s in series {
        let mut acc = 0.0;
        let mut avg = vec![s[0]];
        for k in 1..times.len() {
            acc += 0.5 * (times[k] - times[k - 1]) * (s[k] + s[k - 1]);
            avg.push(acc / (times[k] - t0));
        }
        averages.push(avg);
        integrals.push(acc);
    }
    let duration = times[times.len() - 1] - t0;
    let histogram = match histogram {
        Some((k, lo, hi, bins)) => {
            let s = series.get(k).ok_or_else(|| Error::input("histogram observable out of range"))?;
            let mut mass = vec![0.0; bins];
            let width = (hi - lo) / bins as f64;
            let mut add = |x: f64, w: f64| {
                if x >= lo && x < hi {
                    mass[(((x - lo) / width) as usize).min(bins - 1)] += w;
                }
            };
            for k in 1..times.len() {
                let w = 0.5 * (times[k] - times[k - 1]) / duration.max(f64::MIN_POSITIVE);
                add(s[k - 1], w);
                add(s[k], w);
            }
            Some(Histogram { lo, hi, mass })
        }
        None => None,
    };
    Ok(OccupationRecord { times: times.to_vec(), averages, integrals, duration, histogram })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SllnReport {
    pub horizons: Vec<f64>,
    /// Root-mean-square of `(1/t) int psi - reference` over the paths.
    pub residual: Vec<f64>,
    /// Fitted exponent of `residual ~ t^exponent`; `-inf` when the residual vanishes.
    pub exponent: f64,
    pub fit: Option<LinearFit>,
    pub pass: bool,
}

/// Decay of the time-average error at dyadic horizons `T, T/2, .., T/2^(levels-1)`.
pub fn slln_check(times: &[f64], paths: &[Vec<f64>], reference: f64, levels: usize) -> Result<SllnReport> {
    if paths.is_empty() {
        return Err(Error::input("empty ensemble"));
    }
    let occ = occupation_measure(times, paths, None)?;
    let t_end = *times.last().unwrap();
    let t0 = times[0];
    let mut horizons = Vec::new();
    let mut residual = Vec::new();
    for l in (0..levels).rev() {
        let target = t0 + (t_end - t0) / (1u64 << l) as f64;
        let idx = times.iter().position(|t| *t >= target - 1e-9 * (t_end - t0)).unwrap_or(times.len() - 1);
        if idx == 0 {
            continue;
        }
        let sq: Vec<f64> = occ.averages.iter().map(|a| (a[idx] - reference).powi(2)).collect();
        horizons.push(times[idx] - t0);
        let r = mean(&sq).sqrt();
        residual.push(if r <= 1e-12 * (1.0 + reference.abs()) { 0.0 } else { r });
    }
    if residual.iter().all(|r| *r == 0.0) {
        return Ok(SllnReport { horizons, residual, exponent: f64::NEG_INFINITY, fit: None, pass: true });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        horizons.iter().zip(&residual).filter(|(_, r)| **r > 0.0).map(|(t, r)| (t.ln(), r.ln())).unzip();
    if xs.len() < 2 {
        return Err(Error::input("too few dyadic horizons with a nonzero residual"));
    }
    let fit = linear_fit(&xs, &ys);
    Ok(SllnReport { horizons, residual, exponent: fit.slope, fit: Some(fit), pass: fit.slope <= -0.4 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltReport {
    pub sigma: f64,
    pub ks: f64,
    pub p_value: f64,
    pub pass: bool,
    pub n: usize,
}

/// Normality of `t^{-1/2} (int_0^t psi - t centering)` across the ensemble.
pub fn clt_check(integrals: &[f64], t: f64, centering: f64) -> Result<CltReport> {
    if integrals.is_empty() || !(t > 0.0) {
        return Err(Error::input("clt_check needs samples and a positive horizon"));
    }
    let xs: Vec<f64> = integrals.iter().map(|i| (i - t * centering) / t.sqrt()).collect();
    let sigma = mean(&xs.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    let ks = ks_distance_normal(&xs, 0.0, sigma);
    let p_value = if sigma == 0.0 { 1.0 } else { ks_pvalue(ks, xs.len()) };
    Ok(CltReport { sigma, ks, p_value, pass: p_value > 0.01, n: xs.len() })
}
