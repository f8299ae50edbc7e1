use crate::error::{Error, Result};
use crate::math::{linear_fit, log_mean_exp, max_weight_fraction, mean, std_error};
use crate::prelude::*;
use crate::sim::{exp_moment_kappa_cap, Trajectory, WaveModel};
use crate::spectral::PhaseState;

fn check_grid(trajs: &[Trajectory]) -> Result<&[f64]> {
    let first = trajs.first().ok_or_else(|| Error::input("empty ensemble"))?;
    if trajs.iter().any(|t| t.times.len() != first.times.len()) {
        return Err(Error::input("ensemble members have different time grids"));
    }
    if first.times.len() < 3 {
        return Err(Error::input("need at least three recorded times"));
    }
    Ok(&first.times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub kappa: f64,
    pub s: f64,
    pub times: Vec<f64>,
    /// `log E exp int_0^t |y|_{H^s}^kappa`.
    pub log_moment: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Largest deviation of the log moment from the affine fit.
    pub max_deviation: f64,
    pub max_weight: f64,
    pub tail_dominated: bool,
    pub pass: bool,
}

/// Growth of the exponential moment of `int |y|_{H^s}^kappa`. The affine fit
/// uses `t >= tail_start * T`; a curve flat to within 1% of its size counts as affine.
pub fn exponential_tightness_probe(
    model: &WaveModel,
    trajs: &[Trajectory],
    kappa: f64,
    s: f64,
    tail_start: f64,
) -> Result<TightnessReport> {
    if !(kappa > 0.0 && kappa < 1.0) || !(s >= 0.0 && s < 0.5) {
        return Err(Error::config(alloc::format!("need kappa in (0, 1) and s in [0, 1/2), got {kappa}, {s}")));
    }
    let times = check_grid(trajs)?.to_vec();
    let b = &model.basis;
    let integrals: Vec<Vec<f64>> = trajs
        .iter()
        .map(|tr| {
            let f: Vec<f64> =
                tr.states.iter().map(|y| b.phase_norm_s_sq(y, model.alpha, s).sqrt().powf(kappa)).collect();
            let mut acc = 0.0;
            let mut out = vec![0.0];
            for k in 1..times.len() {
                acc += 0.5 * (times[k] - times[k - 1]) * (f[k] + f[k - 1]);
                out.push(acc);
            }
            out
        })
        .collect();
    let mut log_moment = Vec::with_capacity(times.len());
    let mut max_weight: f64 = 0.0;
    for k in 0..times.len() {
        let col: Vec<f64> = integrals.iter().map(|i| i[k]).collect();
        log_moment.push(log_mean_exp(&col));
        if trajs.len() > 1 {
            max_weight = max_weight.max(max_weight_fraction(&col));
        }
    }
    let t_end = *times.last().unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&log_moment).filter(|(t, _)| **t >= tail_start * t_end).map(|(t, l)| (*t, *l)).unzip();
    if xs.len() < 3 {
        return Err(Error::input("fit window holds fewer than three times"));
    }
    let fit = linear_fit(&xs, &ys);
    let max_deviation = xs.iter().zip(&ys).map(|(x, y)| (y - fit.predict(*x)).abs()).fold(0.0, f64::max);
    let flat_tol = 1e-2 * (1.0 + ys.iter().fold(0.0f64, |m, y| m.max(y.abs())));
    let pass = fit.slope.is_finite() && (fit.r2 > 0.95 || max_deviation <= flat_tol);
    Ok(TightnessReport {
        kappa,
        s,
        times,
        log_moment,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        max_deviation,
        max_weight,
        tail_dominated: max_weight > 0.1,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovWeights {
    /// `1 + |y|_{H^s}^2 + E^4`.
    pub w: f64,
    /// `1 + |y|_{H^s}^{2m} + E^{4m}`.
    pub w_m: f64,
    /// `w_m + exp(kappa E)`.
    pub w_tilde: f64,
}

pub fn lyapunov_weights(model: &WaveModel, y: &PhaseState, m: u32, kappa: f64, s: f64) -> LyapunovWeights {
    let hs = model.basis.phase_norm_s_sq(y, model.alpha, s);
    let e = model.energy(y);
    let w = 1.0 + hs + e.powi(4);
    let w_m = 1.0 + hs.powi(m as i32) + e.powi(4 * m as i32);
    LyapunovWeights { w, w_m, w_tilde: w_m + (kappa * e).exp() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDrift {
    pub times: Vec<f64>,
    /// Ensemble mean of `w_tilde_m(y_t)`.
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Plateau constant fitted on the last quarter of the horizon.
    pub c_m: f64,
    pub pass: bool,
}

/// Fits the plateau `C_m` on the last quarter of the horizon and checks
/// `E w_tilde_m(y_t) <= 2 exp(-alpha m t) w_tilde_m(y_0) + C_m` at every time.
pub fn lyapunov_drift_check(model: &WaveModel, trajs: &[Trajectory], m: u32, kappa: f64, s: f64) -> Result<LyapunovDrift> {
    let cap = exp_moment_kappa_cap(model);
    if kappa < 0.0 || kappa > cap * (1.0 + 1e-12) || m == 0 {
        return Err(Error::config(alloc::format!("need m >= 1 and kappa in [0, alpha/(2B) = {cap}]")));
    }
    let times = check_grid(trajs)?.to_vec();
    let mut means = Vec::with_capacity(times.len());
    let mut ses = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let col: Vec<f64> = trajs.iter().map(|t| lyapunov_weights(model, &t.states[k], m, kappa, s).w_tilde).collect();
        means.push(mean(&col));
        ses.push(if col.len() > 1 { std_error(&col) } else { 0.0 });
    }
    let w0 = means[0];
    let rate = model.alpha * m as f64;
    let t_end = times.last().copied().unwrap_or(0.0);
    let envelope = |t: f64| 2.0 * (-rate * t).exp() * w0;
    let (plateau, plateau_se): (Vec<f64>, Vec<f64>) =
        times.iter().zip(means.iter().zip(&ses)).filter(|(t, _)| **t >= 0.75 * t_end).map(|(_, (e, s))| (*e, *s)).unzip();
    let c_m = mean(&plateau) + 3.0 * plateau_se.iter().fold(0.0, |a: f64, b| a.max(*b));
    let pass = c_m.is_finite()
        && times
            .iter()
            .zip(means.iter().zip(&ses))
            .all(|(t, (e, se))| *e <= envelope(*t) + c_m + 3.0 * se + 1e-12 * e.abs());
    Ok(LyapunovDrift { times, mean: means, std_err: ses, c_m, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_ensemble, NoiseModel, NoiseRule, Nonlinearity, SimConfig};
    use crate::spectral::{Field, SpectralBasis};
    use core::f64::consts::PI;

    fn model(amp: f64) -> WaveModel {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, amp, true).unwrap();
        WaveModel::new(basis, Nonlinearity::free(), noise, 1.0).unwrap()
    }

    #[test]
    fn weights_at_origin() {
        let m = model(1.0);
        let w = lyapunov_weights(&m, &PhaseState::zeros(8), 1, 0.1, 0.4);
        assert_eq!((w.w, w.w_m, w.w_tilde), (1.0, 1.0, 2.0));
        let y = PhaseState::at_rest(Field::single_mode(8, 2, 0.3));
        let w = lyapunov_weights(&m, &y, 1, 0.1, 0.4);
        assert_eq!(w.w, w.w_m);
    }

    #[test]
    fn noiseless_log_moment_saturates() {
        let m = model(0.0);
        let y0 = PhaseState::at_rest(Field::single_mode(8, 1, 1.0));
        let trajs = simulate_ensemble(&m, &SimConfig::new(0.02, 80.0, 0).with_stride(10), &y0, 1).unwrap();
        let rep = exponential_tightness_probe(&m, &trajs, 0.5, 0.4, 0.5).unwrap();
        assert!(rep.slope.abs() < 1e-3 && rep.pass, "{rep:?}");
        // |y|^kappa -> 1 away from the origin, so the log moment tends to t
        let small = exponential_tightness_probe(&m, &trajs, 1e-6, 0.4, 0.5).unwrap();
        assert!((small.slope - 1.0).abs() < 1e-4);
    }

    #[test]
    fn driven_linear_run_is_tight_and_drifts() {
        let m = model(1.0);
        let y0 = PhaseState::at_rest(Field::single_mode(8, 1, 2.0));
        let trajs = simulate_ensemble(&m, &SimConfig::new(0.02, 20.0, 11).with_stride(10), &y0, 200).unwrap();
        let rep = exponential_tightness_probe(&m, &trajs, 0.5, 0.4, 0.2).unwrap();
        assert!(rep.pass && rep.slope > 0.0, "{rep:?}");
        let cap = exp_moment_kappa_cap(&m);
        let drift = lyapunov_drift_check(&m, &trajs, 1, cap / 2.0, 0.4).unwrap();
        assert!(drift.pass && drift.c_m.is_finite(), "{:?}", (drift.c_m, &drift.mean[..5], &drift.mean[drift.mean.len() - 5..], drift.std_err.last()));
    }
}
