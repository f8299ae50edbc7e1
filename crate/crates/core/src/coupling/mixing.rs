use crate::error::{Error, Result};
use crate::math::{linear_fit, mean};
use crate::prelude::*;
use crate::rng::{substream, StreamRng};
use crate::sim::{simulate_ensemble, SimConfig, WaveModel};
use crate::spectral::{PhaseState, SpectralBasis};
use rand::Rng;

/// Bounded test functions, each 1-Lipschitz for `|.|_H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// `tanh(sqrt(lambda_j) q_j)`, 0-based `j`.
    TanhPosition(usize),
    /// `tanh(p_j + alpha q_j)`, 0-based `j`.
    TanhVelocity(usize),
    /// `min(|y|_H, 1)`.
    ClippedNorm,
}

impl Observable {
    pub fn eval(&self, basis: &SpectralBasis, y: &PhaseState, alpha: f64) -> f64 {
        let q = y.position.coeffs();
        let p = y.velocity.coeffs();
        match *self {
            Observable::TanhPosition(j) => (basis.eigenvalues()[j].sqrt() * q[j]).tanh(),
            Observable::TanhVelocity(j) => (p[j] + alpha * q[j]).tanh(),
            Observable::ClippedNorm => basis.phase_norm_sq(y, alpha).sqrt().min(1.0),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Position and velocity probes on the first `k` modes plus the clipped norm.
    pub fn standard_set(k: usize) -> Vec<Observable> {
        let mut v: Vec<Observable> = (0..k).map(Observable::TanhPosition).collect();
        v.extend((0..k).map(Observable::TanhVelocity));
        v.push(Observable::ClippedNorm);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingOptions {
    pub paths: usize,
    pub observables: Vec<Observable>,
    /// Fit window starts at this fraction of the horizon.
    pub tail_start: f64,
    pub bootstrap: usize,
}

impl MixingOptions {
    pub fn new(paths: usize, modes: usize) -> Self {
        MixingOptions { paths, observables: Observable::standard_set(modes.min(4)), tail_start: 0.2, bootstrap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub times: Vec<f64>,
    /// `max_psi |E_z psi(y_t) - E_z' psi(y_t)|`.
    pub delta: Vec<f64>,
    /// `sup_{s >= t} delta(s)`.
    pub envelope: Vec<f64>,
    pub kappa: f64,
    /// Bootstrap 95% interval.
    pub ci: (f64, f64),
    pub pass: bool,
}

fn delta_series(vz: &[Vec<Vec<f64>>], vzp: &[Vec<Vec<f64>>], idx: &[usize]) -> Vec<f64> {
    let nt = vz[0].len();
    (0..nt)
        .map(|k| {
            vz.iter()
                .zip(vzp)
                .map(|(a, b)| {
                    let ma = mean(&idx.iter().map(|&i| a[k][i]).collect::<Vec<_>>());
                    let mb = mean(&idx.iter().map(|&i| b[k][i]).collect::<Vec<_>>());
                    (ma - mb).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn envelope(delta: &[f64]) -> Vec<f64> {
    let mut env = delta.to_vec();
    for k in (0..env.len().saturating_sub(1)).rev() {
        env[k] = env[k].max(env[k + 1]);
    }
    env
}

fn fit_kappa(times: &[f64], env: &[f64], t0: f64) -> f64 {
    let e0 = env.first().copied().unwrap_or(0.0);
    let floor = (1e-12 * e0).max(1e-15);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, e) in times.iter().zip(env) {
        if *t >= t0 && *e > floor {
            xs.push(*t);
            ys.push(e.ln());
        }
    }
    if xs.len() < 3 {
        return f64::INFINITY;
    }
    -linear_fit(&xs, &ys).slope
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Ensemble estimate of the exponential mixing rate between the laws
/// started at `z` and `z'`. Both ensembles use the same random streams, so
/// the difference of the empirical means is free of the common sampling noise.
pub fn mixing_rate(
    model: &WaveModel,
    cfg: &SimConfig,
    z: &PhaseState,
    z_prime: &PhaseState,
    opts: &MixingOptions,
) -> Result<MixingReport> {
    if opts.paths == 0 || opts.observables.is_empty() {
        return Err(Error::input("mixing_rate needs paths and observables"));
    }
    let ez = simulate_ensemble(model, cfg, z, opts.paths)?;
    let ezp = simulate_ensemble(model, cfg, z_prime, opts.paths)?;
    let times = ez[0].times.clone();
    let values = |ens: &[crate::sim::Trajectory]| -> Vec<Vec<Vec<f64>>> {
        opts.observables
            .iter()
            .map(|o| {
                (0..times.len())
                    .map(|k| ens.iter().map(|t| o.eval(&model.basis, &t.states[k], model.alpha)).collect())
                    .collect()
            })
            .collect()
    };
    let vz = values(&ez);
    let vzp = values(&ezp);
    let all: Vec<usize> = (0..opts.paths).collect();
    let delta = delta_series(&vz, &vzp, &all);
    let env = envelope(&delta);
    let t0 = opts.tail_start * cfg.horizon;
    let kappa = fit_kappa(&times, &env, t0);
    let mut boot: Vec<f64> = (0..opts.bootstrap)
        .map(|b| {
            let mut rng: StreamRng = substream(cfg.seed, 0xB0_07, b as u64);
            let idx: Vec<usize> = (0..opts.paths).map(|_| rng.random_range(0..opts.paths)).collect();
            let d = delta_series(&vz, &vzp, &idx);
            fit_kappa(&times, &envelope(&d), t0)
        })
        .collect();
    boot.sort_by(|a, b| a.total_cmp(b));
    let ci = if boot.is_empty() { (kappa, kappa) } else { (percentile(&boot, 0.025), percentile(&boot, 0.975)) };
    Ok(MixingReport { times, delta, envelope: env, kappa, ci, pass: ci.0 > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{NoiseModel, NoiseRule, Nonlinearity};
    use crate::spectral::Field;
    use core::f64::consts::PI;

    fn model(nl: Nonlinearity) -> WaveModel {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 0.5, true).unwrap();
        WaveModel::new(basis, nl, noise, 1.0).unwrap()
    }

    #[test]
    fn identical_starts_have_zero_distance() {
        let m = model(Nonlinearity::free());
        let z = PhaseState::at_rest(Field::single_mode(8, 1, 0.5));
        let mut opts = MixingOptions::new(16, 8);
        opts.bootstrap = 10;
        let rep = mixing_rate(&m, &SimConfig::new(0.02, 4.0, 1).with_stride(10), &z, &z, &opts).unwrap();
        assert!(rep.delta.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn linear_mixing_rate_exceeds_half_alpha() {
        let m = model(Nonlinearity::free());
        let z = PhaseState::at_rest(Field::single_mode(8, 1, 1.0));
        let zp = PhaseState::at_rest(Field::single_mode(8, 2, -0.5));
        let mut opts = MixingOptions::new(32, 8);
        opts.bootstrap = 50;
        let rep = mixing_rate(&m, &SimConfig::new(0.02, 15.0, 4).with_stride(10), &z, &zp, &opts).unwrap();
        assert!(rep.pass, "{:?}", (rep.kappa, rep.ci));
        assert!(rep.ci.1 >= m.alpha / 2.0);
    }
}
