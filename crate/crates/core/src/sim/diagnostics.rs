use super::{SimConfig, Trajectory, WaveModel};
use crate::error::{Error, Result};
use crate::math::{linear_fit, max_weight_fraction, mean, std_error, LinearFit};
use crate::prelude::*;
use crate::rng::stream;
use crate::spectral::PhaseState;

fn check_grid(trajs: &[Trajectory]) -> Result<&[f64]> {
    let first = trajs.first().ok_or_else(|| Error::input("empty ensemble"))?;
    for t in trajs {
        if t.times.len() != first.times.len() {
            return Err(Error::input("trajectories are sampled on different grids"));
        }
    }
    Ok(&first.times)
}

/// Energy series with fitted a priori constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    pub times: Vec<f64>,
    /// Ensemble mean of `E(y(t))` (the path itself for a single run).
    pub energy: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Smallest `C` with `E(t) <= E(0) e^{-alpha t} + C` on the grid.
    pub c_fit: f64,
    /// Smallest `K` with `E(t) + alpha/2 int_0^t |y|_H^2 <= E(0) + K t`.
    pub dissipation_k: f64,
    /// Fit of `log(E(t) - e_ref)` against `t`; `None` when fewer than three
    /// points lie above the round-off floor.
    pub decay: Option<LinearFit>,
}

pub fn energy_audit(trajs: &[Trajectory], alpha: f64, e_ref: f64) -> Result<EnergyAudit> {
    let times = check_grid(trajs)?.to_vec();
    let n = times.len();
    let mut energy = Vec::with_capacity(n);
    let mut std_err = Vec::with_capacity(n);
    let mut norm_sq = Vec::with_capacity(n);
    for k in 0..n {
        let e: Vec<f64> = trajs.iter().map(|t| t.energies[k]).collect();
        energy.push(mean(&e));
        std_err.push(std_error(&e));
        norm_sq.push(mean(&trajs.iter().map(|t| t.norm_h[k] * t.norm_h[k]).collect::<Vec<_>>()));
    }
    let e0 = energy.first().copied().unwrap_or(0.0);
    let mut c_fit = 0.0f64;
    for (t, e) in times.iter().zip(&energy) {
        c_fit = c_fit.max(e - e0 * (-alpha * t).exp());
    }
    let mut dissipation_k = 0.0f64;
    let mut integral = 0.0;
    for k in 1..n {
        let dt = times[k] - times[k - 1];
        integral += 0.5 * dt * (norm_sq[k] + norm_sq[k - 1]);
        if times[k] > 0.0 {
            dissipation_k = dissipation_k.max((energy[k] + 0.5 * alpha * integral - e0) / times[k]);
        }
    }
    let r0 = (e0 - e_ref).abs();
    let floor = 1e-9 * r0.max(1e-300);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, e) in times.iter().zip(&energy) {
        let r = e - e_ref;
        if r > floor {
            xs.push(*t);
            ys.push(r.ln());
        }
    }
    let decay = if xs.len() >= 3 { Some(linear_fit(&xs, &ys)) } else { None };
    Ok(EnergyAudit { times, energy, std_err, c_fit, dissipation_k, decay })
}

/// Largest exponent for which the exponential moment is controlled, `alpha / (2B)`.
pub fn exp_moment_kappa_cap(model: &WaveModel) -> f64 {
    let b = model.noise.b_sum();
    if b == 0.0 {
        f64::INFINITY
    } else {
        model.alpha / (2.0 * b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpMomentProbe {
    pub kappa: f64,
    pub times: Vec<f64>,
    /// Monte Carlo `E exp(kappa E(y(t)))`.
    pub estimate: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Largest single summand as a fraction of the total, per time.
    pub max_weight: Vec<f64>,
    pub tail_dominated: bool,
    /// Smallest `C` with `estimate(t) <= estimate(0) e^{-alpha t} + C` on the first half.
    pub c_fit: f64,
    /// The second half stays below the first-half envelope within 3 standard errors.
    pub bounded: bool,
}

pub fn exp_moment_probe(model: &WaveModel, trajs: &[Trajectory], kappa: f64) -> Result<ExpMomentProbe> {
    let cap = exp_moment_kappa_cap(model);
    if kappa < 0.0 || kappa > cap * (1.0 + 1e-12) {
        return Err(Error::config(alloc::format!("kappa = {kappa} must lie in [0, alpha/(2B) = {cap}]")));
    }
    let times = check_grid(trajs)?.to_vec();
    let mut estimate = Vec::new();
    let mut std_err = Vec::new();
    let mut max_weight = Vec::new();
    for k in 0..times.len() {
        let expo: Vec<f64> = trajs.iter().map(|t| kappa * t.energies[k]).collect();
        let vals: Vec<f64> = expo.iter().map(|x| x.exp()).collect();
        estimate.push(mean(&vals));
        std_err.push(std_error(&vals));
        max_weight.push(if trajs.len() > 1 { max_weight_fraction(&expo) } else { 0.0 });
    }
    let tail_dominated = max_weight.iter().any(|w| *w > 0.1);
    let alpha = model.alpha;
    let e0 = estimate.first().copied().unwrap_or(1.0);
    let t_half = times.last().copied().unwrap_or(0.0) / 2.0;
    let mut c_fit = 0.0f64;
    for (t, e) in times.iter().zip(&estimate) {
        if *t <= t_half {
            c_fit = c_fit.max(e - e0 * (-alpha * t).exp());
        }
    }
    let bounded = times
        .iter()
        .zip(estimate.iter().zip(&std_err))
        .filter(|(t, _)| **t > t_half)
        .all(|(t, (e, se))| *e <= e0 * (-alpha * t).exp() + c_fit + 3.0 * se + 1e-12 * e.abs());
    Ok(ExpMomentProbe { kappa, times, estimate, std_err, max_weight, tail_dominated, c_fit, bounded })
}

/// Thresholds of the growth functional `F(t) = |E(t)| + alpha int_0^t |E|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthMonitor {
    pub alpha: f64,
    pub l_rate: f64,
    pub m_rate: f64,
    pub r: f64,
}

impl GrowthMonitor {
    /// `beta = alpha / (8 sup b_j^2)`.
    pub fn beta(alpha: f64, sup_b_sq: f64) -> f64 {
        if sup_b_sq == 0.0 {
            f64::INFINITY
        } else {
            alpha / (8.0 * sup_b_sq)
        }
    }

    /// Defaults `L = K + 4 alpha C`, `M = 2/beta`, `r = 5/beta + 4C` from the
    /// fitted audit constants `K` and `C`.
    pub fn defaults(model: &WaveModel, k_fit: f64, c_fit: f64) -> Self {
        let alpha = model.alpha;
        let beta = Self::beta(alpha, model.noise.sup_b_sq());
        GrowthMonitor {
            alpha,
            l_rate: k_fit + 4.0 * alpha * c_fit,
            m_rate: 2.0 / beta,
            r: 5.0 / beta + 4.0 * c_fit,
        }
    }

    pub fn functional(&self, times: &[f64], energies: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut integral = 0.0;
        for k in 0..times.len() {
            if k > 0 {
                integral += 0.5 * (times[k] - times[k - 1]) * (energies[k].abs() + energies[k - 1].abs());
            }
            out.push(energies[k].abs() + self.alpha * integral);
        }
        out
    }

    /// First grid time with `F(t) >= F(0) + (L + M) t + r`; `None` when never.
    pub fn stopping_time(&self, times: &[f64], energies: &[f64]) -> Option<f64> {
        let f = self.functional(times, energies);
        let f0 = *f.first()?;
        times
            .iter()
            .zip(&f)
            .find(|(t, v)| **v >= f0 + (self.l_rate + self.m_rate) * **t + self.r)
            .map(|(t, _)| *t)
    }

    /// `sup_t (F(t) - L t) - F(0)`.
    pub fn excess(&self, times: &[f64], energies: &[f64]) -> f64 {
        let f = self.functional(times, energies);
        let f0 = f.first().copied().unwrap_or(0.0);
        times.iter().zip(&f).map(|(t, v)| v - self.l_rate * t - f0).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub monitor: GrowthMonitor,
    pub stopping_times: Vec<Option<f64>>,
    pub excess: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// Number of paths with `excess >= r` per grid value.
    pub counts: Vec<usize>,
    pub exceedance: Vec<f64>,
    /// Fit of `log P(excess >= r)` on `r` over grid points with at least 5 hits.
    pub tail_fit: Option<LinearFit>,
    /// Exponent of the theoretical tail bound `exp(4 beta C - beta r)`.
    pub beta: f64,
}

pub fn growth_monitor(trajs: &[Trajectory], monitor: GrowthMonitor, beta: f64, r_grid: &[f64]) -> Result<GrowthReport> {
    check_grid(trajs)?;
    let stopping_times = trajs.iter().map(|t| monitor.stopping_time(&t.times, &t.energies)).collect();
    let excess: Vec<f64> = trajs.iter().map(|t| monitor.excess(&t.times, &t.energies)).collect();
    let n = excess.len() as f64;
    let counts: Vec<usize> = r_grid.iter().map(|r| excess.iter().filter(|s| **s >= *r).count()).collect();
    let exceedance = counts.iter().map(|c| *c as f64 / n).collect::<Vec<_>>();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for ((r, c), p) in r_grid.iter().zip(&counts).zip(&exceedance) {
        if *c >= 5 {
            xs.push(*r);
            ys.push(p.ln());
        }
    }
    let tail_fit = if xs.len() >= 3 { Some(linear_fit(&xs, &ys)) } else { None };
    Ok(GrowthReport {
        monitor,
        stopping_times,
        excess,
        r_grid: r_grid.to_vec(),
        counts,
        exceedance,
        tail_fit,
        beta,
    })
}

/// Decomposition `u = v + z`: `v` solves the linear equation with the same
/// noise and forcing from `y0`, `z` solves the equation driven by `-f(u)`
/// from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularitySplit {
    pub times: Vec<f64>,
    pub v_norm_h: Vec<f64>,
    /// `|z|_{H^s}` with `s = cfg.sobolev_s`.
    pub z_norm_hs: Vec<f64>,
    pub u_final: PhaseState,
    pub v_final: PhaseState,
    pub z_final: PhaseState,
}

impl RegularitySplit {
    pub fn sup_z(&self) -> f64 {
        self.z_norm_hs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn regularity_split(model: &WaveModel, cfg: &SimConfig, y0: &PhaseState, stream_index: u64) -> Result<RegularitySplit> {
    model.basis.check_state(y0)?;
    let stepper = cfg.stepper(model)?;
    let mut rng = stream(cfg.seed, stream_index);
    let mut ws = stepper.workspace(model);
    let mut u = y0.clone();
    let mut v = y0.clone();
    let h = model.forcing.coeffs().to_vec();
    let (alpha, s) = (model.alpha, cfg.sobolev_s);
    let basis = &model.basis;
    let mut times = vec![0.0];
    let mut v_norm_h = vec![basis.phase_norm_sq(&v, alpha).sqrt()];
    let mut z_norm_hs = vec![0.0];
    let n = cfg.steps();
    for k in 0..n {
        stepper.draw(&mut rng, &mut ws.increment);
        stepper.drift_force(model, u.position.coeffs(), &mut ws.grid, &mut ws.force);
        let inc = if stepper.is_noisy() { Some(&ws.increment) } else { None };
        stepper.advance(&mut u, &ws.force, inc);
        stepper.advance(&mut v, &h, inc);
        if !u.is_finite() {
            return Err(Error::NonFinite { step: k, what: "phase state".to_string() });
        }
        if (k + 1) % cfg.stride == 0 || k + 1 == n {
            let z = u.sub(&v);
            times.push((k + 1) as f64 * cfg.dt);
            v_norm_h.push(basis.phase_norm_sq(&v, alpha).sqrt());
            z_norm_hs.push(basis.phase_norm_s_sq(&z, alpha, s).sqrt());
        }
    }
    let z_final = u.sub(&v);
    Ok(RegularitySplit { times, v_norm_h, z_norm_hs, u_final: u, v_final: v, z_final })
}

#[cfg(test)]
mod tests {
    use super::super::{simulate, simulate_ensemble, NoiseModel, NoiseRule, Nonlinearity};
    use super::*;
    use crate::spectral::{Field, SpectralBasis};
    use core::f64::consts::PI;

    fn sample_state(m: usize) -> PhaseState {
        let q: Vec<f64> = (1..=m).map(|j| 0.8 / (j * j) as f64).collect();
        let p: Vec<f64> = (1..=m).map(|j| -0.3 / (j * j) as f64).collect();
        PhaseState::new(Field::from_coeffs(q), Field::from_coeffs(p))
    }

    #[test]
    fn free_wave_decays_at_least_at_rate_alpha() {
        let basis = SpectralBasis::interval(PI, 16).unwrap();
        let model = WaveModel::linear(basis, 1.0).unwrap();
        let cfg = SimConfig::new(0.01, 20.0, 0).with_stride(10);
        let traj = simulate(&model, &cfg, &sample_state(16)).unwrap();
        let audit = energy_audit(&[traj], model.alpha, 0.0).unwrap();
        let slope = audit.decay.unwrap().slope;
        assert!(slope <= -0.9 * model.alpha, "slope {slope}, alpha {}", model.alpha);
        assert!(audit.c_fit < 1e-12);
    }

    #[test]
    fn zero_state_audit_is_flat() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let model = WaveModel::linear(basis, 1.0).unwrap();
        let traj = simulate(&model, &SimConfig::new(0.01, 1.0, 0), &PhaseState::zeros(8)).unwrap();
        let audit = energy_audit(&[traj], model.alpha, 0.0).unwrap();
        assert!(audit.energy.iter().all(|e| *e == 0.0));
        assert!(audit.decay.is_none());
    }

    #[test]
    fn split_without_nonlinearity_has_no_z_part() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 1.0, true).unwrap();
        let model = WaveModel::new(basis, Nonlinearity::free(), noise, 1.0).unwrap();
        let split = regularity_split(&model, &SimConfig::new(0.01, 2.0, 3), &sample_state(8), 0).unwrap();
        assert!(split.sup_z() < 1e-13);
    }

    #[test]
    fn noiseless_linear_part_contracts() {
        let basis = SpectralBasis::interval(PI, 16).unwrap();
        let nl = Nonlinearity::klein_gordon(1.0, 0.0).unwrap().with_default_nu(1.0, 1.0);
        let model = WaveModel::new(basis, nl, NoiseModel::zero(16), 1.0).unwrap();
        let y0 = sample_state(16);
        let split = regularity_split(&model, &SimConfig::new(0.01, 10.0, 0).with_stride(5), &y0, 0).unwrap();
        let n0 = split.v_norm_h[0] * split.v_norm_h[0];
        for (t, v) in split.times.iter().zip(&split.v_norm_h) {
            assert!(v * v <= n0 * (-model.alpha * t).exp() * (1.0 + 1e-12));
        }
        assert!(split.sup_z().is_finite() && split.sup_z() > 0.0);
    }

    #[test]
    fn exp_moment_trivial_cases() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let nl = Nonlinearity::klein_gordon(1.0, 0.0).unwrap();
        let noiseless = WaveModel::new(basis.clone(), nl.clone(), NoiseModel::zero(8), 1.0).unwrap();
        let cfg = SimConfig::new(0.01, 2.0, 0).with_stride(20);
        let traj = simulate(&noiseless, &cfg, &sample_state(8)).unwrap();
        let probe = exp_moment_probe(&noiseless, &[traj.clone()], 0.3).unwrap();
        for (e, en) in probe.estimate.iter().zip(&traj.energies) {
            assert_eq!(*e, (0.3 * en).exp());
        }
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 1.0, true).unwrap();
        let noisy = WaveModel::new(basis, nl, noise, 1.0).unwrap();
        let ens = simulate_ensemble(&noisy, &cfg, &sample_state(8), 8).unwrap();
        let probe = exp_moment_probe(&noisy, &ens, 0.0).unwrap();
        assert!(probe.estimate.iter().all(|e| *e == 1.0));
        assert!(exp_moment_probe(&noisy, &ens, 10.0).is_err());
    }

    #[test]
    fn noiseless_path_never_stops() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let model = WaveModel::linear(basis, 1.0).unwrap();
        let traj = simulate(&model, &SimConfig::new(0.01, 5.0, 0), &sample_state(8)).unwrap();
        let mon = GrowthMonitor::defaults(&model, 0.0, 1.0);
        assert_eq!(mon.stopping_time(&traj.times, &traj.energies), None);
        let rep = growth_monitor(&[traj], mon, f64::INFINITY, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(rep.stopping_times, vec![None]);
    }
}
