//! The damped stochastic wave flow: model description, time stepping and
//! trajectory diagnostics.

mod diagnostics;
mod integrator;
mod noise;
mod nonlinearity;

pub use diagnostics::{
    energy_audit, exp_moment_kappa_cap, exp_moment_probe, growth_monitor, regularity_split, EnergyAudit, ExpMomentProbe,
    GrowthMonitor, GrowthReport, RegularitySplit,
};
pub use integrator::{max_stable_dt, NoiseIncrement, Stepper, Workspace};
pub use noise::{NoiseModel, NoiseRule};
pub use nonlinearity::{DissipativityReport, Nonlinearity, NonlinearityKind};

use crate::error::{check_len, Error, Result};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::{stream, StreamRng};
use crate::spectral::{default_alpha, Field, PhaseState, SpectralBasis};

/// `u_tt + gamma u_t - Laplace u + f(u) = h + sqrt(eps) sum b_j dbeta_j e_j`
/// on a Galerkin basis.
#[derive(Debug, Clone)]
pub struct WaveModel {
    pub basis: SpectralBasis,
    pub nonlinearity: Nonlinearity,
    pub noise: NoiseModel,
    pub gamma: f64,
    pub alpha: f64,
    pub forcing: Field,
}

impl WaveModel {
    /// Model with `h = 0`, default `alpha` and the given parts.
    pub fn new(basis: SpectralBasis, nonlinearity: Nonlinearity, noise: NoiseModel, gamma: f64) -> Result<Self> {
        let alpha = default_alpha(gamma, basis.lambda1());
        let forcing = Field::zeros(basis.mode_count());
        let m = WaveModel { basis, nonlinearity, noise, gamma, alpha, forcing };
        m.validate()?;
        Ok(m)
    }

    /// Free damped wave with no noise.
    pub fn linear(basis: SpectralBasis, gamma: f64) -> Result<Self> {
        let m = basis.mode_count();
        Self::new(basis, Nonlinearity::free(), NoiseModel::zero(m), gamma)
    }

    pub fn with_forcing(mut self, h: Field) -> Result<Self> {
        check_len(self.basis.mode_count(), h.len())?;
        self.forcing = h;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        check_len(self.basis.mode_count(), noise.coeffs().len())?;
        self.noise = noise;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::config("damping gamma must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        check_len(self.basis.mode_count(), self.noise.coeffs().len())?;
        check_len(self.basis.mode_count(), self.forcing.len())?;
        if let NonlinearityKind::KleinGordon { rho, .. } = self.nonlinearity.kind {
            if !(rho > 0.0 && rho < 2.0) {
                return Err(Error::config("klein_gordon exponent must lie in (0, 2)"));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.basis.mode_count()
    }

    pub fn energy(&self, y: &PhaseState) -> f64 {
        self.basis.energy(y, &self.nonlinearity, self.alpha)
    }

    pub fn phase_norm_sq(&self, y: &PhaseState) -> f64 {
        self.basis.phase_norm_sq(y, self.alpha)
    }

    /// FNV-1a digest of every parameter that influences a trajectory.
    pub fn fingerprint(&self, cfg: &SimConfig) -> u64 {
        let mut h = Fnv::new();
        h.f64s(&[self.gamma, self.alpha, self.noise.amplitude()]);
        h.f64s(self.basis.eigenvalues());
        h.f64s(self.noise.coeffs());
        h.f64s(self.forcing.coeffs());
        h.f64s(&[self.nonlinearity.nu]);
        match &self.nonlinearity.kind {
            NonlinearityKind::KleinGordon { rho, lambda } => {
                h.u64(1);
                h.f64s(&[*rho, *lambda]);
            }
            NonlinearityKind::SineGordon => h.u64(2),
            NonlinearityKind::Polynomial(c) => {
                h.u64(3);
                h.f64s(c);
            }
        }
        h.f64s(&[cfg.dt, cfg.horizon, cfg.sobolev_s]);
        h.u64(cfg.seed);
        h.u64(cfg.stride as u64);
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn u64(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for x in xs {
            self.u64(x.to_bits());
        }
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Time-stepping parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Record every `stride`-th step.
    pub stride: usize,
    /// Sobolev index of the recorded `|y|_{H^s}` series.
    pub sobolev_s: f64,
    /// Reject steps above `0.5 / sqrt(lambda_M)`.
    pub enforce_dt_rule: bool,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, seed: u64) -> Self {
        SimConfig { dt, horizon, seed, stride: 1, sobolev_s: 0.4, enforce_dt_rule: true }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::config("horizon must be nonnegative"));
        }
        if self.enforce_dt_rule && self.dt > max_stable_dt(basis.lambda_max()) {
            return Err(Error::config(alloc::format!(
                "dt = {} violates dt <= 0.5/sqrt(lambda_M) = {}",
                self.dt,
                max_stable_dt(basis.lambda_max())
            )));
        }
        Ok(())
    }

    pub fn stepper(&self, model: &WaveModel) -> Result<Stepper> {
        self.validate(&model.basis)?;
        Stepper::new(model, self.dt)
    }
}

/// States and scalar diagnostics sampled along one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energies: Vec<f64>,
    /// `|y|_H`.
    pub norm_h: Vec<f64>,
    /// `|y|_{H^s}` with the configured `s`.
    pub norm_hs: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub fingerprint: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&PhaseState> {
        self.states.last()
    }
}

pub(crate) struct Recorder<'a> {
    model: &'a WaveModel,
    s: f64,
    scratch: Vec<f64>,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(model: &'a WaveModel, cfg: &SimConfig, stream: u64) -> Self {
        Recorder {
            model,
            s: cfg.sobolev_s,
            scratch: vec![0.0; model.basis.grid_len()],
            traj: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                energies: Vec::new(),
                norm_h: Vec::new(),
                norm_hs: Vec::new(),
                seed: cfg.seed,
                stream,
                fingerprint: model.fingerprint(cfg),
            },
        }
    }

    pub(crate) fn record(&mut self, t: f64, y: &PhaseState) {
        let b = &self.model.basis;
        let a = self.model.alpha;
        self.traj.times.push(t);
        self.traj.energies.push(b.energy_with(y, &self.model.nonlinearity, a, &mut self.scratch));
        self.traj.norm_h.push(b.phase_norm_sq(y, a).sqrt());
        self.traj.norm_hs.push(b.phase_norm_s_sq(y, a, self.s).sqrt());
        self.traj.states.push(y.clone());
    }

    pub(crate) fn finish(self) -> Trajectory {
        self.traj
    }
}

/// Run from `y0` on random stream `(cfg.seed, stream_index)`.
pub fn simulate_stream(model: &WaveModel, cfg: &SimConfig, y0: &PhaseState, stream_index: u64) -> Result<Trajectory> {
    model.basis.check_state(y0)?;
    let stepper = cfg.stepper(model)?;
    let mut rng = stream(cfg.seed, stream_index);
    run(model, &stepper, cfg, y0, &mut rng, stream_index)
}

fn run(
    model: &WaveModel,
    stepper: &Stepper,
    cfg: &SimConfig,
    y0: &PhaseState,
    rng: &mut StreamRng,
    stream_index: u64,
) -> Result<Trajectory> {
    let mut ws = stepper.workspace(model);
    let mut y = y0.clone();
    let mut rec = Recorder::new(model, cfg, stream_index);
    rec.record(0.0, &y);
    let n = cfg.steps();
    for k in 0..n {
        stepper.step(model, &mut ws, &mut y, rng, k)?;
        if (k + 1) % cfg.stride == 0 || k + 1 == n {
            rec.record((k + 1) as f64 * cfg.dt, &y);
        }
    }
    Ok(rec.finish())
}

/// Run from `y0` on stream 0 of `cfg.seed`.
pub fn simulate(model: &WaveModel, cfg: &SimConfig, y0: &PhaseState) -> Result<Trajectory> {
    simulate_stream(model, cfg, y0, 0)
}

/// `n` independent runs from `y0`, trajectory `i` on stream `i`.
pub fn simulate_ensemble(model: &WaveModel, cfg: &SimConfig, y0: &PhaseState, n: usize) -> Result<Vec<Trajectory>> {
    model.basis.check_state(y0)?;
    let stepper = cfg.stepper(model)?;
    par_map(n, |i| {
        let mut rng = stream(cfg.seed, i as u64);
        run(model, &stepper, cfg, y0, &mut rng, i as u64)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn noisy_kg(m: usize) -> WaveModel {
        let basis = SpectralBasis::interval(PI, m).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 0.5, true).unwrap();
        let nl = Nonlinearity::klein_gordon(1.0, 0.0).unwrap().with_default_nu(1.0, 1.0);
        WaveModel::new(basis, nl, noise, 1.0).unwrap()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = noisy_kg(16);
        let cfg = SimConfig::new(0.01, 2.0, 42).with_stride(10);
        let y0 = PhaseState::at_rest(Field::single_mode(16, 1, 0.5));
        let a = simulate(&model, &cfg, &y0).unwrap();
        let b = simulate(&model, &cfg, &y0).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, &SimConfig::new(0.01, 2.0, 43).with_stride(10), &y0).unwrap();
        assert_ne!(a.states.last(), c.states.last());
        assert_ne!(a.fingerprint, c.fingerprint);
    }

    #[test]
    fn zero_everything_stays_zero() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let model = WaveModel::linear(basis, 1.0).unwrap();
        let traj = simulate(&model, &SimConfig::new(0.01, 1.0, 1), &PhaseState::zeros(8)).unwrap();
        assert!(traj.states.iter().all(|y| y.position.coeffs().iter().chain(y.velocity.coeffs()).all(|x| *x == 0.0)));
        assert!(traj.energies.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn dt_rule_is_enforced() {
        let model = noisy_kg(32);
        let cfg = SimConfig::new(0.05, 1.0, 0);
        assert!(cfg.stepper(&model).is_err());
        let mut relaxed = cfg.clone();
        relaxed.enforce_dt_rule = false;
        assert!(relaxed.stepper(&model).is_ok());
    }

    #[test]
    fn ensemble_matches_individual_streams() {
        let model = noisy_kg(8);
        let cfg = SimConfig::new(0.02, 0.5, 9).with_stride(5);
        let y0 = PhaseState::zeros(8);
        let ens = simulate_ensemble(&model, &cfg, &y0, 4).unwrap();
        for (i, t) in ens.iter().enumerate() {
            assert_eq!(*t, simulate_stream(&model, &cfg, &y0, i as u64).unwrap());
        }
    }

    #[test]
    fn blow_up_is_reported_not_clamped() {
        // A focusing quartic term with large data leaves the dissipative regime.
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let nl = Nonlinearity::polynomial(vec![0.0, 0.0, -50.0]);
        let model = WaveModel::new(basis, nl, NoiseModel::zero(8), 1.0).unwrap();
        let mut cfg = SimConfig::new(0.05, 50.0, 0);
        cfg.enforce_dt_rule = false;
        let y0 = PhaseState::at_rest(Field::single_mode(8, 1, 5.0));
        match simulate(&model, &cfg, &y0) {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected a non-finite abort, got {other:?}"),
        }
    }
}
