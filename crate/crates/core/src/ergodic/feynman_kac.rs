use super::dynamics::Dynamics;
use super::legendre::PressureCurve;
use crate::error::{Error, Result};
use crate::math::{jackknife, log_mean_exp, max_weight_fraction, mean, std_error, Estimate};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::{substream, uniform, StreamRng};

/// Potential evaluated along a path.
pub type Potential<'a, S> = &'a (dyn Fn(&S) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq)]
pub struct FkOptions {
    pub paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub groups: usize,
    /// Smallness threshold for `Osc(V)`.
    pub delta: Option<f64>,
    /// Known `Osc(V) = sup V - inf V`.
    pub oscillation: Option<f64>,
}

impl FkOptions {
    pub fn new(paths: usize, horizon: f64, seed: u64) -> Self {
        FkOptions { paths, horizon, seed, groups: 20, delta: None, oscillation: None }
    }

    pub fn with_oscillation(mut self, osc: f64, delta: f64) -> Self {
        self.oscillation = Some(osc);
        self.delta = Some(delta);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkEstimate {
    /// Estimate from the first start.
    pub value: f64,
    pub std_err: f64,
    pub per_start: Vec<Estimate>,
    /// Largest gap between per-start estimates.
    pub spread: f64,
    pub max_weight: f64,
    pub tail_dominated: bool,
    pub oscillation_warning: bool,
}

fn steps_for(dt: f64, horizon: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::input("horizon and step must be positive"));
    }
    Ok(((horizon / dt).round() as usize).max(1))
}

/// Plain estimator `(1/t) log mean exp int_0^t V`, one ensemble per start.
pub fn feynman_kac_estimate<D: Dynamics>(
    dynamics: &D,
    starts: &[D::State],
    v: Potential<'_, D::State>,
    opts: &FkOptions,
) -> Result<FkEstimate> {
    if starts.is_empty() || opts.paths == 0 {
        return Err(Error::input("feynman_kac_estimate needs starts and paths"));
    }
    let steps = steps_for(dynamics.dt(), opts.horizon)?;
    let t = steps as f64 * dynamics.dt();
    let mut per_start = Vec::with_capacity(starts.len());
    let mut max_weight: f64 = 0.0;
    for (s, x0) in starts.iter().enumerate() {
        let logs = par_map(opts.paths, |i| -> Result<f64> {
            let mut rng = substream(opts.seed, s as u64, i as u64);
            let mut x = x0.clone();
            let mut acc = 0.0;
            for _ in 0..steps {
                acc += dynamics.step_integrate(&mut x, &mut rng, v)?;
            }
            Ok(acc)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        max_weight = max_weight.max(max_weight_fraction(&logs));
        let groups = opts.groups.min(opts.paths);
        let est = jackknife(groups, |skip| {
            let kept: Vec<f64> =
                logs.iter().enumerate().filter(|(i, _)| Some(i % groups) != skip).map(|(_, x)| *x).collect();
            log_mean_exp(&kept) / t
        });
        per_start.push(est);
    }
    let hi = per_start.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    let lo = per_start.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
    let oscillation_warning = matches!((opts.oscillation, opts.delta), (Some(o), Some(d)) if o > d);
    Ok(FkEstimate {
        value: per_start[0].value,
        std_err: per_start[0].std_err,
        spread: hi - lo,
        per_start,
        max_weight,
        tail_dominated: max_weight > 0.1,
        oscillation_warning,
    })
}

/// Interacting-particle estimator: weights are accumulated over blocks of
/// `resample_every` time units, after which the population is resampled
/// systematically.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationOptions {
    pub particles: usize,
    pub replicates: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub resample_every: f64,
    pub seed: u64,
}

impl PopulationOptions {
    pub fn new(particles: usize, replicates: usize, horizon: f64, seed: u64) -> Self {
        PopulationOptions { particles, replicates, horizon, burn_in: 5.0, resample_every: 1.0, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Per-replicate `(log Z_T - log Z_burn) / (T - burn)`.
    pub replicates: Vec<f64>,
    /// Smallest effective sample size fraction seen before a resampling.
    pub min_ess: f64,
}

fn systematic_resample(logw: &[f64], rng: &mut StreamRng) -> Vec<usize> {
    let n = logw.len();
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let u0 = uniform(rng) / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0] / total;
    let mut j = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && j + 1 < n {
            j += 1;
            cum += w[j] / total;
        }
        out.push(j);
    }
    out
}

fn ess_fraction(logw: &[f64]) -> f64 {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    s * s / s2 / w.len() as f64
}

pub fn feynman_kac_population<D: Dynamics>(
    dynamics: &D,
    start: &D::State,
    v: Potential<'_, D::State>,
    opts: &PopulationOptions,
) -> Result<PopulationEstimate> {
    if opts.particles == 0 || opts.replicates == 0 {
        return Err(Error::input("population needs particles and replicates"));
    }
    if !(opts.burn_in >= 0.0 && opts.burn_in < opts.horizon) || !(opts.resample_every > 0.0) {
        return Err(Error::input("need 0 <= burn_in < horizon and a positive resampling interval"));
    }
    let dt = dynamics.dt();
    let block = steps_for(dt, opts.resample_every)?;
    let block_t = block as f64 * dt;
    let blocks = ((opts.horizon / block_t).round() as usize).max(1);
    let burn_blocks = ((opts.burn_in / block_t).round() as usize).min(blocks - 1);
    let runs = par_map(opts.replicates, |r| -> Result<(f64, f64)> {
        let fam = (r as u64) << 32;
        let mut rngs: Vec<StreamRng> =
            (0..opts.particles).map(|i| substream(opts.seed, fam | 1, i as u64)).collect();
        let mut resample_rng = substream(opts.seed, fam | 2, 0);
        let mut xs: Vec<D::State> = vec![start.clone(); opts.particles];
        let mut log_z = 0.0;
        let mut log_z_burn = 0.0;
        let mut min_ess: f64 = 1.0;
        let mut logw = vec![0.0; opts.particles];
        for b in 0..blocks {
            if b == burn_blocks {
                log_z_burn = log_z;
            }
            for (i, x) in xs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for _ in 0..block {
                    acc += dynamics.step_integrate(x, &mut rngs[i], v)?;
                }
                logw[i] = acc;
            }
            log_z += log_mean_exp(&logw);
            min_ess = min_ess.min(ess_fraction(&logw));
            let idx = systematic_resample(&logw, &mut resample_rng);
            xs = idx.iter().map(|&j| xs[j].clone()).collect();
        }
        let span = (blocks - burn_blocks) as f64 * block_t;
        Ok(((log_z - log_z_burn) / span, min_ess))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let replicates: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let min_ess = runs.iter().map(|r| r.1).fold(1.0, f64::min);
    Ok(PopulationEstimate {
        value: mean(&replicates),
        std_err: if replicates.len() > 1 { std_error(&replicates) } else { f64::NAN },
        replicates,
        min_ess,
    })
}

/// Pressure `Q(beta)` of `beta psi` on a grid via the population estimator.
pub fn pressure_population<D: Dynamics>(
    dynamics: &D,
    start: &D::State,
    psi: Potential<'_, D::State>,
    betas: &[f64],
    opts: &PopulationOptions,
) -> Result<PressureCurve> {
    let mut q = Vec::with_capacity(betas.len());
    let mut stderr = Vec::with_capacity(betas.len());
    for &b in betas {
        if b == 0.0 {
            q.push(0.0);
            stderr.push(0.0);
            continue;
        }
        let tilted = |x: &D::State| b * psi(x);
        let est = feynman_kac_population(dynamics, start, &tilted, opts)?;
        q.push(est.value);
        stderr.push(est.std_err);
    }
    Ok(PressureCurve {
        betas: betas.to_vec(),
        q,
        stderr,
        horizon: opts.horizon,
        paths: opts.particles * opts.replicates,
        oscillation: None,
    })
}
