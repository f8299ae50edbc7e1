use super::equilibria::toy_equilibria;
use super::rate::potential_infimum;
use crate::ergodic::Dynamics;
use crate::error::{Error, Result};
use crate::math::{linear_fit, mean, std_error};
use crate::oracle::{gradient_sde_exact_density, Poly, ToyDynamics, ToyModel};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::substream;

/// `inf_[lo, hi] 2 (A - inf A)`.
pub fn rate_infimum_on(a: &Poly, lo: f64, hi: f64) -> f64 {
    let floor = potential_infimum(a).1;
    a.derivative()
        .real_roots()
        .into_iter()
        .filter(|x| *x > lo && *x < hi)
        .chain([lo, hi])
        .map(|x| 2.0 * (a.eval(x) - floor))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallNoiseMode {
    ExactDensity,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallNoiseRow {
    pub eps: f64,
    pub lo: f64,
    pub hi: f64,
    /// `eps log mu(Gamma)`.
    pub eps_log_mu: f64,
    pub std_err: f64,
    /// Samples in the set (Monte Carlo mode).
    pub hits: Option<usize>,
    /// The two independent runs agree within 3 SE (Monte Carlo mode).
    pub runs_agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetSummary {
    pub lo: f64,
    pub hi: f64,
    /// `-inf_Gamma V`.
    pub target: f64,
    /// Intercept of `eps log mu` regressed on `eps`, with at least two noise levels.
    pub intercept: Option<f64>,
    /// `|eps log mu - target|` at the smallest `eps`.
    pub gap_at_smallest: f64,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallNoiseReport {
    pub mode: SmallNoiseMode,
    pub rows: Vec<SmallNoiseRow>,
    pub sets: Vec<SetSummary>,
    /// Mass within `eta` of the stable equilibria, per `eps`.
    pub concentration: Vec<(f64, f64)>,
    /// Burn-in used per `eps` (Monte Carlo mode).
    pub burn_in: Vec<f64>,
}

fn summarize(rows: &[SmallNoiseRow], sets: &[(f64, f64)], targets: &[f64]) -> Vec<SetSummary> {
    sets.iter()
        .zip(targets)
        .map(|(&(lo, hi), &target)| {
            let mine: Vec<&SmallNoiseRow> = rows.iter().filter(|r| r.lo == lo && r.hi == hi).collect();
            let smallest = mine.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)).unwrap();
            let intercept = if mine.len() >= 2 {
                let xs: Vec<f64> = mine.iter().map(|r| r.eps).collect();
                let ys: Vec<f64> = mine.iter().map(|r| r.eps_log_mu).collect();
                Some(linear_fit(&xs, &ys).intercept)
            } else {
                None
            };
            let rel_error = intercept.map(|i| (i - target).abs() / target.abs().max(1e-300));
            SetSummary { lo, hi, target, intercept, gap_at_smallest: (smallest.eps_log_mu - target).abs(), rel_error }
        })
        .collect()
}

fn check_inputs(eps: &[f64], sets: &[(f64, f64)]) -> Result<()> {
    if eps.is_empty() || sets.is_empty() {
        return Err(Error::config("need at least one noise level and one set"));
    }
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::config("noise levels must be positive"));
    }
    if sets.iter().any(|(a, b)| !(a < b)) {
        return Err(Error::config("sets must be intervals [lo, hi] with lo < hi"));
    }
    Ok(())
}

/// `eps log mu^eps(Gamma)` from the exact density of a gradient toy.
pub fn smallnoise_exact(model: &ToyModel, eps: &[f64], sets: &[(f64, f64)], eta: f64) -> Result<SmallNoiseReport> {
    check_inputs(eps, sets)?;
    let a = model.potential().ok_or_else(|| Error::input("exact-density mode needs a gradient toy"))?;
    let stable: Vec<f64> = toy_equilibria(model).into_iter().filter(|e| e.stable).map(|e| e.x).collect();
    let mut rows = Vec::new();
    let mut concentration = Vec::new();
    for &e in eps {
        let d = gradient_sde_exact_density(model, e)?;
        for &(lo, hi) in sets {
            rows.push(SmallNoiseRow {
                eps: e,
                lo,
                hi,
                eps_log_mu: e * d.log_prob(lo, hi),
                std_err: 0.0,
                hits: None,
                runs_agree: true,
            });
        }
        concentration.push((e, stable.iter().map(|x| d.prob(x - eta, x + eta)).sum()));
    }
    let targets: Vec<f64> = sets.iter().map(|(lo, hi)| -rate_infimum_on(a, *lo, *hi)).collect();
    Ok(SmallNoiseReport { mode: SmallNoiseMode::ExactDensity, sets: summarize(&rows, sets, &targets), rows, concentration, burn_in: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub seed: u64,
    /// Length of each sampling run after burn-in.
    pub horizon: f64,
    /// Record the state every `stride` steps.
    pub stride: usize,
    pub min_hits: usize,
    /// Pairs of coupled pilot paths used to estimate the mixing time.
    pub pilot_pairs: usize,
    pub pilot_horizon: f64,
    /// Observable distance at which a pilot pair counts as merged.
    pub merge_tol: f64,
    /// Burn-in in units of the empirical mixing time.
    pub burn_in_factor: f64,
    pub eta: f64,
}

impl McOptions {
    pub fn new(horizon: f64, seed: u64) -> Self {
        McOptions {
            seed,
            horizon,
            stride: 10,
            min_hits: 50,
            pilot_pairs: 16,
            pilot_horizon: 2000.0,
            merge_tol: 1e-3,
            burn_in_factor: 20.0,
            eta: 0.1,
        }
    }
}

struct RunStats {
    fractions: Vec<f64>,
    std_errs: Vec<f64>,
    hits: Vec<usize>,
    concentration: f64,
}

/// Mean merging time of coupled pilot pairs started at `a` and `b` with
/// common noise.
fn mixing_time<D: Dynamics>(
    d: &D,
    a: &D::State,
    b: &D::State,
    psi: &(dyn Fn(&D::State) -> f64 + Sync),
    opts: &McOptions,
    family: u64,
) -> Result<f64> {
    let max_steps = (opts.pilot_horizon / d.dt()).round() as usize;
    let times = par_map(opts.pilot_pairs, |i| -> Result<f64> {
        let mut rng = substream(opts.seed, family, i as u64);
        let (mut x, mut y) = (a.clone(), b.clone());
        for k in 0..max_steps {
            if (psi(&x) - psi(&y)).abs() < opts.merge_tol {
                return Ok(k as f64 * d.dt());
            }
            let mut shared = rng.clone();
            d.step(&mut x, &mut shared)?;
            d.step(&mut y, &mut rng)?;
        }
        Ok(opts.pilot_horizon)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&times))
}

#[allow(clippy::too_many_arguments)]
fn sampling_run<D: Dynamics>(
    d: &D,
    start: &D::State,
    psi: &(dyn Fn(&D::State) -> f64 + Sync),
    sets: &[(f64, f64)],
    stable: &[f64],
    burn_in: f64,
    opts: &McOptions,
    family: u64,
) -> Result<RunStats> {
    let mut rng = substream(opts.seed, family, 0);
    let mut x = start.clone();
    let burn = (burn_in / d.dt()).round() as usize;
    for _ in 0..burn {
        d.step(&mut x, &mut rng)?;
    }
    let stride = opts.stride.max(1);
    let samples = ((opts.horizon / d.dt()).round() as usize / stride).max(20);
    let batches = 20;
    let per = samples / batches;
    let mut batch_counts = vec![vec![0usize; batches]; sets.len()];
    let mut near = 0usize;
    for s in 0..per * batches {
        for _ in 0..stride {
            d.step(&mut x, &mut rng)?;
        }
        let v = psi(&x);
        for (k, (lo, hi)) in sets.iter().enumerate() {
            if v >= *lo && v <= *hi {
                batch_counts[k][s / per] += 1;
            }
        }
        if stable.iter().any(|u| (v - u).abs() <= opts.eta) {
            near += 1;
        }
    }
    let total = (per * batches) as f64;
    let mut fractions = Vec::new();
    let mut std_errs = Vec::new();
    let mut hits = Vec::new();
    for c in &batch_counts {
        let f: Vec<f64> = c.iter().map(|n| *n as f64 / per as f64).collect();
        fractions.push(mean(&f));
        std_errs.push(std_error(&f));
        hits.push(c.iter().sum());
    }
    Ok(RunStats { fractions, std_errs, hits, concentration: near as f64 / total })
}

/// Stationary set probabilities from long single trajectories, one pair of
/// independent runs per noise level. `starts` seeds both the coupled pilot
/// that sets the burn-in and (first entry) the sampling runs; `psi` maps a
/// state to the scalar the sets are read on; `stable` lists the values of
/// `psi` at stable equilibria for the concentration check.
#[allow(clippy::too_many_arguments)]
pub fn smallnoise_mc<D, F>(
    make: F,
    starts: (&D::State, &D::State),
    psi: &(dyn Fn(&D::State) -> f64 + Sync),
    eps: &[f64],
    sets: &[(f64, f64)],
    targets: &[f64],
    stable: &[f64],
    opts: &McOptions,
) -> Result<SmallNoiseReport>
where
    D: Dynamics,
    F: Fn(f64) -> Result<D> + Sync,
{
    check_inputs(eps, sets)?;
    if targets.len() != sets.len() {
        return Err(Error::Dimension { expected: sets.len(), found: targets.len() });
    }
    let per_eps = par_map(eps.len(), |i| -> Result<(f64, RunStats, RunStats)> {
        let d = make(eps[i])?;
        let base = 0x5A00 + 4 * i as u64;
        let tau = mixing_time(&d, starts.0, starts.1, psi, opts, base)?;
        let burn_in = (opts.burn_in_factor * tau).max(1.0);
        let r1 = sampling_run(&d, starts.0, psi, sets, stable, burn_in, opts, base + 1)?;
        let r2 = sampling_run(&d, starts.0, psi, sets, stable, burn_in, opts, base + 2)?;
        Ok((burn_in, r1, r2))
    });
    let mut rows = Vec::new();
    let mut concentration = Vec::new();
    let mut burn_ins = Vec::new();
    for (i, r) in per_eps.into_iter().enumerate() {
        let (burn_in, r1, r2) = r?;
        let e = eps[i];
        burn_ins.push(burn_in);
        concentration.push((e, 0.5 * (r1.concentration + r2.concentration)));
        for (k, &(lo, hi)) in sets.iter().enumerate() {
            let hits = r1.hits[k] + r2.hits[k];
            if hits < opts.min_hits {
                return Err(Error::Undersampled(alloc::format!(
                    "eps = {e}, set [{lo}, {hi}]: {hits} samples, need {}",
                    opts.min_hits
                )));
            }
            let p = 0.5 * (r1.fractions[k] + r2.fractions[k]);
            let se = 0.5 * (r1.std_errs[k].powi(2) + r2.std_errs[k].powi(2)).sqrt();
            let gap = (r1.fractions[k] - r2.fractions[k]).abs();
            rows.push(SmallNoiseRow {
                eps: e,
                lo,
                hi,
                eps_log_mu: e * p.ln(),
                std_err: e * se / p,
                hits: Some(hits),
                runs_agree: gap <= 3.0 * 2.0 * se,
            });
        }
    }
    Ok(SmallNoiseReport { mode: SmallNoiseMode::MonteCarlo, sets: summarize(&rows, sets, targets), rows, concentration, burn_in: burn_ins })
}

/// Monte Carlo mode for a 1D gradient toy: Euler-Maruyama at step `dt`,
/// pilot pairs from the outermost stable equilibria, sampling from the
/// global minimizer of `A`, targets from the gradient formula.
pub fn smallnoise_mc_toy(model: &ToyModel, dt: f64, eps: &[f64], sets: &[(f64, f64)], opts: &McOptions) -> Result<SmallNoiseReport> {
    let a = model.potential().ok_or_else(|| Error::input("Monte Carlo toy mode needs a gradient toy"))?.clone();
    let stable: Vec<f64> = toy_equilibria(model).into_iter().filter(|e| e.stable).map(|e| e.x).collect();
    if stable.is_empty() {
        return Err(Error::input("toy has no stable equilibrium"));
    }
    let deepest = potential_infimum(&a).0;
    let far = *stable.iter().max_by(|x, y| (*x - deepest).abs().total_cmp(&(*y - deepest).abs())).unwrap();
    let targets: Vec<f64> = sets.iter().map(|(lo, hi)| -rate_infimum_on(&a, *lo, *hi)).collect();
    let id = |x: &f64| *x;
    smallnoise_mc(
        |e| ToyDynamics::new(model.clone().with_eps(e), dt),
        (&deepest, &far),
        &id,
        eps,
        sets,
        &targets,
        &stable,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::builtin_cubic;

    #[test]
    fn rate_infimum_of_cubic_sets() {
        let a = builtin_cubic().potential().unwrap().clone();
        assert!(rate_infimum_on(&a, 2.9, 3.1).abs() < 1e-12);
        assert!((rate_infimum_on(&a, -0.1, 0.1) - 4.5).abs() < 1e-12);
        assert!((rate_infimum_on(&a, 2.0, 2.5) - 2.0 * (a.eval(2.5) + 2.25)).abs() < 1e-12);
    }

    #[test]
    fn exact_mode_at_small_noise() {
        let r = smallnoise_exact(&builtin_cubic(), &[1e-2, 1e-3], &[(2.9, 3.1), (-0.1, 0.1)], 0.1).unwrap();
        for s in &r.sets {
            assert!(s.gap_at_smallest <= 0.02, "{s:?}");
        }
        let (e_big, c_big) = r.concentration[0];
        let (e_small, c_small) = r.concentration[1];
        assert!(e_small < e_big && c_small >= c_big && c_small > 0.999);
    }

    #[test]
    fn monte_carlo_mode_refuses_undersampled_sets() {
        let mut opts = McOptions::new(20.0, 1);
        opts.pilot_pairs = 2;
        opts.pilot_horizon = 20.0;
        let r = smallnoise_mc_toy(&builtin_cubic(), 1e-3, &[0.25], &[(-0.1, 0.1)], &opts);
        assert!(matches!(r, Err(Error::Undersampled(_))), "{r:?}");
    }
}
