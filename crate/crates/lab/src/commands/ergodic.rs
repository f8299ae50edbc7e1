use super::init_state;
use crate::config::RunConfig;
use crate::error::{LabError, LabResult};
use crate::output::{Artifacts, Verdict};
use dampwave_core::coupling::Observable;
use dampwave_core::ergodic::{
    clt_check, ldp_level1_check, legendre, occupation_measure, pressure_exact, pressure_population, slln_check, Dynamics,
    LdpOptions, PopulationOptions, PressureCurve, WaveDynamics, WaveState,
};
use dampwave_core::math::linspace;
use dampwave_core::oracle::{gradient_sde_exact_density, simulate_toy_stream, ToyDynamics, ToyKind, ToyModel};
use dampwave_core::parallel::par_map;
use dampwave_core::sim::{simulate_ensemble, WaveModel};

/// Observable for the wave model: `tanh(sqrt(lambda_1) q_1)`.
fn wave_psi(model: &WaveModel) -> impl Fn(&WaveState) -> f64 + Sync + '_ {
    move |s: &WaveState| Observable::TanhPosition(0).eval(&model.basis, &s.y, model.alpha)
}

/// Exact stationary mean of the toy observable `u` (the state index for chains).
fn toy_mean(toy: &ToyModel) -> LabResult<f64> {
    Ok(match &toy.kind {
        ToyKind::Ou { .. } => 0.0,
        ToyKind::FiniteChain(c) => c.stationary()?.iter().enumerate().map(|(i, p)| i as f64 * p).sum(),
        ToyKind::GradientSde { .. } => gradient_sde_exact_density(toy, toy.eps)?.moment(1),
    })
}

/// Exact pressure of `beta u` for OU and chains.
fn toy_pressure_oracle(toy: &ToyModel, betas: &[f64]) -> LabResult<Option<Vec<f64>>> {
    Ok(match &toy.kind {
        ToyKind::Ou { theta, sigma } => Some(betas.iter().map(|b| sigma * sigma * b * b / (2.0 * theta * theta)).collect()),
        ToyKind::FiniteChain(c) => {
            let psi: Vec<f64> = (0..c.states()).map(|i| i as f64).collect();
            Some(pressure_exact(c, &psi, betas)?.q)
        }
        ToyKind::GradientSde { .. } => None,
    })
}

pub fn occupation(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let (paths, horizon) = (cfg.paths(), cfg.horizon());
    let (times, series, reference) = if cfg.is_nlw() {
        let model = cfg.wave_model()?;
        let y0 = init_state(&model, cfg.num("init_amp"));
        let trajs = simulate_ensemble(&model, &cfg.sim_config(), &y0, paths)?;
        let obs = Observable::TanhPosition(0);
        let series: Vec<Vec<f64>> =
            trajs.iter().map(|t| t.states.iter().map(|y| obs.eval(&model.basis, y, model.alpha)).collect()).collect();
        let times = trajs[0].times.clone();
        let finals = occupation_measure(&times, &series, None)?.final_averages();
        let reference = finals.iter().sum::<f64>() / finals.len() as f64;
        v.note("no exact stationary mean for the wave model; the ensemble mean of the time averages is the reference");
        (times, series, reference)
    } else {
        let toy = cfg.toy_model()?;
        let (dt, x0, stride) = (cfg.dt(), cfg.num("x0"), cfg.integrator.stride);
        let trajs = par_map(paths, |i| simulate_toy_stream(&toy, x0, dt, horizon, cfg.seed, i as u64, stride))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let times = trajs[0].times.clone();
        (times, trajs.into_iter().map(|t| t.values).collect(), toy_mean(&toy)?)
    };
    let slln = slln_check(&times, &series, reference, cfg.count("levels")?.max(2))?;
    a.csv("slln", &["horizon", "residual"], slln.horizons.iter().zip(&slln.residual).map(|(h, r)| vec![*h, *r]))?;
    let integrals: Vec<f64> = series
        .iter()
        .map(|s| occupation_measure(&times, std::slice::from_ref(s), None).map(|o| o.integrals[0]))
        .collect::<Result<_, _>>()?;
    let t_end = *times.last().unwrap();
    let clt = clt_check(&integrals, t_end, reference)?;
    a.csv("integrals", &["path", "integral"], integrals.iter().enumerate().map(|(i, x)| vec![i as f64, *x]))?;
    let max_expo = cfg.num("slln_max_exponent");
    v.metric("reference", reference)
        .metric("slln_exponent", slln.exponent)
        .metric("sigma", clt.sigma)
        .metric("sigma_sq", clt.sigma * clt.sigma)
        .metric("ks", clt.ks)
        .metric("ks_p_value", clt.p_value)
        .tolerance("slln_max_exponent", max_expo)
        .tolerance("ks_p_min", 0.01);
    v.require(slln.exponent <= max_expo, "strong-law residual exponent");
    v.require(clt.pass, "normalized integrals pass the KS test");
    Ok(())
}

fn population<D: Dynamics>(
    d: &D,
    start: &D::State,
    psi: &(dyn Fn(&D::State) -> f64 + Sync),
    betas: &[f64],
    opts: &PopulationOptions,
) -> LabResult<PressureCurve> {
    Ok(pressure_population(d, start, psi, betas, opts)?)
}

fn population_curve(cfg: &RunConfig, betas: &[f64], particles: usize, replicates: usize) -> LabResult<PressureCurve> {
    let opts = PopulationOptions::new(particles.max(2), replicates.max(2), cfg.horizon(), cfg.seed);
    if cfg.is_nlw() {
        let model = cfg.wave_model()?;
        let d = WaveDynamics::new(model.clone(), &cfg.sim_config())?;
        let start = d.state(init_state(&model, cfg.num("init_amp")));
        let psi = wave_psi(&model);
        let r = population(&d, &start, &psi, betas, &opts);
        r
    } else {
        let d = ToyDynamics::new(cfg.toy_model()?, cfg.dt())?;
        population(&d, &cfg.num("x0"), &|x: &f64| *x, betas, &opts)
    }
}

pub fn pressure(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let betas = cfg.list("betas");
    if betas.is_empty() {
        return Err(LabError::config("betas must not be empty"));
    }
    let curve = population_curve(cfg, &betas, cfg.count("particles")?, cfg.count("replicates")?)?;
    let exact = if cfg.is_nlw() { None } else { toy_pressure_oracle(&cfg.toy_model()?, &betas)? };
    a.csv(
        "pressure",
        &["beta", "Q", "stderr"],
        (0..betas.len()).map(|i| vec![curve.betas[i], curve.q[i], curve.stderr[i]]),
    )?;
    let rate = legendre(&curve, None);
    a.csv("rate", &["p", "I"], rate.p.iter().zip(&rate.i).map(|(p, i)| vec![*p, *i]))?;
    let k = cfg.num("se_factor");
    let violations = curve.convexity_violations();
    v.metric("convexity_violations", violations.len() as f64).metric("hull_changed", rate.hull_changed as u8 as f64);
    v.require(violations.is_empty(), "sampled pressure is convex");
    if let Some(q) = exact {
        a.csv("pressure_exact", &["beta", "Q"], betas.iter().zip(&q).map(|(b, q)| vec![*b, *q]))?;
        let worst = (0..betas.len())
            .map(|i| (curve.q[i] - q[i]).abs() / curve.stderr[i].max(1e-300))
            .filter(|z| z.is_finite())
            .fold(0.0, f64::max);
        let ok = (0..betas.len()).all(|i| (curve.q[i] - q[i]).abs() <= k * curve.stderr[i] + 1e-12);
        v.metric("max_z", worst).tolerance("se_factor", k);
        v.require(ok, "Monte Carlo pressure within k SE of the exact pressure");
    } else {
        v.note("no exact pressure for this model; only convexity is asserted");
    }
    Ok(())
}

pub fn ldp1(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let intervals = cfg.pairs("intervals")?;
    let mut opts = LdpOptions::new(cfg.paths(), cfg.seed);
    opts.horizons = cfg.list("horizons");
    opts.rel_tol = cfg.num("rel_tol");
    opts.min_hits = cfg.count("min_hits")?;
    let br = cfg.list("betas");
    if br.len() != 2 || !(br[0] < 0.0 && br[1] > 0.0) {
        return Err(LabError::config("betas must be a range [lo, hi] around 0"));
    }
    let rows = if cfg.is_nlw() {
        let grid = linspace(br[0], br[1], 21);
        let curve = population_curve(cfg, &grid, cfg.count("particles")?, cfg.count("replicates")?)?;
        let rate = legendre(&curve, None);
        let model = cfg.wave_model()?;
        let d = WaveDynamics::new(model.clone(), &cfg.sim_config())?;
        let start = d.state(init_state(&model, cfg.num("init_amp")));
        v.note("rate function from the Monte Carlo pressure");
        let psi = wave_psi(&model);
        let rows = ldp_level1_check(&d, &start, &psi, &intervals, &rate, &opts)?;
        rows
    } else {
        let toy = cfg.toy_model()?;
        let grid = linspace(br[0], br[1], 241);
        let curve = match toy_pressure_oracle(&toy, &grid)? {
            Some(q) => PressureCurve::exact(grid.clone(), q),
            None => {
                v.note("rate function from the Monte Carlo pressure");
                population_curve(cfg, &linspace(br[0], br[1], 21), cfg.count("particles")?, cfg.count("replicates")?)?
            }
        };
        let rate = legendre(&curve, None);
        let d = ToyDynamics::new(toy, cfg.dt())?;
        ldp_level1_check(&d, &cfg.num("x0"), &|x: &f64| *x, &intervals, &rate, &opts)?
    };
    a.csv(
        "ldp",
        &["lo", "hi", "contains_mean", "predicted", "empirical", "rel_error", "pass"],
        rows.iter().map(|r| {
            vec![r.lo, r.hi, r.contains_mean as u8 as f64, r.predicted, r.empirical, r.rel_error, r.pass as u8 as f64]
        }),
    )?;
    for (k, r) in rows.iter().enumerate() {
        v.metric(&format!("empirical_{k}"), r.empirical).metric(&format!("predicted_{k}"), r.predicted);
        v.require(r.pass, &format!("interval [{}, {}]", r.lo, r.hi));
    }
    v.tolerance("rel_tol", opts.rel_tol).tolerance("abs_tol", opts.abs_tol).tolerance("min_hits", opts.min_hits as f64);
    Ok(())
}
