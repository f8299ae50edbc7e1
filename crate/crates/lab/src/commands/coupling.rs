use super::init_state;
use crate::config::RunConfig;
use crate::error::{LabError, LabResult};
use crate::output::{Artifacts, Status, Verdict};
use dampwave_core::coupling::{
    coupled_ensemble, fp_contraction_test, fp_intermediate, mixing_rate, tv_bound, tv_estimate_likelihood, CoupledPath,
    CouplingOptions, MixingOptions,
};
use dampwave_core::math::{linear_fit, mean};
use dampwave_core::spectral::{Field, PhaseState};

fn coupled_csv(a: &mut Artifacts, p: &CoupledPath) -> LabResult<()> {
    a.csv(
        "coupled",
        &["t", "diff_normH", "lowmode_ratio", "novikov_energy"],
        (0..p.times.len()).map(|i| vec![p.times[i], p.diff_norm_h[i], p.lowmode_ratio[i], p.girsanov.novikov[i]]),
    )
}

pub fn couple_fp(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let model = cfg.wave_model()?;
    let sc = cfg.sim_config();
    let z = init_state(&model, cfg.num("init_amp"));
    let zp = init_state(&model, cfg.num("init_amp_prime"));
    let m = model.modes();
    let mut feedback = Vec::new();
    for n in cfg.list("feedback") {
        if !(n >= 0.0 && n.fract() == 0.0 && n as usize <= m) {
            return Err(LabError::config(format!("feedback dimension {n} must be an integer in [0, {m}]")));
        }
        feedback.push(n as usize);
    }
    let trials = cfg.count("trials")?.max(1);
    let rep = fp_contraction_test(&model, &sc, &z, &zp, &feedback, trials)?;
    a.csv("rates", &["N", "rate"], rep.rates.iter().map(|(n, r)| vec![*n as f64, *r]))?;
    let shown = rep.n_star.unwrap_or(*feedback.last().unwrap_or(&m));
    let path = fp_intermediate(&model, &sc, &z, &zp, &CouplingOptions::new(shown), 0)?;
    coupled_csv(a, &path)?;
    v.metric("alpha", rep.alpha)
        .metric("lowmode_max", rep.lowmode_max)
        .metric("n_star", rep.n_star.map_or(f64::NAN, |n| n as f64))
        .tolerance("lowmode_bound", 1.0 + 1e-6)
        .tolerance("rate_floor", rep.alpha / 2.0);
    v.require(rep.lowmode_ok, "low-mode contraction |P_N(v-u)|^2 <= e^{-alpha t}|z'-z|^2 (1 + 1e-6)");
    v.require(rep.n_star.is_some(), "some feedback dimension reaches decay rate alpha/2");
    Ok(())
}

/// `z + d e` with `e` the unit first-mode displacement in `|.|_H`.
fn shifted(z: &PhaseState, alpha: f64, lambda1: f64, d: f64) -> PhaseState {
    let m = z.modes();
    // |(q, 0)|_H^2 = lambda q^2 + alpha^2 q^2
    let q = d / (lambda1 + alpha * alpha).sqrt();
    z.add(&PhaseState::at_rest(Field::single_mode(m, 1, q)))
}

pub fn girsanov_tv(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let model = cfg.wave_model()?;
    let sc = cfg.sim_config();
    let z = init_state(&model, cfg.num("init_amp"));
    let n = cfg.count("feedback")?;
    if n > model.modes() {
        return Err(LabError::config(format!("feedback dimension {n} exceeds {} modes", model.modes())));
    }
    let ds = cfg.list("distances");
    if ds.len() < 2 || ds.iter().any(|d| !(*d > 0.0)) {
        return Err(LabError::config("need at least two positive distances"));
    }
    let k = cfg.num("se_factor");
    let opts = CouplingOptions::new(n);
    // drift is already whitened, so the bound uses unit noise weights
    let unit = vec![1.0; n.max(1)];
    let mut rows = Vec::new();
    let mut within = true;
    let mut degenerate = false;
    for (i, &d) in ds.iter().enumerate() {
        let zp = shifted(&z, model.alpha, model.basis.lambda1(), d);
        let paths = coupled_ensemble(&model, &sc, &z, &zp, &opts, cfg.paths())?;
        if i == 0 {
            coupled_csv(a, &paths[0])?;
        }
        let recs: Vec<_> = paths.into_iter().map(|p| p.girsanov).collect();
        let est = tv_estimate_likelihood(&recs)?;
        let bound = tv_bound(&recs, &unit, n)?;
        let nov = mean(&recs.iter().map(|r| r.novikov_energy()).collect::<Vec<_>>());
        within &= est.value <= bound.value + k * est.std_err;
        degenerate |= est.degenerate;
        rows.push(vec![d, est.value, est.std_err, bound.value, nov, est.max_weight]);
    }
    a.csv("tv", &["d", "tv_hat", "tv_stderr", "tv_bound", "novikov_mean", "max_weight"], rows.clone())?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r[4] > 0.0).map(|r| (r[0].ln(), r[4].ln())).unzip();
    let expo = if xs.len() >= 2 { linear_fit(&xs, &ys).slope } else { f64::NAN };
    let mut sorted = rows.clone();
    sorted.sort_by(|p, q| p[0].total_cmp(&q[0]));
    let shrinking = sorted.windows(2).all(|w| w[0][3] <= w[1][3] && w[0][1] <= w[1][1] + k * w[1][2]);
    let (target, tol) = (cfg.num("exponent"), cfg.num("exponent_tol"));
    v.metric("novikov_exponent", expo)
        .tolerance("exponent", target)
        .tolerance("exponent_tol", tol)
        .tolerance("se_factor", k);
    v.require(within, "likelihood TV <= bound + k SE at every distance");
    v.require((expo - target).abs() <= tol, "Novikov energy exponent");
    v.require(shrinking, "TV estimate and bound shrink with the distance");
    if degenerate && v.status == Status::Pass {
        v.status(Status::Inconclusive).note("likelihood weights are degenerate");
    }
    Ok(())
}

pub fn mix(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let model = cfg.wave_model()?;
    let sc = cfg.sim_config();
    let z = init_state(&model, cfg.num("init_amp"));
    let zp = init_state(&model, cfg.num("init_amp_prime"));
    let mut opts = MixingOptions::new(cfg.paths(), cfg.count("observable_modes")?.min(model.modes()));
    opts.tail_start = cfg.num("tail_start");
    opts.bootstrap = cfg.count("bootstrap")?;
    let rep = mixing_rate(&model, &sc, &z, &zp, &opts)?;
    a.csv(
        "mixing",
        &["t", "delta", "envelope"],
        (0..rep.times.len()).map(|i| vec![rep.times[i], rep.delta[i], rep.envelope[i]]),
    )?;
    v.metric("kappa", rep.kappa)
        .metric("ci_lo", rep.ci.0)
        .metric("ci_hi", rep.ci.1)
        .metric("alpha", model.alpha)
        .tolerance("ci_level", 0.95);
    v.require(rep.pass, "kappa > 0 at the 95% level");
    if model.nonlinearity.is_zero() {
        v.tolerance("kappa_floor", model.alpha / 2.0);
        v.require(rep.ci.1 >= model.alpha / 2.0, "kappa >= alpha/2 within the interval for f = 0");
    }
    Ok(())
}
