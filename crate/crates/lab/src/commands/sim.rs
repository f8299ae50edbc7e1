use super::init_state;
use crate::config::RunConfig;
use crate::error::LabResult;
use crate::output::{Artifacts, Verdict};
use dampwave_core::oracle::simulate_toy_stream;
use dampwave_core::parallel::par_map;
use dampwave_core::sim::{energy_audit as audit, simulate_ensemble};

pub fn simulate(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let paths = cfg.paths();
    if !cfg.is_nlw() {
        let toy = cfg.toy_model()?;
        let (dt, h, x0) = (cfg.dt(), cfg.horizon(), cfg.num("x0"));
        let trajs = par_map(paths, |i| simulate_toy_stream(&toy, x0, dt, h, cfg.seed, i as u64, cfg.integrator.stride))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let t0 = &trajs[0];
        a.csv("trajectory", &["t", "u"], t0.times.iter().zip(&t0.values).map(|(t, x)| vec![*t, *x]))?;
        let finals: Vec<f64> = trajs.iter().map(|t| *t.values.last().unwrap()).collect();
        let m = dampwave_core::math::Estimate::from_samples(&finals);
        v.metric("final_mean", m.value).metric("final_std_err", m.std_err).metric("paths", paths as f64);
        return Ok(());
    }
    let model = cfg.wave_model()?;
    let sc = cfg.sim_config();
    let y0 = init_state(&model, cfg.num("init_amp"));
    let trajs = simulate_ensemble(&model, &sc, &y0, paths)?;
    let k = cfg.count("dump_modes")?.min(model.modes());
    let mut header: Vec<String> = ["t", "E", "normH", "normHs"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|j| format!("mode_{j}")));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let t0 = &trajs[0];
    a.csv(
        "trajectory",
        &header,
        (0..t0.len()).map(|i| {
            let mut r = vec![t0.times[i], t0.energies[i], t0.norm_h[i], t0.norm_hs[i]];
            r.extend_from_slice(&t0.states[i].position.coeffs()[..k]);
            r
        }),
    )?;
    let rep = audit(&trajs, model.alpha, 0.0)?;
    a.csv(
        "ensemble",
        &["t", "E_mean", "E_stderr"],
        (0..rep.times.len()).map(|i| vec![rep.times[i], rep.energy[i], rep.std_err[i]]),
    )?;
    v.metric("final_energy_mean", *rep.energy.last().unwrap())
        .metric("final_energy_std_err", *rep.std_err.last().unwrap())
        .metric("paths", paths as f64)
        .metric_json("fingerprint", format!("{:016x}", t0.fingerprint).into());
    Ok(())
}

pub fn energy_audit(cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let model = cfg.wave_model()?;
    let sc = cfg.sim_config();
    let y0 = init_state(&model, cfg.num("init_amp"));
    let trajs = simulate_ensemble(&model, &sc, &y0, cfg.paths())?;
    let alpha = model.alpha;
    let rep = audit(&trajs, alpha, cfg.num("e_ref"))?;
    let e0 = rep.energy[0];
    a.csv(
        "energy",
        &["t", "E", "stderr", "bound"],
        (0..rep.times.len()).map(|i| {
            let t = rep.times[i];
            vec![t, rep.energy[i], rep.std_err[i], e0 * (-alpha * t).exp() + rep.c_fit]
        }),
    )?;
    // pathwise constants
    let per_path: Vec<f64> = trajs
        .iter()
        .map(|t| audit(std::slice::from_ref(t), alpha, cfg.num("e_ref")).map(|r| r.c_fit))
        .collect::<Result<_, _>>()?;
    let c_path = per_path.iter().copied().fold(0.0, f64::max);
    let slope = rep.decay.map(|f| f.slope).unwrap_or(f64::NAN);
    let noiseless = model.noise.is_zero() || model.noise.amplitude() == 0.0;
    let tol = cfg.num("slope_tol");
    v.metric("alpha", alpha)
        .metric("c_fit", rep.c_fit)
        .metric("c_fit_pathwise_max", c_path)
        .metric("dissipation_k", rep.dissipation_k)
        .metric("decay_slope", slope)
        .tolerance("slope_tol", tol);
    v.require(rep.c_fit.is_finite() && c_path.is_finite(), "finite C_fit");
    if noiseless {
        v.require(slope <= -(1.0 - tol) * alpha, "decay slope <= -alpha within slope_tol");
    } else {
        v.note("noisy run: only the finiteness of C_fit is asserted");
    }
    Ok(())
}
