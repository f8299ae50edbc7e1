use crate::config::{Command, RunConfig};
use crate::error::LabResult;
use crate::output::{Artifacts, Verdict};
use dampwave_core::coupling::{maximal_coupling_discrete, mixing_rate, tv_bound, tv_estimate_likelihood, GirsanovRecord, MixingOptions};
use dampwave_core::ergodic::{fk_eigen_exact, FiniteChain};
use dampwave_core::fw::{toy_quasipotential, w_graph_weights, GraphVariant, VSource};
use dampwave_core::oracle::{builtin_cubic, gradient_sde_exact_density, simulate_toy};
use dampwave_core::sim::{simulate, NoiseModel, NoiseRule, Nonlinearity, SimConfig, WaveModel};
use dampwave_core::spectral::{Field, PhaseState, SpectralBasis};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub pass: bool,
}

fn noisy_kg() -> dampwave_core::Result<WaveModel> {
    let basis = SpectralBasis::interval(PI, 8)?;
    let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 0.5, true)?;
    WaveModel::new(basis, Nonlinearity::klein_gordon(1.0, 0.0)?.with_default_nu(1.0, 1.0), noise, 1.0)
}

fn record(nov: f64, ll: f64) -> GirsanovRecord {
    GirsanovRecord { times: vec![0.0, 1.0], novikov: vec![0.0, nov], log_likelihood: vec![0.0, ll], stopping_time: None }
}

/// Oracles whose answer is known without computation.
pub fn selftest_checks() -> Vec<SelfCheck> {
    type Check = (&'static str, fn() -> dampwave_core::Result<bool>);
    let checks: [Check; 12] = [
        ("zero state stays zero", || {
            let m = WaveModel::linear(SpectralBasis::interval(PI, 8)?, 1.0)?;
            let t = simulate(&m, &SimConfig::new(0.01, 1.0, 0), &PhaseState::zeros(8))?;
            Ok(t.states.iter().all(|y| *y == PhaseState::zeros(8)))
        }),
        ("same seed is bit-identical", || {
            let m = noisy_kg()?;
            let y0 = PhaseState::at_rest(Field::single_mode(8, 1, 0.5));
            let cfg = SimConfig::new(0.01, 1.0, 3);
            Ok(simulate(&m, &cfg, &y0)?.states == simulate(&m, &cfg, &y0)?.states)
        }),
        ("maximal coupling of equal laws has TV 0", || {
            Ok(maximal_coupling_discrete(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5])?.tv() == 0.0)
        }),
        ("identical starts have zero mixing distance", || {
            let m = noisy_kg()?;
            let z = PhaseState::at_rest(Field::single_mode(8, 1, 0.5));
            let mut o = MixingOptions::new(4, 8);
            o.bootstrap = 0;
            Ok(mixing_rate(&m, &SimConfig::new(0.02, 1.0, 1), &z, &z, &o)?.delta.iter().all(|d| *d == 0.0))
        }),
        ("zero Girsanov drift gives TV 0", || {
            let r = [record(0.0, 0.0), record(0.0, 0.0)];
            Ok(tv_bound(&r, &[1.0], 1)?.value == 0.0 && tv_estimate_likelihood(&r)?.value == 0.0)
        }),
        ("TV estimate is clipped to [0, 1]", || {
            let r = [record(1e3, 500.0), record(1e3, -500.0)];
            let (e, b) = (tv_estimate_likelihood(&r)?.value, tv_bound(&r, &[1.0], 1)?.value);
            Ok((0.0..=1.0).contains(&e) && (0.0..=1.0).contains(&b))
        }),
        ("zero potential has zero pressure", || {
            Ok(fk_eigen_exact(&FiniteChain::two_state(1.0, 2.0, [0.0, 0.0])?)?.log_lambda.abs() <= 1e-12)
        }),
        ("noiseless toy at an equilibrium stays put", || {
            let t = simulate_toy(&builtin_cubic().with_eps(0.0), 3.0, 1e-3, 1.0, 0, 10)?;
            Ok(t.values.iter().all(|x| *x == 3.0))
        }),
        ("stationary density has unit mass", || {
            Ok((gradient_sde_exact_density(&builtin_cubic(), 0.5)?.mass() - 1.0).abs() <= 1e-10)
        }),
        ("single-node W graph is zero", || Ok(w_graph_weights(&[vec![0.0]], GraphVariant::Arborescence)?.w == [0.0])),
        ("identical endpoints cost nothing", || Ok(toy_quasipotential(&builtin_cubic(), 3.0, 3.0, &VSource::Oracle)? == 0.0)),
        ("empty experiment sections resolve", || {
            Ok(Command::ALL.iter().all(|c| RunConfig::default().resolve(*c).is_ok()))
        }),
    ];
    checks.iter().map(|(name, f)| SelfCheck { name, pass: f().unwrap_or(false) }).collect()
}

pub fn selftest(_cfg: &RunConfig, v: &mut Verdict, a: &mut Artifacts) -> LabResult<()> {
    let checks = selftest_checks();
    a.csv("selftest", &["check", "pass"], checks.iter().enumerate().map(|(i, c)| vec![i as f64, c.pass as u8 as f64]))?;
    let map: serde_json::Map<String, serde_json::Value> = checks.iter().map(|c| (c.name.to_string(), c.pass.into())).collect();
    v.metric_json("checks", map.into());
    for c in &checks {
        v.require(c.pass, c.name);
    }
    Ok(())
}
