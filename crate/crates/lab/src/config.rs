//! Run configuration: a flat-section TOML file with top-level `seed` and
//! `out` keys and the sections `[model]`, `[noise]`, `[integrator]`,
//! `[experiment]`. Manifests add a `[run]` stamp and parse back as configs.

use crate::error::{LabError, LabResult};
use dampwave_core::ergodic::FiniteChain;
use dampwave_core::oracle::{builtin, ToyModel};
use dampwave_core::sim::{max_stable_dt, NoiseModel, NoiseRule, Nonlinearity, SimConfig, WaveModel};
use dampwave_core::spectral::{Field, SpectralBasis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Value of an experiment key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "a boolean",
            Value::Number(_) => "a number",
            Value::List(_) => "a list of numbers",
            Value::Text(_) => "a string",
        }
    }

    /// Parses `s` into the same variant as `self`.
    pub fn parse_like(&self, s: &str) -> Result<Value, String> {
        match self {
            Value::Bool(_) => s.parse().map(Value::Bool).map_err(|_| format!("`{s}` is not true or false")),
            Value::Number(_) => s.parse().map(Value::Number).map_err(|_| format!("`{s}` is not a number")),
            Value::List(_) => s
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List),
            Value::Text(_) => Ok(Value::Text(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Simulate,
    EnergyAudit,
    CoupleFp,
    GirsanovTv,
    Mix,
    Occupation,
    Pressure,
    Ldp1,
    Quasipotential,
    FwGraph,
    StationarySmallnoise,
    BoundaryChain,
    Selftest,
}

const NLW: &[&str] = &["nlw"];
const TOYS_AND_NLW: &[&str] = &["nlw", "cubic", "doublewell", "ou", "chain"];
const GRADIENT: &[&str] = &["cubic", "doublewell"];
const GRADIENT_AND_NLW: &[&str] = &["cubic", "doublewell", "nlw"];

impl Command {
    pub const ALL: [Command; 13] = [
        Command::Simulate,
        Command::EnergyAudit,
        Command::CoupleFp,
        Command::GirsanovTv,
        Command::Mix,
        Command::Occupation,
        Command::Pressure,
        Command::Ldp1,
        Command::Quasipotential,
        Command::FwGraph,
        Command::StationarySmallnoise,
        Command::BoundaryChain,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::EnergyAudit => "energy-audit",
            Command::CoupleFp => "couple-fp",
            Command::GirsanovTv => "girsanov-tv",
            Command::Mix => "mix",
            Command::Occupation => "occupation",
            Command::Pressure => "pressure",
            Command::Ldp1 => "ldp1",
            Command::Quasipotential => "quasipotential",
            Command::FwGraph => "fw-graph",
            Command::StationarySmallnoise => "stationary-smallnoise",
            Command::BoundaryChain => "boundary-chain",
            Command::Selftest => "selftest",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Simulate => "Simulate trajectories and dump the first one",
            Command::EnergyAudit => "Fit the a priori energy bound on an ensemble",
            Command::CoupleFp => "Foias-Prodi coupling: low-mode contraction and decay rates",
            Command::GirsanovTv => "Girsanov total-variation estimate against its bound",
            Command::Mix => "Exponential mixing rate between two initial conditions",
            Command::Occupation => "Time averages: strong law residuals and central limit check",
            Command::Pressure => "Feynman-Kac pressure curve and its Legendre transform",
            Command::Ldp1 => "Level-1 large deviations of time averages",
            Command::Quasipotential => "Minimum action between two equilibria",
            Command::FwGraph => "Equilibrium network, W-graph weights and rate values",
            Command::StationarySmallnoise => "Small-noise asymptotics of the invariant measure",
            Command::BoundaryChain => "Transition matrix of the chain on boundary balls",
            Command::Selftest => "Run the trivial oracles",
        }
    }

    pub fn default_model(self) -> &'static str {
        match self {
            Command::Occupation | Command::Pressure | Command::Ldp1 => "ou",
            Command::Quasipotential | Command::FwGraph | Command::StationarySmallnoise => "cubic",
            Command::BoundaryChain => "doublewell",
            _ => "nlw",
        }
    }

    pub fn allowed_models(self) -> &'static [&'static str] {
        match self {
            Command::Simulate | Command::Occupation | Command::Pressure | Command::Ldp1 | Command::Selftest => TOYS_AND_NLW,
            Command::Quasipotential | Command::FwGraph => GRADIENT_AND_NLW,
            Command::StationarySmallnoise | Command::BoundaryChain => GRADIENT,
            _ => NLW,
        }
    }

    /// Experiment keys with their defaults. Any other key is rejected.
    pub fn experiment_defaults(self) -> Vec<(&'static str, Value)> {
        use Value::*;
        let list = |v: &[f64]| List(v.to_vec());
        match self {
            Command::Simulate => vec![("init_amp", Number(1.0)), ("dump_modes", Number(4.0)), ("x0", Number(0.0))],
            Command::EnergyAudit => {
                vec![("init_amp", Number(1.0)), ("e_ref", Number(0.0)), ("slope_tol", Number(0.1))]
            }
            Command::CoupleFp => vec![
                ("init_amp", Number(1.0)),
                ("init_amp_prime", Number(-0.5)),
                ("feedback", list(&[1.0, 2.0, 4.0, 8.0, 16.0])),
                ("trials", Number(3.0)),
            ],
            Command::GirsanovTv => vec![
                ("init_amp", Number(0.5)),
                ("distances", list(&[0.04, 0.02, 0.01])),
                ("feedback", Number(4.0)),
                ("exponent", Number(2.0)),
                ("exponent_tol", Number(0.3)),
                ("se_factor", Number(3.0)),
            ],
            Command::Mix => vec![
                ("init_amp", Number(1.0)),
                ("init_amp_prime", Number(-0.5)),
                ("observable_modes", Number(4.0)),
                ("tail_start", Number(0.2)),
                ("bootstrap", Number(200.0)),
            ],
            Command::Occupation => vec![
                ("x0", Number(0.0)),
                ("init_amp", Number(0.5)),
                ("levels", Number(5.0)),
                ("slln_max_exponent", Number(-0.4)),
            ],
            Command::Pressure => vec![
                ("x0", Number(0.0)),
                ("init_amp", Number(0.5)),
                ("betas", list(&[-0.5, -0.25, 0.0, 0.25, 0.5])),
                ("particles", Number(500.0)),
                ("replicates", Number(12.0)),
                ("se_factor", Number(3.0)),
            ],
            Command::Ldp1 => vec![
                ("x0", Number(0.0)),
                ("init_amp", Number(0.5)),
                ("intervals", list(&[0.4, 0.6, -0.1, 0.1])),
                ("horizons", list(&[4.0, 8.0, 16.0, 32.0])),
                ("rel_tol", Number(0.2)),
                ("min_hits", Number(50.0)),
                ("betas", list(&[-2.0, 2.0])),
                ("particles", Number(300.0)),
                ("replicates", Number(8.0)),
            ],
            Command::Quasipotential => vec![
                ("from", Number(0.0)),
                ("to", Number(1.0)),
                ("solver_dt", Number(0.01)),
                ("horizons", list(&[2.0, 4.0, 8.0, 16.0])),
                ("rel_tol", Number(0.05)),
            ],
            Command::FwGraph => vec![
                ("source", Text("oracle".into())),
                ("variant", Text("arborescence".into())),
                ("stable_only", Bool(true)),
                ("solver_dt", Number(0.01)),
                ("eval_points", list(&[])),
            ],
            Command::StationarySmallnoise => vec![
                ("mode", Text("exact".into())),
                ("eps", list(&[1e-3])),
                ("sets", list(&[2.9, 3.1, -0.1, 0.1])),
                ("eta", Number(0.1)),
                ("gap_tol", Number(0.02)),
                ("rel_tol", Number(0.2)),
                ("sample_horizon", Number(20000.0)),
            ],
            Command::BoundaryChain => vec![
                ("eps", list(&[0.1])),
                ("rho1_prime", Number(0.05)),
                ("rho0_prime", Number(0.1)),
                ("rho1", Number(0.2)),
                ("rho0", Number(0.4)),
                ("rho_star", Number(0.5)),
                ("cycles", Number(40000.0)),
                ("rel_tol", Number(0.25)),
                ("se_factor", Number(3.0)),
            ],
            Command::Selftest => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `nlw` or a toy name; empty picks the subcommand default.
    pub kind: String,
    /// `klein_gordon`, `sine_gordon` or `free`.
    pub nonlinearity: String,
    pub rho: f64,
    pub lambda: f64,
    pub nu: Option<f64>,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub length: f64,
    /// Second side; present means a rectangle.
    pub width: Option<f64>,
    pub modes: usize,
    pub modes_y: Option<usize>,
    /// Leading coefficients of `h`.
    pub forcing: Vec<f64>,
    /// Toy noise level.
    pub eps: Option<f64>,
    pub theta: f64,
    pub sigma: f64,
    /// Jump rates `0 -> 1` and `1 -> 0` of the two-state chain.
    pub chain_rates: Vec<f64>,
    pub chain_potential: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: String::new(),
            nonlinearity: "klein_gordon".into(),
            rho: 1.0,
            lambda: 0.0,
            nu: None,
            gamma: 1.0,
            alpha: None,
            length: std::f64::consts::PI,
            width: None,
            modes: 32,
            modes_y: None,
            forcing: Vec::new(),
            eps: None,
            theta: 1.0,
            sigma: 1.0,
            chain_rates: vec![1.0, 1.0],
            chain_potential: vec![1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// `power` (`b_j = c j^-q`) or `explicit`.
    pub rule: String,
    pub c: f64,
    pub q: f64,
    pub active: Option<usize>,
    pub coeffs: Vec<f64>,
    pub amplitude: f64,
    pub non_degenerate: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            rule: "power".into(),
            c: 1.0,
            q: 2.0,
            active: None,
            coeffs: Vec::new(),
            amplitude: 0.5,
            non_degenerate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub stride: usize,
    pub paths: Option<usize>,
    pub sobolev_s: f64,
    pub enforce_dt_rule: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection { dt: None, horizon: None, stride: 10, paths: None, sobolev_s: 0.4, enforce_dt_rule: true }
    }
}

/// Written into manifests; ignored when a manifest is read back as a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunStamp {
    pub subcommand: String,
    pub content_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    pub model: ModelSection,
    pub noise: NoiseSection,
    pub integrator: IntegratorSection,
    pub experiment: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunStamp>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: "dampwave-out".into(),
            model: ModelSection::default(),
            noise: NoiseSection::default(),
            integrator: IntegratorSection::default(),
            experiment: BTreeMap::new(),
            run: None,
        }
    }
}

pub fn parse_config(text: &str) -> LabResult<RunConfig> {
    toml::from_str(text).map_err(|e| LabError::config(e.message().to_string() + &span_hint(text, e.span())))
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

pub fn read_config(path: &Path) -> LabResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn emit_config(cfg: &RunConfig) -> LabResult<String> {
    Ok(toml::to_string(cfg)?)
}

impl RunConfig {
    pub fn is_nlw(&self) -> bool {
        self.model.kind == "nlw"
    }

    /// Fills subcommand defaults and validates; every violation is reported.
    pub fn resolve(&mut self, cmd: Command) -> LabResult<()> {
        let mut errs = Vec::new();
        if self.model.kind.is_empty() {
            self.model.kind = cmd.default_model().into();
        }
        if self.model.kind == "double-well" {
            self.model.kind = "doublewell".into();
        }
        if !cmd.allowed_models().contains(&self.model.kind.as_str()) {
            errs.push(format!(
                "model `{}` is not available for `{}` (choose from {})",
                self.model.kind,
                cmd.name(),
                cmd.allowed_models().join(", ")
            ));
        }
        let defaults = cmd.experiment_defaults();
        for (k, v) in &self.experiment {
            match defaults.iter().find(|(d, _)| d == k) {
                None => errs.push(format!("unknown experiment key `{k}` for `{}`", cmd.name())),
                Some((_, d)) => {
                    let ok = matches!(
                        (d, v),
                        (Value::Bool(_), Value::Bool(_))
                            | (Value::Number(_), Value::Number(_))
                            | (Value::List(_), Value::List(_))
                            | (Value::Text(_), Value::Text(_))
                    );
                    if !ok {
                        errs.push(format!("experiment key `{k}` must be {}, found {}", d.kind(), v.kind()));
                    }
                }
            }
        }
        for (k, v) in defaults {
            self.experiment.entry(k.to_string()).or_insert(v);
        }
        if self.integrator.dt.is_none() {
            self.integrator.dt = Some(self.default_dt());
        }
        let (paths, horizon) = self.default_extent(cmd);
        self.integrator.paths.get_or_insert(paths);
        self.integrator.horizon.get_or_insert(horizon);
        if errs.is_empty() {
            errs = self.violations(cmd);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(errs))
        }
    }

    fn default_dt(&self) -> f64 {
        match self.model.kind.as_str() {
            "nlw" => {
                let lmax = self.basis().map(|b| b.lambda_max()).unwrap_or(1.0);
                let cap = max_stable_dt(lmax);
                if cap >= 0.01 {
                    0.01
                } else {
                    // largest power-of-two fraction of 0.01 under the cap
                    let mut dt = 0.01;
                    while dt > cap {
                        dt /= 2.0;
                    }
                    dt
                }
            }
            "ou" | "chain" => 0.01,
            _ => 1e-3,
        }
    }

    fn default_extent(&self, cmd: Command) -> (usize, f64) {
        let toy = !self.is_nlw();
        match cmd {
            Command::Simulate => (4, 20.0),
            Command::EnergyAudit => (8, 20.0),
            Command::CoupleFp => (1, 5.0),
            Command::GirsanovTv => (200, 2.0),
            Command::Mix => (64, 15.0),
            Command::Occupation if toy => (4000, 100.0),
            Command::Occupation => (64, 50.0),
            Command::Pressure => (1, 40.0),
            Command::Ldp1 => (20000, 32.0),
            _ => (1, 20.0),
        }
    }

    pub fn paths(&self) -> usize {
        self.integrator.paths.unwrap_or(1)
    }

    pub fn horizon(&self) -> f64 {
        self.integrator.horizon.unwrap_or(20.0)
    }

    fn violations(&self, cmd: Command) -> Vec<String> {
        let mut errs = Vec::new();
        if self.seed > i64::MAX as u64 {
            errs.push("seed must be below 2^63".into());
        }
        let it = &self.integrator;
        let dt = it.dt.unwrap_or(0.0);
        if !(dt > 0.0 && dt.is_finite()) {
            errs.push(format!("dt = {dt} must be positive"));
        }
        let h = self.horizon();
        if !(h > 0.0 && h.is_finite()) {
            errs.push(format!("horizon = {h} must be positive"));
        }
        if it.stride == 0 {
            errs.push("stride must be at least 1".into());
        }
        if it.paths == Some(0) {
            errs.push("paths must be at least 1".into());
        }
        for (k, v) in &self.experiment {
            if let Value::Number(x) = v {
                if !x.is_finite() {
                    errs.push(format!("experiment key `{k}` must be finite"));
                }
            }
        }
        if self.is_nlw() {
            errs.extend(self.nlw_violations(dt));
        } else if let Err(e) = self.toy_model() {
            errs.push(flatten(e));
        }
        let _ = cmd;
        errs
    }

    fn nlw_violations(&self, dt: f64) -> Vec<String> {
        let mut errs = Vec::new();
        let m = &self.model;
        let basis = match self.basis() {
            Ok(b) => b,
            Err(e) => return vec![flatten(e)],
        };
        if !(m.gamma > 0.0) {
            errs.push(format!("damping gamma = {} must be positive", m.gamma));
        }
        match self.nonlinearity(&basis) {
            Ok(nl) => {
                if let Err(e) = nl.validate(basis.lambda1(), m.gamma) {
                    errs.push(flatten(e.into()));
                }
                if !nl.check_dissipativity().holds() {
                    errs.push(format!("nonlinearity `{}` fails the dissipativity conditions", m.nonlinearity));
                }
                let rho = nl.growth_exponent();
                let s = self.integrator.sobolev_s;
                if m.nonlinearity == "klein_gordon" && !(s > 0.0 && s < 1.0 - rho / 2.0) {
                    errs.push(format!("sobolev_s = {s} must lie in (0, 1 - rho/2) = (0, {})", 1.0 - rho / 2.0));
                }
            }
            Err(e) => errs.push(flatten(e)),
        }
        if let Err(e) = self.noise_model(&basis) {
            errs.push(flatten(e));
        }
        if m.forcing.len() > basis.mode_count() {
            errs.push(format!("forcing has {} coefficients for {} modes", m.forcing.len(), basis.mode_count()));
        }
        if let Some(a) = m.alpha {
            if !(a > 0.0) {
                errs.push(format!("alpha = {a} must be positive"));
            }
        }
        if self.integrator.enforce_dt_rule && dt > max_stable_dt(basis.lambda_max()) {
            errs.push(format!(
                "dt = {dt} violates dt <= 0.5/sqrt(lambda_M) = {}",
                max_stable_dt(basis.lambda_max())
            ));
        }
        errs
    }

    pub fn basis(&self) -> LabResult<SpectralBasis> {
        let m = &self.model;
        let b = match m.width {
            None => SpectralBasis::interval(m.length, m.modes)?,
            Some(w) => SpectralBasis::rectangle(m.length, w, m.modes, m.modes_y.unwrap_or(m.modes))?,
        };
        Ok(b)
    }

    fn nonlinearity(&self, basis: &SpectralBasis) -> LabResult<Nonlinearity> {
        let m = &self.model;
        let nl = match m.nonlinearity.as_str() {
            "klein_gordon" => Nonlinearity::klein_gordon(m.rho, m.lambda)?,
            "sine_gordon" => Nonlinearity::sine_gordon(),
            "free" => Nonlinearity::free(),
            other => {
                return Err(LabError::config(format!(
                    "unknown nonlinearity `{other}` (klein_gordon, sine_gordon, free)"
                )))
            }
        };
        Ok(match m.nu {
            Some(nu) => nl.with_nu(nu),
            None => nl.with_default_nu(basis.lambda1(), m.gamma),
        })
    }

    fn noise_model(&self, basis: &SpectralBasis) -> LabResult<NoiseModel> {
        let n = &self.noise;
        let rule = match n.rule.as_str() {
            "power" => NoiseRule::Power { c: n.c, q: n.q, active: n.active },
            "explicit" => NoiseRule::Explicit(n.coeffs.clone()),
            other => return Err(LabError::config(format!("unknown noise rule `{other}` (power, explicit)"))),
        };
        Ok(NoiseModel::new(basis, rule, n.amplitude, n.non_degenerate)?)
    }

    pub fn wave_model(&self) -> LabResult<WaveModel> {
        let basis = self.basis()?;
        let nl = self.nonlinearity(&basis)?;
        let noise = self.noise_model(&basis)?;
        let mut h = self.model.forcing.clone();
        h.resize(basis.mode_count(), 0.0);
        let mut model = WaveModel::new(basis, nl, noise, self.model.gamma)?.with_forcing(Field::from_coeffs(h))?;
        if let Some(a) = self.model.alpha {
            model = model.with_alpha(a)?;
        }
        Ok(model)
    }

    pub fn toy_model(&self) -> LabResult<ToyModel> {
        let m = &self.model;
        let toy = match m.kind.as_str() {
            "ou" => ToyModel::ou(m.theta, m.sigma)?,
            "chain" => {
                if m.chain_rates.len() != 2 || m.chain_potential.len() != 2 {
                    return Err(LabError::config("chain_rates and chain_potential need two entries each"));
                }
                let c = FiniteChain::two_state(
                    m.chain_rates[0],
                    m.chain_rates[1],
                    [m.chain_potential[0], m.chain_potential[1]],
                )?;
                ToyModel::chain(c)
            }
            name => builtin(name)?,
        };
        Ok(match m.eps {
            Some(e) if m.kind != "ou" && m.kind != "chain" => {
                if !(e >= 0.0) {
                    return Err(LabError::config(format!("eps = {e} must be nonnegative")));
                }
                toy.with_eps(e)
            }
            _ => toy,
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        let it = &self.integrator;
        let mut cfg = SimConfig::new(it.dt.unwrap_or(0.01), self.horizon(), self.seed).with_stride(it.stride);
        cfg.sobolev_s = it.sobolev_s;
        cfg.enforce_dt_rule = it.enforce_dt_rule;
        cfg
    }

    pub fn dt(&self) -> f64 {
        self.integrator.dt.unwrap_or(0.01)
    }

    fn value(&self, key: &str) -> &Value {
        self.experiment.get(key).unwrap_or_else(|| panic!("experiment key `{key}` read before resolve"))
    }

    pub fn num(&self, key: &str) -> f64 {
        match self.value(key) {
            Value::Number(x) => *x,
            v => panic!("experiment key `{key}` holds {}", v.kind()),
        }
    }

    /// A nonnegative whole number.
    pub fn count(&self, key: &str) -> LabResult<usize> {
        let x = self.num(key);
        if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
            Ok(x as usize)
        } else {
            Err(LabError::config(format!("experiment key `{key}` = {x} must be a nonnegative integer")))
        }
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        match self.value(key) {
            Value::List(v) => v.clone(),
            v => panic!("experiment key `{key}` holds {}", v.kind()),
        }
    }

    /// A list read as consecutive `(lo, hi)` pairs.
    pub fn pairs(&self, key: &str) -> LabResult<Vec<(f64, f64)>> {
        let v = self.list(key);
        if v.len() % 2 != 0 || v.chunks(2).any(|p| !(p[0] < p[1])) {
            return Err(LabError::config(format!("`{key}` must list lo, hi pairs with lo < hi")));
        }
        Ok(v.chunks(2).map(|p| (p[0], p[1])).collect())
    }

    pub fn text(&self, key: &str) -> &str {
        match self.value(key) {
            Value::Text(s) => s,
            v => panic!("experiment key `{key}` holds {}", v.kind()),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.value(key) {
            Value::Bool(b) => *b,
            v => panic!("experiment key `{key}` holds {}", v.kind()),
        }
    }
}

fn flatten(e: LabError) -> String {
    match e {
        LabError::Config(v) => v.join("; "),
        LabError::Core(dampwave_core::Error::Config(s)) => s,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let mut cfg = parse_config("").unwrap();
        cfg.resolve(Command::Simulate).unwrap();
        assert_eq!(cfg.model.kind, "nlw");
        assert_eq!(cfg.experiment.len(), Command::Simulate.experiment_defaults().len());
        assert!(cfg.integrator.dt.is_some());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[model]\nrhoo = 1.0\n").is_err());
        assert!(parse_config("sed = 3\n").is_err());
        let mut cfg = parse_config("[experiment]\nbogus = 1.0\n").unwrap();
        let err = cfg.resolve(Command::Mix).unwrap_err();
        assert_eq!(err.exit_code(), 64);
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn growth_exponent_and_noise_decay_are_checked() {
        let mut cfg = parse_config("[model]\nkind = \"nlw\"\nrho = 2.5\n[noise]\nq = 1.0\n").unwrap();
        let err = cfg.resolve(Command::Simulate).unwrap_err().to_string();
        assert!(err.contains("growth condition") && err.contains("rho < 2"), "{err}");
        assert!(err.contains("divergent B_1"), "{err}");
    }

    #[test]
    fn dt_rule_is_checked() {
        let mut cfg = parse_config("[model]\nmodes = 64\n[integrator]\ndt = 0.01\n").unwrap();
        let err = cfg.resolve(Command::Simulate).unwrap_err().to_string();
        assert!(err.contains("0.5/sqrt(lambda_M)"), "{err}");
        let mut ok = parse_config("[model]\nmodes = 64\n").unwrap();
        ok.resolve(Command::Simulate).unwrap();
        assert!(ok.dt() <= 0.5 / 64.0);
    }

    #[test]
    fn emit_parse_round_trip() {
        for cmd in Command::ALL {
            let mut cfg = RunConfig { seed: 99, ..RunConfig::default() };
            cfg.model.alpha = Some(0.2);
            cfg.noise.active = Some(3);
            cfg.noise.non_degenerate = false;
            cfg.resolve(cmd).unwrap();
            let back = parse_config(&emit_config(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg, "{}", cmd.name());
        }
    }

    #[test]
    fn cli_strings_parse_like_defaults() {
        assert_eq!(Value::List(vec![]).parse_like("1, 2.5").unwrap(), Value::List(vec![1.0, 2.5]));
        assert_eq!(Value::Bool(true).parse_like("false").unwrap(), Value::Bool(false));
        assert!(Value::Number(0.0).parse_like("x").is_err());
    }
}
