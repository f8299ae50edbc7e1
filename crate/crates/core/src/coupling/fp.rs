use crate::error::{Error, Result};
use crate::math::{linear_fit, max_weight_fraction, mean, std_error, Estimate};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::stream;
use crate::sim::{GrowthMonitor, SimConfig, WaveModel};
use crate::spectral::{PhaseState, SpectralBasis};

/// `sum_{j < n} lambda_j dq_j^2 + (dp_j + alpha dq_j)^2` for `d = a - b`.
fn diff_norm_sq(basis: &SpectralBasis, a: &PhaseState, b: &PhaseState, alpha: f64, n: usize) -> f64 {
    let (qa, pa) = (a.position.coeffs(), a.velocity.coeffs());
    let (qb, pb) = (b.position.coeffs(), b.velocity.coeffs());
    let lam = basis.eigenvalues();
    let mut acc = 0.0;
    for j in 0..n {
        let dq = qa[j] - qb[j];
        let w = pa[j] - pb[j] + alpha * dq;
        acc += lam[j] * dq * dq + w * w;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Feedback dimension `N`.
    pub feedback_modes: usize,
    /// Thresholds for the stopping time that switches the feedback off.
    pub monitor: Option<GrowthMonitor>,
    pub keep_states: bool,
    /// `|v - u'|_H` below which a unit block counts as agreement.
    pub agreement_tol: f64,
}

impl CouplingOptions {
    pub fn new(feedback_modes: usize) -> Self {
        CouplingOptions { feedback_modes, monitor: None, keep_states: false, agreement_tol: 1e-10 }
    }

    pub fn with_monitor(mut self, monitor: GrowthMonitor) -> Self {
        self.monitor = Some(monitor);
        self
    }
}

/// Drift of the noise that turns the intermediate process into a solution
/// started at `z'`, in noise coordinates `a_j = (f(u) - f(v))_j / (sqrt(eps) b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovRecord {
    pub times: Vec<f64>,
    /// Running `int_0^t |a|^2 ds`.
    pub novikov: Vec<f64>,
    /// Running `int a dbeta - 1/2 int |a|^2 ds`.
    pub log_likelihood: Vec<f64>,
    /// Combined stopping time `tau^u ^ tau^{u'} ^ tau^v` after which `a = 0`.
    pub stopping_time: Option<f64>,
}

impl GirsanovRecord {
    pub fn novikov_energy(&self) -> f64 {
        self.novikov.last().copied().unwrap_or(0.0)
    }

    pub fn log_lik(&self) -> f64 {
        self.log_likelihood.last().copied().unwrap_or(0.0)
    }
}

/// Drive `u` from `z`, intermediate `v` from `z'` with feedback
/// `P_N[f(u) - f(v)]`, and a synchronous copy `u'` from `z'`, all on one
/// noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub times: Vec<f64>,
    /// `|v - u|_H`.
    pub diff_norm_h: Vec<f64>,
    /// `|P_N (v - u)|_H^2 / |z' - z|_H^2` (zero when `z = z'`).
    pub lowmode_ratio: Vec<f64>,
    pub girsanov: GirsanovRecord,
    /// Per unit time block: `v = u'` to within the agreement tolerance.
    pub agreement: Vec<bool>,
    pub drive: Option<Vec<PhaseState>>,
    pub intermediate: Option<Vec<PhaseState>>,
    pub u_final: PhaseState,
    pub v_final: PhaseState,
    pub u_prime_final: PhaseState,
}

struct OnlineMonitor {
    mon: GrowthMonitor,
    f0: f64,
    integral: f64,
    prev: f64,
}

impl OnlineMonitor {
    fn new(mon: GrowthMonitor, e0: f64) -> Self {
        OnlineMonitor { mon, f0: e0.abs(), integral: 0.0, prev: e0.abs() }
    }

    fn crossed(&mut self, t: f64, dt: f64, e: f64) -> bool {
        self.integral += 0.5 * dt * (self.prev + e.abs());
        self.prev = e.abs();
        let f = e.abs() + self.mon.alpha * self.integral;
        f >= self.f0 + (self.mon.l_rate + self.mon.m_rate) * t + self.mon.r
    }
}

pub fn fp_intermediate(
    model: &WaveModel,
    cfg: &SimConfig,
    z: &PhaseState,
    z_prime: &PhaseState,
    opts: &CouplingOptions,
    stream_index: u64,
) -> Result<CoupledPath> {
    let basis = &model.basis;
    basis.check_state(z)?;
    basis.check_state(z_prime)?;
    let m = basis.mode_count();
    let n = opts.feedback_modes;
    if n > m {
        return Err(Error::input(alloc::format!("feedback dimension {n} exceeds mode count {m}")));
    }
    let stepper = cfg.stepper(model)?;
    let mut rng = stream(cfg.seed, stream_index);
    let mut ws = stepper.workspace(model);
    let alpha = model.alpha;
    let nl = &model.nonlinearity;
    let h = model.forcing.coeffs();
    let sigma: Vec<f64> = (0..m).map(|j| model.noise.sigma(j)).collect();

    let mut u = z.clone();
    let mut v = z_prime.clone();
    let mut up = z_prime.clone();
    let mut fu = vec![0.0; m];
    let mut fv = vec![0.0; m];
    let mut fup = vec![0.0; m];
    let mut force_u = vec![0.0; m];
    let mut force_v = vec![0.0; m];
    let mut force_up = vec![0.0; m];

    let d0 = diff_norm_sq(basis, z_prime, z, alpha, m);
    let mut monitors = opts.monitor.map(|mon| {
        [
            OnlineMonitor::new(mon, model.energy(&u)),
            OnlineMonitor::new(mon, model.energy(&up)),
            OnlineMonitor::new(mon, model.energy(&v)),
        ]
    });
    let mut stopped = false;
    let mut stopping_time = None;
    let (mut novikov, mut log_lik) = (0.0, 0.0);

    let mut times = vec![0.0];
    let mut diff_norm_h = vec![d0.sqrt()];
    let mut lowmode_ratio = vec![if d0 > 0.0 { diff_norm_sq(basis, z_prime, z, alpha, n) / d0 } else { 0.0 }];
    let mut nov_rec = vec![0.0];
    let mut ll_rec = vec![0.0];
    let steps = cfg.steps();
    let blocks = cfg.horizon.ceil() as usize;
    let mut agreement = vec![true; blocks];
    let mut drive = opts.keep_states.then(|| vec![u.clone()]);
    let mut inter = opts.keep_states.then(|| vec![v.clone()]);
    let mut scratch = vec![0.0; basis.grid_len()];

    for k in 0..steps {
        stepper.draw(&mut rng, &mut ws.increment);
        let eval = |q: &[f64], grid: &mut Vec<f64>, out: &mut [f64]| {
            if nl.is_zero() {
                out.iter_mut().for_each(|x| *x = 0.0);
            } else {
                basis.apply_pointwise_into(q, |x| nl.value(x), grid, out);
            }
        };
        eval(u.position.coeffs(), &mut ws.grid, &mut fu);
        eval(v.position.coeffs(), &mut ws.grid, &mut fv);
        eval(up.position.coeffs(), &mut ws.grid, &mut fup);
        let active = if stopped { 0 } else { n };
        let (mut a_sq, mut a_dw) = (0.0, 0.0);
        for j in 0..m {
            force_u[j] = h[j] - fu[j];
            force_up[j] = h[j] - fup[j];
            if j < active {
                force_v[j] = h[j] - fu[j];
                let diff = fu[j] - fv[j];
                if diff != 0.0 {
                    let a = if sigma[j] > 0.0 { diff / sigma[j] } else { f64::INFINITY };
                    a_sq += a * a;
                    a_dw += a * ws.increment.dw[j];
                }
            } else {
                force_v[j] = h[j] - fv[j];
            }
        }
        novikov += a_sq * cfg.dt;
        log_lik += a_dw - 0.5 * a_sq * cfg.dt;
        let inc = if stepper.is_noisy() { Some(&ws.increment) } else { None };
        stepper.advance(&mut u, &force_u, inc);
        stepper.advance(&mut v, &force_v, inc);
        stepper.advance(&mut up, &force_up, inc);
        if !(u.is_finite() && v.is_finite() && up.is_finite()) {
            return Err(Error::NonFinite { step: k, what: "coupled triple".to_string() });
        }
        let t = (k + 1) as f64 * cfg.dt;
        if let Some(mons) = monitors.as_mut() {
            if !stopped {
                let eu = basis.energy_with(&u, nl, alpha, &mut scratch);
                let eup = basis.energy_with(&up, nl, alpha, &mut scratch);
                let ev = basis.energy_with(&v, nl, alpha, &mut scratch);
                let c0 = mons[0].crossed(t, cfg.dt, eu);
                let c1 = mons[1].crossed(t, cfg.dt, eup);
                let c2 = mons[2].crossed(t, cfg.dt, ev);
                if c0 || c1 || c2 {
                    stopped = true;
                    stopping_time = Some(t);
                }
            }
        }
        let block = ((t - 1e-12) as usize).min(blocks.saturating_sub(1));
        if blocks > 0 && diff_norm_sq(basis, &v, &up, alpha, m).sqrt() > opts.agreement_tol {
            agreement[block] = false;
        }
        if (k + 1) % cfg.stride == 0 || k + 1 == steps {
            let d = diff_norm_sq(basis, &v, &u, alpha, m);
            times.push(t);
            diff_norm_h.push(d.sqrt());
            lowmode_ratio.push(if d0 > 0.0 { diff_norm_sq(basis, &v, &u, alpha, n) / d0 } else { 0.0 });
            nov_rec.push(novikov);
            ll_rec.push(log_lik);
            if let Some(s) = drive.as_mut() {
                s.push(u.clone());
            }
            if let Some(s) = inter.as_mut() {
                s.push(v.clone());
            }
        }
    }
    Ok(CoupledPath {
        times: times.clone(),
        diff_norm_h,
        lowmode_ratio,
        girsanov: GirsanovRecord { times, novikov: nov_rec, log_likelihood: ll_rec, stopping_time },
        agreement,
        drive,
        intermediate: inter,
        u_final: u,
        v_final: v,
        u_prime_final: up,
    })
}

/// `n` coupled runs, run `i` on stream `i`.
pub fn coupled_ensemble(
    model: &WaveModel,
    cfg: &SimConfig,
    z: &PhaseState,
    z_prime: &PhaseState,
    opts: &CouplingOptions,
    n: usize,
) -> Result<Vec<CoupledPath>> {
    par_map(n, |i| fp_intermediate(model, cfg, z, z_prime, opts, i as u64)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// `max_t e^{alpha t} |P_N(v - u)|_H^2 / |z' - z|_H^2` over trials and `N`.
    pub lowmode_max: f64,
    pub lowmode_ok: bool,
    /// `(N, smallest fitted decay rate of |v - u|_H^2 over trials)`.
    pub rates: Vec<(usize, f64)>,
    /// First `N` whose rate exceeds `alpha / 2`.
    pub n_star: Option<usize>,
    pub alpha: f64,
}

/// Decay rate of `|v - u|_H^2`; infinite when the difference vanishes.
fn decay_rate(path: &CoupledPath) -> f64 {
    let d0 = path.diff_norm_h[0];
    if d0 == 0.0 {
        return f64::INFINITY;
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, d) in path.times.iter().zip(&path.diff_norm_h) {
        if *d > 1e-12 * d0 {
            xs.push(*t);
            ys.push(2.0 * d.ln());
        }
    }
    if xs.len() < 3 {
        return f64::INFINITY;
    }
    -linear_fit(&xs, &ys).slope
}

pub fn fp_contraction_test(
    model: &WaveModel,
    cfg: &SimConfig,
    z: &PhaseState,
    z_prime: &PhaseState,
    feedback: &[usize],
    trials: usize,
) -> Result<ContractionReport> {
    let alpha = model.alpha;
    let mut lowmode_max = 0.0f64;
    let mut rates = Vec::new();
    for &n in feedback {
        let opts = CouplingOptions::new(n);
        let paths = coupled_ensemble(model, cfg, z, z_prime, &opts, trials)?;
        let mut rate = f64::INFINITY;
        for p in &paths {
            for (t, r) in p.times.iter().zip(&p.lowmode_ratio) {
                lowmode_max = lowmode_max.max(r * (alpha * t).exp());
            }
            rate = rate.min(decay_rate(p));
        }
        rates.push((n, rate));
    }
    let n_star = rates.iter().find(|(_, r)| *r > alpha / 2.0).map(|(n, _)| *n);
    Ok(ContractionReport { lowmode_max, lowmode_ok: lowmode_max <= 1.0 + 1e-6, rates, n_star, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvBound {
    pub value: f64,
    /// Monte Carlo `E exp(6 c_N int |a|^2)` with `c_N = max(1, max_{j<=N} 1/b_j)`.
    pub moment: Estimate,
    pub tail_dominated: bool,
}

/// `1/2 ((E exp(6 c_N int|a|^2))^{1/2} - 1)^{1/2}`, clipped to `[0, 1]`.
pub fn tv_bound(records: &[GirsanovRecord], b: &[f64], n: usize) -> Result<TvBound> {
    if records.is_empty() {
        return Err(Error::input("empty ensemble"));
    }
    let c_n = b[..n.min(b.len())].iter().map(|x| 1.0 / x).fold(1.0, f64::max);
    let expo: Vec<f64> = records.iter().map(|r| 6.0 * c_n * r.novikov_energy()).collect();
    let vals: Vec<f64> = expo.iter().map(|x| x.exp()).collect();
    let moment = Estimate { value: mean(&vals), std_err: std_error(&vals) };
    let value = if moment.value.is_finite() {
        (0.5 * (moment.value.sqrt() - 1.0).max(0.0).sqrt()).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let tail_dominated = records.len() > 1 && max_weight_fraction(&expo) > 0.1;
    Ok(TvBound { value, moment, tail_dominated })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Largest likelihood ratio as a fraction of their sum; above 0.1 the
    /// importance weights are degenerate.
    pub max_weight: f64,
    pub degenerate: bool,
}

/// `1/2 mean |1 - Lambda|` with `Lambda` the Girsanov exponential.
pub fn tv_estimate_likelihood(records: &[GirsanovRecord]) -> Result<TvEstimate> {
    if records.is_empty() {
        return Err(Error::input("empty ensemble"));
    }
    let ll: Vec<f64> = records.iter().map(|r| r.log_lik()).collect();
    let vals: Vec<f64> = ll.iter().map(|l| 0.5 * (1.0 - l.exp()).abs()).collect();
    let value = mean(&vals).clamp(0.0, 1.0);
    let max_weight = if records.len() > 1 { max_weight_fraction(&ll) } else { 1.0 };
    Ok(TvEstimate { value, std_err: std_error(&vals), max_weight, degenerate: records.len() > 1 && max_weight > 0.1 })
}

/// Shape `TV <= C* d^a` fitted on one set of separations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvShape {
    pub exponent: f64,
    pub c_star: f64,
}

impl TvShape {
    pub fn bound(&self, d: f64) -> f64 {
        self.c_star * d.powf(self.exponent)
    }

    /// Whether `tv` at separation `d` respects the fitted shape within `k` standard errors.
    pub fn verify(&self, d: f64, tv: &TvEstimate, k: f64) -> bool {
        tv.value <= self.bound(d) + k * tv.std_err
    }
}

pub fn tv_shape_fit(d: &[f64], tv: &[TvEstimate]) -> Option<TvShape> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (dd, t) in d.iter().zip(tv) {
        if t.value > 0.0 && *dd > 0.0 {
            xs.push(dd.ln());
            ys.push(t.value.ln());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let exponent = linear_fit(&xs, &ys).slope;
    let c_star = d.iter().zip(tv).map(|(dd, t)| t.value / dd.powf(exponent)).fold(0.0, f64::max);
    Some(TvShape { exponent, c_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_stream, NoiseModel, NoiseRule, Nonlinearity};
    use crate::spectral::Field;
    use core::f64::consts::PI;

    fn kg(m: usize, amp: f64) -> WaveModel {
        let basis = SpectralBasis::interval(PI, m).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, amp, true).unwrap();
        let nl = Nonlinearity::klein_gordon(1.0, 0.0).unwrap().with_default_nu(1.0, 1.0);
        WaveModel::new(basis, nl, noise, 1.0).unwrap()
    }

    fn start(m: usize, a: f64) -> PhaseState {
        PhaseState::at_rest(Field::from_coeffs((1..=m).map(|j| a / (j * j) as f64).collect()))
    }

    #[test]
    fn identical_starts_give_identical_paths() {
        let model = kg(16, 0.5);
        let z = start(16, 0.7);
        let p = fp_intermediate(&model, &SimConfig::new(0.01, 2.0, 5), &z, &z, &CouplingOptions::new(4), 0).unwrap();
        assert!(p.diff_norm_h.iter().all(|d| *d < 1e-10));
        assert_eq!(p.girsanov.novikov_energy(), 0.0);
        assert!(p.agreement.iter().all(|a| *a));
    }

    #[test]
    fn drive_marginal_matches_plain_simulation() {
        let model = kg(8, 0.5);
        let cfg = SimConfig::new(0.01, 1.0, 11).with_stride(10);
        let (z, zp) = (start(8, 0.5), start(8, -0.2));
        let mut opts = CouplingOptions::new(2);
        opts.keep_states = true;
        let p = fp_intermediate(&model, &cfg, &z, &zp, &opts, 3).unwrap();
        let plain = simulate_stream(&model, &cfg, &z, 3).unwrap();
        assert_eq!(p.drive.unwrap(), plain.states);
    }

    #[test]
    fn zero_feedback_gives_zero_drift() {
        let model = kg(8, 0.5);
        let p = fp_intermediate(&model, &SimConfig::new(0.01, 1.0, 1), &start(8, 0.5), &start(8, 0.1), &CouplingOptions::new(0), 0)
            .unwrap();
        assert_eq!(p.girsanov.novikov_energy(), 0.0);
        assert_eq!(p.girsanov.log_lik(), 0.0);
        // Without feedback v is the synchronous copy u'.
        assert!(p.agreement.iter().all(|a| *a));
    }

    #[test]
    fn free_wave_difference_is_the_free_flow() {
        let basis = SpectralBasis::interval(PI, 8).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 1.0, true).unwrap();
        let model = WaveModel::new(basis.clone(), Nonlinearity::free(), noise, 1.0).unwrap();
        let cfg = SimConfig::new(0.01, 3.0, 2);
        let (z, zp) = (start(8, 0.4), start(8, -0.4));
        let p = fp_intermediate(&model, &cfg, &z, &zp, &CouplingOptions::new(3), 0).unwrap();
        let free = WaveModel::linear(basis, 1.0).unwrap();
        let diff = crate::sim::simulate(&free, &cfg, &zp.sub(&z)).unwrap();
        for (a, b) in p.diff_norm_h.iter().zip(&diff.norm_h) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b));
        }
    }

    #[test]
    fn low_modes_contract_pathwise() {
        let model = kg(16, 0.5);
        let cfg = SimConfig::new(0.01, 5.0, 8).with_stride(5);
        let rep = fp_contraction_test(&model, &cfg, &start(16, 1.0), &start(16, -0.5), &[2, 4, 16], 3).unwrap();
        assert!(rep.lowmode_ok, "{rep:?}");
        let full = rep.rates.iter().find(|(n, _)| *n == 16).unwrap().1;
        assert!(full >= 0.9 * model.alpha, "{rep:?}");
    }

    #[test]
    fn tv_trivial_cases() {
        let zero = GirsanovRecord { times: vec![0.0, 1.0], novikov: vec![0.0, 0.0], log_likelihood: vec![0.0, 0.0], stopping_time: None };
        let b = [1.0, 0.25];
        assert_eq!(tv_bound(&[zero.clone(), zero.clone()], &b, 2).unwrap().value, 0.0);
        assert_eq!(tv_estimate_likelihood(&[zero.clone(), zero]).unwrap().value, 0.0);
        let mk = |e: f64| GirsanovRecord { times: vec![0.0], novikov: vec![e], log_likelihood: vec![0.0], stopping_time: None };
        let mut last = 0.0;
        for e in [0.0, 1e-3, 1e-2, 0.1] {
            let v = tv_bound(&[mk(e), mk(0.01)], &b, 2).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }
}
