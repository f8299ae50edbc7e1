//! Minimum-action controls by direct collocation.
//!
//! The control is piecewise constant on a `K`-step grid and the dynamics are
//! advanced by a one-step map `x_{k+1} = F(x_k, w_k)`, where `w` is the
//! whitened control (`phi_j = b_j w_j`). The objective
//!
//! ```text
//! 1/2 dt sum_k |w_k|^2 + |x_K - z_2|_G^2 / eta^2 (+ barrier)
//! ```
//!
//! is minimized with L-BFGS on gradients from the discrete adjoint, over a
//! ladder of decreasing `eta` with warm starts.

use super::action::ControlPath;
use super::equilibria::nonlinear_jacobian;
use super::lbfgs::{minimize, LbfgsOptions};
use crate::error::{Error, Result};
use crate::oracle::{Poly, ToyModel};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::sim::{Stepper, WaveModel};
use crate::spectral::Field;

/// A discrete controlled flow with its vector-Jacobian product.
pub trait ControlledDynamics: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn dt(&self) -> f64;
    fn step(&self, x: &[f64], w: &[f64], out: &mut [f64]);
    /// `gx = (dF/dx)^T lam`, `gw = (dF/dw)^T lam`.
    fn step_vjp(&self, x: &[f64], w: &[f64], lam: &[f64], gx: &mut [f64], gw: &mut [f64]);
    /// Diagonal weights of the state metric used for endpoint distances.
    fn metric(&self) -> Vec<f64>;
    /// Noise coefficients `b_j` of the full control field.
    fn noise_coeffs(&self) -> Vec<f64>;
    /// `phi` from the whitened control.
    fn control_field(&self, w: &[f64]) -> Field;
    /// Controls that would track the straight segment from `z1` to `z2`.
    fn line_controls(&self, _z1: &[f64], _z2: &[f64], _steps: usize) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Euler discretization of `u' = -b(u) + phi` for a scalar gradient toy.
#[derive(Debug, Clone)]
pub struct ToyControl {
    pub drift: Poly,
    pub dt: f64,
    slope: Poly,
}

impl ToyControl {
    pub fn new(model: &ToyModel, dt: f64) -> Result<Self> {
        let drift = model.drift().ok_or_else(|| Error::input("controlled toy needs a gradient drift"))?.clone();
        if !(dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        let slope = drift.derivative();
        Ok(ToyControl { drift, dt, slope })
    }
}

impl ControlledDynamics for ToyControl {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = x[0] + self.dt * (w[0] - self.drift.eval(x[0]));
    }
    fn step_vjp(&self, x: &[f64], _w: &[f64], lam: &[f64], gx: &mut [f64], gw: &mut [f64]) {
        gx[0] = lam[0] * (1.0 - self.dt * self.slope.eval(x[0]));
        gw[0] = lam[0] * self.dt;
    }
    fn metric(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn noise_coeffs(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn control_field(&self, w: &[f64]) -> Field {
        Field::from_coeffs(w.to_vec())
    }
    fn line_controls(&self, z1: &[f64], z2: &[f64], steps: usize) -> Option<Vec<Vec<f64>>> {
        let v = (z2[0] - z1[0]) / (steps as f64 * self.dt);
        Some((0..steps).map(|k| vec![v + self.drift.eval(z1[0] + v * k as f64 * self.dt)]).collect())
    }
}

/// Exponential-integrator discretization of the controlled Galerkin wave
/// equation on the state `(q, p)`, with controls on the modes where `b_j > 0`.
#[derive(Debug, Clone)]
pub struct WaveControl {
    pub model: WaveModel,
    stepper: Stepper,
    active: Vec<usize>,
    b: Vec<f64>,
}

impl WaveControl {
    pub fn new(model: &WaveModel, dt: f64) -> Result<Self> {
        let stepper = Stepper::new(model, dt)?;
        let b = model.noise.coeffs().to_vec();
        let active: Vec<usize> = (0..b.len()).filter(|j| b[*j] > 0.0).collect();
        if active.is_empty() {
            return Err(Error::config("no mode is forced; every control has infinite action"));
        }
        Ok(WaveControl { model: model.clone(), stepper, active, b })
    }

    pub fn state_of(y: &crate::spectral::PhaseState) -> Vec<f64> {
        let mut x = y.position.coeffs().to_vec();
        x.extend_from_slice(y.velocity.coeffs());
        x
    }

    pub fn phase_state(&self, x: &[f64]) -> crate::spectral::PhaseState {
        let m = self.model.modes();
        crate::spectral::PhaseState::new(Field::from_coeffs(x[..m].to_vec()), Field::from_coeffs(x[m..].to_vec()))
    }
}

impl ControlledDynamics for WaveControl {
    fn state_dim(&self) -> usize {
        2 * self.model.modes()
    }
    fn control_dim(&self) -> usize {
        self.active.len()
    }
    fn dt(&self) -> f64 {
        self.stepper.dt()
    }
    fn step(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let m = self.model.modes();
        let mut force = vec![0.0; m];
        let mut grid = Vec::new();
        self.stepper.drift_force(&self.model, &x[..m], &mut grid, &mut force);
        for (a, &j) in self.active.iter().enumerate() {
            force[j] += self.b[j] * w[a];
        }
        for j in 0..m {
            let p = self.stepper.propagator(j);
            let r = self.stepper.forcing_response(j);
            out[j] = p[0][0] * x[j] + p[0][1] * x[m + j] + r[0] * force[j];
            out[m + j] = p[1][0] * x[j] + p[1][1] * x[m + j] + r[1] * force[j];
        }
    }
    fn step_vjp(&self, x: &[f64], _w: &[f64], lam: &[f64], gx: &mut [f64], gw: &mut [f64]) {
        let m = self.model.modes();
        let mut mu = vec![0.0; m];
        for j in 0..m {
            let p = self.stepper.propagator(j);
            let r = self.stepper.forcing_response(j);
            mu[j] = r[0] * lam[j] + r[1] * lam[m + j];
            gx[j] = p[0][0] * lam[j] + p[1][0] * lam[m + j];
            gx[m + j] = p[0][1] * lam[j] + p[1][1] * lam[m + j];
        }
        if !self.model.nonlinearity.is_zero() {
            let jac = nonlinear_jacobian(&self.model, &x[..m]);
            let jm = jac.matvec(&mu);
            for j in 0..m {
                gx[j] -= jm[j];
            }
        }
        for (a, &j) in self.active.iter().enumerate() {
            gw[a] = self.b[j] * mu[j];
        }
    }
    fn metric(&self) -> Vec<f64> {
        let mut g = self.model.basis.eigenvalues().to_vec();
        g.extend(core::iter::repeat(1.0).take(self.model.modes()));
        g
    }
    fn noise_coeffs(&self) -> Vec<f64> {
        self.b.clone()
    }
    fn control_field(&self, w: &[f64]) -> Field {
        let mut phi = vec![0.0; self.model.modes()];
        for (a, &j) in self.active.iter().enumerate() {
            phi[j] = self.b[j] * w[a];
        }
        Field::from_coeffs(phi)
    }
    /// `phi = gamma v + Lambda q + P f(q) - h` along `q(t) = z1 + v t`.
    fn line_controls(&self, z1: &[f64], z2: &[f64], steps: usize) -> Option<Vec<Vec<f64>>> {
        let m = self.model.modes();
        let horizon = steps as f64 * self.dt();
        let v: Vec<f64> = (0..m).map(|j| (z2[j] - z1[j]) / horizon).collect();
        let mut grid = Vec::new();
        let mut force = vec![0.0; m];
        let lam = self.model.basis.eigenvalues();
        Some(
            (0..steps)
                .map(|k| {
                    let t = k as f64 * self.dt();
                    let q: Vec<f64> = (0..m).map(|j| z1[j] + v[j] * t).collect();
                    self.stepper.drift_force(&self.model, &q, &mut grid, &mut force);
                    self.active.iter().map(|&j| (self.model.gamma * v[j] + lam[j] * q[j] - force[j]) / self.b[j]).collect()
                })
                .collect(),
        )
    }
}

/// Soft exclusion of balls around given states.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub points: Vec<Vec<f64>>,
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Zero,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasipotentialOptions {
    pub horizons: Vec<f64>,
    /// Endpoint penalty weights `1/eta^2`, increasing.
    pub penalties: Vec<f64>,
    pub inits: Vec<InitKind>,
    pub max_iter: usize,
    pub gtol: f64,
    /// Relative objective progress over 20 iterations below which a rung stops.
    pub ftol: f64,
    pub barrier: Option<Barrier>,
}

impl Default for QuasipotentialOptions {
    fn default() -> Self {
        QuasipotentialOptions {
            horizons: vec![2.0, 4.0, 8.0, 16.0],
            penalties: vec![1e2, 1e3, 1e4, 1e5],
            inits: vec![InitKind::Line, InitKind::Zero],
            max_iter: 3000,
            gtol: 1e-8,
            ftol: 1e-10,
            barrier: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRung {
    pub eta: f64,
    pub action: f64,
    /// `|x_T - z_2|_G`.
    pub miss: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartReport {
    pub horizon: f64,
    pub init: InitKind,
    pub ladder: Vec<LadderRung>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasipotentialResult {
    /// Action of the best start at the smallest `eta`.
    pub value: f64,
    pub horizon: f64,
    pub path: ControlPath,
    pub states: Vec<Vec<f64>>,
    pub ladder: Vec<LadderRung>,
    /// The action does not decrease as `eta` shrinks (within `1e-6` relative).
    pub monotone: bool,
    pub endpoint_miss: f64,
    pub converged: bool,
    pub starts: Vec<StartReport>,
}

struct Problem<'a, D: ControlledDynamics> {
    dyn_: &'a D,
    z1: &'a [f64],
    z2: &'a [f64],
    steps: usize,
    metric: Vec<f64>,
    barrier: Option<&'a Barrier>,
}

impl<'a, D: ControlledDynamics> Problem<'a, D> {
    fn forward(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let (n, c) = (self.dyn_.state_dim(), self.dyn_.control_dim());
        let mut xs = Vec::with_capacity(self.steps + 1);
        xs.push(self.z1.to_vec());
        for k in 0..self.steps {
            let mut out = vec![0.0; n];
            self.dyn_.step(&xs[k], &w[k * c..(k + 1) * c], &mut out);
            xs.push(out);
        }
        xs
    }

    fn action(&self, w: &[f64]) -> f64 {
        0.5 * self.dyn_.dt() * w.iter().map(|x| x * x).sum::<f64>()
    }

    fn miss(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.z2).zip(&self.metric).map(|((a, b), g)| g * (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Barrier value at `x`, adding its gradient into `grad`.
    fn barrier_at(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let Some(b) = self.barrier else { return 0.0 };
        let dt = self.dyn_.dt();
        let r2 = b.radius * b.radius;
        let mut val = 0.0;
        let mut g = vec![0.0; x.len()];
        for p in &b.points {
            let d2: f64 = x.iter().zip(p).zip(&self.metric).map(|((a, c), m)| m * (a - c) * (a - c)).sum();
            let s = 1.0 - d2 / r2;
            if s > 0.0 {
                val += b.weight * dt * s * s;
                for i in 0..x.len() {
                    g[i] += b.weight * dt * 2.0 * s * (-2.0 * self.metric[i] * (x[i] - p[i]) / r2);
                }
            }
        }
        if let Some(out) = grad {
            out.iter_mut().zip(&g).for_each(|(o, v)| *o += v);
        }
        val
    }

    fn objective(&self, w: &[f64], pen: f64, grad: &mut [f64]) -> f64 {
        let (n, c, dt) = (self.dyn_.state_dim(), self.dyn_.control_dim(), self.dyn_.dt());
        let xs = self.forward(w);
        let xk = &xs[self.steps];
        if xk.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let mut f = self.action(w) + pen * self.miss(xk).powi(2);
        let mut lam: Vec<f64> = (0..n).map(|i| 2.0 * pen * self.metric[i] * (xk[i] - self.z2[i])).collect();
        f += self.barrier_at(xk, Some(&mut lam));
        let mut gx = vec![0.0; n];
        for k in (0..self.steps).rev() {
            let wk = &w[k * c..(k + 1) * c];
            let gk = &mut grad[k * c..(k + 1) * c];
            self.dyn_.step_vjp(&xs[k], wk, &lam, &mut gx, gk);
            for (g, v) in gk.iter_mut().zip(wk) {
                *g += dt * v;
            }
            core::mem::swap(&mut lam, &mut gx);
            if k > 0 {
                f += self.barrier_at(&xs[k], Some(&mut lam));
            }
        }
        f
    }
}

fn run_start<D: ControlledDynamics>(
    dyn_: &D,
    z1: &[f64],
    z2: &[f64],
    horizon: f64,
    init: InitKind,
    opts: &QuasipotentialOptions,
) -> (StartReport, Vec<f64>) {
    let steps = ((horizon / dyn_.dt()).round() as usize).max(1);
    let c = dyn_.control_dim();
    let prob = Problem { dyn_, z1, z2, steps, metric: dyn_.metric(), barrier: opts.barrier.as_ref() };
    let mut w = match init {
        InitKind::Line => dyn_.line_controls(z1, z2, steps).map(|l| l.concat()).unwrap_or_else(|| vec![0.0; steps * c]),
        InitKind::Zero => vec![0.0; steps * c],
    };
    let mut ladder = Vec::new();
    let mut iterations = 0;
    // optimize over v = sqrt(dt) w, in which the action is 1/2 |v|^2
    let sq = dyn_.dt().sqrt();
    let mut gw = vec![0.0; w.len()];
    for &pen in &opts.penalties {
        let v0: Vec<f64> = w.iter().map(|x| x * sq).collect();
        let r = minimize(
            |v, g| {
                let wv: Vec<f64> = v.iter().map(|x| x / sq).collect();
                let f = prob.objective(&wv, pen, &mut gw);
                g.iter_mut().zip(&gw).for_each(|(g, x)| *g = x / sq);
                f
            },
            v0,
            LbfgsOptions { max_iter: opts.max_iter, memory: 12, gtol: opts.gtol, ftol: opts.ftol },
        );
        iterations += r.iterations;
        w = r.x.iter().map(|x| x / sq).collect();
        let xs = prob.forward(&w);
        ladder.push(LadderRung {
            eta: pen.powf(-0.5),
            action: prob.action(&w),
            miss: prob.miss(&xs[steps]),
            objective: r.f,
            converged: r.converged,
        });
    }
    (StartReport { horizon: steps as f64 * dyn_.dt(), init, ladder, iterations }, w)
}

/// `V(z1, z2)` estimated over multistarts in the horizon and the initial control.
pub fn quasipotential<D: ControlledDynamics>(
    dyn_: &D,
    z1: &[f64],
    z2: &[f64],
    opts: &QuasipotentialOptions,
) -> Result<QuasipotentialResult> {
    let n = dyn_.state_dim();
    if z1.len() != n || z2.len() != n {
        return Err(Error::Dimension { expected: n, found: z1.len().max(z2.len()) });
    }
    if opts.horizons.is_empty() || opts.penalties.is_empty() || opts.inits.is_empty() {
        return Err(Error::config("quasipotential needs horizons, penalties and initializations"));
    }
    if opts.penalties.iter().any(|p| !(*p > 0.0)) || opts.penalties.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("penalty weights must be positive and increasing"));
    }
    let jobs: Vec<(f64, InitKind)> = opts.horizons.iter().flat_map(|h| opts.inits.iter().map(move |i| (*h, *i))).collect();
    let runs = par_map(jobs.len(), |i| run_start(dyn_, z1, z2, jobs[i].0, jobs[i].1, opts));
    let best = (0..runs.len())
        .filter(|i| runs[*i].0.ladder.last().unwrap().objective.is_finite())
        .min_by(|a, b| {
            let fa = runs[*a].0.ladder.last().unwrap().objective;
            let fb = runs[*b].0.ladder.last().unwrap().objective;
            fa.total_cmp(&fb)
        })
        .ok_or_else(|| Error::NoConvergence("every start diverged".to_string()))?;
    let (report, w) = &runs[best];
    let c = dyn_.control_dim();
    let steps = w.len() / c;
    let dt = dyn_.dt();
    let prob = Problem { dyn_, z1, z2, steps, metric: dyn_.metric(), barrier: None };
    let states = prob.forward(w);
    let mut controls: Vec<Field> = (0..steps).map(|k| dyn_.control_field(&w[k * c..(k + 1) * c])).collect();
    controls.push(controls.last().cloned().unwrap());
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    let last = *report.ladder.last().unwrap();
    // the action of a piecewise-constant control is the rectangle sum
    let path = ControlPath { times, controls, action: last.action };
    let ladder = report.ladder.clone();
    let monotone = ladder.windows(2).all(|r| r[1].action >= r[0].action * (1.0 - 1e-6) - 1e-12);
    Ok(QuasipotentialResult {
        value: last.action,
        horizon: report.horizon,
        path,
        states,
        ladder,
        monotone,
        endpoint_miss: last.miss,
        converged: last.converged,
        starts: runs.into_iter().map(|r| r.0).collect(),
    })
}
