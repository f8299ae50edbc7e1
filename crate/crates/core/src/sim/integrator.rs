//! Stochastic exponential integrator for the Galerkin system
//!
//! ```text
//! dq_j = p_j dt
//! dp_j = (-lambda_j q_j - gamma p_j + g_j(q)) dt + sigma_j dbeta_j
//! ```
//!
//! where `g = P_M(h - f(u))` is frozen over a step. Each mode is advanced
//! with the exact 2x2 propagator `exp(A_j dt)`, the exact response
//! `int_0^dt exp(A_j s) ds e_2` to the frozen forcing, and an exactly
//! sampled stochastic convolution. The convolution is drawn jointly with the
//! Brownian increment `dbeta_j` of the step, which is what makes the
//! discrete Girsanov weight `exp(a dbeta - a^2 dt / 2)` exact for drifts that
//! are constant over a step.

use super::WaveModel;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, expm, Mat};
use crate::prelude::*;
use crate::rng::{normal, StreamRng};
use crate::spectral::PhaseState;

#[derive(Debug, Clone, Copy)]
struct ModeStep {
    /// `exp(A dt)`, row-major.
    phi: [f64; 4],
    /// Response of `(q, p)` to a unit constant velocity forcing over `dt`.
    psi: [f64; 2],
    /// Lower Cholesky factor of `Cov(X_q, X_p, dbeta)`, row-major 3x3.
    chol: [f64; 9],
}

/// Per-mode stochastic convolution and Brownian increment for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub dw: Vec<f64>,
}

impl NoiseIncrement {
    pub fn zeros(modes: usize) -> Self {
        NoiseIncrement { pos: vec![0.0; modes], vel: vec![0.0; modes], dw: vec![0.0; modes] }
    }
}

/// Mutable per-trajectory buffers.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub grid: Vec<f64>,
    pub force: Vec<f64>,
    pub aux: Vec<f64>,
    pub increment: NoiseIncrement,
}

impl Workspace {
    pub fn new(modes: usize, grid_len: usize) -> Self {
        Workspace {
            grid: vec![0.0; grid_len],
            force: vec![0.0; modes],
            aux: vec![0.0; modes],
            increment: NoiseIncrement::zeros(modes),
        }
    }
}

/// Immutable step operator for a model and a step size; share it across
/// threads and give each trajectory its own [`Workspace`].
#[derive(Debug, Clone)]
pub struct Stepper {
    dt: f64,
    modes: Vec<ModeStep>,
    forcing: Vec<f64>,
    noisy: bool,
}

/// Stability rule for the explicit nonlinear substep.
pub fn max_stable_dt(lambda_max: f64) -> f64 {
    0.5 / lambda_max.sqrt()
}

fn propagators(lambda: f64, gamma: f64, dt: f64) -> ([f64; 4], [f64; 2]) {
    // exp([[A, I], [0, 0]] dt) = [[exp(A dt), int_0^dt exp(A s) ds], [0, I]]
    let mut m = Mat::zeros(4, 4);
    m[(0, 1)] = dt;
    m[(1, 0)] = -lambda * dt;
    m[(1, 1)] = -gamma * dt;
    m[(0, 2)] = dt;
    m[(1, 3)] = dt;
    let e = expm(&m);
    ([e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]], [e[(0, 3)], e[(1, 3)]])
}

/// Covariance of `(X_q, X_p, beta(dt))` for `dp = ... + sigma dbeta`, by the
/// Van Loan block exponential.
pub(crate) fn convolution_covariance(lambda: f64, gamma: f64, sigma: f64, dt: f64) -> Mat {
    let a = Mat::from_rows(&[&[0.0, 1.0, 0.0], &[-lambda, -gamma, 0.0], &[0.0, 0.0, 0.0]]);
    let b = [0.0, sigma, 1.0];
    let mut c = Mat::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = -a[(i, j)] * dt;
            c[(i, 3 + j)] = b[i] * b[j] * dt;
            c[(3 + i, 3 + j)] = a[(j, i)] * dt;
        }
    }
    let e = expm(&c);
    let e22 = e.block(3, 3, 3, 3);
    let e12 = e.block(0, 3, 3, 3);
    let q = e22.transpose().matmul(&e12);
    let mut sym = Mat::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            sym[(i, j)] = 0.5 * (q[(i, j)] + q[(j, i)]);
        }
    }
    sym
}

impl Stepper {
    pub fn new(model: &WaveModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config("time step must be positive"));
        }
        let basis = &model.basis;
        let m = basis.mode_count();
        let noisy = !model.noise.is_zero();
        let modes = (0..m)
            .map(|j| {
                let lambda = basis.eigenvalues()[j];
                let (phi, psi) = propagators(lambda, model.gamma, dt);
                let mut chol = [0.0; 9];
                if noisy {
                    let cov = convolution_covariance(lambda, model.gamma, model.noise.sigma(j), dt);
                    let l = cholesky_psd(&cov);
                    for i in 0..3 {
                        for k in 0..3 {
                            chol[3 * i + k] = l[(i, k)];
                        }
                    }
                }
                ModeStep { phi, psi, chol }
            })
            .collect();
        Ok(Stepper { dt, modes, forcing: model.forcing.coeffs().to_vec(), noisy })
    }

    /// Like [`Stepper::new`] but rejecting steps above `0.5 / sqrt(lambda_M)`.
    pub fn checked(model: &WaveModel, dt: f64) -> Result<Self> {
        let cap = max_stable_dt(model.basis.lambda_max());
        if dt > cap {
            return Err(Error::config(alloc::format!(
                "time step {dt} exceeds the stability bound 0.5/sqrt(lambda_M) = {cap}"
            )));
        }
        Self::new(model, dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> usize {
        self.modes.len()
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn workspace(&self, model: &WaveModel) -> Workspace {
        Workspace::new(self.modes.len(), model.basis.grid_len())
    }

    /// Exact `exp(A dt)` of mode `j` as `[[a, b], [c, d]]`.
    pub fn propagator(&self, j: usize) -> [[f64; 2]; 2] {
        let p = self.modes[j].phi;
        [[p[0], p[1]], [p[2], p[3]]]
    }

    /// Response of mode `j` to a unit constant velocity forcing held over a step.
    pub fn forcing_response(&self, j: usize) -> [f64; 2] {
        self.modes[j].psi
    }

    /// Draw the convolution and Brownian increments of one step.
    pub fn draw(&self, rng: &mut StreamRng, inc: &mut NoiseIncrement) {
        if !self.noisy {
            inc.pos.iter_mut().for_each(|x| *x = 0.0);
            inc.vel.iter_mut().for_each(|x| *x = 0.0);
            inc.dw.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        for (j, ms) in self.modes.iter().enumerate() {
            let z = [normal(rng), normal(rng), normal(rng)];
            let l = &ms.chol;
            inc.pos[j] = l[0] * z[0];
            inc.vel[j] = l[3] * z[0] + l[4] * z[1];
            inc.dw[j] = l[6] * z[0] + l[7] * z[1] + l[8] * z[2];
        }
    }

    /// `P_M(h - f(u))` into `out`.
    pub fn drift_force(&self, model: &WaveModel, q: &[f64], grid: &mut Vec<f64>, out: &mut [f64]) {
        if model.nonlinearity.is_zero() {
            out.copy_from_slice(&self.forcing);
            return;
        }
        let nl = &model.nonlinearity;
        model.basis.apply_pointwise_into(q, |u| nl.value(u), grid, out);
        for (o, h) in out.iter_mut().zip(&self.forcing) {
            *o = h - *o;
        }
    }

    /// Advance `y` by one step under the frozen velocity forcing `force`.
    pub fn advance(&self, y: &mut PhaseState, force: &[f64], inc: Option<&NoiseIncrement>) {
        let q = y.position.coeffs_mut();
        let p = y.velocity.coeffs_mut();
        for (j, ms) in self.modes.iter().enumerate() {
            let (q0, p0) = (q[j], p[j]);
            let mut qn = ms.phi[0] * q0 + ms.phi[1] * p0 + ms.psi[0] * force[j];
            let mut pn = ms.phi[2] * q0 + ms.phi[3] * p0 + ms.psi[1] * force[j];
            if let Some(inc) = inc {
                qn += inc.pos[j];
                pn += inc.vel[j];
            }
            q[j] = qn;
            p[j] = pn;
        }
    }

    /// One full step of the stochastic flow; the step's Brownian increments
    /// are left in `ws.increment.dw`.
    pub fn step(&self, model: &WaveModel, ws: &mut Workspace, y: &mut PhaseState, rng: &mut StreamRng, index: usize) -> Result<()> {
        self.draw(rng, &mut ws.increment);
        self.drift_force(model, y.position.coeffs(), &mut ws.grid, &mut ws.force);
        let inc = if self.noisy { Some(&ws.increment) } else { None };
        self.advance(y, &ws.force, inc);
        if !y.is_finite() {
            return Err(Error::NonFinite { step: index, what: "phase state".to_string() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form damped oscillator `q'' + gamma q' + lambda q = 0`.
    fn oscillator(lambda: f64, gamma: f64, q0: f64, p0: f64, t: f64) -> (f64, f64) {
        let disc = lambda - gamma * gamma / 4.0;
        let decay = (-gamma * t / 2.0).exp();
        let b = p0 + gamma * q0 / 2.0;
        if disc > 0.0 {
            let w = disc.sqrt();
            let (s, c) = ((w * t).sin(), (w * t).cos());
            let q = decay * (q0 * c + b * s / w);
            let dq = decay * (-gamma / 2.0 * (q0 * c + b * s / w) + (-q0 * w * s + b * c));
            (q, dq)
        } else {
            let w = (-disc).sqrt();
            let (s, c) = ((w * t).sinh(), (w * t).cosh());
            let q = decay * (q0 * c + b * s / w);
            let dq = decay * (-gamma / 2.0 * (q0 * c + b * s / w) + (q0 * w * s + b * c));
            (q, dq)
        }
    }

    #[test]
    fn propagator_matches_closed_form() {
        for &(lambda, gamma) in &[(1.0, 1.0), (25.0, 0.3), (0.1, 3.0), (4096.0, 1.0)] {
            let dt = 0.004;
            let (phi, _) = propagators(lambda, gamma, dt);
            let (q, p) = oscillator(lambda, gamma, 1.0, 0.0, dt);
            assert!((phi[0] - q).abs() < 1e-13 && (phi[2] - p).abs() < 1e-12 * lambda.max(1.0));
            let (q, p) = oscillator(lambda, gamma, 0.0, 1.0, dt);
            assert!((phi[1] - q).abs() < 1e-13 && (phi[3] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn forcing_response_integrates_the_propagator() {
        // psi = int_0^dt exp(A s) e_2 ds, checked with Simpson on the closed form.
        let (lambda, gamma, dt) = (9.0, 0.7, 0.05);
        let (_, psi) = propagators(lambda, gamma, dt);
        let n = 2000;
        let h = dt / n as f64;
        let mut sq = 0.0;
        let mut sp = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let (q, p) = oscillator(lambda, gamma, 0.0, 1.0, i as f64 * h);
            sq += w * q;
            sp += w * p;
        }
        assert!((psi[0] - sq * h / 3.0).abs() < 1e-14);
        assert!((psi[1] - sp * h / 3.0).abs() < 1e-13);
    }

    #[test]
    fn convolution_covariance_matches_quadrature() {
        // Oracle: Cov = int_0^dt k(s) k(s)^T ds with k(s) = (sigma exp(A s) e_2, 1).
        let (lambda, gamma, sigma, dt) = (4.0, 1.0, 0.7, 0.3);
        let cov = convolution_covariance(lambda, gamma, sigma, dt);
        let n = 4000;
        let h = dt / n as f64;
        let mut acc = [[0.0; 3]; 3];
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let (q, p) = oscillator(lambda, gamma, 0.0, 1.0, i as f64 * h);
            let k = [sigma * q, sigma * p, 1.0];
            for a in 0..3 {
                for b in 0..3 {
                    acc[a][b] += w * k[a] * k[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!((cov[(a, b)] - acc[a][b] * h / 3.0).abs() < 1e-12, "({a},{b})");
            }
        }
        assert!((cov[(2, 2)] - dt).abs() < 1e-14);
    }
}
