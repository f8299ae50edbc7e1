use crate::error::{Error, Result};
use crate::linalg::{solve, symmetric_eigenvalues, Mat};
use crate::oracle::ToyModel;
use crate::prelude::*;
use crate::rng::{normal, substream};
use crate::sim::WaveModel;
use crate::spectral::{Field, PhaseState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub starts: usize,
    pub seed: u64,
    /// Scale of the random starts, `q_j ~ amplitude N(0, 1) / j`.
    pub amplitude: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Roots closer than this in `H^1` are merged.
    pub dedupe: f64,
}

impl EquilibriumOptions {
    pub fn new(starts: usize, seed: u64) -> Self {
        EquilibriumOptions { starts, seed, amplitude: 2.0, tol: 1e-10, max_iter: 100, dedupe: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: PhaseState,
    pub residual: f64,
    /// Largest real part of the linearized damped-wave spectrum.
    pub max_real_part: f64,
    pub stable: bool,
    pub found_from: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// Starts that did not converge, with the reason.
    pub failures: Vec<(usize, String)>,
}

/// `P diag(f'(u)) P^T` at position coefficients `q`.
pub fn nonlinear_jacobian(model: &WaveModel, q: &[f64]) -> Mat {
    let m = q.len();
    let b = &model.basis;
    let mut u = vec![0.0; b.grid_len()];
    b.synthesize_into(q, &mut u);
    let fp: Vec<f64> = u.iter().map(|x| model.nonlinearity.derivative(*x)).collect();
    let mut jac = Mat::zeros(m, m);
    let mut e = vec![0.0; m];
    let mut grid = vec![0.0; b.grid_len()];
    let mut col = vec![0.0; m];
    for k in 0..m {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[k] = 1.0;
        b.synthesize_into(&e, &mut grid);
        grid.iter_mut().zip(&fp).for_each(|(g, d)| *g *= d);
        b.analyze_into(&grid, &mut col);
        for i in 0..m {
            jac[(i, k)] = col[i];
        }
    }
    jac
}

/// `Lambda q + P f(u) - h`.
pub fn stationary_residual(model: &WaveModel, q: &[f64]) -> Vec<f64> {
    let b = &model.basis;
    let mut grid = Vec::new();
    let mut out = vec![0.0; q.len()];
    b.apply_pointwise_into(q, |x| model.nonlinearity.value(x), &mut grid, &mut out);
    for j in 0..q.len() {
        out[j] += b.eigenvalues()[j] * q[j] - model.forcing.coeffs()[j];
    }
    out
}

/// Largest real part of the spectrum of `q'' + gamma q' + K q = 0` with `K` symmetric.
pub fn damped_spectrum_max_real(stiffness: &Mat, gamma: f64) -> f64 {
    symmetric_eigenvalues(stiffness)
        .into_iter()
        .map(|mu| {
            let disc = 0.25 * gamma * gamma - mu;
            if disc >= 0.0 { -0.5 * gamma + disc.sqrt() } else { -0.5 * gamma }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn newton(model: &WaveModel, mut q: Vec<f64>, opts: &EquilibriumOptions) -> core::result::Result<(Vec<f64>, f64), String> {
    let lam = model.basis.eigenvalues();
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r = stationary_residual(model, &q);
    let mut rn = norm(&r);
    for _ in 0..opts.max_iter {
        if !rn.is_finite() {
            return Err("residual is not finite".to_string());
        }
        if rn <= opts.tol {
            return Ok((q, rn));
        }
        let mut jac = nonlinear_jacobian(model, &q);
        for j in 0..q.len() {
            jac[(j, j)] += lam[j];
        }
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = solve(&jac, &neg).ok_or_else(|| "singular Jacobian".to_string())?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = q.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            let tr = stationary_residual(model, &trial);
            let tn = norm(&tr);
            if tn < rn || step < 1e-6 {
                q = trial;
                r = tr;
                rn = tn;
                break;
            }
            step *= 0.5;
        }
    }
    if rn <= opts.tol {
        Ok((q, rn))
    } else {
        Err(alloc::format!("no convergence after {} Newton steps, residual {rn:e}", opts.max_iter))
    }
}

/// Stationary solutions `-Laplace u + f(u) = h` from Newton multistarts.
/// Start 0 is the zero field. Failed starts are listed, never replaced.
pub fn find_equilibria(model: &WaveModel, opts: &EquilibriumOptions) -> Result<EquilibriumSearch> {
    if opts.starts == 0 {
        return Err(Error::config("need at least one start"));
    }
    let m = model.modes();
    let runs = crate::parallel::par_map(opts.starts, |s| {
        let q0: Vec<f64> = if s == 0 {
            vec![0.0; m]
        } else {
            let mut rng = substream(opts.seed, 0xE0, s as u64);
            (0..m).map(|j| opts.amplitude * normal(&mut rng) / (j + 1) as f64).collect()
        };
        newton(model, q0, opts)
    });
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    let mut failures = Vec::new();
    for (s, run) in runs.into_iter().enumerate() {
        match run {
            Err(e) => failures.push((s, e)),
            Ok((q, residual)) => {
                let dup = equilibria.iter().any(|e| {
                    let d: Vec<f64> = e.state.position.coeffs().iter().zip(&q).map(|(a, b)| a - b).collect();
                    model.basis.sobolev_norm_sq(&d, 1.0).sqrt() <= opts.dedupe
                });
                if dup {
                    continue;
                }
                let mut k = nonlinear_jacobian(model, &q);
                for j in 0..m {
                    k[(j, j)] += model.basis.eigenvalues()[j];
                }
                let max_real_part = damped_spectrum_max_real(&k, model.gamma);
                equilibria.push(Equilibrium {
                    state: PhaseState::at_rest(Field::from_coeffs(q)),
                    residual,
                    max_real_part,
                    stable: max_real_part < 0.0,
                    found_from: s,
                });
            }
        }
    }
    Ok(EquilibriumSearch { equilibria, failures })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyEquilibrium {
    pub x: f64,
    pub stable: bool,
}

/// Roots of the drift, stable where `b' > 0`.
pub fn toy_equilibria(model: &ToyModel) -> Vec<ToyEquilibrium> {
    let d = model.drift().map(|b| b.derivative());
    model
        .equilibria()
        .into_iter()
        .map(|x| ToyEquilibrium { x, stable: d.as_ref().map_or(true, |d| d.eval(x) > 0.0) })
        .collect()
}
