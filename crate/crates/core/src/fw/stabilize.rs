use super::action::ControlPath;
use crate::error::{Error, Result};
use crate::math::linear_fit;
use crate::prelude::*;
use crate::sim::{Stepper, WaveModel};
use crate::spectral::{Field, PhaseState};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationReport {
    pub path: ControlPath,
    /// `|S(t; v) - u_hat|^2` in the phase norm.
    pub distance_sq: Vec<f64>,
    /// `max_t |S(t) - u_hat|^2 e^{alpha t} / |v - u_hat|^2`.
    pub worst_ratio: f64,
    /// `worst_ratio <= 1 + 1e-6`.
    pub bound_holds: bool,
}

/// Drives `v` to the equilibrium `target` with the feedback
/// `phi = P_N (f(v~) - f(u_hat))` and records the control and the decay.
pub fn stabilization_control(
    model: &WaveModel,
    v: &PhaseState,
    target: &PhaseState,
    n: usize,
    dt: f64,
    horizon: f64,
) -> Result<StabilizationReport> {
    let m = model.modes();
    model.basis.check_state(v)?;
    model.basis.check_state(target)?;
    if n == 0 || n > m {
        return Err(Error::config(alloc::format!("feedback dimension {n} must lie in 1..={m}")));
    }
    let stepper = Stepper::new(model, dt)?;
    let steps = (horizon / dt).round() as usize;
    let mut grid = Vec::new();
    let nl = &model.nonlinearity;
    let mut f_hat = vec![0.0; m];
    model.basis.apply_pointwise_into(target.position.coeffs(), |u| nl.value(u), &mut grid, &mut f_hat);
    let d0 = model.basis.phase_norm_sq(&v.sub(target), model.alpha);
    let mut y = v.clone();
    let mut force = vec![0.0; m];
    let mut fv = vec![0.0; m];
    let mut times = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut distance_sq = Vec::with_capacity(steps + 1);
    let mut worst: f64 = if d0 > 0.0 { 1.0 } else { 0.0 };
    for k in 0..=steps {
        let t = k as f64 * dt;
        model.basis.apply_pointwise_into(y.position.coeffs(), |u| nl.value(u), &mut grid, &mut fv);
        let mut phi = vec![0.0; m];
        for j in 0..n {
            phi[j] = fv[j] - f_hat[j];
        }
        let d = model.basis.phase_norm_sq(&y.sub(target), model.alpha);
        if !d.is_finite() {
            return Err(Error::NonFinite { step: k, what: "stabilized state".to_string() });
        }
        if d0 > 0.0 {
            worst = worst.max(d * (model.alpha * t).exp() / d0);
        }
        times.push(t);
        distance_sq.push(d);
        controls.push(Field::from_coeffs(phi.clone()));
        if k == steps {
            break;
        }
        stepper.drift_force(model, y.position.coeffs(), &mut grid, &mut force);
        for j in 0..m {
            force[j] += phi[j];
        }
        stepper.advance(&mut y, &force, None);
    }
    let path = ControlPath::new(times, controls, model.noise.coeffs())?;
    Ok(StabilizationReport { path, distance_sq, worst_ratio: worst, bound_holds: worst <= 1.0 + 1e-6 })
}

/// Log-log slope of the stabilizing action against `|v - u_hat|`.
pub fn stabilization_scaling(
    model: &WaveModel,
    target: &PhaseState,
    direction: &PhaseState,
    distances: &[f64],
    n: usize,
    dt: f64,
    horizon: f64,
) -> Result<(f64, Vec<StabilizationReport>)> {
    let unit = model.basis.phase_norm_sq(direction, model.alpha).sqrt();
    if !(unit > 0.0) {
        return Err(Error::input("direction must be nonzero"));
    }
    let mut reports = Vec::with_capacity(distances.len());
    for d in distances {
        let v = target.add(&direction.scaled(d / unit));
        reports.push(stabilization_control(model, &v, target, n, dt, horizon)?);
    }
    let xs: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.path.action.ln()).collect();
    Ok((linear_fit(&xs, &ys).slope, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{NoiseModel, NoiseRule, Nonlinearity};
    use crate::spectral::SpectralBasis;
    use core::f64::consts::PI;

    fn model() -> WaveModel {
        let basis = SpectralBasis::interval(PI, 16).unwrap();
        let noise = NoiseModel::new(&basis, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 1.0, true).unwrap();
        WaveModel::new(basis, Nonlinearity::sine_gordon(), noise, 1.0).unwrap()
    }

    #[test]
    fn equilibrium_needs_no_control() {
        let m = model();
        let u = PhaseState::zeros(16);
        let r = stabilization_control(&m, &u, &u, 4, 0.01, 5.0).unwrap();
        assert_eq!(r.path.action, 0.0);
    }

    #[test]
    fn decay_bound_and_quadratic_action() {
        let m = model();
        let u = PhaseState::zeros(16);
        let dir = PhaseState::new(Field::single_mode(16, 1, 1.0).add(&Field::single_mode(16, 3, 0.5)), Field::single_mode(16, 2, 0.3));
        let (slope, reports) = stabilization_scaling(&m, &u, &dir, &[0.4, 0.2, 0.1, 0.05], 8, 0.01, 20.0).unwrap();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
        for r in &reports {
            assert!(r.bound_holds, "{}", r.worst_ratio);
        }
    }
}
