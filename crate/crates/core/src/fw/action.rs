use crate::error::{Error, Result};
use crate::prelude::*;
use crate::sim::NoiseModel;
use crate::spectral::Field;

/// Control `phi` sampled on a time grid, with its action `J_T(phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub times: Vec<f64>,
    pub controls: Vec<Field>,
    pub action: f64,
}

impl ControlPath {
    /// Builds the path and caches its action for noise coefficients `b`.
    pub fn new(times: Vec<f64>, controls: Vec<Field>, b: &[f64]) -> Result<Self> {
        if times.len() != controls.len() || times.is_empty() {
            return Err(Error::input("control path needs one control per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("time grid must be increasing"));
        }
        if controls.iter().any(|c| c.len() != b.len()) {
            return Err(Error::Dimension { expected: b.len(), found: controls[0].len() });
        }
        let mut p = ControlPath { times, controls, action: 0.0 };
        p.action = action_with_coeffs(&p, b);
        Ok(p)
    }

    pub fn zero(times: Vec<f64>, modes: usize) -> Self {
        let controls = vec![Field::zeros(modes); times.len()];
        ControlPath { times, controls, action: 0.0 }
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }
}

/// `J_T = 1/2 int |phi|^2_{H_theta}` by the trapezoid rule; `+inf` when the
/// control charges an unforced mode.
pub fn action(path: &ControlPath, noise: &NoiseModel) -> f64 {
    action_with_coeffs(path, noise.coeffs())
}

pub fn action_with_coeffs(path: &ControlPath, b: &[f64]) -> f64 {
    let density: Vec<f64> = path
        .controls
        .iter()
        .map(|c| {
            let mut acc = 0.0;
            for (x, bj) in c.coeffs().iter().zip(b) {
                if *x == 0.0 {
                    continue;
                }
                if *bj == 0.0 {
                    return f64::INFINITY;
                }
                acc += (x / bj).powi(2);
            }
            acc
        })
        .collect();
    if density.iter().any(|d| d.is_infinite()) {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for k in 1..density.len() {
        acc += 0.25 * (path.times[k] - path.times[k - 1]) * (density[k] + density[k - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::linspace;
    use crate::oracle::builtin_cubic;

    #[test]
    fn zero_control_has_zero_action() {
        let p = ControlPath::zero(linspace(0.0, 3.0, 31), 4);
        assert_eq!(action_with_coeffs(&p, &[1.0, 0.5, 0.0, 0.2]), 0.0);
    }

    #[test]
    fn constant_single_mode() {
        let b = [1.0, 0.5, 0.25];
        let (c, t) = (0.7, 4.0);
        let times = linspace(0.0, t, 11);
        let ctrl = vec![Field::single_mode(3, 2, c); 11];
        let p = ControlPath::new(times, ctrl, &b).unwrap();
        assert!((p.action - 0.5 * c * c / 0.25 * t).abs() < 1e-12);
    }

    #[test]
    fn unforced_mode_gives_infinite_action() {
        let p = ControlPath::new(vec![0.0, 1.0], vec![Field::single_mode(2, 2, 0.1); 2], &[1.0, 0.0]).unwrap();
        assert!(p.action.is_infinite());
    }

    #[test]
    fn refinement_changes_action_at_second_order() {
        let b = [1.0];
        let make = |k: usize| {
            let times = linspace(0.0, 2.0, k + 1);
            let ctrl = times.iter().map(|t| Field::from_coeffs(vec![(3.0 * t).sin()])).collect();
            ControlPath::new(times, ctrl, &b).unwrap().action
        };
        let exact = 0.5 * (1.0 - (12.0f64).sin() / 12.0);
        let (e1, e2) = ((make(100) - exact).abs(), (make(200) - exact).abs());
        assert!(e1 < 1e-3 && (e1 / e2 - 4.0).abs() < 0.1, "{e1} {e2}");
    }

    #[test]
    fn uphill_gradient_path_costs_twice_the_barrier() {
        // the time reversal u' = b(u) of the relaxation climbs from 0 to the saddle at 1
        let model = builtin_cubic();
        let b = model.drift().unwrap().clone();
        let a = model.potential().unwrap().clone();
        let dt = 1e-4;
        let (u0, mut u) = (1e-6, 1e-6);
        let mut times = vec![0.0];
        let mut ctrl = vec![Field::from_coeffs(vec![2.0 * b.eval(u)])];
        while u < 1.0 - 1e-6 {
            // classical RK4 on u' = b(u)
            let k1 = b.eval(u);
            let k2 = b.eval(u + 0.5 * dt * k1);
            let k3 = b.eval(u + 0.5 * dt * k2);
            let k4 = b.eval(u + dt * k3);
            u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            times.push(times.last().unwrap() + dt);
            ctrl.push(Field::from_coeffs(vec![2.0 * b.eval(u)]));
        }
        let p = ControlPath::new(times, ctrl, &[1.0]).unwrap();
        let target = 2.0 * (a.eval(u) - a.eval(u0));
        assert!((p.action - target).abs() < 0.01 * target, "{} vs {target}", p.action);
        assert!((target - 5.0 / 6.0).abs() < 1e-3);
    }
}
