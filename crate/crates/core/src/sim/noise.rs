use crate::error::{Error, Result};
use crate::prelude::*;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseRule {
    /// `b_j = c j^{-q}` for `j <= active` (all retained modes when `None`),
    /// zero above.
    Power { c: f64, q: f64, active: Option<usize> },
    Explicit(Vec<f64>),
}

/// Additive noise `sqrt(eps) sum_j b_j dbeta_j e_j` on the retained modes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    coeffs: Vec<f64>,
    amplitude: f64,
    rule: NoiseRule,
}

impl NoiseModel {
    /// Build the coefficient sequence for `basis`, checking the summability
    /// rule `q > (d + 2) / 2` for power laws.
    pub fn new(basis: &SpectralBasis, rule: NoiseRule, amplitude: f64, non_degenerate: bool) -> Result<Self> {
        let m = basis.mode_count();
        let coeffs = match &rule {
            NoiseRule::Power { c, q, active } => {
                let d = basis.dimension() as f64;
                if *q <= (d + 2.0) / 2.0 {
                    return Err(Error::config(alloc::format!(
                        "noise decay q = {q} gives a divergent B_1 = sum lambda_j b_j^2 in dimension {d}; need q > {}",
                        (d + 2.0) / 2.0
                    )));
                }
                let cut = active.unwrap_or(m).min(m);
                (1..=m).map(|j| if j <= cut { c * (j as f64).powf(-q) } else { 0.0 }).collect::<Vec<_>>()
            }
            NoiseRule::Explicit(b) => {
                let mut v = b.clone();
                v.resize(m, 0.0);
                v
            }
        };
        if coeffs.iter().any(|b| *b < 0.0 || !b.is_finite()) {
            return Err(Error::config("noise coefficients must be finite and nonnegative"));
        }
        if non_degenerate && coeffs.iter().any(|b| *b == 0.0) {
            return Err(Error::config("non-degenerate noise requires every b_j > 0"));
        }
        if !(amplitude >= 0.0) {
            return Err(Error::config("noise amplitude must be nonnegative"));
        }
        Ok(NoiseModel { coeffs, amplitude, rule })
    }

    pub fn zero(modes: usize) -> Self {
        NoiseModel { coeffs: vec![0.0; modes], amplitude: 0.0, rule: NoiseRule::Explicit(Vec::new()) }
    }

    pub fn rule(&self) -> &NoiseRule {
        &self.rule
    }

    /// Raw `b_j` (without the amplitude).
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The `sqrt(eps)` multiplier.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Effective per-mode diffusion `sqrt(eps) b_j`.
    pub fn sigma(&self, j: usize) -> f64 {
        self.amplitude * self.coeffs[j]
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.coeffs.iter().all(|b| *b == 0.0)
    }

    /// `B = sum (sqrt(eps) b_j)^2`.
    pub fn b_sum(&self) -> f64 {
        self.coeffs.iter().map(|b| (self.amplitude * b).powi(2)).sum()
    }

    /// `B_1 = sum lambda_j (sqrt(eps) b_j)^2`.
    pub fn b1_sum(&self, basis: &SpectralBasis) -> f64 {
        self.coeffs
            .iter()
            .zip(basis.eigenvalues())
            .map(|(b, l)| l * (self.amplitude * b).powi(2))
            .sum()
    }

    /// `sup_j (sqrt(eps) b_j)^2`.
    pub fn sup_b_sq(&self) -> f64 {
        self.coeffs.iter().map(|b| (self.amplitude * b).powi(2)).fold(0.0, f64::max)
    }

    /// Number of leading modes with nonzero forcing.
    pub fn supported_modes(&self) -> usize {
        self.coeffs.iter().take_while(|b| **b > 0.0).count()
    }

    /// Cameron-Martin norm squared `sum b_j^{-2} v_j^2`; `+inf` when `v`
    /// charges a mode with `b_j = 0`. Uses the raw coefficients: the
    /// amplitude is the separate `eps` of the action functional.
    pub fn cameron_martin_sq(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (x, b) in v.iter().zip(&self.coeffs) {
            if *x == 0.0 {
                continue;
            }
            if *b == 0.0 {
                return f64::INFINITY;
            }
            acc += (x / b).powi(2);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summability_rule_in_one_dimension() {
        let b = SpectralBasis::interval(core::f64::consts::PI, 16).unwrap();
        assert!(NoiseModel::new(&b, NoiseRule::Power { c: 1.0, q: 1.0, active: None }, 1.0, true).is_err());
        assert!(NoiseModel::new(&b, NoiseRule::Power { c: 1.0, q: 1.5, active: None }, 1.0, true).is_err());
        let n = NoiseModel::new(&b, NoiseRule::Power { c: 1.0, q: 2.0, active: None }, 1.0, true).unwrap();
        let direct: f64 = (1..=16).map(|j| (j as f64).powi(-4)).sum();
        assert!((n.b_sum() - direct).abs() < 1e-15);
        let direct1: f64 = (1..=16).map(|j| (j as f64).powi(2) * (j as f64).powi(-4)).sum();
        assert!((n.b1_sum(&b) - direct1).abs() < 1e-13);
    }

    #[test]
    fn degenerate_noise_and_cameron_martin() {
        let b = SpectralBasis::interval(core::f64::consts::PI, 6).unwrap();
        let rule = NoiseRule::Power { c: 1.0, q: 2.0, active: Some(3) };
        assert!(NoiseModel::new(&b, rule.clone(), 1.0, true).is_err());
        let n = NoiseModel::new(&b, rule, 1.0, false).unwrap();
        assert_eq!(n.supported_modes(), 3);
        assert_eq!(n.cameron_martin_sq(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]), f64::INFINITY);
        assert!((n.cameron_martin_sq(&[0.0, 0.25, 0.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
