use crate::error::{Error, Result};
use crate::math::logspace;
use crate::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    /// `f(u) = |u|^rho u - lambda u`.
    KleinGordon { rho: f64, lambda: f64 },
    /// `f(u) = sin u`.
    SineGordon,
    /// `f(u) = sum_k c_k u^k` for `k = 1..=coeffs.len()`, so `f(0) = 0`.
    Polynomial(Vec<f64>),
}

/// Pointwise nonlinearity `f` with its primitive `F` (normalized by
/// `F(0) = 0`) and the dissipativity parameter `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub nu: f64,
}

impl Nonlinearity {
    /// Klein-Gordon family; the growth exponent must lie in `(0, 2)`.
    pub fn klein_gordon(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 2.0) {
            return Err(Error::config(alloc::format!(
                "klein_gordon exponent rho = {rho} violates the growth condition |f''(u)| <= C(|u|^(rho-1) + 1) with rho < 2"
            )));
        }
        Ok(Nonlinearity { kind: NonlinearityKind::KleinGordon { rho, lambda }, nu: 0.0 })
    }

    pub fn sine_gordon() -> Self {
        Nonlinearity { kind: NonlinearityKind::SineGordon, nu: 0.0 }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Nonlinearity { kind: NonlinearityKind::Polynomial(coeffs), nu: 0.0 }
    }

    /// `f = 0`, the free damped wave.
    pub fn free() -> Self {
        Self::polynomial(Vec::new())
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    /// Default `nu = (lambda_1 min gamma) / 8`.
    pub fn with_default_nu(self, lambda1: f64, gamma: f64) -> Self {
        self.with_nu(lambda1.min(gamma) / 8.0)
    }

    /// Configuration-time checks against the basis and damping.
    pub fn validate(&self, lambda1: f64, gamma: f64) -> Result<()> {
        if let NonlinearityKind::KleinGordon { rho, .. } = self.kind {
            if !(rho > 0.0 && rho < 2.0) {
                return Err(Error::config("klein_gordon exponent must lie in (0, 2)"));
            }
        }
        let cap = lambda1.min(gamma) / 8.0;
        if self.nu < 0.0 || self.nu > cap * (1.0 + 1e-12) {
            return Err(Error::config(alloc::format!(
                "dissipativity parameter nu = {} must lie in [0, (lambda_1 min gamma)/8 = {cap}]",
                self.nu
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            NonlinearityKind::Polynomial(c) => c.iter().all(|x| *x == 0.0),
            _ => false,
        }
    }

    /// Exponent `rho` used in the growth and dissipativity conditions.
    pub fn growth_exponent(&self) -> f64 {
        match &self.kind {
            NonlinearityKind::KleinGordon { rho, .. } => *rho,
            NonlinearityKind::SineGordon => 1.0,
            NonlinearityKind::Polynomial(c) => {
                let deg = c.iter().rposition(|x| *x != 0.0).map_or(1, |i| i + 1);
                ((deg as f64) - 1.0).max(1.0)
            }
        }
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::KleinGordon { rho, lambda } => {
                if *rho == 1.0 {
                    u.abs() * u - lambda * u
                } else {
                    u.abs().powf(*rho) * u - lambda * u
                }
            }
            NonlinearityKind::SineGordon => u.sin(),
            NonlinearityKind::Polynomial(c) => {
                let mut acc = 0.0;
                for &ck in c.iter().rev() {
                    acc = (acc + ck) * u;
                }
                acc
            }
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::KleinGordon { rho, lambda } => {
                if *rho == 1.0 {
                    2.0 * u.abs() - lambda
                } else {
                    (rho + 1.0) * u.abs().powf(*rho) - lambda
                }
            }
            NonlinearityKind::SineGordon => u.cos(),
            NonlinearityKind::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().rev() {
                    acc = acc * u + (k + 1) as f64 * ck;
                }
                acc
            }
        }
    }

    /// Primitive `F` with `F(0) = 0`.
    #[inline]
    pub fn primitive(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::KleinGordon { rho, lambda } => {
                u.abs().powf(rho + 2.0) / (rho + 2.0) - 0.5 * lambda * u * u
            }
            NonlinearityKind::SineGordon => 1.0 - u.cos(),
            NonlinearityKind::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().rev() {
                    acc = acc * u + ck / (k + 2) as f64;
                }
                acc * u * u
            }
        }
    }

    /// Grid scan of the dissipativity conditions on `[-1e4, 1e4]`.
    ///
    /// A condition is reported as violated when no constant works or when the
    /// constant needed on the full range exceeds the one needed on
    /// `[-1e2, 1e2]` by more than a factor 100 (it grows with the range).
    pub fn check_dissipativity(&self) -> DissipativityReport {
        let mut grid = vec![0.0];
        for x in logspace(1e-6, 1e4, 4000) {
            grid.push(x);
            grid.push(-x);
        }
        let nu = self.nu;
        let rho = self.growth_exponent();
        let expo = (rho + 2.0) / rho;
        let scan = |limit: f64| -> (f64, f64, Option<f64>) {
            let pts = grid.iter().copied().filter(|u| u.abs() <= limit);
            let mut c_lower = 0.0f64;
            let mut c_virial = 0.0f64;
            let mut pairs = Vec::new();
            for u in pts {
                let big_f = self.primitive(u);
                // F(u) >= -nu u^2 - C
                c_lower = c_lower.max(-big_f - nu * u * u);
                // f(u)u - F(u) >= -nu u^2 - C
                c_virial = c_virial.max(-(self.value(u) * u - big_f) - nu * u * u);
                // F(u) >= C^{-1}|f'(u)|^{(rho+2)/rho} - nu u^2 - C
                pairs.push((self.derivative(u).abs().powf(expo), big_f + nu * u * u));
            }
            let violated =
                |c: f64| pairs.iter().any(|&(a, b)| a / c - c > b + 1e-12 * (1.0 + b.abs()));
            let c_gradient = if !violated(1e-9) {
                Some(1e-9)
            } else if violated(1e12) {
                None
            } else {
                let (mut lo, mut hi) = (1e-9f64, 1e12f64);
                while hi / lo > 1.0 + 1e-10 {
                    let mid = (lo * hi).sqrt();
                    if violated(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(hi)
            };
            (c_lower, c_virial, c_gradient)
        };
        let (l_full, v_full, g_full) = scan(f64::INFINITY);
        let (l_sub, v_sub, g_sub) = scan(1e2);
        let stable = |full: f64, sub: f64| {
            if full.is_finite() && full <= 100.0 * (sub + 1.0) {
                Some(full)
            } else {
                None
            }
        };
        DissipativityReport {
            nu,
            c_lower_bound: stable(l_full, l_sub),
            c_virial: stable(v_full, v_sub),
            c_gradient: match (g_full, g_sub) {
                (Some(f), Some(s)) => stable(f, s),
                _ => None,
            },
        }
    }
}

/// Smallest admissible constants per dissipativity condition; `None` is a
/// violation certificate (no finite constant on the scan grid).
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub nu: f64,
    pub c_lower_bound: Option<f64>,
    pub c_virial: Option<f64>,
    pub c_gradient: Option<f64>,
}

impl DissipativityReport {
    pub fn holds(&self) -> bool {
        self.c_lower_bound.is_some() && self.c_virial.is_some() && self.c_gradient.is_some()
    }

    /// The constant `C` that serves all three conditions at once.
    pub fn constant(&self) -> Option<f64> {
        Some(self.c_lower_bound?.max(self.c_virial?).max(self.c_gradient?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_differentiate_to_values() {
        let cases = [
            Nonlinearity::klein_gordon(1.0, 0.5).unwrap(),
            Nonlinearity::klein_gordon(0.6, -0.2).unwrap(),
            Nonlinearity::sine_gordon(),
            Nonlinearity::polynomial(vec![0.3, -1.0, 2.0]),
        ];
        for nl in &cases {
            assert_eq!(nl.value(0.0), 0.0);
            assert_eq!(nl.primitive(0.0), 0.0);
            for &u in &[-2.3, -0.4, 0.1, 1.7] {
                let h = 1e-5;
                let fd = (nl.primitive(u + h) - nl.primitive(u - h)) / (2.0 * h);
                assert!((fd - nl.value(u)).abs() < 1e-7, "{nl:?} at {u}");
                let fd2 = (nl.value(u + h) - nl.value(u - h)) / (2.0 * h);
                assert!((fd2 - nl.derivative(u)).abs() < 1e-6, "{nl:?} at {u}");
            }
        }
    }

    #[test]
    fn klein_gordon_cubic_growth_is_rejected() {
        assert!(Nonlinearity::klein_gordon(2.5, 0.0).is_err());
        assert!(Nonlinearity::klein_gordon(2.0, 0.0).is_err());
    }

    #[test]
    fn dissipativity_scans() {
        let kg = Nonlinearity::klein_gordon(1.0, 0.0).unwrap().with_nu(0.125);
        let r = kg.check_dissipativity();
        assert!(r.holds(), "{r:?}");
        let sg = Nonlinearity::sine_gordon().with_nu(0.05);
        let r = sg.check_dissipativity();
        assert!(r.holds(), "{r:?}");
        assert_eq!(r.c_lower_bound, Some(0.0));
        // A defocusing-sign quadratic potential with no damping margin fails.
        let bad = Nonlinearity::polynomial(vec![-1.0]).with_nu(0.0);
        assert!(bad.check_dissipativity().c_lower_bound.is_none());
    }

    #[test]
    fn nu_is_capped() {
        let kg = Nonlinearity::klein_gordon(1.0, 0.0).unwrap().with_nu(0.5);
        assert!(kg.validate(1.0, 1.0).is_err());
        assert!(kg.with_default_nu(1.0, 1.0).validate(1.0, 1.0).is_ok());
    }
}
