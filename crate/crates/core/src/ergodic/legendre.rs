use crate::math::linspace;
use crate::prelude::*;

/// Sampled pressure `Q(beta)` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureCurve {
    pub betas: Vec<f64>,
    pub q: Vec<f64>,
    pub stderr: Vec<f64>,
    pub horizon: f64,
    pub paths: usize,
    /// `Osc(V)` bound recorded with the estimate, when known.
    pub oscillation: Option<f64>,
}

impl PressureCurve {
    pub fn exact(betas: Vec<f64>, q: Vec<f64>) -> Self {
        let n = betas.len();
        PressureCurve { betas, q, stderr: vec![0.0; n], horizon: f64::INFINITY, paths: 0, oscillation: None }
    }

    fn sorted(&self) -> Vec<(f64, f64, f64)> {
        let mut pts: Vec<(f64, f64, f64)> =
            self.betas.iter().zip(&self.q).zip(&self.stderr).map(|((b, q), s)| (*b, *q, *s)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    /// Lower convex hull of the samples, as `(beta, Q)` vertices.
    pub fn convex_hull(&self) -> Vec<(f64, f64)> {
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for (b, q, _) in self.sorted() {
            while hull.len() >= 2 {
                let (b1, q1) = hull[hull.len() - 2];
                let (b2, q2) = hull[hull.len() - 1];
                // drop the middle vertex when it lies on or above the chord
                if (q2 - q1) * (b - b1) >= (q - q1) * (b2 - b1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((b, q));
        }
        hull
    }

    fn hull_value(hull: &[(f64, f64)], b: f64) -> f64 {
        for w in hull.windows(2) {
            if b >= w[0].0 && b <= w[1].0 {
                let s = (b - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + s * (w[1].1 - w[0].1);
            }
        }
        hull.iter().find(|(x, _)| *x == b).map_or(f64::NAN, |(_, y)| *y)
    }

    /// Indices of samples lying more than 2 standard errors above the hull.
    pub fn convexity_violations(&self) -> Vec<usize> {
        let hull = self.convex_hull();
        (0..self.betas.len())
            .filter(|&i| {
                let h = Self::hull_value(&hull, self.betas[i]);
                self.q[i] - h > 2.0 * self.stderr[i] + 1e-12 * (1.0 + h.abs())
            })
            .collect()
    }

    /// Whether convexification moved any sample.
    pub fn hull_changed(&self) -> bool {
        let hull = self.convex_hull();
        self.betas
            .iter()
            .zip(&self.q)
            .any(|(b, q)| (q - Self::hull_value(&hull, *b)).abs() > 1e-12 * (1.0 + q.abs()))
    }
}

/// `sup_k (x_k p - y_k)` at each query point.
pub fn legendre_transform(xs: &[f64], ys: &[f64], query: &[f64]) -> Vec<f64> {
    query
        .iter()
        .map(|p| xs.iter().zip(ys).map(|(x, y)| x * p - y).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Rate function samples; `+inf` is the sentinel outside the slope range
/// of the convexified pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub p: Vec<f64>,
    pub i: Vec<f64>,
    hull: Vec<(f64, f64)>,
    pub hull_changed: bool,
}

impl RateCurve {
    fn slope_range(&self) -> (f64, f64) {
        slope_range(&self.hull)
    }

    pub fn value_at(&self, p: f64) -> f64 {
        let (lo, hi) = self.slope_range();
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if p < lo - tol || p > hi + tol {
            return f64::INFINITY;
        }
        let (b, q): (Vec<f64>, Vec<f64>) = self.hull.iter().copied().unzip();
        legendre_transform(&b, &q, &[p])[0].max(0.0)
    }

    /// `inf_{[lo, hi]} I`, exact for the piecewise-linear conjugate.
    pub fn inf_over(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = self.slope_range();
        let (l, h) = (lo.max(a), hi.min(b));
        if l > h {
            return f64::INFINITY;
        }
        let mut cands = vec![l, h];
        for w in self.hull.windows(2) {
            let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if s > l && s < h {
                cands.push(s);
            }
        }
        cands.iter().map(|p| self.value_at(*p)).fold(f64::INFINITY, f64::min)
    }

    /// Point where the rate vanishes (the mean of the observable).
    pub fn argmin(&self) -> f64 {
        let mut best = (f64::INFINITY, f64::NAN);
        for (p, i) in self.p.iter().zip(&self.i) {
            if *i < best.0 {
                best = (*i, *p);
            }
        }
        best.1
    }
}

fn slope_range(hull: &[(f64, f64)]) -> (f64, f64) {
    if hull.len() < 2 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let s = |w: &[(f64, f64)]| (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
    (s(&hull[..2]), s(&hull[hull.len() - 2..]))
}

/// Discrete Legendre transform of the convexified curve on `p_grid`, or on
/// 201 points spanning the hull slopes when no grid is given.
pub fn legendre(curve: &PressureCurve, p_grid: Option<&[f64]>) -> RateCurve {
    let hull = curve.convex_hull();
    let (lo, hi) = slope_range(&hull);
    let p: Vec<f64> = match p_grid {
        Some(g) => g.to_vec(),
        None if (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs()) => vec![lo],
        None => linspace(lo, hi, 201),
    };
    let (b, q): (Vec<f64>, Vec<f64>) = hull.iter().copied().unzip();
    let raw = legendre_transform(&b, &q, &p);
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let i = p
        .iter()
        .zip(raw)
        .map(|(pp, v)| if *pp < lo - tol || *pp > hi + tol { f64::INFINITY } else { v.max(0.0) })
        .collect();
    RateCurve { p, i, hull, hull_changed: curve.hull_changed() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> PressureCurve {
        let b = linspace(-2.0, 2.0, 401);
        let q = b.iter().map(|x| x * x / 2.0).collect();
        PressureCurve::exact(b, q)
    }

    #[test]
    fn quadratic_pressure_gives_quadratic_rate() {
        let rate = legendre(&quadratic(), None);
        for (p, i) in rate.p.iter().zip(&rate.i) {
            assert!((i - p * p / 2.0).abs() < 1e-3, "p = {p}");
        }
        assert!((rate.inf_over(0.4, 0.6) - 0.08).abs() < 1e-3);
        assert!(rate.inf_over(-0.1, 0.1).abs() < 1e-12);
        assert!(!rate.hull_changed);
    }

    #[test]
    fn linear_pressure_has_point_rate() {
        let b = linspace(-1.0, 1.0, 21);
        let q = b.iter().map(|x| 0.3 * x).collect();
        let rate = legendre(&PressureCurve::exact(b, q), None);
        assert_eq!(rate.p.len(), 1);
        assert!(rate.i[0].abs() < 1e-12);
        assert_eq!(rate.value_at(0.5), f64::INFINITY);
    }

    #[test]
    fn biconjugate_is_the_hull() {
        let b = linspace(-1.0, 1.0, 81);
        // a non-convex wiggle on top of a parabola
        let q: Vec<f64> = b.iter().map(|x| x * x + 0.05 * (9.0 * x).sin()).collect();
        let curve = PressureCurve::exact(b.clone(), q);
        assert!(curve.hull_changed());
        let hull = curve.convex_hull();
        let (hb, hq): (Vec<f64>, Vec<f64>) = hull.iter().copied().unzip();
        let slopes: Vec<f64> = linspace(-3.0, 3.0, 6001);
        let rate = legendre_transform(&hb, &hq, &slopes);
        let back = legendre_transform(&slopes, &rate, &b);
        for (x, y) in b.iter().zip(&back) {
            let h = PressureCurve::hull_value(&hull, *x);
            assert!((y - h).abs() < 1e-3, "beta = {x}");
        }
    }

    #[test]
    fn noisy_violation_is_flagged() {
        let mut c = quadratic();
        c.stderr = vec![1e-3; c.betas.len()];
        c.q[200] += 0.1;
        assert_eq!(c.convexity_violations(), vec![200]);
    }
}
