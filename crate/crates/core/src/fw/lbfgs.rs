//! Limited-memory BFGS with a backtracking Armijo line search.

use crate::prelude::*;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when `|g|_inf <= gtol * max(1, |f|)`.
    pub gtol: f64,
    pub ftol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn minimize<F>(mut fg: F, x0: Vec<f64>, opts: LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut recent: Vec<f64> = Vec::new();
    for it in 0..opts.max_iter {
        if !f.is_finite() {
            return LbfgsResult { x, f, iterations: it, converged: false };
        }
        if inf_norm(&g) <= opts.gtol * f.abs().max(1.0) {
            return LbfgsResult { x, f, iterations: it, converged: true };
        }
        // two-loop recursion
        d.iter_mut().zip(&g).for_each(|(d, g)| *d = -g);
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho[i] * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        let gamma = if m > 0 { dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]) } else {
            1.0 / inf_norm(&g).max(1.0)
        };
        d.iter_mut().for_each(|v| *v *= gamma);
        for i in 0..m {
            let beta = rho[i] * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha[i] - beta) * sj;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d.iter_mut().zip(&g).for_each(|(d, g)| *d = -scale * g);
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut fnew;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] + step * d[i];
            }
            fnew = fg(&xn, &mut gn);
            if fnew.is_finite() && fnew <= f + 1e-4 * step * slope {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if s_hist.len() == opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                    rho.push(1.0 / sy);
                }
                core::mem::swap(&mut x, &mut xn);
                core::mem::swap(&mut g, &mut gn);
                f = fnew;
                // stagnation: less than `ftol` relative progress over 20 iterations
                recent.push(f);
                if recent.len() > 20 {
                    let old = recent.remove(0);
                    if old - f <= opts.ftol * f.abs().max(1e-300) {
                        return LbfgsResult { x, f, iterations: it + 1, converged: true };
                    }
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return LbfgsResult { x, f, iterations: it, converged: inf_norm(&g) <= 1e-3 * f.abs().max(1.0) };
        }
    }
    LbfgsResult { x, f, iterations: opts.max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            LbfgsOptions { max_iter: 500, memory: 8, gtol: 1e-10, ftol: 1e-14 },
        );
        assert!(r.converged && (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }
}
