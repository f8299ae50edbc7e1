use super::dynamics::Dynamics;
use super::legendre::PressureCurve;
use crate::error::{Error, Result};
use crate::linalg::{expm, Mat};
use crate::prelude::*;
use crate::rng::{uniform, StreamRng};

/// Continuous-time chain on `{0, .., n-1}` with a potential.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    generator: Mat,
    potential: Vec<f64>,
}

impl FiniteChain {
    pub fn new(generator: &[Vec<f64>], potential: Vec<f64>) -> Result<Self> {
        let n = generator.len();
        if n == 0 {
            return Err(Error::input("chain needs at least one state"));
        }
        if potential.len() != n {
            return Err(Error::Dimension { expected: n, found: potential.len() });
        }
        let mut g = Mat::zeros(n, n);
        for (i, row) in generator.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, found: row.len() });
            }
            let mut s = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if i != j && !(x >= 0.0) {
                    return Err(Error::input("off-diagonal rates must be nonnegative"));
                }
                g[(i, j)] = x;
                s += x;
            }
            let scale = row.iter().map(|x| x.abs()).fold(1.0, f64::max);
            if s.abs() > 1e-12 * scale {
                return Err(Error::input(alloc::format!("generator row {i} sums to {s}")));
            }
        }
        let chain = FiniteChain { generator: g, potential };
        if !chain.is_irreducible() {
            return Err(Error::input("chain is reducible"));
        }
        Ok(chain)
    }

    /// Two-state chain with rates `a: 0 -> 1`, `b: 1 -> 0`.
    pub fn two_state(a: f64, b: f64, potential: [f64; 2]) -> Result<Self> {
        Self::new(&[vec![-a, a], vec![b, -b]], potential.to_vec())
    }

    pub fn states(&self) -> usize {
        self.potential.len()
    }

    pub fn generator(&self) -> &Mat {
        &self.generator
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn with_potential(&self, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != self.states() {
            return Err(Error::Dimension { expected: self.states(), found: potential.len() });
        }
        Ok(FiniteChain { generator: self.generator.clone(), potential })
    }

    /// `G + diag(V)`.
    pub fn tilted(&self) -> Mat {
        let mut k = self.generator.clone();
        for (i, v) in self.potential.iter().enumerate() {
            k[(i, i)] += v;
        }
        k
    }

    fn reach(&self, transpose: bool) -> Vec<bool> {
        let n = self.states();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let rate = if transpose { self.generator[(j, i)] } else { self.generator[(i, j)] };
                if i != j && rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reach(false).iter().all(|x| *x) && self.reach(true).iter().all(|x| *x)
    }

    /// Stationary law of the untilted chain.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let plain = self.with_potential(vec![0.0; self.states()])?;
        Ok(fk_eigen_exact(&plain)?.mu)
    }
}

/// Principal eigentriple of `G + diag(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTriple {
    /// Top eigenvalue of `G + diag(V)`.
    pub log_lambda: f64,
    /// Per-unit-time multiplicative eigenvalue `exp(log_lambda)`.
    pub lambda: f64,
    /// Right eigenvector, normalized by `<h, mu> = 1`.
    pub h: Vec<f64>,
    /// Left eigenvector, a probability vector.
    pub mu: Vec<f64>,
    /// `||(G + V) h - log_lambda h||_inf`.
    pub residual_right: f64,
    /// `||(G + V)^T mu - log_lambda mu||_inf`.
    pub residual_left: f64,
    /// `(t, lambda^{-t} ||P_t^V 1 - h||_inf)` for `t = 1, 2, 4, 8`.
    pub convergence: Vec<(f64, f64)>,
}

/// Exact eigentriple by repeated squaring of `exp(G + diag V)` down to its
/// rank-one Perron projector.
pub fn fk_eigen_exact(chain: &FiniteChain) -> Result<EigenTriple> {
    let n = chain.states();
    let k = chain.tilted();
    let mut p = expm(&k);
    let mut converged = false;
    for _ in 0..200 {
        let mut next = p.matmul(&p);
        let s = next.max_abs();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NoConvergence("Perron projector degenerated".to_string()));
        }
        next = next.scale(1.0 / s);
        let change = next.add(&p.scale(-1.0)).max_abs();
        p = next;
        if change < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("spectral gap too small for the Perron iteration".to_string()));
    }
    let ones = vec![1.0; n];
    let mut h = p.matvec(&ones);
    let mut mu = p.transpose().matvec(&ones);
    let smu: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= smu);
    let kh = k.matvec(&h);
    let num: f64 = mu.iter().zip(&kh).map(|(a, b)| a * b).sum();
    let den: f64 = mu.iter().zip(&h).map(|(a, b)| a * b).sum();
    let log_lambda = num / den;
    h.iter_mut().for_each(|x| *x /= den);
    let kh = k.matvec(&h);
    let residual_right = kh.iter().zip(&h).map(|(a, b)| (a - log_lambda * b).abs()).fold(0.0, f64::max);
    let ktmu = k.transpose().matvec(&mu);
    let residual_left = ktmu.iter().zip(&mu).map(|(a, b)| (a - log_lambda * b).abs()).fold(0.0, f64::max);
    let convergence = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&t| {
            let pt = expm(&k.scale(t)).matvec(&ones);
            let scale = (-log_lambda * t).exp();
            let err = pt.iter().zip(&h).map(|(a, b)| (a * scale - b).abs()).fold(0.0, f64::max);
            (t, err)
        })
        .collect();
    Ok(EigenTriple {
        log_lambda,
        lambda: log_lambda.exp(),
        h,
        mu,
        residual_right,
        residual_left,
        convergence,
    })
}

/// Exact pressure `Q(beta) = log_lambda(G + beta diag psi)` on a grid.
pub fn pressure_exact(chain: &FiniteChain, psi: &[f64], betas: &[f64]) -> Result<PressureCurve> {
    let q = betas
        .iter()
        .map(|b| Ok(fk_eigen_exact(&chain.with_potential(psi.iter().map(|x| b * x).collect())?)?.log_lambda))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PressureCurve::exact(betas.to_vec(), q))
}

/// Exact jump simulation of the chain sampled every `dt`.
#[derive(Debug, Clone)]
pub struct ChainDynamics {
    pub chain: FiniteChain,
    pub dt: f64,
}

impl ChainDynamics {
    fn advance(&self, x: &mut usize, rng: &mut StreamRng, mut on_hold: impl FnMut(usize, f64)) {
        let g = &self.chain.generator;
        let n = self.chain.states();
        let mut left = self.dt;
        loop {
            let rate = -g[(*x, *x)];
            let hold = if rate > 0.0 { -(1.0 - uniform(rng)).ln() / rate } else { f64::INFINITY };
            if hold >= left {
                on_hold(*x, left);
                return;
            }
            on_hold(*x, hold);
            left -= hold;
            let target = uniform(rng) * rate;
            let mut acc = 0.0;
            let mut next = *x;
            for j in 0..n {
                if j == *x {
                    continue;
                }
                acc += g[(*x, j)];
                next = j;
                if target < acc {
                    break;
                }
            }
            *x = next;
        }
    }
}

impl Dynamics for ChainDynamics {
    type State = usize;

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, x: &mut usize, rng: &mut StreamRng) -> Result<()> {
        self.advance(x, rng, |_, _| {});
        Ok(())
    }

    /// Exact integral of `V` along the jump path.
    fn step_integrate(&self, x: &mut usize, rng: &mut StreamRng, v: &(dyn Fn(&usize) -> f64 + Sync)) -> Result<f64> {
        let mut acc = 0.0;
        self.advance(x, rng, |s, d| acc += v(&s) * d);
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_golden_ratio() {
        let chain = FiniteChain::two_state(1.0, 1.0, [1.0, 0.0]).unwrap();
        let e = fk_eigen_exact(&chain).unwrap();
        assert!((e.log_lambda - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(e.residual_right <= 1e-10 && e.residual_left <= 1e-10);
        let dot: f64 = e.h.iter().zip(&e.mu).map(|(a, b)| a * b).sum();
        assert!((dot - 1.0).abs() < 1e-12);
        assert!(e.convergence.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-14));
    }

    #[test]
    fn zero_potential_and_constant_shift() {
        let g = vec![vec![-2.0, 1.5, 0.5], vec![0.3, -0.3, 0.0], vec![1.0, 1.0, -2.0]];
        let chain = FiniteChain::new(&g, vec![0.0; 3]).unwrap();
        let e = fk_eigen_exact(&chain).unwrap();
        assert!(e.log_lambda.abs() < 1e-12);
        assert!(e.h.iter().all(|x| (x - 1.0).abs() < 1e-10));
        // The stationary law solves mu G = 0.
        let r = chain.generator().transpose().matvec(&e.mu);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
        let v = vec![0.4, -0.2, 0.9];
        let base = fk_eigen_exact(&chain.with_potential(v.clone()).unwrap()).unwrap();
        let shifted = fk_eigen_exact(&chain.with_potential(v.iter().map(|x| x + 0.7).collect()).unwrap()).unwrap();
        assert!((shifted.lambda / base.lambda - 0.7f64.exp()).abs() < 1e-10);
        for (a, b) in base.h.iter().zip(&shifted.h) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_tilt_identity() {
        let chain = FiniteChain::two_state(0.7, 2.0, [0.5, 0.5]).unwrap();
        let e = fk_eigen_exact(&chain).unwrap();
        assert!(e.convergence.iter().all(|(_, err)| *err < 1e-12));
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(FiniteChain::new(&[vec![-1.0, 0.5], vec![1.0, -1.0]], vec![0.0, 0.0]).is_err());
        assert!(FiniteChain::new(&[vec![0.0, 0.0], vec![1.0, -1.0]], vec![0.0, 0.0]).is_err());
    }
}
