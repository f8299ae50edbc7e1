//! Markov chain on the boundaries of small balls around stable equilibria.
//!
//! Around each node `u_i` sit balls `g_i` (radius `rho_1`) and `g~_i`
//! (radius `rho_0`). A cycle starts on `dg_i`, leaves `g~ = U g~_j` at
//! `sigma`, and ends at `tau`, the next hit of `dg = U dg_j`; the chain
//! records which component was hit.

use super::equilibria::toy_equilibria;
use super::rate::gradient_quasipotential_1d;
use crate::ergodic::Dynamics;
use crate::error::{Error, Result};
use crate::oracle::{ToyDynamics, ToyModel};
use crate::parallel::par_map;
use crate::prelude::*;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryChainConfig {
    pub rho1_prime: f64,
    pub rho0_prime: f64,
    pub rho1: f64,
    pub rho0: f64,
    pub rho_star: f64,
    pub eps: Vec<f64>,
    /// Number of cycles simulated per noise level.
    pub max_transitions: usize,
    pub dt: f64,
    pub seed: u64,
    /// Off-diagonal cells need at least this many transitions.
    pub min_per_cell: usize,
}

impl BoundaryChainConfig {
    pub fn new(eps: Vec<f64>, seed: u64) -> Self {
        BoundaryChainConfig {
            rho1_prime: 0.05,
            rho0_prime: 0.1,
            rho1: 0.2,
            rho0: 0.4,
            rho_star: 0.5,
            eps,
            max_transitions: 40_000,
            dt: 1e-3,
            seed,
            min_per_cell: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.rho1_prime, self.rho0_prime, self.rho1, self.rho0, self.rho_star];
        if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(alloc::format!(
                "radii must satisfy 0 < rho1' < rho0' < rho1 < rho0 < rho*, got {r:?}"
            )));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("noise levels must be positive"));
        }
        if !(self.dt > 0.0) || self.max_transitions == 0 {
            return Err(Error::config("need dt > 0 and at least one transition"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCell {
    pub from: usize,
    pub to: usize,
    pub count: usize,
    pub prob: f64,
    pub std_err: f64,
    /// `eps log P(i -> j)`.
    pub eps_log_p: f64,
    /// `-V~(i, j)`.
    pub target: f64,
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLevel {
    pub eps: f64,
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized transition matrix.
    pub matrix: Vec<Vec<f64>>,
    pub cells: Vec<ChainCell>,
    /// Mean cycle duration.
    pub mean_cycle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryChainReport {
    pub nodes: Vec<f64>,
    /// `V~(i, j)` from the gradient formula; `+inf` when another node blocks the way.
    pub v_tilde: Vec<Vec<f64>>,
    pub levels: Vec<BoundaryLevel>,
    pub config: BoundaryChainConfig,
}

impl BoundaryChainReport {
    pub fn undersampled(&self) -> bool {
        self.levels.iter().any(|l| l.cells.iter().any(|c| c.undersampled))
    }

    pub fn cell(&self, eps: f64, from: usize, to: usize) -> Option<&ChainCell> {
        self.levels.iter().find(|l| l.eps == eps)?.cells.iter().find(|c| c.from == from && c.to == to)
    }

    /// `|P(i -> j) - P(j -> i)|` measured in standard errors.
    pub fn symmetry_z(&self, eps: f64, i: usize, j: usize) -> Option<f64> {
        let a = self.cell(eps, i, j)?;
        let b = self.cell(eps, j, i)?;
        Some((a.prob - b.prob).abs() / (a.std_err.powi(2) + b.std_err.powi(2)).sqrt())
    }
}

fn which_ball(x: f64, nodes: &[f64], r: f64) -> Option<usize> {
    nodes.iter().position(|u| (x - u).abs() <= r)
}

/// Simulates the boundary chain of a 1D gradient toy on its stable equilibria.
pub fn boundary_chain(model: &ToyModel, cfg: &BoundaryChainConfig) -> Result<BoundaryChainReport> {
    cfg.validate()?;
    let potential = model.potential().ok_or_else(|| Error::input("boundary chain needs a gradient toy"))?.clone();
    let nodes: Vec<f64> = toy_equilibria(model).into_iter().filter(|e| e.stable).map(|e| e.x).collect();
    if nodes.len() < 2 {
        return Err(Error::input("boundary chain needs at least two stable equilibria"));
    }
    let gap = nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if cfg.rho_star >= 0.5 * gap + 1e-12 {
        return Err(Error::config(alloc::format!("rho* = {} must be below half the node spacing {gap}", cfg.rho_star)));
    }
    let n = nodes.len();
    let v_tilde: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (lo, hi) = (nodes[i].min(nodes[j]), nodes[i].max(nodes[j]));
                    if nodes.iter().any(|u| *u > lo && *u < hi) {
                        f64::INFINITY
                    } else {
                        gradient_quasipotential_1d(&potential, nodes[i], nodes[j])
                    }
                })
                .collect()
        })
        .collect();
    let levels = par_map(cfg.eps.len(), |e| -> Result<BoundaryLevel> {
        let eps = cfg.eps[e];
        let d = ToyDynamics::new(model.clone().with_eps(eps), cfg.dt)?;
        let mut rng = substream(cfg.seed, 0xB0, e as u64);
        let mut counts = vec![vec![0usize; n]; n];
        let mut state = 0usize;
        let mut x = nodes[0] + cfg.rho1;
        let mut steps = 0usize;
        for _ in 0..cfg.max_transitions {
            // leave g~
            while which_ball(x, &nodes, cfg.rho0).is_some() {
                d.step(&mut x, &mut rng)?;
                steps += 1;
            }
            // hit dg
            let next = loop {
                d.step(&mut x, &mut rng)?;
                steps += 1;
                if let Some(j) = which_ball(x, &nodes, cfg.rho1) {
                    break j;
                }
            };
            counts[state][next] += 1;
            state = next;
        }
        let mut matrix = vec![vec![0.0; n]; n];
        let mut cells = Vec::new();
        for i in 0..n {
            let row: usize = counts[i].iter().sum();
            for j in 0..n {
                let p = if row > 0 { counts[i][j] as f64 / row as f64 } else { 0.0 };
                matrix[i][j] = p;
                let se = if row > 0 { (p * (1.0 - p) / row as f64).sqrt() } else { f64::INFINITY };
                cells.push(ChainCell {
                    from: i,
                    to: j,
                    count: counts[i][j],
                    prob: p,
                    std_err: se,
                    eps_log_p: eps * p.ln(),
                    target: -v_tilde[i][j],
                    undersampled: i != j && counts[i][j] < cfg.min_per_cell,
                });
            }
        }
        Ok(BoundaryLevel { eps, counts, matrix, cells, mean_cycle: steps as f64 * cfg.dt / cfg.max_transitions as f64 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryChainReport { nodes, v_tilde, levels, config: cfg.clone() })
}

/// Runs each radius configuration and returns the index whose
/// `eps log P` at the smallest `eps` is closest to `-V~` on average.
pub fn boundary_radii_sweep(model: &ToyModel, configs: &[BoundaryChainConfig]) -> Result<(usize, Vec<BoundaryChainReport>)> {
    if configs.is_empty() {
        return Err(Error::config("empty radii sweep"));
    }
    let reports = configs.iter().map(|c| boundary_chain(model, c)).collect::<Result<Vec<_>>>()?;
    let score = |r: &BoundaryChainReport| {
        let lvl = r.levels.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)).unwrap();
        let errs: Vec<f64> = lvl
            .cells
            .iter()
            .filter(|c| c.from != c.to && c.target.is_finite() && c.prob > 0.0)
            .map(|c| (c.eps_log_p - c.target).abs())
            .collect();
        if errs.is_empty() { f64::INFINITY } else { errs.iter().sum::<f64>() / errs.len() as f64 }
    };
    let best = (0..reports.len()).min_by(|a, b| score(&reports[*a]).total_cmp(&score(&reports[*b]))).unwrap();
    Ok((best, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::builtin_doublewell;

    #[test]
    fn radii_ordering_is_enforced() {
        let mut c = BoundaryChainConfig::new(vec![1.0], 1);
        c.rho1 = 0.45;
        assert!(c.validate().is_err());
    }

    #[test]
    fn large_noise_rows_are_stochastic() {
        let mut c = BoundaryChainConfig::new(vec![1.0], 2);
        c.max_transitions = 2000;
        let r = boundary_chain(&builtin_doublewell(), &c).unwrap();
        let l = &r.levels[0];
        for row in &l.matrix {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(l.counts.iter().all(|row| row.iter().all(|c| *c > 0)));
        assert!((r.v_tilde[0][1] - 0.5).abs() < 1e-12 && (r.v_tilde[1][0] - 0.5).abs() < 1e-12);
    }
}
